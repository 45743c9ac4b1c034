// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/op_counter.hpp"

namespace lavish {
namespace {

thread_local OpRecorder* t_recorder = nullptr;
thread_local std::vector<std::string> t_labels;

}  // namespace

OpRecorder::OpRecorder() : previous_(t_recorder) { t_recorder = this; }
OpRecorder::~OpRecorder() { t_recorder = previous_; }

OpCounts OpRecorder::total() const {
    OpCounts out;
    for (const auto& [_, c] : counts_) out += c;
    return out;
}

OpCounts OpRecorder::total_with_prefix(const std::string& prefix) const {
    OpCounts out;
    for (const auto& [label, c] : counts_) {
        if (label.compare(0, prefix.size(), prefix) == 0) out += c;
    }
    return out;
}

OpScope::OpScope(const std::string& label) {
    t_labels.push_back(t_labels.empty() ? label : t_labels.back() + "." + label);
}
OpScope::~OpScope() { t_labels.pop_back(); }

std::string current_op_label() { return t_labels.empty() ? std::string("unscoped") : t_labels.back(); }

void record_ops(const OpCounts& counts) {
    if (t_recorder == nullptr) return;
    t_recorder->counts_[current_op_label()] += counts;
}

}  // namespace lavish
