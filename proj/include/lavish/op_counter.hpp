// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0
//
// Execution-side operation counting. While an OpRecorder is alive on a
// thread, every contraction primitive adds its multiply-accumulates to the
// innermost OpScope label, and softmax adds its exponentials and divisions.
// Elementwise work (adds, activations, norms) is not counted as MACs.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace lavish {

struct OpCounts {
    std::uint64_t macs = 0;
    std::uint64_t exps = 0;
    std::uint64_t divs = 0;

    OpCounts& operator+=(const OpCounts& o) {
        macs += o.macs;
        exps += o.exps;
        divs += o.divs;
        return *this;
    }
    friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

class OpRecorder {
public:
    OpRecorder();
    ~OpRecorder();
    OpRecorder(const OpRecorder&) = delete;
    OpRecorder& operator=(const OpRecorder&) = delete;

    const std::map<std::string, OpCounts>& by_label() const { return counts_; }
    OpCounts total() const;
    // Sum over labels starting with prefix.
    OpCounts total_with_prefix(const std::string& prefix) const;

private:
    friend void record_ops(const OpCounts&);
    std::map<std::string, OpCounts> counts_;
    OpRecorder* previous_;
};

// Labels nest with '.' separators: OpScope("layer0") { OpScope("mha") } -> "layer0.mha".
class OpScope {
public:
    explicit OpScope(const std::string& label);
    ~OpScope();
    OpScope(const OpScope&) = delete;
    OpScope& operator=(const OpScope&) = delete;
};

std::string current_op_label();
void record_ops(const OpCounts& counts);

}  // namespace lavish
