// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/event_head.hpp"

#include <stdexcept>

#include "lavish/op_counter.hpp"

namespace lavish {

EventHead EventHead::make(std::size_t width, std::size_t classes, std::uint64_t seed, double stddev) {
    EventHead h;
    h.weight = random_normal({2 * width, classes}, stddev, seed, "head.weight");
    h.bias = Tensor::zeros({classes});
    return h;
}

EventHead EventHead::zeros(std::size_t width, std::size_t classes) {
    return EventHead{Tensor::zeros({2 * width, classes}), Tensor::zeros({classes})};
}

void EventHead::register_into(FreezeRegistry& reg) const {
    reg.add("head.weight", weight, false);
    reg.add("head.bias", bias, false);
}

Tensor event_head(const TokenSet& xa, const TokenSet& xv, const EventHead& head) {
    if (xa.width() != xv.width() || head.weight.rows() != xa.width() + xv.width()) {
        throw std::invalid_argument("event_head: width mismatch audio " + shape_to_string(xa.tokens.shape()) + ", visual " +
                                    shape_to_string(xv.tokens.shape()) + ", head " + shape_to_string(head.weight.shape()));
    }
    OpScope scope("head");
    const Tensor pooled = concat_cols({mean_rows(xa.tokens), mean_rows(xv.tokens)});
    return add_row_bias(matmul(pooled, head.weight), head.bias);
}

}  // namespace lavish
