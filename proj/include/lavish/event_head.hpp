// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "lavish/backbone.hpp"

namespace lavish {

// Mean-pools each final-layer stream, concatenates [audio | visual] and maps
// the 2d vector to class logits with one linear layer.
struct EventHead {
    Tensor weight;  // 2d x classes
    Tensor bias;    // classes

    static EventHead make(std::size_t width, std::size_t classes, std::uint64_t seed, double stddev = 0.02);
    static EventHead zeros(std::size_t width, std::size_t classes);

    void register_into(FreezeRegistry& reg) const;
};

// Returns a 1 x classes row of logits.
Tensor event_head(const TokenSet& xa, const TokenSet& xv, const EventHead& head);

}  // namespace lavish
