// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace lavish {

// Counter-based generator: draw i of stream s under seed k is
//   splitmix64_mix(k ^ (s * 0xD1342543DE82EF95) + (i + 1) * 0x9E3779B97F4A7C15)
// where splitmix64_mix is the SplitMix64 output finalizer. Draws depend only
// on (seed, stream, counter), so results are identical across runs,
// platforms and parameter creation order.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}
    Rng(std::uint64_t seed, std::string_view stream_name);

    std::uint64_t next_u64();
    // Uniform on [0, 1) with 53 random mantissa bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Standard normal via Box-Muller; consumes two draws per call.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

// FNV-1a, used to turn parameter names into stream ids.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace lavish
