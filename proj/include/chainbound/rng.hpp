/*
 * Copyright 2026 The chainbound authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace chainbound {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}
}  // namespace detail

/// Counter-based stream: draw k of stream s under seed depends only on
/// (seed, s, k), so replicate-indexed streams give results independent of
/// how work is split across threads.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(detail::mix64(seed + 0x9E3779B97F4A7C15ULL *
                                        detail::mix64(stream + 0x632BE59BD9B4E019ULL))) {}

    std::uint64_t next_u64() {
        return detail::mix64(key_ + (++ctr_) * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform on the open interval (0, 1); never returns 0, safe under log().
    double next_unit_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Box-Muller pair of independent standard normals.
    std::pair<double, double> next_normal_pair() {
        const double u1 = next_unit_open();
        const double u2 = next_unit_open();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(th), r * std::sin(th)};
    }

    /// Symmetric variable with survival P(|X| > x) = exp(-x^2/2) in the
    /// magnitude, sign from the spare bit; one draw per call.
    double next_sq_exp_tail() {
        const std::uint64_t w = next_u64();
        const double u = (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
        const double mag = std::sqrt(-2.0 * std::log(u));
        return (w & 1u) ? mag : -mag;
    }

    /// 64 Rademacher signs packed as bits.
    std::uint64_t next_sign_bits() { return next_u64(); }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

}  // namespace chainbound
