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
#include <numbers>
#include <string>
#include <vector>

#include "chainbound/field_sim.hpp"
#include "chainbound/metric_space.hpp"
#include "chainbound/phi.hpp"
#include "chainbound/tail_bounds.hpp"

namespace chainbound {

inline FiniteMetricSpace singleton_space() {
    return FiniteMetricSpace({"t0"}, {0.0});
}

/// Squared-exponential kernel covariance on a uniform grid over [0, 1].
inline Matrix se_kernel_cov(std::size_t n, double ell) {
    if (n == 0 || !(ell > 0.0)) throw DomainError("se_kernel_cov: bad parameters");
    Matrix cov(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = (static_cast<double>(i) - static_cast<double>(j)) /
                              std::max<std::size_t>(1, n - 1);
            cov.at(i, j) = std::exp(-dx * dx / (2.0 * ell * ell));
        }
    }
    return cov;
}

/// Index space of the scaled square-exponential-tail sequence under the
/// subgaussian weight. The coordinate law has exponential-moment scale
/// sqrt(2) exactly: its even moments 2^k k! put the log-MGF at or below
/// l^2 with matching curvature at the origin. Independent coordinates
/// subtract in quadrature:
///   d(i, j) = sqrt(2) * sqrt(s_i^2 + s_j^2),   s_i = 1/sqrt(log(i + e - 1)).
/// The optional extra coordinate is the zero process closing the sequence at
/// its accumulation point; it never changes the positive-threshold tail of
/// the supremum and gives coverings their natural cluster center.
inline FiniteMetricSpace example_a_space(std::size_t n_max, bool include_zero_index = true) {
    if (n_max == 0) throw DomainError("example_a_space: n_max must be positive");
    const auto scales = example_a_scales(n_max);
    const std::size_t n = n_max + (include_zero_index ? 1 : 0);
    std::vector<std::string> labels;
    std::vector<double> s2(n, 0.0);  // squared coordinate scales; zero index last
    for (std::size_t i = 0; i < n_max; ++i) {
        labels.push_back("n" + std::to_string(i + 1));
        s2[i] = scales[i] * scales[i];
    }
    if (include_zero_index) labels.push_back("zero");
    std::vector<double> dense(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j)
                dense[i * n + j] = std::numbers::sqrt2 * std::sqrt(s2[i] + s2[j]);
    return FiniteMetricSpace(std::move(labels), std::move(dense));
}

/// Tail model of the degree-d polynomial martingale normalized by its
/// standard deviation sqrt(binom(n, d)); exponent r = 2/d, growth d/2.
inline MartingaleModel poly_martingale_model(int d, double c_doob = 0.5) {
    if (d < 1 || d > 2) throw DomainError("poly_martingale_model: d must be 1 or 2");
    MartingaleModel m;
    m.r = 2.0 / d;
    m.beta = 0.5 * d;
    m.c_doob = c_doob;
    m.sigma = [d](double n) { return std::sqrt(poly_martingale_sigma2(n, d)); };
    if (d == 1) {
        // Hoeffding: the normalized walk is 1-subgaussian
        std::vector<double> xg;
        for (int i = 0; i <= 4096; ++i) xg.push_back(64.0 * i / 4096.0);
        m.conj = fenchel_transform(PhiFunction::subgaussian(), xg);
    } else {
        // (S^2 - n)/2 over sigma has an exponential tail: for n >= 2,
        // P(xi/sigma > x) <= 2 e^{-1/2} e^{-x/2}, a hinge conjugate
        const double x0 = 2.0 * std::log(2.0 * std::exp(-0.5));
        m.conj.grid = {0.0, x0, 1024.0};
        m.conj.values = {0.0, 0.0, 0.5 * (1024.0 - x0)};
        m.conj.slopes = {0.0, 0.0, 0.5};
    }
    return m;
}

}  // namespace chainbound
