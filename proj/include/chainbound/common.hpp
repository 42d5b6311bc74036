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

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace chainbound {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// An iterative solver hit its budget or an unbracketable root.
class NonConvergence : public std::runtime_error {
public:
    explicit NonConvergence(const std::string& what) : std::runtime_error(what) {}
};

/// No finite scale satisfies a moment-generating-function constraint.
class UnboundedNorm : public std::runtime_error {
public:
    explicit UnboundedNorm(const std::string& what) : std::runtime_error(what) {}
};

/// A distance matrix violates the triangle inequality beyond repair tolerance.
class TriangleViolation : public std::runtime_error {
public:
    explicit TriangleViolation(const std::string& what) : std::runtime_error(what) {}
};

/// Exact set-cover requested on a subset larger than the exact-solver limit.
class SizeLimitExceeded : public std::runtime_error {
public:
    explicit SizeLimitExceeded(const std::string& what) : std::runtime_error(what) {}
};

/// Covariance matrix is not positive semidefinite within tolerance.
class NotSPD : public std::runtime_error {
public:
    explicit NotSPD(const std::string& what) : std::runtime_error(what) {}
};

/// Worker count: hardware concurrency, capped by CHAINBOUND_THREADS when set.
inline unsigned worker_count() {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("CHAINBOUND_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && static_cast<unsigned>(cap) < n) n = static_cast<unsigned>(cap);
    }
    return n;
}

/// Runs body(begin, end) over disjoint chunks of [0, n). The caller owns
/// per-chunk state; merging must not depend on execution order.
template <typename Body>
void parallel_chunks(std::size_t n, const Body& body) {
    const unsigned workers = worker_count();
    if (n == 0) return;
    if (workers <= 1 || n < 2) {
        body(std::size_t{0}, n);
        return;
    }
    const std::size_t nchunks = std::min<std::size_t>(workers, n);
    std::vector<std::thread> pool;
    pool.reserve(nchunks);
    const std::size_t step = (n + nchunks - 1) / nchunks;
    for (std::size_t c = 0; c < nchunks; ++c) {
        const std::size_t lo = c * step;
        const std::size_t hi = std::min(n, lo + step);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

/// Shortest round-trip decimal form of a double (used by every CSV writer so
/// that identical runs produce byte-identical files).
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Row-major sample matrix, replicate rows by index columns.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
    const double* row(std::size_t r) const { return a.data() + r * cols; }
    double* row(std::size_t r) { return a.data() + r * cols; }
};

}  // namespace chainbound
