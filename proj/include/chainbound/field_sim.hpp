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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chainbound/common.hpp"
#include "chainbound/rng.hpp"

namespace chainbound {

// ---------------------------------------------------------------------------
// samplers

namespace detail {

/// Symmetric factor of a PSD matrix through its eigendecomposition; tolerant
/// of tiny negative eigenvalues, loud about real ones.
inline std::vector<double> psd_factor(const Matrix& cov, double tol = 1e-10) {
    if (cov.rows != cov.cols || cov.rows == 0) throw NotSPD("covariance must be square");
    const std::size_t n = cov.rows;
    Eigen::MatrixXd M(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) M(i, j) = cov.at(i, j);
    if (!M.isApprox(M.transpose(), 1e-12)) throw NotSPD("covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    const double scale = std::max(1.0, std::fabs(es.eigenvalues().maxCoeff()));
    if (es.eigenvalues().minCoeff() < -tol * scale)
        throw NotSPD("covariance has a negative eigenvalue beyond tolerance");
    Eigen::MatrixXd L = es.eigenvectors() *
                        es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    std::vector<double> out(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = L(i, j);
    return out;
}

inline void fill_normals(CounterRng& rng, double* z, std::size_t n) {
    std::size_t i = 0;
    while (i + 1 < n) {
        const auto [a, b] = rng.next_normal_pair();
        z[i++] = a;
        z[i++] = b;
    }
    if (i < n) z[i] = rng.next_normal_pair().first;
}

}  // namespace detail

/// Centered gaussian field rows with the given covariance; replicate r is a
/// pure function of (seed, r), so any parallel split reproduces bit-exactly.
inline Matrix sample_gaussian(const Matrix& cov, std::size_t replicates, std::uint64_t seed) {
    const auto L = detail::psd_factor(cov);
    const std::size_t n = cov.rows;
    Matrix out(replicates, n);
    parallel_chunks(replicates, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> z(n);
        for (std::size_t r = lo; r < hi; ++r) {
            CounterRng rng(seed, r);
            detail::fill_normals(rng, z.data(), n);
            double* row = out.row(r);
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                const double* Li = L.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) acc += Li[j] * z[j];
                row[i] = acc;
            }
        }
    });
    return out;
}

/// Per-coordinate scales of the benchmark sequence x(n) = e(n)/sqrt(log(n+e-1)).
inline std::vector<double> example_a_scales(std::size_t n_max) {
    std::vector<double> s(n_max);
    for (std::size_t i = 1; i <= n_max; ++i)
        s[i - 1] = 1.0 / std::sqrt(std::log(static_cast<double>(i) + std::numbers::e - 1.0));
    return s;
}

/// Independent symmetric coordinates with survival exp(-x^2/2), scaled down
/// logarithmically in the index.
inline Matrix sample_example_A(std::size_t n_max, std::size_t replicates, std::uint64_t seed) {
    if (n_max == 0) throw DomainError("sample_example_A: n_max must be positive");
    const auto scales = example_a_scales(n_max);
    Matrix out(replicates, n_max);
    parallel_chunks(replicates, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
            CounterRng rng(seed, r);
            double* row = out.row(r);
            for (std::size_t i = 0; i < n_max; ++i) row[i] = scales[i] * rng.next_sq_exp_tail();
        }
    });
    return out;
}

/// Degree-d elementary symmetric polynomial in Rademacher signs, walked as a
/// trajectory. Values are exact 64-bit integers for d <= 2 (the callback
/// receives the running sign sum as well); the generic recursion accumulates
/// in doubles. One sign bit is consumed per step in either variant.
template <typename F>
inline void walk_poly_martingale_exact(int d, std::uint64_t n_max, std::uint64_t seed,
                                       std::uint64_t replicate, F&& step) {
    if (d != 1 && d != 2) throw DomainError("exact walk: d must be 1 or 2");
    CounterRng rng(seed, replicate);
    std::int64_t e1 = 0, e2 = 0;
    std::uint64_t bits = 0;
    for (std::uint64_t n = 1; n <= n_max; ++n) {
        if (((n - 1) & 63u) == 0) bits = rng.next_sign_bits();
        const std::int64_t s = (bits & 1u) ? 1 : -1;
        bits >>= 1;
        e2 += s * e1;
        e1 += s;
        step(n, e1, d == 1 ? e1 : e2);
    }
}

template <typename F>
inline void walk_poly_martingale(int d, std::uint64_t n_max, std::uint64_t seed,
                                 std::uint64_t replicate, F&& step) {
    if (d < 1) throw DomainError("poly martingale: d must be positive");
    CounterRng rng(seed, replicate);
    std::vector<double> e(static_cast<std::size_t>(d) + 1, 0.0);
    e[0] = 1.0;
    std::uint64_t bits = 0;
    for (std::uint64_t n = 1; n <= n_max; ++n) {
        if (((n - 1) & 63u) == 0) bits = rng.next_sign_bits();
        const double s = (bits & 1u) ? 1.0 : -1.0;
        bits >>= 1;
        for (int j = d; j >= 1; --j) e[j] += s * e[j - 1];
        step(n, e[static_cast<std::size_t>(d)]);
    }
}

/// Trajectory matrix (replicate x index) of the degree-d polynomial
/// martingale; intended for moderate sizes, large runs use the walkers.
inline Matrix sample_poly_martingale(int d, std::uint64_t n_max, std::size_t replicates,
                                     std::uint64_t seed) {
    Matrix out(replicates, n_max);
    parallel_chunks(replicates, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
            double* row = out.row(r);
            walk_poly_martingale(d, n_max, seed, r, [&](std::uint64_t n, double v) {
                row[n - 1] = v;
            });
        }
    });
    return out;
}

/// Variance of the degree-d polynomial martingale at n: binomial(n, d).
inline double poly_martingale_sigma2(double n, int d) {
    double b = 1.0;
    for (int i = 0; i < d; ++i) b *= (n - i) / (i + 1.0);
    return std::max(0.0, b);
}

// ---------------------------------------------------------------------------
// streaming suprema

struct SupSamples {
    std::vector<double> sup;      // per replicate: sup of the field
    std::vector<double> sup_abs;  // per replicate: sup of |field|
};

inline SupSamples gaussian_suprema(const Matrix& cov, std::size_t replicates, std::uint64_t seed) {
    const auto L = detail::psd_factor(cov);
    const std::size_t n = cov.rows;
    SupSamples out;
    out.sup.resize(replicates);
    out.sup_abs.resize(replicates);
    parallel_chunks(replicates, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> z(n);
        for (std::size_t r = lo; r < hi; ++r) {
            CounterRng rng(seed, r);
            detail::fill_normals(rng, z.data(), n);
            double mx = -std::numeric_limits<double>::infinity(), ma = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                const double* Li = L.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) acc += Li[j] * z[j];
                mx = std::max(mx, acc);
                ma = std::max(ma, std::fabs(acc));
            }
            out.sup[r] = mx;
            out.sup_abs[r] = ma;
        }
    });
    return out;
}

inline SupSamples example_a_suprema(std::size_t n_max, std::size_t replicates,
                                    std::uint64_t seed) {
    const auto scales = example_a_scales(n_max);
    SupSamples out;
    out.sup.resize(replicates);
    out.sup_abs.resize(replicates);
    parallel_chunks(replicates, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
            CounterRng rng(seed, r);
            double mx = -std::numeric_limits<double>::infinity(), ma = 0.0;
            for (std::size_t i = 0; i < n_max; ++i) {
                const double x = scales[i] * rng.next_sq_exp_tail();
                mx = std::max(mx, x);
                ma = std::max(ma, std::fabs(x));
            }
            out.sup[r] = mx;
            out.sup_abs[r] = ma;
        }
    });
    return out;
}

/// Supremum over n in [n_lo, n_max] of xi_d(n) / (sigma(n) v_r(n)) with
/// r = 2/d and sigma(n) = sqrt(binom(n, d)).
inline SupSamples poly_martingale_normalized_suprema(int d, std::uint64_t n_lo,
                                                     std::uint64_t n_max, std::size_t replicates,
                                                     std::uint64_t seed) {
    if (n_lo < 1 || n_lo > n_max) throw DomainError("normalized suprema: bad index range");
    const double r_exp = 2.0 / d;
    std::vector<double> invnorm(n_max + 1, 0.0);
    for (std::uint64_t n = n_lo; n <= n_max; ++n) {
        const double s = std::sqrt(poly_martingale_sigma2(static_cast<double>(n), d));
        const double v = std::pow(std::log(std::log(static_cast<double>(n) + 3.0)), 1.0 / r_exp);
        invnorm[n] = (s > 0.0 && v > 0.0) ? 1.0 / (s * v) : 0.0;
    }
    SupSamples out;
    out.sup.resize(replicates);
    out.sup_abs.resize(replicates);
    parallel_chunks(replicates, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
            double mx = -std::numeric_limits<double>::infinity(), ma = 0.0;
            if (d <= 2) {
                walk_poly_martingale_exact(d, n_max, seed, r,
                                           [&](std::uint64_t n, std::int64_t, std::int64_t v) {
                                               if (n < n_lo || invnorm[n] == 0.0) return;
                                               const double x = invnorm[n] * v;
                                               mx = std::max(mx, x);
                                               ma = std::max(ma, std::fabs(x));
                                           });
            } else {
                walk_poly_martingale(d, n_max, seed, r, [&](std::uint64_t n, double v) {
                    if (n < n_lo || invnorm[n] == 0.0) return;
                    const double x = invnorm[n] * v;
                    mx = std::max(mx, x);
                    ma = std::max(ma, std::fabs(x));
                });
            }
            out.sup[r] = mx;
            out.sup_abs[r] = ma;
        }
    });
    return out;
}

/// Normalized sums of independent copies of a Rademacher field on `coords`
/// coordinates: eta(t) = n^{-1/2} sum_i e_i(t).
inline SupSamples rademacher_sum_suprema(std::size_t coords, std::size_t n,
                                         std::size_t replicates, std::uint64_t seed) {
    SupSamples out;
    out.sup.resize(replicates);
    out.sup_abs.resize(replicates);
    const double inv = 1.0 / std::sqrt(static_cast<double>(n));
    parallel_chunks(replicates, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
            CounterRng rng(seed, r);
            double mx = -std::numeric_limits<double>::infinity(), ma = 0.0;
            for (std::size_t t = 0; t < coords; ++t) {
                std::int64_t s = 0;
                std::uint64_t bits = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    if ((i & 63u) == 0) bits = rng.next_sign_bits();
                    s += (bits & 1u) ? 1 : -1;
                    bits >>= 1;
                }
                const double x = inv * static_cast<double>(s);
                mx = std::max(mx, x);
                ma = std::max(ma, std::fabs(x));
            }
            out.sup[r] = mx;
            out.sup_abs[r] = ma;
        }
    });
    return out;
}

/// Normalized sums of independent copies of the scaled square-exponential-
/// tail sequence on n_coords coordinates.
inline SupSamples example_a_sum_suprema(std::size_t n_coords, std::size_t n,
                                        std::size_t replicates, std::uint64_t seed) {
    const auto scales = example_a_scales(n_coords);
    const double inv = 1.0 / std::sqrt(static_cast<double>(n));
    SupSamples out;
    out.sup.resize(replicates);
    out.sup_abs.resize(replicates);
    parallel_chunks(replicates, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
            CounterRng rng(seed, r);
            double mx = -std::numeric_limits<double>::infinity(), ma = 0.0;
            for (std::size_t t = 0; t < n_coords; ++t) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) acc += rng.next_sq_exp_tail();
                const double x = scales[t] * inv * acc;
                mx = std::max(mx, x);
                ma = std::max(ma, std::fabs(x));
            }
            out.sup[r] = mx;
            out.sup_abs[r] = ma;
        }
    });
    return out;
}

inline Matrix sample_rademacher_sum(std::size_t coords, std::size_t n, std::size_t replicates,
                                    std::uint64_t seed) {
    Matrix out(replicates, coords);
    const double inv = 1.0 / std::sqrt(static_cast<double>(n));
    parallel_chunks(replicates, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
            CounterRng rng(seed, r);
            double* row = out.row(r);
            for (std::size_t t = 0; t < coords; ++t) {
                std::int64_t s = 0;
                std::uint64_t bits = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    if ((i & 63u) == 0) bits = rng.next_sign_bits();
                    s += (bits & 1u) ? 1 : -1;
                    bits >>= 1;
                }
                row[t] = inv * static_cast<double>(s);
            }
        }
    });
    return out;
}

/// Per-replicate sup over n <= n_max of xi_d(n) / (n log log(n+3))^{d/2}.
inline std::vector<double> limsup_statistic(int d, std::uint64_t n_max, std::size_t replicates,
                                            std::uint64_t seed) {
    std::vector<double> invnorm(n_max + 1, 0.0);
    for (std::uint64_t n = 1; n <= n_max; ++n) {
        const double base = static_cast<double>(n) * std::log(std::log(static_cast<double>(n) + 3.0));
        invnorm[n] = 1.0 / std::pow(base, 0.5 * d);
    }
    std::vector<double> stats(replicates);
    parallel_chunks(replicates, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
            double mx = -std::numeric_limits<double>::infinity();
            if (d <= 2) {
                walk_poly_martingale_exact(d, n_max, seed, r,
                                           [&](std::uint64_t n, std::int64_t, std::int64_t v) {
                                               mx = std::max(mx, invnorm[n] * v);
                                           });
            } else {
                walk_poly_martingale(d, n_max, seed, r, [&](std::uint64_t n, double v) {
                    mx = std::max(mx, invnorm[n] * v);
                });
            }
            stats[r] = mx;
        }
    });
    return stats;
}

inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw DomainError("quantile: empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= v.size()) return v.back();
    const double t = pos - i;
    return v[i] * (1.0 - t) + v[i + 1] * t;
}

// ---------------------------------------------------------------------------
// empirical tails with exact binomial intervals

namespace detail {

inline double betacf(double a, double b, double x) {
    constexpr int kMaxIt = 300;
    constexpr double kEps = 3e-14, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIt; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

/// Regularized incomplete beta I_x(a, b).
inline double betai(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log(1.0 - x);
    const double bt = std::exp(ln);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

/// Beta quantile by bisection (monotone CDF).
inline double betai_inv(double a, double b, double p) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (betai(a, b, mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Two-sided Clopper-Pearson interval for k successes out of n.
inline std::pair<double, double> clopper_pearson(std::uint64_t k, std::uint64_t n,
                                                 double confidence = 0.99) {
    if (n == 0) throw DomainError("clopper_pearson: empty sample");
    const double alpha = 1.0 - confidence;
    const double kk = static_cast<double>(k), nn = static_cast<double>(n);
    const double lo = (k == 0) ? 0.0 : detail::betai_inv(kk, nn - kk + 1.0, alpha / 2.0);
    const double hi =
        (k == n) ? 1.0 : detail::betai_inv(kk + 1.0, nn - kk, 1.0 - alpha / 2.0);
    return {lo, hi};
}

/// Exceedance counts of per-replicate suprema over an increasing threshold
/// grid, with exact binomial confidence intervals on the one-sided statistic.
struct EmpiricalTail {
    std::vector<double> u_grid;
    std::vector<std::uint64_t> count;      // sup > u
    std::vector<std::uint64_t> count_abs;  // sup |.| > u
    std::uint64_t replicates = 0;
    double confidence = 0.99;
    std::vector<double> p_hat, ci_lo, ci_hi;
};

inline EmpiricalTail empirical_tail(const SupSamples& s, const std::vector<double>& u_grid,
                                    double confidence = 0.99) {
    if (u_grid.empty()) throw DomainError("empirical_tail: empty u grid");
    for (std::size_t i = 1; i < u_grid.size(); ++i)
        if (!(u_grid[i] > u_grid[i - 1])) throw DomainError("empirical_tail: u grid must increase");
    EmpiricalTail t;
    t.u_grid = u_grid;
    t.replicates = s.sup.size();
    t.confidence = confidence;
    t.count.assign(u_grid.size(), 0);
    t.count_abs.assign(u_grid.size(), 0);
    for (double v : s.sup)
        for (std::size_t i = 0; i < u_grid.size() && v > u_grid[i]; ++i) ++t.count[i];
    for (double v : s.sup_abs)
        for (std::size_t i = 0; i < u_grid.size() && v > u_grid[i]; ++i) ++t.count_abs[i];
    for (std::size_t i = 0; i < u_grid.size(); ++i) {
        t.p_hat.push_back(static_cast<double>(t.count[i]) / static_cast<double>(t.replicates));
        const auto [lo, hi] = clopper_pearson(t.count[i], t.replicates, confidence);
        t.ci_lo.push_back(lo);
        t.ci_hi.push_back(hi);
    }
    return t;
}

// ---------------------------------------------------------------------------
// raw supremum sample files: 8-byte little-endian count, then f64 values

inline void write_sup_file(const std::string& path, const std::vector<double>& sup) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("write_sup_file: cannot open " + path);
    const std::uint64_t n = sup.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(sup.data()), static_cast<std::streamsize>(8 * n));
}

inline std::vector<double> read_sup_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("read_sup_file: cannot open " + path);
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(8 * n));
    if (!in) throw DomainError("read_sup_file: truncated file " + path);
    return v;
}

}  // namespace chainbound
