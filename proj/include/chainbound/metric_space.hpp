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
#include <fstream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainbound/common.hpp"
#include "chainbound/phi.hpp"

namespace chainbound {

/// Finite index set with a semi-distance matrix (symmetric, zero diagonal,
/// triangle inequality; distinct points at distance zero are allowed).
class FiniteMetricSpace {
public:
    FiniteMetricSpace() = default;

    FiniteMetricSpace(std::vector<std::string> labels, std::vector<double> dense)
        : labels_(std::move(labels)), n_(labels_.size()), d_(std::move(dense)) {
        if (d_.size() != n_ * n_) throw DomainError("metric space: matrix size mismatch");
        basic_checks();
    }

    std::size_t size() const { return n_; }
    const std::vector<std::string>& labels() const { return labels_; }
    double dist(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
    const double* row(std::size_t i) const { return d_.data() + i * n_; }
    std::vector<double>& mutable_dense() { return d_; }

    double diameter() const {
        double m = 0.0;
        for (double x : d_) m = std::max(m, x);
        return m;
    }

    double min_positive_distance() const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j)
                if (dist(i, j) > 0.0) m = std::min(m, dist(i, j));
        return m;
    }

    /// Full invariant check including the O(n^3) triangle scan.
    void validate(double tol = 1e-12) const {
        basic_checks();
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                for (std::size_t k = 0; k < n_; ++k)
                    if (dist(i, j) > dist(i, k) + dist(k, j) + tol)
                        throw TriangleViolation("triangle inequality fails at (" +
                                                labels_[i] + "," + labels_[j] + "," + labels_[k] +
                                                ")");
    }

    static FiniteMetricSpace from_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DomainError("metric space: cannot open " + path);
        std::string line;
        if (!std::getline(in, line)) throw DomainError("metric space: empty file " + path);
        std::vector<std::string> labels = split(line);
        const std::size_t n = labels.size();
        std::vector<double> dense(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::getline(in, line))
                throw DomainError("metric space: missing row " + std::to_string(i));
            const auto cells = split(line);
            if (cells.size() != n && cells.size() != i + 1)
                throw DomainError("metric space: row " + std::to_string(i) +
                                  " must have n or i+1 entries");
            for (std::size_t j = 0; j < cells.size(); ++j) {
                const double v = std::stod(cells[j]);
                dense[i * n + j] = v;
                dense[j * n + i] = v;  // lower-triangular input mirrors up
            }
        }
        return FiniteMetricSpace(std::move(labels), std::move(dense));
    }

    void to_csv(const std::string& path) const {
        std::ofstream out(path);
        for (std::size_t i = 0; i < n_; ++i) out << (i ? "," : "") << labels_[i];
        out << "\n";
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j)
                out << (j ? "," : "") << format_double(dist(i, j));
            out << "\n";
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < n_; ++i) {
            nlohmann::json r = nlohmann::json::array();
            for (std::size_t j = 0; j < n_; ++j) r.push_back(dist(i, j));
            rows.push_back(std::move(r));
        }
        return {{"labels", labels_}, {"dist", rows}};
    }

    static FiniteMetricSpace from_json(const nlohmann::json& j) {
        std::vector<std::string> labels = j.at("labels").get<std::vector<std::string>>();
        const std::size_t n = labels.size();
        std::vector<double> dense(n * n, 0.0);
        const auto& rows = j.at("dist");
        if (rows.size() != n) throw DomainError("metric space json: row count mismatch");
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t jx = 0; jx < n; ++jx) dense[i * n + jx] = rows[i][jx].get<double>();
        return FiniteMetricSpace(std::move(labels), std::move(dense));
    }

private:
    static std::vector<std::string> split(const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    }

    void basic_checks() const {
        for (std::size_t i = 0; i < n_; ++i) {
            if (dist(i, i) != 0.0) throw DomainError("metric space: nonzero diagonal");
            for (std::size_t j = 0; j < n_; ++j) {
                if (dist(i, j) < 0.0) throw DomainError("metric space: negative distance");
                if (dist(i, j) != dist(j, i)) throw DomainError("metric space: asymmetric matrix");
            }
        }
    }

    std::vector<std::string> labels_;
    std::size_t n_ = 0;
    std::vector<double> d_;
};

/// Representative (lowest index) of each zero-distance class. The triangle
/// inequality makes the zero relation transitive, so a single scan suffices.
inline std::vector<std::uint32_t> zero_class_reps(const FiniteMetricSpace& s) {
    const std::size_t n = s.size();
    std::vector<std::uint32_t> rep(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t r = static_cast<std::uint32_t>(i);
        for (std::size_t j = 0; j < i; ++j) {
            if (s.dist(i, j) == 0.0) {
                r = static_cast<std::uint32_t>(j);
                break;
            }
        }
        rep[i] = (r == i) ? r : rep[r];
    }
    return rep;
}

struct EpsilonNet {
    double epsilon = 0.0;
    std::vector<std::uint32_t> subset;      // the covered points
    std::vector<std::uint32_t> centers;     // chosen ball centers (subset members)
    std::vector<std::uint32_t> assignment;  // per subset member: nearest center

    /// Exact coverage invariant: every point within epsilon of its center.
    bool valid(const FiniteMetricSpace& s) const {
        for (std::size_t k = 0; k < subset.size(); ++k)
            if (s.dist(subset[k], assignment[k]) > epsilon) return false;
        return true;
    }
};

enum class CoverMode { Exact, Greedy };

namespace detail {

inline void assign_nearest(const FiniteMetricSpace& s, EpsilonNet& net) {
    net.assignment.resize(net.subset.size());
    for (std::size_t k = 0; k < net.subset.size(); ++k) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t who = net.centers.front();
        for (std::uint32_t c : net.centers) {  // centers ascend, ties keep the lowest
            const double d = s.dist(net.subset[k], c);
            if (d < best) {
                best = d;
                who = c;
            }
        }
        net.assignment[k] = who;
    }
}

/// Classical greedy set cover: repeatedly take the ball covering the most
/// uncovered points, lowest index on ties. Lazy-reevaluated heap keeps large
/// instances near O(E log n).
inline EpsilonNet greedy_cover(const FiniteMetricSpace& s, const std::vector<std::uint32_t>& subset,
                               double eps) {
    const std::size_t k = subset.size();
    EpsilonNet net;
    net.epsilon = eps;
    net.subset = subset;
    std::vector<char> covered(k, 0);
    std::vector<std::vector<std::uint32_t>> cover_list(k);  // candidate -> covered positions
    for (std::size_t c = 0; c < k; ++c) {
        const double* row = s.row(subset[c]);
        for (std::size_t p = 0; p < k; ++p)
            if (row[subset[p]] <= eps) cover_list[c].push_back(static_cast<std::uint32_t>(p));
    }
    using Entry = std::pair<std::size_t, std::size_t>;  // (count, candidate)
    const auto cmp = [](const Entry& a, const Entry& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second > b.second;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> heap(cmp);
    for (std::size_t c = 0; c < k; ++c) heap.emplace(cover_list[c].size(), c);
    std::size_t remaining = k;
    while (remaining > 0) {
        auto [cnt, c] = heap.top();
        heap.pop();
        std::size_t fresh = 0;
        for (std::uint32_t p : cover_list[c]) fresh += !covered[p];
        if (fresh != cnt) {
            heap.emplace(fresh, c);
            continue;
        }
        if (fresh == 0) continue;
        net.centers.push_back(subset[c]);
        for (std::uint32_t p : cover_list[c]) {
            remaining -= !covered[p];
            covered[p] = 1;
        }
    }
    std::sort(net.centers.begin(), net.centers.end());
    assign_nearest(s, net);
    return net;
}

struct ExactCoverState {
    const std::vector<std::uint64_t>* masks;
    std::uint64_t full;
    std::size_t best;
    std::vector<std::uint32_t> best_pick, pick;
    std::size_t max_ball;
};

inline void exact_cover_dfs(ExactCoverState& st, std::uint64_t uncovered, std::size_t used) {
    if (uncovered == 0) {
        if (used < st.best) {
            st.best = used;
            st.best_pick = st.pick;
        }
        return;
    }
    const std::size_t lb = (static_cast<std::size_t>(__builtin_popcountll(uncovered)) +
                            st.max_ball - 1) / st.max_ball;
    if (used + lb >= st.best) return;
    const int u = __builtin_ctzll(uncovered);
    for (std::size_t c = 0; c < st.masks->size(); ++c) {
        if (!(((*st.masks)[c] >> u) & 1u)) continue;
        st.pick.push_back(static_cast<std::uint32_t>(c));
        exact_cover_dfs(st, uncovered & ~(*st.masks)[c], used + 1);
        st.pick.pop_back();
    }
}

inline EpsilonNet exact_cover(const FiniteMetricSpace& s, const std::vector<std::uint32_t>& subset,
                              double eps) {
    const std::size_t k = subset.size();
    std::vector<std::uint64_t> masks(k, 0);
    std::size_t max_ball = 1;
    for (std::size_t c = 0; c < k; ++c) {
        const double* row = s.row(subset[c]);
        for (std::size_t p = 0; p < k; ++p)
            if (row[subset[p]] <= eps) masks[c] |= (1ull << p);
        max_ball = std::max<std::size_t>(max_ball,
                                         static_cast<std::size_t>(__builtin_popcountll(masks[c])));
    }
    const EpsilonNet seed = greedy_cover(s, subset, eps);
    ExactCoverState st{&masks, (k == 64) ? ~0ull : ((1ull << k) - 1), seed.centers.size() + 1, {},
                       {}, max_ball};
    exact_cover_dfs(st, st.full, 0);
    EpsilonNet net;
    net.epsilon = eps;
    net.subset = subset;
    if (st.best_pick.empty() && st.best > seed.centers.size()) return seed;  // greedy was optimal
    for (std::uint32_t c : st.best_pick) net.centers.push_back(subset[c]);
    if (net.centers.empty()) return seed;
    std::sort(net.centers.begin(), net.centers.end());
    assign_nearest(s, net);
    return net;
}

}  // namespace detail

/// Minimal (Exact) or greedy number of closed eps-balls centered in the
/// subset that cover it. Exact mode is a branch-and-bound limited to
/// exact_limit points.
inline std::pair<std::size_t, EpsilonNet> covering_number(const FiniteMetricSpace& s,
                                                          const std::vector<std::uint32_t>& subset,
                                                          double eps, CoverMode mode,
                                                          std::size_t exact_limit = 20) {
    if (subset.empty()) throw DomainError("covering_number: empty subset");
    if (!(eps > 0.0)) throw DomainError("covering_number: epsilon must be positive");
    if (mode == CoverMode::Exact) {
        if (subset.size() > exact_limit || subset.size() > 64)
            throw SizeLimitExceeded("covering_number: exact mode limited to " +
                                    std::to_string(exact_limit) + " points");
        EpsilonNet net = detail::exact_cover(s, subset, eps);
        return {net.centers.size(), std::move(net)};
    }
    EpsilonNet net = detail::greedy_cover(s, subset, eps);
    return {net.centers.size(), std::move(net)};
}

inline std::vector<std::uint32_t> all_indices(const FiniteMetricSpace& s) {
    std::vector<std::uint32_t> v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = static_cast<std::uint32_t>(i);
    return v;
}

/// log covering number; exact when the subset is small enough, greedy beyond.
inline double entropy(const FiniteMetricSpace& s, const std::vector<std::uint32_t>& subset,
                      double eps, std::size_t exact_limit = 20) {
    const CoverMode mode = subset.size() <= exact_limit ? CoverMode::Exact : CoverMode::Greedy;
    const auto [count, net] = covering_number(s, subset, eps, mode, exact_limit);
    return std::log(static_cast<double>(count));
}

/// Inverse conjugate level: smallest x with phi*(x) >= y. For tabulated
/// weights the conjugate continues linearly past the terminal slope (the
/// table is the whole function, +infinity outside its domain).
inline double inverse_conjugate(const PhiFunction& phi, double y) {
    if (y <= 0.0) return 0.0;
    const double cap = max_conjugate_argument(phi);
    double hi = 1.0;
    const auto conj = [&](double x) -> double {
        if (x < cap) return conjugate_value(phi, x).value;
        const double l0 = phi.lambda0();
        return l0 * x - phi(l0 * (1.0 - 1e-15));
    };
    int guard = 0;
    while (conj(hi) < y) {
        hi *= 2.0;
        if (++guard > 600) throw NonConvergence("inverse_conjugate: level unreachable");
    }
    double lo = 0.0;
    for (int it = 0; it < 200 && (hi - lo) > 1e-14 * (1.0 + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (conj(mid) < y ? lo : hi) = mid;
    }
    return hi;
}

struct EntropyIntegralResult {
    double value = 0.0;
    bool divergent_trend = false;
    std::vector<double> octave_contribution;  // from the largest scales down
};

/// Trapezoid integral of eps -> (phi*)^{-1}(H(T, d, eps)) over the given
/// decreasing grid in (0, 1]. The result is flagged as a divergence trend
/// when the per-octave contributions stop decaying at grid resolution.
inline EntropyIntegralResult entropy_integral(const FiniteMetricSpace& s, const PhiFunction& phi,
                                              const std::vector<double>& eps_grid,
                                              std::size_t exact_limit = 20) {
    if (eps_grid.size() < 2) throw DomainError("entropy_integral: need at least two grid points");
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        if (!(eps_grid[i] > 0.0 && eps_grid[i] <= 1.0))
            throw DomainError("entropy_integral: grid points must lie in (0,1]");
        if (i && !(eps_grid[i] < eps_grid[i - 1]))
            throw DomainError("entropy_integral: grid must decrease");
    }
    const auto subset = all_indices(s);
    std::vector<double> eps(eps_grid.rbegin(), eps_grid.rend());  // ascending
    std::vector<double> g(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i)
        g[i] = inverse_conjugate(phi, entropy(s, subset, eps[i], exact_limit));

    EntropyIntegralResult res;
    // octave bucket of eps: k with eps in (2^{-k-1}, 2^{-k}]
    const auto octave = [](double e) { return static_cast<int>(std::floor(-std::log2(e) + 1e-12)); };
    struct Bucket {
        int oc;
        double contrib = 0.0;
        double width = 0.0;
    };
    std::vector<Bucket> buckets;
    for (std::size_t i = 0; i + 1 < eps.size(); ++i) {
        const double piece = 0.5 * (g[i] + g[i + 1]) * (eps[i + 1] - eps[i]);
        res.value += piece;
        const int oc = octave(0.5 * (eps[i] + eps[i + 1]));
        if (buckets.empty() || buckets.back().oc != oc) buckets.push_back({oc, 0.0, 0.0});
        buckets.back().contrib += piece;
        buckets.back().width += eps[i + 1] - eps[i];
    }
    // buckets run from the smallest scales up; report largest-scale first
    for (auto it = buckets.rbegin(); it != buckets.rend(); ++it)
        res.octave_contribution.push_back(it->contrib);
    // Divergence trend, independent of grid bucketing: the log-log slope of
    // the integrand over the smallest-scale third of the grid. Growth like
    // 1/eps (slope -1) is the integrability borderline; an integrand that
    // keeps that pace at grid resolution earns the flag.
    {
        const std::size_t k = std::max<std::size_t>(4, eps.size() / 3);
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::size_t used = 0;
        for (std::size_t i = 0; i < std::min(k, eps.size()); ++i) {
            if (!(g[i] > 0.0)) continue;
            const double x = std::log(eps[i]);
            const double y = std::log(g[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++used;
        }
        if (used >= 3) {
            const double denom = used * sxx - sx * sx;
            if (denom > 0.0) {
                const double slope = (used * sxy - sx * sy) / denom;
                res.divergent_trend = slope <= -0.95 && g.front() > 1e-12;
            }
        }
    }
    return res;
}

struct NaturalDistanceOptions {
    std::vector<double> lambda_grid;  // empty: scale-aware grid per pair
    double repair_rel_tol = 1e-3;
    MgfFitOptions mgf{};
};

/// Pairwise exponential-moment norms of coordinate differences, symmetrized
/// by construction, with small triangle defects repaired by raising entries
/// to their two-hop lower bounds.
inline FiniteMetricSpace natural_distance(const Matrix& paths, const PhiFunction& phi,
                                          std::vector<std::string> labels = {},
                                          const NaturalDistanceOptions& opt = {}) {
    if (paths.cols < 2) throw DomainError("natural_distance: need at least two indices");
    const std::size_t n = paths.cols;
    if (labels.empty())
        for (std::size_t i = 0; i < n; ++i) labels.push_back("t" + std::to_string(i));

    std::vector<double> mean(n, 0.0);
    for (std::size_t r = 0; r < paths.rows; ++r)
        for (std::size_t c = 0; c < n; ++c) mean[c] += paths.at(r, c);
    for (auto& m : mean) m /= static_cast<double>(paths.rows);

    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

    std::vector<double> dense(n * n, 0.0);
    parallel_chunks(pairs.size(), [&](std::size_t lo, std::size_t hi) {
        std::vector<double> diff(paths.rows);
        for (std::size_t k = lo; k < hi; ++k) {
            const auto [i, j] = pairs[k];
            double sq = 0.0;
            for (std::size_t r = 0; r < paths.rows; ++r) {
                diff[r] = (paths.at(r, i) - mean[i]) - (paths.at(r, j) - mean[j]);
                sq += diff[r] * diff[r];
            }
            const double sd = std::sqrt(sq / static_cast<double>(paths.rows));
            double d = 0.0;
            if (sd > 0.0) {
                std::vector<double> grid = opt.lambda_grid;
                if (grid.empty()) {
                    const double top = std::min(1.5 / sd, 0.98 * phi.lambda0() / 1.0);
                    for (int t = 16; t >= 1; --t) grid.push_back(-top * t / 16.0);
                    for (int t = 1; t <= 16; ++t) grid.push_back(top * t / 16.0);
                }
                d = bphi_norm_mgf(diff, phi, grid, opt.mgf).value;
            }
            dense[i * n + j] = dense[j * n + i] = d;
        }
    });

    // metric projection: raise entries violating any two-hop lower bound
    double max_entry = 0.0;
    for (double v : dense) max_entry = std::max(max_entry, v);
    const std::vector<double> original = dense;
    for (int pass = 0; pass < 20; ++pass) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double lb = dense[i * n + j];
                for (std::size_t v = 0; v < n; ++v) {
                    if (v == i || v == j) continue;
                    lb = std::max(lb, std::fabs(dense[i * n + v] - dense[v * n + j]));
                }
                if (lb > dense[i * n + j]) {
                    dense[i * n + j] = dense[j * n + i] = lb;
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double raise = dense[i * n + j] - original[i * n + j];
            const double denom = std::max(original[i * n + j], 1e-2 * max_entry);
            if (denom > 0.0 && raise / denom > opt.repair_rel_tol)
                throw TriangleViolation("natural_distance: repair at (" + labels[i] + "," +
                                        labels[j] + ") exceeds " +
                                        format_double(opt.repair_rel_tol) + " relative");
        }
    }
    return FiniteMetricSpace(std::move(labels), std::move(dense));
}

/// Closed-form natural distance of a centered gaussian field with the given
/// covariance: sqrt(D(t,t) - 2 D(t,s) + D(s,s)).
inline FiniteMetricSpace gaussian_natural_distance(const Matrix& cov,
                                                   std::vector<std::string> labels = {}) {
    if (cov.rows != cov.cols || cov.rows == 0)
        throw DomainError("gaussian_natural_distance: square covariance required");
    const std::size_t n = cov.rows;
    if (labels.empty())
        for (std::size_t i = 0; i < n; ++i) labels.push_back("t" + std::to_string(i));
    std::vector<double> dense(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            dense[i * n + j] =
                std::sqrt(std::max(0.0, cov.at(i, i) - 2.0 * cov.at(i, j) + cov.at(j, j)));
    return FiniteMetricSpace(std::move(labels), std::move(dense));
}

}  // namespace chainbound
