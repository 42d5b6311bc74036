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
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "chainbound/common.hpp"

namespace chainbound {

enum class PhiKind { Subgaussian, PowerType, Natural, Custom };

inline const char* to_string(PhiKind k) {
    switch (k) {
        case PhiKind::Subgaussian: return "subgaussian";
        case PhiKind::PowerType: return "power";
        case PhiKind::Natural: return "natural";
        case PhiKind::Custom: return "custom";
    }
    return "?";
}

/// Even convex weight function used to calibrate exponential moments.
///
/// Closed forms evaluate outer * |inner * x|^p / p (p = 2 is the
/// subgaussian x^2/2). Tabulated kinds hold a piecewise-linear convex
/// table on the nonnegative half-line and extend evenly; outside the
/// tabulated domain the value is +infinity.
class PhiFunction {
public:
    static PhiFunction subgaussian() {
        PhiFunction f;
        f.kind_ = PhiKind::Subgaussian;
        f.p_ = 2.0;
        return f;
    }

    /// |x|^p / p with p > 1.
    static PhiFunction power_type(double p) {
        if (!(p > 1.0)) throw DomainError("power_type: exponent must exceed 1");
        PhiFunction f;
        f.kind_ = PhiKind::PowerType;
        f.p_ = p;
        return f;
    }

    /// Piecewise-linear half-line table; grid[0] must be 0 with value 0 and
    /// the slopes must be nondecreasing (convexity).
    static PhiFunction tabulated(PhiKind kind, std::vector<double> grid,
                                 std::vector<double> values) {
        if (grid.size() != values.size() || grid.size() < 2)
            throw DomainError("tabulated phi: need matching grid/value arrays, >= 2 points");
        if (grid.front() != 0.0 || values.front() != 0.0)
            throw DomainError("tabulated phi: table must start at (0, 0)");
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1]))
                throw DomainError("tabulated phi: grid must be strictly increasing");
        double prev_slope = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < grid.size(); ++i) {
            const double s = (values[i] - values[i - 1]) / (grid[i] - grid[i - 1]);
            if (s < prev_slope - 1e-12 * (1.0 + std::fabs(prev_slope)))
                throw DomainError("tabulated phi: slopes must be nondecreasing");
            prev_slope = s;
        }
        PhiFunction f;
        f.kind_ = kind;
        f.grid_ = std::move(grid);
        f.values_ = std::move(values);
        return f;
    }

    PhiKind kind() const { return kind_; }
    bool is_tabulated() const { return !grid_.empty(); }
    double power_exponent() const { return p_; }
    double outer_scale() const { return outer_; }
    double inner_scale() const { return inner_; }
    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }

    /// Domain radius; +infinity for the closed forms.
    double lambda0() const {
        if (!is_tabulated()) return std::numeric_limits<double>::infinity();
        return grid_.back();
    }

    double operator()(double lambda) const {
        const double x = std::fabs(lambda);
        if (!is_tabulated()) {
            const double y = inner_ * x;
            return outer_ * ((p_ == 2.0) ? 0.5 * y * y : std::pow(y, p_) / p_);
        }
        if (x > grid_.back()) return std::numeric_limits<double>::infinity();
        const std::size_t i = segment_index(x);
        const double t = (x - grid_[i]) / (grid_[i + 1] - grid_[i]);
        return values_[i] + t * (values_[i + 1] - values_[i]);
    }

    /// Right derivative at |lambda| (odd extension has the sign of lambda).
    double deriv(double lambda) const {
        const double x = std::fabs(lambda);
        double d;
        if (!is_tabulated()) {
            const double y = inner_ * x;
            d = outer_ * inner_ * ((p_ == 2.0) ? y : std::pow(y, p_ - 1.0));
        } else {
            if (x >= grid_.back()) {
                d = segment_slope(grid_.size() - 2);
            } else {
                d = segment_slope(segment_index(x));
            }
        }
        return lambda < 0.0 ? -d : d;
    }

    /// Central-second-difference curvature at the origin.
    double second_deriv0() const {
        double h;
        if (is_tabulated()) {
            h = grid_[1];
        } else {
            h = 1e-6;
        }
        return 2.0 * (*this)(h) / (h * h);
    }

    /// Unique x >= 0 with phi(x) = p, by bisection. Throws DomainError when p
    /// exceeds the supremum of phi over the (finite) domain.
    double inverse(double p) const {
        if (p < 0.0) throw DomainError("phi inverse: negative level");
        if (p == 0.0) return 0.0;
        double lo = 0.0;
        double hi;
        if (is_tabulated()) {
            if (p > values_.back())
                throw DomainError("phi inverse: level above the tabulated range");
            hi = grid_.back();
        } else {
            hi = 1.0;
            int guard = 0;
            while ((*this)(hi) < p) {
                hi *= 2.0;
                if (++guard > 1200) throw NonConvergence("phi inverse: bracket expansion failed");
            }
        }
        for (int it = 0; it < 200 && (hi - lo) > 1e-15 * (1.0 + hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            ((*this)(mid) < p ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    /// outer * phi(inner * x) as a new function; exact for tables.
    PhiFunction scaled(double outer, double inner) const {
        PhiFunction f = *this;
        if (is_tabulated()) {
            for (auto& g : f.grid_) g /= inner;
            for (auto& v : f.values_) v *= outer;
        } else {
            f.outer_ *= outer;
            f.inner_ *= inner;
        }
        return f;
    }

    /// Invariant probes; empty result means no violation detected.
    std::vector<std::string> validate() const {
        std::vector<std::string> issues;
        if (std::fabs((*this)(0.0)) > 0.0) issues.push_back("phi(0) != 0");
        const double curv = second_deriv0();
        const double probe_edge = is_tabulated() ? grid_.back() : 4.0;
        const double scale = (*this)(probe_edge) / (probe_edge * probe_edge);
        if (!(curv > 1e-4 * scale)) issues.push_back("second derivative at 0 not positive");
        // Midpoint convexity with a strict margin on a probe grid.
        const double hi = is_tabulated() ? grid_.back() : 4.0;
        const int K = 33;
        double worst_margin = std::numeric_limits<double>::infinity();
        for (int i = 0; i + 2 < K; ++i) {
            const double a = hi * (i + 1) / K;
            const double b = hi * (i + 3) / K;
            const double m = 0.5 * ((*this)(a) + (*this)(b)) - (*this)(0.5 * (a + b));
            worst_margin = std::min(worst_margin, m / ((b - a) * (b - a)));
        }
        if (!(worst_margin > -1e-12)) issues.push_back("convexity violated on probe grid");
        // Superlinear growth toward the domain edge.
        const double edge = is_tabulated() ? grid_.back() : 64.0;
        double prev = -std::numeric_limits<double>::infinity();
        bool increasing = true;
        for (double x = edge / 16.0; x <= edge * (1.0 + 1e-12); x *= 2.0) {
            const double ratio = (*this)(std::min(x, edge)) / std::min(x, edge);
            if (ratio < prev - 1e-12) increasing = false;
            prev = ratio;
        }
        if (!increasing) issues.push_back("phi(x)/x not increasing toward the domain edge");
        return issues;
    }

private:
    std::size_t segment_index(double x) const {
        const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - grid_.begin());
        if (i == 0) return 0;
        if (i >= grid_.size()) return grid_.size() - 2;
        return i - 1;
    }

    double segment_slope(std::size_t i) const {
        return (values_[i + 1] - values_[i]) / (grid_[i + 1] - grid_[i]);
    }

    PhiKind kind_ = PhiKind::Subgaussian;
    double p_ = 2.0;
    double outer_ = 1.0;
    double inner_ = 1.0;
    std::vector<double> grid_, values_;
};

struct ConjugatePoint {
    double value;  // phi*(x)
    double slope;  // maximizing argument, the right derivative of phi*
};

/// sup over the domain of (x * l - phi(l)) with the maximizer reported.
/// lo_hint warm-starts the search; the maximizer is nondecreasing in x.
inline ConjugatePoint conjugate_value(const PhiFunction& phi, double x, double lo_hint = 0.0) {
    if (x < 0.0) throw DomainError("conjugate: negative argument");
    if (x == 0.0) return {0.0, 0.0};
    if (phi.is_tabulated()) {
        const auto& g = phi.grid();
        const auto& v = phi.values();
        // The objective is concave and piecewise linear; the maximum sits at
        // the first knot whose outgoing slope reaches x.
        std::size_t j = 0;
        while (j + 1 < g.size()) {
            const double s = (v[j + 1] - v[j]) / (g[j + 1] - g[j]);
            if (s >= x) break;
            ++j;
        }
        if (j + 1 == g.size()) {
            throw NonConvergence(
                "conjugate: argument beyond the representable slope range of the table");
        }
        return {g[j] * x - v[j], g[j]};
    }
    // Smooth closed form: solve phi'(l) = x with geometric bracketing.
    double lo = std::max(lo_hint, 0.0);
    if (phi.deriv(lo) >= x) {
        // Warm hint overshot (or slope onset at 0); restart from 0.
        lo = 0.0;
        if (phi.deriv(lo) >= x) return {0.0, 0.0};
    }
    double hi = std::max(1e-8, lo > 0.0 ? 2.0 * lo : 1.0);
    int guard = 0;
    while (phi.deriv(hi) < x) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 1100) throw NonConvergence("conjugate: slope bracket expansion failed");
    }
    for (int it = 0; it < 200 && (hi - lo) > 1e-15 * (1.0 + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (phi.deriv(mid) < x ? lo : hi) = mid;
    }
    const double l = 0.5 * (lo + hi);
    return {l * x - phi(l), l};
}

/// Tabulated Young-Fenchel conjugate with its maximizer sequence.
struct ConjugateTable {
    std::vector<double> grid;    // x >= 0, increasing
    std::vector<double> values;  // phi*(x), convex nondecreasing
    std::vector<double> slopes;  // maximizers, nondecreasing

    /// Piecewise-linear value; beyond the last grid point the table extends
    /// linearly with the final slope (a lower estimate of the true convex
    /// conjugate, which keeps downstream exponential bounds conservative).
    double value(double x) const {
        if (x < 0.0) throw DomainError("conjugate table: negative argument");
        if (x <= grid.front()) return values.front();
        if (x >= grid.back())
            return values.back() + slopes.back() * (x - grid.back());
        const std::size_t i = seg(x);
        const double t = (x - grid[i]) / (grid[i + 1] - grid[i]);
        return values[i] + t * (values[i + 1] - values[i]);
    }

    /// Interpolated right derivative (the maximizer curve).
    double slope(double x) const {
        if (x < 0.0) throw DomainError("conjugate table: negative argument");
        if (x <= grid.front()) return slopes.front();
        if (x >= grid.back()) return slopes.back();
        const std::size_t i = seg(x);
        const double t = (x - grid[i]) / (grid[i + 1] - grid[i]);
        return slopes[i] + t * (slopes[i + 1] - slopes[i]);
    }

    /// Smallest x with value(x) >= y under the piecewise-linear model.
    double inverse(double y) const {
        if (y <= values.front()) return grid.front();
        for (std::size_t i = 1; i < grid.size(); ++i) {
            if (values[i] >= y) {
                const double dv = values[i] - values[i - 1];
                if (dv <= 0.0) return grid[i - 1];
                return grid[i - 1] + (y - values[i - 1]) / dv * (grid[i] - grid[i - 1]);
            }
        }
        if (slopes.back() > 0.0)
            return grid.back() + (y - values.back()) / slopes.back();
        throw DomainError("conjugate table: level unreachable, zero terminal slope");
    }

private:
    std::size_t seg(double x) const {
        const auto it = std::upper_bound(grid.begin(), grid.end(), x);
        std::size_t i = static_cast<std::size_t>(it - grid.begin());
        if (i == 0) return 0;
        if (i >= grid.size()) return grid.size() - 2;
        return i - 1;
    }
};

/// Evaluates the conjugate over an increasing nonnegative grid, warm-starting
/// the inner maximization from the previous maximizer.
inline ConjugateTable fenchel_transform(const PhiFunction& phi, const std::vector<double>& x_grid) {
    if (x_grid.empty()) throw DomainError("fenchel_transform: empty grid");
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        if (x_grid[i] < 0.0) throw DomainError("fenchel_transform: negative grid point");
        if (i && !(x_grid[i] > x_grid[i - 1]))
            throw DomainError("fenchel_transform: grid must be strictly increasing");
    }
    ConjugateTable t;
    t.grid = x_grid;
    t.values.resize(x_grid.size());
    t.slopes.resize(x_grid.size());
    double hint = 0.0;
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        const ConjugatePoint p = conjugate_value(phi, x_grid[i], hint);
        t.values[i] = std::max(0.0, p.value);
        t.slopes[i] = p.slope;
        hint = p.slope;
    }
    return t;
}

/// Conjugate evaluation grid: dense on [0, x_max], augmented with the table
/// knot slopes of a tabulated phi so that piecewise-linear conjugation is
/// exact at those breakpoints.
inline std::vector<double> conjugate_grid_for(const PhiFunction& phi, double x_max,
                                              std::size_t n = 2048) {
    std::vector<double> g;
    g.reserve(n + 64);
    for (std::size_t i = 0; i < n; ++i) g.push_back(x_max * static_cast<double>(i) / (n - 1));
    if (phi.is_tabulated()) {
        const auto& gr = phi.grid();
        const auto& v = phi.values();
        for (std::size_t i = 0; i + 1 < gr.size(); ++i) {
            const double s = (v[i + 1] - v[i]) / (gr[i + 1] - gr[i]);
            if (s > 0.0 && s < x_max) g.push_back(s);
        }
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end(),
                        [](double a, double b) { return std::fabs(a - b) < 1e-14; }),
            g.end());
    return g;
}

/// Largest conjugate argument the function can represent: the terminal table
/// slope for tabulated weights, unbounded for the superlinear closed forms.
inline double max_conjugate_argument(const PhiFunction& phi) {
    if (!phi.is_tabulated()) return std::numeric_limits<double>::infinity();
    const auto& g = phi.grid();
    const auto& v = phi.values();
    const std::size_t m = g.size();
    return (v[m - 1] - v[m - 2]) / (g[m - 1] - g[m - 2]);
}

/// Double conjugate evaluated against a stored table, restricted to the
/// table's hull: max over grid knots of (l * x_i - phi*(x_i)).
inline double biconjugate_value(const ConjugateTable& t, double lambda) {
    const double l = std::fabs(lambda);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.grid.size(); ++i)
        best = std::max(best, l * t.grid[i] - t.values[i]);
    return best;
}

/// Moment scale p -> p / phi^{-1}(p) for p >= 2.
class PsiMomentScale {
public:
    explicit PsiMomentScale(PhiFunction phi) : phi_(std::move(phi)) {}
    double operator()(double p) const {
        if (p < 2.0) throw DomainError("psi: p below 2");
        return p / phi_.inverse(p);
    }
    const PhiFunction& phi() const { return phi_; }

private:
    PhiFunction phi_;
};

enum class NormMethod { MgfFit, MomentSup };

struct NormEstimate {
    double value = 0.0;
    NormMethod method = NormMethod::MomentSup;
    std::string grid_used;
};

/// Moment norm: sup over a log-spaced grid p in [2, p_max] of the empirical
/// p-th absolute moment root divided by psi(p). Moments are computed on
/// max-normalized magnitudes, so they never overflow and the estimate scales
/// exactly under binary rescaling of the sample.
inline NormEstimate gpsi_norm(const std::vector<double>& samples, const PsiMomentScale& psi,
                              double p_max, std::size_t grid_points = 33) {
    if (samples.empty()) throw DomainError("gpsi_norm: empty sample");
    if (!(p_max >= 2.0)) throw DomainError("gpsi_norm: p_max below 2");
    double m = 0.0;
    for (double x : samples) m = std::max(m, std::fabs(x));
    NormEstimate est;
    est.method = NormMethod::MomentSup;
    est.grid_used = "p log-spaced in [2," + std::to_string(p_max) + "], " +
                    std::to_string(grid_points) + " points";
    if (m == 0.0) return est;
    const std::size_t G = (p_max == 2.0) ? 1 : std::max<std::size_t>(2, grid_points);
    double best = 0.0;
    for (std::size_t k = 0; k < G; ++k) {
        const double p =
            (G == 1) ? 2.0 : 2.0 * std::pow(p_max / 2.0, static_cast<double>(k) / (G - 1));
        double acc = 0.0;
        for (double x : samples) acc += std::pow(std::fabs(x) / m, p);
        const double moment_root = m * std::pow(acc / samples.size(), 1.0 / p);
        best = std::max(best, moment_root / psi(p));
    }
    est.value = best;
    return est;
}

struct MgfFitOptions {
    double clip_share = 0.5;  // drop grid points dominated by a single summand
    double tol = 1e-8;        // absolute bisection tolerance on the scale
};

namespace detail {
/// log of the empirical MGF at lambda plus the largest summand's share.
inline std::pair<double, double> log_empirical_mgf(const std::vector<double>& samples,
                                                   double lambda) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : samples) mx = std::max(mx, lambda * x);
    double acc = 0.0;
    for (double x : samples) acc += std::exp(lambda * x - mx);
    const double lse = mx + std::log(acc);
    return {lse - std::log(static_cast<double>(samples.size())), std::exp(mx - lse)};
}
}  // namespace detail

/// Smallest tau >= 0 with log MGF-hat(l) <= phi(l * tau) across the grid;
/// the sample analogue of the exponential-moment norm. Grid points where a
/// single summand carries at least clip_share of the empirical MGF are
/// dropped as untrustworthy.
inline NormEstimate bphi_norm_mgf(const std::vector<double>& samples, const PhiFunction& phi,
                                  const std::vector<double>& lambda_grid,
                                  const MgfFitOptions& opt = {}) {
    if (samples.empty()) throw DomainError("bphi_norm_mgf: empty sample");
    if (lambda_grid.empty()) throw DomainError("bphi_norm_mgf: empty lambda grid");
    std::vector<std::pair<double, double>> kept;  // (lambda, log mgf)
    std::size_t dropped = 0;
    // The share of the largest summand is at least 1/n, so tiny samples
    // saturate the clip rule; give the threshold headroom above that floor.
    const double clip = std::max(opt.clip_share, 8.0 / static_cast<double>(samples.size()));
    for (double l : lambda_grid) {
        if (l == 0.0) continue;
        if (std::fabs(l) >= phi.lambda0()) throw DomainError("bphi_norm_mgf: grid hits domain edge");
        const auto [lm, share] = detail::log_empirical_mgf(samples, l);
        if (share >= clip) {
            ++dropped;
            continue;
        }
        kept.emplace_back(l, lm);
    }
    NormEstimate est;
    est.method = NormMethod::MgfFit;
    est.grid_used = std::to_string(lambda_grid.size()) + " lambda points, " +
                    std::to_string(dropped) + " clipped";
    if (kept.empty()) throw DomainError("bphi_norm_mgf: every grid point clipped");
    const auto feasible = [&](double tau) {
        for (const auto& [l, lm] : kept) {
            if (lm > phi(l * tau)) return false;
        }
        return true;
    };
    if (feasible(0.0)) return est;  // value 0
    double lo = 0.0, hi = 1e-12;
    int guard = 0;
    while (!feasible(hi)) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 700) throw UnboundedNorm("bphi_norm_mgf: no finite scale fits the grid");
    }
    while (hi - lo > opt.tol * (1.0 + hi)) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }
    est.value = hi;
    return est;
}

/// Log of the column-wise maximal empirical MGF, evenized and convexified
/// into a tabulated member of the weight-function class. Columns are
/// centered internally; grid points whose maximizing column is dominated by
/// one summand are dropped.
inline PhiFunction natural_phi(const Matrix& paths, const std::vector<double>& lambda_grid,
                               double clip_share = 0.5) {
    if (paths.rows == 0 || paths.cols == 0) throw DomainError("natural_phi: empty sample matrix");
    std::vector<double> mean(paths.cols, 0.0);
    for (std::size_t r = 0; r < paths.rows; ++r)
        for (std::size_t c = 0; c < paths.cols; ++c) mean[c] += paths.at(r, c);
    for (auto& m : mean) m /= static_cast<double>(paths.rows);

    // max over columns of the centered log empirical MGF, per grid lambda
    const double clip = std::max(clip_share, 8.0 / static_cast<double>(paths.rows));
    std::vector<std::pair<double, double>> pts;  // (|lambda|, value), evenized below
    for (double l : lambda_grid) {
        double best = -std::numeric_limits<double>::infinity();
        double best_share = 0.0;
        for (std::size_t c = 0; c < paths.cols; ++c) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < paths.rows; ++r)
                mx = std::max(mx, l * paths.at(r, c));
            double acc = 0.0;
            for (std::size_t r = 0; r < paths.rows; ++r)
                acc += std::exp(l * paths.at(r, c) - mx);
            const double lse = mx + std::log(acc);
            const double lm = lse - std::log(static_cast<double>(paths.rows)) - l * mean[c];
            if (lm > best) {
                best = lm;
                best_share = std::exp(mx - lse);
            }
        }
        if (best_share >= clip) continue;
        pts.emplace_back(std::fabs(l), std::max(0.0, best));
    }
    pts.emplace_back(0.0, 0.0);
    std::sort(pts.begin(), pts.end());
    // evenize: keep the larger value per magnitude
    std::vector<std::pair<double, double>> ev;
    for (const auto& p : pts) {
        if (!ev.empty() && std::fabs(ev.back().first - p.first) < 1e-14)
            ev.back().second = std::max(ev.back().second, p.second);
        else
            ev.push_back(p);
    }
    if (ev.size() < 2) throw DomainError("natural_phi: too few trusted grid points");
    // lower convex hull (monotone chain)
    std::vector<std::pair<double, double>> hull;
    for (const auto& p : ev) {
        while (hull.size() >= 2) {
            const auto& a = hull[hull.size() - 2];
            const auto& b = hull[hull.size() - 1];
            const double cross = (b.first - a.first) * (p.second - a.second) -
                                 (p.first - a.first) * (b.second - a.second);
            if (cross <= 0.0)
                hull.pop_back();
            else
                break;
        }
        hull.push_back(p);
    }
    std::vector<double> g, v;
    for (const auto& p : hull) {
        g.push_back(p.first);
        v.push_back(p.second);
    }
    return PhiFunction::tabulated(PhiKind::Natural, std::move(g), std::move(v));
}

/// n * phi(x / sqrt(n)): the weight of a normalized n-fold sum. The
/// subgaussian form is a fixed point and is returned unchanged.
inline PhiFunction phi_n(const PhiFunction& phi, std::size_t n) {
    if (n == 0) throw DomainError("phi_n: n must be positive");
    if (n == 1 || phi.kind() == PhiKind::Subgaussian) return phi;
    const double nn = static_cast<double>(n);
    if (!phi.is_tabulated() && phi.kind() == PhiKind::PowerType) {
        // n * |x/sqrt(n)|^p / p folds into a pure outer scale.
        return phi.scaled(std::pow(nn, 1.0 - phi.power_exponent() / 2.0), 1.0);
    }
    return phi.scaled(nn, 1.0 / std::sqrt(nn));
}

/// Pointwise sup over n <= n_max of phi_n, combined with the parabolic
/// envelope (curvature-at-zero limit) that dominates the large-n members.
inline PhiFunction zeta(const PhiFunction& phi, std::size_t n_max,
                        std::vector<double> lambda_grid = {}) {
    if (n_max == 0) throw DomainError("zeta: n_max must be positive");
    if (phi.kind() == PhiKind::Subgaussian) return phi;
    if (lambda_grid.empty()) {
        const double top = phi.is_tabulated() ? phi.grid().back() : 8.0;
        for (int i = 0; i <= 512; ++i) lambda_grid.push_back(top * i / 512.0);
    }
    const double sigma2 = phi.second_deriv0();
    std::vector<double> g, v;
    for (double l : lambda_grid) {
        if (l < 0.0) continue;
        if (l >= phi.lambda0() && l != 0.0) break;
        double best = 0.5 * sigma2 * l * l;
        for (std::size_t n = 1; n <= n_max; ++n)
            best = std::max(best, static_cast<double>(n) * phi(l / std::sqrt(static_cast<double>(n))));
        g.push_back(l);
        v.push_back(best);
    }
    if (g.size() < 2) throw DomainError("zeta: lambda grid too small for the domain");
    return PhiFunction::tabulated(PhiKind::Custom, std::move(g), std::move(v));
}

}  // namespace chainbound
