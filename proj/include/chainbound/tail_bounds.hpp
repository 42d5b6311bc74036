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
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "chainbound/chaining.hpp"
#include "chainbound/common.hpp"
#include "chainbound/metric_space.hpp"
#include "chainbound/phi.hpp"

namespace chainbound {

/// One evaluated exponential bound on the tail of the field maximum:
/// bound = (e^C + 1) * N(T, d, C * delta) * exp(-phi*(u)), with the radius
/// delta taken from the chaining profile inverse. The two-sided variant is
/// exactly twice the one-sided value.
struct TailBoundReport {
    double u = 0.0;
    double C = 0.0;
    double u0 = std::numeric_limits<double>::quiet_NaN();  // validity onset for this C
    bool no_onset = false;
    bool below_u0 = false;
    bool k_inverse_capped = false;
    std::size_t covering_count = 0;
    double delta_used = 0.0;
    double conj_value = 0.0;
    double bound = 0.0;

    double two_sided() const { return 2.0 * bound; }
};

inline double assemble_bound(double C, std::size_t covering_count, double conj_value) {
    return (std::exp(C) + 1.0) * static_cast<double>(covering_count) * std::exp(-conj_value);
}

struct U0Result {
    double u0 = std::numeric_limits<double>::quiet_NaN();
    bool found = false;
    double ceiling = 0.0;  // largest scanned u when no onset exists
    bool degenerate_profile = false;  // the chaining profile is identically zero
};

inline std::vector<double> default_u_scan(double u_min = 0.05, double u_max = 64.0,
                                          std::size_t points = 512) {
    std::vector<double> g;
    for (std::size_t i = 0; i < points; ++i)
        g.push_back(u_min * std::pow(u_max / u_min, static_cast<double>(i) / (points - 1)));
    return g;
}

/// Smallest scanned u whose localization radius drops to half the profile
/// supremum; the radius is nonincreasing in u so a forward scan suffices.
inline U0Result u0_of_C(const KProfile& prof, const ConjugateTable& conj, double C,
                        const std::vector<double>& u_scan = default_u_scan()) {
    if (prof.delta_grid.empty()) throw DomainError("u0_of_C: empty profile");
    U0Result res;
    res.ceiling = u_scan.empty() ? 0.0 : u_scan.back();
    const double k0 = prof.k0();
    if (!(k0 > 0.0)) {
        res.degenerate_profile = true;
        return res;
    }
    for (double u : u_scan) {
        if (!(conj.slope(u) > 0.0)) continue;  // below the conjugate slope onset
        const DeltaPhiResult d = delta_phi(prof, conj, C, u);
        if (d.delta <= 0.5 * k0) {
            res.u0 = u;
            res.found = true;
            return res;
        }
    }
    return res;
}

struct Theorem1Options {
    CoverMode cover = CoverMode::Greedy;
    std::size_t exact_limit = 20;
};

/// Assembles the headline bound at a single (C, u). Validity relative to the
/// onset u0 is reported through flags; the formula value is always computed,
/// flagged entries are outside the guaranteed range.
inline TailBoundReport theorem1_bound(const FiniteMetricSpace& space, const KProfile& prof,
                                      const ConjugateTable& conj, double C, double u,
                                      const U0Result& onset, const Theorem1Options& opt = {}) {
    if (!(u > 0.0)) throw DomainError("theorem1_bound: u must be positive");
    TailBoundReport rep;
    rep.u = u;
    rep.C = C;
    const DeltaPhiResult d = delta_phi(prof, conj, C, u);  // DomainError below slope onset
    rep.delta_used = d.delta;
    rep.k_inverse_capped = d.capped;
    rep.no_onset = !onset.found;
    rep.u0 = onset.found ? onset.u0 : std::numeric_limits<double>::quiet_NaN();
    rep.below_u0 = !onset.found || u < onset.u0;
    const auto subset = all_indices(space);
    rep.covering_count =
        covering_number(space, subset, C * d.delta, opt.cover, opt.exact_limit).first;
    rep.conj_value = conj.value(u);
    rep.bound = assemble_bound(C, rep.covering_count, rep.conj_value);
    return rep;
}

inline TailBoundReport theorem1_bound(const FiniteMetricSpace& space, const KProfile& prof,
                                      const ConjugateTable& conj, double C, double u,
                                      const Theorem1Options& opt = {},
                                      const std::vector<double>& u_scan = default_u_scan()) {
    return theorem1_bound(space, prof, conj, C, u, u0_of_C(prof, conj, C, u_scan), opt);
}

/// Minimal bound over the constant grid with the onset respected: entries
/// below their own u0 are excluded unless every entry is.
inline TailBoundReport optimize_C(const FiniteMetricSpace& space, const KProfile& prof,
                                  const ConjugateTable& conj, double u,
                                  const std::vector<double>& C_grid,
                                  const Theorem1Options& opt = {},
                                  const std::vector<double>& u_scan = default_u_scan()) {
    if (C_grid.empty()) throw DomainError("optimize_C: empty C grid");
    std::vector<TailBoundReport> reports;
    for (double C : C_grid)
        reports.push_back(theorem1_bound(space, prof, conj, C, u, opt, u_scan));
    const TailBoundReport* best = nullptr;
    for (const auto& r : reports) {
        if (r.below_u0) continue;
        if (!best || r.bound < best->bound) best = &r;
    }
    if (!best) {  // all flagged: fall back to the raw minimum, flags kept
        for (const auto& r : reports)
            if (!best || r.bound < best->bound) best = &r;
    }
    return *best;
}

/// Everything a bound evaluation needs, derived from one weight function.
struct BoundPipeline {
    PhiFunction phi;
    FiniteMetricSpace space;
    KProfile profile;
    ConjugateTable conj;
    std::vector<double> u_scan = default_u_scan();
};

struct PipelineParams {
    std::vector<double> delta_grid;  // empty: geometric grid from the space scale
    KProfileOptions chaining{};
    double conj_x_max = 0.0;  // 0: derived from u_max_hint
    double u_max_hint = 16.0;
    std::size_t conj_points = 4096;
    NaturalDistanceOptions distance{};
};

inline std::vector<double> auto_delta_grid(const FiniteMetricSpace& space, std::size_t points = 28) {
    double lo = space.min_positive_distance();
    if (!std::isfinite(lo)) lo = 0.5;  // all-zero space: any grid works
    lo = std::min(0.999, std::max(1e-6, 0.999 * lo));
    std::vector<double> g;
    for (std::size_t i = 0; i + 1 < points; ++i)
        g.push_back(lo * std::pow(1.0 / lo, static_cast<double>(i) / (points - 1)));
    g.push_back(1.0);
    return g;
}

inline ConjugateTable pipeline_conjugate(const PhiFunction& phi, const PipelineParams& p) {
    double x_max = p.conj_x_max > 0.0 ? p.conj_x_max : 1.25 * p.u_max_hint + 1.0;
    x_max = std::min(x_max, 0.98 * max_conjugate_argument(phi));
    return fenchel_transform(phi, conjugate_grid_for(phi, x_max, p.conj_points));
}

inline BoundPipeline make_pipeline(FiniteMetricSpace space, const PhiFunction& phi,
                                   const PipelineParams& p = {}) {
    BoundPipeline pl{phi, std::move(space), {}, {}, default_u_scan()};
    const auto grid = p.delta_grid.empty() ? auto_delta_grid(pl.space) : p.delta_grid;
    pl.profile = k_profile(pl.space, grid, p.chaining);
    pl.conj = pipeline_conjugate(phi, p);
    return pl;
}

inline BoundPipeline make_pipeline_from_samples(const Matrix& paths, const PhiFunction& phi,
                                                const PipelineParams& p = {},
                                                std::vector<std::string> labels = {}) {
    return make_pipeline(natural_distance(paths, phi, std::move(labels), p.distance), phi, p);
}

/// Normalized-sum variants: the same assembly with the weight replaced by
/// its n-fold form (fixed n) or by the uniform-in-n envelope, and distances
/// re-estimated under the substituted weight. With the subgaussian weight
/// both reduce to the plain bound, bit for bit.
struct FixedN {
    std::size_t n;
};
struct UniformInN {
    std::size_t n_max;
};

inline BoundPipeline theorem2_pipeline(const Matrix& paths, const PhiFunction& phi, FixedN mode,
                                       const PipelineParams& p = {}) {
    return make_pipeline_from_samples(paths, phi_n(phi, mode.n), p);
}

inline BoundPipeline theorem2_pipeline(const Matrix& paths, const PhiFunction& phi,
                                       UniformInN mode, const PipelineParams& p = {}) {
    return make_pipeline_from_samples(paths, zeta(phi, mode.n_max), p);
}

template <typename Mode>
inline TailBoundReport theorem2_bound(const Matrix& paths, const PhiFunction& phi, Mode mode,
                                      double C, double u, const PipelineParams& p = {},
                                      const Theorem1Options& opt = {}) {
    const BoundPipeline pl = theorem2_pipeline(paths, phi, mode, p);
    return theorem1_bound(pl.space, pl.profile, pl.conj, C, u, opt, pl.u_scan);
}

// ---------------------------------------------------------------------------
// martingale block machinery

/// Envelope model of a normalized martingale: conjugate-table tail weight,
/// growth exponent, and the standard-deviation curve.
struct MartingaleModel {
    double r = 2.0;     // tail exponent, >= 1
    double beta = 0.5;  // sigma growth exponent
    std::function<double(double)> sigma;
    std::function<double(double)> slowly_varying = [](double) { return 1.0; };
    ConjugateTable conj;
    double c_doob = 0.5;  // constant absorbed from the maximal-inequality step

    /// Iterated-logarithm normalizer [log log (n+3)]^{1/r}.
    double v(double n) const { return std::pow(std::log(std::log(n + 3.0)), 1.0 / r); }
};

/// sigma must grow like n^beta between the supplied slowly varying envelopes.
inline void check_sigma_envelope(const MartingaleModel& m, double n_lo, double n_hi,
                                 const std::function<double(double)>& L1,
                                 const std::function<double(double)>& L2) {
    double prev = -std::numeric_limits<double>::infinity();
    for (double n = n_lo; n <= n_hi; n = std::max(n + 1.0, n * 1.25)) {
        const double s = m.sigma(n);
        if (s < prev - 1e-12) throw DomainError("sigma envelope: not nondecreasing");
        prev = s;
        const double nb = std::pow(n, m.beta);
        if (s < nb * L1(n) - 1e-9 || s > nb * L2(n) + 1e-9)
            throw DomainError("sigma envelope: outside n^beta bracket at n=" + format_double(n));
    }
}

/// Consecutive geometric integer blocks [A, A*Q - 1] covering [n_lo, n_max].
struct BlockPartition {
    std::uint64_t Q = 2;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> blocks;

    static BlockPartition geometric(std::uint64_t Q, std::uint64_t n_lo, std::uint64_t n_max) {
        if (Q < 2) throw DomainError("block partition: ratio must be at least 2");
        if (n_lo == 0 || n_lo > n_max) throw DomainError("block partition: bad range");
        BlockPartition p;
        p.Q = Q;
        std::uint64_t A = n_lo;
        while (A <= n_max) {
            const std::uint64_t B = std::min(n_max, A * Q - 1);
            p.blocks.emplace_back(A, B);
            if (B == n_max) break;
            A = A * Q;
        }
        return p;
    }
};

struct MartingaleBlockBound {
    std::vector<double> exponent;   // per block: phi*(c u sigma(A) v(A) / sigma(B))
    std::vector<double> per_block;  // exp(-exponent)
    double total = 0.0;
};

/// Per-block maximal-inequality estimate and its sum. Each block contributes
/// exp(-phi*(c_doob * u * sigma(A) * v(A) / sigma(B))).
inline MartingaleBlockBound martingale_block_bound(const MartingaleModel& m,
                                                   const BlockPartition& part, double u) {
    if (!(u > 2.0)) throw DomainError("martingale_block_bound: stated range is u > 2");
    if (part.blocks.empty()) throw DomainError("martingale_block_bound: empty partition");
    MartingaleBlockBound out;
    for (const auto& [A, B] : part.blocks) {
        const double sA = m.sigma(static_cast<double>(A));
        const double sB = m.sigma(static_cast<double>(B));
        if (!(sB > 0.0))
            throw DomainError("martingale_block_bound: sigma vanishes at block end " +
                              std::to_string(B));
        const double arg = m.c_doob * u * sA * m.v(static_cast<double>(A)) / sB;
        const double ex = m.conj.value(arg);
        out.exponent.push_back(ex);
        out.per_block.push_back(std::exp(-ex));
        out.total += out.per_block.back();
    }
    return out;
}

/// Least-squares slope of -log(total bound) against u^r L^{1/r}(u): the
/// shape of the aggregate exponent.
inline std::pair<double, double> eq_shape_fit(const MartingaleModel& m, const BlockPartition& part,
                                              const std::vector<double>& u_grid) {
    if (u_grid.size() < 2) throw DomainError("shape fit: need at least two u values");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(u_grid.size());
    for (double u : u_grid) {
        const double x = std::pow(u, m.r) * std::pow(m.slowly_varying(u), 1.0 / m.r);
        const double y = -std::log(martingale_block_bound(m, part, u).total);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    return {slope, intercept};
}

}  // namespace chainbound
