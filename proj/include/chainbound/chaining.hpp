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
#include <mutex>
#include <optional>
#include <vector>

#include <json.hpp>

#include "chainbound/common.hpp"
#include "chainbound/metric_space.hpp"
#include "chainbound/phi.hpp"

namespace chainbound {

/// Positive level weights with unit reciprocal mass. The geometric family
/// 1/gamma_n = rho^{n-1} (1-rho) carries its tail analytically; custom
/// sequences must keep the reciprocal sum at most 1 and gamma_1 >= 3.
struct GammaWeights {
    double rho = 0.0;  // 0 marks a custom sequence
    std::vector<double> gamma;

    double at(std::size_t n) const {  // 1-based level index
        if (n == 0 || n > gamma.size()) throw DomainError("gamma: level out of range");
        return gamma[n - 1];
    }
    std::size_t depth() const { return gamma.size(); }

    /// Reciprocal mass of the stored truncation plus the analytic tail.
    double reciprocal_mass() const {
        double s = 0.0;
        for (double g : gamma) s += 1.0 / g;
        if (rho > 0.0) s += std::pow(rho, static_cast<double>(gamma.size()));
        return s;
    }

    static GammaWeights custom(std::vector<double> g) {
        GammaWeights w;
        w.gamma = std::move(g);
        if (w.gamma.empty() || w.gamma.front() < 3.0)
            throw DomainError("gamma: first weight must be at least 3");
        double s = 0.0;
        for (double v : w.gamma) {
            if (!(v > 0.0)) throw DomainError("gamma: weights must be positive");
            s += 1.0 / v;
        }
        if (s > 1.0 + 1e-9) throw DomainError("gamma: reciprocal mass exceeds 1");
        return w;
    }
};

/// Geometric weights gamma_n = 1 / (rho^{n-1} (1-rho)), rho in (2/3, 1);
/// the constraint on rho forces gamma_1 = 1/(1-rho) >= 3.
inline GammaWeights default_gamma(std::size_t M, double rho) {
    if (!(rho > 2.0 / 3.0 && rho < 1.0))
        throw DomainError("default_gamma: rho must lie in (2/3, 1)");
    if (M == 0) throw DomainError("default_gamma: M must be positive");
    GammaWeights w;
    w.rho = rho;
    w.gamma.resize(M);
    for (std::size_t n = 1; n <= M; ++n)
        w.gamma[n - 1] = 1.0 / (std::pow(rho, static_cast<double>(n - 1)) * (1.0 - rho));
    return w;
}

/// Nested finite subsets of a ball with nearest-point projections.
/// levels[0] = {center}; the last level covers the ball exactly (every point
/// projects at distance zero onto its class representative).
struct ChainingSequence {
    std::uint32_t center = 0;
    double delta = 0.0;
    std::vector<std::uint32_t> ball;                 // ascending label indices
    std::vector<std::vector<std::uint32_t>> levels;  // T_0 .. T_M
    std::vector<std::vector<std::uint32_t>> proj;    // proj[m][k]: level-m image of ball[k]

    std::size_t depth() const { return levels.size() - 1; }
};

enum class ChainStrategy { DyadicNets, GreedyRefine };

struct ChainBuildOptions {
    std::size_t max_levels = 24;
    std::size_t dyadic_ball_cap = 1024;  // larger balls get a single exact level
    std::size_t refine_promotions = 8;
    const std::vector<std::uint32_t>* reps = nullptr;  // zero-class representatives
};

namespace detail {

inline std::vector<std::uint32_t> ball_of(const FiniteMetricSpace& s, std::uint32_t t0,
                                          double delta) {
    std::vector<std::uint32_t> ball;
    const double* row = s.row(t0);
    for (std::size_t i = 0; i < s.size(); ++i)
        if (row[i] <= delta) ball.push_back(static_cast<std::uint32_t>(i));
    return ball;
}

/// Greedy net of the ball seeded with the previous level (nesting): scan in
/// label order, uncovered points become centers.
inline std::vector<std::uint32_t> seeded_net(const FiniteMetricSpace& s,
                                             const std::vector<std::uint32_t>& ball,
                                             const std::vector<std::uint32_t>& seeds, double eps) {
    std::vector<std::uint32_t> centers = seeds;
    std::vector<char> covered(ball.size(), 0);
    for (std::uint32_t c : seeds) {
        const double* row = s.row(c);
        for (std::size_t k = 0; k < ball.size(); ++k)
            if (row[ball[k]] <= eps) covered[k] = 1;
    }
    for (std::size_t k = 0; k < ball.size(); ++k) {
        if (covered[k]) continue;
        const std::uint32_t c = ball[k];
        centers.push_back(c);
        const double* row = s.row(c);
        for (std::size_t p = k; p < ball.size(); ++p)
            if (row[ball[p]] <= eps) covered[p] = 1;
    }
    std::sort(centers.begin(), centers.end());
    centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
    return centers;
}

/// Exact nearest-point projection, ties to the lowest label.
inline std::vector<std::uint32_t> project(const FiniteMetricSpace& s,
                                          const std::vector<std::uint32_t>& ball,
                                          const std::vector<std::uint32_t>& level) {
    std::vector<std::uint32_t> pr(ball.size());
    for (std::size_t k = 0; k < ball.size(); ++k) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t who = level.front();
        const double* row = s.row(ball[k]);
        for (std::uint32_t c : level) {  // ascending, so ties keep the lowest
            if (row[c] < best) {
                best = row[c];
                who = c;
            }
        }
        pr[k] = who;
    }
    return pr;
}

inline bool covers_exactly(const FiniteMetricSpace& s, const std::vector<std::uint32_t>& ball,
                           const std::vector<std::uint32_t>& pr) {
    for (std::size_t k = 0; k < ball.size(); ++k)
        if (s.dist(ball[k], pr[k]) != 0.0) return false;
    return true;
}

}  // namespace detail

inline double chain_L(const FiniteMetricSpace& s, const ChainingSequence& chain,
                      const GammaWeights& gamma);

/// Builds a chaining sequence of the ball around t0 of radius delta.
/// DyadicNets grows nested greedy nets at radii delta * 2^-m until the ball
/// is covered exactly; GreedyRefine additionally promotes worst offenders to
/// earlier levels while that improves the weighted increment sum. Balls
/// beyond the dyadic cap get the single exact level directly.
inline ChainingSequence build_chain(const FiniteMetricSpace& s, std::uint32_t t0, double delta,
                                    ChainStrategy strategy, const ChainBuildOptions& opt = {}) {
    if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("build_chain: delta must lie in (0,1]");
    ChainingSequence chain;
    chain.center = t0;
    chain.delta = delta;
    chain.ball = detail::ball_of(s, t0, delta);

    std::vector<std::uint32_t> reps_local;
    const std::vector<std::uint32_t>* reps = opt.reps;
    const auto rep_of = [&](std::uint32_t t) -> std::uint32_t {
        if (reps) return (*reps)[t];
        // local scan: lowest ball member at distance zero
        for (std::uint32_t b : chain.ball) {
            if (s.dist(t, b) == 0.0) return b;
        }
        return t;
    };

    chain.levels.push_back({t0});
    chain.proj.push_back(std::vector<std::uint32_t>(chain.ball.size(), t0));
    if (detail::covers_exactly(s, chain.ball, chain.proj.back())) return chain;

    const auto push_final_level = [&]() {
        std::vector<std::uint32_t> last = chain.levels.back();
        std::vector<std::uint32_t> pr(chain.ball.size());
        for (std::size_t k = 0; k < chain.ball.size(); ++k) {
            const std::uint32_t r = rep_of(chain.ball[k]);
            last.push_back(r);
            pr[k] = r;
        }
        std::sort(last.begin(), last.end());
        last.erase(std::unique(last.begin(), last.end()), last.end());
        chain.levels.push_back(std::move(last));
        chain.proj.push_back(std::move(pr));
    };

    if (chain.ball.size() > opt.dyadic_ball_cap) {
        push_final_level();
        return chain;
    }

    for (std::size_t m = 1; m <= opt.max_levels; ++m) {
        const double eps = delta * std::pow(0.5, static_cast<double>(m));
        auto level = detail::seeded_net(s, chain.ball, chain.levels.back(), eps);
        auto pr = detail::project(s, chain.ball, level);
        const bool exact = detail::covers_exactly(s, chain.ball, pr);
        if (level.size() != chain.levels.back().size() || exact) {
            chain.levels.push_back(std::move(level));
            chain.proj.push_back(std::move(pr));
        }
        if (exact) break;
    }
    if (!detail::covers_exactly(s, chain.ball, chain.proj.back())) push_final_level();

    if (strategy == ChainStrategy::GreedyRefine && chain.depth() >= 2) {
        // Promote the representative of the worst contributor one level up
        // while the functional improves.
        const GammaWeights probe = default_gamma(std::max<std::size_t>(chain.depth(), 8), 0.75);
        double current = chain_L(s, chain, probe);
        for (std::size_t step = 0; step < opt.refine_promotions; ++step) {
            // locate the worst increment among levels 1..M-1
            double worst = 0.0;
            std::size_t wm = 0;
            std::uint32_t wt = 0;
            for (std::size_t m = 1; m < chain.depth(); ++m) {
                for (std::size_t k = 0; k < chain.ball.size(); ++k) {
                    const double inc =
                        s.dist(chain.proj[m][k], chain.proj[m - 1][k]) / probe.at(m);
                    if (inc > worst) {
                        worst = inc;
                        wm = m;
                        wt = chain.ball[k];
                    }
                }
            }
            if (wm == 0) break;
            const std::uint32_t cand = rep_of(wt);
            ChainingSequence trial = chain;
            bool changed = false;
            for (std::size_t m = wm; m < trial.levels.size(); ++m) {
                auto& lv = trial.levels[m];
                if (!std::binary_search(lv.begin(), lv.end(), cand)) {
                    lv.insert(std::upper_bound(lv.begin(), lv.end(), cand), cand);
                    trial.proj[m] = detail::project(s, trial.ball, lv);
                    changed = true;
                }
            }
            if (!changed) break;
            const double trial_L = chain_L(s, trial, probe);
            if (trial_L < current - 1e-15) {
                chain = std::move(trial);
                current = trial_L;
            } else {
                break;
            }
        }
    }
    return chain;
}

/// Weighted chain increment functional: max over the ball of
/// sum_m d(pi_m(t), pi_{m-1}(t)) / gamma_m.
inline double chain_L(const FiniteMetricSpace& s, const ChainingSequence& chain,
                      const GammaWeights& gamma) {
    if (gamma.depth() < chain.depth())
        throw DomainError("chain_L: gamma truncation shallower than the chain");
    double L = 0.0;
    for (std::size_t k = 0; k < chain.ball.size(); ++k) {
        double acc = 0.0;
        for (std::size_t m = 1; m < chain.levels.size(); ++m)
            acc += s.dist(chain.proj[m][k], chain.proj[m - 1][k]) / gamma.at(m);
        L = std::max(L, acc);
    }
    return L;
}

struct KWitness {
    ChainingSequence chain;  // worst-center chain of the winning candidate
    GammaWeights gamma;
};

/// Upper profile of the chaining functional over a radius grid, with the
/// winning witness per radius. Values are made nondecreasing by a running
/// maximum (witnesses carried along), so the generalized inverse is well
/// defined; being witness-based the profile upper-bounds the true double
/// infimum.
struct KProfile {
    std::vector<double> delta_grid;
    std::vector<double> k_values;
    std::vector<KWitness> witnesses;

    double k0() const {
        double m = 0.0;
        for (double v : k_values) m = std::max(m, v);
        return m;
    }
};

struct KProfileOptions {
    std::vector<ChainStrategy> strategies = {ChainStrategy::DyadicNets,
                                             ChainStrategy::GreedyRefine};
    std::vector<double> rhos = {0.70, 0.75, 0.80, 0.85, 0.90};
    ChainBuildOptions build{};
    std::size_t gamma_depth = 32;
};

inline KProfile k_profile(const FiniteMetricSpace& s, std::vector<double> delta_grid,
                          const KProfileOptions& opt = {}) {
    if (delta_grid.empty()) throw DomainError("k_profile: empty delta grid");
    std::sort(delta_grid.begin(), delta_grid.end());
    const auto reps = zero_class_reps(s);
    ChainBuildOptions build = opt.build;
    build.reps = &reps;

    std::vector<GammaWeights> gammas;
    for (double rho : opt.rhos) gammas.push_back(default_gamma(opt.gamma_depth, rho));

    KProfile prof;
    prof.delta_grid = delta_grid;
    prof.k_values.resize(delta_grid.size(), 0.0);
    prof.witnesses.resize(delta_grid.size());

    for (std::size_t di = 0; di < delta_grid.size(); ++di) {
        const double delta = delta_grid[di];
        const std::size_t S = opt.strategies.size();
        const std::size_t G = gammas.size();
        // per candidate (strategy x gamma): worst-center value and its chain
        std::vector<double> worst(S * G, -1.0);
        std::vector<std::uint32_t> worst_center(S * G, 0);
        std::vector<ChainingSequence> worst_chain(S * G);
        std::mutex merge_mutex;

        parallel_chunks(s.size(), [&](std::size_t lo, std::size_t hi) {
            std::vector<double> lworst(S * G, -1.0);
            std::vector<std::uint32_t> lcenter(S * G, 0);
            std::vector<ChainingSequence> lchain(S * G);
            for (std::size_t t0 = lo; t0 < hi; ++t0) {
                for (std::size_t si = 0; si < S; ++si) {
                    const auto chain = build_chain(s, static_cast<std::uint32_t>(t0), delta,
                                                   opt.strategies[si], build);
                    for (std::size_t gi = 0; gi < G; ++gi) {
                        const double L = chain_L(s, chain, gammas[gi]);
                        auto& w = lworst[si * G + gi];
                        if (L > w || (L == w && t0 < lcenter[si * G + gi])) {
                            w = L;
                            lcenter[si * G + gi] = static_cast<std::uint32_t>(t0);
                            lchain[si * G + gi] = chain;
                        }
                    }
                }
            }
            std::lock_guard<std::mutex> lock(merge_mutex);
            for (std::size_t c = 0; c < S * G; ++c) {
                if (lworst[c] > worst[c] ||
                    (lworst[c] == worst[c] && lcenter[c] < worst_center[c])) {
                    worst[c] = lworst[c];
                    worst_center[c] = lcenter[c];
                    worst_chain[c] = std::move(lchain[c]);
                }
            }
        });

        // min over candidates, deterministic tie-break by candidate order
        std::size_t best = 0;
        for (std::size_t c = 1; c < S * G; ++c)
            if (worst[c] < worst[best]) best = c;
        prof.k_values[di] = std::max(0.0, worst[best]);
        prof.witnesses[di] = {std::move(worst_chain[best]), gammas[best % G]};
    }

    // monotone regularization: running max, carrying the witness forward
    for (std::size_t di = 1; di < prof.k_values.size(); ++di) {
        if (prof.k_values[di] < prof.k_values[di - 1]) {
            prof.k_values[di] = prof.k_values[di - 1];
            prof.witnesses[di] = prof.witnesses[di - 1];
        }
    }
    return prof;
}

struct KInverseResult {
    double delta = 1.0;
    bool capped = false;  // no grid radius reaches the level
};

/// Generalized inverse on the stored grid: smallest radius whose profile
/// value reaches h; capped at 1 when none does.
inline KInverseResult k_inverse(const KProfile& prof, double h) {
    if (!(h > 0.0)) throw DomainError("k_inverse: level must be positive");
    for (std::size_t i = 0; i < prof.delta_grid.size(); ++i)
        if (prof.k_values[i] >= h) return {prof.delta_grid[i], false};
    return {1.0, true};
}

struct DeltaPhiResult {
    double delta = 1.0;
    bool capped = false;
};

/// Localization radius: the profile inverse at 0.5 * C / (u * (phi*)'(u)).
/// Nonincreasing in u because the profile is monotone and the conjugate
/// slope nondecreasing.
inline DeltaPhiResult delta_phi(const KProfile& prof, const ConjugateTable& conj, double C,
                                double u) {
    if (!(C > 0.0)) throw DomainError("delta_phi: C must be positive");
    const double sl = conj.slope(u);
    if (!(u > 0.0) || !(sl > 0.0))
        throw DomainError("delta_phi: u * (phi*)'(u) must be positive (below slope onset)");
    const KInverseResult r = k_inverse(prof, 0.5 * C / (u * sl));
    return {r.delta, r.capped};
}

/// Union-bound chain sum: sum_n |T_n| |T_{n-1}| exp(-phi*(u / gamma_n)).
inline double chain_sum_X(const ChainingSequence& chain, const GammaWeights& gamma,
                          const ConjugateTable& conj, double u) {
    if (u < 0.0) throw DomainError("chain_sum_X: u must be nonnegative");
    double X = 0.0;
    for (std::size_t n = 1; n < chain.levels.size(); ++n) {
        const double coef = static_cast<double>(chain.levels[n].size()) *
                            static_cast<double>(chain.levels[n - 1].size());
        X += coef * std::exp(-conj.value(u / gamma.at(n)));
    }
    return X;
}

struct AdmissibilityReport {
    std::vector<double> u_grid;
    std::vector<bool> ok;                // X(u) <= exp(-phi*(u/2)) per grid point
    std::optional<double> threshold_u;   // smallest u from which all later checks hold
};

inline AdmissibilityReport admissibility_check(const ChainingSequence& chain,
                                               const GammaWeights& gamma,
                                               const ConjugateTable& conj,
                                               const std::vector<double>& u_grid) {
    if (u_grid.empty()) throw DomainError("admissibility_check: empty u grid");
    AdmissibilityReport rep;
    rep.u_grid = u_grid;
    rep.ok.resize(u_grid.size());
    for (std::size_t i = 0; i < u_grid.size(); ++i) {
        const double X = chain_sum_X(chain, gamma, conj, u_grid[i]);
        rep.ok[i] = X <= std::exp(-conj.value(0.5 * u_grid[i]));
    }
    for (std::size_t i = 0; i < rep.ok.size(); ++i) {
        bool all = true;
        for (std::size_t j = i; j < rep.ok.size(); ++j) all = all && rep.ok[j];
        if (all) {
            rep.threshold_u = u_grid[i];
            break;
        }
    }
    return rep;
}

inline nlohmann::json chain_to_json(const FiniteMetricSpace& s, const ChainingSequence& chain,
                                    const GammaWeights& gamma) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& lv : chain.levels) {
        nlohmann::json names = nlohmann::json::array();
        for (std::uint32_t t : lv) names.push_back(s.labels()[t]);
        levels.push_back(std::move(names));
    }
    return {{"ball_center", s.labels()[chain.center]},
            {"delta", chain.delta},
            {"levels", levels},
            {"gamma", {{"rho", gamma.rho}, {"M", gamma.depth()}}}};
}

}  // namespace chainbound
