// Acceptance suite: runs every headline requirement end to end and prints
// one pass/fail line per criterion (with sub-lines where a criterion has
// independent parts). Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "chainbound/field_sim.hpp"
#include "chainbound/pipeline.hpp"
#include "chainbound/presets.hpp"
#include "chainbound/tail_bounds.hpp"
#include "oracles.hpp"

using namespace chainbound;

namespace {

int g_failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void report(const std::string& name, bool pass, const std::string& detail, double secs) {
    std::printf("[%s] %s: %s [%.1fs]\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------------------

void criterion1() {
    Timer t;
    bool pass = true;
    std::string detail;

    // conjugate of x^2/2 against itself on [0, 10] with step 0.01
    {
        std::vector<double> grid;
        for (int i = 0; i <= 1000; ++i) grid.push_back(i / 100.0);
        const auto tab = fenchel_transform(PhiFunction::subgaussian(), grid);
        double worst = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            worst = std::max(worst, std::fabs(tab.values[i] - 0.5 * grid[i] * grid[i]));
        pass = pass && worst <= 1e-6;
        detail += "max|phi*-x^2/2|=" + fmt(worst);
    }

    // double-conjugation residual across the weight families
    const auto duality_worst = [](const PhiFunction& phi, double x_max, double l_max) {
        const double cap = std::min(x_max, 0.98 * max_conjugate_argument(phi));
        const auto tab = fenchel_transform(phi, conjugate_grid_for(phi, cap, 16001));
        double worst = 0.0;
        for (int i = 1; i <= 64; ++i) {
            const double l = l_max * i / 64.0;
            const double direct = phi(l);
            if (!std::isfinite(direct)) continue;
            const double rel = std::fabs(biconjugate_value(tab, l) - direct) /
                               (1.0 + std::fabs(direct));
            worst = std::max(worst, rel);
        }
        return worst;
    };
    double w = duality_worst(PhiFunction::subgaussian(), 12.0, 8.0);
    w = std::max(w, duality_worst(PhiFunction::power_type(1.5), 12.0, 8.0));
    w = std::max(w, duality_worst(PhiFunction::power_type(2.0), 12.0, 8.0));
    w = std::max(w, duality_worst(PhiFunction::power_type(3.0), 12.0, 3.0));
    {
        Matrix paths(100000, 1);
        for (std::size_t r = 0; r < paths.rows; ++r) {
            CounterRng rng(1001, r);
            paths.at(r, 0) = rng.next_normal_pair().first;
        }
        std::vector<double> grid;
        for (int i = -40; i <= 40; ++i)
            if (i != 0) grid.push_back(2.0 * i / 40.0);
        const auto nat = natural_phi(paths, grid);
        w = std::max(w, duality_worst(nat, 6.0, 0.75 * nat.lambda0()));
    }
    pass = pass && w <= 1e-6;
    detail += ", max duality residual=" + fmt(w);
    const double secs = t.seconds();
    pass = pass && secs < 5.0;
    report("criterion 1 (conjugate correctness)", pass, detail, secs);
}

void criterion2() {
    Timer t;
    bool pass = true;
    std::size_t spaces = 0;
    const double lnk = std::log(12.0);
    for (std::uint64_t seed = 1; seed <= 200 && pass; ++seed) {
        const auto s = testing::random_points_space(12, seed * 7 + 3);
        const auto subset = all_indices(s);
        for (double eps : {0.2, 0.35, 0.6}) {
            const auto [exact, en] = covering_number(s, subset, eps, CoverMode::Exact);
            const auto [greedy, gn] = covering_number(s, subset, eps, CoverMode::Greedy);
            const std::size_t oracle = testing::exhaustive_cover_count(s, subset, eps);
            if (exact != oracle || greedy < exact ||
                static_cast<double>(greedy) > exact * (1.0 + lnk) + 1e-12 || !en.valid(s) ||
                !gn.valid(s)) {
                pass = false;
                break;
            }
        }
        ++spaces;
    }
    const double secs = t.seconds();
    pass = pass && secs < 60.0;
    report("criterion 2 (covering-number oracle)", pass,
           std::to_string(spaces) + " random 12-point spaces, exact == exhaustive, greedy in band",
           secs);
}

void criterion3() {
    Timer t;
    const std::vector<double> rhos = {0.70, 0.75, 0.80, 0.85, 0.90};
    const std::vector<double> deltas = {0.25, 0.5, 0.75, 0.95};
    bool pass = true;
    double ratio_sum = 0.0, ratio_max = 0.0;
    std::size_t ratio_count = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto s = testing::random_points_space(5, seed * 31 + 7);
        const auto prof = k_profile(s, deltas);
        for (std::size_t i = 0; i < deltas.size(); ++i) {
            const double exact = testing::oracle_K(s, deltas[i], rhos);
            if (prof.k_values[i] < exact - 1e-12) pass = false;
            if (exact > 0.0) {
                const double r = prof.k_values[i] / exact;
                ratio_sum += r;
                ratio_max = std::max(ratio_max, r);
                ++ratio_count;
            } else if (prof.k_values[i] > 1e-12) {
                pass = false;
            }
        }
    }
    const double mean = ratio_sum / std::max<std::size_t>(1, ratio_count);
    pass = pass && mean <= 2.0 && ratio_max <= 3.0;
    const double secs = t.seconds();
    pass = pass && secs < 600.0;
    report("criterion 3 (chaining oracle)", pass,
           "profile >= exhaustive infimum everywhere, mean gap " + fmt(mean) + ", max " +
               fmt(ratio_max),
           secs);
}

void criterion4() {
    Timer t;
    const auto cov = se_kernel_cov(64, 0.5);
    const auto space = gaussian_natural_distance(cov);
    const auto prof = k_profile(space, auto_delta_grid(space));
    PipelineParams pp;
    pp.u_max_hint = 4.0;
    const auto conj = pipeline_conjugate(PhiFunction::subgaussian(), pp);
    const std::vector<double> C_grid = {0.1, 0.25, 0.5, 1.0, 2.0};
    const std::vector<double> u_grid = {2.5, 3.0, 3.5, 4.0};

    const auto sups = gaussian_suprema(cov, 1000000, 108);
    const auto tail = empirical_tail(sups, u_grid);

    bool pass = true;
    std::size_t checked = 0;
    std::string detail;
    for (std::size_t i = 0; i < u_grid.size(); ++i) {
        const auto rep = optimize_C(space, prof, conj, u_grid[i], C_grid);
        const bool inside = !rep.below_u0;
        const bool dom = rep.bound >= tail.ci_hi[i];
        if (inside) {
            ++checked;
            pass = pass && dom;
        }
        detail += (i ? " " : "") + std::string("u=") + fmt(u_grid[i]) + ":" +
                  (inside ? (dom ? "ok" : "VIOLATED") : "below_u0");
    }
    pass = pass && checked > 0;
    const double secs = t.seconds();
    pass = pass && secs < 900.0;
    report("criterion 4 (gaussian dominance, 64 points, 1e6 replicates)", pass, detail, secs);
}

void criterion5() {
    Timer t;
    const std::size_t n_max = 4096;
    const auto space = example_a_space(n_max, true);
    const auto prof = k_profile(space, auto_delta_grid(space));
    PipelineParams pp;
    pp.u_max_hint = 5.0;
    const auto conj = pipeline_conjugate(PhiFunction::subgaussian(), pp);
    const std::vector<double> C_grid = {0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0};
    const std::vector<double> u_grid = {3.0, 3.5, 4.0, 4.5, 5.0};

    const auto sups = example_a_suprema(n_max, 10000000, 2025);
    const auto tail = empirical_tail(sups, u_grid);

    std::vector<TailBoundReport> best;
    for (double u : u_grid) best.push_back(optimize_C(space, prof, conj, u, C_grid));

    // (a) dominance; the profile floor sits above half its supremum on this
    // truncated space, so no onset exists and the formula rows carry the
    // validity flag; dominance is checked at every grid threshold, which is
    // stricter than the vacuous onset-filtered set.
    {
        bool dom = true;
        std::string d = best.front().no_onset ? "no finite onset (flagged); " : "";
        for (std::size_t i = 0; i < u_grid.size(); ++i) {
            const bool ok = best[i].bound >= tail.ci_hi[i];
            dom = dom && ok;
            d += (i ? " " : "") + std::string("u=") + fmt(u_grid[i]) + ":" +
                 (ok ? "ok" : "VIOLATED");
        }
        report("criterion 5a (benchmark-sequence dominance, 1e7 replicates)", dom, d,
               t.seconds());
    }

    // (b) exponent-slope band at u = 5. Unreachable as stated: the bound
    // carries the prefactor (e^C+1) N >= 2, so -log(bound) <= u^2/2 - log 2
    // and the ratio cannot exceed 1 - 2 log 2 / u^2 = 0.9446 at u = 5.
    {
        const auto& r5 = best.back();
        const double ratio = -std::log(r5.bound) / (0.5 * 25.0);
        const bool ok = ratio >= 0.95 && ratio <= 1.5;
        report("criterion 5b (tightness band at u=5)", ok,
               "-log(bound)/(u^2/2)=" + fmt(ratio) + " with optimal C=" + fmt(r5.C) + ", N=" +
                   std::to_string(r5.covering_count) +
                   "; band [0.95,1.5] is above the prefactor ceiling 0.9446",
               t.seconds());
    }

    // (c) empirical exponent wherever at least 100 exceedances were seen
    {
        bool ok = true;
        std::string d;
        for (std::size_t i = 0; i < u_grid.size(); ++i) {
            if (tail.count[i] < 100) continue;
            const double ratio =
                -std::log(tail.p_hat[i]) / (0.5 * u_grid[i] * u_grid[i]);
            ok = ok && ratio >= 0.9;
            d += (d.empty() ? "" : " ") + std::string("u=") + fmt(u_grid[i]) + ":" + fmt(ratio);
        }
        const double secs = t.seconds();
        report("criterion 5c (empirical exponent floor)", ok && secs < 1800.0, d, secs);
    }
}

void criterion6() {
    Timer t;
    // (a) the pairwise identity, exactly, over 1e3 trajectories to n = 1e4
    {
        bool ok = true;
        for (std::uint64_t rep = 0; rep < 1000 && ok; ++rep) {
            walk_poly_martingale_exact(2, 10000, 606, rep,
                                       [&](std::uint64_t n, std::int64_t s, std::int64_t v) {
                                           if (2 * v != s * s - static_cast<std::int64_t>(n))
                                               ok = false;
                                       });
        }
        report("criterion 6a (pairwise identity, exact)", ok,
               "2 xi_2(n) == S_n^2 - n over 1e3 trajectories, n <= 1e4", t.seconds());
    }
    // (b) variance at n = 20
    {
        Timer tb;
        const auto m = sample_poly_martingale(2, 20, 100000, 99);
        double mean = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) mean += m.at(r, 19);
        mean /= static_cast<double>(m.rows);
        double var = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r)
            var += (m.at(r, 19) - mean) * (m.at(r, 19) - mean);
        var /= static_cast<double>(m.rows);
        const bool ok = std::fabs(var - 190.0) <= 0.05 * 190.0;
        report("criterion 6b (variance of xi_2(20))", ok, "var=" + fmt(var) + " target 190",
               tb.seconds());
    }
    // (c) pooled normalized-supremum statistic over the full horizon
    {
        Timer tc;
        const auto st = limsup_statistic(2, 1u << 20, 200, 31337);
        const double med = quantile(st, 0.5);
        const bool ok = med >= 0.5 && med <= 1.1;
        report("criterion 6c (iterated-logarithm statistic, d=2)", ok,
               "median=" + fmt(med) + " vs band [0.5,1.1] around target 1; early-index spikes " +
                   "(|stat| at n=2,3 is 1.05, 1.71 with probability 1/2, 1/4) dominate the " +
                   "all-n supremum",
               tc.seconds());
    }
    // (d) block bound finite and dominating at u in {2.5, 3}
    {
        Timer td;
        const auto model = poly_martingale_model(2, 0.5);
        const auto part = BlockPartition::geometric(2, 2, 1u << 16);
        const auto sups = poly_martingale_normalized_suprema(2, 2, 1u << 16, 100000, 515);
        const auto tail = empirical_tail(sups, {2.5, 3.0});
        bool ok = true;
        std::string d;
        for (std::size_t i = 0; i < 2; ++i) {
            const auto b = martingale_block_bound(model, part, tail.u_grid[i]);
            const bool fin = std::isfinite(b.total);
            const bool dom = b.total >= tail.ci_hi[i];
            ok = ok && fin && dom;
            d += (i ? " " : "") + std::string("u=") + fmt(tail.u_grid[i]) + ": bound=" +
                 fmt(b.total) + " tail_hi=" + fmt(tail.ci_hi[i]) + (dom ? "" : " VIOLATED");
        }
        report("criterion 6d (martingale block bound)", ok, d, td.seconds());
    }
}

void criterion7() {
    Timer t;
    const auto cov = se_kernel_cov(64, 0.5);
    const auto paths = sample_gaussian(cov, 5000, 777);
    const auto phi = PhiFunction::subgaussian();
    PipelineParams pp;
    pp.u_max_hint = 4.0;

    const auto base = make_pipeline_from_samples(paths, phi, pp);
    bool pass = true;
    std::string detail;
    for (std::size_t n : {std::size_t{1}, std::size_t{10}, std::size_t{100}}) {
        for (double u : {3.0, 4.0}) {
            for (double C : {0.5, 1.0}) {
                const auto r1 = theorem1_bound(base.space, base.profile, base.conj, C, u);
                const auto r2 = theorem2_bound(paths, phi, FixedN{n}, C, u, pp);
                const bool same = r1.bound == r2.bound &&
                                  r1.covering_count == r2.covering_count &&
                                  r1.delta_used == r2.delta_used &&
                                  r1.conj_value == r2.conj_value &&
                                  r1.below_u0 == r2.below_u0 &&
                                  r1.k_inverse_capped == r2.k_inverse_capped;
                pass = pass && same;
            }
        }
        detail += (detail.empty() ? "n=" : ",") + std::to_string(n);
    }
    report("criterion 7 (normalized-sum consistency, bit-for-bit)", pass,
           detail + " at u in {3,4}, C in {0.5,1}", t.seconds());
}

void criterion8() {
    Timer t;
    bool all = true;

    // norm homogeneity
    {
        Timer ts;
        std::vector<double> s;
        for (std::size_t r = 0; r < 20000; ++r) {
            CounterRng rng(42, r);
            s.push_back(rng.next_normal_pair().first);
        }
        std::vector<double> doubled(s);
        for (auto& x : doubled) x *= 2.0;
        const PsiMomentScale psi(PhiFunction::subgaussian());
        const bool g_ok = gpsi_norm(doubled, psi, 32.0).value ==
                          2.0 * gpsi_norm(s, psi, 32.0).value;
        std::vector<double> grid;
        for (int i = -16; i <= 16; ++i)
            if (i) grid.push_back(1.2 * i / 16.0);
        std::vector<double> gridh(grid);
        for (auto& l : gridh) l *= 2.0;
        const double b1 = bphi_norm_mgf(s, PhiFunction::subgaussian(), grid).value;
        std::vector<double> half(s);
        for (auto& x : half) x *= 0.5;
        const double b2 = bphi_norm_mgf(half, PhiFunction::subgaussian(), gridh).value;
        const bool b_ok = std::fabs(b2 - 0.5 * b1) <= 1e-6 * (1.0 + b2);
        const bool ok = g_ok && b_ok;
        all = all && ok;
        report("criterion 8.1 (norm homogeneity)", ok, g_ok ? "moment and mgf-fit scales" : "",
               ts.seconds());
    }

    // triangle repair on estimated distances
    {
        Timer ts;
        Matrix paths(20000, 4);
        for (std::size_t r = 0; r < paths.rows; ++r) {
            CounterRng rng(87, r);
            const auto [a, b] = rng.next_normal_pair();
            const auto [c, d] = rng.next_normal_pair();
            paths.at(r, 0) = a;
            paths.at(r, 1) = 0.6 * a + 0.8 * b;
            paths.at(r, 2) = c;
            paths.at(r, 3) = 0.5 * (a + c) + d;
        }
        bool ok = true;
        try {
            const auto sp = natural_distance(paths, PhiFunction::subgaussian());
            sp.validate(1e-9);
        } catch (const std::exception&) {
            ok = false;
        }
        all = all && ok;
        report("criterion 8.2 (triangle repair)", ok, "estimated matrix validates", ts.seconds());
    }

    // projection optimality
    {
        Timer ts;
        bool ok = true;
        const auto s = testing::random_points_space(10, 5150);
        for (auto strat : {ChainStrategy::DyadicNets, ChainStrategy::GreedyRefine}) {
            for (std::uint32_t t0 = 0; t0 < s.size(); ++t0) {
                const auto chain = build_chain(s, t0, 0.9, strat);
                for (std::size_t m = 0; m < chain.levels.size(); ++m)
                    for (std::size_t k = 0; k < chain.ball.size(); ++k) {
                        const double got = s.dist(chain.ball[k], chain.proj[m][k]);
                        for (std::uint32_t cand : chain.levels[m])
                            if (got > s.dist(chain.ball[k], cand)) ok = false;
                    }
            }
        }
        all = all && ok;
        report("criterion 8.3 (projection optimality)", ok, "exact argmin at every level",
               ts.seconds());
    }

    // chain-sum monotonicity in u
    {
        Timer ts;
        const auto s = testing::random_points_space(8, 77);
        const auto chain = build_chain(s, 0, 0.9, ChainStrategy::DyadicNets);
        const auto gamma = default_gamma(16, 0.75);
        const auto conj = pipeline_conjugate(PhiFunction::subgaussian(), {});
        bool ok = true;
        double prev = std::numeric_limits<double>::infinity();
        for (double u = 0.25; u <= 12.0; u += 0.25) {
            const double X = chain_sum_X(chain, gamma, conj, u);
            if (X >= prev) ok = false;
            prev = X;
        }
        all = all && ok;
        report("criterion 8.4 (chain sum decreasing in u)", ok, "", ts.seconds());
    }

    // report internal consistency
    {
        Timer ts;
        const auto space = gaussian_natural_distance(se_kernel_cov(64, 0.5));
        const auto prof = k_profile(space, auto_delta_grid(space));
        const auto conj = pipeline_conjugate(PhiFunction::subgaussian(), {});
        bool ok = true;
        for (double C : {0.1, 0.5, 1.0})
            for (double u : {2.5, 3.0, 4.0}) {
                const auto r = theorem1_bound(space, prof, conj, C, u);
                if (r.bound != assemble_bound(r.C, r.covering_count, r.conj_value)) ok = false;
                if (r.two_sided() != 2.0 * r.bound) ok = false;
            }
        all = all && ok;
        report("criterion 8.5 (report internal consistency)", ok, "bit-exact recomputation",
               ts.seconds());
    }

    // the literal constant-splitting inequality phi*(alpha u) >= phi*(u) - C
    // at every report with u at or above its onset
    {
        Timer ts;
        bool ok = true;
        std::string worst;
        const auto run_fixture = [&](const FiniteMetricSpace& space,
                                     const std::vector<double>& Cs,
                                     const std::vector<double>& us) {
            const auto prof = k_profile(space, auto_delta_grid(space));
            PipelineParams pp;
            pp.u_max_hint = us.back();
            const auto conj = pipeline_conjugate(PhiFunction::subgaussian(), pp);
            for (double C : Cs) {
                const auto onset = u0_of_C(prof, conj, C);
                for (double u : us) {
                    const auto r = theorem1_bound(space, prof, conj, C, u, onset);
                    if (r.below_u0) continue;
                    const double alpha_u = std::max(0.0, (1.0 - C * r.delta_used) * u);
                    const double lhs = conj.value(alpha_u);
                    const double rhs = r.conj_value - C;
                    if (lhs < rhs - 1e-9) {
                        ok = false;
                        if (worst.empty())
                            worst = "counterexample C=" + fmt(C) + " u=" + fmt(u) + " delta=" +
                                    fmt(r.delta_used) + ": phi*(au)=" + fmt(lhs) +
                                    " < phi*(u)-C=" + fmt(rhs);
                    }
                }
            }
        };
        run_fixture(gaussian_natural_distance(se_kernel_cov(64, 0.5)),
                    {0.1, 0.25, 0.5, 1.0, 2.0}, {2.5, 3.0, 3.5, 4.0});
        {
            std::vector<std::string> lab;
            std::vector<double> d(32 * 32, 0.0);
            for (std::size_t i = 0; i < 32; ++i) {
                lab.push_back("p" + std::to_string(i));
                for (std::size_t j = 0; j < 32; ++j)
                    d[i * 32 + j] =
                        std::fabs(static_cast<double>(i) - static_cast<double>(j)) / 32.0;
            }
            run_fixture(FiniteMetricSpace(lab, d), {0.5, 1.0, 2.0}, {6.0, 8.0, 10.0, 12.0});
        }
        all = all && ok;
        report("criterion 8.6 (constant-splitting inequality, literal)", ok,
               ok ? "holds on both report fixtures" : worst, ts.seconds());
    }

    const double secs = t.seconds();
    report("criterion 8 (property suites)", all && secs < 300.0,
           "all sub-suites green under the runtime cap", secs);
}

}  // namespace

int main() {
    Timer total;
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    std::printf("%d criterion failure(s), %.1fs total\n", g_failures, total.seconds());
    return g_failures > 0 ? 1 : 0;
}
