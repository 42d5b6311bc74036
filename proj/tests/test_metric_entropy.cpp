#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <vector>

#include "chainbound/metric_space.hpp"
#include "chainbound/rng.hpp"

using namespace chainbound;

namespace {

FiniteMetricSpace line_space(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    std::vector<std::string> labels;
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        labels.push_back("p" + std::to_string(i));
        for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::fabs(xs[i] - xs[j]);
    }
    return FiniteMetricSpace(labels, d);
}

FiniteMetricSpace random_space(std::size_t n, std::uint64_t seed) {
    CounterRng rng(seed, 0);
    std::vector<std::array<double, 3>> pts(n);
    for (auto& p : pts) {
        p[0] = rng.next_unit_open();
        p[1] = rng.next_unit_open();
        p[2] = rng.next_unit_open();
    }
    std::vector<std::string> labels;
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        labels.push_back("p" + std::to_string(i));
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
            d[i * n + j] = std::sqrt(s);
        }
    }
    return FiniteMetricSpace(labels, d);
}

// Independent oracle: scan every center subset (spaces of <= 16 points).
std::size_t exhaustive_cover_count(const FiniteMetricSpace& s,
                                   const std::vector<std::uint32_t>& subset, double eps) {
    const std::size_t k = subset.size();
    std::vector<std::uint32_t> masks(k, 0);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t p = 0; p < k; ++p)
            if (s.dist(subset[c], subset[p]) <= eps) masks[c] |= (1u << p);
    const std::uint32_t full = (k == 32) ? ~0u : ((1u << k) - 1);
    std::size_t best = k;
    for (std::uint32_t pick = 1; pick < (1u << k); ++pick) {
        std::uint32_t covered = 0;
        for (std::size_t c = 0; c < k; ++c)
            if ((pick >> c) & 1u) covered |= masks[c];
        if (covered == full)
            best = std::min<std::size_t>(best, __builtin_popcount(pick));
    }
    return best;
}

}  // namespace

TEST_CASE("covering numbers on a four-point line") {
    const auto s = line_space({0.0, 1.0, 2.0, 3.0});
    const auto subset = all_indices(s);

    const auto [exact, net] = covering_number(s, subset, 1.0, CoverMode::Exact);
    CHECK(exact == 2);
    CHECK(exact == exhaustive_cover_count(s, subset, 1.0));
    CHECK(net.valid(s));

    // radius at least the diameter: one ball suffices
    CHECK(covering_number(s, subset, 3.0, CoverMode::Exact).first == 1);
    // radius below the smallest gap: every point is its own ball
    CHECK(covering_number(s, subset, 0.5, CoverMode::Exact).first == 4);

    CHECK(entropy(s, subset, 1.0) == Catch::Approx(std::log(2.0)));
    CHECK(entropy(s, {2}, 0.3) == 0.0);

    CHECK_THROWS_AS(covering_number(s, {}, 1.0, CoverMode::Greedy), DomainError);
    CHECK_THROWS_AS(covering_number(s, subset, 0.0, CoverMode::Greedy), DomainError);
    CHECK_THROWS_AS(covering_number(random_space(24, 5), all_indices(random_space(24, 5)), 0.2,
                                    CoverMode::Exact),
                    SizeLimitExceeded);
}

TEST_CASE("greedy against exact on random spaces") {
    const double lnk = std::log(12.0);
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const auto s = random_space(12, seed);
        const auto subset = all_indices(s);
        for (double eps : {0.2, 0.35, 0.6}) {
            const auto [exact, enet] = covering_number(s, subset, eps, CoverMode::Exact);
            const auto [greedy, gnet] = covering_number(s, subset, eps, CoverMode::Greedy);
            REQUIRE(exact == exhaustive_cover_count(s, subset, eps));
            CHECK(greedy >= exact);
            CHECK(static_cast<double>(greedy) <= exact * (1.0 + lnk) + 1e-9);
            CHECK(enet.valid(s));
            CHECK(gnet.valid(s));
        }
    }
}

TEST_CASE("covering number is nonincreasing in the radius") {
    const auto s = random_space(14, 123);
    const auto subset = all_indices(s);
    std::size_t prev = subset.size() + 1;
    for (double eps = 0.05; eps <= 1.6; eps += 0.05) {
        const std::size_t c = covering_number(s, subset, eps, CoverMode::Greedy).first;
        CHECK(c <= prev);
        prev = std::min(prev, c);
    }
    double eprev = std::numeric_limits<double>::infinity();
    for (double eps = 0.1; eps <= 1.6; eps += 0.1) {
        const double h = entropy(s, subset, eps);
        CHECK(h <= eprev + 1e-12);
        eprev = h;
    }
}

TEST_CASE("entropy integral: constant integrand and monotone growth") {
    const auto phi = PhiFunction::subgaussian();
    const auto two = line_space({0.0, 1.0});
    std::vector<double> grid;  // decreasing, as the integral expects
    for (int i = 0; i <= 200; ++i) grid.push_back(0.999 - (0.999 - 0.002) * i / 200.0);
    const auto res = entropy_integral(two, phi, grid);
    const double c = std::sqrt(2.0 * std::log(2.0));
    CHECK(res.value == Catch::Approx(c * (0.999 - 0.002)).epsilon(1e-9));
    CHECK_FALSE(res.divergent_trend);

    // bounded entropy: integral below (phi*)^{-1}(log |T|) times the range
    const auto s = random_space(14, 9);
    const auto r2 = entropy_integral(s, phi, grid);
    CHECK(r2.value <= inverse_conjugate(phi, std::log(14.0)) * 1.0 + 1e-9);
    CHECK_FALSE(r2.divergent_trend);

    // scaling all distances up cannot shrink the integral
    auto scaled = s;
    for (auto& v : scaled.mutable_dense()) v *= 1.1;
    const auto r3 = entropy_integral(scaled, phi, grid);
    CHECK(r3.value >= r2.value - 1e-12);

    CHECK_THROWS_AS(entropy_integral(two, phi, std::vector<double>{0.5, 0.7}), DomainError);
    CHECK_THROWS_AS(entropy_integral(two, phi, std::vector<double>{1.5, 0.7}), DomainError);
}

TEST_CASE("natural distance of a gaussian field with identity covariance") {
    const std::size_t reps = 100000;
    Matrix paths(reps, 3);
    for (std::size_t r = 0; r < reps; ++r) {
        CounterRng rng(777, r);
        auto [a, b] = rng.next_normal_pair();
        auto [c, d_] = rng.next_normal_pair();
        paths.at(r, 0) = a;
        paths.at(r, 1) = b;
        paths.at(r, 2) = c;
        (void)d_;
    }
    const auto space = natural_distance(paths, PhiFunction::subgaussian());
    const double want = std::sqrt(2.0);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j)
                CHECK(space.dist(i, j) == 0.0);
            else
                CHECK(std::fabs(space.dist(i, j) - want) <= 0.05 * want);
        }
    }
    space.validate();

    const auto analytic = gaussian_natural_distance([] {
        Matrix cov(3, 3);
        cov.at(0, 0) = cov.at(1, 1) = cov.at(2, 2) = 1.0;
        return cov;
    }());
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::fabs(space.dist(i, j) - analytic.dist(i, j)) <= 0.05 * want);
}

TEST_CASE("natural distance: duplicates, relabeling, scaling") {
    const std::size_t reps = 20000;
    Matrix paths(reps, 3);
    for (std::size_t r = 0; r < reps; ++r) {
        CounterRng rng(88, r);
        auto [a, b] = rng.next_normal_pair();
        paths.at(r, 0) = a;
        paths.at(r, 1) = b;
        paths.at(r, 2) = a;  // duplicated coordinate
    }
    const auto s = natural_distance(paths, PhiFunction::subgaussian());
    CHECK(s.dist(0, 2) == 0.0);
    CHECK(s.dist(0, 1) > 0.5);

    // permuting the columns permutes the matrix
    Matrix perm(reps, 3);
    for (std::size_t r = 0; r < reps; ++r) {
        perm.at(r, 0) = paths.at(r, 1);
        perm.at(r, 1) = paths.at(r, 2);
        perm.at(r, 2) = paths.at(r, 0);
    }
    const auto sp = natural_distance(perm, PhiFunction::subgaussian());
    const std::size_t map[3] = {1, 2, 0};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(sp.dist(i, j) == Catch::Approx(s.dist(map[i], map[j])).margin(1e-12));

    // scaling the paths scales the distances
    Matrix scaled(reps, 3);
    for (std::size_t k = 0; k < paths.a.size(); ++k) scaled.a[k] = 3.0 * paths.a[k];
    const auto ss = natural_distance(scaled, PhiFunction::subgaussian());
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (i != j && s.dist(i, j) > 0.0)
                CHECK(std::fabs(ss.dist(i, j) - 3.0 * s.dist(i, j)) <= 0.02 * 3.0 * s.dist(i, j));
}

TEST_CASE("space validation and serialization") {
    std::vector<double> bad = {0.0, 1.0, 3.0,  //
                               1.0, 0.0, 1.0,  //
                               3.0, 1.0, 0.0};
    const FiniteMetricSpace s({"a", "b", "c"}, bad);
    CHECK_THROWS_AS(s.validate(), TriangleViolation);

    const auto good = random_space(9, 44);
    good.validate();

    const std::string path = "/tmp/chainbound_space_test.csv";
    good.to_csv(path);
    const auto back = FiniteMetricSpace::from_csv(path);
    REQUIRE(back.size() == good.size());
    for (std::size_t i = 0; i < good.size(); ++i)
        for (std::size_t j = 0; j < good.size(); ++j)
            CHECK(back.dist(i, j) == good.dist(i, j));
    CHECK(back.labels() == good.labels());

    const auto j = good.to_json();
    const auto fromj = FiniteMetricSpace::from_json(j);
    for (std::size_t i = 0; i < good.size(); ++i)
        for (std::size_t jx = 0; jx < good.size(); ++jx)
            CHECK(fromj.dist(i, jx) == good.dist(i, jx));

    // lower-triangular file form
    {
        std::ofstream out("/tmp/chainbound_space_lt.csv");
        out << "a,b,c\n0\n1,0\n2,1,0\n";
    }
    const auto lt = FiniteMetricSpace::from_csv("/tmp/chainbound_space_lt.csv");
    CHECK(lt.dist(0, 2) == 2.0);
    CHECK(lt.dist(2, 1) == 1.0);

    std::remove(path.c_str());
    std::remove("/tmp/chainbound_space_lt.csv");
}

TEST_CASE("zero-class representatives") {
    std::vector<double> d = {0.0, 0.0, 1.0,  //
                             0.0, 0.0, 1.0,  //
                             1.0, 1.0, 0.0};
    const FiniteMetricSpace s({"a", "b", "c"}, d);
    const auto rep = zero_class_reps(s);
    CHECK(rep[0] == 0);
    CHECK(rep[1] == 0);
    CHECK(rep[2] == 2);
}
