#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "qonet/error.hpp"
#include "qonet/multiindex.hpp"

using namespace qonet;

namespace {

// All nu >= 0 in dimension d with |nu|_1 <= radius.
std::vector<std::vector<int>> simplex_points(int d, int radius) {
    std::vector<std::vector<int>> out;
    std::vector<int> nu(static_cast<std::size_t>(d), 0);
    std::function<void(int, int)> rec = [&](int i, int left) {
        if (i == d) {
            out.push_back(nu);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            nu[static_cast<std::size_t>(i)] = v;
            rec(i + 1, left - v);
        }
        nu[static_cast<std::size_t>(i)] = 0;
    };
    rec(0, radius);
    return out;
}

// Sorted by (b rounded to 1e-10, lexicographic), computed with an independent b.
std::vector<std::vector<int>> brute_force_order(int d, int radius, const std::function<double(const std::vector<int>&)>& b) {
    auto pts = simplex_points(d, radius);
    std::vector<std::pair<long long, std::vector<int>>> keyed;
    for (auto& p : pts) keyed.emplace_back(std::llround(b(p) * 1e10), p);
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::vector<int>> out;
    for (auto& [k, p] : keyed) out.push_back(p);
    return out;
}

std::vector<std::vector<int>> as_vectors(const QuasiOptimalIndexSet& s) {
    std::vector<std::vector<int>> out;
    for (const auto& nu : s.indices()) out.emplace_back(nu.degrees().begin(), nu.degrees().end());
    return out;
}

std::set<std::vector<int>> as_set(const QuasiOptimalIndexSet& s) {
    auto v = as_vectors(s);
    return {v.begin(), v.end()};
}

}  // namespace

TEST(MultiIndex, Basics) {
    MultiIndex nu{3, 0, 2};
    EXPECT_EQ(nu.dim(), 3);
    EXPECT_EQ(nu.l1(), 5);
    EXPECT_FALSE(nu.is_zero());
    EXPECT_TRUE(MultiIndex::zero(4).is_zero());
    EXPECT_EQ(nu.incremented(1), (MultiIndex{3, 1, 2}));
    EXPECT_EQ(to_string(nu), "(3,0,2)");
    EXPECT_LT((MultiIndex{0, 5}), (MultiIndex{1, 0}));
    EXPECT_THROW(MultiIndex({1, -1}), Error);
}

TEST(BoundFunction, ExampleValues) {
    const auto taylor = BoundFunction::taylor({2.0, 3.0});
    EXPECT_NEAR(taylor(MultiIndex{1, 1}), 1.791759469228055, 1e-12);
    EXPECT_DOUBLE_EQ(BoundFunction::isotropic(2)(MultiIndex{3, 4}), 7.0);
    for (const auto& b : {BoundFunction::isotropic(3), BoundFunction::taylor({2, 3, 5}),
                          BoundFunction::legendre({2, 3, 1.5}),
                          BoundFunction::legendre({2, 3, 4}, LegendrePrefactor::Literal)}) {
        EXPECT_EQ(b(MultiIndex::zero(3)), 0.0) << b.id();
    }
}

TEST(BoundFunction, Errors) {
    EXPECT_THROW(BoundFunction::taylor({2.0, 1.0}), Error);
    EXPECT_THROW(BoundFunction::legendre({0.5}), Error);
    try {
        BoundFunction::taylor({2.0, 3.0})(MultiIndex{1, 2, 3});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Dimension);
    }
    EXPECT_THROW(BoundFunction::custom(1, [](std::span<const int> n) { return 1.0 + n[0]; }, {1, 1, 0, 0}, true),
                 Error);
}

TEST(BoundFunction, LegendreEnvelopeIsMonotoneAndMatchesRawTail) {
    // Envelope oracle: G(n) = min over m >= n of the raw term, scanning far enough past n.
    for (double rho : {1.2, 2.0, 3.0, 7.0}) {
        const auto b = BoundFunction::legendre({rho});
        auto raw = [&](int n) { return n * std::log(rho) - std::log(2.0 * n + 1.0); };
        auto env = [&](int n) {
            double g = raw(n);
            for (int m = n; m < n + 2000; ++m) g = std::min(g, raw(m));
            return g;
        };
        for (int n = 0; n < 80; ++n) {
            EXPECT_NEAR(b(MultiIndex{n}), env(n) - env(0), 1e-12) << "rho " << rho << " n " << n;
            EXPECT_LE(b(MultiIndex{n}), b(MultiIndex{n + 1}) + 1e-15);
        }
        EXPECT_NEAR(b.log_c(), -env(0), 1e-12);
    }
}

TEST(BoundFunction, AssumptionChecksAndGrowthConstants) {
    for (const auto& b : {BoundFunction::isotropic(2), BoundFunction::taylor({2, 3}), BoundFunction::legendre({2, 3}),
                          BoundFunction::legendre({1.5, 2, 4})}) {
        EXPECT_TRUE(check_bound_assumptions(b).ok()) << b.id();
        const auto& g = b.growth();
        for (const auto& p : simplex_points(b.dim(), 30)) {
            const double l1 = std::accumulate(p.begin(), p.end(), 0.0);
            const double v = b(std::span<const int>(p));
            EXPECT_GE(v, g.c_low * l1 - g.offset_low - 1e-9);
            EXPECT_LE(v, g.c_high * l1 + g.offset_high + 1e-9);
        }
    }
}

TEST(BoundFunction, JsonRoundTrip) {
    for (const auto& b : {BoundFunction::isotropic(3), BoundFunction::taylor({2, 3}), BoundFunction::legendre({2, 3}),
                          BoundFunction::legendre({2.5}, LegendrePrefactor::Literal)}) {
        const auto back = BoundFunction::from_json(b.to_json());
        EXPECT_EQ(back.id(), b.id());
        EXPECT_EQ(back(MultiIndex(std::vector<int>(static_cast<std::size_t>(b.dim()), 3))),
                  b(MultiIndex(std::vector<int>(static_cast<std::size_t>(b.dim()), 3))));
    }
    try {
        BoundFunction::from_json({{"kind", "taylor"}});
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.location(), "/rho");
        EXPECT_NE(std::string(e.what()).find("rho"), std::string::npos);
    }
}

TEST(Enumerate, KnownValues) {
    const auto simplex = enumerate_quasi_optimal(BoundFunction::isotropic(2), 6);
    EXPECT_EQ(as_set(simplex), (std::set<std::vector<int>>{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}}));
    EXPECT_EQ(compute_J(simplex), 2.0);
    EXPECT_EQ(simplex.threshold_J(), 2.0);

    for (const auto& b : {BoundFunction::isotropic(3), BoundFunction::taylor({2, 3}), BoundFunction::legendre({2})}) {
        const auto one = enumerate_quasi_optimal(b, 1);
        ASSERT_EQ(one.size(), 1u);
        EXPECT_TRUE(one[0].is_zero());
    }

    const auto tie = enumerate_quasi_optimal(BoundFunction::taylor({2, 8}), 4);
    EXPECT_EQ(as_vectors(tie), (std::vector<std::vector<int>>{{0, 0}, {1, 0}, {2, 0}, {0, 1}}));
    // The exact tie ln 8 = 3 ln 2 resolves lexicographically at M = 5.
    EXPECT_EQ(enumerate_quasi_optimal(BoundFunction::taylor({2, 8}), 5)[4], (MultiIndex{3, 0}));
}

TEST(Enumerate, MatchesBruteForceAndIsDownwardClosed) {
    struct Case {
        BoundFunction b;
        std::function<double(const std::vector<int>&)> oracle;
    };
    auto taylor_oracle = [](std::vector<double> rho) {
        return [rho](const std::vector<int>& nu) {
            double s = 0.0;
            for (std::size_t i = 0; i < nu.size(); ++i) s += nu[i] * std::log(rho[i]);
            return s;
        };
    };
    std::vector<Case> cases;
    cases.push_back({BoundFunction::isotropic(2), [](const std::vector<int>& nu) {
                         return static_cast<double>(std::accumulate(nu.begin(), nu.end(), 0));
                     }});
    cases.push_back({BoundFunction::taylor({2, 3}), taylor_oracle({2, 3})});
    cases.push_back({BoundFunction::taylor({1.7, 2.2, 4.0}), taylor_oracle({1.7, 2.2, 4.0})});
    for (auto& c : cases) {
        const auto full = brute_force_order(c.b.dim(), 30, c.oracle);
        for (std::size_t M : {1u, 2u, 7u, 50u, 150u, 300u}) {
            const auto set = enumerate_quasi_optimal(c.b, M);
            ASSERT_EQ(set.size(), M);
            EXPECT_EQ(as_vectors(set), std::vector<std::vector<int>>(full.begin(), full.begin() + M))
                << c.b.id() << " M=" << M;
            for (const auto& nu : set.indices()) {
                for (int i = 0; i < nu.dim(); ++i) {
                    if (nu[i] == 0) continue;
                    auto lower = std::vector<int>(nu.degrees().begin(), nu.degrees().end());
                    --lower[static_cast<std::size_t>(i)];
                    EXPECT_TRUE(set.contains(MultiIndex(lower))) << to_string(nu);
                }
            }
        }
    }
}

TEST(Enumerate, PrefixConsistencyAndJson) {
    const auto b = BoundFunction::legendre({2, 3});
    const auto big = enumerate_quasi_optimal(b, 120);
    for (std::size_t M : {1u, 10u, 57u, 119u}) {
        EXPECT_EQ(as_vectors(big.prefix(M)), as_vectors(enumerate_quasi_optimal(b, M)));
    }
    const auto back = QuasiOptimalIndexSet::from_json(big.to_json(), b);
    EXPECT_EQ(as_vectors(back), as_vectors(big));
    EXPECT_EQ(back.threshold_J(), big.threshold_J());
    EXPECT_THROW(QuasiOptimalIndexSet::from_json({{"M", 1}}, b), ParseError);
}

TEST(Enumerate, NonMonotoneCustomBoundRefused) {
    const auto wiggly = BoundFunction::custom(
        1, [](std::span<const int> n) { return n[0] == 0 ? 0.0 : n[0] + std::sin(3.0 * n[0]); }, {0.1, 2.0, 1.0, 1.0},
        false, "wiggly");
    EXPECT_THROW(enumerate_quasi_optimal(wiggly, 5), Error);
}

TEST(Enumerate, CapIsEnforced) {
    try {
        enumerate_quasi_optimal(BoundFunction::isotropic(3), 5000, 1000);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Resource);
    }
}

TEST(Sublevel, CountsMatchClosedForm) {
    for (int tau : {0, 1, 5, 17}) {
        const auto n = for_each_in_sublevel(BoundFunction::isotropic(2), tau, [](std::span<const int>, double) {});
        EXPECT_EQ(n, static_cast<std::size_t>((tau + 1) * (tau + 2) / 2));
        const auto set = enumerate_sublevel(BoundFunction::isotropic(2), tau);
        EXPECT_EQ(set.size(), n);
    }
}

TEST(PVolume, KnownValues) {
    const auto iso = estimate_P_volume(BoundFunction::isotropic(2), 1000.0, false);
    EXPECT_EQ(iso.lattice_count, 501501u);
    EXPECT_NEAR(iso.value, 0.501501, 1e-12);
    const auto taylor = estimate_P_volume(BoundFunction::taylor({std::exp(1.0), std::exp(1.0)}), 1000.0, false);
    EXPECT_NEAR(taylor.value, 0.5015, 1e-4);

    const double factorial[] = {1.0, 1.0, 2.0, 6.0};
    for (int d = 1; d <= 3; ++d) {
        const auto b = BoundFunction::isotropic(d);
        const auto est = estimate_P_volume(b, default_tau(b));
        EXPECT_TRUE(est.extrapolated);
        EXPECT_NEAR(est.value, 1.0 / factorial[d], 0.01 / factorial[d]) << "d=" << d;
    }
    EXPECT_THROW(estimate_P_volume(BoundFunction::isotropic(2), 0.5), Error);
}

TEST(PVolume, FirstOrderConvergence) {
    // |V(2 tau) - V(tau)| <= C / tau with C fitted on the smallest tau.
    const auto b = BoundFunction::taylor({2, 3});
    std::vector<double> taus{16, 32, 64, 128};
    double C = 0.0;
    for (double tau : taus) {
        const double gap = std::abs(estimate_P_volume(b, 2 * tau, false).value - estimate_P_volume(b, tau, false).value);
        if (C == 0.0) C = gap * tau;
        EXPECT_LE(gap, 2.0 * C / tau) << "tau=" << tau;
    }
}

TEST(JInterval, Diagnostics) {
    const auto small = enumerate_quasi_optimal(BoundFunction::isotropic(2), 6);
    const auto diag = j_interval_diagnostic(small, 0.5, 0.5);
    EXPECT_EQ(diag.J, 2.0);
    EXPECT_NEAR(diag.lower, std::sqrt(8.0), 1e-12);
    EXPECT_NEAR(diag.upper, std::sqrt(24.0), 1e-12);
    EXPECT_EQ(diag.status, JIntervalStatus::BelowAsymptoticRegime);
    EXPECT_TRUE(diag.pvol_at_most_one);

    const auto level20 = enumerate_quasi_optimal(BoundFunction::isotropic(2), 231);
    const auto inside = j_interval_diagnostic(level20, 0.5, 0.5);
    EXPECT_EQ(inside.J, 20.0);
    EXPECT_NEAR(inside.lower, std::sqrt(231.0 / 0.75), 1e-12);
    EXPECT_NEAR(inside.upper, std::sqrt(462.0 / 0.5), 1e-12);
    EXPECT_EQ(inside.status, JIntervalStatus::Inside);

    for (int J = 10; J <= 25; ++J) {
        const auto set = enumerate_quasi_optimal(BoundFunction::isotropic(2), static_cast<std::size_t>((J + 1) * (J + 2) / 2));
        EXPECT_EQ(j_interval_diagnostic(set, 0.5, 0.5).status, JIntervalStatus::Inside) << "J=" << J;
    }
    EXPECT_THROW(compute_J(enumerate_quasi_optimal(BoundFunction::isotropic(1), 1).prefix(0)), Error);
}

TEST(TailSum, ClosedForms) {
    const auto b1 = BoundFunction::isotropic(1);
    const auto set3 = enumerate_quasi_optimal(b1, 3);
    const auto t = tail_sum(b1, set3, 40.0);
    const double exact = std::exp(-3.0) / (1.0 - std::exp(-1.0));
    EXPECT_NEAR(t.partial, exact - std::exp(-41.0) / (1.0 - std::exp(-1.0)), 1e-15);
    EXPECT_LE(t.partial, exact);
    EXPECT_GE(t.upper(), exact);
    EXPECT_NEAR(t.upper(), exact, 1e-12);
    EXPECT_NEAR(exact, 0.0787620, 1e-7);

    const auto b2 = BoundFunction::isotropic(2);
    const auto set6 = enumerate_quasi_optimal(b2, 6);
    const auto t2 = tail_sum(b2, set6, 30.0);
    double brute = 0.0;  // sum_{k>=3} (k+1) e^{-k} by direct series
    for (int k = 3; k < 400; ++k) brute += (k + 1) * std::exp(-static_cast<double>(k));
    EXPECT_NEAR(t2.upper(), brute, 1e-9);
    EXPECT_LE(t2.partial, brute);
    EXPECT_NEAR(brute, 0.360886, 1e-6);

    const auto all = enumerate_sublevel(b1, 12.0);
    EXPECT_EQ(tail_sum(b1, all, 12.0).partial, 0.0);
    EXPECT_THROW(tail_sum(b1, set3, 1.0), Error);
}

TEST(TailSum, BracketsTailComputedWithDoubleCutoff) {
    for (const auto& b : {BoundFunction::taylor({2, 3}), BoundFunction::legendre({2, 3}), BoundFunction::isotropic(3)}) {
        const auto set = enumerate_quasi_optimal(b, 40);
        const double L = set.threshold_J() + 8.0;
        const auto at_L = tail_sum(b, set, L);
        const double truth = tail_sum(b, set, 2.0 * L).partial;
        EXPECT_LE(at_L.partial, truth * (1 + 1e-12)) << b.id();
        EXPECT_GE(at_L.upper(), truth * (1 - 1e-12)) << b.id();
    }
}

TEST(TailBound, ConstantAndRatio) {
    EXPECT_NEAR(tail_constant_Cu(0.5), (6.0 * std::exp(1.0) - 2.0) * std::exp(1.0) / (std::exp(1.0) - 1.0), 1e-12);
    EXPECT_NEAR(tail_constant_Cu(0.5), 22.6376, 1e-4);
    const auto b = BoundFunction::isotropic(1);
    const auto r = check_quasi_tail_bound(b, enumerate_quasi_optimal(b, 10), 1.0, 0.5);
    EXPECT_NEAR(r.tail_upper, std::exp(-10.0) / (1 - std::exp(-1.0)), 1e-12);
    EXPECT_NEAR(r.bound, tail_constant_Cu(0.5) * 10 * std::exp(-10.0 / 1.5), 1e-12);
    EXPECT_LT(r.ratio, 0.01);
    EXPECT_TRUE(r.passes);
    double prev = 1.0;
    for (std::size_t M = 10; M <= 100; M += 10) {
        const auto rm = check_quasi_tail_bound(b, enumerate_quasi_optimal(b, M), 1.0, 0.5);
        EXPECT_LE(rm.ratio, 1.0);
        EXPECT_LE(rm.ratio, prev);
        prev = rm.ratio;
    }
}
