// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qonet/multiindex.hpp"
#include "qonet/network.hpp"
#include "qonet/orthopoly.hpp"
#include "qonet/precision.hpp"
#include "qonet/synth.hpp"
#include "qonet/verify.hpp"

using namespace qonet;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool passed = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Outcome& o, double seconds, double budget) {
    const bool in_time = budget <= 0.0 || seconds <= budget;
    const bool ok = o.passed && in_time;
    if (!ok) ++failures;
    std::printf("[%s] %2d %s (%s; %.2f s", ok ? "PASS" : "FAIL", id, name, o.detail.c_str(), seconds);
    if (budget > 0.0) std::printf(" of %.0f s allowed", budget);
    std::printf(")\n");
    std::fflush(stdout);
}

template <typename F>
void criterion(int id, const char* name, double budget_seconds, F&& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    report(id, name, o, std::chrono::duration<double>(Clock::now() - t0).count(), budget_seconds);
}

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

// ---------------------------------------------------------------- criterion 1 oracle

using Point = std::vector<int>;
using BoundOracle = std::function<double(const Point&)>;

void simplex_points(int d, int radius, std::vector<Point>& out) {
    Point nu(static_cast<std::size_t>(d), 0);
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
}

long long key(double b) { return std::llround(b * 1e10); }

// Legendre term n ln rho - ln(2n + 1), replaced by its minimum over m >= n so b is monotone, shifted to 0 at n = 0.
double legendre_term(int n, double rho) {
    auto raw = [rho](int m) { return m * std::log(rho) - std::log(2.0 * m + 1.0); };
    auto envelope = [&](int k) {
        double best = raw(k);
        for (int m = k + 1; m < k + 400; ++m) best = std::min(best, raw(m));
        return best;
    };
    return envelope(n) - envelope(0);
}

struct BoundCase {
    std::string label;
    BoundFunction bound;
    BoundOracle oracle;
};

std::vector<double> rho_for(int d) {
    std::vector<double> r;
    for (int i = 0; i < d; ++i) r.push_back(i % 2 == 0 ? 2.0 : 3.0);
    return r;
}

std::vector<BoundCase> criterion1_cases() {
    std::vector<BoundCase> cases;
    for (int d = 1; d <= 3; ++d) {
        const auto rho = rho_for(d);
        cases.push_back({"isotropic d=" + std::to_string(d), BoundFunction::isotropic(d), [](const Point& nu) {
                             double s = 0.0;
                             for (int v : nu) s += v;
                             return s;
                         }});
        cases.push_back({"taylor d=" + std::to_string(d), BoundFunction::taylor(rho), [rho](const Point& nu) {
                             double s = 0.0;
                             for (std::size_t i = 0; i < nu.size(); ++i) s += nu[i] * std::log(rho[i]);
                             return s;
                         }});
        cases.push_back({"legendre d=" + std::to_string(d), BoundFunction::legendre(rho), [rho](const Point& nu) {
                             double s = 0.0;
                             for (std::size_t i = 0; i < nu.size(); ++i) s += legendre_term(nu[i], rho[i]);
                             return s;
                         }});
    }
    return cases;
}

Outcome criterion1() {
    constexpr std::size_t kMaxM = 200;
    std::ostringstream detail;
    std::size_t compared = 0;
    int widest = 0;
    for (const auto& c : criterion1_cases()) {
        const int d = c.bound.dim();
        // The brute-force domain {|nu|_1 <= R} starts at R = 40 and grows until it provably holds the first
        // 200 indices: every nu outside it dominates a point of the shell |nu|_1 = R + 1.
        int radius = 40;
        std::vector<std::pair<long long, Point>> sorted;
        while (true) {
            std::vector<Point> pts;
            simplex_points(d, radius, pts);
            sorted.clear();
            for (auto& p : pts) sorted.emplace_back(key(c.oracle(p)), p);
            std::sort(sorted.begin(), sorted.end());
            std::vector<Point> all_shell;
            std::vector<Point> inner;
            simplex_points(d, radius + 1, all_shell);
            long long shell_min = std::numeric_limits<long long>::max();
            for (const auto& p : all_shell) {
                int l1 = 0;
                for (int v : p) l1 += v;
                if (l1 == radius + 1) shell_min = std::min(shell_min, key(c.oracle(p)));
            }
            if (sorted.size() >= kMaxM && sorted[kMaxM - 1].first < shell_min) break;
            radius *= 2;
        }
        widest = std::max(widest, radius);
        for (std::size_t M = 1; M <= kMaxM; ++M) {
            const auto set = enumerate_quasi_optimal(c.bound, M);
            if (set.size() != M) return {false, c.label + " M=" + std::to_string(M) + ": wrong size"};
            for (std::size_t k = 0; k < M; ++k) {
                const auto& got = set[k].degrees();
                if (!std::equal(got.begin(), got.end(), sorted[k].second.begin(), sorted[k].second.end())) {
                    return {false, c.label + " M=" + std::to_string(M) + ": rank " + std::to_string(k) + " differs"};
                }
            }
            ++compared;
        }
    }
    detail << compared << " (b, d, M) cases identical; brute-force radius 40, widened to " << widest
           << " where 200 indices need it";
    return {true, detail.str()};
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion2() {
    std::ostringstream detail;
    bool ok = true;
    double factorial = 1.0;
    for (int d = 1; d <= 3; ++d) {
        factorial *= d;
        const auto b = BoundFunction::isotropic(d);
        const auto est = estimate_P_volume(b, default_tau(b), true);
        const double rel = std::abs(est.value - 1.0 / factorial) * factorial;
        ok = ok && rel <= 0.01;
        detail << (d > 1 ? ", " : "") << "d=" << d << " " << fmt("%.6f", est.value) << " rel " << fmt("%.1e", rel);
    }
    return {ok, detail.str()};
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion3() {
    double worst_gap = 0.0;
    const int n = 1 << 14;  // 16385 points include every dyadic midpoint down to 2^-9
    for (int m = 1; m <= 8; ++m) {
        const auto net = synth_square(m);
        double worst = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double t = static_cast<double>(i) / n;
            worst = std::max(worst, std::abs(eval(net, Eigen::VectorXd::Constant(1, t))(0) - t * t));
        }
        worst_gap = std::max(worst_gap, std::abs(worst - std::ldexp(1.0, -2 * m - 2)));
    }
    return {worst_gap <= 1e-12, "max |measured - 2^(-2m-2)| = " + fmt("%.2e", worst_gap) + " over m=1..8, 16385 points"};
}

// ---------------------------------------------------------------- criterion 4

Outcome criterion4() {
    const std::vector<int> ns{2, 4, 8, 16};
    const std::vector<double> deltas{1e-1, 1e-2, 1e-3};
    std::mt19937_64 gen(20240601);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    bool ok = true;
    double worst_err_ratio = 0.0;
    double fitted_C = 0.0;
    double worst_complexity_ratio = 0.0;
    std::string offending;
    for (int n : ns) {
        for (double delta : deltas) {
            const auto net = synth_product(n, delta);
            double worst = 0.0;
            Eigen::VectorXd y(n);
            for (int s = 0; s < 100'000; ++s) {
                double prod = 1.0;
                for (int i = 0; i < n; ++i) {
                    y(i) = unif(gen);
                    prod *= y(i);
                }
                worst = std::max(worst, std::abs(eval(net, y)(0) - prod));
            }
            worst_err_ratio = std::max(worst_err_ratio, worst / delta);
            if (worst > delta) {
                ok = false;
                offending += " error n=" + std::to_string(n) + " delta=" + fmt("%g", delta);
            }
            const double envelope = 1.0 + n * std::log(n / delta);
            const double complexity = static_cast<double>(audit(net).complexity());
            if (n == 2 && delta == 1e-1) fitted_C = complexity / envelope;
            const double ratio = complexity / (fitted_C * envelope);
            worst_complexity_ratio = std::max(worst_complexity_ratio, ratio);
            if (ratio > 4.0) {
                ok = false;
                offending += " complexity n=" + std::to_string(n) + " delta=" + fmt("%g", delta);
            }
        }
    }
    std::ostringstream detail;
    detail << "max error/delta " << fmt("%.3f", worst_err_ratio) << ", C = " << fmt("%.2f", fitted_C)
           << ", max complexity ratio " << fmt("%.2f", worst_complexity_ratio) << " (limit 4)";
    if (!offending.empty()) detail << ";" << offending;
    return {ok, detail.str()};
}

// ---------------------------------------------------------------- studies for 5-8 and 11

struct Studies {
    StudyReport d1;
    StudyReport d2;
    double d1_seconds = 0.0;
    double d2_seconds = 0.0;
    std::string d1_error;
    std::string d2_error;
};

Studies run_studies() {
    Studies s;
    const PolynomialFamily leg(FamilyKind::ShiftedLegendre);
    {
        StudyOptions opt;
        opt.pvol = 1.0;
        opt.keep_networks = true;
        const auto t0 = Clock::now();
        try {
            s.d1 = convergence_study(BoundFunction::isotropic(1), leg, {2, 4, 8, 16, 32}, opt);
        } catch (const std::exception& e) {
            s.d1_error = e.what();
        }
        s.d1_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    }
    {
        StudyOptions opt;
        opt.keep_networks = true;
        const auto t0 = Clock::now();
        try {
            s.d2 = convergence_study(BoundFunction::isotropic(2), leg, {6, 21, 66, 120}, opt);
        } catch (const std::exception& e) {
            s.d2_error = e.what();
        }
        s.d2_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    }
    return s;
}

Outcome criterion5(const Studies& s) {
    if (!s.d1_error.empty() || !s.d2_error.empty()) return {false, "study failed: " + s.d1_error + s.d2_error};
    std::size_t checked = 0;
    double worst = 0.0;
    bool ok = true;
    for (const auto* rep : {&s.d1, &s.d2}) {
        for (const auto& row : rep->rows) {
            const auto& syn = row.synthesis;
            if (!syn.measured || syn.measured_subnet_errors.size() != syn.budgets.per_index.size()) return {false, "unmeasured row"};
            for (std::size_t k = 0; k < syn.budgets.per_index.size(); ++k) {
                worst = std::max(worst, syn.measured_subnet_errors[k] / syn.budgets.per_index[k]);
                ++checked;
            }
            ok = ok && syn.subnet_budgets_hold();
        }
    }
    return {ok && worst <= 1.0, std::to_string(checked) + " subnetworks, max measured/eps " + fmt("%.3f", worst)};
}

Outcome criterion6(const Studies& s) {
    if (!s.d1_error.empty()) return {false, "study failed: " + s.d1_error};
    bool ok = s.d1.rows.size() == 5;
    double worst = 0.0;
    for (const auto& row : s.d1.rows) {
        const double rhs = static_cast<double>(row.M) * std::exp(-2.0 * static_cast<double>(row.M) / 1.0);
        ok = ok && row.sup_error_uQ_uNN <= rhs && row.links_hold();
        worst = std::max(worst, row.sup_error_uQ_uNN / rhs);
    }
    const auto fit = rate_slope(s.d1, 4);
    ok = ok && fit.used_M.size() == 4 && fit.slope >= -2.6 && fit.slope <= -1.4;
    return {ok, "max error/(M e^(-2M)) " + fmt("%.3e", worst) + ", slope " + fmt("%.3f", fit.slope) +
                    " over M=4..32 (allowed [-2.6, -1.4])"};
}

Outcome criterion7(const Studies& s) {
    if (!s.d2_error.empty()) return {false, "study failed: " + s.d2_error};
    const auto complexity = check_complexity_bound(s.d2, 4.0);
    const auto depth = check_depth_bound(s.d2, 2.0);
    bool links = true;
    for (const auto& row : s.d2.rows) links = links && row.links_hold();
    return {s.d2.rows.size() == 4 && complexity.passed && depth.passed && links,
            "complexity ratio max " + fmt("%.2f", complexity.worst_ratio) + " (limit 4), depth ratio max " +
                fmt("%.2f", depth.worst_ratio) + " (limit 2), error links " + (links ? "hold" : "violated")};
}

Outcome criterion8(const Studies& s) {
    if (!s.d1_error.empty() || !s.d2_error.empty()) return {false, "study failed"};
    bool ok = true;
    std::size_t nets = 0;
    std::string scaling;
    for (const auto* rep : {&s.d1, &s.d2}) {
        for (std::size_t k = 0; k < rep->rows.size(); ++k) {
            const auto& set = rep->index_sets[k];
            std::size_t l1 = 0;
            for (const auto& nu : set.indices()) l1 += static_cast<std::size_t>(nu.l1());
            const auto c = check_first_layer_count(rep->networks[k], set);
            ok = ok && c.passed && c.input_weights == 2 * l1;
            ++nets;
        }
        const auto sc = check_first_layer_scaling(*rep, 4.0);
        ok = ok && sc.passed;
        scaling += (scaling.empty() ? "" : ", ") + std::string("d=") + std::to_string(rep->d) + " ratio max " +
                   fmt("%.2f", sc.worst_ratio);
    }
    return {ok, std::to_string(nets) + " networks with input weights = 2 sum|nu|_1; sum|nu|_1 scaling " + scaling +
                    " (limit 4)"};
}

Outcome criterion9() {
    bool ok = true;
    std::string bad;
    for (int J = 10; J <= 25; ++J) {
        const auto M = static_cast<std::size_t>((J + 1) * (J + 2) / 2);
        const auto set = enumerate_quasi_optimal(BoundFunction::isotropic(2), M);
        const auto diag = j_interval_diagnostic(set, 0.5, 0.5);
        const double lower = std::sqrt(static_cast<double>(M) / (0.5 * 1.5));
        const double upper = std::sqrt(2.0 * static_cast<double>(M) / 0.5);
        const bool inside = diag.J >= lower && diag.J <= upper && diag.J == J &&
                            diag.status == JIntervalStatus::Inside;
        if (!inside) {
            ok = false;
            bad += " J=" + std::to_string(J);
        }
    }
    return {ok, ok ? "J inside the interval for J=10..25" : "outside:" + bad};
}

Outcome criterion10() {
    const auto b = BoundFunction::isotropic(1);
    const double Cu = tail_constant_Cu(0.5);
    double worst = 0.0;
    bool ok = true;
    for (std::size_t M = 10; M <= 100; ++M) {
        const auto set = enumerate_quasi_optimal(b, M);
        const double tail = tail_sum(b, set, default_tail_cutoff(set)).upper();
        const double bound = Cu * static_cast<double>(M) * std::exp(-static_cast<double>(M) / 1.5);
        // Independent closed form of the d = 1 tail: sum_{k >= M} e^-k.
        const double exact = std::exp(-static_cast<double>(M)) / (1.0 - std::exp(-1.0));
        ok = ok && tail <= bound && tail >= exact && tail <= exact * (1.0 + 1e-10);
        worst = std::max(worst, tail / bound);
    }
    return {ok, "max tail/bound " + fmt("%.3e", worst) + " over M=10..100, C_u(0.5) = " + fmt("%.4f", Cu)};
}

Outcome criterion11(const Studies& s) {
    if (!s.d1_error.empty() || !s.d2_error.empty()) return {false, "study failed"};
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::size_t nets = 0;
    for (const auto* rep : {&s.d1, &s.d2}) {
        for (const auto& net : rep->networks) {
            const std::string text = serialize(net).dump();
            const auto back = deserialize(nlohmann::json::parse(text));
            const auto q = net.cast<quad>();
            const auto qb = back.cast<quad>();
            for (int p = 0; p < 100; ++p) {
                Eigen::VectorXd y(net.input_dim());
                for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = unif(gen);
                const auto a = eval(net, y);
                const auto c = eval(back, y);
                if (a.size() != c.size() || std::memcmp(a.data(), c.data(), sizeof(double) * a.size()) != 0) {
                    return {false, "double evaluation differs after round trip"};
                }
                if (eval(q, y)(0) != eval(qb, y)(0)) return {false, "quad evaluation differs after round trip"};
            }
            ++nets;
        }
    }
    return {nets == 9, std::to_string(nets) + " networks, 100 seeded points each, double and quad bitwise equal"};
}

}  // namespace

int main() {
    std::printf("acceptance run\n");
    criterion(1, "index-set oracle equivalence", 10.0, criterion1);
    criterion(2, "|P| accuracy", 5.0, criterion2);
    criterion(3, "squaring-net tightness", 5.0, criterion3);
    criterion(4, "product-net budget and complexity", 60.0, criterion4);

    const auto studies = run_studies();
    std::printf("       studies: d=1 %.1f s, d=2 %.1f s\n", studies.d1_seconds, studies.d2_seconds);
    criterion(5, "per-subnetwork budget", 0.0, [&] { return criterion5(studies); });
    {
        const auto o = criterion6(studies);
        report(6, "end-to-end error bound and rate", o, studies.d1_seconds, 300.0);
    }
    {
        const auto o = criterion7(studies);
        report(7, "complexity and depth bounds", o, studies.d2_seconds, 300.0);
    }
    criterion(8, "first-layer count", 0.0, [&] { return criterion8(studies); });
    criterion(9, "J-interval diagnostic", 0.0, criterion9);
    criterion(10, "tail-bound ratio", 10.0, criterion10);
    criterion(11, "round-trip determinism", 0.0, [&] { return criterion11(studies); });

    std::printf("%s: %d of 11 criteria failed\n", failures ? "FAILED" : "PASSED", failures);
    return failures ? 1 : 0;
}
