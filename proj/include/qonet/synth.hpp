#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qonet/multiindex.hpp"
#include "qonet/network.hpp"
#include "qonet/orthopoly.hpp"
#include "qonet/precision.hpp"
#include "qonet/sampling.hpp"

namespace qonet {

/// t -> t - sum_{s=1}^m g_s(t) / 4^s on [0,1], where g_s is the s-fold hat map. This is the
/// piecewise-linear interpolant of t^2 on the grid 2^-m, so the sup error is exactly 2^(-2m-2).
/// Depth m + 1: layer 1 holds three hat units, later layers one running unit plus three hat units.
ReluNetwork synth_square(int m);

/// Approximate product of two inputs in [-1,1] via xy = 2 (|x+y|/2)^2 - x^2/2 - y^2/2, with each
/// square from synth_square(m) and the result clamped to [-1,1]. Error at most 3 * 2^(-2m-2).
ReluNetwork synth_pairwise_product(int m);

/// Smallest m with (2n - 1) * 3 * 2^(-2m-2) <= delta.
int product_refinement_level(int n, double delta);

/// Balanced binary tree of pairwise products over n inputs in [-1,1]; sup error <= delta.
/// n = 1 gives the exact identity gadget.
ReluNetwork synth_product(int n, double delta);

struct EpsilonSchedule {
    std::vector<double> per_index;     // aligned with the index set's rank order
    double global_exponent = 0.0;      // (2M / pvol)^(1/d)
    double pvol = 0.0;
    std::vector<MultiIndex> clamped;   // raw value >= 1, stored as 1 - 1e-6
    std::vector<MultiIndex> raised;    // raw value underflowed to 0, stored as 1e-300

    nlohmann::json to_json(const QuasiOptimalIndexSet& set) const;
};

EpsilonSchedule epsilon_schedule(const QuasiOptimalIndexSet& set, double pvol);

/// d inputs, |nu|_1 outputs (y_i - r_j), realized as sigma(t) - sigma(-t) with 2 |nu|_1 ReLU units.
ReluNetwork synth_factor_layer(const MultiIndex& nu, const PolynomialFamily& family);

/// Approximation of prod_i prod_j (y_i - r_j) to accuracy eps on [0,1]^d. nu = 0 gives the
/// constant 1.
ReluNetwork synth_psi(const MultiIndex& nu, const PolynomialFamily& family, double eps);

struct SynthesisOptions {
    SamplerSpec sampler = SamplerSpec::grid(1025);
    bool measure = true;
};

struct SynthesisReport {
    std::size_t M = 0;
    ComplexityAudit audit;
    EpsilonSchedule budgets;
    std::vector<double> measured_subnet_errors;  // rank order; exact subnetworks report 0 when exact
    double bound_rhs = 0.0;                      // M exp(-(2M/pvol)^(1/d))
    double weighted_budget_sum = 0.0;            // sum |c_nu| eps_nu
    double weighted_measured_sum = 0.0;          // sum |c_nu| measured_nu
    double measured_total_error = 0.0;           // sup |u_Q - u_NN| over the sample
    double rounding_allowance = 0.0;
    EvalPrecision precision = EvalPrecision::Double;
    std::size_t sample_count = 0;
    bool measured = false;

    bool subnet_budgets_hold() const;   // measured_nu <= eps_nu for every nu
    bool budget_sum_holds() const;      // weighted_budget_sum <= bound_rhs
    bool triangle_holds() const;        // measured_total <= weighted_measured_sum (+ rounding)
    bool all_links_hold() const { return subnet_budgets_hold() && budget_sum_holds() && triangle_holds(); }

    nlohmann::json to_json(const QuasiOptimalIndexSet& set) const;
};

struct SynthesisResult {
    ReluNetwork network;
    SynthesisReport report;
};

/// Precision needed to resolve the smallest budget of a non-exact subnetwork (|nu|_1 >= 2).
/// Throws Resource when even quad precision cannot resolve it.
EvalPrecision required_precision(const QuasiOptimalIndexSet& set, const EpsilonSchedule& eps);

/// Assembles u_NN = sum c_nu Psi~_nu + c_0 over shared inputs and measures every error link.
SynthesisResult synth_unn(const QuasiOptimalExpansion& expansion, double pvol,
                          const SynthesisOptions& options = {});

/// Persists the network (netcore format) and the report document.
void save_synthesis(const SynthesisResult& result, const QuasiOptimalIndexSet& set,
                    const std::filesystem::path& network_path, const std::filesystem::path& report_path);

}  // namespace qonet
