#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qonet/multiindex.hpp"
#include "qonet/network.hpp"
#include "qonet/orthopoly.hpp"
#include "qonet/sampling.hpp"
#include "qonet/synth.hpp"

namespace qonet {

using PointFunction = std::function<double(const Eigen::VectorXd&)>;

struct SupError {
    double value = 0.0;
    Eigen::VectorXd argmax;
    std::size_t points = 0;
};

/// max |f(y) - g(y)| over the sampler's point set. Throws Numerical naming the point when either
/// evaluation is not finite.
SupError sup_error_detail(const PointFunction& f, const PointFunction& g, int d, const SamplerSpec& spec);
double sup_error(const PointFunction& f, const PointFunction& g, int d, const SamplerSpec& spec);

/// Limits outside which a study refuses to run.
struct DeskEnvelope {
    int max_dim = 3;
    std::size_t max_M = 256;
    int max_l1 = 32;
};

struct StudyOptions {
    std::optional<SamplerSpec> sampler;  // default: SamplerSpec::default_for(d, seed)
    std::optional<double> pvol;          // use this |P| instead of estimating it
    std::optional<double> tau;           // lattice scale for the estimate; default_tau(b) otherwise
    std::uint64_t seed = 1;              // coefficient signs and Halton shift
    std::optional<double> tail_cutoff;   // default_tail_cutoff(set) otherwise
    double tail_epsilon = 0.5;           // epsilon in C_u(epsilon) for the reported tail ratio
    bool keep_networks = false;
    DeskEnvelope envelope;
};

struct StudyRow {
    std::size_t M = 0;
    double J = 0.0;
    double pvol = 0.0;
    double sup_error_uQ_uNN = 0.0;
    double tail_bound_u_uQ = 0.0;
    double total_bound = 0.0;
    std::size_t complexity = 0;
    std::size_t units = 0;
    std::size_t nonzero_weights = 0;
    int depth = 0;
    double bound_rhs = 0.0;
    double wall_time = 0.0;

    std::size_t input_weights = 0;
    std::size_t sum_l1 = 0;
    double tail_ratio = 0.0;  // tail / (C_u M exp(-(M/((1+eps)|P|))^(1/d)))
    SynthesisReport synthesis;

    bool links_hold() const { return synthesis.all_links_hold() && sup_error_uQ_uNN <= bound_rhs; }
};

struct StudyReport {
    int d = 0;
    std::vector<StudyRow> rows;
    nlohmann::json config_echo;
    std::vector<ReluNetwork> networks;           // filled when keep_networks
    std::vector<QuasiOptimalIndexSet> index_sets;  // one per row

    static const char* csv_header();
    void write_csv_row(std::ostream& os, const StudyRow& row, bool timing_in_csv = false) const;
    void write_csv(std::ostream& os, bool timing_in_csv = false) const;
    nlohmann::json sidecar() const;
};

/// Called after each finished row, before the next starts (partial results survive failures).
using RowCallback = std::function<void(const StudyReport&, const StudyRow&)>;

/// For each M: Lambda_M, |P|, u_NN for the synthetic target restricted to Lambda_M, measured
/// sup error, tail bracket for ||u - u_Q||, and the audit.
StudyReport convergence_study(const BoundFunction& bound, const PolynomialFamily& family,
                              const std::vector<std::size_t>& M_list, const StudyOptions& options = {},
                              const RowCallback& on_row = {});

/// Throws Config or Resource if the study would leave the desk or precision envelope.
void check_study_envelope(const BoundFunction& bound, const std::vector<std::size_t>& M_list, double pvol,
                          const DeskEnvelope& envelope);

struct BoundCheck {
    bool passed = true;
    double fitted_C = 0.0;
    double worst_ratio = 0.0;  // max over rows of value / (fitted envelope)
    double min_ratio = 0.0;
    std::optional<std::size_t> offending_M;
    std::string message;
};

/// depth <= 1 + C M^(1/d) max(1, ln M^(1/d)), C fitted on the smallest M, others within factor 2;
/// depth must be nondecreasing in M.
BoundCheck check_depth_bound(const StudyReport& report, double factor = 2.0);

/// complexity / M^(2/d + 1) fitted on the smallest M, others at most factor times that;
/// complexity must be nondecreasing in M.
BoundCheck check_complexity_bound(const StudyReport& report, double factor = 4.0);

struct FirstLayerCheck {
    std::size_t input_weights = 0;
    std::size_t expected = 0;  // 2 sum |nu|_1
    std::size_t sum_l1 = 0;
    bool passed = false;
};

/// Input-to-first-layer nonzero weights of a synthesized u_NN against 2 sum |nu|_1.
/// Throws Config when the network lacks synthesis metadata.
FirstLayerCheck check_first_layer_count(const ReluNetwork& net, const QuasiOptimalIndexSet& set);

/// sum |nu|_1 <= C M^(1/d + 1) with C fitted on the smallest row with a nonzero sum.
BoundCheck check_first_layer_scaling(const StudyReport& report, double factor = 4.0);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::vector<std::size_t> used_M;  // rows with a positive error
};

/// Least-squares slope of ln(sup_error / M) against M over rows with a positive error and M >= min_M.
SlopeFit rate_slope(const StudyReport& report, std::size_t min_M = 1);

}  // namespace qonet
