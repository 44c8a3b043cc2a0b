#include "qonet/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace qonet {

namespace {

std::string format_point(const Eigen::VectorXd& y) {
    std::ostringstream os;
    os << '(';
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", y(i));
        os << (i ? ", " : "") << buf;
    }
    os << ')';
    return os.str();
}

std::string sci(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17e", x);
    return buf;
}

}  // namespace

SupError sup_error_detail(const PointFunction& f, const PointFunction& g, int d, const SamplerSpec& spec) {
    const Eigen::MatrixXd pts = sample_points(d, spec);
    SupError out;
    out.points = static_cast<std::size_t>(pts.cols());
    out.argmax = pts.col(0);
    for (Eigen::Index p = 0; p < pts.cols(); ++p) {
        const Eigen::VectorXd y = pts.col(p);
        const double fv = f(y);
        const double gv = g(y);
        if (!std::isfinite(fv) || !std::isfinite(gv)) {
            throw Error(ErrorCategory::Numerical, "non-finite evaluation at " + format_point(y));
        }
        const double diff = std::abs(fv - gv);
        if (diff > out.value) {
            out.value = diff;
            out.argmax = y;
        }
    }
    return out;
}

double sup_error(const PointFunction& f, const PointFunction& g, int d, const SamplerSpec& spec) {
    return sup_error_detail(f, g, d, spec).value;
}

// ---------------------------------------------------------------------------
// Study
// ---------------------------------------------------------------------------

void check_study_envelope(const BoundFunction& bound, const std::vector<std::size_t>& M_list, double pvol,
                          const DeskEnvelope& envelope) {
    if (M_list.empty()) throw Error(ErrorCategory::Config, "M list is empty");
    for (std::size_t k = 0; k < M_list.size(); ++k) {
        if (M_list[k] < 1) throw Error(ErrorCategory::Config, "every M must be >= 1");
        if (k > 0 && M_list[k] <= M_list[k - 1]) throw Error(ErrorCategory::Config, "M list must be strictly ascending");
    }
    if (bound.dim() > envelope.max_dim) {
        throw Error(ErrorCategory::Resource, "d = " + std::to_string(bound.dim()) + " exceeds the study limit d <= " +
                                                 std::to_string(envelope.max_dim));
    }
    if (M_list.back() > envelope.max_M) {
        throw Error(ErrorCategory::Resource, "M = " + std::to_string(M_list.back()) + " exceeds the study limit M <= " +
                                                 std::to_string(envelope.max_M));
    }
    const auto set = enumerate_quasi_optimal(bound, M_list.back());
    for (const auto& nu : set.indices()) {
        if (nu.l1() > envelope.max_l1) {
            throw Error(ErrorCategory::Resource, "index " + to_string(nu) + " has |nu|_1 = " + std::to_string(nu.l1()) +
                                                     " above the study limit " + std::to_string(envelope.max_l1));
        }
    }
    for (std::size_t M : M_list) {
        const auto prefix = set.prefix(M);
        required_precision(prefix, epsilon_schedule(prefix, pvol));
    }
}

StudyReport convergence_study(const BoundFunction& bound, const PolynomialFamily& family,
                              const std::vector<std::size_t>& M_list, const StudyOptions& options,
                              const RowCallback& on_row) {
    const int d = bound.dim();
    const SamplerSpec sampler = options.sampler.value_or(SamplerSpec::default_for(d, options.seed));

    StudyReport report;
    report.d = d;
    nlohmann::json pvol_echo;
    double pvol = 0.0;
    if (options.pvol) {
        pvol = *options.pvol;
        pvol_echo = {{"source", "given"}, {"value", pvol}};
    } else {
        const double tau = options.tau.value_or(default_tau(bound));
        const auto est = estimate_P_volume(bound, tau);
        pvol = est.value;
        pvol_echo = {{"source", "estimate"}, {"value", pvol}, {"tau", est.tau}, {"lattice_count", est.lattice_count},
                     {"extrapolated", est.extrapolated}};
    }
    check_study_envelope(bound, M_list, pvol, options.envelope);

    report.config_echo = {{"bound", bound.to_json()},
                          {"family", to_string(family.kind())},
                          {"d", d},
                          {"M_list", M_list},
                          {"sampler", sampler.to_json()},
                          {"seed", options.seed},
                          {"pvol", pvol_echo},
                          {"tail_epsilon", options.tail_epsilon},
                          {"envelope",
                           {{"max_dim", options.envelope.max_dim},
                            {"max_M", options.envelope.max_M},
                            {"max_l1", options.envelope.max_l1}}}};
    if (options.tail_cutoff) report.config_echo["tail_cutoff"] = *options.tail_cutoff;

    const auto full_set = enumerate_quasi_optimal(bound, M_list.back());
    const auto target = synthetic_expansion(full_set, family, options.seed);

    for (std::size_t M : M_list) {
        const auto start = std::chrono::steady_clock::now();
        const auto u = target.truncated(M);
        const auto& set = u.index_set();
        SynthesisOptions sopt;
        sopt.sampler = sampler;
        auto result = synth_unn(u, pvol, sopt);
        const auto tail = check_quasi_tail_bound(bound, set, pvol, options.tail_epsilon, 1, options.tail_cutoff);

        StudyRow row;
        row.M = M;
        row.J = set.threshold_J();
        row.pvol = pvol;
        row.sup_error_uQ_uNN = result.report.measured_total_error;
        row.tail_bound_u_uQ = tail.tail_upper;
        row.bound_rhs = result.report.bound_rhs;
        row.total_bound = row.tail_bound_u_uQ + row.bound_rhs;
        row.complexity = result.report.audit.complexity();
        row.units = result.report.audit.units;
        row.nonzero_weights = result.report.audit.nonzero_weights;
        row.depth = result.report.audit.depth;
        row.input_weights = result.report.audit.input_weights;
        for (const auto& nu : set.indices()) row.sum_l1 += static_cast<std::size_t>(nu.l1());
        row.tail_ratio = tail.ratio;
        row.synthesis = std::move(result.report);
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        report.index_sets.push_back(set);
        if (options.keep_networks) report.networks.push_back(std::move(result.network));
        report.rows.push_back(std::move(row));
        if (on_row) on_row(report, report.rows.back());
    }
    return report;
}

const char* StudyReport::csv_header() {
    return "M,J,pvol,sup_error_uQ_uNN,tail_bound_u_uQ,total_bound,complexity,units,nonzero_weights,depth,bound_rhs,"
           "wall_time";
}

void StudyReport::write_csv_row(std::ostream& os, const StudyRow& r, bool timing_in_csv) const {
    os << r.M << ',' << sci(r.J) << ',' << sci(r.pvol) << ',' << sci(r.sup_error_uQ_uNN) << ','
       << sci(r.tail_bound_u_uQ) << ',' << sci(r.total_bound) << ',' << r.complexity << ',' << r.units << ','
       << r.nonzero_weights << ',' << r.depth << ',' << sci(r.bound_rhs) << ','
       << sci(timing_in_csv ? r.wall_time : 0.0) << '\n';
}

void StudyReport::write_csv(std::ostream& os, bool timing_in_csv) const {
    os << csv_header() << '\n';
    for (const auto& r : rows) write_csv_row(os, r, timing_in_csv);
}

nlohmann::json StudyReport::sidecar() const {
    auto rows_json = nlohmann::json::array();
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        const auto& s = r.synthesis;
        rows_json.push_back({{"M", r.M},
                             {"wall_time", r.wall_time},
                             {"precision", to_string(s.precision)},
                             {"sample_count", s.sample_count},
                             {"weighted_budget_sum", s.weighted_budget_sum},
                             {"weighted_measured_sum", s.weighted_measured_sum},
                             {"rounding_allowance", s.rounding_allowance},
                             {"clamped_budgets", s.budgets.clamped.size()},
                             {"input_weights", r.input_weights},
                             {"sum_l1", r.sum_l1},
                             {"tail_ratio", r.tail_ratio},
                             {"padding_units", s.audit.padding_units},
                             {"padding_weights", s.audit.padding_weights},
                             {"links",
                              {{"subnet_budgets", s.subnet_budgets_hold()},
                               {"budget_sum", s.budget_sum_holds()},
                               {"triangle", s.triangle_holds()},
                               {"sup_error_le_bound_rhs", r.sup_error_uQ_uNN <= r.bound_rhs}}}});
    }
    nlohmann::json checks;
    if (rows.size() >= 1) {
        auto to_json = [](const BoundCheck& c) {
            nlohmann::json j = {{"passed", c.passed},
                                {"fitted_C", c.fitted_C},
                                {"worst_ratio", c.worst_ratio},
                                {"min_ratio", c.min_ratio},
                                {"message", c.message}};
            if (c.offending_M) j["offending_M"] = *c.offending_M;
            return j;
        };
        checks["depth"] = to_json(check_depth_bound(*this));
        checks["complexity"] = to_json(check_complexity_bound(*this));
        checks["first_layer_scaling"] = to_json(check_first_layer_scaling(*this));
        const auto fit = rate_slope(*this);
        checks["rate_slope"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"used_M", fit.used_M}};
    }
    return {{"config_echo", config_echo}, {"rows", std::move(rows_json)}, {"checks", std::move(checks)}};
}

// ---------------------------------------------------------------------------
// Bound checks
// ---------------------------------------------------------------------------

namespace {

template <typename Value, typename Scale>
BoundCheck fit_envelope(const StudyReport& report, double factor, bool require_monotone, const char* what,
                        Value value, Scale scale) {
    BoundCheck c;
    const auto& rows = report.rows;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        if (rows[k].M <= rows[k - 1].M) {
            c.passed = false;
            c.offending_M = rows[k].M;
            c.message = "rows are not sorted by ascending M at M = " + std::to_string(rows[k].M);
            return c;
        }
        if (require_monotone && value(rows[k]) < value(rows[k - 1])) {
            c.passed = false;
            c.offending_M = rows[k].M;
            c.message = std::string(what) + " decreases at M = " + std::to_string(rows[k].M);
            return c;
        }
    }
    std::size_t first = 0;
    while (first < rows.size() && !(value(rows[first]) > 0.0 && scale(rows[first]) > 0.0)) ++first;
    if (first >= rows.size()) {
        c.message = "no row with a positive " + std::string(what) + "; nothing to fit";
        return c;
    }
    c.fitted_C = value(rows[first]) / scale(rows[first]);
    c.worst_ratio = 1.0;
    c.min_ratio = 1.0;
    for (std::size_t k = first + 1; k < rows.size(); ++k) {
        const double ratio = value(rows[k]) / (c.fitted_C * scale(rows[k]));
        c.worst_ratio = std::max(c.worst_ratio, ratio);
        c.min_ratio = std::min(c.min_ratio, ratio);
        if (ratio > factor && c.passed) {
            c.passed = false;
            c.offending_M = rows[k].M;
        }
    }
    std::ostringstream msg;
    msg << what << ": C = " << c.fitted_C << " fitted at M = " << rows[first].M << ", ratios in [" << c.min_ratio
        << ", " << c.worst_ratio << "], allowed factor " << factor;
    if (c.offending_M) msg << "; exceeded at M = " << *c.offending_M;
    c.message = msg.str();
    return c;
}

}  // namespace

BoundCheck check_depth_bound(const StudyReport& report, double factor) {
    const double d = report.d > 0 ? report.d : 1;
    return fit_envelope(
        report, factor, true, "depth", [](const StudyRow& r) { return static_cast<double>(r.depth) - 1.0; },
        [d](const StudyRow& r) {
            const double root = std::pow(static_cast<double>(r.M), 1.0 / d);
            return root * std::max(1.0, std::log(root));
        });
}

BoundCheck check_complexity_bound(const StudyReport& report, double factor) {
    const double d = report.d > 0 ? report.d : 1;
    return fit_envelope(
        report, factor, true, "complexity", [](const StudyRow& r) { return static_cast<double>(r.complexity); },
        [d](const StudyRow& r) { return std::pow(static_cast<double>(r.M), 2.0 / d + 1.0); });
}

BoundCheck check_first_layer_scaling(const StudyReport& report, double factor) {
    const double d = report.d > 0 ? report.d : 1;
    return fit_envelope(
        report, factor, true, "sum |nu|_1", [](const StudyRow& r) { return static_cast<double>(r.sum_l1); },
        [d](const StudyRow& r) { return std::pow(static_cast<double>(r.M), 1.0 / d + 1.0); });
}

FirstLayerCheck check_first_layer_count(const ReluNetwork& net, const QuasiOptimalIndexSet& set) {
    const auto& meta = net.metadata();
    if (!meta.contains("indices") || !meta.contains("M")) {
        throw Error(ErrorCategory::Config, "network carries no synthesis metadata (indices, M)");
    }
    if (meta["M"].get<std::size_t>() != set.size()) {
        throw Error(ErrorCategory::Config, "network metadata describes a different index set size");
    }
    FirstLayerCheck c;
    for (const auto& nu : set.indices()) c.sum_l1 += static_cast<std::size_t>(nu.l1());
    c.expected = 2 * c.sum_l1;
    c.input_weights = static_cast<std::size_t>(net.layers().front().weights.nonZeros());
    c.passed = c.input_weights == c.expected;
    return c;
}

SlopeFit rate_slope(const StudyReport& report, std::size_t min_M) {
    SlopeFit fit;
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& r : report.rows) {
        if (r.M < min_M || !(r.sup_error_uQ_uNN > 0.0)) continue;
        xs.push_back(static_cast<double>(r.M));
        ys.push_back(std::log(r.sup_error_uQ_uNN / static_cast<double>(r.M)));
        fit.used_M.push_back(r.M);
    }
    if (xs.size() < 2) return fit;
    const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        A(i, 0) = xs[static_cast<std::size_t>(i)];
        A(i, 1) = 1.0;
        y(i) = ys[static_cast<std::size_t>(i)];
    }
    const Eigen::Vector2d sol = A.colPivHouseholderQr().solve(y);
    fit.slope = sol(0);
    fit.intercept = sol(1);
    return fit;
}

}  // namespace qonet
