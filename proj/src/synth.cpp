#include "qonet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

namespace qonet {

namespace {

std::vector<Activation> relu(Eigen::Index n) { return std::vector<Activation>(static_cast<std::size_t>(n), Activation::Relu); }

// Coefficients of the hat map g(t) = 2 sigma(t) - 4 sigma(t - 1/2) + 2 sigma(t - 1) on its three units.
constexpr double kHat[3] = {2.0, -4.0, 2.0};
constexpr double kHatBias[3] = {0.0, -0.5, -1.0};

}  // namespace

ReluNetwork synth_square(int m) {
    if (m < 1) throw Error(ErrorCategory::Config, "squaring refinement level must be >= 1");
    std::vector<Layer<double>> layers;
    {
        Eigen::MatrixXd w = Eigen::MatrixXd::Ones(3, 1);
        Eigen::VectorXd b(3);
        b << kHatBias[0], kHatBias[1], kHatBias[2];
        layers.push_back({w.sparseView(), b, relu(3)});
    }
    // Previous layer: [h0 h1 h2] at s = 1, [r h0 h1 h2] afterwards. For t in [0,1] the running
    // value t - sum g_k / 4^k is the interpolant of t^2 and stays >= 0, so ReLU leaves it intact.
    auto running_row = [](int s, double scale, Eigen::MatrixXd& w, Eigen::Index row) {
        const int off = s == 1 ? 0 : 1;
        w(row, 0) = 1.0;
        for (int k = 0; k < 3; ++k) w(row, off + k) -= kHat[k] * scale;
    };
    double scale = 0.25;  // 4^-s for the hat produced by layer s
    for (int s = 1; s < m; ++s) {
        const int fan_in = s == 1 ? 3 : 4;
        const int off = s == 1 ? 0 : 1;
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, fan_in);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(4);
        running_row(s, scale, w, 0);
        for (int u = 0; u < 3; ++u) {
            for (int k = 0; k < 3; ++k) w(1 + u, off + k) = kHat[k];
            b(1 + u) = kHatBias[u];
        }
        layers.push_back({w.sparseView(), b, relu(4)});
        scale *= 0.25;
    }
    {
        const int fan_in = m == 1 ? 3 : 4;
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(1, fan_in);
        running_row(m, scale, w, 0);
        layers.push_back({w.sparseView(), Eigen::VectorXd::Zero(1), {Activation::Linear}});
    }
    return ReluNetwork(1, std::move(layers), {{"name", "square"}, {"m", m}});
}

ReluNetwork synth_pairwise_product(int m) {
    const ReluNetwork square = synth_square(m);
    // |a|, |b|, |a+b|/2 from six ReLU units, then summed pairwise.
    Eigen::MatrixXd split(6, 2);
    split << 1, 0, -1, 0, 0, 1, 0, -1, 0.5, 0.5, -0.5, -0.5;
    Eigen::MatrixXd join = Eigen::MatrixXd::Zero(3, 6);
    join << 1, 1, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 1, 1;
    const ReluNetwork abs = stack(single_layer(split, Eigen::VectorXd::Zero(6), relu(6)),
                                  linear_map(join, Eigen::VectorXd::Zero(3)));
    const std::vector<ReluNetwork> squares(3, square);
    const ReluNetwork sq = fuse(abs, parallel(squares, false));
    const ReluNetwork combine = linear_map(Eigen::RowVector3d(-0.5, -0.5, 2.0), Eigen::VectorXd::Zero(1));
    return fuse(fuse(sq, combine), clamp_gadget()).with_metadata({{"name", "pairwise_product"}, {"m", m}});
}

int product_refinement_level(int n, double delta) {
    if (n < 1) throw Error(ErrorCategory::Config, "product arity must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCategory::Config, "product accuracy must lie in (0,1)");
    const double nodes = 2.0 * n - 1.0;
    int m = 1;
    while (nodes * 3.0 * std::ldexp(1.0, -2 * m - 2) > delta) ++m;
    return m;
}

ReluNetwork synth_product(int n, double delta) {
    const int m = product_refinement_level(n, delta);
    if (n == 1) return identity_gadget(1).with_metadata({{"name", "product"}, {"n", 1}, {"delta", delta}, {"m", 0}});
    const ReluNetwork pair = synth_pairwise_product(m);
    const ReluNetwork pass = linear_map(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1));
    std::optional<ReluNetwork> net;
    int width = n;
    while (width > 1) {
        std::vector<ReluNetwork> members(static_cast<std::size_t>(width / 2), pair);
        if (width % 2 == 1) members.push_back(pass);
        ReluNetwork level = parallel(members, false);
        net = net ? fuse(*net, level) : std::move(level);
        width = (width + 1) / 2;
    }
    return net->with_metadata({{"name", "product"}, {"n", n}, {"delta", delta}, {"m", m}});
}

// ---------------------------------------------------------------------------
// Budgets
// ---------------------------------------------------------------------------

EpsilonSchedule epsilon_schedule(const QuasiOptimalIndexSet& set, double pvol) {
    if (!(pvol > 0.0) || !std::isfinite(pvol)) throw Error(ErrorCategory::Config, "pvol must be positive");
    EpsilonSchedule s;
    s.pvol = pvol;
    s.global_exponent = std::pow(2.0 * static_cast<double>(set.size()) / pvol, 1.0 / set.dim());
    s.per_index.reserve(set.size());
    for (std::size_t k = 0; k < set.size(); ++k) {
        double e = std::exp(set.bound_values()[k] - s.global_exponent);
        if (e >= 1.0) {
            e = 1.0 - 1e-6;
            s.clamped.push_back(set[k]);
        } else if (e == 0.0) {
            e = 1e-300;
            s.raised.push_back(set[k]);
        }
        s.per_index.push_back(e);
    }
    return s;
}

nlohmann::json EpsilonSchedule::to_json(const QuasiOptimalIndexSet& set) const {
    auto rows = nlohmann::json::array();
    for (std::size_t k = 0; k < per_index.size(); ++k) {
        const auto& nu = set[k];
        const bool was_clamped = std::find(clamped.begin(), clamped.end(), nu) != clamped.end();
        rows.push_back({{"nu", std::vector<int>(nu.degrees().begin(), nu.degrees().end())},
                        {"eps", per_index[k]},
                        {"clamped", was_clamped}});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Per-index subnetworks
// ---------------------------------------------------------------------------

ReluNetwork synth_factor_layer(const MultiIndex& nu, const PolynomialFamily& family) {
    const int d = nu.dim();
    const int n = nu.l1();
    std::vector<Eigen::Triplet<double, int>> split;
    std::vector<Eigen::Triplet<double, int>> join;
    Eigen::VectorXd bias(2 * n);
    int out = 0;
    for (int i = 0; i < d; ++i) {
        for (double r : family.roots(nu[i])) {
            split.emplace_back(2 * out, i, 1.0);
            split.emplace_back(2 * out + 1, i, -1.0);
            bias(2 * out) = -r;
            bias(2 * out + 1) = r;
            join.emplace_back(out, 2 * out, 1.0);
            join.emplace_back(out, 2 * out + 1, -1.0);
            ++out;
        }
    }
    Layer<double> first;
    first.weights.resize(2 * n, d);
    first.weights.setFromTriplets(split.begin(), split.end());
    first.bias = bias;
    first.activation = relu(2 * n);
    Layer<double> second;
    second.weights.resize(n, 2 * n);
    second.weights.setFromTriplets(join.begin(), join.end());
    second.bias = Eigen::VectorXd::Zero(n);
    second.activation.assign(static_cast<std::size_t>(n), Activation::Linear);
    return ReluNetwork(d, {std::move(first), std::move(second)},
                       {{"name", "factor" + to_string(nu)}});
}

ReluNetwork synth_psi(const MultiIndex& nu, const PolynomialFamily& family, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw Error(ErrorCategory::Config, "subnetwork budget must lie in (0,1)");
    const std::vector<int> degrees(nu.degrees().begin(), nu.degrees().end());
    if (nu.is_zero()) {
        return constant_gadget(nu.dim(), 1.0).with_metadata({{"name", "psi" + to_string(nu)}, {"nu", degrees}, {"eps", eps}});
    }
    return fuse(synth_factor_layer(nu, family), synth_product(nu.l1(), eps))
        .with_metadata({{"name", "psi" + to_string(nu)}, {"nu", degrees}, {"eps", eps}});
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

bool SynthesisReport::subnet_budgets_hold() const {
    for (std::size_t k = 0; k < measured_subnet_errors.size(); ++k) {
        if (!(measured_subnet_errors[k] <= budgets.per_index[k])) return false;
    }
    return true;
}

bool SynthesisReport::budget_sum_holds() const { return weighted_budget_sum <= bound_rhs * (1.0 + 1e-12); }

bool SynthesisReport::triangle_holds() const {
    return measured_total_error <= weighted_measured_sum + rounding_allowance;
}

nlohmann::json SynthesisReport::to_json(const QuasiOptimalIndexSet& set) const {
    auto measured_rows = nlohmann::json::array();
    for (std::size_t k = 0; k < measured_subnet_errors.size(); ++k) {
        const auto& nu = set[k];
        measured_rows.push_back(
            {{"nu", std::vector<int>(nu.degrees().begin(), nu.degrees().end())}, {"error", measured_subnet_errors[k]}});
    }
    return {{"M", M},
            {"pvol", budgets.pvol},
            {"global_exponent", budgets.global_exponent},
            {"budgets", budgets.to_json(set)},
            {"measured_errors", std::move(measured_rows)},
            {"audit", audit.to_json()},
            {"bound_rhs", bound_rhs},
            {"weighted_budget_sum", weighted_budget_sum},
            {"weighted_measured_sum", weighted_measured_sum},
            {"measured_total_error", measured_total_error},
            {"rounding_allowance", rounding_allowance},
            {"precision", to_string(precision)},
            {"sample_count", sample_count},
            {"measured", measured},
            {"links",
             {{"subnet_budgets", subnet_budgets_hold()},
              {"budget_sum", budget_sum_holds()},
              {"triangle", triangle_holds()}}}};
}

EvalPrecision required_precision(const QuasiOptimalIndexSet& set, const EpsilonSchedule& eps) {
    double smallest = 1.0;
    for (std::size_t k = 0; k < set.size(); ++k) {
        if (set[k].l1() >= 2) smallest = std::min(smallest, eps.per_index[k]);
    }
    if (smallest < kQuadPrecisionFloor) {
        throw Error(ErrorCategory::Resource, "smallest subnetwork budget " + std::to_string(smallest) +
                                                 " is below what quad-precision verification can resolve");
    }
    return smallest < kDoublePrecisionFloor ? EvalPrecision::Quad : EvalPrecision::Double;
}

namespace {

template <typename Scalar>
void measure(const ReluNetwork& net, const QuasiOptimalExpansion& u, const std::vector<std::size_t>& subnet_rank,
             const Eigen::MatrixXd& points, SynthesisReport& rep) {
    using std::abs;
    const auto typed = net.cast<Scalar>();
    const auto& indices = u.index_set().indices();
    std::vector<Scalar> worst(indices.size(), Scalar(0));
    Scalar worst_total(0);
    for (Eigen::Index p = 0; p < points.cols(); ++p) {
        const Eigen::VectorXd y = points.col(p);
        const auto trace = eval_trace(typed, y);
        const Scalar out = trace.back()(0);
        if (!detail::is_finite(out)) {
            Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, ", ", ", ", "", "", "(", ")");
            std::ostringstream where;
            where << y.transpose().format(fmt);
            throw Error(ErrorCategory::Numerical, "non-finite network output at " + where.str());
        }
        if (trace.size() >= 2 && !subnet_rank.empty()) {
            const auto& psi = trace[trace.size() - 2];
            for (std::size_t k = 0; k < subnet_rank.size(); ++k) {
                const std::size_t r = subnet_rank[k];
                const Scalar exact = eval_tensor<Scalar>(u.family(), indices[r], y);
                const Scalar err = abs(psi(static_cast<Eigen::Index>(k)) - exact);
                if (err > worst[r]) worst[r] = err;
            }
        }
        const Scalar diff = abs(out - eval_expansion<Scalar>(u, y));
        if (diff > worst_total) worst_total = diff;
    }
    rep.measured_subnet_errors.resize(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) rep.measured_subnet_errors[k] = to_double(worst[k]);
    rep.measured_total_error = to_double(worst_total);
}

}  // namespace

SynthesisResult synth_unn(const QuasiOptimalExpansion& expansion, double pvol, const SynthesisOptions& options) {
    const auto& set = expansion.index_set();
    const int d = set.dim();
    const std::size_t M = set.size();
    if (M == 0) throw Error(ErrorCategory::Config, "expansion has no terms");

    SynthesisReport rep;
    rep.M = M;
    rep.budgets = epsilon_schedule(set, pvol);
    rep.bound_rhs = static_cast<double>(M) * std::exp(-rep.budgets.global_exponent);
    rep.precision = required_precision(set, rep.budgets);

    std::vector<ReluNetwork> subnets;
    std::vector<std::size_t> subnet_rank;
    double constant = 0.0;
    std::vector<double> out_weights;
    for (std::size_t k = 0; k < M; ++k) {
        const double c = expansion.coefficients()[k];
        rep.weighted_budget_sum += std::abs(c) * rep.budgets.per_index[k];
        if (set[k].is_zero()) {
            constant += c;
            continue;
        }
        subnets.push_back(synth_psi(set[k], expansion.family(), rep.budgets.per_index[k]));
        subnet_rank.push_back(k);
        out_weights.push_back(c);
    }

    nlohmann::json meta = {{"name", "u_nn"},
                           {"M", M},
                           {"d", d},
                           {"family", to_string(expansion.family().kind())},
                           {"bound", set.bound().id()},
                           {"pvol", pvol}};
    std::optional<ReluNetwork> net;
    if (subnets.empty()) {
        net = constant_gadget(d, constant);
    } else {
        const ReluNetwork body = parallel(subnets, true);
        const Eigen::Map<const Eigen::RowVectorXd> w(out_weights.data(), static_cast<Eigen::Index>(out_weights.size()));
        net = stack(body, linear_map(w, Eigen::VectorXd::Constant(1, constant)));
        meta["subnetworks"] = net->metadata()["subnetworks"];
        meta["padding_units"] = net->metadata()["padding_units"];
        meta["padding_weights"] = net->metadata()["padding_weights"];
    }
    auto indices = nlohmann::json::array();
    for (const auto& nu : set.indices()) indices.push_back(std::vector<int>(nu.degrees().begin(), nu.degrees().end()));
    meta["indices"] = std::move(indices);
    ReluNetwork network = net->with_metadata(std::move(meta));
    rep.audit = audit(network);

    if (options.measure) {
        const Eigen::MatrixXd points = sample_points(d, options.sampler);
        rep.sample_count = static_cast<std::size_t>(points.cols());
        if (rep.precision == EvalPrecision::Quad) measure<quad>(network, expansion, subnet_rank, points, rep);
        else measure<double>(network, expansion, subnet_rank, points, rep);
        int max_degree = 0;
        double abs_sum = 0.0;
        for (std::size_t k = 0; k < M; ++k) {
            max_degree = std::max(max_degree, set[k].l1());
            abs_sum += std::abs(expansion.coefficients()[k]);
            rep.weighted_measured_sum += std::abs(expansion.coefficients()[k]) * rep.measured_subnet_errors[k];
        }
        const double unit = rep.precision == EvalPrecision::Quad ? std::ldexp(1.0, -113) : std::ldexp(1.0, -53);
        rep.rounding_allowance = 2.0 * (2.0 * static_cast<double>(M) + max_degree + 2.0) * unit * abs_sum;
        rep.measured = true;
    } else {
        rep.measured_subnet_errors.assign(M, 0.0);
    }
    return {std::move(network), std::move(rep)};
}

void save_synthesis(const SynthesisResult& result, const QuasiOptimalIndexSet& set,
                    const std::filesystem::path& network_path, const std::filesystem::path& report_path) {
    save_network(result.network, network_path);
    std::ofstream out(report_path);
    if (!out) throw Error(ErrorCategory::Io, "cannot open " + report_path.string() + " for writing");
    out << result.report.to_json(set).dump(2) << '\n';
    if (!out) throw Error(ErrorCategory::Io, "write to " + report_path.string() + " failed");
}

}  // namespace qonet
