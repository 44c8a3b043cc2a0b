#include "qonet/multiindex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>
#include <unordered_set>

#include "qonet/error.hpp"

namespace qonet {

// ---------------------------------------------------------------------------
// MultiIndex
// ---------------------------------------------------------------------------

MultiIndex::MultiIndex(std::vector<int> degrees) : degrees_(std::move(degrees)) {
    for (int v : degrees_) {
        if (v < 0) throw Error(ErrorCategory::Config, "multi-index component must be nonnegative");
    }
}

int MultiIndex::l1() const noexcept { return std::accumulate(degrees_.begin(), degrees_.end(), 0); }

MultiIndex MultiIndex::incremented(int i) const {
    MultiIndex out = *this;
    ++out.degrees_.at(static_cast<std::size_t>(i));
    return out;
}

std::size_t MultiIndexHash::operator()(const MultiIndex& nu) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (int v : nu.degrees()) {
        h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

std::string to_string(const MultiIndex& nu) {
    std::ostringstream os;
    os << '(';
    for (int i = 0; i < nu.dim(); ++i) os << (i ? "," : "") << nu[i];
    os << ')';
    return os.str();
}

std::int64_t bound_key(double b) { return std::llround(b * 1e10); }

bool ranks_before(std::int64_t key_a, const MultiIndex& a, std::int64_t key_b, const MultiIndex& b) {
    if (key_a != key_b) return key_a < key_b;
    return a < b;
}

// ---------------------------------------------------------------------------
// BoundFunction
// ---------------------------------------------------------------------------

namespace {

void require_rho(const std::vector<double>& rho) {
    if (rho.empty()) throw Error(ErrorCategory::Config, "rho must have at least one entry");
    for (double r : rho) {
        if (!std::isfinite(r) || r <= 1.0) {
            throw Error(ErrorCategory::Config, "every rho_i must be finite and > 1");
        }
    }
}

double legendre_raw(double log_rho, LegendrePrefactor pf, int n) {
    const double prefactor = pf == LegendrePrefactor::OddShifted ? 2.0 * n + 1.0 : std::abs(2.0 * n - 1.0);
    return n * log_rho - std::log(prefactor);
}

}  // namespace

BoundFunction BoundFunction::isotropic(int d) {
    if (d < 1) throw Error(ErrorCategory::Config, "dimension must be >= 1");
    BoundFunction b;
    b.kind_ = BoundKind::IsotropicLinear;
    b.dim_ = d;
    b.rho_.assign(static_cast<std::size_t>(d), std::exp(1.0));
    b.log_rho_.assign(static_cast<std::size_t>(d), 1.0);
    b.growth_ = {1.0, 1.0, 0.0, 0.0};
    return b;
}

BoundFunction BoundFunction::taylor(std::vector<double> rho) {
    require_rho(rho);
    BoundFunction b;
    b.kind_ = BoundKind::TaylorAnisotropic;
    b.dim_ = static_cast<int>(rho.size());
    b.rho_ = std::move(rho);
    for (double r : b.rho_) b.log_rho_.push_back(std::log(r));
    const auto [lo, hi] = std::minmax_element(b.log_rho_.begin(), b.log_rho_.end());
    b.growth_ = {*lo, *hi, 0.0, 0.0};
    return b;
}

BoundFunction BoundFunction::legendre(std::vector<double> rho, LegendrePrefactor prefactor) {
    require_rho(rho);
    BoundFunction b;
    b.kind_ = BoundKind::LegendreAnisotropic;
    b.dim_ = static_cast<int>(rho.size());
    b.rho_ = std::move(rho);
    b.prefactor_ = prefactor;
    for (double r : b.rho_) b.log_rho_.push_back(std::log(r));
    b.build_legendre_tables();
    return b;
}

BoundFunction BoundFunction::custom(int d, Callable fn, GrowthConstants growth, bool monotone, std::string name) {
    if (d < 1) throw Error(ErrorCategory::Config, "dimension must be >= 1");
    if (!fn) throw Error(ErrorCategory::Config, "custom bound needs a callable");
    if (!(growth.c_low > 0.0) || growth.c_high < growth.c_low || growth.offset_low < 0.0 ||
        growth.offset_high < 0.0) {
        throw Error(ErrorCategory::Config, "custom bound needs 0 < c_low <= c_high and nonnegative offsets");
    }
    BoundFunction b;
    b.kind_ = BoundKind::Custom;
    b.dim_ = d;
    b.custom_ = std::move(fn);
    b.growth_ = growth;
    b.monotone_ = monotone;
    b.name_ = std::move(name);
    std::vector<int> zero(static_cast<std::size_t>(d), 0);
    if (std::abs(b.custom_(zero)) > 1e-12) throw Error(ErrorCategory::Config, "custom bound must satisfy b(0) = 0");
    return b;
}

// The raw Legendre term n ln(rho) - ln(prefactor(n)) dips below its value at 0 when rho < 3.
// We use its nonincreasing-from-the-right envelope G(n) = min_{m >= n} raw(m), then subtract G(0).
// Past the turning point K the raw term is increasing (convex), so G(n) = raw(n) for n >= K.
void BoundFunction::build_legendre_tables() {
    envelope_.clear();
    envelope_zero_.clear();
    const double c_low = 0.5 * *std::min_element(log_rho_.begin(), log_rho_.end());
    const double c_high = *std::max_element(log_rho_.begin(), log_rho_.end());
    double off_low = 0.0;
    double off_high = 0.0;
    double fold = 0.0;

    for (std::size_t i = 0; i < log_rho_.size(); ++i) {
        const double lr = log_rho_[i];
        auto raw = [&](int n) { return legendre_raw(lr, prefactor_, n); };
        int K = 1;
        while (raw(K + 1) < raw(K)) ++K;
        std::vector<double> env(static_cast<std::size_t>(K) + 1);
        env[static_cast<std::size_t>(K)] = raw(K);
        for (int n = K - 1; n >= 0; --n) {
            env[static_cast<std::size_t>(n)] = std::min(raw(n), env[static_cast<std::size_t>(n) + 1]);
        }
        const double g0 = env[0];
        envelope_.push_back(std::move(env));
        envelope_zero_.push_back(g0);
        fold -= g0;

        auto term = [&](int n) { return legendre_term(static_cast<int>(i), n); };
        // c_low n - term(n) and term(n) - c_high n are concave past K: scan to their first decrease.
        double best_low = 0.0;
        double best_high = 0.0;
        double prev_low = -INFINITY;
        double prev_high = -INFINITY;
        for (int n = 0;; ++n) {
            const double t = term(n);
            const double lo = c_low * n - t;
            const double hi = t - c_high * n;
            best_low = std::max(best_low, lo);
            best_high = std::max(best_high, hi);
            if (n > K + 1 && lo < prev_low && hi <= prev_high) break;
            prev_low = lo;
            prev_high = hi;
        }
        off_low += best_low;
        off_high += best_high;
    }
    growth_ = {c_low, c_high, off_low + 1e-12, off_high + 1e-12};
    log_c_ = fold;
}

double BoundFunction::legendre_term(int dim, int n) const {
    const auto& env = envelope_[static_cast<std::size_t>(dim)];
    const double g = static_cast<std::size_t>(n) < env.size()
                         ? env[static_cast<std::size_t>(n)]
                         : legendre_raw(log_rho_[static_cast<std::size_t>(dim)], prefactor_, n);
    return g - envelope_zero_[static_cast<std::size_t>(dim)];
}

double BoundFunction::operator()(std::span<const int> nu) const {
    if (static_cast<int>(nu.size()) != dim_) {
        throw Error(ErrorCategory::Dimension, "multi-index has dimension " + std::to_string(nu.size()) +
                                                  " but bound expects " + std::to_string(dim_));
    }
    switch (kind_) {
        case BoundKind::IsotropicLinear: {
            double s = 0.0;
            for (int v : nu) s += v;
            return s;
        }
        case BoundKind::TaylorAnisotropic: {
            double s = 0.0;
            for (std::size_t i = 0; i < nu.size(); ++i) s += nu[i] * log_rho_[i];
            return s;
        }
        case BoundKind::LegendreAnisotropic: {
            double s = 0.0;
            for (std::size_t i = 0; i < nu.size(); ++i) s += legendre_term(static_cast<int>(i), nu[i]);
            return s;
        }
        case BoundKind::Custom:
            return custom_(nu);
    }
    return 0.0;
}

std::string BoundFunction::id() const {
    std::ostringstream os;
    switch (kind_) {
        case BoundKind::IsotropicLinear: os << "isotropic[d=" << dim_ << "]"; return os.str();
        case BoundKind::TaylorAnisotropic: os << "taylor"; break;
        case BoundKind::LegendreAnisotropic:
            os << (prefactor_ == LegendrePrefactor::Literal ? "legendre-literal" : "legendre");
            break;
        case BoundKind::Custom: return name_;
    }
    os << '[';
    for (std::size_t i = 0; i < rho_.size(); ++i) os << (i ? "," : "") << rho_[i];
    os << ']';
    return os.str();
}

nlohmann::json BoundFunction::to_json() const {
    nlohmann::json doc;
    switch (kind_) {
        case BoundKind::IsotropicLinear: doc["kind"] = "isotropic"; break;
        case BoundKind::TaylorAnisotropic: doc["kind"] = "taylor"; break;
        case BoundKind::LegendreAnisotropic: doc["kind"] = "legendre"; break;
        case BoundKind::Custom: doc["kind"] = "custom"; break;
    }
    doc["rho"] = rho_;
    doc["logC"] = log_c_;
    doc["d"] = dim_;
    if (kind_ == BoundKind::LegendreAnisotropic) {
        doc["prefactor"] = prefactor_ == LegendrePrefactor::Literal ? "literal" : "odd_shifted";
    }
    if (kind_ == BoundKind::Custom) doc["name"] = name_;
    return doc;
}

BoundFunction BoundFunction::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("/", "bound must be a JSON object");
    if (!doc.contains("kind") || !doc["kind"].is_string()) throw ParseError("/kind", "missing field 'kind'");
    const std::string kind = doc["kind"].get<std::string>();
    auto read_rho = [&]() {
        if (!doc.contains("rho") || !doc["rho"].is_array()) throw ParseError("/rho", "missing field 'rho'");
        std::vector<double> rho;
        for (std::size_t i = 0; i < doc["rho"].size(); ++i) {
            const auto& v = doc["rho"][i];
            if (!v.is_number()) throw ParseError("/rho/" + std::to_string(i), "rho entries must be numbers");
            rho.push_back(v.get<double>());
        }
        return rho;
    };
    BoundFunction b;
    if (kind == "isotropic") {
        int d = 0;
        if (doc.contains("d")) {
            if (!doc["d"].is_number_integer()) throw ParseError("/d", "field 'd' must be an integer");
            d = doc["d"].get<int>();
        } else {
            d = static_cast<int>(read_rho().size());
        }
        b = isotropic(d);
    } else if (kind == "taylor") {
        b = taylor(read_rho());
    } else if (kind == "legendre") {
        LegendrePrefactor pf = LegendrePrefactor::OddShifted;
        if (doc.contains("prefactor")) {
            const auto p = doc["prefactor"].get<std::string>();
            if (p == "literal") pf = LegendrePrefactor::Literal;
            else if (p != "odd_shifted") throw ParseError("/prefactor", "unknown prefactor '" + p + "'");
        }
        b = legendre(read_rho(), pf);
        return b;  // logC is derived from the envelope
    } else if (kind == "custom") {
        throw ParseError("/kind", "custom bounds carry a callable and cannot be loaded from JSON");
    } else {
        throw ParseError("/kind", "unknown bound kind '" + kind + "'");
    }
    if (doc.contains("logC")) {
        if (!doc["logC"].is_number()) throw ParseError("/logC", "field 'logC' must be a number");
        b.log_c_ = doc["logC"].get<double>();
    }
    return b;
}

// ---------------------------------------------------------------------------
// Index sets
// ---------------------------------------------------------------------------

QuasiOptimalIndexSet::QuasiOptimalIndexSet(BoundFunction bound, std::vector<MultiIndex> indices)
    : bound_(std::move(bound)), indices_(std::move(indices)) {
    bvalues_.reserve(indices_.size());
    for (const auto& nu : indices_) {
        bvalues_.push_back(bound_(nu));
        threshold_j_ = std::max(threshold_j_, bvalues_.back());
    }
    sorted_ = indices_;
    std::sort(sorted_.begin(), sorted_.end());
}

bool QuasiOptimalIndexSet::contains(const MultiIndex& nu) const {
    return std::binary_search(sorted_.begin(), sorted_.end(), nu);
}

bool QuasiOptimalIndexSet::contains(std::span<const int> nu) const {
    auto it = std::lower_bound(sorted_.begin(), sorted_.end(), nu, [](const MultiIndex& a, std::span<const int> b) {
        return std::lexicographical_compare(a.degrees().begin(), a.degrees().end(), b.begin(), b.end());
    });
    return it != sorted_.end() && std::equal(it->degrees().begin(), it->degrees().end(), nu.begin(), nu.end());
}

QuasiOptimalIndexSet QuasiOptimalIndexSet::prefix(std::size_t M) const {
    if (M > indices_.size()) throw Error(ErrorCategory::Config, "prefix longer than the index set");
    return QuasiOptimalIndexSet(bound_, std::vector<MultiIndex>(indices_.begin(), indices_.begin() + M));
}

nlohmann::json QuasiOptimalIndexSet::to_json() const {
    nlohmann::json doc;
    doc["M"] = indices_.size();
    doc["J"] = threshold_j_;
    doc["bound"] = bound_.id();
    auto& arr = doc["indices"] = nlohmann::json::array();
    for (const auto& nu : indices_) arr.push_back(std::vector<int>(nu.degrees().begin(), nu.degrees().end()));
    return doc;
}

QuasiOptimalIndexSet QuasiOptimalIndexSet::from_json(const nlohmann::json& doc, const BoundFunction& bound) {
    if (!doc.is_object() || !doc.contains("indices") || !doc["indices"].is_array()) {
        throw ParseError("/indices", "missing field 'indices'");
    }
    std::vector<MultiIndex> indices;
    for (std::size_t i = 0; i < doc["indices"].size(); ++i) {
        const auto& row = doc["indices"][i];
        const std::string where = "/indices/" + std::to_string(i);
        if (!row.is_array()) throw ParseError(where, "index must be an array");
        std::vector<int> deg;
        for (const auto& v : row) {
            if (!v.is_number_integer()) throw ParseError(where, "degrees must be integers");
            deg.push_back(v.get<int>());
        }
        if (static_cast<int>(deg.size()) != bound.dim()) throw ParseError(where, "index dimension mismatch");
        indices.emplace_back(std::move(deg));
    }
    if (doc.contains("M") && doc["M"].get<std::size_t>() != indices.size()) {
        throw ParseError("/M", "field 'M' disagrees with the number of indices");
    }
    return QuasiOptimalIndexSet(bound, std::move(indices));
}

namespace {

void require_monotone(const BoundFunction& b) {
    if (!b.coordinate_monotone()) {
        throw Error(ErrorCategory::Config, "enumeration requires a coordinate-monotone bound");
    }
}

struct RankedIndex {
    std::int64_t key;
    MultiIndex nu;
};

struct RankedAfter {
    bool operator()(const RankedIndex& a, const RankedIndex& b) const { return ranks_before(b.key, b.nu, a.key, a.nu); }
};

}  // namespace

QuasiOptimalIndexSet enumerate_quasi_optimal(const BoundFunction& b, std::size_t M, std::size_t cap) {
    if (M < 1) throw Error(ErrorCategory::Config, "M must be >= 1");
    require_monotone(b);
    const int d = b.dim();

    // Best-first frontier: every index is ranked after all of its componentwise predecessors, so
    // popping in (key, lex) order reproduces the global order.
    std::priority_queue<RankedIndex, std::vector<RankedIndex>, RankedAfter> frontier;
    std::unordered_set<MultiIndex, MultiIndexHash> seen;
    MultiIndex origin = MultiIndex::zero(d);
    frontier.push({bound_key(b(origin)), origin});
    seen.insert(origin);

    std::vector<MultiIndex> out;
    out.reserve(M);
    while (out.size() < M) {
        RankedIndex top = frontier.top();
        frontier.pop();
        for (int i = 0; i < d; ++i) {
            MultiIndex next = top.nu.incremented(i);
            if (seen.insert(next).second) {
                if (seen.size() > cap) {
                    throw Error(ErrorCategory::Resource, "index enumeration exceeded the cap of " + std::to_string(cap));
                }
                const std::int64_t key = bound_key(b(next));
                frontier.push({key, std::move(next)});
            }
        }
        out.push_back(std::move(top.nu));
    }
    return QuasiOptimalIndexSet(b, std::move(out));
}

std::size_t for_each_in_sublevel(const BoundFunction& b, double level,
                                 const std::function<void(std::span<const int>, double)>& visit, std::size_t cap) {
    require_monotone(b);
    const int d = b.dim();
    const std::int64_t level_key = bound_key(level);
    std::vector<int> nu(static_cast<std::size_t>(d), 0);
    std::size_t count = 0;

    // Coordinate i is advanced while the point (prefix, n, 0, ..., 0) stays in the set;
    // monotonicity makes every extension of a rejected prefix rejected too.
    std::function<void(int)> walk = [&](int i) {
        for (int n = 0;; ++n) {
            nu[static_cast<std::size_t>(i)] = n;
            const double value = b(nu);
            if (bound_key(value) > level_key) break;
            if (i == d - 1) {
                if (++count > cap) {
                    throw Error(ErrorCategory::Resource,
                                "lattice count exceeded the cap of " + std::to_string(cap));
                }
                if (visit) visit(nu, value);
            } else {
                walk(i + 1);
            }
        }
        nu[static_cast<std::size_t>(i)] = 0;
    };
    walk(0);
    return count;
}

QuasiOptimalIndexSet enumerate_sublevel(const BoundFunction& b, double level, std::size_t cap) {
    std::vector<RankedIndex> all;
    for_each_in_sublevel(
        b, level,
        [&](std::span<const int> nu, double value) {
            all.push_back({bound_key(value), MultiIndex(std::vector<int>(nu.begin(), nu.end()))});
        },
        cap);
    std::sort(all.begin(), all.end(),
              [](const RankedIndex& x, const RankedIndex& y) { return ranks_before(x.key, x.nu, y.key, y.nu); });
    std::vector<MultiIndex> out;
    out.reserve(all.size());
    for (auto& r : all) out.push_back(std::move(r.nu));
    return QuasiOptimalIndexSet(b, std::move(out));
}

// ---------------------------------------------------------------------------
// |P| and J
// ---------------------------------------------------------------------------

double default_tau(const BoundFunction& b) {
    const double probe_tau = 16.0;
    const double probe = static_cast<double>(for_each_in_sublevel(b, probe_tau, nullptr));
    const double density = probe / std::pow(probe_tau, b.dim());
    double tau = 512.0;
    while (tau > 8.0 && density * std::pow(2.0 * tau, b.dim()) > 2e7) tau /= 2.0;
    return tau;
}

PVolumeEstimate estimate_P_volume(const BoundFunction& b, double tau, bool extrapolate, std::size_t cap) {
    if (!(tau >= 1.0) || !std::isfinite(tau)) throw Error(ErrorCategory::Config, "tau must be >= 1");
    PVolumeEstimate est;
    est.tau = tau;
    est.lattice_count = for_each_in_sublevel(b, tau, nullptr, cap);
    const double coarse = static_cast<double>(est.lattice_count) / std::pow(tau, b.dim());
    est.value = coarse;
    if (extrapolate) {
        est.extrapolated = true;
        est.lattice_count_2tau = for_each_in_sublevel(b, 2.0 * tau, nullptr, cap);
        const double fine = static_cast<double>(est.lattice_count_2tau) / std::pow(2.0 * tau, b.dim());
        // count / tau^d = |P| + a / tau + O(tau^-2); the two-level combination cancels a.
        est.value = 2.0 * fine - coarse;
    }
    if (!(est.value > 0.0)) throw Error(ErrorCategory::Numerical, "volume estimate is not positive; increase tau");
    return est;
}

double compute_J(const QuasiOptimalIndexSet& set) {
    if (set.size() == 0) throw Error(ErrorCategory::Config, "J is undefined for an empty index set");
    return set.threshold_J();
}

JIntervalDiagnostic j_interval_diagnostic(const QuasiOptimalIndexSet& set, double pvol, double epsilon) {
    if (!(pvol > 0.0)) throw Error(ErrorCategory::Config, "|P| must be positive");
    if (!(epsilon > 0.0)) throw Error(ErrorCategory::Config, "epsilon must be positive");
    JIntervalDiagnostic diag;
    const double M = static_cast<double>(set.size());
    const double inv_d = 1.0 / set.dim();
    diag.J = compute_J(set);
    diag.lower = std::pow(M / (pvol * (1.0 + epsilon)), inv_d);
    diag.upper = std::pow(2.0 * M / pvol, inv_d);
    diag.pvol_at_most_one = pvol <= 1.0;
    if (diag.J < diag.lower) {
        diag.status = JIntervalStatus::BelowAsymptoticRegime;
        diag.message = "below asymptotic regime";
    } else if (diag.J > diag.upper) {
        diag.status = JIntervalStatus::AboveInterval;
        diag.message = "above interval";
    } else {
        diag.status = JIntervalStatus::Inside;
        diag.message = "inside";
    }
    if (diag.pvol_at_most_one) diag.message += " (|P| <= 1: diagnostic only)";
    return diag;
}

// ---------------------------------------------------------------------------
// Tails
// ---------------------------------------------------------------------------

namespace {

// Neumaier compensated accumulator.
struct CompensatedSum {
    double sum = 0.0;
    double c = 0.0;
    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) c += (sum - t) + x;
        else c += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + c; }
};

// sum_{k >= k0} C(k+d-1, d-1) exp(-max(L, c_low k - off_low))
double remainder_majorant(const GrowthConstants& g, int d, double L) {
    const double start = (L - g.offset_high) / g.c_high;
    long long k = start < 0.0 ? 0 : static_cast<long long>(std::floor(start)) + 1;
    auto shell = [d](long long kk) {
        double n = 1.0;
        for (int j = 1; j < d; ++j) n *= static_cast<double>(kk + j) / j;
        return n;
    };
    CompensatedSum acc;
    for (long long iter = 0; iter < 100'000'000; ++iter, ++k) {
        const double exponent = std::max(L, g.c_low * static_cast<double>(k) - g.offset_low);
        const double term = shell(k) * std::exp(-exponent);
        acc.add(term);
        if (exponent > L) {
            // Successive ratios (k+d)/(k+1) e^{-c_low} decrease in k, so the rest is a geometric tail.
            const double r = static_cast<double>(k + d) / static_cast<double>(k + 1) * std::exp(-g.c_low);
            if (r < 0.5 && term <= 1e-18 * acc.value()) {
                acc.add(term * r / (1.0 - r));
                return acc.value();
            }
            if (term == 0.0) return acc.value();
        }
    }
    throw Error(ErrorCategory::Convergence, "tail remainder series did not settle");
}

}  // namespace

TailSum tail_sum(const BoundFunction& b, const QuasiOptimalIndexSet& set, double L, std::size_t cap) {
    if (set.dim() != b.dim()) throw Error(ErrorCategory::Dimension, "bound and index set dimensions differ");
    if (set.size() > 0 && bound_key(L) < bound_key(set.threshold_J())) {
        throw Error(ErrorCategory::Config, "tail cutoff L must not be below the set threshold J");
    }
    TailSum out;
    out.cutoff = L;
    CompensatedSum acc;
    for_each_in_sublevel(
        b, L,
        [&](std::span<const int> nu, double value) {
            if (!set.contains(nu)) acc.add(std::exp(-value));
        },
        cap);
    out.partial = acc.value();
    // Covers the one-ulp error of each exp() and of the compensated sum, so upper() stays an upper bound.
    const double rounding = 2.0 * std::numeric_limits<double>::epsilon() * out.partial;
    out.remainder_bound = remainder_majorant(b.growth(), b.dim(), L) + rounding;
    return out;
}

double default_tail_cutoff(const QuasiOptimalIndexSet& set) {
    const auto& g = set.bound().growth();
    return set.threshold_J() + 40.0 / g.c_low + g.offset_low;
}

double tail_constant_Cu(double epsilon) {
    const double e = std::exp(1.0);
    return (4.0 * e + 4.0 * epsilon * e - 2.0) * e / (e - 1.0);
}

QuasiTailBoundReport check_quasi_tail_bound(const BoundFunction& b, const QuasiOptimalIndexSet& set, double pvol,
                                            double epsilon, std::size_t asymptotic_threshold,
                                            std::optional<double> cutoff) {
    if (!(pvol > 0.0)) throw Error(ErrorCategory::Config, "|P| must be positive");
    QuasiTailBoundReport r;
    const double M = static_cast<double>(set.size());
    r.tail_upper = tail_sum(b, set, cutoff.value_or(default_tail_cutoff(set))).upper();
    r.Cu = tail_constant_Cu(epsilon);
    r.bound = r.Cu * M * std::exp(-std::pow(M / (pvol * (1.0 + epsilon)), 1.0 / set.dim()));
    r.ratio = r.tail_upper / r.bound;
    r.asserted = set.size() >= asymptotic_threshold;
    r.holds = r.tail_upper <= r.bound;
    r.passes = !r.asserted || r.holds;
    return r;
}

GrowthCheck check_bound_assumptions(const BoundFunction& b, int level, std::size_t samples, std::uint64_t seed) {
    GrowthCheck out;
    const int d = b.dim();
    out.zero_at_origin = b(MultiIndex::zero(d)) == 0.0;
    out.monotone_on_sample = true;
    out.linear_bounds_on_sample = true;
    std::mt19937_64 gen(seed);
    const auto& g = b.growth();
    for (std::size_t s = 0; s < samples; ++s) {
        // Random composition of `level` into d parts.
        std::vector<int> cuts(static_cast<std::size_t>(d) - 1);
        std::uniform_int_distribution<int> pick(0, level);
        for (auto& c : cuts) c = pick(gen);
        std::sort(cuts.begin(), cuts.end());
        std::vector<int> nu(static_cast<std::size_t>(d));
        int prev = 0;
        for (int i = 0; i < d - 1; ++i) {
            nu[static_cast<std::size_t>(i)] = cuts[static_cast<std::size_t>(i)] - prev;
            prev = cuts[static_cast<std::size_t>(i)];
        }
        nu[static_cast<std::size_t>(d) - 1] = level - prev;
        const double value = b(nu);
        const double l1 = level;
        if (value < g.c_low * l1 - g.offset_low || value > g.c_high * l1 + g.offset_high) {
            out.linear_bounds_on_sample = false;
        }
        for (int i = 0; i < d; ++i) {
            auto up = nu;
            ++up[static_cast<std::size_t>(i)];
            if (bound_key(b(up)) < bound_key(value)) out.monotone_on_sample = false;
        }
    }
    return out;
}

}  // namespace qonet
