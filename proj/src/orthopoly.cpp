#include "qonet/orthopoly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>

namespace qonet {

const char* to_string(FamilyKind kind) {
    return kind == FamilyKind::ShiftedLegendre ? "shifted_legendre" : "monomial";
}

FamilyKind family_kind_from_string(const std::string& name) {
    if (name == "shifted_legendre" || name == "legendre") return FamilyKind::ShiftedLegendre;
    if (name == "monomial") return FamilyKind::Monomial;
    throw Error(ErrorCategory::Config, "unknown polynomial family '" + name + "'");
}

namespace {

using wide = long double;

struct LegendreValue {
    wide p;
    wide dp;
};

// P_n(x) and P_n'(x) on (-1, 1) from the three-term recurrence.
LegendreValue legendre(int n, wide x) {
    wide p_prev = 1.0L;
    wide p = x;
    for (int k = 1; k < n; ++k) {
        const wide next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1);
        p_prev = p;
        p = next;
    }
    const wide dp = n * (x * p - p_prev) / (x * x - 1.0L);
    return {p, dp};
}

// The unique root of P_n inside (a, b): Newton, falling back to bisection whenever a step leaves
// the bracket.
wide bracketed_root(int n, wide a, wide b) {
    wide fa = legendre(n, a).p;
    wide x = 0.5L * (a + b);
    for (int iter = 0; iter < 200; ++iter) {
        const auto [f, df] = legendre(n, x);
        if (f == 0.0L) return x;
        if ((f < 0) == (fa < 0)) {
            a = x;
            fa = f;
        } else {
            b = x;
        }
        wide next = x - f / df;
        if (!(next > a && next < b)) next = 0.5L * (a + b);
        const wide step = std::abs(next - x);
        x = next;
        if (step <= 4.0L * std::numeric_limits<wide>::epsilon() * std::max<wide>(1.0L, std::abs(x))) return x;
        if (b - a <= 4.0L * std::numeric_limits<wide>::epsilon()) return 0.5L * (a + b);
    }
    throw Error(ErrorCategory::Convergence, "Legendre root iteration did not converge for degree " + std::to_string(n));
}

std::vector<wide> legendre_nodes(int n, const std::vector<wide>& previous) {
    std::vector<wide> nodes;
    nodes.reserve(static_cast<std::size_t>(n));
    // Roots of degree n interlace those of degree n-1.
    wide lo = -1.0L;
    for (int j = 0; j < n; ++j) {
        const wide hi = j < n - 1 ? previous[static_cast<std::size_t>(j)] : 1.0L;
        nodes.push_back(bracketed_root(n, lo, hi));
        lo = hi;
    }
    return nodes;
}

std::vector<double> to_unit_interval(const std::vector<wide>& nodes) {
    const std::size_t n = nodes.size();
    std::vector<double> out(n);
    // Compute the lower half and mirror it so the table is exactly symmetric about 1/2.
    for (std::size_t j = 0; j < n / 2; ++j) {
        const wide y = 0.5L * (nodes[j] + 1.0L);
        out[j] = static_cast<double>(y);
        out[n - 1 - j] = static_cast<double>(1.0L - y);
    }
    if (n % 2 == 1) out[n / 2] = 0.5;
    return out;
}

}  // namespace

std::vector<double> roots(FamilyKind kind, int degree) {
    if (degree < 0) throw Error(ErrorCategory::Config, "degree must be nonnegative");
    if (kind == FamilyKind::Monomial) return std::vector<double>(static_cast<std::size_t>(degree), 0.0);
    std::vector<wide> nodes;
    for (int n = 1; n <= degree; ++n) nodes = legendre_nodes(n, nodes);
    return to_unit_interval(nodes);
}

PolynomialFamily::PolynomialFamily(FamilyKind kind, int max_degree) : kind_(kind), max_degree_(max_degree) {
    if (max_degree < 0) throw Error(ErrorCategory::Config, "max_degree must be nonnegative");
    roots_by_degree_.resize(static_cast<std::size_t>(max_degree) + 1);
    leading_by_degree_.resize(static_cast<std::size_t>(max_degree) + 1, 1.0);
    std::vector<wide> nodes;
    for (int n = 1; n <= max_degree; ++n) {
        if (kind == FamilyKind::ShiftedLegendre) {
            nodes = legendre_nodes(n, nodes);
            roots_by_degree_[static_cast<std::size_t>(n)] = to_unit_interval(nodes);
            // C(2n, n), built incrementally: C(2n, n) = C(2n-2, n-1) * (2n)(2n-1) / n^2
            leading_by_degree_[static_cast<std::size_t>(n)] =
                leading_by_degree_[static_cast<std::size_t>(n) - 1] * (2.0 * n) * (2.0 * n - 1.0) / (1.0 * n * n);
        } else {
            roots_by_degree_[static_cast<std::size_t>(n)].assign(static_cast<std::size_t>(n), 0.0);
        }
    }
}

void PolynomialFamily::check_degree(int degree) const {
    if (degree < 0 || degree > max_degree_) {
        throw Error(ErrorCategory::Config,
                    "degree " + std::to_string(degree) + " outside [0, " + std::to_string(max_degree_) + "]");
    }
}

std::span<const double> PolynomialFamily::roots(int degree) const {
    check_degree(degree);
    return roots_by_degree_[static_cast<std::size_t>(degree)];
}

double PolynomialFamily::leading_coefficient(int degree) const {
    check_degree(degree);
    return leading_by_degree_[static_cast<std::size_t>(degree)];
}

// ---------------------------------------------------------------------------
// Expansions
// ---------------------------------------------------------------------------

QuasiOptimalExpansion::QuasiOptimalExpansion(QuasiOptimalIndexSet index_set, std::vector<double> coeffs,
                                             PolynomialFamily family, bool check_bound)
    : index_set_(std::move(index_set)), coeffs_(std::move(coeffs)), family_(std::move(family)) {
    if (coeffs_.size() != index_set_.size()) {
        throw Error(ErrorCategory::Dimension, "one coefficient per index is required");
    }
    for (std::size_t k = 0; k < coeffs_.size(); ++k) {
        const auto& nu = index_set_[k];
        for (int i = 0; i < nu.dim(); ++i) {
            if (nu[i] > family_.max_degree()) {
                throw Error(ErrorCategory::Config, "index " + to_string(nu) + " exceeds the family degree cap");
            }
        }
        if (!std::isfinite(coeffs_[k])) throw Error(ErrorCategory::Numerical, "non-finite coefficient");
        if (check_bound && std::abs(coeffs_[k]) > std::exp(-index_set_.bound_values()[k]) * (1.0 + 1e-12)) {
            throw Error(ErrorCategory::Config, "coefficient of " + to_string(nu) + " violates |c| <= exp(-b)");
        }
    }
}

QuasiOptimalExpansion QuasiOptimalExpansion::truncated(std::size_t M) const {
    return QuasiOptimalExpansion(index_set_.prefix(M), std::vector<double>(coeffs_.begin(), coeffs_.begin() + M),
                                 family_, false);
}

nlohmann::json QuasiOptimalExpansion::to_json() const {
    nlohmann::json doc;
    doc["family"] = to_string(family_.kind());
    doc["d"] = dim();
    doc["bound"] = index_set_.bound().to_json();
    auto& terms = doc["terms"] = nlohmann::json::array();
    for (std::size_t k = 0; k < coeffs_.size(); ++k) {
        const auto& nu = index_set_[k];
        terms.push_back({{"nu", std::vector<int>(nu.degrees().begin(), nu.degrees().end())}, {"c", coeffs_[k]}});
    }
    return doc;
}

QuasiOptimalExpansion QuasiOptimalExpansion::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("/", "expansion must be a JSON object");
    for (const char* key : {"family", "d", "terms", "bound"}) {
        if (!doc.contains(key)) throw ParseError(std::string("/") + key, std::string("missing field '") + key + "'");
    }
    const BoundFunction bound = BoundFunction::from_json(doc["bound"]);
    if (doc["d"].get<int>() != bound.dim()) throw ParseError("/d", "field 'd' disagrees with the bound dimension");
    std::vector<MultiIndex> indices;
    std::vector<double> coeffs;
    for (std::size_t k = 0; k < doc["terms"].size(); ++k) {
        const auto& t = doc["terms"][k];
        const std::string where = "/terms/" + std::to_string(k);
        if (!t.contains("nu")) throw ParseError(where + "/nu", "missing field 'nu'");
        if (!t.contains("c") || !t["c"].is_number()) throw ParseError(where + "/c", "missing field 'c'");
        indices.emplace_back(t["nu"].get<std::vector<int>>());
        if (indices.back().dim() != bound.dim()) throw ParseError(where + "/nu", "index dimension mismatch");
        coeffs.push_back(t["c"].get<double>());
    }
    int max_deg = kDefaultMaxDegree;
    for (const auto& nu : indices) {
        for (int v : nu.degrees()) max_deg = std::max(max_deg, v);
    }
    return QuasiOptimalExpansion(QuasiOptimalIndexSet(bound, std::move(indices)), std::move(coeffs),
                                 PolynomialFamily(family_kind_from_string(doc["family"].get<std::string>()), max_deg),
                                 false);
}

std::vector<double> synthetic_coefficients(const QuasiOptimalIndexSet& set, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::vector<double> c;
    c.reserve(set.size());
    for (double b : set.bound_values()) {
        const double sign = (gen() >> 63) ? -1.0 : 1.0;
        c.push_back(sign * std::exp(-b));
    }
    return c;
}

QuasiOptimalExpansion synthetic_target(const BoundFunction& b, const PolynomialFamily& family, double L,
                                       std::uint64_t seed) {
    return synthetic_expansion(enumerate_sublevel(b, L), family, seed);
}

QuasiOptimalExpansion synthetic_expansion(const QuasiOptimalIndexSet& set, const PolynomialFamily& family,
                                          std::uint64_t seed) {
    return QuasiOptimalExpansion(set, synthetic_coefficients(set, seed), family, true);
}

void write_root_table_csv(std::ostream& os, const PolynomialFamily& family) {
    os << "degree,index,root\n";
    char buf[64];
    for (int n = 1; n <= family.max_degree(); ++n) {
        const auto r = family.roots(n);
        for (std::size_t j = 0; j < r.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", r[j]);
            os << n << ',' << j << ',' << buf << '\n';
        }
    }
}

}  // namespace qonet
