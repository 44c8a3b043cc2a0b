#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "qonet/error.hpp"
#include "qonet/multiindex.hpp"

namespace qonet {

enum class FamilyKind { ShiftedLegendre, Monomial };

const char* to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);

inline constexpr int kDefaultMaxDegree = 64;

/// Real roots in [0,1] of the degree-n family member, ascending.
/// ShiftedLegendre: Newton iteration on the three-term recurrence, bracketed by the interlacing
/// roots of degree n-1, with bisection fallback. Monomial: 0 repeated n times.
std::vector<double> roots(FamilyKind kind, int degree);

/// One-dimensional family on [0,1] in monic factored form prod_j (y - r_j).
class PolynomialFamily {
public:
    explicit PolynomialFamily(FamilyKind kind, int max_degree = kDefaultMaxDegree);

    FamilyKind kind() const noexcept { return kind_; }
    int max_degree() const noexcept { return max_degree_; }
    std::span<const double> roots(int degree) const;
    /// Leading coefficient of the standard (unnormalized) member; C(2n, n) for shifted Legendre.
    /// Reported only: evaluation uses the monic product.
    double leading_coefficient(int degree) const;

private:
    void check_degree(int degree) const;

    FamilyKind kind_;
    int max_degree_;
    std::vector<std::vector<double>> roots_by_degree_;
    std::vector<double> leading_by_degree_;
};

template <typename Scalar>
Scalar eval_factored(const PolynomialFamily& family, int degree, const Scalar& y) {
    Scalar p(1);
    for (double r : family.roots(degree)) p *= (y - Scalar(r));
    return p;
}

template <typename Scalar, typename Derived>
Scalar eval_tensor(const PolynomialFamily& family, const MultiIndex& nu, const Eigen::MatrixBase<Derived>& y) {
    if (y.size() != nu.dim()) throw Error(ErrorCategory::Dimension, "point dimension does not match multi-index");
    Scalar p(1);
    for (int i = 0; i < nu.dim(); ++i) p *= eval_factored<Scalar>(family, nu[i], Scalar(y(i)));
    return p;
}

/// u_Q = sum over the index set of c_nu Psi_nu, with Psi_nu in monic factored form.
class QuasiOptimalExpansion {
public:
    QuasiOptimalExpansion(QuasiOptimalIndexSet index_set, std::vector<double> coeffs, PolynomialFamily family,
                          bool check_bound = true);

    const QuasiOptimalIndexSet& index_set() const noexcept { return index_set_; }
    const std::vector<double>& coefficients() const noexcept { return coeffs_; }
    const PolynomialFamily& family() const noexcept { return family_; }
    int dim() const noexcept { return index_set_.dim(); }
    std::size_t size() const noexcept { return coeffs_.size(); }

    /// The first M terms (rank order), i.e. the expansion restricted to Lambda_M.
    QuasiOptimalExpansion truncated(std::size_t M) const;

    nlohmann::json to_json() const;
    static QuasiOptimalExpansion from_json(const nlohmann::json& doc);

private:
    QuasiOptimalIndexSet index_set_;
    std::vector<double> coeffs_;
    PolynomialFamily family_;
};

template <typename Scalar, typename Derived>
Scalar eval_expansion(const QuasiOptimalExpansion& u, const Eigen::MatrixBase<Derived>& y) {
    if (y.size() != u.dim()) throw Error(ErrorCategory::Dimension, "point dimension does not match expansion");
    Scalar s(0);
    const auto& idx = u.index_set().indices();
    for (std::size_t k = 0; k < idx.size(); ++k) {
        s += Scalar(u.coefficients()[k]) * eval_tensor<Scalar>(u.family(), idx[k], y);
    }
    return s;
}

/// Coefficients s_nu exp(-b(nu)) with signs drawn in rank order from a seeded mt19937_64, so every
/// prefix of a longer set receives the same signs.
std::vector<double> synthetic_coefficients(const QuasiOptimalIndexSet& set, std::uint64_t seed);

/// Ground truth with index set {nu : b(nu) <= L} and |c_nu| = exp(-b(nu)).
QuasiOptimalExpansion synthetic_target(const BoundFunction& b, const PolynomialFamily& family, double L,
                                       std::uint64_t seed);

/// Same coefficients as synthetic_target restricted to `set`.
QuasiOptimalExpansion synthetic_expansion(const QuasiOptimalIndexSet& set, const PolynomialFamily& family,
                                          std::uint64_t seed);

/// CSV rows "degree,index,root" for every degree 1..max_degree.
void write_root_table_csv(std::ostream& os, const PolynomialFamily& family);

}  // namespace qonet
