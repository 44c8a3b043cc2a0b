#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qonet/error.hpp"

namespace qonet {

/// A d-tuple of nonnegative polynomial degrees. Ordered lexicographically.
class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> degrees);
    MultiIndex(std::initializer_list<int> degrees) : MultiIndex(std::vector<int>(degrees)) {}

    static MultiIndex zero(int d) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(d), 0)); }

    int dim() const noexcept { return static_cast<int>(degrees_.size()); }
    int operator[](int i) const { return degrees_[static_cast<std::size_t>(i)]; }
    std::span<const int> degrees() const noexcept { return degrees_; }
    int l1() const noexcept;
    bool is_zero() const noexcept { return l1() == 0; }

    MultiIndex incremented(int i) const;

    auto operator<=>(const MultiIndex&) const = default;
    bool operator==(const MultiIndex&) const = default;

private:
    std::vector<int> degrees_;
};

struct MultiIndexHash {
    std::size_t operator()(const MultiIndex& nu) const noexcept;
};

std::string to_string(const MultiIndex& nu);

enum class BoundKind { TaylorAnisotropic, LegendreAnisotropic, IsotropicLinear, Custom };

/// Which polynomial prefactor the Legendre coefficient bound uses.
enum class LegendrePrefactor {
    OddShifted,  ///< prod (2 nu_i + 1)
    Literal,     ///< prod |2 nu_i - 1|
};

/// Global linear bounds  c_low |nu|_1 - offset_low <= b(nu) <= c_high |nu|_1 + offset_high,
/// valid for every nu (not only asymptotically). Offsets are zero for the linear kinds.
struct GrowthConstants {
    double c_low = 1.0;
    double c_high = 1.0;
    double offset_low = 0.0;
    double offset_high = 0.0;
};

/// Exponent b(nu) of a coefficient bound |c_nu| <= exp(-b(nu)), normalized so b(0) = 0.
class BoundFunction {
public:
    using Callable = std::function<double(std::span<const int>)>;

    static BoundFunction isotropic(int d);
    static BoundFunction taylor(std::vector<double> rho);
    static BoundFunction legendre(std::vector<double> rho,
                                  LegendrePrefactor prefactor = LegendrePrefactor::OddShifted);
    /// User hook. The callable must satisfy b(0) = 0; `monotone` declares coordinate monotonicity.
    static BoundFunction custom(int d, Callable fn, GrowthConstants growth, bool monotone,
                                std::string name = "custom");

    double operator()(std::span<const int> nu) const;
    double operator()(const MultiIndex& nu) const { return (*this)(nu.degrees()); }

    int dim() const noexcept { return dim_; }
    BoundKind kind() const noexcept { return kind_; }
    const std::vector<double>& rho() const noexcept { return rho_; }
    double log_c() const noexcept { return log_c_; }
    const GrowthConstants& growth() const noexcept { return growth_; }
    bool coordinate_monotone() const noexcept { return monotone_; }
    LegendrePrefactor legendre_prefactor() const noexcept { return prefactor_; }
    std::string id() const;

    nlohmann::json to_json() const;
    static BoundFunction from_json(const nlohmann::json& doc);

private:
    BoundFunction() = default;
    void build_legendre_tables();
    double legendre_term(int dim, int n) const;

    BoundKind kind_ = BoundKind::IsotropicLinear;
    int dim_ = 0;
    std::vector<double> rho_;
    std::vector<double> log_rho_;
    double log_c_ = 0.0;
    GrowthConstants growth_;
    bool monotone_ = true;
    LegendrePrefactor prefactor_ = LegendrePrefactor::OddShifted;
    std::string name_;
    Callable custom_;
    // Legendre envelope: per dimension, suffix minima of the raw term up to the point where it
    // becomes increasing, and the value at 0 that is subtracted.
    std::vector<std::vector<double>> envelope_;
    std::vector<double> envelope_zero_;
};

inline double eval_bound(const BoundFunction& b, const MultiIndex& nu) { return b(nu); }

/// Ordering key: b rounded to a 1e-10 grid, so exact-arithmetic ties compare equal.
std::int64_t bound_key(double b);

/// Total order used everywhere an index set is ranked: (rounded b, lexicographic degrees).
bool ranks_before(std::int64_t key_a, const MultiIndex& a, std::int64_t key_b, const MultiIndex& b);

inline constexpr std::size_t kDefaultEnumerationCap = 100'000'000;

/// The M indices with smallest b, in rank order.
class QuasiOptimalIndexSet {
public:
    QuasiOptimalIndexSet(BoundFunction bound, std::vector<MultiIndex> indices);

    const BoundFunction& bound() const noexcept { return bound_; }
    const std::vector<MultiIndex>& indices() const noexcept { return indices_; }
    const std::vector<double>& bound_values() const noexcept { return bvalues_; }
    const MultiIndex& operator[](std::size_t i) const { return indices_[i]; }
    std::size_t size() const noexcept { return indices_.size(); }
    std::size_t M() const noexcept { return indices_.size(); }
    int dim() const noexcept { return bound_.dim(); }
    double threshold_J() const noexcept { return threshold_j_; }
    bool contains(const MultiIndex& nu) const;
    bool contains(std::span<const int> nu) const;
    /// First M indices, still in rank order.
    QuasiOptimalIndexSet prefix(std::size_t M) const;

    nlohmann::json to_json() const;
    static QuasiOptimalIndexSet from_json(const nlohmann::json& doc, const BoundFunction& bound);

private:
    BoundFunction bound_;
    std::vector<MultiIndex> indices_;
    std::vector<double> bvalues_;
    std::vector<MultiIndex> sorted_;  // lexicographic, for membership
    double threshold_j_ = 0.0;
};

QuasiOptimalIndexSet enumerate_quasi_optimal(const BoundFunction& b, std::size_t M,
                                             std::size_t cap = kDefaultEnumerationCap);

/// Every nu with b(nu) <= level, in rank order. Requires a coordinate-monotone b.
QuasiOptimalIndexSet enumerate_sublevel(const BoundFunction& b, double level,
                                        std::size_t cap = kDefaultEnumerationCap);

/// Visits every nu >= 0 with b(nu) <= level (depth-first, unordered). Returns the count.
std::size_t for_each_in_sublevel(const BoundFunction& b, double level,
                                 const std::function<void(std::span<const int>, double)>& visit,
                                 std::size_t cap = kDefaultEnumerationCap);

struct PVolumeEstimate {
    double value = 0.0;
    double tau = 0.0;
    std::size_t lattice_count = 0;
    bool extrapolated = false;
    std::size_t lattice_count_2tau = 0;  // only when extrapolated
};

/// Largest tau <= 512 (by halving, not below 8) whose count at 2 tau stays near 2e7.
double default_tau(const BoundFunction& b);

PVolumeEstimate estimate_P_volume(const BoundFunction& b, double tau, bool extrapolate = true,
                                  std::size_t cap = kDefaultEnumerationCap);

double compute_J(const QuasiOptimalIndexSet& set);

enum class JIntervalStatus { Inside, BelowAsymptoticRegime, AboveInterval };

struct JIntervalDiagnostic {
    double J = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    JIntervalStatus status = JIntervalStatus::Inside;
    bool pvol_at_most_one = false;  // the interval argument assumes |P| > 1
    std::string message;
};

JIntervalDiagnostic j_interval_diagnostic(const QuasiOptimalIndexSet& set, double pvol, double epsilon);

struct TailSum {
    double partial = 0.0;          // sum of exp(-b) over nu outside the set with b <= L
    double remainder_bound = 0.0;  // majorant for b > L plus a rounding allowance on partial
    double cutoff = 0.0;
    double upper() const noexcept { return partial + remainder_bound; }
};

TailSum tail_sum(const BoundFunction& b, const QuasiOptimalIndexSet& set, double L,
                 std::size_t cap = kDefaultEnumerationCap);

/// Cutoff used when callers do not pick one: J + 40 / c_low plus the growth offset.
double default_tail_cutoff(const QuasiOptimalIndexSet& set);

double tail_constant_Cu(double epsilon);

struct QuasiTailBoundReport {
    double tail_upper = 0.0;
    double bound = 0.0;
    double ratio = 0.0;
    double Cu = 0.0;
    bool asserted = false;  // M >= asymptotic threshold
    bool holds = false;     // tail_upper <= bound
    bool passes = true;     // holds, or not asserted
};

QuasiTailBoundReport check_quasi_tail_bound(const BoundFunction& b, const QuasiOptimalIndexSet& set,
                                            double pvol, double epsilon,
                                            std::size_t asymptotic_threshold = 1,
                                            std::optional<double> cutoff = std::nullopt);

struct GrowthCheck {
    bool zero_at_origin = false;
    bool monotone_on_sample = false;
    bool linear_bounds_on_sample = false;
    bool ok() const noexcept { return zero_at_origin && monotone_on_sample && linear_bounds_on_sample; }
};

/// Samples indices with |nu|_1 = level and checks b(0) = 0, monotonicity and the growth constants.
GrowthCheck check_bound_assumptions(const BoundFunction& b, int level = 200, std::size_t samples = 500,
                                    std::uint64_t seed = 7);

}  // namespace qonet
