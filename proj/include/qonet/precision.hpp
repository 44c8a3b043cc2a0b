#pragma once

#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/float128.hpp>

namespace qonet {

/// 113-bit binary floating point, used when error budgets drop below double resolution.
using quad = boost::multiprecision::float128;

enum class EvalPrecision { Double, Quad };

/// Budgets below this are measured in quad precision.
inline constexpr double kDoublePrecisionFloor = 1e-9;
/// Budgets below this cannot be resolved even in quad precision.
inline constexpr double kQuadPrecisionFloor = 1e-30;

inline const char* to_string(EvalPrecision p) { return p == EvalPrecision::Double ? "double" : "quad"; }

template <typename Scalar>
double to_double(const Scalar& x) {
    return static_cast<double>(x);
}

}  // namespace qonet
