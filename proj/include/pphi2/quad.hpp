#pragma once

// Quadruple-precision scalar for eigenvalue problems whose gaps fall below
// double and long double resolution (tunneling splittings at large lambda).

#include <boost/multiprecision/float128.hpp>

#include <Eigen/Core>

#include <limits>

namespace pphi2 {
using Quad = boost::multiprecision::float128;
} // namespace pphi2

namespace Eigen {

template <>
struct NumTraits<pphi2::Quad> : GenericNumTraits<pphi2::Quad> {
    using Real = pphi2::Quad;
    using NonInteger = Real;
    using Literal = Real;
    using Nested = Real;
    enum {
        IsComplex = 0,
        IsInteger = 0,
        IsSigned = 1,
        RequireInitialization = 1,
        ReadCost = 1,
        AddCost = 4,
        MulCost = 8
    };
    static Real epsilon() { return std::numeric_limits<Real>::epsilon(); }
    static Real dummy_precision() { return 1000 * epsilon(); }
    static Real highest() { return (std::numeric_limits<Real>::max)(); }
    static Real lowest() { return std::numeric_limits<Real>::lowest(); }
    static Real infinity() { return std::numeric_limits<Real>::infinity(); }
    static Real quiet_NaN() { return std::numeric_limits<Real>::quiet_NaN(); }
    static int digits10() { return std::numeric_limits<Real>::digits10; }
    static int digits() { return std::numeric_limits<Real>::digits; }
};

} // namespace Eigen
