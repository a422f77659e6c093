#pragma once

// Wick-ordering coefficients and the smeared-field variance c_n^2.

#include "pphi2/error.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace pphi2 {

using BigInt = boost::multiprecision::cpp_int;

/// :x^k: = sum_{j=0}^{k/2} c_{k,j} x^{k-2j} c^{2j}, with c_{k,0} = 1.
///
/// c_{k,j} = (-1/2)^j k! / (j! (k-2j)!) = (-1)^j C(k, 2j) (2j-1)!!, always an integer.
struct WickTable {
    int degree = 0;
    std::vector<BigInt> coefficients;  ///< index j = 0..floor(k/2)

    /// c_{k,j} as an exact integer; j = 0 gives 1.
    const BigInt& exact(int j) const { return coefficients.at(j); }
    double coefficient(int j) const { return coefficients.at(j).convert_to<double>(); }

    /// Evaluates :x^k: for a Gaussian of variance c2.
    double evaluate(double x, double c2) const
    {
        double r = 0;
        for (int j = 0; j <= degree / 2; ++j) r += coefficient(j) * std::pow(x, degree - 2 * j) * std::pow(c2, j);
        return r;
    }
};

inline WickTable wick_coefficients(int k)
{
    detail::require(k >= 0, "wick: degree must be nonnegative");
    WickTable t;
    t.degree = k;
    for (int j = 0; 2 * j <= k; ++j) {
        // k! / (j! (k-2j)!) / 2^j; the quotient by 2^j is exact
        BigInt num = 1;
        for (int i = k - 2 * j + 1; i <= k; ++i) num *= i;
        BigInt den = 1;
        for (int i = 2; i <= j; ++i) den *= i;
        den <<= j;
        BigInt c = num / den;
        if (c * den != num) throw NumericalError("wick: inexact coefficient");
        t.coefficients.push_back(j % 2 == 0 ? c : BigInt(-c));
    }
    return t;
}

/// c_n^2 = (1/2pi) int_0^inf e^{-m^2 t} / sqrt(t (t + 2/n)) dt.
///
/// Integrated after t = s^2, which removes the t = 0 singularity.
inline double smearing_constant(int n, double m)
{
    detail::require(n >= 1, "smearing_constant: n must be >= 1");
    detail::require(m > 0 && std::isfinite(m), "smearing_constant: m must be positive");
    const double b = 2.0 / n;
    const double m2 = m * m;
    auto integrand = [&](double s) { return 2 * std::exp(-m2 * s * s) / std::sqrt(s * s + b); };
    boost::math::quadrature::exp_sinh<double> integrator;
    double error = 0, l1 = 0;
    const double value = integrator.integrate(integrand, 1e-14, &error, &l1);
    if (!std::isfinite(value) || error > 1e-10 * std::abs(value)) {
        throw NumericalError("smearing_constant: quadrature did not converge (error " + std::to_string(error) + ")");
    }
    return value / (2 * std::numbers::pi);
}

} // namespace pphi2
