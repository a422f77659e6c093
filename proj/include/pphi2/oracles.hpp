#pragma once

// Independent reference computations: one-mode Schrodinger operators on a
// finite-difference grid, Gaussian moments by quadrature, closed forms.

#include "pphi2/error.hpp"
#include "pphi2/potential.hpp"
#include "pphi2/spectral.hpp"

#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/special_functions/hermite.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace pphi2::oracle {

/// Lowest eigenvalues of -d^2/dy^2 + V(y) on [-L, L], zero boundary values,
/// three-point stencil with n interior points.
inline std::vector<double> finite_difference_spectrum(const std::function<double(double)>& v, double L, int n,
                                                      int count)
{
    detail::require(L > 0 && n >= 3 && count >= 1 && count <= n, "finite_difference_spectrum: bad grid");
    const double h = 2 * L / (n + 1);
    Vector diag(n), sub(n - 1);
    for (int i = 0; i < n; ++i) diag[i] = 2 / (h * h) + v(-L + (i + 1) * h);
    sub.setConstant(-1 / (h * h));
    Eigen::SelfAdjointEigenSolver<Matrix> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("finite_difference_spectrum: eigensolver failed");
    return {solver.eigenvalues().data(), solver.eigenvalues().data() + count};
}

/// Richardson combination (4 E_{h/2} - E_h) / 3 of two grids; O(h^4).
inline std::vector<double> extrapolated_spectrum(const std::function<double(double)>& v, double L, int n, int count)
{
    const auto coarse = finite_difference_spectrum(v, L, n, count);
    const auto fine = finite_difference_spectrum(v, L, 2 * n + 1, count);
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i) out[i] = (4 * fine[i] - coarse[i]) / 3;
    return out;
}

/// The K = 1 truncation of -L_A + V_lambda as a Schrodinger operator in y = phi_0:
///   -d^2/dy^2 + omega^2 y^2 / 4 - omega / 2 + lambda sum_n a_n lambda^{-n/2} I_n :y^n:,
/// with I_n = int e_0^n g and :y^n: = s^n He_n(y / s), s^2 = 1 / omega.
inline std::function<double(double)> one_mode_potential(const ClassicalPotential& pot, double lambda)
{
    const ModeBasis& basis = *pot.basis();
    const double omega = basis.frequency(0);
    const double sigma = 1 / std::sqrt(omega);
    const auto& a = pot.polynomial().coefficients();
    std::vector<double> weights(a.size(), 0.0);
    for (std::size_t n = 0; n < a.size(); ++n) {
        double s = 0;
        for (int j = 0; j < basis.num_nodes(); ++j)
            s += basis.weight() * pot.cutoff().samples()[j] * std::pow(basis.shapes()(j, 0), static_cast<double>(n));
        weights[n] = lambda * a[n] * std::pow(lambda, -0.5 * n) * s;
    }
    return [=](double y) {
        // probabilists' He_n from the physicists' H_n: He_n(x) = 2^{-n/2} H_n(x / sqrt 2)
        double value = 0.25 * omega * omega * y * y - 0.5 * omega;
        const double z = y / sigma;
        for (std::size_t n = 0; n < weights.size(); ++n) {
            if (weights[n] == 0.0) continue;
            const double he = std::pow(2.0, -0.5 * n) * boost::math::hermite(static_cast<unsigned>(n), z / std::numbers::sqrt2);
            value += weights[n] * std::pow(sigma, static_cast<double>(n)) * he;
        }
        return value;
    };
}

/// E[f(X)] for X ~ N(0, variance), by double-exponential quadrature.
inline double gaussian_mean(const std::function<double(double)>& f, double variance)
{
    detail::require(variance > 0, "gaussian_mean: variance must be positive");
    const double norm = 1 / std::sqrt(2 * std::numbers::pi * variance);
    boost::math::quadrature::sinh_sinh<double> integrator;
    return integrator.integrate(
        [&](double x) {
            const double w = norm * std::exp(-0.5 * x * x / variance);
            return w == 0.0 ? 0.0 : f(x) * w;
        },
        1e-15);
}

/// c_n^2 = (1/2pi) e^{m^2/n} K_0(m^2/n).
inline double smearing_constant_bessel(int n, double m)
{
    const double z = m * m / n;
    return std::exp(z) * std::cyl_bessel_k(0.0, z) / (2 * std::numbers::pi);
}

/// One-mode Bogoliubov ground energy of Omega a^dag a + u :phi^2:, phi = (a + a^dag)/sqrt(Omega).
inline double bogoliubov_one_mode(double omega, double u)
{
    return 0.5 * (std::sqrt(omega * omega + 4 * u) - omega) - u / omega;
}

} // namespace pphi2::oracle
