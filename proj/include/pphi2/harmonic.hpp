#pragma once

// Ground-state energies and covariances of the quadratic Hamiltonians
// -L_A + Q_v and -L_A + Q_{v,J}.
//
// All matrices are expressed in L^2 mode coordinates. An operator X on the
// Cameron-Martin space H is carried as Phi^{-1} X Phi with Phi = A~^{-1};
// this conjugation is unitary, so Hilbert-Schmidt norms are unchanged.

#include "pphi2/error.hpp"
#include "pphi2/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <string>

namespace pphi2 {

struct QuadraticPerturbation {
    Vector v;                ///< node samples, may be negative
    std::optional<Matrix> J; ///< Phi^{-1} J Phi in L^2 mode coordinates, symmetric
};

struct HarmonicReport {
    double energy = 0;               ///< -1/4 hs_norm^2
    double smallest_eigenvalue = 0;  ///< of m^2 - Delta + 4v (+ 4 A~ J A~)
    double hs_norm = 0;              ///< ||(A~_v^2 - A~^2) A~^{-1}||_HS
    Matrix perturbed_root;           ///< A~_v^2 = (m^2 - Delta + 4v)^{1/2}
    Matrix covariance;               ///< (m^2 - Delta + 4v)^{-1/2}
};

/// Matrix of K_v in the H-orthonormal basis A~^{-1} e_k, i.e. A~^{-1} M_v A~^{-1}.
///
/// Exactly symmetric up to rounding; the final symmetrization only removes
/// rounding asymmetry. A K_v A then has the L^2 matrix M_v.
inline Matrix kv_operator(const ModeBasis& basis, const Vector& v)
{
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        if (!std::isfinite(v[j])) throw ValidationError("kv_operator: v must be finite");
    }
    const Vector inv_root = basis.frequencies().array().rsqrt().matrix();
    Matrix k = inv_root.asDiagonal() * basis.multiplication_matrix(v) * inv_root.asDiagonal();
    return 0.5 * (k + k.transpose());
}

/// L^2 mode matrix of A^4 + 4 A K_v A (+ 4 A J A), i.e. m^2 - Delta + 4v (+ 4 A~ J A~).
inline Matrix perturbed_operator_matrix(const ModeBasis& basis, const QuadraticPerturbation& p)
{
    detail::require(p.v.size() == basis.num_nodes(), "perturbation.v: sample count must equal num_nodes");
    const Vector& w = basis.frequencies();
    Matrix a = 4.0 * basis.multiplication_matrix(p.v);
    a.diagonal() += w.array().square().matrix();
    if (p.J) {
        detail::require(p.J->rows() == basis.size() && p.J->cols() == basis.size(),
                        "perturbation.J: must be a modes x modes matrix");
        const Vector root = w.array().sqrt().matrix();
        a += 4.0 * root.asDiagonal() * (*p.J) * root.asDiagonal();
    }
    return 0.5 * (a + a.transpose());
}

namespace detail {

inline HarmonicReport harmonic_pipeline(const ModeBasis& basis, const Matrix& op)
{
    Eigen::SelfAdjointEigenSolver<Matrix> solver(op);
    if (solver.info() != Eigen::Success) throw NumericalError("harmonic: eigensolver failed");
    const Vector& evals = solver.eigenvalues();
    const double m2 = basis.mass() * basis.mass();
    if (!(evals[0] > 1e-10 * m2)) {
        throw NotPositiveError("harmonic: operator is not strictly positive (smallest eigenvalue " +
                               std::to_string(evals[0]) + ")");
    }
    const Matrix& q = solver.eigenvectors();
    HarmonicReport r;
    r.smallest_eigenvalue = evals[0];
    r.perturbed_root = q * evals.array().sqrt().matrix().asDiagonal() * q.transpose();
    r.covariance = q * evals.array().rsqrt().matrix().asDiagonal() * q.transpose();
    Matrix d = r.perturbed_root;
    d.diagonal() -= basis.frequencies();
    const Matrix t = d * basis.frequencies().array().rsqrt().matrix().asDiagonal();
    r.hs_norm = t.norm();
    r.energy = -0.25 * r.hs_norm * r.hs_norm;
    return r;
}

} // namespace detail

/// E_v = -1/4 ||(A~_v^2 - A~^2) A~^{-1}||_HS^2 for -L_A + Q_v.
inline HarmonicReport harmonic_ground_energy(const ModeBasis& basis, const Vector& v)
{
    return detail::harmonic_pipeline(basis, perturbed_operator_matrix(basis, {v, std::nullopt}));
}

/// E_{v,J} with A_{v,J} = (A^4 + 4 A K_v A + 4 A J A)^{1/4}.
inline HarmonicReport harmonic_ground_energy_extended(const ModeBasis& basis, const QuadraticPerturbation& p)
{
    return detail::harmonic_pipeline(basis, perturbed_operator_matrix(basis, p));
}

/// Covariance (m^2 + 4v - Delta)^{-1/2} of the Gaussian ground-state measure.
inline Matrix ground_state_covariance(const ModeBasis& basis, const QuadraticPerturbation& p)
{
    return harmonic_ground_energy_extended(basis, p).covariance;
}

} // namespace pphi2
