#pragma once

// Lowest eigenpairs of sparse symmetric matrices: Lanczos with full
// reorthogonalization and locking, plus a dense reference solver.

#include "pphi2/error.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pphi2 {

template <class Scalar>
using SparseMatrixT = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;
template <class Scalar>
using DenseMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using DenseVectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct LanczosOptions {
    std::uint64_t seed = 1;
    int max_iterations = 600;  ///< Krylov dimension cap per locked eigenpair
    double tol = 1e-10;        ///< Ritz residual relative to the norm estimate
};

template <class Scalar>
struct SpectrumResult {
    std::vector<Scalar> eigenvalues;  ///< ascending
    DenseMatrixT<Scalar> eigenvectors;
    std::vector<double> residuals;    ///< ||H psi - E psi|| per pair
    double norm_estimate = 0;         ///< Gershgorin bound on ||H||
    int iterations = 0;               ///< total matrix-vector products
    int restarts = 0;                 ///< locking runs performed

    Scalar gap() const
    {
        if (eigenvalues.size() < 2) throw ValidationError("spectrum: gap needs at least two eigenvalues");
        return eigenvalues[1] - eigenvalues[0];
    }
};

template <class Scalar>
double gershgorin_norm(const SparseMatrixT<Scalar>& h)
{
    double best = 0;
    for (Eigen::Index r = 0; r < h.outerSize(); ++r) {
        double row = 0;
        for (typename SparseMatrixT<Scalar>::InnerIterator it(h, r); it; ++it) row += std::abs(double(it.value()));
        best = std::max(best, row);
    }
    return best;
}

/// Lowest `count` eigenpairs by repeated Lanczos runs, each locking the
/// lowest converged Ritz pair. Locking one pair per run resolves degenerate
/// eigenvalues, which a single Krylov sequence cannot.
template <class Scalar>
SpectrumResult<Scalar> lowest_eigenvalues(const SparseMatrixT<Scalar>& h, int count, const LanczosOptions& opts = {})
{
    using Vec = DenseVectorT<Scalar>;
    using Mat = DenseMatrixT<Scalar>;
    const Eigen::Index n = h.rows();
    detail::require(h.rows() == h.cols(), "lanczos: matrix must be square");
    detail::require(count >= 1 && count <= n, "lanczos: count must be in [1, dimension]");

    SpectrumResult<Scalar> result;
    result.norm_estimate = gershgorin_norm(h);
    const double scale = std::max(result.norm_estimate, 1e-300);
    Mat locked(n, count);
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal;

    auto orthogonalize = [&](Vec& w, const Mat& basis, Eigen::Index cols) {
        for (int pass = 0; pass < 2; ++pass) {
            if (cols > 0) w -= basis.leftCols(cols) * (basis.leftCols(cols).transpose() * w);
        }
    };

    for (int found = 0; found < count; ++found) {
        const Eigen::Index max_dim = std::min<Eigen::Index>(n - found, opts.max_iterations);
        Mat v(n, max_dim);
        std::vector<Scalar> alpha, beta;
        Vec w(n);
        for (Eigen::Index i = 0; i < n; ++i) w[i] = Scalar(normal(rng));
        orthogonalize(w, locked, found);
        w /= w.norm();
        v.col(0) = w;

        Scalar theta = 0;
        Vec ritz_coeffs;
        double ritz_residual = 0;
        Eigen::Index dim = 0;
        for (Eigen::Index j = 0; j < max_dim; ++j) {
            w = h * v.col(j);
            ++result.iterations;
            const Scalar a = v.col(j).dot(w);
            w -= a * v.col(j);
            if (j > 0) w -= beta[j - 1] * v.col(j - 1);
            orthogonalize(w, v, j + 1);
            orthogonalize(w, locked, found);
            const Scalar b = w.norm();
            alpha.push_back(a);
            dim = j + 1;

            Vec diag = Eigen::Map<Vec>(alpha.data(), dim);
            Vec sub(std::max<Eigen::Index>(dim - 1, 0));
            for (Eigen::Index i = 0; i + 1 < dim; ++i) sub[i] = beta[i];
            Eigen::SelfAdjointEigenSolver<Mat> tri;
            tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
            if (tri.info() != Eigen::Success) throw NumericalError("lanczos: tridiagonal eigensolver failed");
            theta = tri.eigenvalues()[0];
            ritz_coeffs = tri.eigenvectors().col(0);
            ritz_residual = std::abs(double(b * ritz_coeffs[dim - 1]));

            const bool exhausted = double(b) <= 1e-14 * scale || dim == max_dim;
            if (ritz_residual <= opts.tol * scale || exhausted) break;
            beta.push_back(b);
            v.col(j + 1) = w / b;
        }

        Vec y = v.leftCols(dim) * ritz_coeffs;
        orthogonalize(y, locked, found);
        y /= y.norm();
        const Vec hy = h * y;
        theta = y.dot(hy);
        const double residual = double((hy - theta * y).norm());
        if (residual > 1e-8 * scale) {
            throw NumericalError("lanczos: eigenpair " + std::to_string(found) + " did not converge (residual " +
                                 std::to_string(residual) + ")");
        }
        locked.col(found) = y;
        result.eigenvalues.push_back(theta);
        result.residuals.push_back(residual);
        ++result.restarts;
    }

    std::vector<int> order(count);
    for (int i = 0; i < count; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return result.eigenvalues[a] < result.eigenvalues[b]; });
    SpectrumResult<Scalar> sorted = result;
    sorted.eigenvectors.resize(n, count);
    for (int i = 0; i < count; ++i) {
        sorted.eigenvalues[i] = result.eigenvalues[order[i]];
        sorted.residuals[i] = result.residuals[order[i]];
        sorted.eigenvectors.col(i) = locked.col(order[i]);
    }
    return sorted;
}

/// Dense symmetric eigensolver reference for small matrices.
/// Without eigenvectors the residuals are left empty.
template <class Scalar>
SpectrumResult<Scalar> dense_lowest_eigenvalues(const DenseMatrixT<Scalar>& h, int count, bool vectors = true)
{
    detail::require(h.rows() == h.cols(), "dense eigensolver: matrix must be square");
    detail::require(count >= 1 && count <= h.rows(), "dense eigensolver: count must be in [1, dimension]");
    Eigen::SelfAdjointEigenSolver<DenseMatrixT<Scalar>> solver(
        h, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
    SpectrumResult<Scalar> r;
    r.norm_estimate = double(h.cwiseAbs().rowwise().sum().maxCoeff());
    for (int i = 0; i < count; ++i) r.eigenvalues.push_back(solver.eigenvalues()[i]);
    if (vectors) {
        r.eigenvectors = solver.eigenvectors().leftCols(count);
        for (int i = 0; i < count; ++i) {
            const auto psi = solver.eigenvectors().col(i);
            r.residuals.push_back(double((h * psi - solver.eigenvalues()[i] * psi).norm()));
        }
    }
    return r;
}

} // namespace pphi2
