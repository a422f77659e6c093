#pragma once

// Euclidean action I_{T,P} on space-time grids, its minimization with fixed
// time-boundary data, an independent PDE residual, the I(T) scan, and the
// explicit tanh instanton of the interval double well.

#include "pphi2/agmon.hpp"
#include "pphi2/detail/parallel.hpp"
#include "pphi2/error.hpp"
#include "pphi2/potential.hpp"
#include "pphi2/spectral.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace pphi2 {

/// u(t_i, .) on a uniform time grid over [-T, T]; row i holds mode coefficients.
struct SpaceTimeField {
    BasisPtr basis;
    Vector times;
    Matrix rows;  ///< times.size() x modes

    int time_nodes() const { return static_cast<int>(times.size()); }
    double half_width() const { return 0.5 * (times[times.size() - 1] - times[0]); }
    double time_step() const { return times[1] - times[0]; }
    Field at(int i) const { return Field(basis, rows.row(i).transpose()); }

    /// Node values, time_nodes x num_nodes.
    Matrix values() const { return rows * basis->shapes().transpose(); }
};

inline void validate_space_time(const SpaceTimeField& u)
{
    detail::require(u.basis != nullptr, "space-time field: null basis");
    detail::require(u.times.size() >= 3, "space-time field: at least three time nodes are required");
    detail::require(u.rows.rows() == u.times.size() && u.rows.cols() == u.basis->size(),
                    "space-time field: array shape does not match the grids");
    if (!u.rows.allFinite()) throw ValidationError("space-time field: non-finite values");
}

struct ActionReport {
    double action = 0;     ///< kinetic + potential
    double kinetic = 0;    ///< 1/4 int ||d_t u||^2
    double potential = 0;  ///< int U(u(t)) dt, trapezoid
    double double_integral = 0;  ///< same action from the space-time integrand
    double residual = 0;   ///< pde_residual of the field
    double boundary_mismatch = 0;  ///< max L^2 speed ||d_t u|| at the two boundary rows
    int iterations = 0;
    bool converged = false;
};

/// I_{T,P}(u) = sum 1/4 ||u_{i+1} - u_i||^2 / dt + trapezoid of U(u(t_i)).
///
/// The double-integral form 1/4 (|u_t|^2 + |u_x|^2) + m^2/4 u^2 + P(u) g is
/// summed independently in node space and stored alongside.
inline ActionReport action(const ClassicalPotential& pot, const SpaceTimeField& u)
{
    validate_space_time(u);
    detail::require(u.basis == pot.basis(), "action: field lives on a different basis than the potential");
    const ModeBasis& basis = *pot.basis();
    const int n = u.time_nodes();
    ActionReport r;
    for (int i = 0; i + 1 < n; ++i) {
        const double dt = u.times[i + 1] - u.times[i];
        r.kinetic += 0.25 * (u.rows.row(i + 1) - u.rows.row(i)).squaredNorm() / dt;
    }
    std::vector<double> samples(n);
    for (int i = 0; i < n; ++i) samples[i] = evaluate_U(pot, u.at(i));
    for (int i = 0; i + 1 < n; ++i) r.potential += 0.5 * (u.times[i + 1] - u.times[i]) * (samples[i] + samples[i + 1]);
    r.action = r.kinetic + r.potential;

    // node-space form; d_x enters through its spectral symbol
    const Matrix x = u.values();
    const Vector xi2 = basis.wavenumbers().array().square().matrix();
    const double m2 = basis.mass() * basis.mass();
    const Vector& g = pot.cutoff().samples();
    std::vector<double> density(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.25 * xi2.dot(u.rows.row(i).transpose().cwiseAbs2());
        for (int j = 0; j < x.cols(); ++j)
            s += basis.weight() * (0.25 * m2 * x(i, j) * x(i, j) + pot.polynomial()(x(i, j)) * g[j]);
        density[i] = s;
    }
    double di = 0;
    for (int i = 0; i + 1 < n; ++i) {
        const double dt = u.times[i + 1] - u.times[i];
        const Matrix dx = (x.row(i + 1) - x.row(i)) / dt;
        di += 0.25 * basis.weight() * dx.squaredNorm() * dt + 0.5 * dt * (density[i] + density[i + 1]);
    }
    r.double_integral = di;
    r.boundary_mismatch = std::max((u.rows.row(1) - u.rows.row(0)).norm() / (u.times[1] - u.times[0]),
                                   (u.rows.row(n - 1) - u.rows.row(n - 2)).norm() / (u.times[n - 1] - u.times[n - 2]));
    return r;
}

/// Discrete L^2 norm of u_tt + u_xx - m^2 u - 2 P'(u) g on interior time rows.
///
/// Evaluated in node space with three-point stencils in t and x (periodic wrap,
/// zero Dirichlet ghosts or reflecting Neumann ghosts), so it shares no code
/// with the Newton solver's spectral residual.
inline double pde_residual(const ClassicalPotential& pot, const SpaceTimeField& u)
{
    validate_space_time(u);
    detail::require(u.basis == pot.basis(), "pde_residual: field lives on a different basis than the potential");
    const Grid& grid = pot.basis()->grid();
    const Matrix x = u.values();
    const int nt = u.time_nodes(), nx = static_cast<int>(x.cols());
    const double dx = grid.spacing(), m2 = pot.mass() * pot.mass();
    const Vector& g = pot.cutoff().samples();
    auto at = [&](int i, int j) {
        if (j >= 0 && j < nx) return x(i, j);
        switch (grid.boundary()) {
        case Boundary::periodic: return x(i, (j + nx) % nx);
        case Boundary::dirichlet: return 0.0;
        case Boundary::neumann: return x(i, j < 0 ? 0 : nx - 1);
        }
        return 0.0;
    };
    double sum = 0;
    for (int i = 1; i + 1 < nt; ++i) {
        const double dt_minus = u.times[i] - u.times[i - 1], dt_plus = u.times[i + 1] - u.times[i];
        for (int j = 0; j < nx; ++j) {
            const double utt = 2 * (dt_minus * x(i + 1, j) - (dt_minus + dt_plus) * x(i, j) + dt_plus * x(i - 1, j)) /
                               (dt_minus * dt_plus * (dt_minus + dt_plus));
            const double uxx = (at(i, j + 1) - 2 * x(i, j) + at(i, j - 1)) / (dx * dx);
            const double r = utt + uxx - m2 * x(i, j) - 2 * pot.polynomial().derivative(x(i, j)) * g[j];
            sum += r * r * 0.5 * (dt_minus + dt_plus) * dx;
        }
    }
    return std::sqrt(sum);
}

/// x0 tanh(2 sqrt(a) x0 t).
inline Vector tanh_instanton(double a, double x0, const Vector& times)
{
    detail::require(a > 0 && std::isfinite(a), "tanh_instanton: a must be positive");
    detail::require(x0 > 0 && std::isfinite(x0), "tanh_instanton: x0 must be positive");
    return (x0 * (2 * std::sqrt(a) * x0 * times.array()).tanh()).matrix();
}

/// Space-time field with u(t, x) = profile(t) for every x.
inline SpaceTimeField spatially_constant(BasisPtr basis, const Vector& times, const Vector& profile)
{
    detail::require(times.size() == profile.size(), "space-time field: profile length must match the time grid");
    const Vector one = Field::constant(basis, 1.0).coefficients();
    SpaceTimeField u{basis, times, profile * one.transpose()};
    return u;
}

/// Space average (1/l) int u(t, x) dx per time row.
inline Vector space_average(const SpaceTimeField& u)
{
    const Matrix x = u.values();
    return x.rowwise().mean();
}

struct InstantonOptions {
    double time_step = 0.0125;  ///< target dt; the node count scales with T
    int max_iterations = 100;
    double tol = 1e-9;          ///< Newton residual (discrete L^2)
    bool tanh_warm_start = false;
    double warm_a = 1, warm_x0 = 1;
    int threads = 1;
};

namespace detail {

/// Block tridiagonal Cholesky for diag blocks D_i and off-diagonal c I.
/// Returns false when a pivot block is not positive definite.
inline bool block_tridiagonal_solve(const std::vector<Matrix>& diag, double c, const std::vector<Vector>& rhs,
                                    std::vector<Vector>& out)
{
    const std::size_t n = diag.size();
    std::vector<Eigen::LLT<Matrix>> pivots(n);
    std::vector<Vector> y(n);
    Matrix s = diag[0];
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            const Matrix inv = pivots[i - 1].solve(Matrix::Identity(s.rows(), s.cols()));
            s = diag[i] - c * c * inv;
        }
        pivots[i].compute(s);
        if (pivots[i].info() != Eigen::Success) return false;
        y[i] = i == 0 ? rhs[0] : Vector(rhs[i] - c * pivots[i - 1].solve(y[i - 1]));
    }
    out.assign(n, Vector());
    out[n - 1] = pivots[n - 1].solve(y[n - 1]);
    for (std::size_t i = n - 1; i-- > 0;) out[i] = pivots[i].solve(y[i] - c * out[i + 1]);
    return true;
}

/// Gradient of the discrete action with respect to the interior rows.
inline std::vector<Vector> action_gradient(const ClassicalPotential& pot, const Matrix& rows, double dt)
{
    const int n = static_cast<int>(rows.rows());
    std::vector<Vector> g(n - 2);
    for (int i = 1; i + 1 < n; ++i) {
        const Vector lap = (2 * rows.row(i) - rows.row(i - 1) - rows.row(i + 1)).transpose();
        g[i - 1] = 0.5 * lap / dt + dt * gradient_U(pot, Field(pot.basis(), rows.row(i).transpose())).coefficients();
    }
    return g;
}

inline double discrete_action(const ClassicalPotential& pot, const Matrix& rows, double dt)
{
    const int n = static_cast<int>(rows.rows());
    double s = 0;
    for (int i = 0; i + 1 < n; ++i) s += 0.25 * (rows.row(i + 1) - rows.row(i)).squaredNorm() / dt;
    for (int i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 0.5 * dt : dt;
        s += w * evaluate_U(pot, Field(pot.basis(), rows.row(i).transpose()));
    }
    return s;
}

/// Residual (2/dt) dS/du_i, i.e. -(u_tt - (m^2 - Delta) u - 2 P'(u) g), in discrete L^2.
inline double newton_residual(const std::vector<Vector>& grad, double dt)
{
    double s = 0;
    for (const auto& g : grad) s += (2 / dt) * (2 / dt) * g.squaredNorm() * dt;
    return std::sqrt(s);
}

} // namespace detail

/// Minimizes the discrete action with u(-T) = h and u(T) = k by damped Newton.
///
/// The Hessian is block tridiagonal in time; a Levenberg shift keeps it
/// positive definite away from the minimizer and an Armijo backtracking on
/// the action globalizes the step.
inline std::pair<SpaceTimeField, ActionReport> minimize_action(const ClassicalPotential& pot, const Field& h,
                                                                const Field& k, double T,
                                                                const InstantonOptions& opts = {})
{
    detail::require(T > 0 && std::isfinite(T), "instanton.T: must be positive");
    detail::require(opts.time_step > 0, "instanton.time_step: must be positive");
    detail::require(opts.max_iterations >= 1, "instanton.max_iterations: must be >= 1");
    if (h.basis() != pot.basis() || k.basis() != pot.basis())
        throw ValidationError("minimize_action: boundary data live on a different basis than the potential");
    const ModeBasis& basis = *pot.basis();
    const int intervals = std::max(4, static_cast<int>(std::ceil(2 * T / opts.time_step)));
    const int n = intervals + 1;
    const double dt = 2 * T / intervals;

    SpaceTimeField u{pot.basis(), Vector::LinSpaced(n, -T, T), Matrix(n, basis.size())};
    for (int i = 0; i < n; ++i) {
        double s = static_cast<double>(i) / intervals;
        if (opts.tanh_warm_start) {
            s = 0.5 * (1 + tanh_instanton(opts.warm_a, opts.warm_x0, Vector::Constant(1, u.times[i]))[0] / opts.warm_x0);
        }
        u.rows.row(i) = ((1 - s) * h.coefficients() + s * k.coefficients()).transpose();
    }
    u.rows.row(0) = h.coefficients().transpose();
    u.rows.row(n - 1) = k.coefficients().transpose();

    ActionReport report;
    const Vector w2 = basis.frequencies().array().square().matrix();
    double value = detail::discrete_action(pot, u.rows, dt);
    auto grad = detail::action_gradient(pot, u.rows, dt);
    double residual = detail::newton_residual(grad, dt);
    double shift = 0;
    int it = 0;
    for (; it < opts.max_iterations && residual > opts.tol && n > 2; ++it) {
        std::vector<Matrix> blocks(n - 2);
        for (int i = 1; i + 1 < n; ++i) {
            Matrix b = 0.5 * dt * schrodinger_matrix(pot, u.at(i));
            b.diagonal().array() += 1.0 / dt;
            blocks[i - 1] = b;
        }
        std::vector<Vector> rhs(grad.size()), step;
        for (std::size_t i = 0; i < grad.size(); ++i) rhs[i] = -grad[i];
        const double scale = 1.0 / dt + 0.5 * dt * w2.maxCoeff();
        shift = shift > 0 ? shift / 10 : 0;
        if (shift < 1e-12 * scale) shift = 0;
        double slope = 0;
        while (true) {
            std::vector<Matrix> shifted = blocks;
            if (shift > 0)
                for (auto& b : shifted) b.diagonal().array() += shift;
            if (detail::block_tridiagonal_solve(shifted, -0.5 / dt, rhs, step)) {
                slope = 0;
                for (std::size_t i = 0; i < step.size(); ++i) slope += step[i].dot(grad[i]);
                if (slope < 0) break;
            }
            shift = shift > 0 ? 4 * shift : 1e-3 * scale;
            if (shift > 1e12 * scale) throw NumericalError("instanton: no descent direction found");
        }
        double alpha = 1;
        Matrix trial;
        double trial_value = 0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            trial = u.rows;
            for (int i = 1; i + 1 < n; ++i) trial.row(i) += alpha * step[i - 1].transpose();
            trial_value = detail::discrete_action(pot, trial, dt);
            const double slack = 1e-14 * std::max(1.0, std::abs(value));
            if (std::isfinite(trial_value) && trial_value <= value + 1e-4 * alpha * slope + slack) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
        u.rows = trial;
        value = trial_value;
        grad = detail::action_gradient(pot, u.rows, dt);
        residual = detail::newton_residual(grad, dt);
    }

    report = action(pot, u);
    report.iterations = it;
    report.converged = residual <= opts.tol;
    report.residual = pde_residual(pot, u);
    return {u, report};
}

struct ScanRow {
    double T = 0;
    double action = 0;
    double residual = 0;
    int iterations = 0;
    bool converged = false;
    std::string error;  ///< non-empty when the solve failed
};

struct ScanResult {
    std::vector<ScanRow> rows;
    bool strictly_decreasing = false;  ///< each step drops by more than the rounding margin
    double smallest_drop = 0;          ///< min_i I(T_{i-1}) - I(T_i)
};

/// I(T) for each T in an increasing list.
inline ScanResult scan_T(const ClassicalPotential& pot, const Field& h, const Field& k, const std::vector<double>& Ts,
                         const InstantonOptions& opts = {})
{
    detail::require(Ts.size() >= 2, "instanton.T_list: needs at least two entries");
    for (std::size_t i = 0; i < Ts.size(); ++i) {
        detail::require(Ts[i] > 0, "instanton.T_list: entries must be positive");
        if (i > 0) detail::require(Ts[i] > Ts[i - 1], "instanton.T_list: must be increasing");
    }
    ScanResult out;
    out.rows.resize(Ts.size());
    InstantonOptions inner = opts;
    inner.threads = 1;
    detail::parallel_for(static_cast<int>(Ts.size()), opts.threads, [&](int i) {
        ScanRow row;
        row.T = Ts[i];
        try {
            const auto [u, rep] = minimize_action(pot, h, k, Ts[i], inner);
            row.action = rep.action;
            row.residual = rep.residual;
            row.iterations = rep.iterations;
            row.converged = rep.converged;
        } catch (const NumericalError& e) {
            row.error = e.what();
            row.action = std::numeric_limits<double>::quiet_NaN();
        }
        out.rows[i] = row;
    });
    // I(T) - I(T') decays like exp(-c T), far below any fixed solver tolerance,
    // so the comparison margin is set by rounding of the action sum.
    out.strictly_decreasing = true;
    out.smallest_drop = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < out.rows.size(); ++i) {
        const double drop = out.rows[i - 1].action - out.rows[i].action;
        const double margin = 64 * std::numeric_limits<double>::epsilon() * std::abs(out.rows[i - 1].action);
        out.smallest_drop = std::min(out.smallest_drop, drop);
        if (!(drop > margin)) out.strictly_decreasing = false;
    }
    return out;
}

struct InstantonCandidate {
    SpaceTimeField field;
    double center = 0;  ///< instanton time of the knot at half Agmon length
    double covered_from = 0, covered_to = 0;
};

/// Time change dt = ||dc|| / (2 sqrt(U)) along a geodesic, so that
/// ||u'|| = 2 sqrt(U(u)); t = 0 sits at half the Agmon length.
///
/// The window [-T, T] is cut to the time range the knots cover.
inline InstantonCandidate geodesic_to_instanton(const ClassicalPotential& pot, const Path& geodesic, double T,
                                                double time_step = 0.0125)
{
    detail::check_path_basis(pot, geodesic);
    detail::require(T > 0, "instanton.T: must be positive");
    const int m = geodesic.segments();
    std::vector<double> t(m + 1, 0.0), arc(m + 1, 0.0);
    for (int j = 0; j < m; ++j) {
        const Vector d = geodesic.knots.col(j + 1) - geodesic.knots.col(j);
        const double u = detail::potential_value(pot, 0.5 * (geodesic.knots.col(j) + geodesic.knots.col(j + 1)));
        if (!(u > 0) && j > 0 && j + 1 < m) {
            throw ValidationError("geodesic_to_instanton: geodesic touches the zero set of U in its interior");
        }
        const double step = u > 0 ? d.norm() / (2 * std::sqrt(u)) : 0.0;
        t[j + 1] = t[j] + step;
        arc[j + 1] = arc[j] + std::sqrt(std::max(u, 0.0)) * d.norm();
    }
    const double half = 0.5 * arc[m];
    auto it = std::lower_bound(arc.begin(), arc.end(), half);
    const int j = std::clamp(static_cast<int>(it - arc.begin()) - 1, 0, m - 1);
    const double frac = arc[j + 1] > arc[j] ? (half - arc[j]) / (arc[j + 1] - arc[j]) : 0.0;
    const double center = t[j] + frac * (t[j + 1] - t[j]);

    InstantonCandidate out;
    out.center = center;
    out.covered_from = -center;
    out.covered_to = t[m] - center;
    const double window = std::min({T, center, t[m] - center});
    detail::require(window > 0, "geodesic_to_instanton: geodesic covers no time window");
    const int intervals = std::max(4, static_cast<int>(std::ceil(2 * window / time_step)));
    Path shifted{geodesic.basis, Vector(m + 1), geodesic.knots};
    for (int i = 0; i <= m; ++i) shifted.times[i] = t[i] - center;
    SpaceTimeField u{geodesic.basis, Vector::LinSpaced(intervals + 1, -window, window),
                     Matrix(intervals + 1, geodesic.basis->size())};
    for (int i = 0; i <= intervals; ++i) u.rows.row(i) = path_at(shifted, u.times[i]).transpose();
    out.field = std::move(u);
    return out;
}

} // namespace pphi2
