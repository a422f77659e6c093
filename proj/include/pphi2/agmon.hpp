#pragma once

// Paths in field space, the Agmon length and energy, constant-speed
// reparametrization, geodesic search for d^Ag_U and the free-field
// harmonic extension.

#include "pphi2/detail/parallel.hpp"
#include "pphi2/error.hpp"
#include "pphi2/potential.hpp"
#include "pphi2/spectral.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace pphi2 {

/// Piecewise-linear curve in L^2 through knot fields c(t_0), ..., c(t_M).
struct Path {
    BasisPtr basis;
    Vector times;  ///< strictly increasing
    Matrix knots;  ///< column j: mode coefficients of c(t_j)

    int segments() const { return static_cast<int>(times.size()) - 1; }
    double duration() const { return times[times.size() - 1] - times[0]; }
    Field knot(int j) const { return Field(basis, knots.col(j)); }
    Field front() const { return knot(0); }
    Field back() const { return knot(segments()); }
};

inline void validate_path(const Path& p)
{
    detail::require(p.basis != nullptr, "path: null basis");
    detail::require(p.times.size() >= 2, "path: at least two knots are required");
    detail::require(p.knots.cols() == p.times.size(), "path: knot count must match the number of times");
    detail::require(p.knots.rows() == p.basis->size(), "path: knot fields have the wrong number of modes");
    for (Eigen::Index j = 1; j < p.times.size(); ++j)
        detail::require(p.times[j] > p.times[j - 1], "path: times must be strictly increasing");
    if (!p.knots.allFinite() || !p.times.allFinite()) throw ValidationError("path: non-finite knot data");
}

inline Vector uniform_times(int segments, double T = 1.0)
{
    detail::require(segments >= 1, "path.knots: need at least one segment");
    return Vector::LinSpaced(segments + 1, 0.0, T);
}

/// t_j = T (1 - cos(pi j / M)) / 2, dense near both endpoints.
inline Vector clustered_times(int segments, double T = 1.0)
{
    detail::require(segments >= 1, "path.knots: need at least one segment");
    Vector t(segments + 1);
    for (int j = 0; j <= segments; ++j) t[j] = 0.5 * T * (1 - std::cos(std::numbers::pi * j / segments));
    t[0] = 0;
    t[segments] = T;
    return t;
}

inline Path straight_path(const Field& h, const Field& k, const Vector& times)
{
    h.check_same_basis(k);
    Path p{h.basis(), times, Matrix(h.basis()->size(), times.size())};
    const double t0 = times[0], span = times[times.size() - 1] - times[0];
    for (Eigen::Index j = 0; j < times.size(); ++j) {
        const double s = (times[j] - t0) / span;
        p.knots.col(j) = (1 - s) * h.coefficients() + s * k.coefficients();
    }
    p.knots.col(0) = h.coefficients();
    p.knots.col(times.size() - 1) = k.coefficients();
    validate_path(p);
    return p;
}

/// Linear interpolation of the path at time t (clamped to the time range).
inline Vector path_at(const Path& p, double t)
{
    const Eigen::Index n = p.times.size();
    if (t <= p.times[0]) return p.knots.col(0);
    if (t >= p.times[n - 1]) return p.knots.col(n - 1);
    const auto it = std::upper_bound(p.times.data(), p.times.data() + n, t);
    const Eigen::Index j = (it - p.times.data()) - 1;
    const double s = (t - p.times[j]) / (p.times[j + 1] - p.times[j]);
    return (1 - s) * p.knots.col(j) + s * p.knots.col(j + 1);
}

namespace detail {

inline double potential_value(const ClassicalPotential& pot, const Vector& c)
{
    return evaluate_U(pot, Field(pot.basis(), c));
}

inline void check_path_basis(const ClassicalPotential& pot, const Path& path)
{
    validate_path(path);
    if (path.basis != pot.basis()) throw ValidationError("path: knots live on a different basis than the potential");
}

/// sqrt(U(mid)) ||c_{j+1} - c_j|| per segment.
inline Vector segment_lengths(const ClassicalPotential& pot, const Path& path)
{
    Vector out(path.segments());
    for (int j = 0; j < path.segments(); ++j) {
        const Vector mid = 0.5 * (path.knots.col(j) + path.knots.col(j + 1));
        const double u = potential_value(pot, mid);
        out[j] = std::sqrt(std::max(u, 0.0)) * (path.knots.col(j + 1) - path.knots.col(j)).norm();
    }
    return out;
}

} // namespace detail

/// l_U(c) = int sqrt(U(c)) ||c'|| dt, midpoint U and exact segment speeds.
inline double path_length(const ClassicalPotential& pot, const Path& path)
{
    detail::check_path_basis(pot, path);
    return detail::segment_lengths(pot, path).sum();
}

/// e_U(c) = int U(c) ||c'||^2 dt with the same quadrature.
inline double path_energy(const ClassicalPotential& pot, const Path& path)
{
    detail::check_path_basis(pot, path);
    double e = 0;
    for (int j = 0; j < path.segments(); ++j) {
        const Vector d = path.knots.col(j + 1) - path.knots.col(j);
        const double u = detail::potential_value(pot, 0.5 * (path.knots.col(j) + path.knots.col(j + 1)));
        e += u * d.squaredNorm() / (path.times[j + 1] - path.times[j]);
    }
    return e;
}

/// Agmon speed sqrt(U) ||c'|| on each segment.
inline Vector segment_speeds(const ClassicalPotential& pot, const Path& path)
{
    detail::check_path_basis(pot, path);
    Vector s = detail::segment_lengths(pot, path);
    for (int j = 0; j < path.segments(); ++j) s[j] /= path.times[j + 1] - path.times[j];
    return s;
}

/// Retimes the knots by cumulative Agmon arclength, tau_j = t_0 + T L_j / l.
///
/// Knot fields are kept, so l is unchanged and every segment has speed l / T.
/// Segments of zero Agmon length are dropped.
inline Path reparametrize_constant_speed(const ClassicalPotential& pot, const Path& path)
{
    detail::check_path_basis(pot, path);
    const Vector pieces = detail::segment_lengths(pot, path);
    const double total = pieces.sum();
    if (!(total > 0)) throw ValidationError("reparametrize: path has zero Agmon length");
    std::vector<int> kept{0};
    std::vector<double> cumulative{0.0};
    double running = 0;
    for (int j = 0; j < path.segments(); ++j) {
        running += pieces[j];
        if (running > cumulative.back()) {
            kept.push_back(j + 1);
            cumulative.push_back(running);
        }
    }
    kept.back() = path.segments();
    Path out{path.basis, Vector(kept.size()), Matrix(path.knots.rows(), kept.size())};
    const double t0 = path.times[0], T = path.duration();
    for (std::size_t i = 0; i < kept.size(); ++i) {
        out.times[i] = t0 + T * cumulative[i] / total;
        out.knots.col(i) = path.knots.col(kept[i]);
    }
    out.times[kept.size() - 1] = t0 + T;
    return out;
}

/// Places knots at `times` so that the Agmon arclength fraction of knot j is
/// (t_j - t_0) / T, by inverse interpolation on a refined copy of the path.
inline Path resample_constant_speed(const ClassicalPotential& pot, const Path& path, const Vector& times,
                                    int refinement = 8)
{
    detail::check_path_basis(pot, path);
    const int dense_segments = path.segments() * refinement;
    Path dense{path.basis, uniform_times(dense_segments), Matrix(path.knots.rows(), dense_segments + 1)};
    for (int j = 0; j < path.segments(); ++j)
        for (int r = 0; r < refinement; ++r) {
            const double s = static_cast<double>(r) / refinement;
            dense.knots.col(j * refinement + r) = (1 - s) * path.knots.col(j) + s * path.knots.col(j + 1);
        }
    dense.knots.col(dense_segments) = path.knots.col(path.segments());
    const Vector pieces = detail::segment_lengths(pot, dense);
    std::vector<double> cumulative(dense_segments + 1, 0.0);
    for (int j = 0; j < dense_segments; ++j) cumulative[j + 1] = cumulative[j] + pieces[j];
    const double total = cumulative.back();
    if (!(total > 0)) throw ValidationError("reparametrize: path has zero Agmon length");

    Path out{path.basis, times, Matrix(path.knots.rows(), times.size())};
    const double t0 = times[0], T = times[times.size() - 1] - times[0];
    for (Eigen::Index i = 0; i < times.size(); ++i) {
        const double target = total * (times[i] - t0) / T;
        auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
        const int j = std::clamp(static_cast<int>(it - cumulative.begin()) - 1, 0, dense_segments - 1);
        const double width = cumulative[j + 1] - cumulative[j];
        const double s = width > 0 ? std::clamp((target - cumulative[j]) / width, 0.0, 1.0) : 0.0;
        out.knots.col(i) = (1 - s) * dense.knots.col(j) + s * dense.knots.col(j + 1);
    }
    out.knots.col(0) = path.knots.col(0);
    out.knots.col(times.size() - 1) = path.knots.col(path.segments());
    validate_path(out);
    return out;
}

// ---------------------------------------------------------------------------
// free field

/// d^Ag_{U_0}(0, h) = 1/4 ||h||_H^2 with ||h||_H = ||h||_{H^{1/2}}.
inline double free_field_distance(const Field& h)
{
    const double n = sobolev_norm(h, 0.5);
    return 0.25 * n * n;
}

/// 1/4 | ||k||_H^2 - ||h||_H^2 |, a lower bound for l_{U_0} of any path from h to k.
inline double free_field_lower_bound(const Field& h, const Field& k)
{
    return std::abs(free_field_distance(k) - free_field_distance(h));
}

struct HarmonicExtension {
    Path path;
    double action = 0;  ///< closed-form I_{T,0}(f)
};

/// f(t) = S_{T-t}(I - S_{2T})^{-1}(k - S_T h) + S_t(I - S_{2T})^{-1}(h - S_T k), and its velocity.
inline std::pair<Vector, Vector> harmonic_extension_at(const Field& h, const Field& k, double T, double t)
{
    h.check_same_basis(k);
    const Vector& w = h.basis()->frequencies();
    Vector f(w.size()), df(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double s = std::exp(-w[i] * T);
        const double a = std::exp(-(T - t) * w[i]), b = std::exp(-t * w[i]);
        const double hk = h.coefficients()[i], kk = k.coefficients()[i];
        const double denom = 1 - s * s;
        f[i] = (a * (kk - s * hk) + b * (hk - s * kk)) / denom;
        df[i] = w[i] * (a * (kk - s * hk) - b * (hk - s * kk)) / denom;
    }
    return {f, df};
}

/// Free harmonic extension sampled on [0, T] and its action
/// I_{T,0} = 1/4 sum_k omega_k [2 s_k (h_k - k_k)^2 / (1 - s_k^2) + tanh(omega_k T / 2)(h_k^2 + k_k^2)].
inline HarmonicExtension harmonic_extension(const Field& h, const Field& k, double T, int segments = 64)
{
    detail::require(T > 0 && std::isfinite(T), "harmonic_extension: T must be positive");
    h.check_same_basis(k);
    HarmonicExtension out;
    out.path = {h.basis(), uniform_times(segments, T), Matrix(h.basis()->size(), segments + 1)};
    for (int j = 0; j <= segments; ++j) out.path.knots.col(j) = harmonic_extension_at(h, k, T, out.path.times[j]).first;
    out.path.knots.col(0) = h.coefficients();
    out.path.knots.col(segments) = k.coefficients();
    const Vector& w = h.basis()->frequencies();
    double action = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double s = std::exp(-w[i] * T);
        const double hk = h.coefficients()[i], kk = k.coefficients()[i];
        action += w[i] * (2 * s / (1 - s * s) * (hk - kk) * (hk - kk) + std::tanh(0.5 * w[i] * T) * (hk * hk + kk * kk));
    }
    out.action = 0.25 * action;
    return out;
}

// ---------------------------------------------------------------------------
// geodesics

struct AgmonOptions {
    int knots = 64;               ///< segments M of the first mesh
    int search_modes = 16;        ///< lowest modes optimized at interior knots
    int max_iterations = 4000;
    double gradient_tol = 1e-11;
    bool refine = true;           ///< repeat once with 2M segments
    double extension_time = 3.0;  ///< T of the harmonic-extension start
    int threads = 1;
};

struct RestartOutcome {
    std::string start;
    double initial_energy = 0;
    double final_energy = 0;
    int iterations = 0;
    bool converged = false;
};

struct GeodesicResult {
    double distance = 0;  ///< sqrt(min e) on the finest mesh
    Path path;            ///< optimized path, retimed to constant speed
    double length = 0;    ///< l of the optimized path, <= distance
    double energy = 0;    ///< min e
    double coarse_distance = 0;
    double refinement_change = 0;  ///< |distance - coarse_distance|
    int iterations = 0;
    bool converged = false;
    bool upper_bound_only = false;  ///< optimizer stopped early; distance is only an upper bound
    std::vector<RestartOutcome> restarts;
};

namespace detail {

/// e over the lowest `modes` coefficients of the interior knots of `base`.
class EnergyObjective final : public ceres::FirstOrderFunction {
public:
    EnergyObjective(const ClassicalPotential& pot, const Path& base, int modes)
        : pot_(pot), base_(base), modes_(modes)
    {
    }

    int NumParameters() const override { return modes_ * (base_.segments() - 1); }

    Matrix knots(const double* z) const
    {
        Matrix c = base_.knots;
        for (int j = 1; j < base_.segments(); ++j)
            for (int i = 0; i < modes_; ++i) c(i, j) = z[(j - 1) * modes_ + i];
        return c;
    }

    bool Evaluate(const double* z, double* cost, double* gradient) const override
    {
        const Matrix c = knots(z);
        const int m = base_.segments();
        Matrix grad = Matrix::Zero(c.rows(), c.cols());
        double e = 0;
        for (int j = 0; j < m; ++j) {
            const Vector d = c.col(j + 1) - c.col(j);
            const Field mid(pot_.basis(), 0.5 * (c.col(j) + c.col(j + 1)));
            const double dt = base_.times[j + 1] - base_.times[j];
            const double u = evaluate_U(pot_, mid);
            const double d2 = d.squaredNorm();
            e += u * d2 / dt;
            if (gradient) {
                const Vector gu = gradient_U(pot_, mid).coefficients();
                const Vector common = 0.5 * d2 / dt * gu;
                grad.col(j) += common - 2 * u / dt * d;
                grad.col(j + 1) += common + 2 * u / dt * d;
            }
        }
        if (!std::isfinite(e)) return false;
        *cost = e;
        if (gradient)
            for (int j = 1; j < m; ++j)
                for (int i = 0; i < modes_; ++i) gradient[(j - 1) * modes_ + i] = grad(i, j);
        return true;
    }

private:
    const ClassicalPotential& pot_;
    Path base_;
    int modes_;
};

struct Optimized {
    Path path;
    double energy = 0;
    RestartOutcome outcome;
};

inline Optimized minimize_energy(const ClassicalPotential& pot, const Path& start, const AgmonOptions& opts,
                                 std::string label)
{
    const int modes = std::min(opts.search_modes, pot.basis()->size());
    Optimized out;
    out.outcome.start = std::move(label);
    out.outcome.initial_energy = path_energy(pot, start);
    out.path = start;
    if (start.segments() < 2) {
        out.energy = out.outcome.final_energy = out.outcome.initial_energy;
        out.outcome.converged = true;
        return out;
    }
    auto* objective = new EnergyObjective(pot, start, modes);
    std::vector<double> z(objective->NumParameters());
    for (int j = 1; j < start.segments(); ++j)
        for (int i = 0; i < modes; ++i) z[(j - 1) * modes + i] = start.knots(i, j);
    ceres::GradientProblem problem(objective);
    ceres::GradientProblemSolver::Options o;
    o.logging_type = ceres::SILENT;
    o.max_num_iterations = opts.max_iterations;
    o.gradient_tolerance = opts.gradient_tol;
    o.function_tolerance = 1e-15;
    o.parameter_tolerance = 1e-15;
    o.max_lbfgs_rank = 20;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(o, problem, z.data(), &summary);
    out.path.knots = objective->knots(z.data());
    out.energy = path_energy(pot, out.path);
    out.outcome.final_energy = out.energy;
    out.outcome.iterations = static_cast<int>(summary.iterations.size());
    out.outcome.converged = summary.termination_type == ceres::CONVERGENCE;
    return out;
}

inline Path refine_path(const Path& p, const Vector& times)
{
    Path out{p.basis, times, Matrix(p.knots.rows(), times.size())};
    for (Eigen::Index j = 0; j < times.size(); ++j) out.knots.col(j) = path_at(p, times[j]);
    out.knots.col(0) = p.knots.col(0);
    out.knots.col(times.size() - 1) = p.knots.col(p.segments());
    return out;
}

} // namespace detail

/// d^Ag_U(h, k) as sqrt of the minimal path energy on [0, 1].
///
/// Starts: the straight segment and the free harmonic extension, each first
/// resampled to constant Agmon speed on the clustered knot times.
inline GeodesicResult agmon_distance(const ClassicalPotential& pot, const Field& h, const Field& k,
                                     const AgmonOptions& opts = {})
{
    detail::require(opts.knots >= 2, "agmon.knots: must be >= 2");
    detail::require(opts.search_modes >= 1, "agmon.search_modes: must be >= 1");
    detail::require(opts.max_iterations >= 1, "agmon.max_iterations: must be >= 1");
    if (h.basis() != pot.basis() || k.basis() != pot.basis())
        throw ValidationError("agmon_distance: endpoints live on a different basis than the potential");
    GeodesicResult result;
    if ((h.coefficients() - k.coefficients()).norm() == 0.0) {
        result.path = straight_path(h, k, uniform_times(1));
        result.converged = true;
        return result;
    }

    const Vector times = clustered_times(opts.knots);
    std::vector<std::pair<std::string, Path>> starts;
    starts.emplace_back("straight", straight_path(h, k, times));
    {
        Path ext = harmonic_extension(h, k, opts.extension_time, opts.knots).path;
        ext.times = uniform_times(opts.knots);
        starts.emplace_back("harmonic-extension", ext);
    }
    std::vector<detail::Optimized> runs(starts.size());
    detail::parallel_for(static_cast<int>(starts.size()), opts.threads, [&](int i) {
        const Path start = resample_constant_speed(pot, starts[i].second, times);
        runs[i] = detail::minimize_energy(pot, start, opts, starts[i].first);
    });
    std::size_t best = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        result.restarts.push_back(runs[i].outcome);
        result.iterations += runs[i].outcome.iterations;
        if (runs[i].energy < runs[best].energy) best = i;
    }
    detail::Optimized final_run = runs[best];
    result.coarse_distance = std::sqrt(std::max(final_run.energy, 0.0));
    if (opts.refine) {
        const Path fine = detail::refine_path(final_run.path, clustered_times(2 * opts.knots));
        final_run = detail::minimize_energy(pot, fine, opts, runs[best].outcome.start + "-refined");
        result.restarts.push_back(final_run.outcome);
        result.iterations += final_run.outcome.iterations;
    }
    result.energy = final_run.energy;
    result.distance = std::sqrt(std::max(final_run.energy, 0.0));
    result.refinement_change = std::abs(result.distance - result.coarse_distance);
    result.converged = final_run.outcome.converged;
    result.upper_bound_only = !result.converged;
    result.length = path_length(pot, final_run.path);
    result.path = result.length > 0 ? reparametrize_constant_speed(pot, final_run.path) : final_run.path;
    return result;
}

// ---------------------------------------------------------------------------

/// int_a^b sqrt(Q(x)) dx by tanh-sinh quadrature; integrable endpoint zeros of Q are fine.
inline double agmon_1dim(const std::function<double(double)>& q, double a, double b)
{
    detail::require(std::isfinite(a) && std::isfinite(b) && a <= b, "agmon_1dim: need finite a <= b");
    if (a == b) return 0;
    const double scale = std::max({std::abs(q(a)), std::abs(q(b)), std::abs(q(0.5 * (a + b))), 1.0});
    auto integrand = [&](double x) {
        const double v = q(x);
        if (!(v >= -1e-12 * scale)) {
            throw ValidationError("agmon_1dim: Q is negative at x = " + std::to_string(x));
        }
        return std::sqrt(std::max(v, 0.0));
    };
    boost::math::quadrature::tanh_sinh<double> integrator;
    double error = 0;
    const double value = integrator.integrate(integrand, a, b, 1e-14, &error);
    if (!std::isfinite(value) || error > 1e-9 * std::max(std::abs(value), 1.0)) {
        throw NumericalError("agmon_1dim: quadrature did not converge (error " + std::to_string(error) + ")");
    }
    return value;
}

} // namespace pphi2
