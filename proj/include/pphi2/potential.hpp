#pragma once

// Classical potential U(h) = 1/4 int h'^2 + int (m^2/4 h^2 + P(h) g), its L^2
// gradient and Hessian, minimizer search, and the double-well example family.

#include "pphi2/detail/parallel.hpp"
#include "pphi2/error.hpp"
#include "pphi2/spectral.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pphi2 {

/// P(x) = sum_k a_k x^k, even degree >= 4 with positive leading coefficient.
class PolynomialPotential {
public:
    PolynomialPotential() = default;
    explicit PolynomialPotential(std::vector<double> coefficients) : a_(std::move(coefficients))
    {
        while (a_.size() > 1 && a_.back() == 0.0) a_.pop_back();
        const int degree = static_cast<int>(a_.size()) - 1;
        detail::require(degree >= 4 && degree % 2 == 0, "polynomial: degree must be even and >= 4");
        detail::require(a_.back() > 0, "polynomial: leading coefficient must be positive");
        for (double c : a_) detail::require(std::isfinite(c), "polynomial: coefficients must be finite");
    }

    int degree() const { return static_cast<int>(a_.size()) - 1; }
    const std::vector<double>& coefficients() const { return a_; }
    double coefficient(int k) const { return k < static_cast<int>(a_.size()) ? a_[k] : 0.0; }

    bool is_even() const
    {
        for (std::size_t k = 1; k < a_.size(); k += 2)
            if (a_[k] != 0.0) return false;
        return true;
    }

    double operator()(double x) const
    {
        double r = 0;
        for (auto it = a_.rbegin(); it != a_.rend(); ++it) r = r * x + *it;
        return r;
    }

    double derivative(double x) const
    {
        double r = 0;
        for (int k = degree(); k >= 1; --k) r = r * x + k * a_[k];
        return r;
    }

    double second_derivative(double x) const
    {
        double r = 0;
        for (int k = degree(); k >= 2; --k) r = r * x + k * (k - 1) * a_[k];
        return r;
    }

    PolynomialPotential shifted(double constant) const
    {
        auto a = a_;
        a[0] += constant;
        return PolynomialPotential(std::move(a));
    }

private:
    std::vector<double> a_;
};

/// Node samples of the nonnegative spatial cutoff g.
class CutoffFunction {
public:
    CutoffFunction() = default;
    explicit CutoffFunction(Vector samples) : samples_(std::move(samples))
    {
        for (Eigen::Index j = 0; j < samples_.size(); ++j) {
            detail::require(std::isfinite(samples_[j]) && samples_[j] >= 0, "cutoff: samples must be finite and >= 0");
        }
    }

    static CutoffFunction uniform(const ModeBasis& basis, double value = 1.0)
    {
        return CutoffFunction(Vector::Constant(basis.num_nodes(), value));
    }

    const Vector& samples() const { return samples_; }

private:
    Vector samples_;
};

class ClassicalPotential {
public:
    ClassicalPotential(BasisPtr basis, PolynomialPotential p, CutoffFunction g)
        : basis_(std::move(basis)), p_(std::move(p)), g_(std::move(g))
    {
        detail::require(basis_ != nullptr, "potential: null basis");
        detail::require(g_.samples().size() == basis_->num_nodes(), "cutoff: sample count must equal num_nodes");
    }

    const BasisPtr& basis() const { return basis_; }
    const PolynomialPotential& polynomial() const { return p_; }
    const CutoffFunction& cutoff() const { return g_; }
    double mass() const { return basis_->mass(); }

    /// Value of the constant shift applied to make min U = 0 (zero if none).
    double normalization_shift() const { return shift_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    void set_normalization(double shift) { shift_ = shift; }
    void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

private:
    BasisPtr basis_;
    PolynomialPotential p_;
    CutoffFunction g_;
    double shift_ = 0;
    std::vector<std::string> warnings_;
};

inline double evaluate_U(const ClassicalPotential& pot, const Field& h)
{
    const ModeBasis& basis = *pot.basis();
    if (h.basis() != pot.basis()) throw ValidationError("evaluate_U: field lives on a different basis");
    const Vector& w = basis.frequencies();
    const Vector& c = h.coefficients();
    const double quadratic = 0.25 * (w.array().square() * c.array().square()).sum();
    const Vector x = h.values();
    const Vector& g = pot.cutoff().samples();
    double interaction = 0;
    for (Eigen::Index j = 0; j < x.size(); ++j) interaction += pot.polynomial()(x[j]) * g[j];
    const double u = quadratic + basis.weight() * interaction;
    if (!std::isfinite(u)) throw NumericalError("evaluate_U: non-finite value (overflow)");
    return u;
}

/// L^2 gradient 1/2 (m^2 - Delta) h + P'(h) g, as a Field.
inline Field gradient_U(const ClassicalPotential& pot, const Field& h)
{
    const ModeBasis& basis = *pot.basis();
    const Vector x = h.values();
    const Vector& g = pot.cutoff().samples();
    Vector force(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) force[j] = pot.polynomial().derivative(x[j]) * g[j];
    Vector c = 0.5 * basis.frequencies().array().square().matrix().cwiseProduct(h.coefficients()) +
               basis.to_modes(force);
    return Field(h.basis(), std::move(c));
}

/// v(x) = 1/2 P''(h(x)) g(x).
inline Vector hessian_potential(const ClassicalPotential& pot, const Field& h)
{
    const Vector x = h.values();
    const Vector& g = pot.cutoff().samples();
    Vector v(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) v[j] = 0.5 * pot.polynomial().second_derivative(x[j]) * g[j];
    return v;
}

/// Mode-space matrix of m^2 - Delta + 4 v with v = 1/2 P''(h) g. Twice the Hessian of U.
inline Matrix schrodinger_matrix(const ClassicalPotential& pot, const Field& h)
{
    const ModeBasis& basis = *pot.basis();
    Matrix a = 4.0 * basis.multiplication_matrix(hessian_potential(pot, h));
    a.diagonal() += basis.frequencies().array().square().matrix();
    return 0.5 * (a + a.transpose());
}

inline double hessian_smallest_eigenvalue(const ClassicalPotential& pot, const Field& h)
{
    const Matrix a = schrodinger_matrix(pot, h);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("hessian_smallest_eigenvalue: eigensolver failed");
    return solver.eigenvalues()[0];
}

struct MinimizerOptions {
    int max_iterations = 200;
    double dedup_distance = 1e-4;
    double degeneracy_threshold = 1e-8;
    bool default_starts = true;
    int threads = 1;
};

struct Minimizer {
    Field field;
    double value = 0;
    double smallest_eigenvalue = 0;
    bool nondegenerate = false;
};

struct StartOutcome {
    double start_value = 0;
    double final_value = 0;
    double gradient_norm = 0;
    int iterations = 0;
    bool converged = false;
    bool saddle = false;
    int minimizer = -1;  ///< index into MinimizerReport::minimizers, -1 if none
};

struct MinimizerReport {
    std::vector<Minimizer> minimizers;
    std::vector<StartOutcome> starts;
    std::vector<std::string> warnings;

    double min_value() const
    {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& z : minimizers) m = std::min(m, z.value);
        return m;
    }
};

namespace detail {

struct DescentResult {
    Field field;
    StartOutcome outcome;
};

/// Damped Newton with a gradient-descent fallback on indefinite Hessians.
inline DescentResult descend(const ClassicalPotential& pot, Field h, double tol, int max_iterations)
{
    StartOutcome out;
    double u = evaluate_U(pot, h);
    out.start_value = u;
    for (int it = 0; it < max_iterations; ++it) {
        const Vector g = gradient_U(pot, h).coefficients();
        out.gradient_norm = g.norm();
        out.iterations = it;
        if (out.gradient_norm <= tol) {
            out.converged = true;
            break;
        }
        const Matrix hess = 0.5 * schrodinger_matrix(pot, h);
        Vector d;
        Eigen::LLT<Matrix> llt(hess);
        if (llt.info() == Eigen::Success) {
            d = -llt.solve(g);
        } else {
            d = -g;
        }
        double slope = g.dot(d);
        if (!(slope < 0)) {
            d = -g;
            slope = -g.squaredNorm();
        }
        double step = 1;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            Field trial(h.basis(), h.coefficients() + step * d);
            double ut;
            try {
                ut = evaluate_U(pot, trial);
            } catch (const NumericalError&) {
                step *= 0.5;
                continue;
            }
            if (ut <= u + 1e-4 * step * slope + 1e-14 * (1 + std::abs(u))) {
                h = std::move(trial);
                u = ut;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    if (!out.converged) {
        out.gradient_norm = gradient_U(pot, h).l2_norm();
        out.converged = out.gradient_norm <= tol;
    }
    out.final_value = u;
    return {std::move(h), out};
}

/// Local minima of c -> U(c * 1) on c != 0, used as default constant starts.
inline std::vector<double> constant_well_positions(const ClassicalPotential& pot)
{
    const auto& a = pot.polynomial().coefficients();
    double bound = 1;
    for (std::size_t k = 0; k + 1 < a.size(); ++k) bound = std::max(bound, 1 + std::abs(a[k] / a.back()));
    bound = std::min(bound, 1e3);
    const int samples = 801;
    std::vector<double> c(samples), u(samples);
    for (int i = 0; i < samples; ++i) {
        c[i] = -bound + 2 * bound * i / (samples - 1);
        u[i] = evaluate_U(pot, Field::constant(pot.basis(), c[i]));
    }
    std::vector<double> wells;
    for (int i = 1; i + 1 < samples; ++i) {
        if (u[i] < u[i - 1] && u[i] <= u[i + 1] && std::abs(c[i]) > 1e-12) wells.push_back(c[i]);
    }
    return wells;
}

} // namespace detail

/// Multi-start search for local minimizers of U.
///
/// Every start is descended independently; converged points with a
/// nonnegative smallest Hessian eigenvalue are deduplicated by L^2 distance.
/// Points where the Hessian is negative are recorded as saddles on their
/// start, not as minimizers. Output is sorted by U, then by the first
/// mode coefficient.
inline MinimizerReport find_minimizers(const ClassicalPotential& pot, std::vector<Field> starts, double tol,
                                       const MinimizerOptions& opts = {})
{
    detail::require(tol > 0, "find_minimizers: tol must be positive");
    if (opts.default_starts) {
        for (double c : detail::constant_well_positions(pot)) starts.push_back(Field::constant(pot.basis(), c));
    }
    detail::require(!starts.empty(), "find_minimizers: at least one start is required");

    std::vector<detail::DescentResult> results(starts.size());
    detail::parallel_for(static_cast<int>(starts.size()), opts.threads, [&](int i) {
        results[i] = detail::descend(pot, starts[i], tol, opts.max_iterations);
    });

    MinimizerReport report;
    std::vector<Minimizer> found;
    for (auto& r : results) {
        if (!r.outcome.converged) {
            report.warnings.push_back("start did not converge: gradient norm " + std::to_string(r.outcome.gradient_norm));
            report.starts.push_back(r.outcome);
            continue;
        }
        const double delta = hessian_smallest_eigenvalue(pot, r.field);
        if (delta < -opts.degeneracy_threshold) {
            r.outcome.saddle = true;
            report.starts.push_back(r.outcome);
            continue;
        }
        bool duplicate = false;
        for (auto& z : found) {
            if ((z.field - r.field).l2_norm() < opts.dedup_distance) {
                duplicate = true;
                if (r.outcome.final_value < z.value) {
                    z.field = r.field;
                    z.value = r.outcome.final_value;
                    z.smallest_eigenvalue = delta;
                }
                break;
            }
        }
        if (!duplicate) {
            found.push_back({r.field, r.outcome.final_value, delta, delta > opts.degeneracy_threshold});
        }
        report.starts.push_back(r.outcome);
    }
    std::sort(found.begin(), found.end(), [](const Minimizer& a, const Minimizer& b) {
        if (a.value != b.value && std::abs(a.value - b.value) > 1e-12 * (1 + std::abs(a.value))) return a.value < b.value;
        return a.field.coefficients()[0] < b.field.coefficients()[0];
    });
    // Link each start to its minimizer after sorting.
    for (std::size_t i = 0; i < results.size(); ++i) {
        auto& outcome = report.starts[i];
        if (!outcome.converged || outcome.saddle) continue;
        for (std::size_t z = 0; z < found.size(); ++z) {
            if ((found[z].field - results[i].field).l2_norm() < opts.dedup_distance) {
                outcome.minimizer = static_cast<int>(z);
                break;
            }
        }
    }
    for (std::size_t i = 0; i < found.size(); ++i) {
        if (!found[i].nondegenerate) {
            report.warnings.push_back("minimizer " + std::to_string(i) + " is degenerate: Hessian nondegeneracy unverified");
        }
        for (std::size_t j = i + 1; j < found.size(); ++j) {
            if ((found[i].field - found[j].field).l2_norm() < 100 * opts.dedup_distance) {
                report.warnings.push_back("minimizers " + std::to_string(i) + " and " + std::to_string(j) +
                                          " form a near-degenerate cluster");
            }
        }
    }
    report.minimizers = std::move(found);
    return report;
}

enum class ExampleVariant {
    /// P(x) + m^2 x^2 / 4 = a (x^2 - x0^2)^2 with g = 1: constant wells at +-x0.
    interval,
    /// P(x) = a (x^2 - x0^2)^{2 M0} on an arbitrary cutoff, shifted so min U = 0.
    cutoff_family,
};

struct ExampleOptions {
    ExampleVariant variant = ExampleVariant::interval;
    std::optional<Vector> cutoff;  ///< node samples of g; uniform 1 when absent
    double tol = 1e-10;
};

namespace detail {

inline std::vector<double> binomial_power(double a, double x0, int m0)
{
    // a (x^2 - x0^2)^{2 m0}
    const int n = 2 * m0;
    std::vector<double> coeffs(2 * n + 1, 0.0);
    double binom = 1;
    for (int j = 0; j <= n; ++j) {
        coeffs[2 * j] = a * binom * std::pow(-x0 * x0, n - j);
        binom = binom * (n - j) / (j + 1);
    }
    return coeffs;
}

} // namespace detail

/// Symmetric double-well potentials with known zero set {+-h0}.
///
/// The returned potential is shifted by a constant so that min U = 0 over
/// the located minimizers.
inline ClassicalPotential make_example_potential(double a, double x0, int m0, BasisPtr basis,
                                                 const ExampleOptions& opts = {})
{
    detail::require(a > 0 && std::isfinite(a), "example.a: must be positive");
    detail::require(x0 > 0 && std::isfinite(x0), "example.x0: must be positive");
    detail::require(m0 >= 1, "example.M0: must be a positive integer");
    const double m = basis->mass();
    const double l = basis->grid().length();

    std::vector<double> coeffs = detail::binomial_power(a, x0, m0);
    std::vector<std::string> warnings;
    CutoffFunction g = opts.cutoff ? CutoffFunction(*opts.cutoff) : CutoffFunction::uniform(*basis);
    if (opts.variant == ExampleVariant::interval) {
        detail::require(m0 == 1, "example.M0: the interval variant requires M0 = 1");
        detail::require(!opts.cutoff, "example.cutoff: the interval variant uses g = 1");
        // a (x^2 - b^2)^2 - a (b^4 - x0^4) with b^2 = x0^2 + m^2 / (8 a)
        coeffs[2] -= 0.25 * m * m;
        if (2 * a * x0 * x0 * l * l > std::numbers::pi * std::numbers::pi) {
            warnings.push_back("2 a x0^2 l^2 > pi^2: the wells need not be constant and the closed-form "
                               "instanton does not apply");
        }
    }

    ClassicalPotential unshifted(basis, PolynomialPotential(coeffs), g);
    std::vector<Field> starts{Field::constant(basis, x0), Field::constant(basis, -x0), Field::constant(basis, 0.5 * x0),
                              Field::constant(basis, -0.5 * x0)};
    MinimizerOptions mopts;
    mopts.default_starts = false;
    const MinimizerReport report = find_minimizers(unshifted, starts, opts.tol, mopts);
    int nontrivial = 0;
    for (const auto& z : report.minimizers) {
        if (z.field.l2_norm() > 1e-6 && z.nondegenerate) ++nontrivial;
    }
    if (nontrivial < 2) {
        throw ValidationError("example.a: too small, the double well degenerates to a single minimizer");
    }
    const double g_integral = basis->integrate(g.samples());
    detail::require(g_integral > 0, "example.cutoff: integral of g must be positive");
    const double shift = -report.min_value() / g_integral;

    ClassicalPotential pot(basis, unshifted.polynomial().shifted(shift), g);
    pot.set_normalization(shift);
    for (auto& w : warnings) pot.add_warning(std::move(w));
    return pot;
}

} // namespace pphi2
