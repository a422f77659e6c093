#pragma once

// Built-in check suites: independent oracles, structural invariants and the
// closed-form reference values of the double-well and free-field models.

#include "pphi2/agmon.hpp"
#include "pphi2/fock.hpp"
#include "pphi2/harmonic.hpp"
#include "pphi2/instanton.hpp"
#include "pphi2/oracles.hpp"
#include "pphi2/potential.hpp"
#include "pphi2/spectral.hpp"
#include "pphi2/wick.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace pphi2::verify {

enum class Kind { absolute, relative, bound, predicate };

inline const char* to_string(Kind k)
{
    switch (k) {
    case Kind::absolute: return "abs";
    case Kind::relative: return "rel";
    case Kind::bound: return "<=";
    case Kind::predicate: return "holds";
    }
    return "?";
}

struct Check {
    std::string name;
    std::string anchor;  ///< formula or property the check pins down
    double value = 0;
    double expected = 0;  ///< target value, or the upper bound for Kind::bound
    double tolerance = 0;
    Kind kind = Kind::absolute;
    bool passed = false;

    double error() const
    {
        const double e = std::abs(value - expected);
        return kind == Kind::relative && expected != 0 ? e / std::abs(expected) : e;
    }
};

inline Check absolute(std::string name, std::string anchor, double value, double expected, double tol)
{
    Check c{std::move(name), std::move(anchor), value, expected, tol, Kind::absolute, false};
    c.passed = std::isfinite(value) && c.error() <= tol;
    return c;
}

inline Check relative(std::string name, std::string anchor, double value, double expected, double tol)
{
    Check c{std::move(name), std::move(anchor), value, expected, tol, Kind::relative, false};
    c.passed = std::isfinite(value) && c.error() <= tol;
    return c;
}

/// value must not exceed bound (within tol).
inline Check at_most(std::string name, std::string anchor, double value, double bound, double tol = 0)
{
    Check c{std::move(name), std::move(anchor), value, bound, tol, Kind::bound, false};
    c.passed = std::isfinite(value) && value <= bound + tol;
    return c;
}

inline Check holds(std::string name, std::string anchor, bool ok)
{
    return Check{std::move(name), std::move(anchor), ok ? 1.0 : 0.0, 1.0, 0.0, Kind::predicate, ok};
}

struct Context {
    std::uint64_t seed = 1;
    int threads = 1;
};

// ---------------------------------------------------------------------------
// shared models

inline ClassicalPotential free_field(int nodes = 32)
{
    auto basis = build_basis(Grid(2 * std::numbers::pi, nodes), 1.0);
    return ClassicalPotential(basis, PolynomialPotential({0, 0, 0, 0, 1}), CutoffFunction(Vector::Zero(nodes)));
}

inline ClassicalPotential double_well(int nodes = 32)
{
    return make_example_potential(1.0, 1.0, 1, build_basis(Grid(2.0, nodes), 1.0));
}

/// Path with randomly perturbed interior knots and random positive time steps.
inline Path random_path(const Field& h, const Field& k, int segments, double spread, std::mt19937_64& rng)
{
    std::normal_distribution<double> noise(0.0, spread);
    std::uniform_real_distribution<double> steps(0.1, 1.0);
    Vector t(segments + 1);
    t[0] = 0;
    for (int j = 1; j <= segments; ++j) t[j] = t[j - 1] + steps(rng);
    Path p = straight_path(h, k, t);
    for (int j = 1; j < segments; ++j)
        for (Eigen::Index i = 0; i < p.knots.rows(); ++i) p.knots(i, j) += noise(rng);
    return p;
}

inline Field random_field(const BasisPtr& basis, int active_modes, double spread, std::mt19937_64& rng)
{
    std::normal_distribution<double> noise(0.0, spread);
    Vector c = Vector::Zero(basis->size());
    for (int i = 0; i < std::min(active_modes, basis->size()); ++i) c[i] = noise(rng);
    return Field(basis, c);
}

// ---------------------------------------------------------------------------
// invariant sweeps (also used by the acceptance driver)

/// Largest l / sqrt(e T) - 1 over random double-well paths; <= 0 when the bound holds.
inline double length_energy_sweep(int paths, std::mt19937_64& rng)
{
    const auto pot = double_well(16);
    const Field h = Field::constant(pot.basis(), -1.0), k = Field::constant(pot.basis(), 1.0);
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < paths; ++i) {
        const Path p = random_path(h, k, 8 + i % 24, 0.05 + 0.01 * (i % 30), rng);
        const double l = path_length(pot, p), e = path_energy(pot, p);
        worst = std::max(worst, l / std::sqrt(e * p.duration()) - 1);
    }
    return worst;
}

/// Largest relative violation of l >= 1/4 | ||k||_H^2 - ||h||_H^2 | over random free-field paths.
inline double free_lower_bound_sweep(int paths, std::mt19937_64& rng)
{
    const auto pot = free_field(16);
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < paths; ++i) {
        const Field h = random_field(pot.basis(), 6, 0.5, rng), k = random_field(pot.basis(), 6, 0.5, rng);
        const Path p = random_path(h, k, 6 + i % 20, 0.2, rng);
        const double bound = free_field_lower_bound(h, k);
        worst = std::max(worst, (bound - path_length(pot, p)) / std::max(bound, 1e-300));
    }
    return worst;
}

struct ReparamSweep {
    double length_change = 0;  ///< max relative change of l
    double speed_spread = 0;   ///< max relative deviation from l / T
};

inline ReparamSweep reparametrization_sweep(int paths, std::mt19937_64& rng)
{
    const auto pot = double_well(16);
    const Field h = Field::constant(pot.basis(), -1.0), k = Field::constant(pot.basis(), 1.0);
    ReparamSweep out;
    for (int i = 0; i < paths; ++i) {
        const Path p = random_path(h, k, 10 + i % 20, 0.1, rng);
        const double l = path_length(pot, p);
        const Path q = reparametrize_constant_speed(pot, p);
        out.length_change = std::max(out.length_change, std::abs(path_length(pot, q) - l) / l);
        const double target = l / q.duration();
        out.speed_spread = std::max(out.speed_spread, (segment_speeds(pot, q).array() - target).abs().maxCoeff() / target);
    }
    return out;
}

/// max |S_t S_s h - S_{t+s} h| / |h| over random fields and times.
inline double semigroup_sweep(int trials, std::mt19937_64& rng)
{
    const auto basis = build_basis(Grid(2 * std::numbers::pi, 32), 1.0);
    std::uniform_real_distribution<double> time(0.0, 2.0);
    double worst = 0;
    for (int i = 0; i < trials; ++i) {
        const Field h = random_field(basis, 32, 1.0, rng);
        const double t = time(rng), s = time(rng);
        const Field lhs = cauchy_semigroup(cauchy_semigroup(h, s), t);
        const Field rhs = cauchy_semigroup(h, t + s);
        worst = std::max(worst, (lhs - rhs).l2_norm() / h.l2_norm());
    }
    return worst;
}

/// max relative error of grad U against central differences of U.
inline double gradient_sweep(int trials, std::mt19937_64& rng)
{
    const auto pot = double_well(16);
    const auto basis = pot.basis();
    double worst = 0;
    for (int i = 0; i < trials; ++i) {
        const Field h = random_field(basis, 16, 0.5, rng);
        const Vector g = gradient_U(pot, h).coefficients();
        Vector fd(basis->size());
        const double eps = 1e-5;
        for (int k = 0; k < basis->size(); ++k) {
            const Field e = Field::mode(basis, k);
            fd[k] = (evaluate_U(pot, h + eps * e) - evaluate_U(pot, h - eps * e)) / (2 * eps);
        }
        worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), 1.0));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// suites

inline std::vector<Check> oracles(const Context& ctx = {})
{
    std::vector<Check> out;
    const double hs = harmonic_ground_energy(*build_basis(Grid(2.0, 4), 1.0, 1), Vector::Constant(4, 0.75)).energy;
    out.push_back(absolute("one-mode Bogoliubov vs HS formula", "(sqrt(W^2+4u)-W)/2 - u/W = -1/4 ||(A_v^2-A^2)A^-1||^2",
                           hs, oracle::bogoliubov_one_mode(1.0, 0.75), 1e-12));

    {
        auto basis = build_basis(Grid(2.0, 4), 1.0, 1);
        const auto h = quadratic_hamiltonian<double>(*basis, Vector::Constant(4, 0.75), 1, 200);
        SpectrumOptions so;
        so.lanczos.seed = ctx.seed;
        const double e = lowest_eigenvalues<double>(h, 1, so).eigenvalues[0];
        out.push_back(absolute("one-mode Fock diagonalization vs HS formula", "E_0(W a*a + u :phi^2:), N_max = 200", e,
                               hs, 1e-6));
    }

    {
        auto basis = build_basis(Grid(2.0, 16), 1.0);
        const Vector x = basis->grid().nodes();
        const Vector v = (0.3 + 0.2 * (std::numbers::pi * x.array()).cos()).matrix();
        const double target = harmonic_ground_energy(*build_basis(basis->grid(), 1.0, 2), v).energy;
        SpectrumOptions so;
        so.lanczos.seed = ctx.seed;
        const double e = lowest_eigenvalues<double>(quadratic_hamiltonian<double>(*basis, v, 2, 40), 1, so).eigenvalues[0];
        out.push_back(absolute("two-mode quadratic Fock vs HS formula", "E_0(-L_A + Q_v) = -1/4 ||K||_HS^2", e, target,
                               1e-4));
    }

    {
        const auto pot = double_well(16);
        const double lambda = 5.0;
        const auto fd = oracle::extrapolated_spectrum(oracle::one_mode_potential(pot, lambda), 16.0, 2000, 4);
        const auto h = assemble_hamiltonian<double>(pot, lambda, 1, 300);
        const auto spec = dense_lowest_eigenvalues<double>(h.dense(), 4, false);
        double worst = 0;
        for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(spec.eigenvalues[i] - fd[i]) / std::abs(fd[i]));
        out.push_back(at_most("K=1 Fock vs finite-difference Schrodinger, lowest 4", "-y'' + V_lambda(y), Richardson FD",
                              worst, 1e-4));
    }

    {
        double worst = 0;
        for (double c2 : {0.3, 1.0, 2.5})
            for (int k = 1; k <= 8; ++k) {
                const auto t = wick_coefficients(k);
                worst = std::max(worst, std::abs(oracle::gaussian_mean([&](double x) { return t.evaluate(x, c2); }, c2)));
            }
        out.push_back(at_most("Gaussian means of :x^k:, k <= 8", "E[:X^k:] = 0", worst, 1e-10));
    }

    {
        double worst = 0;
        for (int n : {1, 2, 5, 10, 40})
            for (double m : {0.5, 1.0, 2.0}) {
                const double ref = oracle::smearing_constant_bessel(n, m);
                worst = std::max(worst, std::abs(smearing_constant(n, m) - ref) / ref);
            }
        out.push_back(at_most("smearing constant vs Bessel identity", "c_n^2 = e^{m^2/n} K_0(m^2/n) / 2pi", worst, 1e-8));
    }

    {
        const auto pot = double_well(16);
        std::mt19937_64 rng(ctx.seed);
        const Field h = random_field(pot.basis(), 16, 0.5, rng);
        const Matrix hess = 0.5 * schrodinger_matrix(pot, h);
        Matrix fd(hess.rows(), hess.cols());
        const double eps = 1e-5;
        for (int k = 0; k < pot.basis()->size(); ++k) {
            const Field e = Field::mode(pot.basis(), k);
            fd.col(k) = (gradient_U(pot, h + eps * e).coefficients() - gradient_U(pot, h - eps * e).coefficients()) /
                        (2 * eps);
        }
        out.push_back(at_most("Hessian vs differences of the gradient", "D^2 U = (m^2 - Delta + 4v) / 2",
                              (hess - fd).norm() / hess.norm(), 1e-6));
    }

    {
        const auto pot = double_well(16);
        const auto h = assemble_hamiltonian<double>(pot, 2.0, 3, 9);
        SpectrumOptions so;
        so.lanczos.seed = ctx.seed;
        const auto sparse = lowest_eigenvalues<double>(h, 4, so);
        const auto dense = dense_lowest_eigenvalues<double>(h.dense(), 4, false);
        double worst = 0;
        for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(sparse.eigenvalues[i] - dense.eigenvalues[i]));
        out.push_back(at_most("Lanczos vs dense eigenvalues", "K = 3, N_max = 9", worst, 1e-9));
    }

    {
        const auto basis = build_basis(Grid(2 * std::numbers::pi, 8), 1.0);
        const Field h = Field::mode(basis, 1), k = 0.7 * Field::mode(basis, 2);
        const double T = 2.0;
        const Vector& w = basis->frequencies();
        auto integrand = [&](double t) {
            const auto [f, df] = harmonic_extension_at(h, k, T, t);
            return 0.25 * df.squaredNorm() + 0.25 * (w.array() * f.array()).matrix().squaredNorm();
        };
        const double quad = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, T, 15, 1e-13);
        out.push_back(relative("harmonic extension action vs quadrature", "I_{T,0}(f) closed form", harmonic_extension(h, k, T).action,
                               quad, 1e-6));
    }
    return out;
}

inline std::vector<Check> invariants(const Context& ctx = {})
{
    std::vector<Check> out;
    std::mt19937_64 rng(ctx.seed);
    out.push_back(at_most("l <= sqrt(e T) on 100 random paths", "Cauchy-Schwarz: l(c) <= sqrt(e(c))", length_energy_sweep(100, rng),
                          0.0, 1e-12));
    out.push_back(at_most("free-field lower bound on 100 random paths", "l >= 1/4 | ||k||_H^2 - ||h||_H^2 |",
                          free_lower_bound_sweep(100, rng), 0.0, 1e-12));
    const auto rep = reparametrization_sweep(50, rng);
    out.push_back(at_most("reparametrization preserves l", "l(c o phi) = l(c)", rep.length_change, 1e-6));
    out.push_back(at_most("reparametrized speed is constant", "sqrt(U) ||c'|| = l / T", rep.speed_spread, 0.05));
    out.push_back(at_most("semigroup law", "S_t S_s = S_{t+s}", semigroup_sweep(50, rng), 1e-12));
    out.push_back(at_most("gradient vs finite differences", "dU(h)[e_k]", gradient_sweep(5, rng), 1e-6));

    {
        double worst = 0;
        for (auto b : {Boundary::periodic, Boundary::dirichlet, Boundary::neumann}) {
            const auto basis = build_basis(Grid(3.0, 17, b), 1.0);
            const Matrix gram = basis->weight() * basis->shapes().transpose() * basis->shapes();
            worst = std::max(worst, (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff());
        }
        out.push_back(at_most("sampled modes are orthonormal", "(e_i, e_j) = delta_ij", worst, 1e-12));
    }

    {
        const auto pot = double_well(16);
        const auto h = assemble_hamiltonian<double>(pot, 3.0, 3, 8);
        out.push_back(at_most("Hamiltonian symmetry", "H = H^T", h.max_asymmetry(), 1e-12 * h.max_abs_entry()));
        out.push_back(absolute("even P conserves number parity", "[H, (-1)^N] = 0", h.parity_violation(), 0.0, 0.0));
    }

    {
        const auto basis = build_basis(Grid(2.0, 16), 1.0);
        double worst = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < 10; ++i) {
            Vector v = random_field(basis, 8, 0.3, rng).values();
            v = v.cwiseAbs();
            worst = std::max(worst, harmonic_ground_energy(*basis, v).energy);
        }
        out.push_back(at_most("harmonic ground energy is nonpositive", "-1/4 ||.||_HS^2 <= 0", worst, 0.0));
    }

    {
        const auto basis = build_basis(Grid(2 * std::numbers::pi, 32), 1.0);
        bool ok = true;
        for (int i = 0; i < 20; ++i) {
            const Field h = random_field(basis, 32, 1.0, rng);
            ok = ok && sobolev_norm(h, -0.5) <= sobolev_norm(h, 0.0) && sobolev_norm(h, 0.0) <= sobolev_norm(h, 0.5);
        }
        out.push_back(holds("Sobolev norms increase in s", "||h||_{H^s} <= ||h||_{H^t}, s <= t, m >= 1", ok));
    }
    return out;
}

inline std::vector<Check> reference_values(const Context& ctx = {})
{
    std::vector<Check> out;
    const double d_free = 0.25 * std::sqrt(2.0), d_well = 8.0 / 3.0;
    AgmonOptions ao;
    ao.threads = ctx.threads;
    {
        const auto pot = free_field();
        const auto r = agmon_distance(pot, Field::zero(pot.basis()), Field::mode(pot.basis(), 1), ao);
        out.push_back(relative("free-field Agmon distance to e_1", "d(0, h) = 1/4 ||h||_H^2", r.distance, d_free, 0.02));
    }
    out.push_back(absolute("one-dimensional Agmon integral", "int sqrt(Q), Q = (x^2 - 1)^2 on [-1, 1]",
                           agmon_1dim([](double x) { return (x * x - 1) * (x * x - 1); }, -1, 1), 4.0 / 3.0, 1e-8));

    const auto pot = double_well();
    const Field h = Field::constant(pot.basis(), -1.0), k = Field::constant(pot.basis(), 1.0);
    const auto geo = agmon_distance(pot, h, k, ao);
    out.push_back(relative("double-well Agmon distance", "4 sqrt(a) x0^3 l / 3 = 8/3", geo.distance, d_well, 0.02));

    const auto coarse = double_well(16);
    const Field hc = Field::constant(coarse.basis(), -1.0), kc = Field::constant(coarse.basis(), 1.0);
    const auto [u, rep] = minimize_action(coarse, hc, kc, 3.0);
    out.push_back(relative("tanh instanton action = 8/3 ±2%", "I(T = 3) vs 8/3", rep.action, d_well, 0.02));
    out.push_back(at_most("instanton PDE residual", "u_tt + u_xx = m^2 u + 2 P'(u) g", rep.residual, 1e-6));
    out.push_back(at_most("instanton profile vs tanh", "x0 tanh(2 sqrt(a) x0 t)",
                          (space_average(u) - tanh_instanton(1, 1, u.times)).cwiseAbs().maxCoeff(), 1e-2));

    InstantonOptions io;
    io.threads = ctx.threads;
    const auto scan = scan_T(coarse, hc, kc, {1, 2, 3, 4}, io);
    out.push_back(holds("I(T) strictly decreasing, T = 1..4", "I(T) decreases to d^Ag", scan.strictly_decreasing));
    out.push_back(at_most("I(4) exceeds d^Ag by at most 2%", "(I(4) - d) / d", (scan.rows.back().action - geo.distance) / geo.distance,
                          0.02));

    out.push_back(absolute("one-mode HS energy", "-1/4 ||(A_v^2 - A^2) A^-1||^2, W = 1, u = 3/4",
                           harmonic_ground_energy(*build_basis(Grid(2.0, 4), 1.0, 1), Vector::Constant(4, 0.75)).energy, -0.25,
                           1e-12));
    const auto w4 = wick_coefficients(4);
    out.push_back(absolute("Wick c_{4,1}", ":x^4: = x^4 - 6 c^2 x^2 + 3 c^4", w4.coefficient(1), -6, 0));
    out.push_back(absolute("Wick c_{4,2}", ":x^4: = x^4 - 6 c^2 x^2 + 3 c^4", w4.coefficient(2), 3, 0));

    {
        auto basis = build_basis(Grid(1.0, 12), 1.0);
        const ClassicalPotential quartic(basis, PolynomialPotential({0, 0, 0, 0, 1}), CutoffFunction::uniform(*basis));
        const auto mins = find_minimizers(quartic, {Field::zero(basis)}, 1e-10);
        ScanOptions so;
        so.threads = ctx.threads;
        so.spectrum.lanczos.seed = ctx.seed;
        const auto check = semiclassical_limit_check(quartic, mins, {2, 4, 8, 16}, 2, 12, so);
        out.push_back(holds("semiclassical trend, single-well quartic", "|E_1(lambda) - min E_i| decreasing", check.tail_decreasing));
    }

    {
        ScanOptions so;
        so.threads = ctx.threads;
        so.spectrum.vectors = false;
        const auto rows = gap_scan<double>(double_well(16), {4, 5, 6, 7, 8}, 1, 400, so);
        bool decreasing = true;
        for (std::size_t i = 1; i < rows.size(); ++i) decreasing = decreasing && rows[i].gap < rows[i - 1].gap;
        out.push_back(holds("tunneling gap decreasing, lambda = 4..8", "E_2 - E_1 ~ exp(-lambda d)", decreasing));
        out.push_back(relative("log-slope at lambda = 8", "-d log(gap) / d lambda -> d = 8/3", rows.back().slope, d_well, 0.25));
    }
    return out;
}

inline std::vector<Check> run_suite(const std::string& name, const Context& ctx = {})
{
    if (name == "oracles") return oracles(ctx);
    if (name == "invariants") return invariants(ctx);
    if (name == "paper-values") return reference_values(ctx);
    throw ValidationError("suite: expected oracles|invariants|paper-values, got '" + name + "'");
}

} // namespace pphi2::verify
