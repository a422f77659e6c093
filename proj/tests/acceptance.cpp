// Acceptance driver: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "pphi2/agmon.hpp"
#include "pphi2/fock.hpp"
#include "pphi2/harmonic.hpp"
#include "pphi2/instanton.hpp"
#include "pphi2/oracles.hpp"
#include "pphi2/quad.hpp"
#include "pphi2/verify.hpp"
#include "pphi2/wick.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

using namespace pphi2;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, bool pass, double seconds, const std::string& detail)
{
    std::printf("[%s] criterion %2d  (%7.2f s)  %s\n", pass ? "PASS" : "FAIL", id, seconds, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

void criterion(int id, const std::function<std::pair<bool, std::string>()>& body)
{
    const auto t0 = Clock::now();
    bool pass = false;
    std::string detail;
    try {
        std::tie(pass, detail) = body();
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    report(id, pass, std::chrono::duration<double>(Clock::now() - t0).count(), detail);
}

std::string num(double x, int digits = 10)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const double d_well = 8.0 / 3.0;

} // namespace

int main()
{
    // 1. free field: d(0, e_1) = sqrt(2)/4 within 2%, <= 60 s
    criterion(1, [] {
        const auto t0 = Clock::now();
        const auto pot = verify::free_field(32);
        const auto r = agmon_distance(pot, Field::zero(pot.basis()), Field::mode(pot.basis(), 1));
        const double target = 0.25 * std::sqrt(2.0), rel = std::abs(r.distance - target) / target, t = seconds_since(t0);
        return std::pair{rel <= 0.02 && t <= 60, "distance " + num(r.distance) + " vs " + num(target) + ", rel " + num(rel, 3)};
    });

    // 2. int_{-1}^{1} |x^2 - 1| dx = 4/3 within 1e-8
    criterion(2, [] {
        const double v = agmon_1dim([](double x) { return (x * x - 1) * (x * x - 1); }, -1, 1);
        const double err = std::abs(v - 4.0 / 3.0);
        return std::pair{err <= 1e-8, "value " + num(v, 16) + ", error " + num(err, 3)};
    });

    // 3. double well a = 1, x0 = 1, l = 2: d(-h0, h0) = 8/3 within 2%, <= 5 min
    double agmon_estimate = d_well;
    criterion(3, [&] {
        const auto t0 = Clock::now();
        const auto pot = verify::double_well(32);
        const auto r = agmon_distance(pot, Field::constant(pot.basis(), -1.0), Field::constant(pot.basis(), 1.0));
        agmon_estimate = r.distance;
        const double rel = std::abs(r.distance - d_well) / d_well, t = seconds_since(t0);
        return std::pair{rel <= 0.02 && t <= 300 && r.converged,
                         "distance " + num(r.distance) + ", rel " + num(rel, 3) + ", converged " + std::to_string(r.converged)};
    });

    // 4. instanton at T = 3: residual <= 1e-6, action within 2%, profile vs tanh <= 1e-2
    criterion(4, [] {
        const auto pot = verify::double_well(16);
        const auto [u, rep] = minimize_action(pot, Field::constant(pot.basis(), -1.0), Field::constant(pot.basis(), 1.0), 3.0);
        const double residual = pde_residual(pot, u);
        const double rel = std::abs(rep.action - d_well) / d_well;
        const double sup = (space_average(u) - tanh_instanton(1, 1, u.times)).cwiseAbs().maxCoeff();
        return std::pair{residual <= 1e-6 && rel <= 0.02 && sup <= 1e-2 && rep.converged,
                         "residual " + num(residual, 3) + ", action " + num(rep.action) + ", tanh sup error " + num(sup, 3)};
    });

    // 5. I(T), T = 1..4, strictly decreasing; (I(4) - d) / d <= 2%
    criterion(5, [&] {
        const auto pot = verify::double_well(16);
        const auto scan = scan_T(pot, Field::constant(pot.basis(), -1.0), Field::constant(pot.basis(), 1.0), {1, 2, 3, 4});
        const double excess = (scan.rows.back().action - agmon_estimate) / agmon_estimate;
        std::string values;
        for (const auto& row : scan.rows) values += num(row.action, 13) + " ";
        return std::pair{scan.strictly_decreasing && excess <= 0.02,
                         "I = " + values + "excess over d " + num(excess, 3) + ", smallest drop " + num(scan.smallest_drop, 3)};
    });

    // 6. one mode, Omega = 1, u = 0.75: HS energy -1/4 to 1e-12; Fock N_max = 200 within 1e-6
    criterion(6, [] {
        auto basis = build_basis(Grid(2.0, 4), 1.0, 1);
        const Vector v = Vector::Constant(4, 0.75);
        const double hs = harmonic_ground_energy(*basis, v).energy;
        const auto h = quadratic_hamiltonian<double>(*basis, v, 1, 200);
        const double fock = lowest_eigenvalues<double>(h, 1).eigenvalues[0];
        return std::pair{std::abs(hs + 0.25) <= 1e-12 && std::abs(fock - hs) <= 1e-6,
                         "HS " + num(hs, 16) + ", Fock " + num(fock, 16)};
    });

    // 7. Wick coefficients, Gaussian means, smearing constant
    criterion(7, [] {
        const auto w4 = wick_coefficients(4);
        const bool exact = w4.exact(1) == -6 && w4.exact(2) == 3;
        double worst_mean = 0;
        for (double c2 : {0.5, 1.0, 2.0})
            for (int k = 1; k <= 8; ++k) {
                const auto t = wick_coefficients(k);
                worst_mean = std::max(worst_mean, std::abs(oracle::gaussian_mean([&](double x) { return t.evaluate(x, c2); }, c2)));
            }
        double worst_c = 0;
        for (int n : {1, 2, 5, 10, 40})
            for (double m : {0.5, 1.0, 2.0}) {
                const double ref = oracle::smearing_constant_bessel(n, m);
                worst_c = std::max(worst_c, std::abs(smearing_constant(n, m) - ref) / ref);
            }
        return std::pair{exact && worst_mean <= 1e-10 && worst_c <= 1e-8,
                         "c41 = -6, c42 = 3: " + std::string(exact ? "yes" : "no") + ", max |E :x^k:| " + num(worst_mean, 3) +
                             ", smearing rel error " + num(worst_c, 3)};
    });

    // 8. single-well quartic, K = 2, N_max = 12, lambda in {2, 4, 8, 16}; <= 10 min
    criterion(8, [] {
        const auto t0 = Clock::now();
        auto basis = build_basis(Grid(1.0, 12), 1.0);
        const ClassicalPotential pot(basis, PolynomialPotential({0, 0, 0, 0, 1}), CutoffFunction::uniform(*basis));
        const auto mins = find_minimizers(pot, {Field::zero(basis)}, 1e-10);
        const auto check = semiclassical_limit_check(pot, mins, {2, 4, 8, 16}, 2, 12);
        std::string diffs;
        for (const auto& r : check.rows) diffs += num(r.difference, 6) + " ";
        return std::pair{check.tail_decreasing && seconds_since(t0) <= 600, "|E1 - target| = " + diffs};
    });

    // 9. tunneling gap, K = 1, N_max = 400, lambda = 4..12; FD oracle on 4 levels
    criterion(9, [] {
        const auto pot = verify::double_well(16);
        std::vector<double> lambdas;
        for (int l = 4; l <= 12; ++l) lambdas.push_back(l);
        ScanOptions so;
        so.spectrum.vectors = false;
        const auto rows = gap_scan<Quad>(pot, lambdas, 1, 400, so);
        bool gaps = true, slopes = true;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            gaps = gaps && rows[i].gap < rows[i - 1].gap && !rows[i].precision_limited;
            if (i >= 2) slopes = slopes && rows[i].slope > rows[i - 1].slope;
        }
        const double last = rows.back().slope, rel = std::abs(last - d_well) / d_well;

        double worst_fd = 0;
        for (double lambda : {4.0, 8.0, 12.0}) {
            const auto fd = oracle::extrapolated_spectrum(oracle::one_mode_potential(pot, lambda), 16.0, 3000, 4);
            const auto h = assemble_hamiltonian<double>(pot, lambda, 1, 400);
            const auto spec = dense_lowest_eigenvalues<double>(h.dense(), 4, false);
            for (int i = 0; i < 4; ++i) worst_fd = std::max(worst_fd, std::abs(spec.eigenvalues[i] - fd[i]) / std::abs(fd[i]));
        }
        return std::pair{gaps && slopes && rel <= 0.25 && worst_fd <= 1e-4,
                         "gap(12) " + num(double(rows.back().gap), 4) + ", slope(12) " + num(last, 6) + " (rel " + num(rel, 3) +
                             "), slopes increasing " + std::to_string(slopes) + ", FD rel " + num(worst_fd, 3)};
    });

    // 10. invariant sweeps
    criterion(10, [] {
        std::mt19937_64 rng(20240917);
        const double le = verify::length_energy_sweep(100, rng);
        const double lb = verify::free_lower_bound_sweep(100, rng);
        const auto rp = verify::reparametrization_sweep(100, rng);
        const double sg = verify::semigroup_sweep(100, rng);
        const double gr = verify::gradient_sweep(10, rng);
        const bool pass = le <= 1e-12 && lb <= 1e-12 && rp.length_change <= 1e-6 && rp.speed_spread <= 0.05 && sg <= 1e-12 && gr <= 1e-6;
        return std::pair{pass, "l/sqrt(eT)-1 " + num(le, 3) + ", bound violation " + num(lb, 3) + ", reparam dl " +
                                   num(rp.length_change, 3) + ", speed spread " + num(rp.speed_spread, 3) + ", semigroup " +
                                   num(sg, 3) + ", gradient " + num(gr, 3)};
    });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
