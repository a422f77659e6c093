#include "pphi2/fock.hpp"
#include "pphi2/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace pphi2;
using Catch::Approx;

namespace {

ClassicalPotential double_well(int nodes = 16)
{
    return make_example_potential(1.0, 1.0, 1, build_basis(Grid(2.0, nodes), 1.0));
}

FockInteraction zero_interaction(const ModeBasis& basis)
{
    return {{0, 0, 0, 0, 1}, Vector::Zero(basis.num_nodes())};
}

} // namespace

TEST_CASE("occupation basis enumeration", "[fock]")
{
    const FockBasis b({1.0, 2.0, 3.0}, 5);
    CHECK(b.size() == 56);  // C(8, 3)
    int last_total = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const auto occ = b.occupation(i);
        CHECK(b.index_of(occ) == static_cast<long long>(i));
        CHECK(b.total(i) <= 5);
        CHECK(b.total(i) >= last_total);
        last_total = b.total(i);
    }
    const std::vector<int> outside{3, 3, 0};
    CHECK(b.index_of(outside) == -1);
    CHECK(b.occupation(1)[0] == 1);  // graded lex: (1,0,0) before (0,1,0)
    CHECK_THROWS_AS(FockBasis(std::vector<double>(8, 1.0), 40, 1000), ValidationError);
}

TEST_CASE("free Hamiltonian is diagonal", "[fock]")
{
    auto basis = build_basis(Grid(2 * std::numbers::pi, 8), 1.0);
    const auto h = assemble_hamiltonian<double>(*basis, zero_interaction(*basis), 3.0, 3, 6);
    for (std::size_t i = 0; i < h.dimension(); ++i) {
        double expected = 0;
        const auto occ = h.basis.occupation(i);
        for (int k = 0; k < 3; ++k) expected += occ[k] * basis->frequency(k);
        CHECK(h.matrix.coeff(i, i) == Approx(expected));
    }
    CHECK(h.max_abs_entry() == Approx(6 * basis->frequency(2)));
    const auto spec = lowest_eigenvalues<double>(h, 3);
    CHECK(spec.eigenvalues[0] == Approx(0.0).margin(1e-10));
    CHECK(spec.eigenvalues[1] == Approx(basis->frequency(0)));
    CHECK(spec.eigenvalues[2] == Approx(basis->frequency(1)));
}

TEST_CASE("vacuum entry carries only the constant term", "[fock]")
{
    const auto pot = double_well();
    const double lambda = 2.5;
    const auto h = assemble_hamiltonian<double>(pot, lambda, 2, 6);
    const double a0 = pot.polynomial().coefficient(0);
    const double g_integral = pot.basis()->integrate(pot.cutoff().samples());
    CHECK(h.matrix.coeff(0, 0) == Approx(lambda * a0 * g_integral).epsilon(1e-12));
}

TEST_CASE("one-mode quadratic perturbation", "[fock]")
{
    auto basis = build_basis(Grid(2.0, 4), 1.0, 1);
    const auto h = quadratic_hamiltonian<double>(*basis, Vector::Constant(4, 0.75), 1, 200);
    const auto spec = lowest_eigenvalues<double>(h, 1, SpectrumOptions{{}, 1000});
    CHECK(std::abs(spec.eigenvalues[0] + 0.25) <= 1e-6);
    CHECK(std::abs(spec.eigenvalues[0] - oracle::bogoliubov_one_mode(1.0, 0.75)) <= 1e-6);
}

TEST_CASE("quadratic Hamiltonians match the harmonic formula", "[fock]")
{
    auto basis = build_basis(Grid(2.0, 16), 1.0);
    const Vector x = basis->grid().nodes();
    const Vector v = (0.3 + 0.2 * (std::numbers::pi * x.array()).cos()).matrix();
    for (int k : {1, 2, 3}) {
        auto truncated = build_basis(basis->grid(), 1.0, k);
        const double target = harmonic_ground_energy(*truncated, v).energy;
        const int n_max = k == 3 ? 24 : 40;
        const auto h = quadratic_hamiltonian<double>(*basis, v, k, n_max);
        const auto spec = lowest_eigenvalues<double>(h, 1);
        CHECK(std::abs(spec.eigenvalues[0] - target) <= 1e-4);
    }
}

TEST_CASE("symmetry and parity structure", "[fock]")
{
    const auto pot = double_well();
    const auto h = assemble_hamiltonian<double>(pot, 3.0, 3, 8);
    CHECK(h.max_asymmetry() <= 1e-12 * h.max_abs_entry());
    CHECK(h.parity_even);
    CHECK(h.parity_violation() == 0.0);

    // odd couplings break parity
    auto basis = pot.basis();
    const auto odd = assemble_hamiltonian<double>(*basis, FockInteraction{{0, 0.3, 0, 0.2, 1}, pot.cutoff().samples()},
                                                  3.0, 2, 8);
    CHECK_FALSE(odd.parity_even);
    CHECK(odd.parity_violation() > 0);
}

TEST_CASE("coupling blocks scale with lambda", "[fock]")
{
    const auto pot = double_well();
    const auto interaction = interaction_of(pot);
    const auto t1 = coupling_terms<double>(*pot.basis(), interaction, 2.0, 2);
    const auto t2 = coupling_terms<double>(*pot.basis(), interaction, 5.0, 2);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) {
        CHECK(t1[i].powers == t2[i].powers);
        const double ratio = std::pow(5.0 / 2.0, 1 - 0.5 * t1[i].degree);
        CHECK(t2[i].coefficient == Approx(ratio * t1[i].coefficient).epsilon(1e-13));
    }
}

TEST_CASE("Lanczos agrees with dense diagonalization", "[fock]")
{
    const auto pot = double_well();
    const auto h = assemble_hamiltonian<double>(pot, 2.0, 3, 9);
    REQUIRE(h.dimension() <= 2000);
    const auto sparse = lowest_eigenvalues<double>(h, 4);
    const auto dense = dense_lowest_eigenvalues<double>(h.dense(), 4);
    const double norm = sparse.norm_estimate;
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(sparse.eigenvalues[i] - dense.eigenvalues[i]) <= 1e-9 * std::max(1.0, std::abs(dense.eigenvalues[i])));
        CHECK(sparse.residuals[i] <= 1e-8 * norm);
    }
}

TEST_CASE("occupation cutoff is variational", "[fock]")
{
    const auto pot = double_well();
    double last = std::numeric_limits<double>::infinity();
    for (int n_max = 4; n_max <= 12; n_max += 2) {
        const auto h = assemble_hamiltonian<double>(pot, 2.0, 2, n_max);
        const double e = lowest_eigenvalues<double>(h, 1, SpectrumOptions{{}, 2000}).eigenvalues[0];
        CHECK(e <= last + 1e-12);
        last = e;
    }
}

TEST_CASE("double-well ground state is simple and even", "[fock]")
{
    const auto pot = double_well();
    const auto rows = gap_scan<double>(pot, {4.0, 5.0, 6.0}, 1, 200);
    for (const auto& r : rows) {
        CHECK(r.e1 < r.e2);
        CHECK(r.gap > 0);
        CHECK(r.ground_parity == 1);
        CHECK(r.excited_parity == -1);
    }
    CHECK(rows[1].gap < rows[0].gap);
    CHECK(rows[2].gap < rows[1].gap);
    CHECK(std::isnan(rows[0].slope));
    CHECK(rows[2].slope > 0);
}

TEST_CASE("parity blocks reproduce the full spectrum", "[fock]")
{
    const auto pot = double_well();
    const auto h = assemble_hamiltonian<double>(pot, 3.0, 2, 10);
    const auto full = dense_lowest_eigenvalues<double>(h.dense(), 4, false);
    std::vector<double> merged;
    for (int parity : {1, -1}) {
        const auto block = dense_lowest_eigenvalues<double>(DenseMatrixT<double>(h.parity_block(parity)), 4, false);
        merged.insert(merged.end(), block.eigenvalues.begin(), block.eigenvalues.end());
    }
    std::sort(merged.begin(), merged.end());
    for (int i = 0; i < 4; ++i) CHECK(merged[i] == Approx(full.eigenvalues[i]).epsilon(1e-12));
}

TEST_CASE("one-mode reduction matches a finite-difference Schrodinger operator", "[fock]")
{
    const auto pot = double_well();
    const double lambda = 5.0;
    const auto v = oracle::one_mode_potential(pot, lambda);
    const auto fd = oracle::extrapolated_spectrum(v, 16.0, 2000, 4);
    const auto h = assemble_hamiltonian<double>(pot, lambda, 1, 300);
    const auto spec = dense_lowest_eigenvalues<double>(h.dense(), 4, false);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(spec.eigenvalues[i] - fd[i]) <= 1e-4 * std::abs(fd[i]));
}

TEST_CASE("semiclassical trend for a single-well quartic", "[fock]")
{
    auto basis = build_basis(Grid(1.0, 12), 1.0);
    const ClassicalPotential pot(basis, PolynomialPotential({0, 0, 0, 0, 1}), CutoffFunction::uniform(*basis));
    const auto minimizers = find_minimizers(pot, {Field::zero(basis)}, 1e-10);
    const auto check = semiclassical_limit_check(pot, minimizers, {2, 4, 8, 16}, 2, 12);
    CHECK(check.tail_decreasing);
    CHECK(check.target == 0.0);
}

TEST_CASE("no interaction means no shift", "[fock]")
{
    auto basis = build_basis(Grid(1.0, 8), 1.0);
    const ClassicalPotential pot(basis, PolynomialPotential({0, 0, 0, 0, 1}), CutoffFunction(Vector::Zero(8)));
    const auto minimizers = find_minimizers(pot, {Field::zero(basis)}, 1e-10);
    const auto check = semiclassical_limit_check(pot, minimizers, {1, 2, 4}, 2, 6);
    for (const auto& r : check.rows) {
        CHECK(r.e1 == Approx(0.0).margin(1e-10));
        CHECK(r.difference == Approx(0.0).margin(1e-10));
    }
}
