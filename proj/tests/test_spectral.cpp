#include "pphi2/spectral.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace pphi2;
using Catch::Approx;

namespace {

Vector random_vector(int n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

const double two_pi = 2 * std::numbers::pi;

} // namespace

TEST_CASE("grid spacing and nodes", "[spectral]")
{
    Grid p(2.0, 8, Boundary::periodic);
    CHECK(p.spacing() == Approx(0.25));
    CHECK(p.node(0) == Approx(-1.0));
    Grid d(2.0, 7, Boundary::dirichlet);
    CHECK(d.spacing() == Approx(0.25));
    CHECK(d.node(0) == Approx(-0.75));
    CHECK(d.node(6) == Approx(0.75));
    Grid n(2.0, 8, Boundary::neumann);
    CHECK(n.spacing() == Approx(0.25));
    CHECK(n.node(0) == Approx(-0.875));

    for (const Grid& g : {p, d, n}) {
        const Vector x = g.nodes();
        for (Eigen::Index j = 1; j < x.size(); ++j) CHECK(x[j] > x[j - 1]);
        CHECK(x.minCoeff() >= -1.0);
        CHECK(x.maxCoeff() <= 1.0);
    }
}

TEST_CASE("grid validation", "[spectral]")
{
    CHECK_THROWS_AS(Grid(0.0, 8), ValidationError);
    CHECK_THROWS_AS(Grid(1.0, 1), ValidationError);
    CHECK_THROWS_WITH(parse_boundary("robin"), Catch::Matchers::ContainsSubstring("boundary"));
    CHECK(parse_boundary("neumann") == Boundary::neumann);
}

TEST_CASE("modes are orthonormal under the grid quadrature", "[spectral]")
{
    for (Boundary b : {Boundary::periodic, Boundary::dirichlet, Boundary::neumann}) {
        for (int n : {7, 8, 33}) {
            const ModeBasis basis(Grid(1.7, n, b), 0.8);
            const Matrix gram = basis.weight() * basis.shapes().transpose() * basis.shapes();
            CHECK((gram - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
            const Vector& w = basis.frequencies();
            CHECK(w.minCoeff() >= 0.8 - 1e-15);
            for (Eigen::Index k = 1; k < w.size(); ++k) CHECK(w[k] >= w[k - 1]);
        }
    }
}

TEST_CASE("analytic frequencies", "[spectral]")
{
    const ModeBasis periodic(Grid(two_pi, 16), 1.0);
    CHECK(periodic.frequency(0) == Approx(1.0));
    CHECK(periodic.frequency(1) == Approx(std::sqrt(2.0)));
    CHECK(periodic.frequency(2) == Approx(std::sqrt(2.0)));
    CHECK(periodic.frequency(3) == Approx(std::sqrt(5.0)));

    const ModeBasis dirichlet(Grid(std::numbers::pi, 16, Boundary::dirichlet), 1.0);
    CHECK(dirichlet.frequency(0) == Approx(std::sqrt(2.0)));

    const ModeBasis neumann(Grid(3.0, 16, Boundary::neumann), 0.5);
    CHECK(neumann.frequency(0) == Approx(0.5));
}

TEST_CASE("mode count guard", "[spectral]")
{
    CHECK_THROWS_WITH(ModeBasis(Grid(1.0, 8), 1.0, 9), Catch::Matchers::ContainsSubstring("modes"));
    CHECK_THROWS_AS(ModeBasis(Grid(1.0, 8), -1.0), ValidationError);
    CHECK(ModeBasis(Grid(1.0, 8), 1.0, 3).size() == 3);
}

TEST_CASE("node and mode round trip", "[spectral]")
{
    for (Boundary b : {Boundary::periodic, Boundary::dirichlet, Boundary::neumann}) {
        auto basis = build_basis(Grid(2.5, 24, b), 1.3);
        const Vector values = random_vector(24, 7);
        const Field f = Field::from_values(basis, values);
        CHECK((f.values() - values).norm() <= 1e-10 * values.norm());
    }
}

TEST_CASE("fields on different bases do not mix", "[spectral]")
{
    auto a = build_basis(Grid(1.0, 8), 1.0);
    auto b = build_basis(Grid(1.0, 8), 1.0);
    CHECK_THROWS_AS(Field::zero(a) + Field::zero(b), ValidationError);
}

TEST_CASE("spectral functions", "[spectral]")
{
    auto basis = build_basis(Grid(two_pi, 16), 1.0);
    const Field e1 = Field::mode(basis, 1);
    const Field f(basis, random_vector(16, 3));

    CHECK((apply_spectral_function([](double) { return 1.0; }, f).coefficients() - f.coefficients()).norm() == 0.0);
    const Field root = apply_spectral_function([](double s) { return std::sqrt(s); }, e1);
    CHECK(root.coefficients()[1] == Approx(std::sqrt(2.0)));
    CHECK(root.coefficients().norm() == Approx(std::sqrt(2.0)));

    auto inv = [](double s) { return 1 / std::sqrt(s); };
    auto fwd = [](double s) { return std::sqrt(s); };
    const Field back = apply_spectral_function(fwd, apply_spectral_function(inv, f));
    CHECK((back.coefficients() - f.coefficients()).norm() <= 1e-10 * f.l2_norm());

    auto g1 = [](double s) { return std::pow(s, 0.3); };
    auto g2 = [](double s) { return std::exp(-0.1 * s); };
    const Field composed = apply_spectral_function(g1, apply_spectral_function(g2, f));
    const Field product = apply_spectral_function([&](double s) { return g1(s) * g2(s); }, f);
    CHECK((composed.coefficients() - product.coefficients()).norm() <= 1e-10 * f.l2_norm());

    CHECK_THROWS_AS(apply_spectral_function([](double) { return std::nan(""); }, f), NumericalError);
}

TEST_CASE("sobolev norms", "[spectral]")
{
    auto basis = build_basis(Grid(two_pi, 16), 1.0);
    CHECK(sobolev_norm(Field::mode(basis, 1), 0.5) == Approx(std::pow(2.0, 0.25)).epsilon(1e-12));
    CHECK(sobolev_norm(Field::zero(basis), 0.7) == 0.0);

    const Vector values = random_vector(16, 11);
    const Field f = Field::from_values(basis, values);
    CHECK(sobolev_norm(f, 0.0) == Approx(std::sqrt(basis->integrate(values.cwiseAbs2()))).epsilon(1e-10));

    // m >= 1: nondecreasing in s
    double last = 0;
    for (double s : {0.0, 0.25, 0.5, 1.0, 2.0}) {
        const double n = sobolev_norm(f, s);
        CHECK(n >= last);
        last = n;
    }
}

TEST_CASE("cauchy semigroup", "[spectral]")
{
    auto basis = build_basis(Grid(two_pi, 16), 1.0);
    const Field e1 = Field::mode(basis, 1);
    CHECK(cauchy_semigroup(e1, 1.0).coefficients()[1] == Approx(std::exp(-std::sqrt(2.0))));
    CHECK_THROWS_AS(cauchy_semigroup(e1, -0.1), ValidationError);

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Field h(basis, random_vector(16, seed));
        CHECK((cauchy_semigroup(h, 0.0).coefficients() - h.coefficients()).norm() == 0.0);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unit(0.0, 2.0);
        const double t = unit(rng), s = unit(rng);
        const Field lhs = cauchy_semigroup(cauchy_semigroup(h, s), t);
        const Field rhs = cauchy_semigroup(h, t + s);
        CHECK((lhs - rhs).l2_norm() <= 1e-12 * h.l2_norm());
        for (double r : {0.0, 0.5, 1.0}) CHECK(sobolev_norm(cauchy_semigroup(h, t), r) <= sobolev_norm(h, r));
    }
}
