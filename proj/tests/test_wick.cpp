#include "pphi2/oracles.hpp"
#include "pphi2/wick.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace pphi2;
using Catch::Approx;

TEST_CASE("quartic Wick coefficients", "[wick]")
{
    const auto t = wick_coefficients(4);
    REQUIRE(t.coefficients.size() == 3);
    CHECK(t.exact(0) == 1);
    CHECK(t.exact(1) == -6);
    CHECK(t.exact(2) == 3);
    CHECK(wick_coefficients(6).exact(3) == -15);
    CHECK(wick_coefficients(0).exact(0) == 1);
    CHECK_THROWS_AS(wick_coefficients(-1), ValidationError);
}

TEST_CASE("large degrees stay exact", "[wick]")
{
    // c_{k, k/2} = (-1)^{k/2} (k-1)!!
    const auto t = wick_coefficients(40);
    BigInt dfact = 1;
    for (int i = 39; i > 1; i -= 2) dfact *= i;
    CHECK(t.exact(20) == dfact);
}

TEST_CASE("Wick powers have zero Gaussian mean", "[wick]")
{
    for (double c2 : {0.3, 1.0, 2.5}) {
        for (int k = 1; k <= 8; ++k) {
            const auto t = wick_coefficients(k);
            const double mean = oracle::gaussian_mean([&](double x) { return t.evaluate(x, c2); }, c2);
            CHECK(std::abs(mean) <= 1e-10);
        }
    }
}

TEST_CASE("Wick powers are orthogonal", "[wick]")
{
    const double c2 = 0.8;
    for (int j = 0; j <= 5; ++j)
        for (int k = 0; k <= 5; ++k) {
            const auto a = wick_coefficients(j), b = wick_coefficients(k);
            const double m = oracle::gaussian_mean([&](double x) { return a.evaluate(x, c2) * b.evaluate(x, c2); }, c2);
            const double expected = j == k ? std::tgamma(k + 1.0) * std::pow(c2, k) : 0.0;
            CHECK(m == Approx(expected).margin(1e-10));
        }
}

TEST_CASE("smearing constant against the Bessel form", "[wick]")
{
    for (int n : {1, 2, 5, 10, 40})
        for (double m : {0.5, 1.0, 2.0}) {
            const double value = smearing_constant(n, m);
            CHECK(std::abs(value - oracle::smearing_constant_bessel(n, m)) <= 1e-8);
        }
    CHECK_THROWS_AS(smearing_constant(0, 1.0), ValidationError);
    CHECK_THROWS_AS(smearing_constant(1, -1.0), ValidationError);
}
