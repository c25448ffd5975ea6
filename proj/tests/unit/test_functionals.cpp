#include <doctest.h>

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "flr/error.hpp"
#include "flr/functionals.hpp"

using namespace flr;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;

// (1/b) int_0^b psi_j, split into unit-length pieces of the oscillation so each piece is smooth.
double quadrature_average(std::int64_t j, double b) {
    const std::int64_t k = j / 2;
    const std::int64_t pieces = std::max<std::int64_t>(1, 4 * k);
    const double h = b / static_cast<double>(pieces);
    double total = 0.0;
    for (std::int64_t i = 0; i < pieces; ++i) {
        const double lo = h * static_cast<double>(i);
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            [j](double s) { return basis(j, s); }, lo, lo + h, 3, 1e-12);
    }
    return total / b;
}

double central_difference(std::int64_t j, double t, int q, double h) {
    if (q == 1) return (basis(j, t + h) - basis(j, t - h)) / (2.0 * h);
    return (basis(j, t + h) - 2.0 * basis(j, t) + basis(j, t - h)) / (h * h);
}

}  // namespace

TEST_CASE("basis") {
    CHECK(basis(1, 0.37) == 1.0);
    CHECK(basis(2, 0.0) == doctest::Approx(kSqrt2));
    CHECK(basis(3, 0.25) == doctest::Approx(kSqrt2));
    CHECK(basis(4, 0.25) == doctest::Approx(-kSqrt2));
}

TEST_CASE("point evaluation at zero") {
    const Eigen::VectorXd c = coefficients(PointEval{0.0}, 5);
    const double expected[] = {1, kSqrt2, 0, kSqrt2, 0};
    for (int i = 0; i < 5; ++i) CHECK(c[i] == doctest::Approx(expected[i]).epsilon(1e-15));
    CHECK(gram(PointEval{0.0}, 2) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("local average over the full period") {
    CHECK(coefficient(LocalAverage{1.0}, 1) == 1.0);
    const Eigen::VectorXd c = coefficients(LocalAverage{1.0}, 3);
    CHECK(c[0] == 1.0);
    CHECK(std::abs(c[1]) < 1e-15);
    CHECK(std::abs(c[2]) < 1e-15);
    CHECK(gram(LocalAverage{1.0}, 3) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("first derivative at zero") {
    const Eigen::VectorXd c = coefficients(DerivativeEval{0.0, 1}, 5);
    const double expected[] = {0, 0, 2 * kSqrt2 * kPi, 0, 4 * kSqrt2 * kPi};
    for (int i = 0; i < 5; ++i) CHECK(c[i] == doctest::Approx(expected[i]).epsilon(1e-14));
    for (int i : {0, 1, 3}) CHECK(std::abs(c[i]) < 1e-12);
}

TEST_CASE("local average matches adaptive quadrature") {
    for (double b : {0.1, 0.25, 0.5, 1.0})
        for (std::int64_t j = 1; j <= 200; ++j) {
            INFO("b = " << b << ", j = " << j);
            CHECK(std::abs(coefficient(LocalAverage{b}, j) - quadrature_average(j, b)) < 1e-10);
        }
}

TEST_CASE("derivatives match central differences") {
    for (int q : {1, 2})
        for (double t0 : {0.0, 0.3, 0.71})
            for (std::int64_t j = 2; j <= 50; ++j) {
                const double c = coefficient(DerivativeEval{t0, q}, j);
                const double h = q == 1 ? 1e-5 : 1e-4;
                const double fd = central_difference(j, t0, q, h);
                INFO("q = " << q << ", t0 = " << t0 << ", j = " << j);
                const double scale = std::pow(2.0 * kPi * static_cast<double>(j / 2), q) * kSqrt2;
                CHECK(std::abs(c - fd) <= 1e-4 * std::max(std::abs(c), 1e-3 * scale));
            }
}

TEST_CASE("reconstruction of finite expansions") {
    // h = sum c_j psi_j with c_j = 1/j.
    const int m = 9;
    Eigen::VectorXd c(m);
    for (int j = 1; j <= m; ++j) c[j - 1] = 1.0 / j;
    const auto h = [&](double s) {
        double v = 0.0;
        for (int j = 1; j <= m; ++j) v += c[j - 1] * basis(j, s);
        return v;
    };
    const double t0 = 0.42;
    CHECK(coefficients(PointEval{t0}, m).dot(c) == doctest::Approx(h(t0)).epsilon(1e-12));

    const double step = 1e-4;
    const double d1 = (h(t0 + step) - h(t0 - step)) / (2 * step);
    CHECK(coefficients(DerivativeEval{t0, 1}, m).dot(c) == doctest::Approx(d1).epsilon(1e-6));
    CHECK(coefficients(DerivativeEval{t0, 0}, m).dot(c) == doctest::Approx(h(t0)).epsilon(1e-12));

    const double b = 0.3;
    const double avg =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(h, 0.0, b, 8, 1e-12) / b;
    CHECK(std::abs(coefficients(LocalAverage{b}, m).dot(c) - avg) < 1e-10);
}

TEST_CASE("gram is non-decreasing") {
    for (const FunctionalSpec& spec :
         {FunctionalSpec{PointEval{0.3}}, FunctionalSpec{DerivativeEval{0.2, 2}}, FunctionalSpec{LocalAverage{0.4}},
          FunctionalSpec{Custom{{1.0, -2.0, 0.5}}}}) {
        double prev = 0.0;
        for (std::int64_t m = 1; m <= 64; ++m) {
            const double g = gram(spec, m);
            CHECK(g >= prev);
            prev = g;
        }
    }
}

TEST_CASE("custom coefficients vanish past the supplied length") {
    const Custom c{{3.0, 4.0}};
    CHECK(coefficient(c, 1) == 3.0);
    CHECK(coefficient(c, 2) == 4.0);
    CHECK(coefficient(c, 3) == 0.0);
    CHECK(gram(c, 10) == 25.0);
}

TEST_CASE("validation and parsing") {
    CHECK_THROWS_AS(coefficients(PointEval{0.3}, 0), InvalidArgument);
    CHECK_THROWS_AS(validate(PointEval{std::nan("")}), InvalidArgument);
    CHECK_THROWS_AS(validate(PointEval{1.5}), InvalidArgument);
    CHECK_THROWS_AS(validate(LocalAverage{0.0}), InvalidArgument);
    CHECK_THROWS_AS(validate(LocalAverage{std::nan("")}), InvalidArgument);
    CHECK_THROWS_AS(validate(DerivativeEval{0.3, -1}), InvalidArgument);
    CHECK_THROWS_AS(validate(Custom{{1.0, INFINITY}}), InvalidArgument);
    CHECK_THROWS_AS(parse_functional("bogus:1"), InvalidArgument);

    const auto d = parse_functional("deriv:0.25:2");
    REQUIRE(std::holds_alternative<DerivativeEval>(d));
    CHECK(std::get<DerivativeEval>(d).q == 2);
    CHECK(to_string(parse_functional("custom:1,-2.5,3")) == "custom:1,-2.5,3");
    CHECK(to_string(parse_functional("point:0.3")) == "point:0.3");
    CHECK(to_string(parse_functional("avg:0.25")) == "avg:0.25");
}

TEST_CASE("decay indices") {
    CHECK(*decay_index(PointEval{0.1}) == 0.0);
    CHECK(*decay_index(DerivativeEval{0.1, 2}) == -2.0);
    CHECK(*decay_index(LocalAverage{0.5}) == 1.0);
    CHECK_FALSE(decay_index(Custom{{1.0}}).has_value());
}

TEST_CASE("coefficient profiles bound the squared coefficients") {
    for (const FunctionalSpec& spec : {FunctionalSpec{PointEval{0.37}}, FunctionalSpec{DerivativeEval{0.61, 1}},
                                       FunctionalSpec{DerivativeEval{0.13, 2}}, FunctionalSpec{LocalAverage{0.3}}}) {
        const auto prof = *coefficient_profile(spec);
        for (std::int64_t j = 2; j <= 2000; ++j) {
            const double c = coefficient(spec, j);
            CHECK(c * c <= prof.envelope * std::pow(static_cast<double>(j), 2 * prof.exponent) * (1 + 1e-12));
        }
    }
}
