#include <doctest.h>

#include <cmath>
#include <sstream>

#include "flr/error.hpp"
#include "flr/sequences.hpp"
#include "flr/simulate.hpp"

using namespace flr;

namespace {

SimConfig config(std::int64_t n, double sigma, std::uint64_t seed) {
    SimConfig c;
    c.n = n;
    c.sigma = sigma;
    c.seed = seed;
    return c;
}

double column_mean(const Eigen::MatrixXd& x, Eigen::Index j) { return x.col(j).mean(); }

}  // namespace

TEST_CASE("fourth root and truncation") {
    CHECK(fourth_root_floor(15) == 1);
    CHECK(fourth_root_floor(16) == 2);
    CHECK(fourth_root_floor(80) == 2);
    CHECK(fourth_root_floor(81) == 3);
    CHECK(fourth_root_floor(10000) == 10);
    CHECK(fourth_root_floor(9999) == 9);
    CHECK(default_truncation(100) == 128);
    CHECK(default_truncation(100000000) == 400);
}

TEST_CASE("make_slope") {
    SequenceModel pp;
    const auto one = make_slope(pp, 1, 1.0);
    CHECK(one.coeffs[0] == doctest::Approx(1.0).epsilon(1e-15));

    for (std::int64_t J : {1, 7, 100, 400}) {
        const auto s = make_slope(pp, J, 0.9);
        double norm = 0.0;
        for (std::int64_t j = 1; j <= J; ++j) norm += beta(pp, j) * s.coeffs[j - 1] * s.coeffs[j - 1];
        CHECK(norm == doctest::Approx(0.9).epsilon(1e-12));
        CHECK(s.true_norm_beta_sq == doctest::Approx(0.9).epsilon(1e-12));
    }
    const auto s = make_slope(pp, 100, 0.9);
    CHECK(s.coeffs[1] / s.coeffs[0] == doctest::Approx(0.25).epsilon(1e-14));

    SequenceModel ep;
    ep.regime = Regime::EP;
    ep.p = 0.5;
    ep.r = 2.0;
    const auto se = make_slope(ep, 128, 0.5);
    double norm = 0.0;
    for (std::int64_t j = 1; j <= 128; ++j) norm += std::exp(log_beta(ep, j)) * se.coeffs[j - 1] * se.coeffs[j - 1];
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(se.true_norm_beta_sq <= ep.r);
}

TEST_CASE("pure noise has unit variance") {
    auto c = config(100000, 1.0, 11);
    c.J = 68;
    SlopeSpec zero;
    zero.coeffs = Eigen::VectorXd::Zero(68);
    const auto d = draw_dataset(c, zero);
    const double mean = d.y.mean();
    const double var = (d.y.array() - mean).square().sum() / static_cast<double>(d.n() - 1);
    const double se = std::sqrt(2.0 / static_cast<double>(d.n()));
    CHECK(std::abs(var - 1.0) < 3 * se);
}

TEST_CASE("column variances follow gamma") {
    auto c = config(100000, 1.0, 5);
    c.J = 68;
    const auto slope = make_slope(c.model, c.J, 0.9);
    const auto d = draw_dataset(c, slope);
    for (Eigen::Index j = 0; j < 20; ++j) {
        const double g = 1.0 / static_cast<double>((j + 1) * (j + 1));
        const double var = d.x.col(j).squaredNorm() / static_cast<double>(d.n());
        CHECK(std::abs(var - g) < 3 * g * std::sqrt(2.0 / static_cast<double>(d.n())));
        CHECK(std::abs(column_mean(d.x, j)) < 4 * std::sqrt(g / static_cast<double>(d.n())));
    }
}

TEST_CASE("standardized columns look Gaussian") {
    auto c = config(100000, 1.0, 9);
    c.J = 68;
    const auto d = draw_dataset(c, make_slope(c.model, c.J, 0.9));
    for (Eigen::Index j : {0, 4, 16}) {
        const Eigen::ArrayXd z = d.x.col(j).array() * static_cast<double>(j + 1);
        const double m = z.mean();
        const double v = (z - m).square().mean();
        const double skew = (z - m).cube().mean() / std::pow(v, 1.5);
        const double kurt = (z - m).square().square().mean() / (v * v) - 3.0;
        CHECK(std::abs(skew) < 0.05);
        CHECK(std::abs(kurt) < 0.1);
    }
}

TEST_CASE("noise is uncorrelated with the regressors") {
    auto c = config(100000, 0.7, 21);
    c.J = 68;
    const auto slope = make_slope(c.model, c.J, 0.9);
    const auto d = draw_dataset(c, slope);
    const Eigen::VectorXd resid = d.y - d.x * slope.coeffs;
    for (Eigen::Index j = 0; j < 16; ++j) {
        const Eigen::ArrayXd prod = resid.array() * d.x.col(j).array();
        const double m = prod.mean();
        const double se = std::sqrt((prod - m).square().mean() / static_cast<double>(d.n()));
        CHECK(std::abs(m) < 3.5 * se);
    }
}

TEST_CASE("same seed gives identical data, different seeds differ") {
    auto c = config(300, 1.0, 42);
    const auto slope = make_slope(c.model, c.truncation(), 0.9);
    const auto a = draw_dataset(c, slope);
    const auto b = draw_dataset(c, slope);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    c.seed = 43;
    const auto e = draw_dataset(c, slope);
    CHECK(a.y != e.y);
}

TEST_CASE("rotation mixes pairs and keeps column energy of each pair") {
    auto c = config(20000, 1.0, 3);
    c.J = 44;
    c.rotation = 0.4;
    SlopeSpec zero;
    zero.coeffs = Eigen::VectorXd::Zero(44);
    auto c0 = c;
    c0.rotation = 0.0;
    const auto rot = draw_dataset(c, zero);
    const auto diag = draw_dataset(c0, zero);
    const double e_rot = rot.x.leftCols(2).squaredNorm();
    const double e_diag = diag.x.leftCols(2).squaredNorm();
    CHECK(e_rot == doctest::Approx(e_diag).epsilon(1e-12));
    CHECK(std::abs(rot.x.col(0).dot(rot.x.col(1))) > 10 * std::abs(diag.x.col(0).dot(diag.x.col(1))));
}

TEST_CASE("config validation") {
    auto c = config(100, 1.0, 1);
    c.J = 4;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);  // J >= 4 floor(n^{1/4}) = 12
    c.J = 12;
    CHECK_NOTHROW(c.validate());
    c.sigma = -1.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c.sigma = 1.0;
    c.slope_scale = 1.5;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    auto d = config(100, 1.0, 1);
    const auto s = make_slope(d.model, 7, 0.9);
    CHECK_THROWS_AS(draw_dataset(d, s), InvalidArgument);
}

TEST_CASE("true value") {
    SequenceModel pp;
    SlopeSpec e1;
    e1.coeffs = Eigen::VectorXd::Zero(128);
    e1.coeffs[0] = 1.0;
    CHECK(true_value(PointEval{0.0}, e1, pp).value == 1.0);

    SlopeSpec e2;
    e2.coeffs = Eigen::VectorXd::Zero(128);
    e2.coeffs[1] = 1.0;
    CHECK(std::abs(true_value(LocalAverage{1.0}, e2, pp).value) < 1e-15);

    const auto slope = make_slope(pp, 128, 0.9);
    for (std::size_t k = 0; k < 5; ++k) {
        std::vector<double> coeffs(k + 1, 0.0);
        coeffs[k] = 1.0;
        const auto tv = true_value(Custom{coeffs}, slope, pp);
        CHECK(tv.value == slope.coeffs[static_cast<Eigen::Index>(k)]);
        CHECK(tv.tail_bound == 0.0);
    }

    // Point evaluation, PP p = 1: tail = sum_{j>J} l_j^2 / j^2 <= 2 / J.
    const auto tv = true_value(PointEval{0.3}, slope, pp);
    CHECK(tv.tail_bound > 0.0);
    CHECK(tv.tail_bound <= std::sqrt(2.0 / 128.0));

    // Second derivative with p = 1: the tail diverges.
    const auto div = true_value(DerivativeEval{0.3, 2}, slope, pp);
    CHECK(std::isinf(div.tail_bound));
}

TEST_CASE("csv round trip is exact") {
    auto c = config(50, 1.0, 17);
    const auto slope = make_slope(c.model, c.truncation(), 0.9);
    const auto d = draw_dataset(c, slope);
    std::stringstream ss;
    write_dataset_csv(ss, d);
    const std::string text = ss.str();
    CHECK(text.rfind("y,x1,x2,", 0) == 0);
    const auto back = read_dataset_csv(ss);
    CHECK(back.x == d.x);
    CHECK(back.y == d.y);

    std::stringstream again;
    write_dataset_csv(again, back);
    CHECK(again.str() == text);

    std::istringstream bad("y,x1\n1,2,3\n");
    CHECK_THROWS_AS(read_dataset_csv(bad), InvalidArgument);
}

TEST_CASE("format_double is shortest round trip") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
}
