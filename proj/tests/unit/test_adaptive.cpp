#include <doctest.h>

#include <cmath>
#include <random>

#include "flr/adaptive.hpp"
#include "flr/error.hpp"
#include "flr/simulate.hpp"

using namespace flr;

namespace {

Moments make_moments(const Eigen::MatrixXd& gamma_hat, const Eigen::VectorXd& g_hat, std::int64_t n, double s2) {
    Moments m;
    m.gammahat = gamma_hat;
    m.ghat = g_hat;
    m.n = n;
    m.sigma2_y_hat = s2;
    return m;
}

Dataset simulated(const SequenceModel& model, std::int64_t n, std::uint64_t seed, double rotation = 0.0) {
    SimConfig c;
    c.model = model;
    c.n = n;
    c.seed = seed;
    c.rotation = rotation;
    return draw_dataset(c, make_slope(model, c.truncation(), 0.9));
}

// Direct evaluation of the right-hand side, every max taken by explicit loops.
bool brute_force_lemma(const std::vector<double>& est, const std::vector<double>& pen,
                       const std::vector<double>& fv, double ell_phi) {
    const std::size_t M = est.size();
    std::size_t sel = 0;
    double best = INFINITY;
    for (std::size_t m = 0; m < M; ++m) {
        double kappa = -INFINITY;
        for (std::size_t k = m; k < M; ++k) kappa = std::max(kappa, (est[k] - est[m]) * (est[k] - est[m]) - pen[k]);
        if (kappa + pen[m] < best) {
            best = kappa + pen[m];
            sel = m;
        }
    }
    const double lhs = (est[sel] - ell_phi) * (est[sel] - ell_phi);
    for (std::size_t m = 0; m < M; ++m) {
        double b = 0.0, ex = 0.0;
        for (std::size_t k = m; k < M; ++k) {
            b = std::max(b, std::abs(fv[k] - ell_phi));
            ex = std::max(ex, std::max(0.0, (est[k] - fv[k]) * (est[k] - fv[k]) - pen[k] / 6.0));
        }
        if (!(lhs <= 7 * pen[m] + 78 * b * b + 42 * ex)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("cap M_n^l") {
    CHECK(cap_m_ell(PointEval{0.0}, 16).value == 2);
    for (std::int64_t n : {1, 15, 16, 100, 9999, 10000, 123456}) {
        const auto c = cap_m_ell(Custom{{1.0}}, n);
        CHECK(c.value == std::max<std::int64_t>(fourth_root_floor(n), 1));
        CHECK_FALSE(c.degenerate);
    }
    const auto deg = cap_m_ell(Custom{std::vector<double>(10, 10.0)}, 99);
    CHECK(deg.value == 1);
    CHECK(deg.degenerate);
    // gram(m) = 100 m <= n bounds the cap below floor(n^{1/4}).
    CHECK(cap_m_ell(Custom{std::vector<double>(40, 10.0)}, 1'000'000'000).value <= 177);
    CHECK(cap_m_ell(Custom{std::vector<double>(40, 10.0)}, 300).value == 3);
}

TEST_CASE("cap M^_n") {
    const Custom ones{std::vector<double>(64, 1.0)};
    const auto id = make_moments(Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4), 20, 1.0);
    CHECK(cap_m_ell(ones, 20).value == 2);
    CHECK(cap_m_hat(id, ones, 20) == 2);

    Eigen::MatrixXd trig = Eigen::MatrixXd::Identity(4, 4);
    trig(1, 1) = 1e-3;
    const auto t = make_moments(trig, Eigen::VectorXd::Zero(4), 256, 1.0);
    CHECK(cap_m_hat(t, ones, 256) == 1);

    Eigen::MatrixXd sing = Eigen::MatrixXd::Identity(4, 4);
    sing(2, 2) = 0.0;
    const auto s = make_moments(sing, Eigen::VectorXd::Zero(4), 256, 1.0);
    CHECK(cap_m_hat(s, ones, 256) == 2);

    const auto short_mom = make_moments(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2), 256, 1.0);
    CHECK_THROWS_AS(cap_m_hat(short_mom, ones, 256), InvalidArgument);
}

TEST_CASE("penalty closed form") {
    const std::int64_t n = 2;
    const auto mom = make_moments(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), n, 1.0);
    const auto p = penalties(mom, Custom{{1.0}}, n, 3);
    const double expected = 700.0 * 2.0 * 1.0 * (1.0 + std::log(2.0)) / 2.0;
    for (double v : p) CHECK(v == doctest::Approx(expected).epsilon(1e-14));

    auto mom4 = mom;
    mom4.sigma2_y_hat = 4.0;
    const auto p4 = penalties(mom4, Custom{{1.0}}, n, 3);
    CHECK(p4[0] == doctest::Approx(4.0 * expected).epsilon(1e-14));
}

TEST_CASE("nested forms agree with explicit inverses") {
    SequenceModel pp;
    const auto d = simulated(pp, 3000, 4, 0.6);
    const auto mom = empirical_moments(d, 7);
    const auto forms = nested_forms(mom, PointEval{0.3}, 7);
    for (std::int64_t k = 1; k <= 7; ++k) {
        const Eigen::MatrixXd inv = mom.gammahat.topLeftCorner(k, k).inverse();
        const Eigen::VectorXd l = coefficients(PointEval{0.3}, k);
        const Eigen::VectorXd g = mom.ghat.head(k);
        CHECK(forms.ell[k - 1] == doctest::Approx(l.dot(inv * l)).epsilon(1e-9));
        CHECK(forms.ghat[k - 1] == doctest::Approx(g.dot(inv * g)).epsilon(1e-9));
        if (k > 1) {
            CHECK(forms.ell[k - 1] >= forms.ell[k - 2]);
            CHECK(forms.ghat[k - 1] >= forms.ghat[k - 2]);
        }
    }
}

TEST_CASE("contrasts") {
    const std::vector<double> p{0.5, 1.0, 1.0, 2.5};
    const auto k = contrasts(std::vector<double>(4, 3.3), p);
    for (std::size_t m = 0; m < 4; ++m) CHECK(k[m] == -p[m]);
    CHECK(contrasts(std::vector<double>{7.0}, std::vector<double>{0.3})[0] == -0.3);
    const auto e = contrasts(std::vector<double>{0.0, 3.0}, std::vector<double>{1.0, 2.0});
    CHECK(e[0] == 7.0);
    CHECK(e[1] == -2.0);
    CHECK_THROWS_AS(contrasts(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), InvalidArgument);
}

TEST_CASE("select") {
    CHECK(select(std::vector<double>{5, 3, 3}, std::vector<double>{0, 0, 0}) == 2);
    CHECK(select(std::vector<double>{1}, std::vector<double>{4}) == 1);
    CHECK(select(std::vector<double>{2, 7}, std::vector<double>{0, 0}) == 1);
    CHECK(select(std::vector<double>{1, 0}, std::vector<double>{1, 2}) == 1);
    CHECK_THROWS_AS(select(std::vector<double>{}, std::vector<double>{}), InvalidArgument);
}

TEST_CASE("zero response gives zero estimates") {
    SequenceModel pp;
    auto d = simulated(pp, 1000, 2);
    d.y.setZero();
    const auto res = adaptive_estimate(d, PointEval{0.3});
    for (double v : res.estimates) CHECK(v == 0.0);
    CHECK(res.value == 0.0);
}

TEST_CASE("singleton candidate set") {
    SequenceModel pp;
    const auto d = simulated(pp, 20, 3);  // floor(20^{1/4}) = 2
    const auto res = adaptive_estimate(d, Custom{{1.0, 50.0}});
    CHECK(res.m_ell_cap == 1);
    CHECK(res.m_hat_cap == 1);
    CHECK(res.selected == 1);
    CHECK(res.value == res.estimates[0]);
    CHECK(res.contrasts[0] == -res.penalties[0]);
}

TEST_CASE("invariants on simulated draws across regimes") {
    const SequenceModel models[] = {{Regime::PP, 1.0, 1.0}, {Regime::PE, 1.0, 0.5}, {Regime::EP, 0.5, 1.0}};
    std::uint64_t seed = 100;
    for (const auto& model : models)
        for (std::int64_t n : {50, 400, 3000})
            for (double rot : {0.0, 0.4}) {
                ++seed;
                const auto d = simulated(model, n, seed, rot);
                for (const FunctionalSpec& spec : {FunctionalSpec{PointEval{0.3}}, FunctionalSpec{LocalAverage{0.5}}}) {
                    const auto res = adaptive_estimate(d, spec);
                    CHECK(1 <= res.selected);
                    CHECK(res.selected <= res.m_hat_cap);
                    CHECK(res.m_hat_cap <= res.m_ell_cap);
                    CHECK(res.m_ell_cap <= fourth_root_floor(n));
                    REQUIRE(res.penalties.size() == static_cast<std::size_t>(res.m_hat_cap));
                    for (std::size_t m = 1; m < res.penalties.size(); ++m)
                        CHECK(res.penalties[m] >= res.penalties[m - 1]);
                    for (std::size_t m = 0; m < res.contrasts.size(); ++m)
                        CHECK(res.contrasts[m] >= -res.penalties[m]);
                    CHECK(res.contrasts.back() == -res.penalties.back());
                    CHECK(res.value == res.estimates[res.selected - 1]);
                }
            }
}

TEST_CASE("scale equivariance") {
    SequenceModel pp;
    const auto d = simulated(pp, 5000, 77, 0.3);
    // Lower constant so that the selection is not pinned at m = 1.
    const AdaptiveOptions opts{0.05};
    const auto base = adaptive_estimate(d, PointEval{0.3}, opts);
    for (double c : {2.0, 3.0, 0.1}) {
        auto scaled = d;
        scaled.y *= c;
        const auto res = adaptive_estimate(scaled, PointEval{0.3}, opts);
        CHECK(res.selected == base.selected);
        CHECK(res.m_hat_cap == base.m_hat_cap);
        for (std::size_t m = 0; m < base.estimates.size(); ++m)
            CHECK(res.estimates[m] == doctest::Approx(c * base.estimates[m]).epsilon(1e-12));
        for (std::size_t m = 0; m < base.penalties.size(); ++m)
            CHECK(res.penalties[m] == doctest::Approx(c * c * base.penalties[m]).epsilon(1e-12));
    }
}

TEST_CASE("errors") {
    SequenceModel pp;
    auto d = simulated(pp, 20, 1);
    d.y.conservativeResize(1);
    d.x.conservativeResize(1, d.x.cols());
    CHECK_THROWS_AS(adaptive_estimate(d, PointEval{0.3}), AdaptiveError);

    const auto mom = make_moments(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2), 16, 0.0);
    try {
        adaptive_estimate(mom, PointEval{0.0});
        FAIL("expected AdaptiveError");
    } catch (const AdaptiveError& e) {
        CHECK(e.partial().m_ell_cap == 2);
        CHECK(e.partial().estimates.size() == 2);
    }
}

TEST_CASE("json record") {
    SequenceModel pp;
    const auto res = adaptive_estimate(simulated(pp, 500, 5), PointEval{0.3});
    const auto j = to_json(res);
    for (const char* key : {"m_ell_cap", "m_hat_cap", "penalties", "contrasts", "estimates", "selected", "value"})
        CHECK(j.contains(key));
    CHECK(j["penalties"].size() == static_cast<std::size_t>(res.m_hat_cap));
    CHECK(j["estimates"].size() == static_cast<std::size_t>(res.m_hat_cap));
}

TEST_CASE("lemma check examples") {
    const std::vector<double> same(5, 1.25);
    const std::vector<double> pen{0.1, 0.2, 0.2, 0.7, 1.0};
    const auto ok = lemma_inequality_check(same, pen, same, 1.25);
    CHECK(ok.pass);
    CHECK(ok.lhs == 0.0);

    const std::vector<double> e1{2.0}, p1{0.5}, f1{1.5};
    const auto one = lemma_inequality_check(e1, p1, f1, 1.0);
    CHECK(one.selected == 1);
    const double rhs = 7 * 0.5 + 78 * 0.25 + 42 * std::max(0.0, 0.25 - 0.5 / 6);
    CHECK(one.rhs[0] == doctest::Approx(rhs).epsilon(1e-15));
    CHECK(one.lhs == 1.0);
    CHECK(one.pass);

    CHECK_THROWS_AS(lemma_inequality_check(e1, std::vector<double>{}, f1, 0.0), InvalidArgument);
    const std::vector<double> e2{0.0, 1.0}, bad{1.0, 0.5};
    CHECK_THROWS_AS(lemma_inequality_check(e2, bad, e2, 0.0), InvalidArgument);
}

TEST_CASE("lemma check agrees with a brute-force evaluation") {
    for (std::int64_t i = 0; i < 2000; ++i) {
        const auto inst = lemma_instance(99, i, 20);
        CHECK(inst.penalties.size() == inst.estimates.size());
        CHECK(std::is_sorted(inst.penalties.begin(), inst.penalties.end()));
        const auto check = lemma_inequality_check(inst.estimates, inst.penalties, inst.functional_values, inst.ell_phi);
        CHECK(check.pass == brute_force_lemma(inst.estimates, inst.penalties, inst.functional_values, inst.ell_phi));
        CHECK(check.pass);
    }
    const auto suite = lemma_suite(500, 3);
    CHECK(suite.instances == 500);
    CHECK(suite.violations == 0);
    CHECK_FALSE(suite.first_violation.has_value());
}
