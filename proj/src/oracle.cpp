#include "flr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flr/error.hpp"

namespace flr {

namespace {

constexpr double kTie = 1e-12;

double log_factor(std::int64_t n) { return 1.0 + std::log(static_cast<double>(n)); }

double term_over(const FunctionalSpec& spec, std::int64_t j, double log_weight) {
    const double c = coefficient(spec, j);
    if (c == 0.0) return 0.0;
    return std::exp(2.0 * std::log(std::abs(c)) - log_weight);
}

double ell_over_beta(const SequenceModel& model, const FunctionalSpec& spec, std::int64_t j) {
    return term_over(spec, j, log_beta(model, j));
}

double ell_over_gamma(const SequenceModel& model, const FunctionalSpec& spec, std::int64_t j) {
    return term_over(spec, j, log_gamma(model, j));
}

Eigen::Matrix2d givens(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Eigen::Matrix2d g;
    g << c, -s, s, c;
    return g;
}

std::string format_power(const std::string& base, double power) {
    if (power == 0.0) return "";
    if (power == 1.0) return base;
    return base + "^" + format_double(power);
}

}  // namespace

double tail_sum(const SequenceModel& model, const FunctionalSpec& spec, std::int64_t m, std::int64_t j_tail) {
    model.validate();
    validate(spec);
    if (m < 0) throw InvalidArgument("tail_sum requires m >= 0");

    if (const auto* custom = std::get_if<Custom>(&spec)) {
        double sum = 0.0;
        for (std::int64_t j = static_cast<std::int64_t>(custom->coeffs.size()); j > m; --j)
            sum += ell_over_beta(model, spec, j);
        return sum;
    }
    const auto profile = *coefficient_profile(spec);

    if (model.regime == Regime::EP) {
        // Exponential weights: add terms until the envelope bound is negligible and decreasing.
        double sum = 0.0;
        const double log_env = std::log(profile.envelope);
        auto envelope_log = [&](std::int64_t j) {
            return log_env + 2.0 * profile.exponent * std::log(static_cast<double>(j)) - log_beta(model, j);
        };
        for (std::int64_t j = m + 1; j <= m + j_tail; ++j) {
            sum += ell_over_beta(model, spec, j);
            const double e = envelope_log(j);
            const bool decreasing = envelope_log(j + 1) < e;
            const double floor = sum > 0.0 ? std::log(sum) - 40.0 : -745.0;
            if (j >= 2 && decreasing && e < floor) break;
        }
        return sum;
    }

    // Polynomial weights: [l]_j^2 / beta_j ~ mean * j^{slope}.
    const double slope = 2.0 * profile.exponent - 2.0 * model.p;
    if (!(slope < -1.0))
        throw NumericalError("divergent tail: sum [l]_j^2/beta_j needs 2p - 2e > 1 (p = " + format_double(model.p) +
                             ", e = " + format_double(profile.exponent) + ")");
    const std::int64_t last = std::max(j_tail, m);
    double sum = 0.0;
    for (std::int64_t j = last; j > m; --j) sum += ell_over_beta(model, spec, j);
    const double start = static_cast<double>(last) + 0.5;
    return sum + profile.mean * std::pow(start, slope + 1.0) / (-(slope + 1.0));
}

double risk_term(const SequenceModel& model, const FunctionalSpec& spec, std::int64_t m, double x,
                 std::int64_t j_tail) {
    if (!(x > 0.0 && x <= 1.0)) throw InvalidArgument("rate argument x must lie in (0, 1]");
    if (m < 1) throw InvalidArgument("risk_term requires m >= 1");
    double head = 0.0;
    for (std::int64_t j = 1; j <= m; ++j) head += ell_over_gamma(model, spec, j);
    const double ratio = std::exp(log_gamma(model, m) - log_beta(model, m));
    return std::max(tail_sum(model, spec, m, j_tail), std::max(ratio, x) * head);
}

OracleRisk minimax_dimension(const SequenceModel& model, const FunctionalSpec& spec, double x,
                             std::int64_t m_search, std::int64_t j_tail) {
    if (!(x > 0.0 && x <= 1.0)) throw InvalidArgument("rate argument x must lie in (0, 1]");
    if (m_search < 1) throw InvalidArgument("minimax search range must be >= 1");

    std::vector<double> tails(m_search + 1);
    tails[m_search] = tail_sum(model, spec, m_search, j_tail);
    for (std::int64_t m = m_search - 1; m >= 1; --m) tails[m] = tails[m + 1] + ell_over_beta(model, spec, m + 1);

    OracleRisk out;
    out.x = x;
    out.values.resize(m_search);
    double head = 0.0;
    for (std::int64_t m = 1; m <= m_search; ++m) {
        head += ell_over_gamma(model, spec, m);
        const double ratio = std::exp(log_gamma(model, m) - log_beta(model, m));
        out.values[m - 1] = std::max(tails[m], std::max(ratio, x) * head);
    }
    const auto it = std::min_element(out.values.begin(), out.values.end());
    out.m_star = static_cast<std::int64_t>(it - out.values.begin()) + 1;
    out.r_star = *it;
    out.at_boundary = out.m_star == m_search;
    return out;
}

std::int64_t default_search_range(const SequenceModel& model, std::int64_t n) {
    const double logn = std::log(static_cast<double>(std::max<std::int64_t>(n, 3)));
    switch (model.regime) {
        case Regime::PP: {
            const double order = std::pow(static_cast<double>(n), 1.0 / (2.0 * model.p + 2.0 * model.a));
            return std::max<std::int64_t>(64, static_cast<std::int64_t>(std::ceil(4.0 * order)));
        }
        case Regime::PE:
            return static_cast<std::int64_t>(std::ceil(std::pow(logn, 1.0 / (2.0 * model.a)))) + 16;
        case Regime::EP:
            return static_cast<std::int64_t>(std::ceil(std::pow(logn, 1.0 / (2.0 * model.p)))) + 16;
    }
    return 64;
}

Eigen::MatrixXd population_covariance(const SequenceModel& model, std::int64_t J, double rotation) {
    if (J < 1) throw InvalidArgument("population covariance needs J >= 1");
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(J, J);
    for (std::int64_t j = 1; j <= J; ++j) cov(j - 1, j - 1) = gamma(model, j).value;
    if (rotation == 0.0) return cov;
    const Eigen::Matrix2d g = givens(rotation);
    for (std::int64_t j = 0; j + 1 < J; j += 2) {
        const Eigen::Matrix2d block = cov.block<2, 2>(j, j);
        cov.block<2, 2>(j, j) = g * block * g.transpose();
    }
    return cov;
}

double class_constant_d(const SequenceModel& model, std::int64_t J, double rotation) {
    double d_sq = 1.0;
    if (rotation == 0.0) return 1.0;
    const Eigen::Matrix2d g = givens(rotation);
    for (std::int64_t j = 1; j + 1 <= J; j += 2) {
        const Eigen::Vector2d lam(gamma(model, j).value, gamma(model, j + 1).value);
        const Eigen::Matrix2d t = g * lam.asDiagonal() * g.transpose();
        const Eigen::Matrix2d inv_w = lam.cwiseInverse().asDiagonal();
        const Eigen::Matrix2d scaled = inv_w * t * t * inv_w;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scaled);
        const auto ev = eig.eigenvalues();
        d_sq = std::max({d_sq, ev.maxCoeff(), 1.0 / ev.minCoeff()});
    }
    return std::sqrt(d_sq);
}

std::vector<TheoreticalPenalty> theoretical_penalties(const SequenceModel& model, const FunctionalSpec& spec,
                                                      const SlopeSpec& slope, double sigma, std::int64_t n,
                                                      std::int64_t m_max, double rotation, double constant) {
    model.validate();
    validate(spec);
    const std::int64_t J = slope.coeffs.size();
    if (m_max < 1 || m_max > J) throw InvalidArgument("theoretical penalty dimension outside 1..J");
    if (n < 1) throw InvalidArgument("theoretical penalty requires n >= 1");

    const Eigen::MatrixXd cov = population_covariance(model, J, rotation);
    const Eigen::VectorXd g = cov * slope.coeffs;
    const double sigma_y_sq = sigma * sigma + slope.coeffs.dot(g);

    Eigen::LLT<Eigen::MatrixXd> llt(cov.topLeftCorner(m_max, m_max));
    if (llt.info() != Eigen::Success) throw NumericalError("population covariance block is not positive definite");
    const auto lower = llt.matrixL();
    const Eigen::VectorXd z = lower.solve(coefficients(spec, m_max));
    const Eigen::VectorXd w = lower.solve(g.head(m_max));

    std::vector<TheoreticalPenalty> out(m_max);
    double v_max = 0.0, ell_form = 0.0, g_form = 0.0;
    for (std::int64_t m = 1; m <= m_max; ++m) {
        ell_form += z[m - 1] * z[m - 1];
        g_form += w[m - 1] * w[m - 1];
        v_max = std::max(v_max, ell_form);

        Eigen::VectorXd diff = slope.coeffs;
        diff.head(m) -= cov.topLeftCorner(m, m).llt().solve(g.head(m));

        auto& tp = out[m - 1];
        tp.m = m;
        tp.sigma_y_sq = sigma_y_sq;
        tp.sigma_m_sq = 2.0 * sigma_y_sq + 2.0 * g_form;
        tp.v_m = v_max;
        tp.rho_m_sq = sigma * sigma + diff.dot(cov * diff);
        tp.p_m = constant * tp.sigma_m_sq * tp.v_m * log_factor(n) / static_cast<double>(n);
    }
    return out;
}

TheoreticalPenalty theoretical_penalty(const SequenceModel& model, const FunctionalSpec& spec,
                                       const SlopeSpec& slope, double sigma, std::int64_t n, std::int64_t m,
                                       double rotation) {
    return theoretical_penalties(model, spec, slope, sigma, n, m, rotation).back();
}

double RateDescriptor::evaluate(double n) const {
    const double logn = std::log(n);
    double value = std::pow(n, n_power);
    if (log_power != 0.0) value *= std::pow(logn, log_power);
    if (loglog_power != 0.0) value *= std::pow(std::log(logn), loglog_power);
    return value;
}

RateDescriptor rate_exponent(const SequenceModel& model, const FunctionalSpec& spec, RateMode mode) {
    model.validate();
    validate(spec);
    const auto s_opt = decay_index(spec);
    if (!s_opt) throw InvalidArgument("rate tables cover point, derivative and local-average functionals only");
    const double s = *s_opt;
    const double p = model.p, a = model.a;
    const bool local_average = std::holds_alternative<LocalAverage>(spec);
    auto require = [&](bool ok, const std::string& what) {
        if (!ok) throw InvalidArgument(std::string(to_string(model.regime)) + " rate requires " + what);
    };

    RateDescriptor rate;
    rate.regime = model.regime;
    rate.mode = mode;
    rate.s = s;
    const bool adaptive = mode == RateMode::Adaptive;
    const double gap = s - a - 0.5;
    const int branch = std::abs(gap) <= kTie ? 0 : (gap < 0 ? -1 : 1);
    rate.branch = branch < 0 ? "s-a<1/2" : (branch == 0 ? "s-a=1/2" : "s-a>1/2");

    switch (model.regime) {
        case Regime::PP: {
            require(a > 0.5, "a > 1/2");
            if (local_average) {
                require(p + a > 1.5, "p + a > 3/2");
            } else {
                require(p + a >= 1.5, "p + a >= 3/2");
                require(s > 0.5 - p, "s > 1/2 - p (q < p - 1/2 for derivatives, p > 1/2 for point evaluation)");
            }
            const double e = (2.0 * p + 2.0 * s - 1.0) / (2.0 * p + 2.0 * a);
            if (branch < 0) {
                rate.n_power = -e;
                rate.log_power = adaptive ? e : 0.0;
            } else if (branch == 0) {
                rate.n_power = -1.0;
                rate.log_power = adaptive ? 2.0 : 1.0;
            } else {
                rate.n_power = -1.0;
                rate.log_power = adaptive ? 1.0 : 0.0;
            }
            break;
        }
        case Regime::PE: {
            require(a > 0.0, "a > 0");
            require(s > 0.5 - p, "s > 1/2 - p (q < p - 1/2 for derivatives, p > 1/2 for point evaluation)");
            rate.branch = "all";
            rate.log_power = -(2.0 * p + 2.0 * s - 1.0) / (2.0 * a);
            break;
        }
        case Regime::EP: {
            require(a > 0.5, "a > 1/2");
            rate.n_power = -1.0;
            if (branch < 0) {
                rate.log_power = adaptive ? (2.0 * p + 2.0 * a - 2.0 * s + 1.0) / (2.0 * p)
                                          : (2.0 * a - 2.0 * s + 1.0) / (2.0 * p);
            } else if (branch == 0) {
                rate.log_power = adaptive ? 1.0 : 0.0;
                rate.loglog_power = 1.0;
            } else {
                rate.log_power = adaptive ? 1.0 : 0.0;
            }
            break;
        }
    }

    std::string expr;
    for (const auto& part : {format_power("n", rate.n_power), format_power("(log n)", rate.log_power),
                             format_power("(log log n)", rate.loglog_power)}) {
        if (part.empty()) continue;
        expr += (expr.empty() ? "" : " * ") + part;
    }
    rate.expression = expr.empty() ? "1" : expr;
    return rate;
}

nlohmann::json to_json(const RateDescriptor& rate) {
    return {
        {"regime", std::string(to_string(rate.regime))},
        {"mode", rate.mode == RateMode::Minimax ? "minimax" : "adaptive"},
        {"s", rate.s},
        {"n_power", rate.n_power},
        {"log_power", rate.log_power},
        {"loglog_power", rate.loglog_power},
        {"branch", rate.branch},
        {"expression", rate.expression},
    };
}

InverseNormReport inverse_norm_bounds_check(const SequenceModel& model, const FunctionalSpec& spec, double rotation,
                                    std::int64_t M) {
    model.validate();
    validate(spec);
    if (M < 1) throw InvalidArgument("inverse norm check needs M >= 1");
    const std::int64_t J = M + (M % 2);
    const Eigen::MatrixXd cov = population_covariance(model, J, rotation);

    InverseNormReport report;
    report.d = class_constant_d(model, J, rotation);
    report.upper = 4.0 * report.d * report.d * report.d;
    const double lower = 1.0 / report.d;
    const double slack = 1e-12;

    double v_max = 0.0, v_gamma = 0.0;
    for (std::int64_t m = 1; m <= M; ++m) {
        const Eigen::MatrixXd block = cov.topLeftCorner(m, m);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block, Eigen::EigenvaluesOnly);
        const double ratio = gamma(model, m).value / eig.eigenvalues().minCoeff();

        const Eigen::VectorXd ell = coefficients(spec, m);
        v_max = std::max(v_max, ell.dot(block.llt().solve(ell)));
        v_gamma += ell_over_gamma(model, spec, m);
        const double v_ratio = v_max / v_gamma;

        report.gamma_inv_norm.push_back(ratio);
        report.v_ratio.push_back(v_ratio);
        for (double value : {ratio, v_ratio})
            if (value < lower * (1.0 - slack) || value > report.upper * (1.0 + slack)) report.pass = false;
    }
    return report;
}

}  // namespace flr
