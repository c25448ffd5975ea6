#include "flr/sequences.hpp"

#include <cmath>
#include <limits>

#include "flr/error.hpp"

namespace flr {

namespace {

constexpr double kCauchyTolerance = 1e-12;

double require_index(std::int64_t j) {
    if (j < 1) throw InvalidArgument("sequence index must be >= 1, got " + std::to_string(j));
    return static_cast<double>(j);
}

// Dyadic blocks of the partial sums: a convergent series of eventually
// monotone terms has shrinking block sums (Cauchy condensation).
SeriesCheck check_series(const std::function<double(std::int64_t)>& term, std::int64_t J) {
    SeriesCheck out;
    double upper = 0.0, lower = 0.0;
    for (std::int64_t j = 1; j <= J; ++j) {
        const double t = term(j);
        out.partial_sum += t;
        if (2 * j > J) upper += t;
        else if (4 * j > J) lower += t;
    }
    out.last_block = upper;
    out.block_ratio = lower > 0.0 ? upper / lower : std::numeric_limits<double>::infinity();
    const bool settled = std::abs(upper) <= kCauchyTolerance * std::abs(out.partial_sum);
    const bool shrinking = J >= 4 && lower > 0.0 && out.block_ratio < 1.0;
    out.convergent = std::isfinite(out.partial_sum) && (settled || shrinking);
    return out;
}

}  // namespace

std::string_view to_string(Regime regime) {
    switch (regime) {
        case Regime::PP: return "pp";
        case Regime::PE: return "pe";
        case Regime::EP: return "ep";
    }
    return "?";
}

Regime parse_regime(std::string_view name) {
    if (name == "pp" || name == "PP") return Regime::PP;
    if (name == "pe" || name == "PE") return Regime::PE;
    if (name == "ep" || name == "EP") return Regime::EP;
    throw InvalidArgument("unknown regime '" + std::string(name) + "' (expected pp, pe or ep)");
}

void SequenceModel::validate() const {
    auto fail = [this](const std::string& what) {
        throw InvalidArgument(std::string(to_string(regime)) + " regime requires " + what);
    };
    if (!(p > 0.0) || !std::isfinite(p)) fail("p > 0");
    if (!(r > 0.0) || !std::isfinite(r)) fail("r > 0");
    if (!(d >= 1.0) || !std::isfinite(d)) fail("d >= 1");
    switch (regime) {
        case Regime::PP:
        case Regime::EP:
            if (!(a > 0.5) || !std::isfinite(a)) fail("a > 1/2");
            break;
        case Regime::PE:
            if (!(a > 0.0) || !std::isfinite(a)) fail("a > 0");
            break;
    }
}

double log_beta(const SequenceModel& model, std::int64_t j) {
    const double x = require_index(j);
    if (model.regime == Regime::EP) return std::pow(x, 2.0 * model.p) - 1.0;
    return 2.0 * model.p * std::log(x);
}

double log_gamma(const SequenceModel& model, std::int64_t j) {
    const double x = require_index(j);
    if (model.regime == Regime::PE) return 1.0 - std::pow(x, 2.0 * model.a);
    return -2.0 * model.a * std::log(x);
}

double beta(const SequenceModel& model, std::int64_t j) {
    if (j == 1) return 1.0;
    const double lb = log_beta(model, j);
    if (lb > kLogSpaceThreshold)
        throw SaturationError("beta_" + std::to_string(j) + " = exp(" + std::to_string(lb) +
                              ") exceeds the double range");
    if (model.regime == Regime::EP) return std::exp(lb);
    return std::pow(static_cast<double>(j), 2.0 * model.p);
}

GammaValue gamma(const SequenceModel& model, std::int64_t j) {
    if (j == 1) return {1.0, false};
    const double lg = log_gamma(model, j);
    constexpr double tiny = std::numeric_limits<double>::min();
    if (lg < std::log(tiny)) return {tiny, true};
    if (model.regime == Regime::PE) return {std::exp(lg), false};
    return {std::pow(static_cast<double>(j), -2.0 * model.a), false};
}

AssumptionReport check_assumption(const SequenceModel& model,
                                  const std::function<double(std::int64_t)>& ell,
                                  std::int64_t J) {
    if (J < 1) throw InvalidArgument("check_assumption requires J >= 1");
    AssumptionReport report;
    report.beta_monotone = true;
    report.gamma_monotone = true;
    double prev_lb = log_beta(model, 1), prev_g = gamma(model, 1).value;
    for (std::int64_t j = 2; j <= J; ++j) {
        const double lb = log_beta(model, j);
        const double g = gamma(model, j).value;
        if (lb < prev_lb) report.beta_monotone = false;
        if (g > prev_g) report.gamma_monotone = false;
        prev_lb = lb;
        prev_g = g;
    }
    report.ell_over_beta = check_series(
        [&](std::int64_t j) {
            const double l = ell(j);
            return l == 0.0 ? 0.0 : std::exp(2.0 * std::log(std::abs(l)) - log_beta(model, j));
        },
        J);
    report.gamma_sum = check_series([&](std::int64_t j) { return gamma(model, j).value; }, J);
    return report;
}

}  // namespace flr
