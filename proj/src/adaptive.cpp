#include "flr/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "flr/simulate.hpp"

namespace flr {

namespace {

double log_factor(std::int64_t n) { return 1.0 + std::log(static_cast<double>(n)); }

// Largest k <= m_max whose leading block admits a Cholesky factor and is not numerically singular.
std::int64_t last_invertible(const Moments& mom, std::int64_t m_max) {
    for (std::int64_t k = m_max; k >= 1; --k) {
        const Eigen::MatrixXd block = mom.gammahat.topLeftCorner(k, k);
        Eigen::LLT<Eigen::MatrixXd> llt(block);
        if (llt.info() == Eigen::Success && !spectral_info(block).singular) return k;
    }
    return 0;
}

}  // namespace

CapResult cap_m_ell(const FunctionalSpec& spec, std::int64_t n) {
    if (n < 1) throw InvalidArgument("cap_m_ell requires n >= 1");
    const std::int64_t upper = std::max<std::int64_t>(fourth_root_floor(n), 1);
    const double limit = static_cast<double>(n);
    CapResult out;
    double g = 0.0;
    out.value = 0;
    for (std::int64_t m = 1; m <= upper; ++m) {
        const double c = coefficient(spec, m);
        g += c * c;
        if (g <= limit) out.value = m;
    }
    if (out.value == 0) {
        out.value = 1;
        out.degenerate = true;
    }
    return out;
}

std::int64_t cap_m_hat(const Moments& mom, const FunctionalSpec& spec, std::int64_t n, std::int64_t m_ell) {
    if (m_ell <= 0) m_ell = cap_m_ell(spec, n).value;
    if (mom.dim() < m_ell)
        throw InvalidArgument("moments of dimension " + std::to_string(mom.dim()) + " are below M_n^l = " +
                              std::to_string(m_ell));
    const double threshold = static_cast<double>(n) / log_factor(n);
    double g = 0.0;
    for (std::int64_t m = 1; m <= m_ell; ++m) {
        const double c = coefficient(spec, m);
        g += c * c;
        if (m < 2) continue;
        const double inv_norm = spectral_norm_inverse(mom.gammahat.topLeftCorner(m, m));
        if (!(inv_norm * g <= threshold)) return m - 1;
    }
    return m_ell;
}

NestedForms nested_forms(const Moments& mom, const FunctionalSpec& spec, std::int64_t m_max) {
    if (m_max < 1 || m_max > mom.dim()) throw InvalidArgument("nested_forms dimension out of range");
    Eigen::LLT<Eigen::MatrixXd> llt(mom.gammahat.topLeftCorner(m_max, m_max));
    if (llt.info() != Eigen::Success)
        throw NumericalError("[Gamma^]_" + std::to_string(m_max) + " is not positive definite");
    const auto lower = llt.matrixL();
    const Eigen::VectorXd z = lower.solve(coefficients(spec, m_max));
    const Eigen::VectorXd w = lower.solve(mom.ghat.head(m_max));
    NestedForms forms;
    forms.ell.resize(m_max);
    forms.ghat.resize(m_max);
    double se = 0.0, sg = 0.0;
    for (std::int64_t k = 0; k < m_max; ++k) {
        se += z[k] * z[k];
        sg += w[k] * w[k];
        forms.ell[k] = se;
        forms.ghat[k] = sg;
    }
    return forms;
}

std::vector<double> penalties(const Moments& mom, const FunctionalSpec& spec, std::int64_t n, std::int64_t m_max,
                              double constant) {
    const auto forms = nested_forms(mom, spec, m_max);
    const double factor = constant * log_factor(n) / static_cast<double>(n);
    std::vector<double> out(m_max);
    double v_max = 0.0;
    for (std::int64_t m = 0; m < m_max; ++m) {
        v_max = std::max(v_max, forms.ell[m]);
        out[m] = factor * (2.0 * mom.sigma2_y_hat + 2.0 * forms.ghat[m]) * v_max;
    }
    return out;
}

std::vector<double> contrasts(std::span<const double> estimates, std::span<const double> penalties) {
    if (estimates.size() != penalties.size()) throw InvalidArgument("contrasts: length mismatch");
    const std::size_t M = estimates.size();
    std::vector<double> out(M);
    for (std::size_t m = 0; m < M; ++m) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = m; k < M; ++k) {
            const double diff = estimates[k] - estimates[m];
            best = std::max(best, diff * diff - penalties[k]);
        }
        out[m] = best;
    }
    return out;
}

std::int64_t select(std::span<const double> contrasts, std::span<const double> penalties) {
    if (contrasts.size() != penalties.size() || contrasts.empty())
        throw InvalidArgument("select: lengths must agree and be >= 1");
    std::size_t best = 0;
    double best_value = contrasts[0] + penalties[0];
    for (std::size_t m = 1; m < contrasts.size(); ++m) {
        const double v = contrasts[m] + penalties[m];
        if (v < best_value) {
            best_value = v;
            best = m;
        }
    }
    return static_cast<std::int64_t>(best) + 1;
}

AdaptiveResult adaptive_estimate(const Moments& mom, const FunctionalSpec& spec, const AdaptiveOptions& opts) {
    validate(spec);
    AdaptiveResult res;
    res.n = mom.n;
    if (mom.n < 2) throw AdaptiveError("adaptive estimation requires n >= 2", res);
    res.sigma2_y_hat = mom.sigma2_y_hat;

    const auto cap = cap_m_ell(spec, mom.n);
    res.m_ell_cap = cap.value;
    res.m_ell_degenerate = cap.degenerate;
    if (cap.degenerate) res.diagnostics.push_back("[l]_1^2 > n: candidate set forced to {1}");
    if (mom.dim() < res.m_ell_cap) throw AdaptiveError("moments do not reach M_n^l", res);

    for (std::int64_t m = 1; m <= res.m_ell_cap; ++m) {
        const auto fit = galerkin_estimate(mom, m);
        res.estimates.push_back(plug_in(spec, fit));
        res.thresholded.push_back(fit.thresholded);
    }

    res.m_hat_cap_rule = cap_m_hat(mom, spec, mom.n, res.m_ell_cap);
    res.m_hat_cap = last_invertible(mom, res.m_hat_cap_rule);
    if (res.m_hat_cap == 0) throw AdaptiveError("[Gamma^]_1 is numerically singular", res);
    if (res.m_hat_cap < res.m_hat_cap_rule)
        res.diagnostics.push_back("candidate set truncated at last invertible dimension " +
                                  std::to_string(res.m_hat_cap));

    res.penalties = penalties(mom, spec, mom.n, res.m_hat_cap, opts.penalty_constant);
    const std::span<const double> candidates(res.estimates.data(), res.m_hat_cap);
    res.contrasts = contrasts(candidates, res.penalties);
    res.selected = select(res.contrasts, res.penalties);
    res.value = res.estimates[res.selected - 1];
    return res;
}

AdaptiveResult adaptive_estimate(const Dataset& data, const FunctionalSpec& spec, const AdaptiveOptions& opts) {
    validate(spec);
    if (data.n() < 2) throw AdaptiveError("adaptive estimation requires n >= 2", AdaptiveResult{});
    const auto cap = cap_m_ell(spec, data.n());
    if (cap.value > data.dim())
        throw InvalidArgument("dataset dimension J = " + std::to_string(data.dim()) + " is below M_n^l = " +
                              std::to_string(cap.value));
    return adaptive_estimate(empirical_moments(data, cap.value), spec, opts);
}

nlohmann::json to_json(const AdaptiveResult& r) {
    nlohmann::json j;
    j["n"] = r.n;
    j["m_ell_cap"] = r.m_ell_cap;
    j["m_ell_degenerate"] = r.m_ell_degenerate;
    j["m_hat_cap"] = r.m_hat_cap;
    j["m_hat_cap_rule"] = r.m_hat_cap_rule;
    j["penalties"] = r.penalties;
    j["contrasts"] = r.contrasts;
    j["estimates"] = std::vector<double>(r.estimates.begin(), r.estimates.begin() + r.m_hat_cap);
    j["extended_estimates"] = r.estimates;
    j["thresholded"] = r.thresholded;
    j["selected"] = r.selected;
    j["value"] = r.value;
    j["sigma2_y_hat"] = r.sigma2_y_hat;
    j["diagnostics"] = r.diagnostics;
    return j;
}

LemmaCheck lemma_inequality_check(std::span<const double> estimates, std::span<const double> penalties,
                                  std::span<const double> functional_values, double ell_phi) {
    const std::size_t M = estimates.size();
    if (M == 0 || penalties.size() != M || functional_values.size() != M)
        throw InvalidArgument("lemma check: sequences must share a length M >= 1");
    for (std::size_t k = 1; k < M; ++k)
        if (penalties[k] < penalties[k - 1]) throw InvalidArgument("lemma check: penalties must be non-decreasing");

    LemmaCheck out;
    const auto kappa = contrasts(estimates, penalties);
    out.selected = select(kappa, penalties);
    const double err = estimates[out.selected - 1] - ell_phi;
    out.lhs = err * err;

    // Suffix maxima of the approximation error and of the centred stochastic term.
    std::vector<double> bias(M), excess(M);
    double b = 0.0, t = 0.0;
    for (std::size_t i = M; i-- > 0;) {
        b = std::max(b, std::abs(functional_values[i] - ell_phi));
        const double dev = estimates[i] - functional_values[i];
        t = std::max(t, std::max(dev * dev - penalties[i] / 6.0, 0.0));
        bias[i] = b;
        excess[i] = t;
    }
    out.rhs.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        out.rhs[m] = 7.0 * penalties[m] + 78.0 * bias[m] * bias[m] + 42.0 * excess[m];
        if (!(out.lhs <= out.rhs[m]) && !out.violating_m) {
            out.pass = false;
            out.violating_m = static_cast<std::int64_t>(m) + 1;
        }
    }
    return out;
}

LemmaInstance lemma_instance(std::uint64_t seed, std::int64_t index, std::int64_t max_m) {
    if (max_m < 1) throw InvalidArgument("lemma_instance requires max_m >= 1");
    std::mt19937_64 rng(mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(index))));
    std::uniform_int_distribution<std::int64_t> size(1, max_m);
    std::uniform_real_distribution<double> value(-10.0, 10.0), pen(0.0, 10.0);
    const auto M = static_cast<std::size_t>(size(rng));
    LemmaInstance inst;
    inst.estimates.resize(M);
    inst.functional_values.resize(M);
    inst.penalties.resize(M);
    for (auto& v : inst.estimates) v = value(rng);
    for (auto& v : inst.functional_values) v = value(rng);
    for (auto& v : inst.penalties) v = pen(rng);
    std::sort(inst.penalties.begin(), inst.penalties.end());
    inst.ell_phi = value(rng);
    return inst;
}

LemmaSuiteReport lemma_suite(std::int64_t instances, std::uint64_t seed, std::int64_t max_m) {
    if (instances < 0) throw InvalidArgument("instance count must be >= 0");
    LemmaSuiteReport rep;
    rep.instances = instances;
    for (std::int64_t i = 0; i < instances; ++i) {
        const auto inst = lemma_instance(seed, i, max_m);
        const auto check =
            lemma_inequality_check(inst.estimates, inst.penalties, inst.functional_values, inst.ell_phi);
        if (!check.pass) {
            ++rep.violations;
            if (!rep.first_violation) rep.first_violation = i;
        }
    }
    return rep;
}

}  // namespace flr
