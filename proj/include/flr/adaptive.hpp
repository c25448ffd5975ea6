#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flr/error.hpp"
#include "flr/estimator.hpp"
#include "flr/functionals.hpp"

namespace flr {

inline constexpr double kDefaultPenaltyConstant = 700.0;

struct CapResult {
    std::int64_t value = 1;
    bool degenerate = false;  // [l]_1^2 > n: the defining set is empty
};

// M_n^l = max{1 <= m <= floor(n^{1/4}) : [l]_m^t [l]_m <= n}.
CapResult cap_m_ell(const FunctionalSpec& spec, std::int64_t n);

// M^_n = min{2 <= m <= M_n^l : ||[Gamma^]_m^{-1}|| [l]_m^t[l]_m > n / (1 + log n)} - 1,
// or M_n^l when no m triggers. Singular blocks trigger. `m_ell` = 0 recomputes M_n^l.
std::int64_t cap_m_hat(const Moments& mom, const FunctionalSpec& spec, std::int64_t n, std::int64_t m_ell = 0);

// Quadratic forms of all leading blocks from one Cholesky factor L of [Gamma^]_M:
// v^t [Gamma^]_k^{-1} v = sum_{i<=k} (L^{-1} v)_i^2, so the forms are exactly non-decreasing in k.
struct NestedForms {
    std::vector<double> ell;   // [l]_k^t [Gamma^]_k^{-1} [l]_k
    std::vector<double> ghat;  // [g^]_k^t [Gamma^]_k^{-1} [g^]_k
};

// Forms for k = 1..m_max. Throws NumericalError if the m_max-block is not positive definite.
NestedForms nested_forms(const Moments& mom, const FunctionalSpec& spec, std::int64_t m_max);

// p^_m = C (2 sigma^2_Y + 2 [g^]_m^t[Gamma^]_m^{-1}[g^]_m) max_{k<=m} [l]_k^t[Gamma^]_k^{-1}[l]_k (1 + log n) / n,
// m = 1..m_max.
std::vector<double> penalties(const Moments& mom, const FunctionalSpec& spec, std::int64_t n, std::int64_t m_max,
                              double constant = kDefaultPenaltyConstant);

// kappa_m = max_{m<=k<=M} (|est_k - est_m|^2 - pen_k).
std::vector<double> contrasts(std::span<const double> estimates, std::span<const double> penalties);

// Smallest index (1-based) minimizing contrasts + penalties.
std::int64_t select(std::span<const double> contrasts, std::span<const double> penalties);

struct AdaptiveOptions {
    double penalty_constant = kDefaultPenaltyConstant;
};

struct AdaptiveResult {
    std::int64_t n = 0;
    std::int64_t m_ell_cap = 0;           // M_n^l
    bool m_ell_degenerate = false;
    std::int64_t m_hat_cap = 0;           // M^_n after any fail-soft truncation
    std::int64_t m_hat_cap_rule = 0;      // M^_n from the stopping rule
    std::vector<double> penalties;        // p^_1..p^_{M^_n}
    std::vector<double> contrasts;        // kappa_1..kappa_{M^_n}
    std::vector<double> estimates;        // l^_1..l^_{M_n^l}
    std::vector<bool> thresholded;        // per estimate
    std::int64_t selected = 0;            // m^
    double value = 0.0;                   // l^_{m^}
    double sigma2_y_hat = 0.0;
    std::vector<std::string> diagnostics;
};

// End-to-end adaptive estimator. Requires n >= 2.
AdaptiveResult adaptive_estimate(const Dataset& data, const FunctionalSpec& spec, const AdaptiveOptions& opts = {});

// Same, from moments of dimension >= M_n^l.
AdaptiveResult adaptive_estimate(const Moments& mom, const FunctionalSpec& spec, const AdaptiveOptions& opts = {});

// Carries whatever was computed before the failure.
class AdaptiveError : public NumericalError {
public:
    AdaptiveError(const std::string& what, AdaptiveResult partial)
        : NumericalError(what), partial_(std::move(partial)) {}
    const AdaptiveResult& partial() const { return partial_; }

private:
    AdaptiveResult partial_;
};

nlohmann::json to_json(const AdaptiveResult& result);

// Deterministic oracle inequality for the Lepski-type selection: with m~ the selected model,
//   |l^_{m~} - l(phi)|^2 <= 7 p_m + 78 b_m^2 + 42 max_{m<=k<=M} (|l^_k - l(phi_k)|^2 - p_k / 6)_+
// for every m, where b_m = max_{k>=m} |l(phi_k) - l(phi)|.
struct LemmaCheck {
    bool pass = true;
    std::int64_t selected = 0;                 // m~ (1-based)
    std::optional<std::int64_t> violating_m;   // first failing m (1-based)
    double lhs = 0.0;
    std::vector<double> rhs;                   // per m
};

// Throws InvalidArgument if penalties decrease or lengths disagree.
LemmaCheck lemma_inequality_check(std::span<const double> estimates, std::span<const double> penalties,
                                  std::span<const double> functional_values, double ell_phi);

struct LemmaInstance {
    std::vector<double> estimates;
    std::vector<double> penalties;  // sorted
    std::vector<double> functional_values;
    double ell_phi = 0.0;
};

// Instance i of a randomized suite: M uniform on 1..max_m, values uniform on [-10, 10],
// penalties sorted uniforms on [0, 10].
LemmaInstance lemma_instance(std::uint64_t seed, std::int64_t index, std::int64_t max_m = 20);

struct LemmaSuiteReport {
    std::int64_t instances = 0;
    std::int64_t violations = 0;
    std::optional<std::int64_t> first_violation;  // instance index
};

LemmaSuiteReport lemma_suite(std::int64_t instances, std::uint64_t seed, std::int64_t max_m = 20);

}  // namespace flr
