#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace flr {

// Pairing of slope-regularity weights (beta) and eigenvalue-decay weights (gamma):
//   PP: beta_j = j^{2p},          gamma_j = j^{-2a}
//   PE: beta_j = j^{2p},          gamma_j = exp(-j^{2a} + 1)
//   EP: beta_j = exp(j^{2p} - 1), gamma_j = j^{-2a}
enum class Regime { PP, PE, EP };

std::string_view to_string(Regime regime);
Regime parse_regime(std::string_view name);

struct SequenceModel {
    Regime regime = Regime::PP;
    double p = 1.0;  // smoothness exponent
    double a = 1.0;  // decay exponent
    double r = 1.0;  // ellipsoid radius
    double d = 1.0;  // link constant of the operator class

    // Throws InvalidArgument naming the violated constraint.
    void validate() const;
};

// Exponents above this switch to log-space arithmetic.
inline constexpr double kLogSpaceThreshold = 700.0;

double log_beta(const SequenceModel& model, std::int64_t j);
double log_gamma(const SequenceModel& model, std::int64_t j);

// Throws SaturationError when beta_j exceeds the double range (EP at large j).
double beta(const SequenceModel& model, std::int64_t j);

struct GammaValue {
    double value = 0.0;
    bool underflow = false;  // value clamped to the smallest positive normal
};

GammaValue gamma(const SequenceModel& model, std::int64_t j);

struct SeriesCheck {
    double partial_sum = 0.0;
    double last_block = 0.0;   // sum over (J/2, J]
    double block_ratio = 0.0;  // last_block / sum over (J/4, J/2]
    bool convergent = false;
};

struct AssumptionReport {
    bool beta_monotone = false;   // beta non-decreasing on 1..J
    bool gamma_monotone = false;  // gamma non-increasing on 1..J
    SeriesCheck ell_over_beta;    // sum [l]_j^2 / beta_j
    SeriesCheck gamma_sum;        // sum gamma_j
    bool satisfied() const {
        return beta_monotone && gamma_monotone && ell_over_beta.convergent && gamma_sum.convergent;
    }
};

// Report-only numeric check of the standing assumptions on 1..J. `ell` returns [l]_j.
AssumptionReport check_assumption(const SequenceModel& model,
                                  const std::function<double(std::int64_t)>& ell,
                                  std::int64_t J);

}  // namespace flr
