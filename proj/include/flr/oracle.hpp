#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "flr/functionals.hpp"
#include "flr/sequences.hpp"
#include "flr/simulate.hpp"

namespace flr {

inline constexpr std::int64_t kDefaultTailTerms = 1'000'000;
inline constexpr double kTheoreticalPenaltyConstant = 100.0;

// sum_{j>m} [l]_j^2 / beta_j. Polynomial beta: explicit partial sum to j_tail plus an
// integral estimate of the remainder. Exponential beta: summed until terms vanish.
// Throws NumericalError when the tail diverges.
double tail_sum(const SequenceModel& model, const FunctionalSpec& spec, std::int64_t m,
                std::int64_t j_tail = kDefaultTailTerms);

// R_m[x] = max{ sum_{j>m} [l]_j^2/beta_j, max(gamma_m/beta_m, x) sum_{j<=m} [l]_j^2/gamma_j }.
double risk_term(const SequenceModel& model, const FunctionalSpec& spec, std::int64_t m, double x,
                 std::int64_t j_tail = kDefaultTailTerms);

struct OracleRisk {
    double x = 0.0;
    std::vector<double> values;  // R_1[x]..R_M[x]
    std::int64_t m_star = 0;     // smallest minimizer
    double r_star = 0.0;
    bool at_boundary = false;    // minimizer sits on the search limit
};

// x = 1/n gives m*, x = (1 + log n)/n gives the adaptive dimension.
OracleRisk minimax_dimension(const SequenceModel& model, const FunctionalSpec& spec, double x,
                             std::int64_t m_search, std::int64_t j_tail = kDefaultTailTerms);

// (pp): max(64, 4 n^{1/(2p+2a)}); (pe): ceil((log n)^{1/(2a)}) + 16; (ep): ceil((log n)^{1/(2p)}) + 16.
std::int64_t default_search_range(const SequenceModel& model, std::int64_t n);

// Population covariance [Gamma]_J: diag(gamma) with optional pairwise Givens rotation.
Eigen::MatrixXd population_covariance(const SequenceModel& model, std::int64_t J, double rotation = 0.0);

// Smallest d with d^{-2} ||h||_{gamma^2}^2 <= ||Gamma h||^2 <= d^2 ||h||_{gamma^2}^2 for the
// rotated-diagonal construction restricted to the first J coordinates.
double class_constant_d(const SequenceModel& model, std::int64_t J, double rotation);

struct TheoreticalPenalty {
    std::int64_t m = 0;
    double sigma_y_sq = 0.0;   // E Y^2
    double sigma_m_sq = 0.0;   // 2 E Y^2 + 2 [g]_m^t [Gamma]_m^{-1} [g]_m
    double v_m = 0.0;          // max_{k<=m} [l]_k^t [Gamma]_k^{-1} [l]_k
    double rho_m_sq = 0.0;     // sigma^2 + <Gamma(phi - phi_m), phi - phi_m>
    double p_m = 0.0;          // C sigma_m^2 V_m (1 + log n) / n
};

// Penalties for m = 1..m_max from population quantities of the simulated design.
std::vector<TheoreticalPenalty> theoretical_penalties(const SequenceModel& model, const FunctionalSpec& spec,
                                                      const SlopeSpec& slope, double sigma, std::int64_t n,
                                                      std::int64_t m_max, double rotation = 0.0,
                                                      double constant = kTheoreticalPenaltyConstant);

TheoreticalPenalty theoretical_penalty(const SequenceModel& model, const FunctionalSpec& spec,
                                       const SlopeSpec& slope, double sigma, std::int64_t n, std::int64_t m,
                                       double rotation = 0.0);

enum class RateMode { Minimax, Adaptive };

// Order n^{n_power} (log n)^{log_power} (log log n)^{loglog_power}.
struct RateDescriptor {
    Regime regime = Regime::PP;
    RateMode mode = RateMode::Minimax;
    double s = 0.0;  // decay index of [l]_j^2 ~ j^{-2s}
    double n_power = 0.0;
    double log_power = 0.0;
    double loglog_power = 0.0;
    std::string branch;      // "s-a<1/2", "s-a=1/2", "s-a>1/2" or "all"
    std::string expression;

    double evaluate(double n) const;
};

// Throws InvalidArgument naming the violated condition.
RateDescriptor rate_exponent(const SequenceModel& model, const FunctionalSpec& spec, RateMode mode);

nlohmann::json to_json(const RateDescriptor& rate);

struct InverseNormReport {
    double d = 1.0;
    double upper = 4.0;                  // 4 d^3
    std::vector<double> gamma_inv_norm;  // gamma_m ||[Gamma]_m^{-1}||
    std::vector<double> v_ratio;         // V_m / V_m^gamma
    bool pass = true;
};

// Checks d^{-1} <= gamma_m ||[Gamma]_m^{-1}|| <= 4d^3 and d^{-1} <= V_m/V_m^gamma <= 4d^3 for m = 1..M.
InverseNormReport inverse_norm_bounds_check(const SequenceModel& model, const FunctionalSpec& spec, double rotation,
                                    std::int64_t M);

}  // namespace flr
