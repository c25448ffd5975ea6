#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flr/adaptive.hpp"
#include "flr/oracle.hpp"
#include "flr/functionals.hpp"
#include "flr/sequences.hpp"

namespace flr {

struct StudyConfig {
    SequenceModel model;
    FunctionalSpec spec = PointEval{0.3};
    double sigma = 1.0;
    std::vector<std::int64_t> n_grid;
    std::int64_t replicates = 200;
    std::uint64_t base_seed = 1;
    double penalty_constant = kDefaultPenaltyConstant;
    double slope_scale = 0.9;
    double rotation = 0.0;
    unsigned threads = 0;  // 0: hardware concurrency

    // R >= 2, n_grid strictly increasing, all n >= 16.
    void validate() const;
};

// Seed of replicate r at sample size n.
std::uint64_t replicate_seed(std::uint64_t base_seed, std::int64_t n, std::int64_t replicate);

struct ReplicateRecord {
    std::int64_t n = 0;
    std::int64_t replicate = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::int64_t m_ell_cap = 0;
    std::int64_t m_hat_cap = 0;
    std::int64_t selected = 0;
    double value = 0.0;
    double sq_err_adaptive = 0.0;
    double sq_err_oracle = 0.0;  // min over m <= M_n^l
    std::int64_t oracle_m = 0;
    std::vector<double> sq_err_by_m;  // m = 1..M_n^l
    double sq_err_fixed = 0.0;   // fixed m*(n)
    bool sandwich = false;       // p_m <= p^_m <= 24 p_m on the candidate range
};

struct GridPoint {
    std::int64_t n = 0;
    std::int64_t truncation = 0;
    double truth = 0.0;
    double truth_tail_bound = 0.0;
    std::int64_t m_ell_cap = 0;
    std::int64_t m_star = 0;      // argmin R_m[1/n]
    std::int64_t m_diamond = 0;   // argmin R_m[(1 + log n)/n]
    double r_star_minimax = 0.0;  // R*[1/n]
    double r_star_adaptive = 0.0; // R*[(1 + log n)/n]
    double side_condition_ratio = 0.0;  // gamma_{m<>}^{-1} |[l]_{m<>}|^2 (1 + log n) / n
    std::int64_t sandwich_upper = 0;    // deterministic upper bound on M^_n
    double class_d = 1.0;

    std::int64_t completed = 0;
    std::int64_t failures = 0;
    double mse_adaptive = 0.0, se_adaptive = 0.0;
    double mse_oracle = 0.0, se_oracle = 0.0;
    double mse_fixed = 0.0, se_fixed = 0.0;
    std::vector<double> mse_by_m;       // m = 1..M_n^l
    std::int64_t best_fixed_m = 0;      // argmin of mse_by_m
    double mse_best_fixed = 0.0;
    std::vector<std::int64_t> selected_histogram;  // index m^ (slot 0 unused)
    double sandwich_frequency = 0.0;
};

struct RateFit {
    double slope = 0.0;
    double stderr_ = 0.0;
};

enum class Abscissa { N, NOverLogN };

// OLS of log(risk) on log(abscissa). Needs >= 3 points with positive risks.
RateFit fit_rate(const std::vector<std::int64_t>& n_values, const std::vector<double>& risks, Abscissa abscissa);

struct StudyReport {
    StudyConfig config;
    std::vector<GridPoint> points;
    std::vector<ReplicateRecord> records;
    std::optional<RateFit> adaptive_vs_n_over_log_n;
    std::optional<RateFit> adaptive_vs_n;
    std::optional<RateFit> oracle_vs_n;
    std::optional<RateFit> fixed_vs_n;
    std::optional<RateDescriptor> minimax_rate;
    std::optional<RateDescriptor> adaptive_rate;
    std::vector<std::string> notes;
};

// Throws NumericalError when more than 1% of replicates fail.
StudyReport run_study(const StudyConfig& cfg);

// Fraction of replicates at sample size n on which p_m <= p^_m <= 24 p_m for all
// m <= min(M^_n, upper deterministic bound).
double sandwich_frequency(const StudyConfig& cfg, std::int64_t n);

nlohmann::json to_json(const StudyReport& report);
nlohmann::json to_json(const StudyConfig& cfg);

// n, risk_adaptive, se, risk_oracle, rate_theoretical_minimax, rate_theoretical_adaptive
void write_rate_curves_csv(std::ostream& out, const StudyReport& report);
// One row per (n, replicate).
void write_records_csv(std::ostream& out, const StudyReport& report);

}  // namespace flr
