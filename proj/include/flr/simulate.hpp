#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "flr/functionals.hpp"
#include "flr/sequences.hpp"

namespace flr {

// max(4 floor(n^{1/4}), 128).
std::int64_t default_truncation(std::int64_t n);

// floor(n^{1/4}) computed exactly in integers.
std::int64_t fourth_root_floor(std::int64_t n);

// SplitMix64 finalizer; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t x);

struct SimConfig {
    std::int64_t n = 1000;
    double sigma = 1.0;
    std::int64_t J = 0;  // 0 selects default_truncation(n)
    std::uint64_t seed = 1;
    SequenceModel model;
    double slope_scale = 0.9;
    double rotation = 0.0;  // Givens angle applied to coefficient pairs (2k-1, 2k)

    std::int64_t truncation() const { return J > 0 ? J : default_truncation(n); }
    void validate() const;
};

struct SlopeSpec {
    Eigen::VectorXd coeffs;        // [phi]_1..[phi]_J
    double true_norm_beta_sq = 0;  // sum beta_j [phi]_j^2
};

struct Dataset {
    Eigen::VectorXd y;  // n
    Eigen::MatrixXd x;  // n x J, row i holds [X_i]_J
    SimConfig config;

    std::int64_t n() const { return y.size(); }
    std::int64_t dim() const { return x.cols(); }
};

// Canonical slope rescaled so that sum beta_j [phi]_j^2 = slope_scale * r; slope_scale = 0 gives phi = 0.
SlopeSpec make_slope(const SequenceModel& model, std::int64_t J, double slope_scale);

// [X_i]_j = sqrt(gamma_j) xi_ij (then rotated pairwise), Y_i = <phi, X_i> + sigma eps_i.
Dataset draw_dataset(const SimConfig& config, const SlopeSpec& slope);

struct TrueValue {
    double value = 0.0;       // sum_{j<=J} [l]_j [phi]_j
    double tail_bound = 0.0;  // r^{1/2} (sum_{j>J} [l]_j^2 / beta_j)^{1/2}, +inf if divergent
};

TrueValue true_value(const FunctionalSpec& spec, const SlopeSpec& slope, const SequenceModel& model);

// CSV with header "y,x1,...,xJ"; doubles in shortest round-trip form.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::string& path, const Dataset& data);
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::string& path);

// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace flr
