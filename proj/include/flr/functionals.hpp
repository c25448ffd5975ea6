#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace flr {

// Trigonometric basis on [0,1]: psi_1 = 1, psi_{2k}(s) = sqrt2 cos(2 pi k s),
// psi_{2k+1}(s) = sqrt2 sin(2 pi k s).
double basis(std::int64_t j, double s);

struct PointEval {
    double t0 = 0.0;
};

// q-th derivative at t0.
struct DerivativeEval {
    double t0 = 0.0;
    int q = 1;
};

// Average over [0, b].
struct LocalAverage {
    double b = 1.0;
};

// Explicit coefficients [l]_1..[l]_K; zero beyond K.
struct Custom {
    std::vector<double> coeffs;
};

using FunctionalSpec = std::variant<PointEval, DerivativeEval, LocalAverage, Custom>;

void validate(const FunctionalSpec& spec);

// Parses "point:T0", "deriv:T0:Q", "avg:B" or "custom:c1,c2,...".
FunctionalSpec parse_functional(const std::string& text);
std::string to_string(const FunctionalSpec& spec);

// [l]_j = l(psi_j).
double coefficient(const FunctionalSpec& spec, std::int64_t j);

// ([l]_1, ..., [l]_m).
Eigen::VectorXd coefficients(const FunctionalSpec& spec, std::int64_t m);

// [l]_m^t [l]_m.
double gram(const FunctionalSpec& spec, std::int64_t m);

// Power-law profile of [l]_j^2 used for tail sums: on average [l]_j^2 ~ mean * j^{2e}
// and always [l]_j^2 <= envelope * j^{2e} for j >= 2.
struct CoefficientProfile {
    double mean = 0.0;
    double envelope = 0.0;
    double exponent = 0.0;  // e
};

// Empty for Custom (finitely supported, tails vanish).
std::optional<CoefficientProfile> coefficient_profile(const FunctionalSpec& spec);

// The decay index s with [l]_j^2 ~ j^{-2s}: 0 for point evaluation, -q for the
// q-th derivative, 1 for local averages. Empty for Custom.
std::optional<double> decay_index(const FunctionalSpec& spec);

}  // namespace flr
