#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "flr/functionals.hpp"
#include "flr/simulate.hpp"

namespace flr {

// Empirical moments to dimension M: [g^]_M = n^{-1} sum Y_i [X_i]_M,
// [Gamma^]_M = n^{-1} sum [X_i]_M [X_i]_M^t and sigma^2_Y = n^{-1} sum Y_i^2.
struct Moments {
    Eigen::VectorXd ghat;
    Eigen::MatrixXd gammahat;
    double sigma2_y_hat = 0.0;
    std::int64_t n = 0;

    std::int64_t dim() const { return ghat.size(); }
};

Moments empirical_moments(const Dataset& data, std::int64_t M);

// Eigen-decomposition of a leading block; shared by the threshold test and the solve.
struct SpectralInfo {
    double lambda_min = 0.0;
    double inv_norm = 0.0;  // 1 / lambda_min, or +inf when numerically singular
    bool singular = false;
};

// Singular iff lambda_min <= 1e-12 * trace / m. Rejects asymmetry beyond 1e-8 ||mat||.
SpectralInfo spectral_info(const Eigen::MatrixXd& mat);

// ||mat^{-1}|| = 1 / lambda_min(mat), or +inf.
double spectral_norm_inverse(const Eigen::MatrixXd& mat);

struct GalerkinFit {
    std::int64_t m = 0;
    Eigen::VectorXd coeffs;  // zero vector when thresholded
    bool thresholded = false;
    double inv_spectral_norm = 0.0;
};

// Thresholded Galerkin solution: [Gamma^]_m^{-1}[g^]_m when [Gamma^]_m is non-singular
// and ||[Gamma^]_m^{-1}|| <= n, zero otherwise.
GalerkinFit galerkin_estimate(const Moments& mom, std::int64_t m);

// [l]_m^t [phi^_m]_m; zero for thresholded fits.
double plug_in(const FunctionalSpec& spec, const GalerkinFit& fit);

}  // namespace flr
