#include "flr/estimator.hpp"

#include <cmath>
#include <limits>

#include "flr/error.hpp"

namespace flr {

Moments empirical_moments(const Dataset& data, std::int64_t M) {
    if (M < 1 || M > data.dim())
        throw InvalidArgument("moment dimension M = " + std::to_string(M) + " outside 1..J = " +
                              std::to_string(data.dim()));
    const double n = static_cast<double>(data.n());
    const auto x = data.x.leftCols(M);
    Moments mom;
    mom.n = data.n();
    mom.ghat = x.transpose() * data.y / n;
    mom.gammahat = Eigen::MatrixXd::Zero(M, M);
    mom.gammahat.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / n);
    mom.gammahat.triangularView<Eigen::StrictlyUpper>() = mom.gammahat.transpose();
    mom.sigma2_y_hat = data.y.squaredNorm() / n;
    return mom;
}

SpectralInfo spectral_info(const Eigen::MatrixXd& mat) {
    if (mat.rows() != mat.cols() || mat.rows() == 0) throw InvalidArgument("expected a non-empty square matrix");
    const double scale = mat.norm();
    if ((mat - mat.transpose()).norm() > 1e-8 * scale) throw InvalidArgument("matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mat, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw NumericalError("symmetric eigendecomposition failed");
    SpectralInfo info;
    info.lambda_min = eig.eigenvalues().minCoeff();
    const double tol = 1e-12 * mat.trace() / static_cast<double>(mat.rows());
    info.singular = !(info.lambda_min > tol) || !(info.lambda_min > 0.0);
    info.inv_norm = info.singular ? std::numeric_limits<double>::infinity() : 1.0 / info.lambda_min;
    return info;
}

double spectral_norm_inverse(const Eigen::MatrixXd& mat) { return spectral_info(mat).inv_norm; }

GalerkinFit galerkin_estimate(const Moments& mom, std::int64_t m) {
    if (m < 1 || m > mom.dim())
        throw InvalidArgument("Galerkin dimension m = " + std::to_string(m) + " outside 1.." +
                              std::to_string(mom.dim()));
    const Eigen::MatrixXd block = mom.gammahat.topLeftCorner(m, m);
    const auto info = spectral_info(block);

    GalerkinFit fit;
    fit.m = m;
    fit.inv_spectral_norm = info.inv_norm;
    fit.thresholded = info.singular || info.inv_norm > static_cast<double>(mom.n);
    if (fit.thresholded) {
        fit.coeffs = Eigen::VectorXd::Zero(m);
        return fit;
    }
    const auto rhs = mom.ghat.head(m);
    Eigen::LLT<Eigen::MatrixXd> llt(block);
    if (llt.info() == Eigen::Success) {
        fit.coeffs = llt.solve(rhs);
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
        const auto& v = eig.eigenvectors();
        fit.coeffs = v * (v.transpose() * rhs).cwiseQuotient(eig.eigenvalues());
    }
    return fit;
}

double plug_in(const FunctionalSpec& spec, const GalerkinFit& fit) {
    if (fit.thresholded) return 0.0;
    return coefficients(spec, fit.m).dot(fit.coeffs);
}

}  // namespace flr
