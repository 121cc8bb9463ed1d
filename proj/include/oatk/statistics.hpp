#ifndef OATK_STATISTICS_HPP
#define OATK_STATISTICS_HPP

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "oatk/core_linalg.hpp"
#include "oatk/errors.hpp"
#include "oatk/knockoff.hpp"

namespace oatk {

struct CoefficientPair {
    Eigen::VectorXd beta_hat;   // ridge coefficients of the original design
    Eigen::VectorXd beta_tilde; // one-at-a-time knockoff coefficients
    double lambda = 0.0;
};

struct WVector {
    Eigen::VectorXd w;
};

struct PValueVector {
    Eigen::VectorXd p_vals;     // supported on {1/(M+1), ..., 1}
    Eigen::VectorXd magnitudes; // M_j = max over the M+1 coefficient magnitudes
    int m = 0;
};

// Knockoff coefficients without any knockoff regression:
//   beta~_j = beta^_j - [Sig_l^{-1}]_jj s_j beta_ols_j
//           + [Sig_l^{-1}]_jj rho_j r_j^T y,   rho_j = sqrt(2 s_j - s_j^2/sig_j^2)
// `residuals` holds one unit-norm column per feature, orthogonal to col(X).
inline CoefficientPair knockoff_coefficients(const DesignMatrix& design,
                                             const Eigen::VectorXd& y,
                                             const RidgeFit& fit,
                                             const ColumnGeometry& geometry,
                                             const Eigen::MatrixXd& residuals,
                                             const Eigen::VectorXd& s) {
    if (fit.lambda != geometry.lambda) {
        throw LambdaMismatchError("fit and geometry were computed at different lambdas");
    }
    const Eigen::Index p = design.p();
    if (y.size() != design.n() || residuals.rows() != design.n() ||
        residuals.cols() != p || s.size() != p || fit.beta_ridge.size() != p) {
        throw DimensionError("knockoff_coefficients: mismatched dimensions");
    }

    CoefficientPair pair;
    pair.lambda = fit.lambda;
    pair.beta_hat = fit.beta_ridge;
    pair.beta_tilde.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double rho =
            std::sqrt(std::max(0.0, 2.0 * s[j] - s[j] * s[j] / geometry.sigma_sq[j]));
        pair.beta_tilde[j] = fit.beta_ridge[j] -
                             geometry.sigma_lambda_inv_diag[j] * s[j] * fit.beta_ols[j] +
                             geometry.sigma_lambda_inv_diag[j] * rho *
                                 residuals.col(j).dot(y);
    }
    return pair;
}

// W_j = |beta^_j| when it is at least |beta~_j| (ties included), else -|beta~_j|.
inline WVector w_statistics(const CoefficientPair& pair) {
    WVector out;
    out.w.resize(pair.beta_hat.size());
    for (Eigen::Index j = 0; j < pair.beta_hat.size(); ++j) {
        const double a = std::abs(pair.beta_hat[j]);
        const double b = std::abs(pair.beta_tilde[j]);
        out.w[j] = (a >= b) ? a : -b;
    }
    return out;
}

// Rank-based p-values from M knockoff copies per feature. Each copy's
// coefficient reuses the single-knockoff identity with r_j replaced by the
// corresponding column of R C, so the per-copy cost is one inner product.
inline PValueVector multi_knockoff_pvalues(const DesignMatrix& design,
                                           const Eigen::VectorXd& y,
                                           const RidgeFit& fit,
                                           const ColumnGeometry& geometry,
                                           const std::vector<MultiKnockoffSet>& sets) {
    if (fit.lambda != geometry.lambda) {
        throw LambdaMismatchError("fit and geometry were computed at different lambdas");
    }
    const Eigen::Index p = design.p();
    if (static_cast<Eigen::Index>(sets.size()) != p || y.size() != design.n()) {
        throw DimensionError("multi_knockoff_pvalues: mismatched dimensions");
    }
    const int m = sets.empty() ? 0 : sets.front().m;
    for (const auto& set : sets) {
        if (set.m != m) {
            throw DimensionError("all multi-knockoff sets must share the same M");
        }
    }

    PValueVector out;
    out.m = m;
    out.p_vals.resize(p);
    out.magnitudes.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto& set = sets[j];
        const double base = std::abs(fit.beta_ridge[j]);
        const double det_part = fit.beta_ridge[j] -
                                geometry.sigma_lambda_inv_diag[j] * set.s *
                                    fit.beta_ols[j];
        double mag = base;
        int count = 0;
        for (int k = 0; k < m; ++k) {
            const double coef =
                det_part + geometry.sigma_lambda_inv_diag[j] * set.residual.col(k).dot(y);
            const double a = std::abs(coef);
            if (a >= base) {
                ++count;
            }
            mag = std::max(mag, a);
        }
        out.p_vals[j] = (1.0 + count) / (m + 1.0);
        out.magnitudes[j] = mag;
    }
    return out;
}

} // namespace oatk

#endif
