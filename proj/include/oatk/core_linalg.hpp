#ifndef OATK_CORE_LINALG_HPP
#define OATK_CORE_LINALG_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "oatk/errors.hpp"

namespace oatk {

struct SvdFactors {
    Eigen::MatrixXd u; // n x p, orthonormal columns
    Eigen::VectorXd d; // p singular values, descending, strictly positive
    Eigen::MatrixXd v; // p x p, orthonormal
};

// Fixed design with unit-norm columns and cached SVD-derived quantities.
// Build through ingest_design; the invariants (full rank, n >= p, finite
// entries) are enforced there.
struct DesignMatrix {
    Eigen::MatrixXd values; // n x p
    SvdFactors svd;

    // Cached derivatives of the SVD shared by the downstream modules:
    //   u_sq(i,k)  = U(i,k)^2                   (ridge leverage sums)
    //   dual.col(j)= U diag(1/d) V^T e_j        (residual of x_j on the rest,
    //                                            scaled by 1/sigma_j^2)
    //   sigma_sq_j = 1 / [Sigma^{-1}]_jj        (SSE of x_j on the rest)
    Eigen::MatrixXd u_sq;
    Eigen::MatrixXd dual;
    Eigen::VectorXd sigma_sq;
    Eigen::VectorXd sigma_inv_diag;

    std::vector<std::string> column_names; // empty unless the source had headers

    Eigen::Index n() const { return values.rows(); }
    Eigen::Index p() const { return values.cols(); }

    // Unit-norm component of x_j orthogonal to the remaining columns.
    Eigen::VectorXd residual_direction(Eigen::Index j) const {
        return dual.col(j) * std::sqrt(sigma_sq[j]);
    }
};

struct IngestOptions {
    bool normalize = true;
    bool center = false;
    double rank_tol = 1e-10;
};

inline DesignMatrix ingest_design(Eigen::MatrixXd raw,
                                  const IngestOptions& opts = {}) {
    if (!raw.allFinite()) {
        throw NonFiniteError("design matrix contains non-finite entries");
    }
    const Eigen::Index n = raw.rows();
    const Eigen::Index p = raw.cols();
    if (p < 1) {
        throw DimensionError("design matrix needs at least one column");
    }
    if (n < p) {
        throw DimensionError("design matrix requires n >= p, got n=" +
                             std::to_string(n) + ", p=" + std::to_string(p));
    }

    if (opts.center) {
        raw.rowwise() -= raw.colwise().mean();
    }
    if (opts.normalize) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const double norm = raw.col(j).norm();
            if (norm <= 0.0) {
                throw RankDeficientError("column " + std::to_string(j) +
                                         " has zero norm");
            }
            raw.col(j) /= norm;
        }
    }

    DesignMatrix design;
    design.values = std::move(raw);

    Eigen::BDCSVD<Eigen::MatrixXd> svd(design.values,
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    design.svd.u = svd.matrixU();
    design.svd.d = svd.singularValues();
    design.svd.v = svd.matrixV();

    if (design.svd.d[p - 1] <= opts.rank_tol * design.svd.d[0]) {
        throw RankDeficientError("design matrix is numerically rank deficient");
    }

    design.u_sq = design.svd.u.array().square();
    design.dual = design.svd.u * design.svd.d.cwiseInverse().asDiagonal() *
                  design.svd.v.transpose();

    const Eigen::MatrixXd v_sq = design.svd.v.array().square();
    design.sigma_inv_diag = v_sq * design.svd.d.array().square().inverse().matrix();
    design.sigma_sq = design.sigma_inv_diag.cwiseInverse();
    return design;
}

struct RidgeFit {
    double lambda = 0.0;
    Eigen::VectorXd beta_ridge; // ridge coefficients at lambda
    Eigen::VectorXd beta_ols;   // lambda = 0 coefficients of the same fit
    Eigen::VectorXd fitted;     // X beta_ridge
    double loocv_sse = std::numeric_limits<double>::quiet_NaN();
    bool loocv_defined = false; // false when some leverage hits 1
};

// Fits the whole lambda grid from one SVD. The leave-one-out SSE uses the
// closed-form leverage correction, so no refits are performed; a lambda whose
// leverage reaches 1 gets loocv_defined = false instead of aborting the path.
inline std::vector<RidgeFit> ridge_path(const DesignMatrix& design,
                                        const Eigen::VectorXd& y,
                                        const std::vector<double>& lambdas) {
    if (y.size() != design.n()) {
        throw DimensionError("response length does not match design rows");
    }
    if (lambdas.empty()) {
        throw Error("lambda grid is empty");
    }
    for (double lam : lambdas) {
        if (!(lam >= 0.0)) {
            throw Error("lambda grid entries must be non-negative");
        }
    }

    const auto& u = design.svd.u;
    const auto& d = design.svd.d;
    const auto& v = design.svd.v;
    const Eigen::VectorXd uty = u.transpose() * y;
    const Eigen::VectorXd beta_ols = v * uty.cwiseQuotient(d);
    const Eigen::ArrayXd d_sq = d.array().square();

    std::vector<RidgeFit> fits;
    fits.reserve(lambdas.size());
    for (double lam : lambdas) {
        RidgeFit fit;
        fit.lambda = lam;
        const Eigen::ArrayXd shrink = d_sq / (d_sq + lam);
        fit.beta_ridge = v * (d.array() / (d_sq + lam) * uty.array()).matrix();
        fit.beta_ols = beta_ols;
        fit.fitted = u * (shrink * uty.array()).matrix();

        const Eigen::ArrayXd leverage = (design.u_sq * shrink.matrix()).array();
        const Eigen::ArrayXd margin = 1.0 - leverage;
        if ((margin <= 1e-12).any()) {
            fit.loocv_defined = false;
        } else {
            const Eigen::ArrayXd loo = (y - fit.fitted).array() / margin;
            fit.loocv_sse = loo.square().sum();
            fit.loocv_defined = true;
        }
        fits.push_back(std::move(fit));
    }
    return fits;
}

inline const RidgeFit& select_lambda_loocv(const std::vector<RidgeFit>& fits) {
    const RidgeFit* best = nullptr;
    for (const auto& fit : fits) {
        if (!fit.loocv_defined) {
            continue;
        }
        if (best == nullptr || fit.loocv_sse < best->loocv_sse ||
            (fit.loocv_sse == best->loocv_sse && fit.lambda < best->lambda)) {
            best = &fit;
        }
    }
    if (best == nullptr) {
        throw AllSkippedError("no lambda on the grid has a defined LOOCV score");
    }
    return *best;
}

struct ColumnGeometry {
    double lambda = 0.0;
    Eigen::VectorXd sigma_lambda_inv_diag; // [Sigma_lambda^{-1}]_jj
    Eigen::VectorXd sigma_sq;              // 1 / [Sigma^{-1}]_jj
};

inline ColumnGeometry column_geometry(const DesignMatrix& design, double lambda) {
    ColumnGeometry geom;
    geom.lambda = lambda;
    const Eigen::MatrixXd v_sq = design.svd.v.array().square();
    geom.sigma_lambda_inv_diag =
        v_sq * (design.svd.d.array().square() + lambda).inverse().matrix();
    geom.sigma_sq = design.sigma_sq;
    return geom;
}

inline std::vector<double> default_lambda_grid(int points = 50,
                                               double lo = 1e-4,
                                               double hi = 1e4) {
    std::vector<double> grid(points);
    if (points == 1) {
        grid[0] = lo;
        return grid;
    }
    const double step = (std::log(hi) - std::log(lo)) / (points - 1);
    for (int i = 0; i < points; ++i) {
        grid[i] = std::exp(std::log(lo) + step * i);
    }
    return grid;
}

} // namespace oatk

#endif
