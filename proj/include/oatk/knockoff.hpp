#ifndef OATK_KNOCKOFF_HPP
#define OATK_KNOCKOFF_HPP

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "oatk/core_linalg.hpp"
#include "oatk/errors.hpp"
#include "oatk/rng.hpp"

namespace oatk {

// Per-column decorrelation parameters plus the geometry they were derived
// from. s_j must lie in [0, 2 sigma_j^2] for single knockoffs and
// [0, (M+1)/M sigma_j^2] when M copies are generated.
struct KnockoffPlan {
    Eigen::VectorXd s;
    ColumnGeometry geometry;
    std::uint64_t seed = 0;
};

inline KnockoffPlan default_plan(const DesignMatrix& design, double lambda,
                                 std::uint64_t seed) {
    KnockoffPlan plan;
    plan.geometry = column_geometry(design, lambda);
    plan.s = plan.geometry.sigma_sq; // zeroes the null knockoff mean at lambda=0
    plan.seed = seed;
    return plan;
}

struct KnockoffColumn {
    Eigen::Index j = 0;
    Eigen::VectorXd x_tilde;
    Eigen::VectorXd r; // component orthogonal to col(X)
};

struct ResidualBasis {
    Eigen::MatrixXd r; // n x M, orthonormal columns with X^T R = 0
};

struct MultiKnockoffSet {
    Eigen::Index j = 0;
    int m = 0;
    double s = 0.0;
    Eigen::MatrixXd columns;  // n x M knockoff copies
    Eigen::MatrixXd c;        // M x M factor with C^T C = s I + s(1-s/sig^2) ee^T
    Eigen::MatrixXd residual; // R * C
};

namespace detail {

// Draws a unit vector orthogonal to col(X) and to the columns of `extra`.
// Projects twice to control floating-point drift; redraws on degenerate
// projections.
inline Eigen::VectorXd draw_complement_unit(const DesignMatrix& design,
                                            const Eigen::MatrixXd& extra,
                                            std::mt19937_64& eng) {
    const auto& u = design.svd.u;
    for (int attempt = 0; attempt < 100; ++attempt) {
        Eigen::VectorXd w = gaussian_vector(eng, design.n());
        for (int pass = 0; pass < 2; ++pass) {
            w -= u * (u.transpose() * w);
            if (extra.cols() > 0) {
                w -= extra * (extra.transpose() * w);
            }
        }
        const double norm = w.norm();
        if (norm >= 1e-12) {
            return w / norm;
        }
    }
    throw DegenerateDrawError("could not draw a vector orthogonal to the design");
}

inline void check_s_range(double s, double upper, Eigen::Index j) {
    if (!(s >= 0.0) || s > upper * (1.0 + 1e-12)) {
        throw SOutOfRangeError("s_" + std::to_string(j) + " = " + std::to_string(s) +
                               " outside [0, " + std::to_string(upper) + "]");
    }
}

} // namespace detail

inline ResidualBasis generate_residual(const DesignMatrix& design, int count,
                                       std::uint64_t seed) {
    if (count < 1) {
        throw DimensionError("residual basis needs count >= 1");
    }
    if (design.n() < design.p() + count) {
        throw DimensionError("residual basis of size " + std::to_string(count) +
                             " requires n >= p + count");
    }
    auto eng = make_engine(seed);
    ResidualBasis basis;
    basis.r.resize(design.n(), count);
    for (int k = 0; k < count; ++k) {
        basis.r.col(k) = detail::draw_complement_unit(design, basis.r.leftCols(k), eng);
    }
    return basis;
}

// Builds x~_j = (s/sig^2) P_{\j} x_j + (1 - s/sig^2) x_j + r_j with
// ||r_j|| = sqrt(2 s - s^2/sig^2) and r_j orthogonal to col(X).
inline KnockoffColumn generate_knockoff_column(const DesignMatrix& design,
                                               const KnockoffPlan& plan,
                                               Eigen::Index j) {
    const double sig_sq = plan.geometry.sigma_sq[j];
    const double s = plan.s[j];
    detail::check_s_range(s, 2.0 * sig_sq, j);

    KnockoffColumn kc;
    kc.j = j;
    const double rho_sq = std::max(0.0, 2.0 * s - s * s / sig_sq);
    const double rho = std::sqrt(rho_sq);
    if (rho > 0.0) {
        auto eng = make_engine(plan.seed, {static_cast<std::uint64_t>(j)});
        kc.r = rho * detail::draw_complement_unit(design, Eigen::MatrixXd(design.n(), 0), eng);
    } else {
        kc.r = Eigen::VectorXd::Zero(design.n());
    }

    // residual of x_j on the other columns, so P_{\j} x_j = x_j - v_j
    const Eigen::VectorXd v_j = sig_sq * design.dual.col(j);
    kc.x_tilde = design.values.col(j) - (s / sig_sq) * v_j + kc.r;
    return kc;
}

struct ConditionResiduals {
    double cross = 0.0;  // max_i |x_i^T (x_j - x~_j)| over i != j
    double inner = 0.0;  // |x_j^T x~_j - (1 - s_j)|
    double norm = 0.0;   // |x~_j^T x~_j - 1|

    double max() const { return std::max(cross, std::max(inner, norm)); }
};

inline ConditionResiduals verify_conditions(const DesignMatrix& design,
                                            const KnockoffColumn& kc, double s) {
    if (kc.x_tilde.size() != design.n()) {
        throw DimensionError("knockoff column length does not match the design");
    }
    ConditionResiduals res;
    const Eigen::VectorXd diff = design.values.col(kc.j) - kc.x_tilde;
    const Eigen::VectorXd cross = design.values.transpose() * diff;
    for (Eigen::Index i = 0; i < design.p(); ++i) {
        if (i != kc.j) {
            res.cross = std::max(res.cross, std::abs(cross[i]));
        }
    }
    res.inner = std::abs(design.values.col(kc.j).dot(kc.x_tilde) - (1.0 - s));
    res.norm = std::abs(kc.x_tilde.squaredNorm() - 1.0);
    return res;
}

// Square-root factor of s I_M + s (1 - s/sig^2) e e^T. The boundary value
// s = (M+1)/M sig^2 makes the matrix singular, so this clamps eigenvalues in
// [-1e-10, 0) to zero instead of Cholesky-factoring.
inline Eigen::MatrixXd multi_knockoff_factor(double s, double sig_sq, int m) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Constant(m, m, s * (1.0 - s / sig_sq));
    gram.diagonal().array() += s;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) {
        throw FactorizationError("eigendecomposition of the copy Gram failed");
    }
    Eigen::VectorXd evals = eig.eigenvalues();
    for (Eigen::Index i = 0; i < evals.size(); ++i) {
        if (evals[i] < -1e-10) {
            throw FactorizationError("copy Gram is indefinite: eigenvalue " +
                                     std::to_string(evals[i]));
        }
        evals[i] = std::sqrt(std::max(0.0, evals[i]));
    }
    return eig.eigenvectors() * evals.asDiagonal() * eig.eigenvectors().transpose();
}

inline MultiKnockoffSet generate_multi_knockoffs(const DesignMatrix& design,
                                                 const KnockoffPlan& plan,
                                                 Eigen::Index j, int count,
                                                 std::uint64_t seed) {
    if (count < 1) {
        throw DimensionError("multi-knockoff count must be >= 1");
    }
    if (design.n() < design.p() + count) {
        throw DimensionError("multi-knockoffs require n >= p + M");
    }
    const double sig_sq = plan.geometry.sigma_sq[j];
    const double s = plan.s[j];
    detail::check_s_range(s, (count + 1.0) / count * sig_sq, j);

    MultiKnockoffSet set;
    set.j = j;
    set.m = count;
    set.s = s;
    set.c = multi_knockoff_factor(s, sig_sq, count);

    const ResidualBasis basis =
        generate_residual(design, count, substream(seed, {static_cast<std::uint64_t>(j)}));
    set.residual = basis.r * set.c;

    const Eigen::VectorXd v_j = sig_sq * design.dual.col(j);
    const Eigen::VectorXd base = design.values.col(j) - (s / sig_sq) * v_j;
    set.columns = base.replicate(1, count) + set.residual;
    return set;
}

} // namespace oatk

#endif
