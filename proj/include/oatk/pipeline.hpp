#ifndef OATK_PIPELINE_HPP
#define OATK_PIPELINE_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "oatk/core_linalg.hpp"
#include "oatk/errors.hpp"
#include "oatk/knockoff.hpp"
#include "oatk/rng.hpp"
#include "oatk/selection.hpp"
#include "oatk/statistics.hpp"

namespace oatk {

struct OatkOptions {
    std::optional<double> lambda_override; // skip LOOCV when set
    std::vector<double> lambda_grid;       // default grid when empty
    double alpha = 0.1;
    int offset_c = 0;
    double s_scale = 1.0; // s_j = s_scale * sigma_j^2
    std::uint64_t seed = 0;
};

// Everything about an OATK run that does not depend on the knockoff noise:
// ridge/OLS fits at the selected lambda, the per-column geometry, and the
// split beta~_j = det_part_j + noise_coef_j * t_j where t_j is the first
// coordinate of a uniform unit vector in the orthogonal complement of col(X).
// Derandomization and calibration replicates reuse this and only redraw t_j.
struct OatkModel {
    double lambda = 0.0;
    Eigen::VectorXd beta_ridge;
    Eigen::VectorXd beta_ols;
    Eigen::VectorXd geom;       // [Sigma_lambda^{-1}]_jj
    Eigen::VectorXd sigma_sq;
    Eigen::VectorXd s;
    Eigen::VectorXd det_part;   // beta_ridge - geom .* s .* beta_ols
    Eigen::VectorXd noise_coef; // geom .* rho .* ||y_perp||
    double y_perp_norm = 0.0;
    Eigen::Index complement_dim = 0; // n - p
};

inline OatkModel build_oatk_model(const DesignMatrix& design,
                                  const Eigen::VectorXd& y,
                                  const OatkOptions& opts) {
    if (design.n() <= design.p()) {
        throw DimensionError("knockoff generation requires n > p");
    }
    if (!(opts.s_scale >= 0.0 && opts.s_scale <= 2.0)) {
        throw SOutOfRangeError("s_scale must lie in [0, 2]");
    }

    OatkModel model;
    if (opts.lambda_override) {
        const auto fits = ridge_path(design, y, {*opts.lambda_override});
        model.lambda = fits[0].lambda;
        model.beta_ridge = fits[0].beta_ridge;
        model.beta_ols = fits[0].beta_ols;
    } else {
        const auto& grid =
            opts.lambda_grid.empty() ? default_lambda_grid() : opts.lambda_grid;
        const auto fits = ridge_path(design, y, grid);
        const RidgeFit& best = select_lambda_loocv(fits);
        model.lambda = best.lambda;
        model.beta_ridge = best.beta_ridge;
        model.beta_ols = best.beta_ols;
    }

    const ColumnGeometry geometry = column_geometry(design, model.lambda);
    model.geom = geometry.sigma_lambda_inv_diag;
    model.sigma_sq = geometry.sigma_sq;
    model.s = opts.s_scale * geometry.sigma_sq;

    const double rho_factor = std::sqrt(opts.s_scale * (2.0 - opts.s_scale));
    const Eigen::VectorXd rho = rho_factor * geometry.sigma_sq.cwiseSqrt();

    model.det_part = model.beta_ridge.array() -
                     model.geom.array() * model.s.array() * model.beta_ols.array();
    const double y_perp_sq =
        y.squaredNorm() - (design.svd.u.transpose() * y).squaredNorm();
    model.y_perp_norm = std::sqrt(std::max(0.0, y_perp_sq));
    model.noise_coef =
        (model.geom.array() * rho.array()).matrix() * model.y_perp_norm;
    model.complement_dim = design.n() - design.p();
    return model;
}

// One knockoff redraw: each t_j is distributed as r_j^T y / ||y_perp|| for a
// fresh unit r_j orthogonal to col(X), drawn sequentially from `eng`.
inline Eigen::VectorXd draw_beta_tilde(const OatkModel& model, std::mt19937_64& eng) {
    const Eigen::Index p = model.det_part.size();
    Eigen::VectorXd beta_tilde(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double t = sphere_coords(eng, 1, model.complement_dim)[0];
        beta_tilde[j] = model.det_part[j] + model.noise_coef[j] * t;
    }
    return beta_tilde;
}

struct OatkRun {
    OatkModel model;
    Eigen::VectorXd beta_tilde;
    WVector w;
    SelectionResult selection;
};

inline OatkRun run_oatk(const DesignMatrix& design, const Eigen::VectorXd& y,
                        const OatkOptions& opts, int replicate = 0) {
    OatkRun run;
    run.model = build_oatk_model(design, y, opts);
    auto eng = make_engine(opts.seed, {static_cast<std::uint64_t>(replicate)});
    run.beta_tilde = draw_beta_tilde(run.model, eng);

    CoefficientPair pair;
    pair.beta_hat = run.model.beta_ridge;
    pair.beta_tilde = run.beta_tilde;
    pair.lambda = run.model.lambda;
    run.w = w_statistics(pair);
    run.selection = knockoff_threshold(run.w, opts.alpha, opts.offset_c);
    run.selection.method = "oatk";
    return run;
}

inline DerandomizedResult run_oatk_derandomized(const DesignMatrix& design,
                                                const Eigen::VectorXd& y,
                                                const OatkOptions& opts, int m,
                                                double eta) {
    const OatkModel model = build_oatk_model(design, y, opts);
    auto replicate_run = [&](int rep, std::uint64_t) {
        auto eng = make_engine(opts.seed, {static_cast<std::uint64_t>(rep)});
        CoefficientPair pair;
        pair.beta_hat = model.beta_ridge;
        pair.beta_tilde = draw_beta_tilde(model, eng);
        pair.lambda = model.lambda;
        SelectionResult sel =
            knockoff_threshold(w_statistics(pair), opts.alpha, opts.offset_c);
        return sel;
    };
    return derandomize(replicate_run, static_cast<int>(design.p()), m, eta,
                       opts.seed);
}

struct MultibitRun {
    OatkModel model;
    PValueVector pvals;
    SelectionResult selection;
};

// Multi-copy OATK: per feature, M knockoff coefficients are obtained from the
// fast identity with the residual combinations R C, whose inner products with
// y reduce to ||y_perp|| times the first M coordinates of a uniform unit
// vector in the complement.
inline MultibitRun run_oatk_multibit(const DesignMatrix& design,
                                     const Eigen::VectorXd& y,
                                     const OatkOptions& opts, int m, double gamma,
                                     int replicate = 0) {
    if (m < 1) {
        throw DimensionError("multibit OATK needs M >= 1");
    }
    MultibitRun run;
    run.model = build_oatk_model(design, y, opts);
    if (run.model.complement_dim < m) {
        throw DimensionError("multibit OATK requires n >= p + M");
    }

    const Eigen::Index p = design.p();
    run.pvals.m = m;
    run.pvals.p_vals.resize(p);
    run.pvals.magnitudes.resize(p);

    auto eng = make_engine(opts.seed, {static_cast<std::uint64_t>(replicate)});
    for (Eigen::Index j = 0; j < p; ++j) {
        const Eigen::MatrixXd factor =
            multi_knockoff_factor(run.model.s[j], run.model.sigma_sq[j], m);
        const Eigen::VectorXd r_dot_y =
            run.model.y_perp_norm * sphere_coords(eng, m, run.model.complement_dim);
        const Eigen::VectorXd combo = factor.transpose() * r_dot_y;

        const double base = std::abs(run.model.beta_ridge[j]);
        double mag = base;
        int count = 0;
        for (int k = 0; k < m; ++k) {
            const double coef = run.model.det_part[j] + run.model.geom[j] * combo[k];
            const double a = std::abs(coef);
            if (a >= base) {
                ++count;
            }
            mag = std::max(mag, a);
        }
        run.pvals.p_vals[j] = (1.0 + count) / (m + 1.0);
        run.pvals.magnitudes[j] = mag;
    }

    run.selection = seqstep_plus(run.pvals, opts.alpha, gamma, opts.offset_c);
    run.selection.method = "oatk_multibit";
    return run;
}

} // namespace oatk

#endif
