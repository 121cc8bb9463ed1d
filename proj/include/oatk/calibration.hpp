#ifndef OATK_CALIBRATION_HPP
#define OATK_CALIBRATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "oatk/core_linalg.hpp"
#include "oatk/errors.hpp"
#include "oatk/pipeline.hpp"
#include "oatk/rng.hpp"
#include "oatk/selection.hpp"

namespace oatk {

// G_j = (X_{\j}^T y, ||y||^2): sufficient for the model with beta_j = 0.
struct SufficientStatistic {
    Eigen::Index j = 0;
    Eigen::VectorXd xty_minus_j;
    double y_norm_sq = 0.0;
};

struct CalibrationConfig {
    int mc_replicates = 200;
    // Inner level for T_beta; NaN resolves to the target alpha.
    double beta_level = std::numeric_limits<double>::quiet_NaN();
    int c = 1;
    enum class CandidateRule { full, fast };
    CandidateRule candidate_rule = CandidateRule::fast;
};

struct EValueVector {
    Eigen::VectorXd e;
    double beta_level = 0.0;
    int c = 1;
};

inline SufficientStatistic sufficient_statistic(const DesignMatrix& design,
                                                const Eigen::VectorXd& y,
                                                Eigen::Index j) {
    if (y.size() != design.n()) {
        throw DimensionError("response length does not match design rows");
    }
    SufficientStatistic stat;
    stat.j = j;
    stat.xty_minus_j.resize(design.p() - 1);
    Eigen::Index out = 0;
    for (Eigen::Index k = 0; k < design.p(); ++k) {
        if (k != j) {
            stat.xty_minus_j[out++] = design.values.col(k).dot(y);
        }
    }
    stat.y_norm_sq = y.squaredNorm();
    return stat;
}

namespace detail {

// Draws uniformly from the unit sphere of the orthogonal complement of
// col(X_{\j}), which is the complement of col(X) extended by the residual
// direction u_j.
inline Eigen::VectorXd draw_minus_j_complement_unit(const DesignMatrix& design,
                                                    const Eigen::VectorXd& u_j,
                                                    std::mt19937_64& eng) {
    const auto& u = design.svd.u;
    for (int attempt = 0; attempt < 100; ++attempt) {
        Eigen::VectorXd w = gaussian_vector(eng, design.n());
        for (int pass = 0; pass < 2; ++pass) {
            w += u_j * u_j.dot(w) - u * (u.transpose() * w);
        }
        const double norm = w.norm();
        if (norm >= 1e-12) {
            return w / norm;
        }
    }
    throw DegenerateDrawError("could not draw from the conditional complement");
}

} // namespace detail

// Samples y' with X_{\j}^T y' = X_{\j}^T y and ||y'||^2 = ||y||^2:
// y' = P_{\j} y + rho v, where rho^2 is the norm budget left after the
// projection and v is uniform on the complement sphere (dimension n - p + 1).
inline Eigen::VectorXd sample_y_given_statistic(const DesignMatrix& design,
                                                const SufficientStatistic& stat,
                                                std::uint64_t seed) {
    const Eigen::Index n = design.n();
    const Eigen::Index p = design.p();
    if (stat.xty_minus_j.size() != p - 1) {
        throw DimensionError("statistic does not match the design");
    }

    Eigen::VectorXd proj = Eigen::VectorXd::Zero(n);
    if (p > 1) {
        Eigen::MatrixXd x_minus(n, p - 1);
        Eigen::Index out = 0;
        for (Eigen::Index k = 0; k < p; ++k) {
            if (k != stat.j) {
                x_minus.col(out++) = design.values.col(k);
            }
        }
        const Eigen::MatrixXd gram = x_minus.transpose() * x_minus;
        proj = x_minus * gram.ldlt().solve(stat.xty_minus_j);
    }

    const double budget = stat.y_norm_sq - proj.squaredNorm();
    if (budget < -1e-10) {
        throw NegativeBudgetError("negative residual-norm budget: " +
                                  std::to_string(budget));
    }
    const double rho = std::sqrt(std::max(0.0, budget));
    if (rho == 0.0) {
        return proj;
    }
    auto eng = make_engine(seed);
    const Eigen::VectorXd u_j = design.residual_direction(stat.j);
    return proj + rho * detail::draw_minus_j_complement_unit(design, u_j, eng);
}

// Cached per-feature sampler for the Monte Carlo loops: P_{\j} y and the
// budget are fixed by G_j, so replicates only redraw the sphere component.
struct ConditionalSampler {
    const DesignMatrix* design = nullptr;
    Eigen::VectorXd proj;
    Eigen::VectorXd u_j;
    double rho = 0.0;

    Eigen::VectorXd draw(std::mt19937_64& eng) const {
        if (rho == 0.0) {
            return proj;
        }
        return proj + rho * detail::draw_minus_j_complement_unit(*design, u_j, eng);
    }
};

inline ConditionalSampler make_conditional_sampler(const DesignMatrix& design,
                                                   const Eigen::VectorXd& y,
                                                   Eigen::Index j) {
    ConditionalSampler sampler;
    sampler.design = &design;
    sampler.u_j = design.residual_direction(j);
    const Eigen::VectorXd proj_full = design.svd.u * (design.svd.u.transpose() * y);
    sampler.proj = proj_full - sampler.u_j * sampler.u_j.dot(y);
    sampler.rho = std::sqrt(std::max(0.0, y.squaredNorm() - sampler.proj.squaredNorm()));
    return sampler;
}

namespace detail {

inline bool scaled_ge(double t, double w, double threshold) {
    if (!std::isfinite(threshold)) {
        return false;
    }
    if (std::isinf(t)) {
        return w > 0.0;
    }
    return t * w >= threshold;
}

// One replicate's contribution to phi_j: the estimated false-discovery mass
// of rejecting j at scaled threshold minus the mass its negative mirror
// would contribute. Both fractions are 0 when nothing falls below -T'.
inline double phi_term(const Eigen::VectorXd& w, Eigen::Index j, double t,
                       double threshold, int c) {
    if (!std::isfinite(threshold)) {
        return 0.0;
    }
    int neg = 0;
    for (Eigen::Index l = 0; l < w.size(); ++l) {
        if (w[l] <= -threshold) {
            ++neg;
        }
    }
    double first = 0.0;
    if (scaled_ge(t, w[j], threshold)) {
        first = (c + neg) > 0 ? 1.0 / (c + neg)
                              : std::numeric_limits<double>::infinity();
    }
    double second = 0.0;
    if (w[j] <= -threshold) {
        second = 1.0 / neg; // neg >= 1 since w[j] itself qualifies
    }
    return first - second;
}

} // namespace detail

// Monte Carlo estimate of phi_j(t; G_j): resample y' ~ y | G_j, rerun the full
// OATK procedure (including lambda selection) at level beta on (X, y'), and
// average the replicate terms.
inline double phi_j(const DesignMatrix& design, const Eigen::VectorXd& y,
                    Eigen::Index j, double t, const CalibrationConfig& cfg,
                    std::uint64_t seed) {
    if (cfg.mc_replicates < 1) {
        throw ConfigError("mc_replicates must be >= 1");
    }
    if (!(cfg.beta_level > 0.0 && cfg.beta_level < 1.0)) {
        throw ConfigError("beta_level must be set in (0, 1)");
    }

    const ConditionalSampler sampler = make_conditional_sampler(design, y, j);
    OatkOptions opts;
    opts.alpha = cfg.beta_level;
    opts.offset_c = cfg.c;

    double total = 0.0;
    for (int rep = 0; rep < cfg.mc_replicates; ++rep) {
        auto eng = make_engine(seed, {static_cast<std::uint64_t>(rep), 0});
        const Eigen::VectorXd y_prime = sampler.draw(eng);
        opts.seed = substream(seed, {static_cast<std::uint64_t>(rep), 1});
        const OatkRun run = run_oatk(design, y_prime, opts);
        total += detail::phi_term(run.w.w, j, t, run.selection.threshold, cfg.c);
    }
    return total / cfg.mc_replicates;
}

// Candidate restriction for the calibration step: features with a small OLS
// t-test p-value confirmed by BH at 4*alpha, a large |W|, or already in the
// base rejection set.
inline std::vector<int> fast_candidate_set(const DesignMatrix& design,
                                           const Eigen::VectorXd& y, double alpha,
                                           const WVector& w,
                                           const SelectionResult& base) {
    const Eigen::Index p = design.p();
    const Eigen::VectorXd pvals = ols_t_pvalues(design, y);
    const auto bh = bh_stepup(pvals, std::min(4.0 * alpha, 0.999));

    std::set<int> candidates;
    int overlap = 0;
    for (int j : bh.first) {
        if (pvals[j] <= alpha / 2.0) {
            candidates.insert(j);
            ++overlap;
        }
    }

    std::vector<double> sorted_abs(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        sorted_abs[j] = std::abs(w.w[j]);
    }
    std::sort(sorted_abs.begin(), sorted_abs.end());
    const double order_cut = overlap < p
                                 ? sorted_abs[p - overlap - 1]
                                 : -std::numeric_limits<double>::infinity();
    const double cut = std::min(order_cut, base.threshold);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (std::abs(w.w[j]) >= cut) {
            candidates.insert(static_cast<int>(j));
        }
    }
    candidates.insert(base.rejected.begin(), base.rejected.end());
    return std::vector<int>(candidates.begin(), candidates.end());
}

// Compound e-values from conditionally calibrated OATK. Only features with
// W_j > 0 can earn a nonzero e-value; phi_j is evaluated at the single point
// t = T_beta / W_j, which decides between e_j = p / (c + #{W <= -T_beta})
// and e_j = 0.
inline EValueVector calibrated_evalues(const DesignMatrix& design,
                                       const Eigen::VectorXd& y, double alpha,
                                       CalibrationConfig cfg, std::uint64_t seed) {
    if (std::isnan(cfg.beta_level)) {
        cfg.beta_level = alpha;
    }
    const Eigen::Index p = design.p();

    OatkOptions base_opts;
    base_opts.alpha = cfg.beta_level;
    base_opts.offset_c = cfg.c;
    base_opts.seed = substream(seed, {0});
    const OatkRun base = run_oatk(design, y, base_opts);
    const double t_beta = base.selection.threshold;

    int neg = 0;
    for (Eigen::Index l = 0; l < p; ++l) {
        if (base.w.w[l] <= -t_beta) {
            ++neg;
        }
    }
    const double e_unit = (cfg.c + neg) > 0
                              ? static_cast<double>(p) / (cfg.c + neg)
                              : std::numeric_limits<double>::infinity();

    std::vector<int> candidates;
    if (cfg.candidate_rule == CalibrationConfig::CandidateRule::full) {
        candidates.resize(p);
        std::iota(candidates.begin(), candidates.end(), 0);
    } else {
        const SelectionResult at_alpha =
            knockoff_threshold(base.w, alpha, cfg.c);
        candidates = fast_candidate_set(design, y, alpha, base.w, at_alpha);
    }

    EValueVector out;
    out.e = Eigen::VectorXd::Zero(p);
    out.beta_level = cfg.beta_level;
    out.c = cfg.c;
    for (int j : candidates) {
        if (!(base.w.w[j] > 0.0)) {
            continue;
        }
        const double t = t_beta / base.w.w[j];
        const double phi =
            phi_j(design, y, j, t, cfg, substream(seed, {static_cast<std::uint64_t>(j) + 1}));
        if (phi <= 0.0) {
            out.e[j] = e_unit;
        }
    }
    return out;
}

struct CalibratedRun {
    EValueVector evalues;
    SelectionResult selection;
};

inline CalibratedRun run_oatk_calibrated(const DesignMatrix& design,
                                         const Eigen::VectorXd& y, double alpha,
                                         const CalibrationConfig& cfg,
                                         std::uint64_t seed) {
    CalibratedRun run;
    run.evalues = calibrated_evalues(design, y, alpha, cfg, seed);
    run.selection = ebh(run.evalues.e, alpha);
    run.selection.method = "oatk_calibrated";
    return run;
}

} // namespace oatk

#endif
