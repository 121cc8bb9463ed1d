#ifndef OATK_SELECTION_HPP
#define OATK_SELECTION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "oatk/core_linalg.hpp"
#include "oatk/errors.hpp"
#include "oatk/rng.hpp"
#include "oatk/statistics.hpp"

namespace oatk {

struct SelectionResult {
    std::vector<int> rejected; // sorted, 0-based
    double threshold = std::numeric_limits<double>::infinity();
    double alpha = 0.0;
    std::string method;
    int n_features = 0;
};

struct DerandomizedResult {
    Eigen::VectorXd frequencies; // Pi_j, multiples of 1/M
    double eta = 0.5;
    int m = 0;
    std::vector<int> rejected;
};

// T_alpha = min{ t in {|W_j| : W_j != 0} :
//                (c + #{W_j <= -t}) / (1 v #{W_j >= t}) <= alpha },
// with T_alpha = +inf (empty selection) when no candidate qualifies.
inline SelectionResult knockoff_threshold(const WVector& w, double alpha, int c = 0) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw Error("alpha must be in (0,1)");
    }
    const Eigen::Index p = w.w.size();

    std::vector<double> sorted(w.w.data(), w.w.data() + p);
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> candidates;
    candidates.reserve(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (w.w[j] != 0.0) {
            candidates.push_back(std::abs(w.w[j]));
        }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());

    double threshold = std::numeric_limits<double>::infinity();
    for (double t : candidates) {
        // #{W <= -t} and #{W >= t} from the sorted array
        const auto neg_end =
            std::upper_bound(sorted.begin(), sorted.end(), -t) - sorted.begin();
        const auto pos_begin =
            std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
        const double num = c + static_cast<double>(neg_end);
        const double den = std::max<std::ptrdiff_t>(1, sorted.size() - pos_begin);
        if (num / den <= alpha) {
            threshold = t;
            break;
        }
    }

    SelectionResult result;
    result.threshold = threshold;
    result.alpha = alpha;
    result.method = "knockoff";
    result.n_features = static_cast<int>(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (w.w[j] >= threshold) {
            result.rejected.push_back(static_cast<int>(j));
        }
    }
    return result;
}

// SeqStep+ on multi-knockoff p-values, ordered by ascending magnitude M_j.
inline SelectionResult seqstep_plus(const PValueVector& pvals, double alpha,
                                    double gamma, int c = 0) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw Error("alpha must be in (0,1)");
    }
    if (!(gamma >= alpha / (alpha + 1.0) - 1e-12 && gamma <= 0.5 + 1e-12)) {
        throw GammaOutOfRangeError("gamma must lie in [alpha/(alpha+1), 1/2]");
    }
    const Eigen::Index p = pvals.p_vals.size();

    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (pvals.magnitudes[a] != pvals.magnitudes[b]) {
            return pvals.magnitudes[a] < pvals.magnitudes[b];
        }
        return a < b;
    });

    // suffix counts of p > gamma and p <= gamma over positions k..p-1
    std::vector<int> gt(p + 1, 0), le(p + 1, 0);
    for (Eigen::Index k = p; k-- > 0;) {
        const bool small = pvals.p_vals[order[k]] <= gamma;
        gt[k] = gt[k + 1] + (small ? 0 : 1);
        le[k] = le[k + 1] + (small ? 1 : 0);
    }

    const double bound = (1.0 - gamma) / gamma * alpha;
    Eigen::Index khat = -1;
    for (Eigen::Index k = 0; k < p; ++k) {
        const double ratio = (c + static_cast<double>(gt[k])) / std::max(1, le[k]);
        if (ratio <= bound) {
            khat = k;
            break;
        }
    }

    SelectionResult result;
    result.alpha = alpha;
    result.method = "seqstep+";
    result.n_features = static_cast<int>(p);
    if (khat < 0) {
        result.threshold = std::numeric_limits<double>::infinity();
        return result;
    }
    result.threshold = static_cast<double>(khat + 1); // 1-based cut position
    for (Eigen::Index k = khat; k < p; ++k) {
        if (pvals.p_vals[order[k]] <= gamma) {
            result.rejected.push_back(order[k]);
        }
    }
    std::sort(result.rejected.begin(), result.rejected.end());
    return result;
}

// eBH: sort e-values descending and keep the largest k with k e_(k) / p >= 1/alpha.
inline SelectionResult ebh(const Eigen::VectorXd& evalues, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw Error("alpha must be in (0,1)");
    }
    const Eigen::Index p = evalues.size();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!(evalues[j] >= 0.0)) {
            throw Error("e-values must be non-negative");
        }
    }

    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (evalues[a] != evalues[b]) {
            return evalues[a] > evalues[b];
        }
        return a < b;
    });

    Eigen::Index khat = 0;
    for (Eigen::Index k = p; k >= 1; --k) {
        if (k * evalues[order[k - 1]] / p >= 1.0 / alpha) {
            khat = k;
            break;
        }
    }

    SelectionResult result;
    result.alpha = alpha;
    result.method = "ebh";
    result.n_features = static_cast<int>(p);
    result.threshold = static_cast<double>(khat);
    result.rejected.assign(order.begin(), order.begin() + khat);
    std::sort(result.rejected.begin(), result.rejected.end());
    return result;
}

inline double two_sided_t_pvalue(double t, double df) {
    if (!std::isfinite(t)) {
        return std::isnan(t) ? 1.0 : 0.0;
    }
    boost::math::students_t_distribution<double> dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

// Two-sided OLS t-test p-values with n - p degrees of freedom.
inline Eigen::VectorXd ols_t_pvalues(const DesignMatrix& design,
                                     const Eigen::VectorXd& y) {
    const Eigen::Index n = design.n();
    const Eigen::Index p = design.p();
    if (n <= p) {
        throw DimensionError("t-statistics require n > p");
    }
    if (y.size() != n) {
        throw DimensionError("response length does not match design rows");
    }

    const Eigen::VectorXd uty = design.svd.u.transpose() * y;
    const Eigen::VectorXd beta = design.svd.v * uty.cwiseQuotient(design.svd.d);
    const double sse = (y - design.values * beta).squaredNorm();
    const double df = static_cast<double>(n - p);
    const double sigma_hat = std::sqrt(sse / df);

    Eigen::VectorXd pvals(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double se = sigma_hat * std::sqrt(design.sigma_inv_diag[j]);
        if (se == 0.0) {
            pvals[j] = beta[j] == 0.0 ? 1.0 : 0.0;
        } else {
            pvals[j] = two_sided_t_pvalue(beta[j] / se, df);
        }
    }
    return pvals;
}

// Step-up BH at level alpha; returns the rejected indices and the p-value
// cutoff (0 when nothing is rejected).
inline std::pair<std::vector<int>, double> bh_stepup(const Eigen::VectorXd& pvals,
                                                     double alpha) {
    const Eigen::Index p = pvals.size();
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return pvals[a] < pvals[b]; });

    Eigen::Index khat = 0;
    for (Eigen::Index k = p; k >= 1; --k) {
        if (pvals[order[k - 1]] <= alpha * k / p) {
            khat = k;
            break;
        }
    }
    std::pair<std::vector<int>, double> out;
    out.second = khat > 0 ? pvals[order[khat - 1]] : 0.0;
    if (khat > 0) {
        for (Eigen::Index j = 0; j < p; ++j) {
            if (pvals[j] <= out.second) {
                out.first.push_back(static_cast<int>(j));
            }
        }
    }
    return out;
}

inline SelectionResult bh_baseline(const DesignMatrix& design,
                                   const Eigen::VectorXd& y, double alpha) {
    const Eigen::VectorXd pvals = ols_t_pvalues(design, y);
    auto [rejected, cutoff] = bh_stepup(pvals, alpha);

    SelectionResult result;
    result.rejected = std::move(rejected);
    result.threshold = cutoff;
    result.alpha = alpha;
    result.method = "bh";
    result.n_features = static_cast<int>(design.p());
    return result;
}

// Aggregates rejection frequencies over M independent reruns of `run`.
// Each replicate receives its own derived seed, so results do not depend on
// evaluation order.
inline DerandomizedResult derandomize(
    const std::function<SelectionResult(int, std::uint64_t)>& run, int n_features,
    int m, double eta, std::uint64_t seed) {
    if (m < 1) {
        throw Error("derandomization needs M >= 1");
    }
    if (!(eta > 0.0 && eta <= 1.0)) {
        throw Error("eta must be in (0, 1]");
    }

    DerandomizedResult result;
    result.eta = eta;
    result.m = m;
    result.frequencies = Eigen::VectorXd::Zero(n_features);
    for (int rep = 0; rep < m; ++rep) {
        const SelectionResult sel = run(rep, substream(seed, {static_cast<std::uint64_t>(rep)}));
        for (int j : sel.rejected) {
            result.frequencies[j] += 1.0;
        }
    }
    result.frequencies /= static_cast<double>(m);
    for (int j = 0; j < n_features; ++j) {
        if (result.frequencies[j] >= eta) {
            result.rejected.push_back(j);
        }
    }
    return result;
}

} // namespace oatk

#endif
