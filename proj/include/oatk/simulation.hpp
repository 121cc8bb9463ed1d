#ifndef OATK_SIMULATION_HPP
#define OATK_SIMULATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "oatk/calibration.hpp"
#include "oatk/core_linalg.hpp"
#include "oatk/errors.hpp"
#include "oatk/parallel.hpp"
#include "oatk/pipeline.hpp"
#include "oatk/rng.hpp"
#include "oatk/selection.hpp"

namespace oatk {

enum class DesignModel { gaussian, markov, external };
enum class GaussianStructure { power_decay, const_pos, const_neg };

inline std::string to_string(DesignModel model) {
    switch (model) {
        case DesignModel::gaussian: return "gaussian";
        case DesignModel::markov: return "markov";
        case DesignModel::external: return "external";
    }
    return "unknown";
}

inline std::string to_string(GaussianStructure structure) {
    switch (structure) {
        case GaussianStructure::power_decay: return "power_decay";
        case GaussianStructure::const_pos: return "const_pos";
        case GaussianStructure::const_neg: return "const_neg";
    }
    return "unknown";
}

struct SimulationConfig {
    DesignModel design = DesignModel::gaussian;
    GaussianStructure structure = GaussianStructure::power_decay;
    double rho = 0.4;
    int n = 1000;
    int p = 300;
    int p1 = 30;
    double amplitude = 5.0;
    double alpha = 0.1;
    int replicates = 100;
    std::uint64_t seed = 0;
    std::vector<std::string> methods = {"oatk", "bh"};

    // method knobs
    int offset_c = 0;
    int derandomize_m = 30;
    double eta = 0.5;
    int m_copies = 10;
    double gamma = 0.5;
    CalibrationConfig calibration;

    std::shared_ptr<const DesignMatrix> external_design; // design = external
    int threads = 1;
};

struct TrialResult {
    double fdp = 0.0;
    double tdp = 0.0;
    std::vector<int> rejected;
    std::vector<int> truth;
};

inline TrialResult score_selection(const std::vector<int>& rejected,
                                   const std::vector<int>& truth) {
    TrialResult trial;
    trial.rejected = rejected;
    trial.truth = truth;
    int false_pos = 0;
    int true_pos = 0;
    for (int j : rejected) {
        if (std::binary_search(truth.begin(), truth.end(), j)) {
            ++true_pos;
        } else {
            ++false_pos;
        }
    }
    trial.fdp = rejected.empty()
                    ? 0.0
                    : static_cast<double>(false_pos) / rejected.size();
    trial.tdp = truth.empty() ? 0.0 : static_cast<double>(true_pos) / truth.size();
    return trial;
}

inline Eigen::MatrixXd gaussian_covariance(GaussianStructure structure, double rho,
                                           int p) {
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw SingularCovarianceError("rho must lie in [0, 1)");
    }
    Eigen::MatrixXd cov(p, p);
    switch (structure) {
        case GaussianStructure::power_decay:
            for (int i = 0; i < p; ++i) {
                for (int j = 0; j < p; ++j) {
                    cov(i, j) = std::pow(rho, std::abs(i - j));
                }
            }
            break;
        case GaussianStructure::const_pos:
            cov.setConstant(rho);
            cov.diagonal().setOnes();
            break;
        case GaussianStructure::const_neg: {
            Eigen::MatrixXd q = Eigen::MatrixXd::Constant(p, p, rho);
            q.diagonal().setOnes();
            const Eigen::MatrixXd inv = q.inverse();
            cov = 0.5 * (inv + inv.transpose()); // enforce symmetry for Cholesky
            break;
        }
    }
    return cov;
}

inline Eigen::MatrixXd gen_gaussian_raw(GaussianStructure structure, double rho,
                                        int n, int p, std::uint64_t seed) {
    const Eigen::MatrixXd cov = gaussian_covariance(structure, rho, p);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw SingularCovarianceError("covariance is not positive definite");
    }
    auto eng = make_engine(seed);
    const Eigen::MatrixXd draws = gaussian_matrix(eng, n, p);
    return draws * llt.matrixL().transpose();
}

inline DesignMatrix gen_gaussian_design(GaussianStructure structure, double rho,
                                        int n, int p, std::uint64_t seed) {
    return ingest_design(gen_gaussian_raw(structure, rho, n, p, seed));
}

// Rows are independent 3-state Markov chains over columns; the sojourn
// parameters gamma_j ~ Unif(0, 0.5) are shared across rows. Staying has
// probability 1/3 + 2 gamma_j / 3 and each switch (1 - gamma_j) / 3.
inline Eigen::MatrixXd gen_markov_raw(int n, int p, std::uint64_t seed,
                                      std::vector<double>* gamma_out = nullptr) {
    auto eng = make_engine(seed);
    std::uniform_real_distribution<double> unif(0.0, 0.5);
    std::vector<double> gamma(std::max(0, p - 1));
    for (auto& g : gamma) {
        g = unif(eng);
    }
    if (gamma_out != nullptr) {
        *gamma_out = gamma;
    }

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Eigen::MatrixXd raw(n, p);
    for (int i = 0; i < n; ++i) {
        int state = std::min(static_cast<int>(u01(eng) * 3.0), 2);
        raw(i, 0) = state;
        for (int j = 1; j < p; ++j) {
            const double stay = 1.0 / 3.0 + (2.0 / 3.0) * gamma[j - 1];
            const double roll = u01(eng);
            if (roll >= stay) {
                // jump to one of the two other states uniformly
                const int other = roll >= stay + 0.5 * (1.0 - stay) ? 2 : 1;
                state = (state + other) % 3;
            }
            raw(i, j) = state;
        }
    }
    return raw;
}

inline DesignMatrix gen_markov_design(int n, int p, std::uint64_t seed) {
    return ingest_design(gen_markov_raw(n, p, seed));
}

struct Response {
    Eigen::VectorXd y;
    std::vector<int> truth; // sorted non-null indices
    Eigen::VectorXd beta;
};

// beta has p1 entries of +-amplitude on a uniformly drawn support;
// y = X beta + z with unit-variance Gaussian noise.
inline Response gen_response(const DesignMatrix& design, int p1, double amplitude,
                             std::uint64_t seed) {
    const Eigen::Index p = design.p();
    if (p1 < 0 || p1 > p) {
        throw DimensionError("p1 must lie in [0, p]");
    }
    auto eng = make_engine(seed);

    std::vector<int> indices(p);
    std::iota(indices.begin(), indices.end(), 0);
    for (int k = 0; k < p1; ++k) {
        std::uniform_int_distribution<int> pick(k, static_cast<int>(p) - 1);
        std::swap(indices[k], indices[pick(eng)]);
    }

    Response resp;
    resp.truth.assign(indices.begin(), indices.begin() + p1);
    std::sort(resp.truth.begin(), resp.truth.end());

    resp.beta = Eigen::VectorXd::Zero(p);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int k = 0; k < p1; ++k) {
        resp.beta[indices[k]] = coin(eng) ? amplitude : -amplitude;
    }

    resp.y = design.values * resp.beta + gaussian_vector(eng, design.n());
    return resp;
}

// Gaussian-mirror statistics with OLS: per feature, a scaled Gaussian mirror
// z_j is appended to the design and W_j contrasts the coefficients of x_j
// and z_j, which equals |b+ + b-| - |b+ - b-| in the mirrored regression of
// y on [x_j + z_j, x_j - z_j, X_{\j}].
inline WVector gm_statistics(const DesignMatrix& design,
                             const Eigen::VectorXd& y, std::uint64_t seed) {
    const Eigen::Index n = design.n();
    const Eigen::Index p = design.p();
    if (n <= p + 1) {
        throw DimensionError("GM baseline requires n > p + 1");
    }
    if (y.size() != n) {
        throw DimensionError("response length does not match design rows");
    }

    const Eigen::MatrixXd sigma_inv =
        design.svd.v * design.svd.d.array().square().inverse().matrix().asDiagonal() *
        design.svd.v.transpose();
    const Eigen::VectorXd xty = design.values.transpose() * y;
    const Eigen::VectorXd beta_ols = sigma_inv * xty;

    WVector w;
    w.w.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        auto eng = make_engine(seed, {static_cast<std::uint64_t>(j)});
        const Eigen::VectorXd g = gaussian_vector(eng, n);

        // c_j^2 = x_j^T A x_j / g^T A g with A the annihilator of X_{\j};
        // x_j^T A x_j is sigma_j^2 from the cached geometry.
        const Eigen::VectorXd utg = design.svd.u.transpose() * g;
        const Eigen::VectorXd u_j = design.residual_direction(j);
        const double g_a_g =
            g.squaredNorm() - utg.squaredNorm() + std::pow(u_j.dot(g), 2);
        if (g_a_g <= 0.0) {
            w.w[j] = 0.0;
            continue;
        }
        const Eigen::VectorXd z = std::sqrt(design.sigma_sq[j] / g_a_g) * g;

        // bordered normal equations for the regression of y on [X, z]
        const Eigen::VectorXd xtz = design.values.transpose() * z;
        const Eigen::VectorXd sigma_inv_xtz = sigma_inv * xtz;
        const double schur = z.squaredNorm() - xtz.dot(sigma_inv_xtz);
        if (schur <= 0.0) {
            w.w[j] = 0.0;
            continue;
        }
        const double mirror_coef = (z.dot(y) - sigma_inv_xtz.dot(xty)) / schur;
        const double own_coef = beta_ols[j] - sigma_inv_xtz[j] * mirror_coef;
        // own_coef = b+ + b- and mirror_coef = b+ - b- in the mirrored fit
        w.w[j] = std::abs(own_coef) - std::abs(mirror_coef);
    }
    return w;
}

inline SelectionResult gm_baseline(const DesignMatrix& design,
                                   const Eigen::VectorXd& y, double alpha,
                                   std::uint64_t seed) {
    SelectionResult result =
        knockoff_threshold(gm_statistics(design, y, seed), alpha, 0);
    result.method = "gm";
    return result;
}

struct ExperimentRow {
    std::string design;
    std::string structure;
    double rho = 0.0;
    int n = 0;
    int p = 0;
    int p1 = 0;
    double amplitude = 0.0;
    double alpha = 0.0;
    std::string method;
    int replicate = 0;
    double fdp = std::numeric_limits<double>::quiet_NaN();
    double tdp = std::numeric_limits<double>::quiet_NaN();
    int n_rejected = -1;
    std::uint64_t seed = 0;
};

struct MethodSummary {
    std::string method;
    double fdr = 0.0;
    double power = 0.0;
    int failures = 0;
};

struct ExperimentTable {
    std::vector<ExperimentRow> rows;

    std::vector<MethodSummary> summaries() const {
        std::vector<MethodSummary> out;
        std::vector<int> used;
        for (const auto& row : rows) {
            auto it = std::find_if(out.begin(), out.end(), [&](const MethodSummary& s) {
                return s.method == row.method;
            });
            if (it == out.end()) {
                out.push_back({row.method, 0.0, 0.0, 0});
                used.push_back(0);
                it = out.end() - 1;
            }
            const auto idx = it - out.begin();
            if (std::isnan(row.fdp)) {
                ++it->failures;
            } else {
                it->fdr += row.fdp;
                it->power += row.tdp;
                ++used[idx];
            }
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (used[i] > 0) {
                out[i].fdr /= used[i];
                out[i].power /= used[i];
            }
        }
        return out;
    }
};

namespace detail {

inline int canonical_method_id(const std::string& name) {
    if (name == "oatk") return 0;
    if (name == "oatk_derand") return 1;
    if (name == "oatk_multibit") return 2;
    if (name == "oatk_calibrated") return 3;
    if (name == "bh") return 4;
    if (name == "gm") return 5;
    return -1;
}

} // namespace detail

inline std::string canonical_method_name(const std::string& raw) {
    std::string name = raw;
    if (name == "doatk" || name == "oatk_derandomized") {
        name = "oatk_derand";
    }
    if (name == "coatk" || name == "calibrated") {
        name = "oatk_calibrated";
    }
    if (name == "multibit") {
        name = "oatk_multibit";
    }
    if (detail::canonical_method_id(name) < 0) {
        throw ConfigError("unknown method: " + raw);
    }
    return name;
}

struct ReplicateData {
    DesignMatrix design;       // unused when shared points at an external design
    const DesignMatrix* active = nullptr;
    Response response;
};

inline ReplicateData gen_replicate_data(const SimulationConfig& cfg, int rep) {
    ReplicateData data;
    const std::uint64_t design_seed = substream(cfg.seed, {static_cast<std::uint64_t>(rep), 0});
    const std::uint64_t response_seed = substream(cfg.seed, {static_cast<std::uint64_t>(rep), 1});
    switch (cfg.design) {
        case DesignModel::gaussian:
            data.design = gen_gaussian_design(cfg.structure, cfg.rho, cfg.n, cfg.p,
                                              design_seed);
            data.active = &data.design;
            break;
        case DesignModel::markov:
            data.design = gen_markov_design(cfg.n, cfg.p, design_seed);
            data.active = &data.design;
            break;
        case DesignModel::external:
            if (!cfg.external_design) {
                throw ConfigError("external design requested but none provided");
            }
            data.active = cfg.external_design.get();
            break;
    }
    data.response = gen_response(*data.active, cfg.p1, cfg.amplitude, response_seed);
    return data;
}

inline std::vector<int> run_method_on(const SimulationConfig& cfg,
                                      const std::string& method,
                                      const DesignMatrix& design,
                                      const Eigen::VectorXd& y,
                                      std::uint64_t method_seed) {
    OatkOptions opts;
    opts.alpha = cfg.alpha;
    opts.offset_c = cfg.offset_c;
    opts.seed = method_seed;

    if (method == "oatk") {
        return run_oatk(design, y, opts).selection.rejected;
    }
    if (method == "oatk_derand") {
        return run_oatk_derandomized(design, y, opts, cfg.derandomize_m, cfg.eta)
            .rejected;
    }
    if (method == "oatk_multibit") {
        return run_oatk_multibit(design, y, opts, cfg.m_copies, cfg.gamma)
            .selection.rejected;
    }
    if (method == "oatk_calibrated") {
        return run_oatk_calibrated(design, y, cfg.alpha, cfg.calibration, method_seed)
            .selection.rejected;
    }
    if (method == "bh") {
        return bh_baseline(design, y, cfg.alpha).rejected;
    }
    if (method == "gm") {
        return gm_baseline(design, y, cfg.alpha, method_seed).rejected;
    }
    throw ConfigError("unknown method: " + method);
}

// Runs every method on identical per-replicate data. A method failure records
// NaN cells for that replicate instead of aborting the sweep. Replicates are
// independent and may run on several threads; the RNG tree keys every draw by
// (seed, replicate, role), so the output is schedule-invariant.
inline ExperimentTable run_experiment(const SimulationConfig& cfg) {
    std::vector<std::string> methods;
    methods.reserve(cfg.methods.size());
    for (const auto& raw : cfg.methods) {
        methods.push_back(canonical_method_name(raw));
    }
    if (methods.empty()) {
        throw ConfigError("no methods requested");
    }
    if (cfg.replicates < 1) {
        throw ConfigError("replicates must be >= 1");
    }

    ExperimentTable table;
    table.rows.resize(static_cast<std::size_t>(cfg.replicates) * methods.size());

    parallel_for(0, cfg.replicates, cfg.threads, [&](long rep) {
        const ReplicateData data = gen_replicate_data(cfg, static_cast<int>(rep));
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            ExperimentRow row;
            row.design = to_string(cfg.design);
            row.structure = cfg.design == DesignModel::gaussian
                                ? to_string(cfg.structure)
                                : "na";
            row.rho = cfg.design == DesignModel::gaussian ? cfg.rho : 0.0;
            row.n = static_cast<int>(data.active->n());
            row.p = static_cast<int>(data.active->p());
            row.p1 = cfg.p1;
            row.amplitude = cfg.amplitude;
            row.alpha = cfg.alpha;
            row.method = methods[mi];
            row.replicate = static_cast<int>(rep);
            row.seed = cfg.seed;

            const std::uint64_t method_seed = substream(
                cfg.seed, {static_cast<std::uint64_t>(rep),
                           2 + static_cast<std::uint64_t>(
                                   detail::canonical_method_id(methods[mi]))});
            try {
                const auto rejected = run_method_on(cfg, methods[mi], *data.active,
                                                    data.response.y, method_seed);
                const TrialResult trial = score_selection(rejected, data.response.truth);
                row.fdp = trial.fdp;
                row.tdp = trial.tdp;
                row.n_rejected = static_cast<int>(rejected.size());
            } catch (const Error&) {
                // leave NaN cells in place
            }
            table.rows[static_cast<std::size_t>(rep) * methods.size() + mi] = row;
        }
    });
    return table;
}

} // namespace oatk

#endif
