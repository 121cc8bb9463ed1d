// Acceptance suite: end-to-end checks at the scales and tolerances the
// library commits to. Each test prints one [ACCEPT] line so the run can be
// audited from the log alone.

#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oatk/oatk.hpp"
#include "oracles.hpp"

using namespace oatk;

namespace {

class Timer {
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();

public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start_)
            .count();
    }
};

void report(int criterion, const std::string& name, bool pass,
            const std::string& detail) {
    std::printf("[ACCEPT] %02d %-26s %s  %s\n", criterion, name.c_str(),
                pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

DesignMatrix random_design(int n, int p, unsigned seed) {
    return ingest_design(oracles::random_matrix(n, p, seed));
}

std::vector<double> column_of(const ExperimentTable& table,
                              const std::string& method, bool tdp) {
    std::vector<double> out;
    for (const auto& row : table.rows) {
        if (row.method == method && !std::isnan(row.fdp)) {
            out.push_back(tdp ? row.tdp : row.fdp);
        }
    }
    return out;
}

double mean_of(const std::vector<double>& xs) {
    double total = 0.0;
    for (double x : xs) total += x;
    return total / static_cast<double>(xs.size());
}

} // namespace

TEST(Acceptance, C01_KnockoffConstraints) {
    Timer timer;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int p = 3 + (trial * 5) % 18;          // <= 20
        const int n = p + 10 + (trial * 7) % (90 - p); // <= 100
        const DesignMatrix design = random_design(n, p, 1000 + trial);
        for (double scale : {0.0, 0.5, 1.0, 1.9}) {
            KnockoffPlan plan = default_plan(design, 0.0, 5000 + trial);
            plan.s = scale * plan.geometry.sigma_sq;
            for (int j = 0; j < p; ++j) {
                const KnockoffColumn kc = generate_knockoff_column(design, plan, j);
                worst = std::max(worst, verify_conditions(design, kc, plan.s[j]).max());
            }
        }
    }
    const double elapsed = timer.seconds();
    const bool pass = worst < 1e-8 && elapsed < 10.0;
    report(1, "knockoff-constraints", pass,
           "max residual " + format_double(worst) + ", " +
               format_double(elapsed) + " s");
    EXPECT_LT(worst, 1e-8);
    EXPECT_LT(elapsed, 10.0);
}

TEST(Acceptance, C02_FastPathOracle) {
    Timer timer;
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int p = 5 + (trial * 3) % 16;            // <= 20
        const int n = p + 20 + (trial * 11) % (80 - p); // <= 100
        const DesignMatrix design = random_design(n, p, 2000 + trial);
        const Eigen::VectorXd y = oracles::random_vector(n, 3000 + trial);

        Eigen::MatrixXd residuals(n, p);
        for (int j = 0; j < p; ++j) {
            residuals.col(j) =
                generate_residual(design, 1,
                                  substream(4000 + trial, {static_cast<std::uint64_t>(j)}))
                    .r.col(0);
        }

        for (double lambda : {0.0, 0.3, 3.0}) {
            const RidgeFit fit = ridge_path(design, y, {lambda})[0];
            const ColumnGeometry geom = column_geometry(design, lambda);
            const Eigen::VectorXd s = geom.sigma_sq;
            const CoefficientPair pair =
                knockoff_coefficients(design, y, fit, geom, residuals, s);
            for (int j = 0; j < p; ++j) {
                const double rho = std::sqrt(
                    std::max(0.0, 2.0 * s[j] - s[j] * s[j] / geom.sigma_sq[j]));
                const Eigen::VectorXd x_tilde =
                    design.values.col(j) -
                    (s[j] / geom.sigma_sq[j]) * geom.sigma_sq[j] * design.dual.col(j) +
                    rho * residuals.col(j);
                const double direct = oracles::materialized_knockoff_coefficient(
                    design.values, x_tilde, y, j, lambda);
                worst = std::max(worst, std::abs(pair.beta_tilde[j] - direct));
            }
        }
    }
    const double elapsed = timer.seconds();
    const bool pass = worst < 1e-8 && elapsed < 30.0;
    report(2, "fast-path-oracle", pass,
           "max |fast - direct| " + format_double(worst) + ", " +
               format_double(elapsed) + " s");
    EXPECT_LT(worst, 1e-8);
    EXPECT_LT(elapsed, 30.0);
}

TEST(Acceptance, C03_LoocvIdentity) {
    const std::vector<double> grid = {0.0, 0.05, 0.5, 2.0, 20.0, 200.0};
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int p = 3 + trial % 6;
        const int n = p + 15 + (trial * 3) % (35 - p); // <= 50
        const DesignMatrix design = random_design(n, p, 6000 + trial);
        const Eigen::VectorXd y = oracles::random_vector(n, 7000 + trial);
        const auto fits = ridge_path(design, y, grid);
        for (const auto& fit : fits) {
            if (!fit.loocv_defined) continue;
            const double direct =
                oracles::loocv_by_refits(design.values, y, fit.lambda);
            worst = std::max(worst, std::abs(fit.loocv_sse - direct));
        }
    }
    const bool pass = worst < 1e-6;
    report(3, "loocv-identity", pass, "max |closed form - refits| " +
                                          format_double(worst));
    EXPECT_LT(worst, 1e-6);
}

TEST(Acceptance, C04_NullSymmetry) {
    const int n = 200, p = 50, draws = 2000;
    const DesignMatrix design = random_design(n, p, 8421);

    OatkOptions opts;
    opts.lambda_override = 0.0;
    opts.alpha = 0.1;

    Eigen::VectorXi wins = Eigen::VectorXi::Zero(p);
    std::vector<std::vector<double>> hats(p), tildes(p);
    for (int rep = 0; rep < draws; ++rep) {
        const Eigen::VectorXd y = oracles::random_vector(n, 90000 + rep);
        opts.seed = substream(8500, {static_cast<std::uint64_t>(rep)});
        const OatkRun run = run_oatk(design, y, opts);
        for (int j = 0; j < p; ++j) {
            if (run.w.w[j] > 0) ++wins[j];
            hats[j].push_back(run.model.beta_ridge[j]);
            tildes[j].push_back(run.beta_tilde[j]);
        }
    }

    const double band = oracles::binomial_band_halfwidth(draws, 2.5758293);
    int band_failures = 0;
    int ks_failures = 0;
    double worst_freq = 0.5;
    for (int j = 0; j < p; ++j) {
        const double freq = wins[j] / static_cast<double>(draws);
        if (std::abs(freq - 0.5) > std::abs(worst_freq - 0.5)) worst_freq = freq;
        if (std::abs(freq - 0.5) > band) ++band_failures;
        if (!oracles::ks_two_sample_passes(hats[j], tildes[j], 0.01)) ++ks_failures;
    }
    const bool pass = band_failures == 0 && ks_failures == 0;
    report(4, "null-symmetry", pass,
           "band failures " + std::to_string(band_failures) + "/50 (worst freq " +
               format_double(worst_freq) + "), KS failures " +
               std::to_string(ks_failures) + "/50");
    EXPECT_EQ(band_failures, 0);
    EXPECT_EQ(ks_failures, 0);
}

TEST(Acceptance, C05_PValueUniformity) {
    const int n = 60, p = 10, m = 9, draws = 2000;
    const int feature = 3; // all features are null here
    const DesignMatrix design = random_design(n, p, 8601);

    OatkOptions opts;
    opts.lambda_override = 0.0;
    opts.alpha = 0.1;

    std::vector<int> counts(m + 1, 0);
    for (int rep = 0; rep < draws; ++rep) {
        const Eigen::VectorXd y = oracles::random_vector(n, 110000 + rep);
        opts.seed = substream(8700, {static_cast<std::uint64_t>(rep)});
        const MultibitRun run = run_oatk_multibit(design, y, opts, m, 0.5);
        const int bucket =
            static_cast<int>(std::lround(run.pvals.p_vals[feature] * (m + 1))) - 1;
        ASSERT_GE(bucket, 0);
        ASSERT_LE(bucket, m);
        ++counts[bucket];
    }
    const double pvalue =
        oracles::chi_square_gof_pvalue(counts, draws / double(m + 1));
    const bool pass = pvalue > 0.01;
    report(5, "pvalue-uniformity", pass,
           "chi-square GOF p = " + format_double(pvalue));
    EXPECT_GT(pvalue, 0.01);
}

TEST(Acceptance, C06_FdrPowerReproduction) {
    Timer timer;
    bool pass = true;
    std::string detail;
    for (double amplitude : {4.0, 5.0, 6.0}) {
        SimulationConfig cfg;
        cfg.design = DesignModel::gaussian;
        cfg.structure = GaussianStructure::power_decay;
        cfg.rho = 0.4;
        cfg.n = 1000;
        cfg.p = 300;
        cfg.p1 = 30;
        cfg.amplitude = amplitude;
        cfg.alpha = 0.1;
        cfg.replicates = 100;
        cfg.methods = {"oatk", "bh"};
        cfg.seed = 20260 + static_cast<std::uint64_t>(amplitude);

        const ExperimentTable table = run_experiment(cfg);
        double oatk_fdr = 0, oatk_power = 0, bh_power = 0;
        for (const auto& s : table.summaries()) {
            if (s.method == "oatk") {
                oatk_fdr = s.fdr;
                oatk_power = s.power;
            } else if (s.method == "bh") {
                bh_power = s.power;
            }
        }
        detail += "A=" + format_double(amplitude) + ": FDR " +
                  format_double(oatk_fdr) + ", power " + format_double(oatk_power) +
                  " vs BH " + format_double(bh_power) + "; ";
        pass = pass && oatk_fdr <= 0.15 && oatk_power >= bh_power;
        EXPECT_LE(oatk_fdr, 0.15) << "A = " << amplitude;
        EXPECT_GE(oatk_power, bh_power) << "A = " << amplitude;
    }
    detail += format_double(timer.seconds()) + " s";
    report(6, "fdr-power-reproduction", pass, detail);
}

TEST(Acceptance, C07_DerandomizationVariance) {
    Timer timer;
    SimulationConfig cfg;
    cfg.design = DesignModel::gaussian;
    cfg.structure = GaussianStructure::power_decay;
    cfg.rho = 0.4;
    cfg.n = 1000;
    cfg.p = 300;
    cfg.p1 = 30;
    cfg.amplitude = 5.0;
    cfg.alpha = 0.1;
    cfg.replicates = 100;
    cfg.methods = {"oatk", "oatk_derand"};
    cfg.derandomize_m = 30;
    cfg.eta = 0.5;
    cfg.seed = 31337;

    const ExperimentTable table = run_experiment(cfg);
    const double var_fdp_single =
        oracles::sample_variance(column_of(table, "oatk", false));
    const double var_fdp_derand =
        oracles::sample_variance(column_of(table, "oatk_derand", false));
    const double var_tdp_single =
        oracles::sample_variance(column_of(table, "oatk", true));
    const double var_tdp_derand =
        oracles::sample_variance(column_of(table, "oatk_derand", true));

    const bool pass =
        var_fdp_derand <= var_fdp_single && var_tdp_derand <= var_tdp_single;
    report(7, "derandomization-variance", pass,
           "FDP var " + format_double(var_fdp_derand) + " <= " +
               format_double(var_fdp_single) + ", TDP var " +
               format_double(var_tdp_derand) + " <= " +
               format_double(var_tdp_single) + "; " +
               format_double(timer.seconds()) + " s");
    EXPECT_LE(var_fdp_derand, var_fdp_single);
    EXPECT_LE(var_tdp_derand, var_tdp_single);
}

TEST(Acceptance, C08_ConditionalCalibration) {
    Timer timer;
    SimulationConfig cfg;
    cfg.design = DesignModel::gaussian;
    cfg.structure = GaussianStructure::power_decay;
    cfg.rho = 0.4;
    cfg.n = 200;
    cfg.p = 100;
    cfg.p1 = 30;
    cfg.amplitude = 6.0;
    cfg.alpha = 0.1;
    cfg.replicates = 100;
    cfg.methods = {"oatk", "oatk_calibrated"};
    cfg.calibration.mc_replicates = 200;
    cfg.calibration.c = 1;
    cfg.calibration.candidate_rule = CalibrationConfig::CandidateRule::fast;
    cfg.seed = 424242;

    const ExperimentTable table = run_experiment(cfg);
    double cal_fdr = 0, cal_power = 0, oatk_power = 0;
    for (const auto& s : table.summaries()) {
        if (s.method == "oatk_calibrated") {
            cal_fdr = s.fdr;
            cal_power = s.power;
        } else if (s.method == "oatk") {
            oatk_power = s.power;
        }
    }
    const bool pass = cal_fdr <= 0.1 + 0.03 && cal_power <= oatk_power;
    report(8, "conditional-calibration", pass,
           "calibrated FDR " + format_double(cal_fdr) + " (limit 0.13), power " +
               format_double(cal_power) + " <= OATK " + format_double(oatk_power) +
               "; " + format_double(timer.seconds()) + " s");
    EXPECT_LE(cal_fdr, 0.13);
    EXPECT_LE(cal_power, oatk_power);
}

TEST(Acceptance, C09_CompoundEvalueBudget) {
    Timer timer;
    const int n = 100, p = 20, outer = 200;
    CalibrationConfig cfg;
    cfg.mc_replicates = 200;
    cfg.c = 1;

    std::vector<double> sums;
    for (int rep = 0; rep < outer; ++rep) {
        const DesignMatrix design = random_design(n, p, 50000 + rep);
        const Eigen::VectorXd y = oracles::random_vector(n, 60000 + rep); // beta = 0
        const EValueVector ev =
            calibrated_evalues(design, y, 0.1, cfg, 70000 + rep);
        sums.push_back(ev.e.sum());
    }
    const double mean = mean_of(sums);
    const double se =
        std::sqrt(oracles::sample_variance(sums) / static_cast<double>(outer));
    const bool pass = mean <= p + 3.0 * se;
    report(9, "compound-evalue-budget", pass,
           "mean sum(e) " + format_double(mean) + " <= " +
               format_double(p + 3.0 * se) + " (p=20, 3 SE); " +
               format_double(timer.seconds()) + " s");
    EXPECT_LE(mean, p + 3.0 * se);
}

TEST(Acceptance, C10_SeqStepReduction) {
    std::mt19937_64 eng(90210);
    std::normal_distribution<double> normal;
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int p = 10 + trial % 20;
        WVector w;
        w.w = Eigen::VectorXd(p);
        for (int j = 0; j < p; ++j) {
            w.w[j] = normal(eng);
        }
        PValueVector pv;
        pv.m = 1;
        pv.p_vals = Eigen::VectorXd(p);
        pv.magnitudes = Eigen::VectorXd(p);
        for (int j = 0; j < p; ++j) {
            pv.p_vals[j] = w.w[j] > 0 ? 0.5 : 1.0;
            pv.magnitudes[j] = std::abs(w.w[j]);
        }
        for (int c : {0, 1}) {
            for (double alpha : {0.1, 0.25}) {
                if (seqstep_plus(pv, alpha, 0.5, c).rejected !=
                    knockoff_threshold(w, alpha, c).rejected) {
                    ++mismatches;
                }
            }
        }
    }
    const bool pass = mismatches == 0;
    report(10, "seqstep-m1-reduction", pass,
           "mismatching selections " + std::to_string(mismatches) + "/400");
    EXPECT_EQ(mismatches, 0);
}
