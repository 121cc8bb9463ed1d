#include <gtest/gtest.h>

#include <random>

#include <Eigen/Dense>

#include "oatk/selection.hpp"
#include "oracles.hpp"

using namespace oatk;

namespace {

WVector make_w(std::initializer_list<double> values) {
    WVector w;
    w.w = Eigen::VectorXd(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double v : values) {
        w.w[i++] = v;
    }
    return w;
}

} // namespace

TEST(KnockoffThreshold, HandEnumeratedCases) {
    // t = 1: one negative, three positives -> 1/3 <= 0.5
    auto sel = knockoff_threshold(make_w({3, 2, 1, -1}), 0.5, 0);
    EXPECT_EQ(sel.threshold, 1.0);
    EXPECT_EQ(sel.rejected, (std::vector<int>{0, 1, 2}));

    // offset c = 1: (1 + 0)/5 = 0.2 <= 0.25 at t = 1
    sel = knockoff_threshold(make_w({5, 4, 3, 2, 1}), 0.25, 1);
    EXPECT_EQ(sel.threshold, 1.0);
    EXPECT_EQ(sel.rejected, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(KnockoffThreshold, AllNegativeSelectsNothing) {
    const auto sel = knockoff_threshold(make_w({-1, -2, -0.5}), 0.2, 0);
    EXPECT_TRUE(sel.rejected.empty());
    EXPECT_TRUE(std::isinf(sel.threshold));
}

TEST(KnockoffThreshold, MatchesExhaustiveScan) {
    std::mt19937_64 eng(5);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 200; ++trial) {
        WVector w;
        w.w = Eigen::VectorXd(15);
        for (int j = 0; j < 15; ++j) {
            w.w[j] = normal(eng);
        }
        for (int c : {0, 1}) {
            for (double alpha : {0.1, 0.3, 0.5}) {
                const auto sel = knockoff_threshold(w, alpha, c);
                const auto [t, rejected] =
                    oracles::knockoff_threshold_exhaustive(w.w, alpha, c);
                EXPECT_EQ(sel.threshold, t);
                EXPECT_EQ(sel.rejected, rejected);
            }
        }
    }
}

TEST(KnockoffThreshold, FeasibilityAtReturnedThreshold) {
    std::mt19937_64 eng(7);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 100; ++trial) {
        WVector w;
        w.w = Eigen::VectorXd(20);
        for (int j = 0; j < 20; ++j) {
            w.w[j] = normal(eng);
        }
        const double alpha = 0.4;
        const auto sel = knockoff_threshold(w, alpha, 0);
        if (!std::isfinite(sel.threshold)) {
            continue;
        }
        auto ratio = [&](double t) {
            int neg = 0, pos = 0;
            for (int j = 0; j < 20; ++j) {
                if (w.w[j] <= -t) ++neg;
                if (w.w[j] >= t) ++pos;
            }
            return neg / std::max(1.0, static_cast<double>(pos));
        };
        EXPECT_LE(ratio(sel.threshold), alpha);
        for (int j = 0; j < 20; ++j) {
            const double t = std::abs(w.w[j]);
            if (t > 0.0 && t < sel.threshold) {
                EXPECT_GT(ratio(t), alpha);
            }
        }
    }
}

TEST(KnockoffThreshold, MonotoneInAlphaAndScaleInvariant) {
    std::mt19937_64 eng(11);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 50; ++trial) {
        WVector w;
        w.w = Eigen::VectorXd(12);
        for (int j = 0; j < 12; ++j) {
            w.w[j] = normal(eng);
        }
        const auto small = knockoff_threshold(w, 0.1, 0);
        const auto large = knockoff_threshold(w, 0.4, 0);
        for (int j : small.rejected) {
            EXPECT_TRUE(std::binary_search(large.rejected.begin(),
                                           large.rejected.end(), j));
        }

        WVector scaled;
        scaled.w = 3.7 * w.w;
        EXPECT_EQ(knockoff_threshold(scaled, 0.25, 0).rejected,
                  knockoff_threshold(w, 0.25, 0).rejected);
    }
}

TEST(SeqStepPlus, TrivialCases) {
    PValueVector pv;
    pv.m = 9;
    pv.p_vals = Eigen::VectorXd::Constant(5, 0.1);
    pv.magnitudes = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0);
    auto sel = seqstep_plus(pv, 0.5, 0.5, 0);
    EXPECT_EQ(sel.rejected, (std::vector<int>{0, 1, 2, 3, 4}));
    EXPECT_EQ(sel.threshold, 1.0); // khat = 1

    pv.p_vals.setConstant(1.0);
    sel = seqstep_plus(pv, 0.5, 0.5, 0);
    EXPECT_TRUE(sel.rejected.empty());
}

TEST(SeqStepPlus, MatchesExhaustiveEvaluation) {
    PValueVector pv;
    pv.m = 9;
    pv.p_vals = Eigen::VectorXd(6);
    pv.p_vals << 0.1, 0.9, 0.1, 0.1, 0.9, 0.1;
    pv.magnitudes = Eigen::VectorXd(6);
    pv.magnitudes << 6, 5, 4, 3, 2, 1;
    const auto sel = seqstep_plus(pv, 0.5, 0.5, 0);
    const auto expected =
        oracles::seqstep_exhaustive(pv.p_vals, pv.magnitudes, 0.5, 0.5, 0);
    EXPECT_EQ(sel.rejected, expected);

    std::mt19937_64 eng(13);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        PValueVector rnd;
        rnd.m = 9;
        rnd.p_vals = Eigen::VectorXd(10);
        rnd.magnitudes = Eigen::VectorXd(10);
        for (int j = 0; j < 10; ++j) {
            rnd.p_vals[j] = (1 + static_cast<int>(unif(eng) * 10)) / 10.0;
            rnd.magnitudes[j] = unif(eng);
        }
        for (int c : {0, 1}) {
            EXPECT_EQ(seqstep_plus(rnd, 0.4, 0.5, c).rejected,
                      oracles::seqstep_exhaustive(rnd.p_vals, rnd.magnitudes, 0.4,
                                                  0.5, c));
        }
    }
}

TEST(SeqStepPlus, RejectsGammaOutOfRange) {
    PValueVector pv;
    pv.m = 1;
    pv.p_vals = Eigen::VectorXd::Constant(3, 0.5);
    pv.magnitudes = Eigen::VectorXd::Ones(3);
    EXPECT_THROW(seqstep_plus(pv, 0.2, 0.6, 0), GammaOutOfRangeError);
    EXPECT_THROW(seqstep_plus(pv, 0.2, 0.1, 0), GammaOutOfRangeError);
}

TEST(SeqStepPlus, ReducesToKnockoffThresholdAtMOne) {
    std::mt19937_64 eng(17);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 100; ++trial) {
        WVector w;
        w.w = Eigen::VectorXd(20);
        for (int j = 0; j < 20; ++j) {
            w.w[j] = normal(eng);
        }
        PValueVector pv;
        pv.m = 1;
        pv.p_vals = Eigen::VectorXd(20);
        pv.magnitudes = Eigen::VectorXd(20);
        for (int j = 0; j < 20; ++j) {
            pv.p_vals[j] = w.w[j] > 0 ? 0.5 : 1.0;
            pv.magnitudes[j] = std::abs(w.w[j]);
        }
        for (int c : {0, 1}) {
            for (double alpha : {0.1, 0.25, 0.4}) {
                EXPECT_EQ(seqstep_plus(pv, alpha, 0.5, c).rejected,
                          knockoff_threshold(w, alpha, c).rejected);
            }
        }
    }
}

TEST(Ebh, HandEvaluatedCases) {
    Eigen::VectorXd e(4);
    e << 0, 0, 0, 0;
    EXPECT_TRUE(ebh(e, 0.5).rejected.empty());

    e << 8, 8, 0, 0;
    const auto sel = ebh(e, 0.5);
    EXPECT_EQ(sel.rejected, (std::vector<int>{0, 1})); // 2*8/4 = 4 >= 2
    EXPECT_EQ(sel.threshold, 2.0);

    EXPECT_TRUE(ebh(e, 0.1).rejected.empty()); // needs k e / 4 >= 10
}

TEST(Ebh, MonotoneInAlpha) {
    std::mt19937_64 eng(19);
    std::exponential_distribution<double> expo(0.25);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd e(10);
        for (int j = 0; j < 10; ++j) {
            e[j] = expo(eng);
        }
        const auto small = ebh(e, 0.15);
        const auto large = ebh(e, 0.45);
        for (int j : small.rejected) {
            EXPECT_TRUE(std::binary_search(large.rejected.begin(),
                                           large.rejected.end(), j));
        }
    }
}

TEST(BhBaseline, TrivialCases) {
    // single feature, p-value below alpha
    Eigen::MatrixXd raw = oracles::random_matrix(30, 1, 23);
    const DesignMatrix design = ingest_design(raw);
    Eigen::VectorXd y = 4.0 * design.values.col(0) + oracles::random_vector(30, 29);
    const auto sel = bh_baseline(design, y, 0.05);
    EXPECT_EQ(sel.rejected, (std::vector<int>{0}));

    // y = 0: degenerate t-statistics count as p = 1
    const DesignMatrix design2 = ingest_design(oracles::random_matrix(20, 3, 31));
    const auto none = bh_baseline(design2, Eigen::VectorXd::Zero(20), 0.1);
    EXPECT_TRUE(none.rejected.empty());
}

TEST(BhBaseline, RequiresResidualDf) {
    const DesignMatrix design = ingest_design(Eigen::MatrixXd::Identity(3, 3));
    EXPECT_THROW(bh_baseline(design, Eigen::VectorXd::Ones(3), 0.1),
                 DimensionError);
}

TEST(BhBaseline, MatchesStepUpOracle) {
    for (unsigned seed = 0; seed < 20; ++seed) {
        const DesignMatrix design =
            ingest_design(oracles::random_matrix(40, 8, 100 + seed));
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(8);
        beta[0] = 3.0;
        beta[5] = -2.0;
        const Eigen::VectorXd y =
            design.values * beta + oracles::random_vector(40, 200 + seed);

        const Eigen::VectorXd pvals = ols_t_pvalues(design, y);
        EXPECT_EQ(bh_baseline(design, y, 0.2).rejected,
                  oracles::bh_exhaustive(pvals, 0.2));
    }
}

TEST(BhBaseline, MonotoneInAlpha) {
    const DesignMatrix design = ingest_design(oracles::random_matrix(50, 10, 37));
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(10);
    beta.head(3).setConstant(2.0);
    const Eigen::VectorXd y =
        design.values * beta + oracles::random_vector(50, 41);
    const auto small = bh_baseline(design, y, 0.05);
    const auto large = bh_baseline(design, y, 0.3);
    for (int j : small.rejected) {
        EXPECT_TRUE(
            std::binary_search(large.rejected.begin(), large.rejected.end(), j));
    }
}

TEST(Derandomize, SingleReplicateMatchesRun) {
    auto run = [](int rep, std::uint64_t) {
        SelectionResult sel;
        sel.rejected = rep == 0 ? std::vector<int>{1, 3} : std::vector<int>{0};
        sel.n_features = 5;
        return sel;
    };
    const auto result = derandomize(run, 5, 1, 0.5, 7);
    EXPECT_EQ(result.rejected, (std::vector<int>{1, 3}));
    EXPECT_EQ(result.frequencies[1], 1.0);
    EXPECT_EQ(result.frequencies[0], 0.0);
}

TEST(Derandomize, AlwaysRejectedFeatureSurvives) {
    auto run = [](int rep, std::uint64_t) {
        SelectionResult sel;
        sel.rejected = {2};
        if (rep % 3 == 0) {
            sel.rejected.push_back(4);
        }
        std::sort(sel.rejected.begin(), sel.rejected.end());
        sel.n_features = 6;
        return sel;
    };
    const auto result = derandomize(run, 6, 30, 0.5, 11);
    EXPECT_EQ(result.frequencies[2], 1.0);
    EXPECT_TRUE(std::binary_search(result.rejected.begin(), result.rejected.end(), 2));
    // feature 4 rejected in 10/30 replicates only
    EXPECT_NEAR(result.frequencies[4], 10.0 / 30.0, 1e-12);
    EXPECT_FALSE(std::binary_search(result.rejected.begin(), result.rejected.end(), 4));

    // frequencies are multiples of 1/M
    for (int j = 0; j < 6; ++j) {
        const double scaled = result.frequencies[j] * 30.0;
        EXPECT_NEAR(scaled, std::round(scaled), 1e-12);
    }
}
