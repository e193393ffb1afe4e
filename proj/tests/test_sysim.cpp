#include <gtest/gtest.h>

#include <cmath>

#include "gfnoma/sysim.hpp"

using namespace gfnoma;
using namespace gfnoma::sys;

namespace {

ResourcePoolConfig single(int n, int T, int frames, int gfrus = 1) { return {{{0, gfrus, n, T}}, 0, frames}; }

TrafficConfig rate(double lambda, Arrivals a = Arrivals::Poisson) {
    TrafficConfig t;
    t.arrival_rate[0] = lambda;
    t.arrivals = a;
    return t;
}

} // namespace

TEST(Sysim, NoTrafficNoThroughput) {
    const auto m = run_system_sim(single(15, 2, 100), rate(0.0), SimMode::Abstract, 1);
    EXPECT_EQ(m.cluster(0).throughput(), 0.0);
    EXPECT_TRUE(std::isnan(m.cluster(0).success_prob()));
    EXPECT_EQ(m.cluster(0).occupancy, std::vector<long>{100});
}

TEST(Sysim, TwoForcedPacketsTaggedSuccess) {
    const auto m = run_system_sim(single(15, 2, 40000), rate(2.0, Arrivals::Fixed), SimMode::Abstract, 3);
    const auto& c = m.cluster(0);
    EXPECT_EQ(c.arrivals, 80000);
    const double p = 14.0 / 15.0;
    // Both packets of a frame share the outcome, so the variance is per frame.
    const double se = std::sqrt(p * (1 - p) / 40000);
    EXPECT_NEAR(c.success_prob(), p, 3 * se);
}

TEST(Sysim, ThreePacketsOverCapabilityAllFail) {
    const auto m = run_system_sim(single(15, 2, 500), rate(3.0, Arrivals::Fixed), SimMode::Abstract, 3);
    EXPECT_EQ(m.cluster(0).successes, 0);
    EXPECT_EQ(m.cluster(0).collision_rate(), 1.0);
}

TEST(Sysim, StderrAccountsForFrameClustering) {
    // Spread of the estimate over independent seeds vs the reported error.
    double sum = 0, sum2 = 0, reported = 0;
    const int K = 30;
    for (int s = 0; s < K; ++s) {
        const auto c = run_system_sim(single(15, 2, 5000), rate(1.0), SimMode::Abstract, 500 + s).cluster(0);
        sum += c.success_prob();
        sum2 += c.success_prob() * c.success_prob();
        reported += c.success_prob_stderr() / K;
    }
    const double sd = std::sqrt(sum2 / K - (sum / K) * (sum / K));
    EXPECT_NEAR(sd / reported, 1.0, 0.35);
}

TEST(Sysim, AnalyticFormula) {
    EXPECT_EQ(analytic_success_probability(0.0, 15, 2), 1.0);
    EXPECT_NEAR(analytic_success_probability(1.0, 15, 2), std::exp(-1.0) * (1 + 14.0 / 15.0), 1e-15);
    EXPECT_NEAR(analytic_success_probability(1.0, 15, 2), 0.7113, 1e-4);
    // Unbounded capability: thinning gives exp(-lambda/n).
    for (double lam : {0.5, 2.0, 7.0})
        EXPECT_NEAR(analytic_success_probability(lam, 1000, 100000), std::exp(-lam / 1000.0), 1e-12);
}

TEST(Sysim, AbstractMatchesAnalyticGrid) {
    struct Case {
        double lambda;
        int n, T, gfrus;
    };
    for (const auto& c : {Case{1, 15, 2, 1}, Case{0.5, 15, 2, 1}, Case{2, 63, 4, 1}, Case{3, 63, 4, 2}, Case{1.5, 31, 3, 1}}) {
        const auto m = run_system_sim(single(c.n, c.T, 30000, c.gfrus), rate(c.lambda), SimMode::Abstract, 9);
        const double p = analytic_success_probability(c.lambda / c.gfrus, c.n, c.T);
        EXPECT_NEAR(m.cluster(0).success_prob(), p, 3 * m.cluster(0).success_prob_stderr()) << c.lambda << ' ' << c.n;
    }
}

TEST(Sysim, ThroughputGrowsWithGfruCount) {
    double prev = 0;
    for (int g : {1, 2, 4, 8}) {
        const auto m = run_system_sim(single(15, 2, 5000, g), rate(4.0), SimMode::Abstract, 2);
        EXPECT_GE(m.cluster(0).throughput(), prev - 0.05) << g;
        prev = m.cluster(0).throughput();
    }
}

TEST(Sysim, ClusterIsolation) {
    ResourcePoolConfig pools{{{0, 2, 15, 2}, {1, 3, 63, 4}}, 4, 3000};
    TrafficConfig a, b;
    a.arrival_rate = {{0, 1.0}, {1, 2.0}};
    b.arrival_rate = {{0, 1.0}, {1, 9.0}};
    const auto ma = run_system_sim(pools, a, SimMode::Abstract, 4);
    const auto mb = run_system_sim(pools, b, SimMode::Abstract, 4);
    EXPECT_EQ(ma.cluster(0).successes, mb.cluster(0).successes);
    EXPECT_EQ(ma.cluster(0).occupancy, mb.cluster(0).occupancy);
    EXPECT_NE(ma.cluster(1).arrivals, mb.cluster(1).arrivals);
}

TEST(Sysim, FullPhyNotBelowAbstractAtHighSnr) {
    for (auto [n, T, lam] : {std::tuple{15, 2, 1.0}, {63, 4, 2.0}}) {
        const auto pools = single(n, T, 8000);
        const auto a = run_system_sim(pools, rate(lam), SimMode::Abstract, 6).cluster(0);
        const auto f = run_system_sim(pools, rate(lam), SimMode::FullPhy, 6).cluster(0);
        const double pa = a.success_prob(), pf = f.success_prob();
        const double ci = 1.96 * std::hypot(a.success_prob_stderr(), f.success_prob_stderr());
        EXPECT_GE(pf, pa - ci) << n;
    }
}

TEST(Sysim, FullPhyRejectsNonCodePool) {
    EXPECT_THROW(run_system_sim(single(20, 2, 10), rate(1.0), SimMode::FullPhy, 1), Error);
}

TEST(Sysim, ConfigValidationAndCsv) {
    EXPECT_THROW(run_system_sim(ResourcePoolConfig{}, rate(1.0), SimMode::Abstract, 1), Error);
    EXPECT_THROW(run_system_sim(single(15, 2, 10), rate(-1.0), SimMode::Abstract, 1), Error);
    const auto m = run_system_sim(single(15, 2, 10), rate(1.0), SimMode::Abstract, 1);
    const auto csv = metrics_csv(m);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "cluster_id,frames,offered_load,throughput,success_prob,collision_rate");
    EXPECT_EQ(csv, metrics_csv(run_system_sim(single(15, 2, 10), rate(1.0), SimMode::Abstract, 1)));
}
