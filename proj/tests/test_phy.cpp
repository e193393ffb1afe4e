#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gfnoma/detectors.hpp"
#include "gfnoma/phy.hpp"
#include "oracles.hpp"

using namespace gfnoma;

TEST(Phy, BpskMapping) {
    EXPECT_EQ(bpsk_modulate(BitVec{0, 1}, 1.0), (RealVec{1.0, -1.0}));
    EXPECT_EQ(bpsk_modulate(BitVec{0, 0, 0}, 2.0), (RealVec{2, 2, 2}));
    EXPECT_TRUE(bpsk_modulate(BitVec{}, 3.0).empty());
    EXPECT_THROW(bpsk_modulate(BitVec{0}, 0.0), Error);
}

TEST(Phy, Superpose) {
    const std::vector<RealVec> two = {{1.0}, {-1.0}};
    EXPECT_EQ(superpose(two), (RealVec{0.0}));
    std::vector<RealVec> same(5, RealVec{0.5});
    EXPECT_DOUBLE_EQ(superpose(same)[0], 2.5);
    EXPECT_EQ(superpose(std::vector<RealVec>{}, 4), RealVec(4, 0.0));
    const std::vector<RealVec> bad = {{1.0, 2.0}, {1.0}};
    EXPECT_THROW(superpose(bad, 2), Error);
}

TEST(Phy, AwgnNoiselessAndMoments) {
    Rng rng(5);
    const RealVec v = {1.0, -2.0, 3.5};
    EXPECT_EQ(awgn_add(v, 1.0, 0.0, rng).chips, v);
    EXPECT_THROW(awgn_add(v, 1.0, -1.0, rng), Error);

    const double var = 0.7;
    const std::size_t N = 1'000'000;
    const auto blk = awgn_add(RealVec(N, 0.0), 1.0, var, rng);
    double mean = 0, sq = 0;
    for (double x : blk.chips) mean += x;
    mean /= N;
    for (double x : blk.chips) sq += (x - mean) * (x - mean);
    sq /= (N - 1);
    EXPECT_LT(std::abs(mean), 4 * std::sqrt(var) / 1e3);
    EXPECT_NEAR(sq, var, 0.01 * var);
}

TEST(Phy, EbN0Calibration) {
    EXPECT_NEAR(ebn0_to_noise_var(8, 1, 4, 0.5), 4.0 / std::pow(10.0, 0.8), 1e-12);
    EXPECT_NEAR(ebn0_to_noise_var(8, 1, 4, 0.5), 0.6340, 5e-5);
    EXPECT_DOUBLE_EQ(ebn0_to_noise_var(0, 1, 1, 1), 0.5);
    EXPECT_NEAR(ebn0_to_noise_var(10, 1.3, 3, 1) / ebn0_to_noise_var(0, 1.3, 3, 1), 0.1, 1e-15);
    EXPECT_EQ(ebn0_to_noise_var(INFINITY, 1, 4, 1), 0.0);
    double prev = INFINITY;
    for (double db = -5; db <= 20; db += 0.25) {
        const double v = ebn0_to_noise_var(db, 1, 4, 0.5);
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(Phy, EstimateParityRounding) {
    ReceivedBlock b{{0.1}, 1.0, 0.0};
    auto e = estimate_parity(b, 2);
    EXPECT_EQ(e.ones[0], 1);
    EXPECT_EQ(e.parity[0], 1);
    b.chips = {-1.9};
    e = estimate_parity(b, 2);
    EXPECT_EQ(e.ones[0], 2);
    EXPECT_EQ(e.parity[0], 0);
    b.chips = {0.5, -0.5};
    e = estimate_parity(b, 0);
    EXPECT_EQ(e.parity, (BitVec{0, 0}));
    EXPECT_DOUBLE_EQ(e.metric, 0.5);
}

TEST(Phy, EstimateParityNoiselessSuperpositionIsXor) {
    const auto code = build_signature_code(FieldTables(4), 2);
    const SignatureBank bank(code, OuterCode::uncoded());
    for (int a = 1; a <= 15; ++a)
        for (int b = a + 1; b <= 15; ++b) {
            const std::vector<int> msgs = {a, b};
            const ReceivedBlock blk{bank.synthesize(msgs, 1.7), 1.7, 0.0};
            const auto e = estimate_parity(blk, 2);
            ASSERT_EQ(e.parity, xor_signatures(code, msgs));
            ASSERT_NEAR(e.metric, 0.0, 1e-20);
        }
}

TEST(OuterCode, ImpulseAndZero) {
    const auto oc = OuterCode::conv_171_133();
    BitVec impulse(24, 0);
    impulse[0] = 1;
    const auto c = conv_encode(impulse, oc);
    ASSERT_EQ(c.size(), 60u);
    EXPECT_EQ(c[0], 1);
    EXPECT_EQ(c[1], 1);
    EXPECT_EQ(c, oracle::conv_reference(impulse, 0171, 0133, 6));

    const BitVec zeros(24, 0);
    EXPECT_EQ(conv_encode(zeros, oc), BitVec(60, 0));
    EXPECT_EQ(viterbi_decode(BitVec(60, 0), oc), zeros);
    EXPECT_THROW(viterbi_decode(BitVec(59, 0), oc), Error);
}

TEST(OuterCode, RandomRoundTripAndLinearity) {
    const auto oc = OuterCode::conv_171_133();
    std::mt19937_64 rng(3);
    std::bernoulli_distribution coin(0.5);
    for (int t = 0; t < 1000; ++t) {
        BitVec a(24), b(24), ab(24);
        for (int i = 0; i < 24; ++i) {
            a[i] = coin(rng);
            b[i] = coin(rng);
            ab[i] = a[i] ^ b[i];
        }
        const auto ca = conv_encode(a, oc);
        ASSERT_EQ(ca, oracle::conv_reference(a, 0171, 0133, 6));
        ASSERT_EQ(viterbi_decode(ca, oc), a);
        RealVec llr(ca.size());
        for (std::size_t i = 0; i < ca.size(); ++i) llr[i] = ca[i] ? -2.0 : 2.0;
        ASSERT_EQ(viterbi_decode_soft(llr, oc), a);
        const auto cb = conv_encode(b, oc);
        auto x = ca;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] ^= cb[i];
        ASSERT_EQ(x, conv_encode(ab, oc));
    }
}

TEST(OuterCode, CorrectsIsolatedErrors) {
    // Free distance of the (171,133) code is 10: any 4 well-separated flips are corrected.
    const auto oc = OuterCode::conv_171_133();
    std::mt19937_64 rng(9);
    std::bernoulli_distribution coin(0.5);
    for (int t = 0; t < 200; ++t) {
        BitVec a(24);
        for (auto& b : a) b = coin(rng);
        auto c = conv_encode(a, oc);
        for (std::size_t p = 3; p < c.size(); p += 17) c[p] ^= 1;
        ASSERT_EQ(viterbi_decode(c, oc), a);
    }
}

TEST(Phy, ParityLlrSignsAgreeWithHardDecision) {
    const ReceivedBlock blk{{3.0, 1.0, -1.0, -3.0}, 1.0, 0.05};
    const auto llr = parity_llrs(blk, 3);
    // ones = 0,1,2,3 -> parity 0,1,0,1
    EXPECT_GT(llr[0], 0);
    EXPECT_LT(llr[1], 0);
    EXPECT_GT(llr[2], 0);
    EXPECT_LT(llr[3], 0);
    const auto zero = parity_llrs(blk, 0);
    for (double v : zero) EXPECT_GT(v, 0);
}

TEST(Phy, CodedChainLinearityGivesSyndromeSum) {
    // Viterbi on the XOR of coded signatures returns the XOR of the syndromes.
    const auto code = build_signature_code(FieldTables(6), 4);
    const OuterCode oc = OuterCode::conv_171_133();
    const SignatureBank bank(code, oc);
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> pick(1, 63);
    for (int t = 0; t < 500; ++t) {
        std::vector<int> msgs;
        while (msgs.size() < 4) {
            const int m = pick(rng);
            if (std::find(msgs.begin(), msgs.end(), m) == msgs.end()) msgs.push_back(m);
        }
        const ReceivedBlock blk{bank.synthesize(msgs, 1.0), 1.0, 0.0};
        const auto e = estimate_parity(blk, 4);
        ASSERT_EQ(viterbi_decode(e.parity, oc), xor_signatures(code, msgs));
    }
}
