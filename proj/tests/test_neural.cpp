#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "gfnoma/neural.hpp"

using namespace gfnoma;
using namespace gfnoma::nn;

namespace {

Batch<double> tiny_batch(const Model<double>& model, std::uint64_t seed, int size, std::vector<double> snrs) {
    Rng rng(seed);
    Batch<double> b;
    for (int e = 0; e < size; ++e)
        b.examples.push_back({draw_active_set(rng, model.n(), model.T), snrs[static_cast<std::size_t>(e) % snrs.size()]});
    b.noise = draw_noise(model, b.examples, rng);
    return b;
}

} // namespace

TEST(Neural, InitDeterministicAndSeedDependent) {
    const auto a = init_model<double>(3, 2, 1.0, 1.0, {8, 8}, 0);
    const auto b = init_model<double>(3, 2, 1.0, 1.0, {8, 8}, 0);
    const auto c = init_model<double>(3, 2, 1.0, 1.0, {8, 8}, 1);
    EXPECT_EQ(a.encoder.layers()[0].W, b.encoder.layers()[0].W);
    EXPECT_EQ(a.decoder.layers()[2].W, b.decoder.layers()[2].W);
    EXPECT_NE(a.encoder.layers()[0].W, c.encoder.layers()[0].W);
    EXPECT_TRUE(a.encoder.layers()[1].b.isZero());
}

TEST(Neural, HeVarianceOnWideLayer) {
    Mlp<double> net(MlpSpec{{2048, 2048, 10}});
    Rng rng(3);
    net.init(rng);
    const auto& W = net.layers()[0].W;
    const double mean = W.mean();
    const double var = (W.array() - mean).square().mean();
    EXPECT_NEAR(var, 2.0 / 2048, 0.1 * 2.0 / 2048);
    const auto& Wo = net.layers()[1].W;
    const double vo = Wo.array().square().mean();
    EXPECT_NEAR(vo, 2.0 / (2048 + 10), 0.1 * 2.0 / (2048 + 10));
}

TEST(Neural, SpecValidation) {
    EXPECT_THROW(Mlp<double>(MlpSpec{{4, 4}}), Error);
    EXPECT_THROW(Mlp<double>(MlpSpec{{4, 0, 4}}), Error);
}

TEST(Neural, EncoderOutputRanges) {
    const auto model = init_model<double>(4, 2, 1.0, 1.5, {16, 16}, 7);
    const auto soft = encode_all(model, false);
    EXPECT_LE(soft.chips.cwiseAbs().maxCoeff(), 1.5);
    for (int m = 1; m <= model.n(); ++m) {
        const auto chips = encode_user(model, m, true);
        ASSERT_EQ(chips.size(), static_cast<std::size_t>(model.chip_count()));
        for (double c : chips) ASSERT_TRUE(c == 1.5 || c == -1.5);
        EXPECT_EQ(chips, encode_user(model, m, true));
    }
    EXPECT_THROW(encode_user(model, 0), Error);
}

TEST(Neural, SystemForwardShapes) {
    const auto model = init_model<float>(6, 4, 1.0, 1.0, {32, 32}, 1);
    Rng rng(0);
    const auto out = system_forward(model, std::vector<int>{}, 0.0, rng);
    ASSERT_EQ(out.size(), 63u);
    for (double s : out) {
        EXPECT_GT(s, 0.0);
        EXPECT_LT(s, 1.0);
    }
    const auto out2 = system_forward(model, std::vector<int>{1, 2, 3}, 0.5, rng);
    EXPECT_EQ(out2.size(), 63u);
    EXPECT_THROW(system_forward(model, std::vector<int>{1, 2, 3, 4, 5}, 0.0, rng), Error);
}

TEST(Neural, ThresholdRule) {
    const std::vector<double> low(15, 0.2);
    auto d = threshold_scores(low, 2, 0.5);
    EXPECT_TRUE(d.ok());
    EXPECT_TRUE(d.messages.empty());
    std::vector<double> some(15, 0.1);
    some[3] = 0.9;
    some[7] = 0.6;
    d = threshold_scores(some, 2, 0.5);
    EXPECT_EQ(d.messages, (std::vector<int>{4, 8}));
    d = threshold_scores(some, 2, 1e-9);
    EXPECT_EQ(d.detected_count, 15);
    EXPECT_FALSE(d.ok());
    const auto model = init_model<double>(3, 2, 1.0, 1.0, {4}, 1);
    EXPECT_THROW(dl_detect(model, ReceivedBlock{RealVec(6, 0.0), 1.0, 0.0}, 0.0), Error);
}

TEST(Neural, GradientCheckUnweightedAndWeighted) {
    auto model = init_model<double>(3, 3, 1.0, 1.0, {12, 10}, 21);
    const auto batch = tiny_batch(model, 5, 9, {8.0, 12.0});
    const auto plain = gradient_check(model, batch, LossWeights{});
    EXPECT_LT(plain.max_rel_error, 1e-4);
    EXPECT_GT(plain.checked, 300u);
    const auto weighted = gradient_check(model, batch, LossWeights::error_floor_preset());
    EXPECT_LT(weighted.max_rel_error, 1e-4);
}

TEST(Neural, GradientCheckZeroWeights) {
    auto model = init_model<double>(3, 2, 1.0, 1.0, {6, 6}, 2);
    for (auto* net : {&model.encoder, &model.decoder})
        for (auto& L : net->layers()) {
            L.W.setZero();
            L.b.setZero();
        }
    const auto batch = tiny_batch(model, 1, 5, {8.0});
    const auto r = gradient_check(model, batch, LossWeights{});
    EXPECT_TRUE(std::isfinite(r.max_rel_error));
    EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Neural, WeightedLossIsManualWeightedSum) {
    const auto model = init_model<double>(4, 4, 1.0, 1.0, {16, 16}, 3);
    const auto batch = tiny_batch(model, 9, 64, {8.0, 12.0});
    const auto w = LossWeights::error_floor_preset();
    const auto r = batch_loss(model, batch, w, nullptr);
    const auto plain = batch_loss(model, batch, LossWeights{}, nullptr);
    double manual = 0;
    for (std::size_t e = 0; e < batch.examples.size(); ++e) {
        const auto& ex = batch.examples[e];
        double weight = ex.messages.size() == 3 ? 10.0 : ex.messages.size() == 4 ? 20.0 : 1.0;
        if (ex.ebn0_db == 12.0) weight *= 4.0;
        manual += weight * plain.example_loss[e];
    }
    manual /= static_cast<double>(batch.examples.size());
    EXPECT_NEAR(r.loss, manual, 1e-12 * manual);

    LossWeights scaled = w;
    for (auto& [k, v] : scaled.by_users) v *= 3;
    for (int L = 1; L <= 4; ++L)
        if (!scaled.by_users.count(L)) scaled.by_users[L] = 3;
    EXPECT_NEAR(batch_loss(model, batch, scaled, nullptr).loss, 3 * r.loss, 1e-12 * r.loss);
}

TEST(Neural, AdamZeroGradientIsNoOp) {
    auto model = init_model<double>(3, 2, 1.0, 1.0, {8}, 4);
    const auto before = model.decoder.layers()[0].W;
    Adam<double> opt(model, AdamConfig{});
    const auto g = zero_gradients(model);
    opt.step(model, g);
    opt.step(model, g);
    EXPECT_EQ(model.decoder.layers()[0].W, before);
}

TEST(Neural, TrainingDeterministicAndUnitWeightsMatchUnweighted) {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.train_size = 256;
    cfg.val_size = 64;
    cfg.minibatch = 32;
    cfg.adam.learning_rate = 1e-3;
    auto m1 = init_model<double>(4, 2, 1.0, 1.0, {16, 16}, 5);
    auto m2 = m1;
    auto m3 = m1;
    const auto t1 = train(m1, cfg);
    const auto t2 = train(m2, cfg);
    ASSERT_EQ(t1.size(), 3u);
    for (std::size_t i = 0; i < t1.size(); ++i) {
        EXPECT_EQ(t1[i].train_loss, t2[i].train_loss);
        EXPECT_EQ(t1[i].val_loss, t2[i].val_loss);
    }
    cfg.loss_weights = LossWeights{{{1, 1.0}, {2, 1.0}}, {{8.0, 1.0}}};
    const auto t3 = train(m3, cfg);
    for (std::size_t i = 0; i < t1.size(); ++i) EXPECT_EQ(t1[i].val_loss, t3[i].val_loss);
}

TEST(Neural, ShortTrainingReducesLoss) {
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.train_size = 2000;
    cfg.val_size = 500;
    cfg.minibatch = 64;
    cfg.adam.learning_rate = 1e-3;
    cfg.train_ebn0_db = {10.0};
    auto model = init_model<float>(4, 2, 1.0, 1.0, {64, 64}, 6);
    const auto trace = train(model, cfg);
    EXPECT_LT(trace.back().val_loss, 0.5 * trace.front().val_loss);
    EXPECT_LT(trace.back().train_loss, trace.front().train_loss);

    // Trained on 1-2 users at 10 dB: noiseless single users are recovered.
    int ok = 0;
    for (int m = 1; m <= model.n(); ++m) {
        const auto chips = encode_user(model, m, true);
        const auto d = dl_detect(model, ReceivedBlock{chips, 1.0, 0.0});
        ok += d.ok() && d.messages == std::vector<int>{m};
    }
    EXPECT_GE(ok, 14);
}

TEST(Neural, InvalidConfigAndDivergence) {
    TrainConfig cfg;
    cfg.train_size = 0;
    auto model = init_model<double>(3, 2, 1.0, 1.0, {4}, 1);
    try {
        train(model, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ConfigError);
    }
    TrainConfig bad;
    bad.epochs = 1;
    bad.train_size = 16;
    bad.val_size = 4;
    bad.minibatch = 8;
    model.decoder.layers()[0].W(0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        train(model, bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DivergenceDetected);
    }
}

TEST(Neural, CheckpointRoundTrip) {
    const auto model = init_model<float>(4, 2, 0.5, 1.25, {16, 8}, 77);
    const auto path = (std::filesystem::temp_directory_path() / "gfnoma_ckpt_test.bin").string();
    save_checkpoint(model, path);
    const auto back = load_checkpoint<float>(path);
    EXPECT_EQ(back.k, 4);
    EXPECT_EQ(back.T, 2);
    EXPECT_EQ(back.rate, 0.5);
    EXPECT_EQ(back.amplitude, 1.25);
    EXPECT_EQ(back.seed, 77u);
    EXPECT_EQ(back.chip_count(), 16);
    for (std::size_t l = 0; l < model.decoder.layers().size(); ++l) {
        EXPECT_EQ(back.decoder.layers()[l].W, model.decoder.layers()[l].W);
        EXPECT_EQ(back.encoder.layers()[l].b, model.encoder.layers()[l].b);
    }
    EXPECT_THROW(load_checkpoint<double>(path), Error);
    std::filesystem::remove(path);
    try {
        load_checkpoint<float>(path);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::CheckpointMissing);
    }
}
