#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "gfnoma/detectors.hpp"
#include "gfnoma/error.hpp"
#include "gfnoma/phy.hpp"
#include "gfnoma/rng.hpp"

namespace gfnoma::nn {

/// Layer widths (input, hidden..., output). Hidden layers use ReLU, the
/// output layer a sigmoid.
struct MlpSpec {
    std::vector<int> widths;

    void validate() const {
        if (widths.size() < 3) fail(Errc::InvalidArgument, "MLP needs at least one hidden layer");
        for (int w : widths)
            if (w <= 0) fail(Errc::InvalidArgument, "MLP widths must be positive");
    }
    int input() const { return widths.front(); }
    int output() const { return widths.back(); }
};

template <typename S>
class Mlp {
public:
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    struct Layer {
        Mat W; // out x in
        Vec b;
    };

    /// act[0] is the input; act[l+1] the output of layer l (post-ReLU for
    /// hidden layers, raw logits for the last one).
    struct Cache {
        std::vector<Mat> act;
    };

    Mlp() = default;

    explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l)
            layers_.push_back({Mat::Zero(spec_.widths[l + 1], spec_.widths[l]), Vec::Zero(spec_.widths[l + 1])});
    }

    /// He-normal for ReLU layers, Glorot-normal for the sigmoid output layer; zero biases.
    void init(Rng& rng) {
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            auto& L = layers_[l];
            const double fan_in = static_cast<double>(L.W.cols());
            const double fan_out = static_cast<double>(L.W.rows());
            const bool last = l + 1 == layers_.size();
            std::normal_distribution<double> g(0.0, std::sqrt(last ? 2.0 / (fan_in + fan_out) : 2.0 / fan_in));
            for (Eigen::Index c = 0; c < L.W.cols(); ++c)
                for (Eigen::Index r = 0; r < L.W.rows(); ++r) L.W(r, c) = static_cast<S>(g(rng));
            L.b.setZero();
        }
    }

    Mat forward_logits(const Mat& X, Cache* cache = nullptr) const {
        Mat h = X;
        if (cache) {
            cache->act.clear();
            cache->act.push_back(X);
        }
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Mat z = layers_[l].W * h;
            z.colwise() += layers_[l].b;
            if (l + 1 < layers_.size()) z = z.cwiseMax(S(0));
            h = std::move(z);
            if (cache) cache->act.push_back(h);
        }
        return h;
    }

    /// Accumulates parameter gradients given dLoss/dlogits; returns dLoss/dinput.
    Mat backward(const Cache& cache, Mat dz, std::vector<Layer>& grads) const {
        for (std::size_t l = layers_.size(); l-- > 0;) {
            grads[l].W.noalias() += dz * cache.act[l].transpose();
            grads[l].b += dz.rowwise().sum();
            Mat da = layers_[l].W.transpose() * dz;
            if (l > 0) da = da.cwiseProduct((cache.act[l].array() > S(0)).template cast<S>().matrix());
            dz = std::move(da);
        }
        return dz;
    }

    std::vector<Layer> zero_grads() const {
        std::vector<Layer> g;
        for (const auto& L : layers_) g.push_back({Mat::Zero(L.W.rows(), L.W.cols()), Vec::Zero(L.b.size())});
        return g;
    }

    const MlpSpec& spec() const noexcept { return spec_; }
    std::vector<Layer>& layers() noexcept { return layers_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }

private:
    MlpSpec spec_;
    std::vector<Layer> layers_;
};

template <typename S>
S sigmoid(S x) {
    return x >= 0 ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

// ---------------------------------------------------------------------------

/// Shared per-user encoder (one-hot message -> chips) and receiver decoder
/// (chip vector -> per-message activity scores).
template <typename S>
struct Model {
    using Net = Mlp<S>;
    using Mat = typename Net::Mat;

    Net encoder;
    Net decoder;
    int k = 6;
    int T = 4;
    double rate = 1.0;
    double amplitude = 1.0;
    std::uint64_t seed = 0;

    int n() const { return (1 << k) - 1; }
    int chip_count() const { return encoder.spec().output(); }
};

/// Chip count for a code of k bits per user, capability T and rate R.
inline int chip_count_for(int k, int T, double rate) { return static_cast<int>(std::lround(k * T / rate)); }

inline MlpSpec default_encoder_spec(int n, int chips, std::vector<int> hidden) {
    MlpSpec s;
    s.widths.push_back(n);
    s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
    s.widths.push_back(chips);
    return s;
}

template <typename S>
Model<S> init_model(int k, int T, double rate, double amplitude, const std::vector<int>& hidden, std::uint64_t seed) {
    Model<S> m;
    m.k = k;
    m.T = T;
    m.rate = rate;
    m.amplitude = amplitude;
    m.seed = seed;
    const int n = (1 << k) - 1;
    const int chips = chip_count_for(k, T, rate);
    m.encoder = Mlp<S>(default_encoder_spec(n, chips, hidden));
    MlpSpec dec;
    dec.widths.push_back(chips);
    dec.widths.insert(dec.widths.end(), hidden.begin(), hidden.end());
    dec.widths.push_back(n);
    m.decoder = Mlp<S>(dec);
    Rng rng = make_stream(seed, {0x1417});
    m.encoder.init(rng);
    m.decoder.init(rng);
    return m;
}

/// Encoder outputs for every message, as columns. Training mode returns the
/// continuous surrogate A(2s-1), inside [-A, A]; inference mode hardens each
/// chip to +-A by its sign, so every user sends exactly A^2 per chip.
template <typename S>
struct EncodedBook {
    typename Model<S>::Mat chips; // chip_count x n
    typename Model<S>::Mat s;     // sigmoid outputs
    typename Mlp<S>::Cache cache;
};

template <typename S>
EncodedBook<S> encode_all(const Model<S>& model, bool hard, bool keep_cache = false) {
    using Mat = typename Model<S>::Mat;
    const int n = model.n();
    EncodedBook<S> book;
    const Mat eye = Mat::Identity(n, n);
    const Mat logits = model.encoder.forward_logits(eye, keep_cache ? &book.cache : nullptr);
    book.s = logits.unaryExpr([](S v) { return sigmoid(v); });
    const S A = static_cast<S>(model.amplitude);
    if (hard) {
        book.chips = book.s.unaryExpr([A](S v) { return v >= S(0.5) ? A : -A; });
    } else {
        book.chips = (A * (S(2) * book.s.array() - S(1))).matrix();
    }
    return book;
}

/// Chips one user transmits for a 1-based message.
template <typename S>
RealVec encode_user(const Model<S>& model, int message, bool hard = true) {
    if (message < 1 || message > model.n()) fail(Errc::MessageOutOfRange, "message " + std::to_string(message));
    const auto book = encode_all(model, hard);
    RealVec out(static_cast<std::size_t>(model.chip_count()));
    for (int i = 0; i < model.chip_count(); ++i) out[static_cast<std::size_t>(i)] = static_cast<double>(book.chips(i, message - 1));
    return out;
}

template <typename S>
std::vector<double> decoder_scores(const Model<S>& model, std::span<const double> chips) {
    using Mat = typename Model<S>::Mat;
    if (static_cast<int>(chips.size()) != model.chip_count()) fail(Errc::LengthMismatch, "decoder input length");
    Mat x(model.chip_count(), 1);
    for (int i = 0; i < model.chip_count(); ++i) x(i, 0) = static_cast<S>(chips[static_cast<std::size_t>(i)]);
    const Mat logits = model.decoder.forward_logits(x);
    std::vector<double> out(static_cast<std::size_t>(model.n()));
    for (int j = 0; j < model.n(); ++j) out[static_cast<std::size_t>(j)] = static_cast<double>(sigmoid(logits(j, 0)));
    return out;
}

/// Sum of encoded users plus AWGN, through the decoder.
template <typename S>
std::vector<double> system_forward(const Model<S>& model, std::span<const int> messages, double noise_var, Rng& rng,
                                   bool hard = true) {
    if (static_cast<int>(messages.size()) > model.T) fail(Errc::InvalidArgument, "more users than T");
    const auto book = encode_all(model, hard);
    RealVec y(static_cast<std::size_t>(model.chip_count()), 0.0);
    for (int m : messages) {
        if (m < 1 || m > model.n()) fail(Errc::MessageOutOfRange, "message " + std::to_string(m));
        for (int i = 0; i < model.chip_count(); ++i) y[static_cast<std::size_t>(i)] += static_cast<double>(book.chips(i, m - 1));
    }
    add_noise_inplace(y, noise_var, rng);
    return decoder_scores(model, y);
}

/// Indices scoring above the threshold; more than T detections is a failure.
inline DecodedSet threshold_scores(const std::vector<double>& scores, int T, double threshold) {
    DecodedSet d;
    for (std::size_t j = 0; j < scores.size(); ++j)
        if (scores[j] > threshold) d.messages.push_back(static_cast<int>(j) + 1);
    d.detected_count = static_cast<int>(d.messages.size());
    d.status = d.detected_count > T ? DecodeStatus::DecodeFailure : DecodeStatus::Success;
    return d;
}

template <typename S>
DecodedSet dl_detect(const Model<S>& model, const ReceivedBlock& block, double threshold = 0.5) {
    if (!(threshold > 0 && threshold < 1)) fail(Errc::InvalidArgument, "threshold must be in (0,1)");
    return threshold_scores(decoder_scores(model, block.chips), model.T, threshold);
}


// ---------------------------------------------------------------------------
// Loss

/// Per-example weight = by_users[L] * by_ebn0[EbN0]; missing keys weigh 1.
struct LossWeights {
    std::map<int, double> by_users;
    std::map<double, double> by_ebn0;

    double operator()(int users, double ebn0_db) const {
        double w = 1.0;
        if (auto it = by_users.find(users); it != by_users.end()) w *= it->second;
        if (auto it = by_ebn0.find(ebn0_db); it != by_ebn0.end()) w *= it->second;
        return w;
    }

    /// Users 3 and 4 weighted 10 and 20, the 12 dB loss weighted 4.
    static LossWeights error_floor_preset() { return LossWeights{{{3, 10.0}, {4, 20.0}}, {{12.0, 4.0}}}; }
};

struct Example {
    std::vector<int> messages;
    double ebn0_db = 8.0;
};

/// One batch with its frozen channel noise (chip_count x B, already scaled).
template <typename S>
struct Batch {
    std::vector<Example> examples;
    typename Model<S>::Mat noise;
};

template <typename S>
struct Gradients {
    std::vector<typename Mlp<S>::Layer> encoder;
    std::vector<typename Mlp<S>::Layer> decoder;
};

template <typename S>
struct BatchResult {
    double loss = 0;                  // (1/B) sum_e w_e * l_e
    std::vector<double> example_loss; // unweighted l_e (mean BCE over n outputs)
    std::vector<double> weights;
};

inline double bce_with_logit(double logit, double target) {
    // softplus(z) - t z, stable for large |z|
    const double sp = logit > 0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
    return sp - target * logit;
}

/// Weighted multi-label BCE on a batch; fills gradients when requested.
template <typename S>
BatchResult<S> batch_loss(const Model<S>& model, const Batch<S>& batch, const LossWeights& weights,
                          std::type_identity_t<Gradients<S>>* grads) {
    using Mat = typename Model<S>::Mat;
    const int n = model.n();
    const int m = model.chip_count();
    const auto B = static_cast<Eigen::Index>(batch.examples.size());
    const auto book = encode_all(model, false, grads != nullptr);

    Mat rx = batch.noise;
    for (Eigen::Index e = 0; e < B; ++e)
        for (int msg : batch.examples[static_cast<std::size_t>(e)].messages) rx.col(e) += book.chips.col(msg - 1);

    typename Mlp<S>::Cache dcache;
    const Mat logits = model.decoder.forward_logits(rx, grads ? &dcache : nullptr);

    BatchResult<S> res;
    res.example_loss.resize(static_cast<std::size_t>(B));
    res.weights.resize(static_cast<std::size_t>(B));
    Mat dlogits(n, B);
    for (Eigen::Index e = 0; e < B; ++e) {
        const auto& ex = batch.examples[static_cast<std::size_t>(e)];
        const double w = weights(static_cast<int>(ex.messages.size()), ex.ebn0_db);
        double l = 0;
        for (int j = 0; j < n; ++j) {
            const bool on = std::find(ex.messages.begin(), ex.messages.end(), j + 1) != ex.messages.end();
            const double z = static_cast<double>(logits(j, e));
            l += bce_with_logit(z, on ? 1.0 : 0.0);
            dlogits(j, e) = static_cast<S>(w * (sigmoid(z) - (on ? 1.0 : 0.0)) / (static_cast<double>(B) * n));
        }
        l /= n;
        res.example_loss[static_cast<std::size_t>(e)] = l;
        res.weights[static_cast<std::size_t>(e)] = w;
        res.loss += w * l;
    }
    res.loss /= static_cast<double>(B);
    if (!grads) return res;

    const Mat drx = model.decoder.backward(dcache, dlogits, grads->decoder);

    // Scatter back to per-message chip gradients.
    Mat dchips = Mat::Zero(m, n);
    for (Eigen::Index e = 0; e < B; ++e)
        for (int msg : batch.examples[static_cast<std::size_t>(e)].messages) dchips.col(msg - 1) += drx.col(e);

    // x = A(2s-1), s = sigmoid(logit)
    const S twoA = static_cast<S>(2 * model.amplitude);
    const Mat dlog_enc = (twoA * dchips.array() * book.s.array() * (S(1) - book.s.array())).matrix();
    model.encoder.backward(book.cache, dlog_enc, grads->encoder);
    return res;
}

template <typename S>
Gradients<S> zero_gradients(const Model<S>& model) {
    return {model.encoder.zero_grads(), model.decoder.zero_grads()};
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename S>
class Adam {
public:
    Adam(const Model<S>& model, AdamConfig cfg) : cfg_(cfg), m_(zero_gradients(model)), v_(zero_gradients(model)) {}

    void step(Model<S>& model, const Gradients<S>& g) {
        ++t_;
        const double bc1 = 1 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1 - std::pow(cfg_.beta2, static_cast<double>(t_));
        apply(model.encoder.layers(), g.encoder, m_.encoder, v_.encoder, bc1, bc2);
        apply(model.decoder.layers(), g.decoder, m_.decoder, v_.decoder, bc1, bc2);
    }

    long steps() const noexcept { return t_; }

private:
    template <typename P>
    void update(P& p, const P& g, P& m, P& v, double bc1, double bc2) {
        const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
        m = b1 * m + (S(1) - b1) * g;
        v = b2 * v + (S(1) - b2) * g.cwiseProduct(g);
        const S lr = static_cast<S>(cfg_.learning_rate);
        const S eps = static_cast<S>(cfg_.epsilon);
        p.array() -= lr * (m.array() / static_cast<S>(bc1)) / ((v.array() / static_cast<S>(bc2)).sqrt() + eps);
    }

    void apply(std::vector<typename Mlp<S>::Layer>& params, const std::vector<typename Mlp<S>::Layer>& g,
               std::vector<typename Mlp<S>::Layer>& m, std::vector<typename Mlp<S>::Layer>& v, double bc1, double bc2) {
        for (std::size_t l = 0; l < params.size(); ++l) {
            update(params[l].W, g[l].W, m[l].W, v[l].W, bc1, bc2);
            update(params[l].b, g[l].b, m[l].b, v[l].b, bc1, bc2);
        }
    }

    AdamConfig cfg_;
    Gradients<S> m_, v_;
    long t_ = 0;
};

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    AdamConfig adam;
    int epochs = 200;
    int minibatch = 256;
    int train_size = 20000;
    int val_size = 2000;
    std::vector<double> train_ebn0_db = {8.0};
    LossWeights loss_weights;
    std::uint64_t seed = 1;

    void validate() const {
        if (epochs <= 0 || minibatch <= 0 || train_size <= 0 || val_size <= 0)
            fail(Errc::ConfigError, "training sizes must be positive");
        if (train_ebn0_db.empty()) fail(Errc::ConfigError, "need at least one training Eb/N0");
        for (const auto& [k, w] : loss_weights.by_users)
            if (!(w > 0)) fail(Errc::ConfigError, "loss weights must be positive");
        for (const auto& [k, w] : loss_weights.by_ebn0)
            if (!(w > 0)) fail(Errc::ConfigError, "loss weights must be positive");
    }

    /// Hidden 4x256, 2e4 training / 2e3 validation examples, 200 epochs of 256.
    static TrainConfig desk_scale() { return TrainConfig{}; }

    /// Hidden 4x2048, 2e5 / 1e4 examples, 1000 epochs, minibatch 1e5.
    static TrainConfig full_scale() {
        TrainConfig c;
        c.epochs = 1000;
        c.minibatch = 100000;
        c.train_size = 200000;
        c.val_size = 10000;
        return c;
    }
};

inline std::vector<int> desk_hidden() { return {256, 256, 256, 256}; }
inline std::vector<int> full_hidden() { return {2048, 2048, 2048, 2048}; }

struct EpochLoss {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
};

inline std::vector<int> draw_distinct(Rng& rng, int n, int count) {
    std::uniform_int_distribution<int> pick(1, n);
    std::vector<int> s;
    while (static_cast<int>(s.size()) < count) {
        const int m = pick(rng);
        if (std::find(s.begin(), s.end(), m) == s.end()) s.push_back(m);
    }
    std::sort(s.begin(), s.end());
    return s;
}

/// L uniform on {1..T}, messages distinct and uniform.
inline std::vector<int> draw_active_set(Rng& rng, int n, int T) {
    std::uniform_int_distribution<int> users(1, T);
    return draw_distinct(rng, n, users(rng));
}

template <typename S>
typename Model<S>::Mat draw_noise(const Model<S>& model, const std::vector<Example>& ex, Rng& rng) {
    typename Model<S>::Mat noise(model.chip_count(), static_cast<Eigen::Index>(ex.size()));
    for (std::size_t e = 0; e < ex.size(); ++e) {
        const double var = ebn0_to_noise_var(ex[e].ebn0_db, model.amplitude, model.T, model.rate);
        std::normal_distribution<double> g(0.0, std::sqrt(var));
        for (int i = 0; i < model.chip_count(); ++i) noise(i, static_cast<Eigen::Index>(e)) = static_cast<S>(var > 0 ? g(rng) : 0.0);
    }
    return noise;
}

template <typename S>
double evaluate_loss(const Model<S>& model, const Batch<S>& batch, const LossWeights& w, int chunk = 1024) {
    double total = 0;
    const auto N = batch.examples.size();
    for (std::size_t start = 0; start < N; start += static_cast<std::size_t>(chunk)) {
        const std::size_t end = std::min(N, start + static_cast<std::size_t>(chunk));
        Batch<S> sub;
        sub.examples.assign(batch.examples.begin() + static_cast<long>(start), batch.examples.begin() + static_cast<long>(end));
        sub.noise = batch.noise.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start));
        total += batch_loss(model, sub, w, nullptr).loss * static_cast<double>(end - start);
    }
    return total / static_cast<double>(N);
}

/// Minibatch Adam on the (weighted) BCE. The training message sets are
/// fixed; channel noise is redrawn every epoch. Validation uses frozen noise.
template <typename S, typename Progress>
std::vector<EpochLoss> train(Model<S>& model, const TrainConfig& cfg, Progress&& progress) {
    cfg.validate();
    const int n = model.n();
    Rng data_rng = make_stream(cfg.seed, {0xDA7A});
    std::vector<Example> train_set(static_cast<std::size_t>(cfg.train_size));
    for (std::size_t e = 0; e < train_set.size(); ++e) {
        train_set[e].messages = draw_active_set(data_rng, n, model.T);
        train_set[e].ebn0_db = cfg.train_ebn0_db[e % cfg.train_ebn0_db.size()];
    }
    Batch<S> val;
    val.examples.resize(static_cast<std::size_t>(cfg.val_size));
    Rng val_rng = make_stream(cfg.seed, {0x7A1});
    for (std::size_t e = 0; e < val.examples.size(); ++e) {
        val.examples[e].messages = draw_active_set(val_rng, n, model.T);
        val.examples[e].ebn0_db = cfg.train_ebn0_db[e % cfg.train_ebn0_db.size()];
    }
    val.noise = draw_noise(model, val.examples, val_rng);

    Adam<S> opt(model, cfg.adam);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<EpochLoss> trace;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng ep_rng = make_stream(cfg.seed, {0xE90C, static_cast<std::uint64_t>(epoch)});
        std::shuffle(order.begin(), order.end(), ep_rng);
        double sum = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.minibatch)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.minibatch));
            Batch<S> b;
            for (std::size_t i = start; i < end; ++i) b.examples.push_back(train_set[order[i]]);
            b.noise = draw_noise(model, b.examples, ep_rng);
            auto g = zero_gradients(model);
            const auto r = batch_loss(model, b, cfg.loss_weights, &g);
            if (!std::isfinite(r.loss)) fail(Errc::DivergenceDetected, "non-finite loss at epoch " + std::to_string(epoch));
            opt.step(model, g);
            sum += r.loss * static_cast<double>(end - start);
        }
        EpochLoss el{epoch, sum / static_cast<double>(order.size()), evaluate_loss(model, val, cfg.loss_weights)};
        if (!std::isfinite(el.val_loss)) fail(Errc::DivergenceDetected, "non-finite validation loss");
        trace.push_back(el);
        progress(el);
    }
    return trace;
}

template <typename S>
std::vector<EpochLoss> train(Model<S>& model, const TrainConfig& cfg) {
    return train(model, cfg, [](const EpochLoss&) {});
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradCheckResult {
    double max_rel_error = 0;
    std::size_t checked = 0;
};

/// Relative error |a-f| / max(|a|, |f|, floor); the floor keeps gradients
/// that are zero on both sides from dividing 0 by 0.
inline double relative_error(double a, double f, double floor = 1e-6) {
    return std::abs(a - f) / std::max({std::abs(a), std::abs(f), floor});
}

inline GradCheckResult gradient_check(Model<double>& model, const Batch<double>& batch, const LossWeights& w,
                                      double eps = 1e-5) {
    auto g = zero_gradients(model);
    batch_loss(model, batch, w, &g);
    GradCheckResult res;
    auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + eps;
        const double up = batch_loss(model, batch, w, nullptr).loss;
        param = saved - eps;
        const double down = batch_loss(model, batch, w, nullptr).loss;
        param = saved;
        res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic, (up - down) / (2 * eps)));
        ++res.checked;
    };
    auto sweep = [&](Mlp<double>& net, std::vector<Mlp<double>::Layer>& gl) {
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            auto& L = net.layers()[l];
            for (Eigen::Index i = 0; i < L.W.size(); ++i) probe(L.W.data()[i], gl[l].W.data()[i]);
            for (Eigen::Index i = 0; i < L.b.size(); ++i) probe(L.b.data()[i], gl[l].b.data()[i]);
        }
    };
    sweep(model.encoder, g.encoder);
    sweep(model.decoder, g.decoder);
    return res;
}

// ---------------------------------------------------------------------------
// Checkpoints: one JSON header line, then raw little-endian weights
// (per layer, encoder first: W column-major, then b).

template <typename S>
void save_checkpoint(const Model<S>& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::FileError, "cannot write " + path);
    nlohmann::json h;
    h["format"] = "gfnoma-dl";
    h["version"] = 1;
    h["scalar"] = sizeof(S) == 4 ? "f32" : "f64";
    h["k"] = model.k;
    h["T"] = model.T;
    h["rate"] = model.rate;
    h["amplitude"] = model.amplitude;
    h["seed"] = model.seed;
    h["encoder"] = model.encoder.spec().widths;
    h["decoder"] = model.decoder.spec().widths;
    out << h.dump() << '\n';
    auto dump = [&](const Mlp<S>& net) {
        for (const auto& L : net.layers()) {
            out.write(reinterpret_cast<const char*>(L.W.data()), static_cast<std::streamsize>(sizeof(S) * L.W.size()));
            out.write(reinterpret_cast<const char*>(L.b.data()), static_cast<std::streamsize>(sizeof(S) * L.b.size()));
        }
    };
    dump(model.encoder);
    dump(model.decoder);
    if (!out) fail(Errc::FileError, "write failed for " + path);
}

template <typename S>
Model<S> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::CheckpointMissing, "cannot open " + path);
    std::string line;
    std::getline(in, line);
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
        fail(Errc::FileError, "bad checkpoint header: " + std::string(e.what()));
    }
    if (h.value("format", "") != "gfnoma-dl" || h.value("version", 0) != 1)
        fail(Errc::FileError, "unsupported checkpoint format");
    if (h.value("scalar", "") != (sizeof(S) == 4 ? "f32" : "f64")) fail(Errc::FileError, "checkpoint scalar type mismatch");
    Model<S> m;
    m.k = h.at("k");
    m.T = h.at("T");
    m.rate = h.at("rate");
    m.amplitude = h.at("amplitude");
    m.seed = h.at("seed");
    m.encoder = Mlp<S>(MlpSpec{h.at("encoder").get<std::vector<int>>()});
    m.decoder = Mlp<S>(MlpSpec{h.at("decoder").get<std::vector<int>>()});
    auto load = [&](Mlp<S>& net) {
        for (auto& L : net.layers()) {
            in.read(reinterpret_cast<char*>(L.W.data()), static_cast<std::streamsize>(sizeof(S) * L.W.size()));
            in.read(reinterpret_cast<char*>(L.b.data()), static_cast<std::streamsize>(sizeof(S) * L.b.size()));
        }
    };
    load(m.encoder);
    load(m.decoder);
    if (!in) fail(Errc::FileError, "truncated checkpoint " + path);
    return m;
}

} // namespace gfnoma::nn
