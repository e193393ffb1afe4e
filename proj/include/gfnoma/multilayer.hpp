#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gfnoma/detectors.hpp"
#include "gfnoma/error.hpp"
#include "gfnoma/phy.hpp"
#include "gfnoma/rng.hpp"

namespace gfnoma::ml {

inline constexpr int kMaxLayers = 4;

enum class Detector { Bma, Mld };

/// Received power per layer, strongest first. Every layer uses the same
/// signature code and supports up to T users.
struct LayerPlan {
    std::vector<double> powers;
    double p_max = std::numeric_limits<double>::infinity();

    int layers() const noexcept { return static_cast<int>(powers.size()); }
    double amplitude(int layer) const { return std::sqrt(powers.at(static_cast<std::size_t>(layer - 1))); }

    void validate() const {
        if (powers.empty() || powers.size() > kMaxLayers)
            fail(Errc::InvalidArgument, "layer count must be in [1," + std::to_string(kMaxLayers) + "]");
        for (std::size_t j = 0; j < powers.size(); ++j) {
            if (!(powers[j] > 0)) fail(Errc::InvalidArgument, "layer powers must be positive");
            if (powers[j] > p_max) fail(Errc::InvalidArgument, "layer power exceeds P_max");
            if (j > 0 && !(powers[j] < powers[j - 1])) fail(Errc::InvalidArgument, "layer powers must be strictly descending");
        }
    }
};

struct SicOptions {
    Detector detector = Detector::Bma;
    BmaOptions bma;
    double mld_budget = kDefaultMldBudget;
};

/// Decode layers strongest first. Undecoded weaker layers are treated as
/// extra Gaussian noise of variance P_i T / 2 each; a decoded layer is
/// resynthesised and subtracted, a failed one is left in place.
inline std::vector<DecodedSet> sic_receive(const ReceivedBlock& block, const LayerPlan& plan, const CodedSystem& sys,
                                           const SicOptions& opts = {}) {
    plan.validate();
    if (block.length() != sys.chip_len()) fail(Errc::LengthMismatch, "block length does not match code");
    const int J = plan.layers();
    const int T = sys.code().capability();
    std::vector<DecodedSet> out;
    ReceivedBlock residual = block;
    for (int j = 1; j <= J; ++j) {
        double interference = 0;
        for (int i = j + 1; i <= J; ++i) interference += plan.powers[static_cast<std::size_t>(i - 1)] * T / 2.0;
        residual.amplitude = plan.amplitude(j);
        residual.noise_var = block.noise_var + interference;
        DecodedSet d = opts.detector == Detector::Bma ? joint_activity_bma(residual, sys, opts.bma)
                                                      : mld_decode(residual, sys, T, opts.mld_budget);
        if (d.ok()) {
            const double a = plan.amplitude(j);
            for (int m : d.messages) {
                const auto& u = sys.bank().unit_chips(m);
                for (std::size_t c = 0; c < residual.chips.size(); ++c) residual.chips[c] -= a * u[c];
            }
        }
        out.push_back(std::move(d));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Power allocation by grid search

struct GridRow {
    std::vector<double> powers;
    std::vector<double> bler; // per layer
    double minmax = 0;
};

struct PowerSearchResult {
    LayerPlan plan;
    double minmax_bler = 0;
    std::vector<GridRow> grid;
};

struct PowerSearchOptions {
    int levels = 32;
    double dynamic_range_db = 30.0; // lowest grid level = P_max / 10^(range/10)
    int trials = 200;
    std::uint64_t seed = 1;
    SicOptions sic;
};

/// Monte Carlo per-layer BLER of a plan with `load[j]` distinct users on
/// layer j. Trial t always uses stream (seed, t), so plans evaluated with the
/// same seed see the same messages and the same unit-variance noise.
inline std::vector<double> layer_bler(const LayerPlan& plan, const std::vector<int>& load, double noise_var,
                                      const CodedSystem& sys, int trials, std::uint64_t seed, const SicOptions& sic = {}) {
    const int J = plan.layers();
    if (static_cast<int>(load.size()) != J) fail(Errc::InvalidArgument, "need one load entry per layer");
    const int n = sys.code().n();
    std::vector<long> errors(static_cast<std::size_t>(J), 0);
    const double sigma = std::sqrt(noise_var);
    for (int t = 0; t < trials; ++t) {
        Rng rng = make_stream(seed, {0x5EED1A, static_cast<std::uint64_t>(t)});
        std::vector<std::vector<int>> msgs(static_cast<std::size_t>(J));
        RealVec y(sys.chip_len(), 0.0);
        for (int j = 0; j < J; ++j) {
            std::uniform_int_distribution<int> pick(1, n);
            auto& s = msgs[static_cast<std::size_t>(j)];
            while (static_cast<int>(s.size()) < load[static_cast<std::size_t>(j)]) {
                const int m = pick(rng);
                if (std::find(s.begin(), s.end(), m) == s.end()) s.push_back(m);
            }
            sys.bank().add_to(y, s, plan.amplitude(j + 1));
        }
        std::normal_distribution<double> g(0.0, 1.0);
        for (auto& c : y) c += sigma * g(rng);
        const auto dec = sic_receive(ReceivedBlock{std::move(y), plan.amplitude(1), noise_var}, plan, sys, sic);
        for (int j = 0; j < J; ++j)
            for (int m : msgs[static_cast<std::size_t>(j)])
                errors[static_cast<std::size_t>(j)] += !(dec[static_cast<std::size_t>(j)].ok() && dec[static_cast<std::size_t>(j)].contains(m));
    }
    std::vector<double> bler(static_cast<std::size_t>(J), 0.0);
    for (int j = 0; j < J; ++j) {
        const int l = load[static_cast<std::size_t>(j)];
        bler[static_cast<std::size_t>(j)] = l > 0 ? static_cast<double>(errors[static_cast<std::size_t>(j)]) / (static_cast<double>(trials) * l) : 0.0;
    }
    return bler;
}

inline std::vector<double> power_grid(double p_max, int levels, double dynamic_range_db) {
    std::vector<double> g;
    for (int i = 0; i < levels; ++i) {
        const double frac = levels > 1 ? static_cast<double>(i) / (levels - 1) : 0.0;
        g.push_back(p_max * std::pow(10.0, -dynamic_range_db * frac / 10.0));
    }
    return g;
}

/// Exhaustive search of descending power tuples on a geometric grid for
/// the smallest worst-layer BLER; ties go to the lower total power.
inline PowerSearchResult optimize_power_allocation(int J, double p_max, double noise_var, const std::vector<int>& load,
                                                   const CodedSystem& sys, const PowerSearchOptions& opts = {}) {
    if (J < 1 || J > 2) fail(Errc::InvalidArgument, "power search supports one or two layers");
    if (!(p_max > 0)) fail(Errc::InvalidArgument, "P_max must be positive");
    if (static_cast<int>(load.size()) != J) fail(Errc::InvalidArgument, "need one load entry per layer");
    const auto grid = power_grid(p_max, opts.levels, opts.dynamic_range_db);

    std::vector<std::vector<double>> candidates;
    if (J == 1) {
        for (double p : grid) candidates.push_back({p});
    } else {
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (std::size_t j = i + 1; j < grid.size(); ++j)
                if (grid[j] < grid[i]) candidates.push_back({grid[i], grid[j]});
    }
    if (candidates.empty()) fail(Errc::InfeasibleGrid, "no grid point satisfies the power ordering");

    PowerSearchResult res;
    double best_total = std::numeric_limits<double>::infinity();
    res.minmax_bler = std::numeric_limits<double>::infinity();
    for (const auto& powers : candidates) {
        LayerPlan plan{powers, p_max};
        GridRow row{powers, layer_bler(plan, load, noise_var, sys, opts.trials, opts.seed, opts.sic), 0.0};
        row.minmax = *std::max_element(row.bler.begin(), row.bler.end());
        double total = 0;
        for (double p : powers) total += p;
        if (row.minmax < res.minmax_bler || (row.minmax == res.minmax_bler && total < best_total)) {
            res.minmax_bler = row.minmax;
            res.plan = plan;
            best_total = total;
        }
        res.grid.push_back(std::move(row));
    }
    return res;
}

// ---------------------------------------------------------------------------
// User-side layer selection

struct UserState {
    double channel_gain = 1.0; // linear power gain
    double p_max_tx = 1.0;
};

enum class SelectionPolicy { ChannelBased, Random };

struct SelectionOptions {
    /// ChannelBased picks the strongest affordable layer; with this flag set
    /// it picks the weakest affordable one instead.
    bool literal_least_power = false;
    /// Random policy weights per layer (renormalised over feasible layers;
    /// uniform when empty or all feasible weights are zero).
    std::vector<double> probabilities;
};

/// Feasible layers need P_j / g <= p_max_tx. Returns a 1-based layer, or
/// nullopt for outage.
inline std::optional<int> select_layer(SelectionPolicy policy, const UserState& user, const LayerPlan& plan,
                                       const SelectionOptions& opts, Rng& rng) {
    if (!(user.channel_gain > 0) || !(user.p_max_tx > 0)) fail(Errc::InvalidArgument, "gain and p_max_tx must be positive");
    std::vector<int> feasible;
    for (int j = 1; j <= plan.layers(); ++j)
        if (plan.powers[static_cast<std::size_t>(j - 1)] / user.channel_gain <= user.p_max_tx) feasible.push_back(j);
    if (feasible.empty()) return std::nullopt;
    if (policy == SelectionPolicy::ChannelBased) return opts.literal_least_power ? feasible.back() : feasible.front();

    std::vector<double> w;
    double total = 0;
    for (int j : feasible) {
        const double p = static_cast<std::size_t>(j - 1) < opts.probabilities.size() ? opts.probabilities[static_cast<std::size_t>(j - 1)] : 0.0;
        w.push_back(p);
        total += p;
    }
    if (!(total > 0)) std::fill(w.begin(), w.end(), 1.0);
    std::discrete_distribution<int> pick(w.begin(), w.end());
    return feasible[static_cast<std::size_t>(pick(rng))];
}

inline std::optional<int> select_layer(SelectionPolicy policy, const UserState& user, const LayerPlan& plan) {
    Rng unused(0);
    if (policy == SelectionPolicy::Random) fail(Errc::InvalidArgument, "random policy needs an RNG stream");
    return select_layer(policy, user, plan, SelectionOptions{}, unused);
}

// ---------------------------------------------------------------------------
// Round-level simulation

enum class Fading { Rayleigh, None };

struct RoundConfig {
    double arrival_rate = 1.0; // Poisson mean users per round
    double p_max_tx = 1.0;
    Fading fading = Fading::Rayleigh;
    SelectionPolicy policy = SelectionPolicy::ChannelBased;
    SelectionOptions selection;
    double noise_var = 0.0;
    int rounds = 1000;
    std::uint64_t seed = 1;
    SicOptions sic;
};

struct MultilayerMetrics {
    long rounds = 0;
    long arrivals = 0;
    long outages = 0;
    std::vector<long> transmitted; // per layer
    std::vector<long> errors;      // per layer
    long recovered = 0;

    double outage_probability() const {
        return arrivals > 0 ? static_cast<double>(outages) / static_cast<double>(arrivals) : std::numeric_limits<double>::quiet_NaN();
    }
    double goodput() const { return rounds > 0 ? static_cast<double>(recovered) / static_cast<double>(rounds) : 0.0; }
    /// NaN when nothing was sent on the layer.
    double bler(int layer) const {
        const auto i = static_cast<std::size_t>(layer - 1);
        return transmitted[i] > 0 ? static_cast<double>(errors[i]) / static_cast<double>(transmitted[i])
                                  : std::numeric_limits<double>::quiet_NaN();
    }
};

inline MultilayerMetrics simulate_multilayer_round(const LayerPlan& plan, const CodedSystem& sys, const RoundConfig& cfg) {
    plan.validate();
    if (cfg.arrival_rate < 0) fail(Errc::InvalidArgument, "arrival rate must be >= 0");
    const int J = plan.layers();
    const int n = sys.code().n();
    MultilayerMetrics out;
    out.rounds = cfg.rounds;
    out.transmitted.assign(static_cast<std::size_t>(J), 0);
    out.errors.assign(static_cast<std::size_t>(J), 0);
    for (int r = 0; r < cfg.rounds; ++r) {
        Rng rng = make_stream(cfg.seed, {0x7011D, static_cast<std::uint64_t>(r)});
        std::poisson_distribution<int> arrivals(cfg.arrival_rate);
        std::exponential_distribution<double> rayleigh_power(1.0);
        std::uniform_int_distribution<int> pick(1, n);
        const int users = cfg.arrival_rate > 0 ? arrivals(rng) : 0;
        out.arrivals += users;
        std::vector<std::vector<int>> sent(static_cast<std::size_t>(J));
        for (int u = 0; u < users; ++u) {
            const UserState st{cfg.fading == Fading::Rayleigh ? rayleigh_power(rng) : 1.0, cfg.p_max_tx};
            const auto layer = select_layer(cfg.policy, st, plan, cfg.selection, rng);
            const int msg = pick(rng);
            if (!layer) {
                ++out.outages;
                continue;
            }
            sent[static_cast<std::size_t>(*layer - 1)].push_back(msg);
        }
        bool any = false;
        for (const auto& s : sent) any = any || !s.empty();
        if (!any) continue;

        RealVec y(sys.chip_len(), 0.0);
        for (int j = 0; j < J; ++j) sys.bank().add_to(y, sent[static_cast<std::size_t>(j)], plan.amplitude(j + 1));
        add_noise_inplace(y, cfg.noise_var, rng);
        const auto dec = sic_receive(ReceivedBlock{std::move(y), plan.amplitude(1), cfg.noise_var}, plan, sys, cfg.sic);
        for (int j = 0; j < J; ++j) {
            const auto& d = dec[static_cast<std::size_t>(j)];
            for (int m : sent[static_cast<std::size_t>(j)]) {
                ++out.transmitted[static_cast<std::size_t>(j)];
                const bool ok = d.ok() && d.contains(m);
                out.errors[static_cast<std::size_t>(j)] += !ok;
                out.recovered += ok;
            }
        }
    }
    return out;
}

} // namespace gfnoma::ml
