// gfnoma command line: thin wrappers around the library with JSON configs.

#include <CLI11.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gfnoma/detectors.hpp"
#include "gfnoma/galois.hpp"
#include "gfnoma/harness.hpp"
#include "gfnoma/multilayer.hpp"
#include "gfnoma/neural.hpp"
#include "gfnoma/signatures.hpp"
#include "gfnoma/sysim.hpp"

namespace fs = std::filesystem;
using namespace gfnoma;
using harness::json;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string out = "./results";
};

json load_config(const Globals& g, bool required) {
    if (g.config.empty()) {
        if (required) fail(Errc::ConfigError, "this command needs --config <file>");
        return json::object();
    }
    return harness::read_json_file(g.config);
}

template <typename T>
T get(const json& j, const char* key, T fallback) {
    try {
        return j.value(key, fallback);
    } catch (const json::exception& e) {
        fail(Errc::ConfigError, std::string("config key '") + key + "': " + e.what());
    }
}

std::string out_path(const Globals& g, const std::string& name) {
    std::error_code ec;
    fs::create_directories(g.out, ec);
    return (fs::path(g.out) / name).string();
}

CodedSystem system_from(const json& j) {
    const json code = j.contains("code") ? j.at("code") : json::object();
    const int k = get(code, "k", 6);
    const int T = get(code, "T", 4);
    const auto poly = get<std::uint32_t>(code, "primitive_poly", 0);
    const double rate = get(j, "outer_rate", 1.0);
    if (rate != 1.0 && rate != 0.5) fail(Errc::ConfigError, "outer_rate must be 1 or 0.5");
    FieldTables f = poly ? FieldTables(k, poly) : FieldTables(k);
    return CodedSystem(build_signature_code(f, T), rate == 1.0 ? OuterCode::uncoded() : OuterCode::conv_171_133());
}

std::string join(const std::vector<int>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

// ---------------------------------------------------------------------------

int cmd_field_check(int k_min, int k_max) {
    bool all_ok = true;
    std::cout << " k  poly     order   tables  mul/inv\n";
    for (int k = k_min; k <= k_max; ++k) {
        bool ok = true;
        std::string tables = "ok", arith = "skipped";
        try {
            const FieldTables f(k);
            for (std::uint32_t i = 0; i < f.order() && ok; ++i) ok = f.log(f.exp(i)) == i;
            if (!ok) tables = "FAIL";
            if (k <= 8) {
                bool good = true;
                for (gf_elem a = 1; a < f.size() && good; ++a) {
                    good = f.mul(a, f.inv(a)) == 1;
                    for (gf_elem b = 0; b < f.size() && good; ++b) {
                        // shift-and-add reference product
                        std::uint32_t r = 0, x = a, y = b;
                        while (y) {
                            if (y & 1) r ^= x;
                            y >>= 1;
                            x <<= 1;
                            if (x & f.size()) x ^= f.primitive_poly();
                        }
                        good = f.mul(a, b) == r;
                    }
                }
                arith = good ? "ok" : "FAIL";
                ok = ok && good;
            }
            std::cout << std::setw(2) << k << "  0x" << std::hex << std::setw(5) << std::left << f.primitive_poly() << std::dec
                      << std::right << "  " << std::setw(6) << f.order() << "  " << std::setw(6) << tables << "  " << arith << '\n';
        } catch (const Error& e) {
            ok = false;
            std::cout << std::setw(2) << k << "  error: " << e.what() << '\n';
        }
        all_ok = all_ok && ok;
    }
    std::cout << (all_ok ? "field-check: all fields ok\n" : "field-check: FAILED\n");
    return all_ok ? 0 : 2;
}

int cmd_bler(const Globals& g) {
    auto cfg = harness::parse_scenario(load_config(g, true));
    if (g.seed) cfg.seed = *g.seed;
    if (g.workers) cfg.workers = *g.workers;
    cfg.validate();
    const auto table = harness::run_bler_sweep(cfg);
    const auto csv = out_path(g, cfg.scenario_id + ".csv");
    harness::write_text(csv, harness::bler_csv(cfg, table));
    const auto script = harness::emit_plot_script(csv);
    std::cout << "detector  EbN0   L  trials    errors  bler\n";
    for (const auto& p : table)
        std::cout << std::left << std::setw(9) << p.detector << std::right << std::setw(5) << harness::format_db(p.ebn0_db)
                  << std::setw(4) << p.active_users << std::setw(8) << p.trials << std::setw(10) << p.message_errors << "  "
                  << p.bler << '\n';
    std::cout << "wrote " << csv << "\nplot script " << script << '\n';
    return 0;
}

nn::LossWeights parse_weights(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "error_floor") return nn::LossWeights::error_floor_preset();
        if (j.get<std::string>() == "none") return {};
        fail(Errc::ConfigError, "unknown loss_weights preset " + j.get<std::string>());
    }
    nn::LossWeights w;
    try {
        if (j.contains("by_users"))
            for (const auto& [key, v] : j.at("by_users").items()) w.by_users[std::stoi(key)] = v.get<double>();
        if (j.contains("by_ebn0"))
            for (const auto& [key, v] : j.at("by_ebn0").items()) w.by_ebn0[std::stod(key)] = v.get<double>();
    } catch (const std::exception& e) {
        fail(Errc::ConfigError, std::string("loss_weights: ") + e.what());
    }
    return w;
}

int cmd_train(const Globals& g) {
    const json j = load_config(g, true);
    const std::string scale = get<std::string>(j, "scale", "desk");
    if (scale != "desk" && scale != "full") fail(Errc::ConfigError, "scale must be desk or full");
    nn::TrainConfig tc = scale == "full" ? nn::TrainConfig::full_scale() : nn::TrainConfig::desk_scale();
    std::vector<int> hidden = scale == "full" ? nn::full_hidden() : nn::desk_hidden();
    if (j.contains("hidden")) hidden = get(j, "hidden", hidden);
    const json code = j.contains("code") ? j.at("code") : json::object();
    const int k = get(code, "k", 6);
    const int T = get(code, "T", 4);
    const double rate = get(j, "outer_rate", 0.5);
    const double amplitude = get(j, "amplitude", 1.0);
    tc.epochs = get(j, "epochs", tc.epochs);
    tc.minibatch = get(j, "minibatch", tc.minibatch);
    tc.train_size = get(j, "train_size", tc.train_size);
    tc.val_size = get(j, "val_size", tc.val_size);
    tc.adam.learning_rate = get(j, "learning_rate", tc.adam.learning_rate);
    if (j.contains("train_ebn0_db")) {
        tc.train_ebn0_db.clear();
        for (const auto& v : j.at("train_ebn0_db")) tc.train_ebn0_db.push_back(harness::parse_db(v));
    }
    if (j.contains("loss_weights")) tc.loss_weights = parse_weights(j.at("loss_weights"));
    tc.seed = g.seed.value_or(get<std::uint64_t>(j, "seed", 1));
    tc.validate();
    if (k < 2 || k > 16 || T < 1 || !(rate > 0) || !(amplitude > 0)) fail(Errc::ConfigError, "bad code/rate/amplitude");

    auto model = nn::init_model<float>(k, T, rate, amplitude, hidden, tc.seed);
    const auto loss_csv = out_path(g, get<std::string>(j, "loss_csv", "train_loss.csv"));
    std::ostringstream log;
    log << "epoch,train_loss,val_loss\n";
    log.precision(10);
    const int every = std::max(1, tc.epochs / 20);
    nn::train(model, tc, [&](const nn::EpochLoss& e) {
        log << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
        if (e.epoch == 1 || e.epoch % every == 0 || e.epoch == tc.epochs)
            std::cout << "epoch " << e.epoch << "  train " << e.train_loss << "  val " << e.val_loss << std::endl;
    });
    const auto ckpt = out_path(g, get<std::string>(j, "checkpoint", "model.ckpt"));
    nn::save_checkpoint(model, ckpt);
    harness::write_text(loss_csv, log.str());
    std::cout << "wrote " << ckpt << " and " << loss_csv << '\n';
    return 0;
}

int cmd_detect(const Globals& g, const std::string& messages_flag) {
    const json j = load_config(g, false);
    const auto sys = system_from(j);
    const double amplitude = get(j, "amplitude", 1.0);
    std::vector<int> msgs = get(j, "messages", std::vector<int>{});
    if (!messages_flag.empty()) {
        msgs.clear();
        std::stringstream ss(messages_flag);
        for (std::string tok; std::getline(ss, tok, ',');) {
            try {
                msgs.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                fail(Errc::ConfigError, "bad --messages entry '" + tok + "'");
            }
        }
    }
    const double db = j.contains("ebn0_db") ? harness::parse_db(j.at("ebn0_db")) : std::numeric_limits<double>::infinity();
    const std::uint64_t seed = g.seed.value_or(get<std::uint64_t>(j, "seed", 1));
    const bool soft = get(j, "soft_viterbi", false);

    const double var = ebn0_to_noise_var(db, amplitude, sys.code().capability(), sys.outer().rate());
    Rng rng = make_stream(seed, {0xDE7EC7});
    const auto blk = awgn_add(sys.bank().synthesize(msgs, amplitude), amplitude, var, rng);
    const auto tr = joint_activity_bma_traced(blk, sys, BmaOptions{soft, -1});

    std::cout << "code n=" << sys.code().n() << " T=" << sys.code().capability() << " R=" << sys.outer().rate()
              << "  chips=" << sys.chip_len() << "  Eb/N0=" << harness::format_db(db) << " dB  sigma^2=" << var << '\n';
    std::cout << "transmitted: {" << join(msgs) << "}\n";
    std::cout << "  L  status   consistent  metric        messages\n";
    for (const auto& h : tr.hypotheses) {
        std::ostringstream metric;
        if (std::isfinite(h.metric)) metric << std::setprecision(6) << h.metric;
        else metric << "-";
        std::cout << std::setw(3) << h.hypothesis << "  " << std::left << std::setw(8)
                  << (h.status == DecodeStatus::Success ? "ok" : "fail") << " " << std::setw(11) << (h.consistent ? "yes" : "no")
                  << " " << std::setw(13) << metric.str() << std::right << "{" << join(h.messages) << "}\n";
    }
    const auto& r = tr.result;
    std::cout << "winner: " << (r.ok() ? "L=" + std::to_string(r.detected_count) : std::string("none (decode failure)"))
              << "  metric=" << r.metric << "  decoded={" << join(r.messages) << "}\n";
    return 0;
}

int cmd_power_opt(const Globals& g) {
    const json j = load_config(g, true);
    const auto sys = system_from(j);
    const int J = get(j, "layers", 2);
    const double p_max = get(j, "p_max", 100.0);
    const double noise_var = get(j, "noise_var", 1.0);
    const auto load = get(j, "load", std::vector<int>(static_cast<std::size_t>(J), sys.code().capability()));
    ml::PowerSearchOptions opt;
    opt.levels = get(j, "levels", opt.levels);
    opt.dynamic_range_db = get(j, "dynamic_range_db", opt.dynamic_range_db);
    opt.trials = get(j, "trials", opt.trials);
    opt.seed = g.seed.value_or(get<std::uint64_t>(j, "seed", 1));
    opt.sic.detector = get<std::string>(j, "detector", "BMA") == "MLD" ? ml::Detector::Mld : ml::Detector::Bma;
    if (J < 1 || J > 2) fail(Errc::ConfigError, "layers must be 1 or 2");
    if (static_cast<int>(load.size()) != J) fail(Errc::ConfigError, "load needs one entry per layer");
    if (opt.levels < 1 || opt.trials < 1) fail(Errc::ConfigError, "levels and trials must be positive");

    const auto res = ml::optimize_power_allocation(J, p_max, noise_var, load, sys, opt);
    std::ostringstream csv;
    csv.precision(10);
    for (int l = 1; l <= J; ++l) csv << 'p' << l << ',';
    for (int l = 1; l <= J; ++l) csv << "bler_layer" << l << ',';
    csv << "minmax\n";
    for (const auto& row : res.grid) {
        for (double p : row.powers) csv << p << ',';
        for (double b : row.bler) csv << b << ',';
        csv << row.minmax << '\n';
    }
    const auto path = out_path(g, get<std::string>(j, "output", "power_grid.csv"));
    harness::write_text(path, csv.str());
    std::cout << "grid points: " << res.grid.size() << "\nbest powers:";
    for (double p : res.plan.powers) std::cout << ' ' << p;
    std::cout << "\nmin-max BLER: " << res.minmax_bler << "\nwrote " << path << '\n';
    return 0;
}

int cmd_sysim(const Globals& g) {
    const json j = load_config(g, true);
    sys::ResourcePoolConfig pools;
    sys::TrafficConfig traffic;
    sys::PhyConfig phy;
    sys::SimMode mode = sys::SimMode::Abstract;
    try {
        for (const auto& p : j.at("partitions"))
            pools.partitions.push_back({p.value("cluster_id", 0), p.value("gfru_count", 1), p.value("pool_size", 15),
                                        p.value("capability", 2)});
        pools.oma_block_count = j.value("oma_block_count", 0);
        pools.frame_count = j.value("frame_count", 1000);
        if (j.contains("arrival_rate"))
            for (const auto& [key, v] : j.at("arrival_rate").items()) traffic.arrival_rate[std::stoi(key)] = v.get<double>();
        if (j.contains("population")) traffic.population = j.at("population").get<int>();
        const auto arr = j.value("arrivals", std::string("poisson"));
        if (arr != "poisson" && arr != "fixed") fail(Errc::ConfigError, "arrivals must be poisson or fixed");
        traffic.arrivals = arr == "fixed" ? sys::Arrivals::Fixed : sys::Arrivals::Poisson;
        const auto m = j.value("mode", std::string("abstract"));
        if (m != "abstract" && m != "fullphy") fail(Errc::ConfigError, "mode must be abstract or fullphy");
        mode = m == "fullphy" ? sys::SimMode::FullPhy : sys::SimMode::Abstract;
        if (j.contains("phy")) {
            const auto& p = j.at("phy");
            if (p.contains("ebn0_db")) phy.ebn0_db = harness::parse_db(p.at("ebn0_db"));
            phy.amplitude = p.value("amplitude", 1.0);
            phy.coded = p.value("outer_rate", 1.0) == 0.5;
            phy.use_mld = p.value("detector", std::string("BMA")) == "MLD";
        }
    } catch (const json::exception& e) {
        fail(Errc::ConfigError, std::string("sysim config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        fail(Errc::ConfigError, std::string("sysim config: bad cluster id ") + e.what());
    }
    pools.validate();
    traffic.validate();
    const std::uint64_t seed = g.seed.value_or(get<std::uint64_t>(j, "seed", 1));
    const auto m = sys::run_system_sim(pools, traffic, mode, seed, phy);
    const auto path = out_path(g, get<std::string>(j, "output", "sysim_metrics.csv"));
    harness::write_text(path, sys::metrics_csv(m));
    std::cout << sys::metrics_csv(m);
    for (const auto& c : m.clusters) {
        std::cout << "cluster " << c.cluster_id << " occupancy:";
        for (std::size_t i = 0; i < c.occupancy.size(); ++i) std::cout << ' ' << i << ':' << c.occupancy[i];
        std::cout << '\n';
    }
    std::cout << "wrote " << path << '\n';
    return 0;
}

int cmd_zc(const Globals& g, long q_flag, std::vector<long> roots_flag) {
    const json j = load_config(g, false);
    const long q = q_flag > 0 ? q_flag : get(j, "q", 839L);
    std::vector<long> roots = !roots_flag.empty() ? roots_flag : get(j, "roots", std::vector<long>{1, 2});
    std::vector<ComplexSeq> seqs;
    for (long u : roots) seqs.push_back(zc_generate(ZcParams{u, q}));
    std::cout << "q=" << q << "  sqrt(q)=" << std::setprecision(12) << std::sqrt(static_cast<double>(q)) << '\n';
    for (std::size_t a = 0; a < seqs.size(); ++a) {
        double mod_err = 0, off_peak = 0;
        for (const auto& x : seqs[a]) mod_err = std::max(mod_err, std::abs(std::abs(x) - 1.0));
        for (long lag = 1; lag < q; ++lag) off_peak = std::max(off_peak, std::abs(periodic_correlation(seqs[a], seqs[a], lag)));
        std::cout << "u=" << roots[a] << "  |x|-1 max " << std::scientific << std::setprecision(3) << mod_err
                  << "  off-peak autocorrelation max " << off_peak << std::defaultfloat << '\n';
    }
    for (std::size_t a = 0; a < seqs.size(); ++a)
        for (std::size_t b = a + 1; b < seqs.size(); ++b) {
            double lo = INFINITY, hi = 0;
            for (long lag = 0; lag < q; ++lag) {
                const double v = std::abs(periodic_correlation(seqs[a], seqs[b], lag));
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            std::cout << "u=" << roots[a] << " vs u=" << roots[b] << "  cross-correlation magnitude in [" << std::setprecision(12)
                      << lo << ", " << hi << "]\n";
        }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gfnoma: grant-free NOMA signature coding toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "JSON config file");
    app.add_option("--seed", g.seed, "master seed (overrides config)");
    app.add_option("--workers", g.workers, "worker threads (overrides config)")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "output directory")->capture_default_str();

    int k_min = 2, k_max = 16;
    auto* field = app.add_subcommand("field-check", "self-test of the GF(2^k) tables");
    field->add_option("--k-min", k_min)->check(CLI::Range(2, 16));
    field->add_option("--k-max", k_max)->check(CLI::Range(2, 16));
    auto* bler = app.add_subcommand("bler", "Monte Carlo BLER sweep to CSV");
    auto* train = app.add_subcommand("train", "train the autoencoder detector");
    std::string messages;
    auto* detect = app.add_subcommand("detect", "decode one block and print the hypothesis trace");
    detect->add_option("--messages", messages, "comma separated 1-based messages");
    auto* power = app.add_subcommand("power-opt", "grid search of layer powers");
    auto* sysim = app.add_subcommand("sysim", "resource-pool system simulation");
    long q = 0;
    std::vector<long> roots;
    auto* zc = app.add_subcommand("zc-analyze", "Zadoff-Chu correlation report");
    zc->add_option("--q", q, "sequence length (odd)");
    zc->add_option("--roots", roots, "root indices")->delimiter(',');
    for (auto* sub : {field, bler, train, detect, power, sysim, zc}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*field) return cmd_field_check(k_min, k_max);
        if (*bler) return cmd_bler(g);
        if (*train) return cmd_train(g);
        if (*detect) return cmd_detect(g, messages);
        if (*power) return cmd_power_opt(g);
        if (*sysim) return cmd_sysim(g);
        if (*zc) return cmd_zc(g, q, roots);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == Errc::ConfigError ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
