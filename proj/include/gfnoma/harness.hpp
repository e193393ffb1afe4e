#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <exception>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "gfnoma/detectors.hpp"
#include "gfnoma/error.hpp"
#include "gfnoma/neural.hpp"
#include "gfnoma/phy.hpp"
#include "gfnoma/rng.hpp"

namespace gfnoma::harness {

using nlohmann::json;

enum class DetectorKind { Bma, Mld, Dl };

struct DetectorSpec {
    DetectorKind kind = DetectorKind::Bma;
    bool soft_viterbi = false;     // BMA only
    std::string model_path;        // DL only
    double threshold = 0.5;        // DL only

    std::string name() const {
        switch (kind) {
        case DetectorKind::Bma: return soft_viterbi ? "BMA-soft" : "BMA";
        case DetectorKind::Mld: return "MLD";
        case DetectorKind::Dl: return "DL";
        }
        return "?";
    }
};

inline DetectorSpec detector(DetectorKind kind, std::string model_path = {}) {
    DetectorSpec d;
    d.kind = kind;
    d.model_path = std::move(model_path);
    return d;
}

enum class ActivityKind { Fixed, UniformUpTo };

/// Fixed(L) gives one cell per Eb/N0 with L users; UniformUpTo(T) gives
/// cells L = 1..T.
struct Activity {
    ActivityKind kind = ActivityKind::UniformUpTo;
    int users = 0; // L for Fixed; ignored otherwise (T is used)
};

struct ScenarioConfig {
    std::string scenario_id = "scenario";
    int k = 6;
    int T = 4;
    std::uint32_t primitive_poly = 0; // 0 selects the default
    double outer_rate = 1.0;
    std::vector<DetectorSpec> detectors = {DetectorSpec{}};
    double amplitude = 1.0;
    std::vector<double> ebn0_grid_db;
    Activity activity;
    long trials_per_point = 10000;
    long min_error_events = 100; // 0 runs every point to trials_per_point
    std::uint64_t seed = 1;
    int workers = 1;
    long chunk = 500; // stopping rule granularity

    std::vector<int> cells() const {
        if (activity.kind == ActivityKind::Fixed) return {activity.users};
        std::vector<int> v;
        for (int L = 1; L <= T; ++L) v.push_back(L);
        return v;
    }

    void validate() const {
        if (ebn0_grid_db.empty()) fail(Errc::ConfigError, "ebn0_grid_db must be nonempty");
        if (trials_per_point <= 0) fail(Errc::ConfigError, "trials_per_point must be > 0");
        if (min_error_events < 0) fail(Errc::ConfigError, "min_error_events must be >= 0");
        if (chunk <= 0) fail(Errc::ConfigError, "chunk must be > 0");
        if (workers < 1) fail(Errc::ConfigError, "workers must be >= 1");
        if (k < 2 || k > 16) fail(Errc::ConfigError, "k must be in [2,16]");
        if (T < 1 || 2 * T - 1 >= (1 << k) - 1) fail(Errc::ConfigError, "T out of range for k");
        if (outer_rate != 1.0 && outer_rate != 0.5) fail(Errc::ConfigError, "outer_rate must be 1 or 0.5");
        if (!(amplitude > 0)) fail(Errc::ConfigError, "amplitude must be positive");
        if (detectors.empty()) fail(Errc::ConfigError, "need at least one detector");
        if (activity.kind == ActivityKind::Fixed && (activity.users < 1 || activity.users > T))
            fail(Errc::ConfigError, "fixed activity must be in [1,T]");
        for (const auto& d : detectors)
            if (d.kind == DetectorKind::Dl && d.model_path.empty()) fail(Errc::ConfigError, "DL detector needs a model path");
    }
};

// ---------------------------------------------------------------------------
// Config parsing

inline double parse_db(const json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "+inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
    }
    fail(Errc::ConfigError, "bad Eb/N0 value " + v.dump());
}

inline json db_to_json(double db) { return std::isinf(db) ? json("inf") : json(db); }

inline DetectorSpec parse_detector(const json& j) {
    DetectorSpec d;
    const std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
    if (kind == "BMA" || kind == "bma") d.kind = DetectorKind::Bma;
    else if (kind == "MLD" || kind == "mld") d.kind = DetectorKind::Mld;
    else if (kind == "DL" || kind == "dl") d.kind = DetectorKind::Dl;
    else fail(Errc::ConfigError, "unknown detector " + kind);
    if (j.is_object()) {
        d.soft_viterbi = j.value("soft_viterbi", false);
        d.model_path = j.value("model", std::string{});
        d.threshold = j.value("threshold", 0.5);
    }
    return d;
}

inline json detector_to_json(const DetectorSpec& d) {
    json j;
    j["kind"] = d.kind == DetectorKind::Bma ? "BMA" : d.kind == DetectorKind::Mld ? "MLD" : "DL";
    if (d.kind == DetectorKind::Bma) j["soft_viterbi"] = d.soft_viterbi;
    if (d.kind == DetectorKind::Dl) {
        j["model"] = d.model_path;
        j["threshold"] = d.threshold;
    }
    return j;
}

inline ScenarioConfig parse_scenario(const json& j) {
    ScenarioConfig c;
    try {
        c.scenario_id = j.value("scenario_id", c.scenario_id);
        if (j.contains("code")) {
            const auto& code = j.at("code");
            c.k = code.value("k", c.k);
            c.T = code.value("T", c.T);
            c.primitive_poly = code.value("primitive_poly", c.primitive_poly);
        }
        c.outer_rate = j.value("outer_rate", c.outer_rate);
        if (j.contains("detectors")) {
            c.detectors.clear();
            for (const auto& d : j.at("detectors")) c.detectors.push_back(parse_detector(d));
        }
        c.amplitude = j.value("amplitude", c.amplitude);
        if (j.contains("ebn0_grid_db"))
            for (const auto& v : j.at("ebn0_grid_db")) c.ebn0_grid_db.push_back(parse_db(v));
        if (j.contains("activity")) {
            const auto& a = j.at("activity");
            if (a.is_string() && a.get<std::string>() == "uniform") {
                c.activity = {ActivityKind::UniformUpTo, 0};
            } else if (a.is_number_integer()) {
                c.activity = {ActivityKind::Fixed, a.get<int>()};
            } else if (a.is_object() && a.contains("fixed")) {
                c.activity = {ActivityKind::Fixed, a.at("fixed").get<int>()};
            } else if (a.is_object() && a.value("uniform_up_to", false)) {
                c.activity = {ActivityKind::UniformUpTo, 0};
            } else {
                fail(Errc::ConfigError, "activity must be \"uniform\", an integer, or {\"fixed\": L}");
            }
        }
        c.trials_per_point = j.value("trials_per_point", c.trials_per_point);
        c.min_error_events = j.value("min_error_events", c.min_error_events);
        c.seed = j.value("seed", c.seed);
        c.workers = j.value("workers", c.workers);
        c.chunk = j.value("chunk", c.chunk);
    } catch (const json::exception& e) {
        fail(Errc::ConfigError, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::ConfigError, "cannot open config " + path);
    try {
        return json::parse(in, nullptr, true, true); // comments allowed
    } catch (const json::exception& e) {
        fail(Errc::ConfigError, path + ": " + e.what());
    }
}

inline ScenarioConfig load_scenario(const std::string& path) { return parse_scenario(read_json_file(path)); }

/// Everything that determines the numbers; worker count is left out on purpose.
inline json scenario_to_json(const ScenarioConfig& c) {
    json j;
    j["scenario_id"] = c.scenario_id;
    j["code"] = {{"k", c.k}, {"T", c.T}, {"primitive_poly", c.primitive_poly}};
    j["outer_rate"] = c.outer_rate;
    j["detectors"] = json::array();
    for (const auto& d : c.detectors) j["detectors"].push_back(detector_to_json(d));
    j["amplitude"] = c.amplitude;
    j["ebn0_grid_db"] = json::array();
    for (double db : c.ebn0_grid_db) j["ebn0_grid_db"].push_back(db_to_json(db));
    j["activity"] = c.activity.kind == ActivityKind::Fixed ? json{{"fixed", c.activity.users}} : json("uniform");
    j["trials_per_point"] = c.trials_per_point;
    j["min_error_events"] = c.min_error_events;
    j["seed"] = c.seed;
    j["chunk"] = c.chunk;
    return j;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const ScenarioConfig& c) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << fnv1a64(scenario_to_json(c).dump());
    return os.str();
}

// ---------------------------------------------------------------------------
// Statistics

struct Interval {
    double low = 0, high = 0;
};

/// Wilson score interval at 95%.
inline Interval wilson_interval(long successes, long trials, double z = 1.959963984540054) {
    if (trials <= 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
    const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
    return {successes == 0 ? 0.0 : std::max(0.0, centre - half), successes == trials ? 1.0 : std::min(1.0, centre + half)};
}

struct CurvePoint {
    std::string detector;
    double ebn0_db = 0;
    int active_users = 0;
    long trials = 0;
    long message_errors = 0;
    long false_alarms = 0;
    double bler = 0;
    double ci_low = 0;
    double ci_high = 0;

    double false_alarm_rate() const { return trials ? static_cast<double>(false_alarms) / trials : 0.0; }
};

// ---------------------------------------------------------------------------
// Sweep

namespace detail {

struct Prepared {
    std::unique_ptr<CodedSystem> sys;
    std::vector<std::unique_ptr<nn::Model<float>>> models; // one per detector (null if not DL)
    std::vector<RealVec> dl_book;                            // hard codebook per DL detector, flattened chips x n
};

inline Prepared prepare(const ScenarioConfig& cfg) {
    Prepared p;
    const FieldTables field = cfg.primitive_poly ? FieldTables(cfg.k, cfg.primitive_poly) : FieldTables(cfg.k);
    p.sys = std::make_unique<CodedSystem>(build_signature_code(field, cfg.T),
                                          cfg.outer_rate == 1.0 ? OuterCode::uncoded() : OuterCode::conv_171_133());
    for (const auto& d : cfg.detectors) {
        if (d.kind != DetectorKind::Dl) {
            p.models.emplace_back();
            p.dl_book.emplace_back();
            continue;
        }
        auto m = std::make_unique<nn::Model<float>>(nn::load_checkpoint<float>(d.model_path));
        if (m->k != cfg.k || m->T != cfg.T || m->rate != cfg.outer_rate || m->amplitude != cfg.amplitude)
            fail(Errc::ConfigError, "checkpoint " + d.model_path + " does not match the scenario (k, T, rate, amplitude)");
        const auto book = nn::encode_all(*m, true);
        RealVec flat(static_cast<std::size_t>(book.chips.size()));
        for (Eigen::Index i = 0; i < book.chips.size(); ++i) flat[static_cast<std::size_t>(i)] = static_cast<double>(book.chips.data()[i]);
        p.dl_book.push_back(std::move(flat));
        p.models.push_back(std::move(m));
    }
    return p;
}

struct TrialOutcome {
    std::vector<int> errors;
    std::vector<int> false_alarms;
};

} // namespace detail

/// Runs one trial for all detectors in `active`. The stream depends only on
/// (seed, Eb/N0 index, L, trial), so every detector sees the same messages
/// and the same standard-normal noise draws.
inline detail::TrialOutcome run_trial(const ScenarioConfig& cfg, const detail::Prepared& prep, std::size_t ebn0_index,
                                      int L, long trial, const std::vector<char>& active) {
    const auto& sys = *prep.sys;
    Rng rng = make_stream(cfg.seed, {static_cast<std::uint64_t>(ebn0_index), static_cast<std::uint64_t>(L),
                                     static_cast<std::uint64_t>(trial)});
    const int n = sys.code().n();
    const auto msgs = nn::draw_distinct(rng, n, L);
    std::size_t max_len = static_cast<std::size_t>(sys.chip_len());
    for (const auto& m : prep.models)
        if (m) max_len = std::max(max_len, static_cast<std::size_t>(m->chip_count()));
    std::vector<double> z(max_len);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : z) v = g(rng);

    const double db = cfg.ebn0_grid_db[ebn0_index];
    const double var = ebn0_to_noise_var(db, cfg.amplitude, cfg.T, cfg.outer_rate);
    const double sigma = std::sqrt(var);

    std::optional<ReceivedBlock> chain_block;
    auto chain = [&]() -> const ReceivedBlock& {
        if (!chain_block) {
            RealVec y = sys.bank().synthesize(msgs, cfg.amplitude);
            for (std::size_t i = 0; i < y.size(); ++i) y[i] += sigma * z[i];
            chain_block = ReceivedBlock{std::move(y), cfg.amplitude, var};
        }
        return *chain_block;
    };

    detail::TrialOutcome out;
    out.errors.assign(cfg.detectors.size(), 0);
    out.false_alarms.assign(cfg.detectors.size(), 0);
    for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
        if (!active[d]) continue;
        const auto& spec = cfg.detectors[d];
        DecodedSet dec;
        switch (spec.kind) {
        case DetectorKind::Bma: dec = joint_activity_bma(chain(), sys, BmaOptions{spec.soft_viterbi, -1}); break;
        case DetectorKind::Mld: dec = mld_decode(chain(), sys, cfg.T); break;
        case DetectorKind::Dl: {
            const auto& model = *prep.models[d];
            const auto& book = prep.dl_book[d];
            const std::size_t len = static_cast<std::size_t>(model.chip_count());
            RealVec y(len, 0.0);
            for (int m : msgs)
                for (std::size_t i = 0; i < len; ++i) y[i] += book[static_cast<std::size_t>(m - 1) * len + i];
            for (std::size_t i = 0; i < len; ++i) y[i] += sigma * z[i];
            dec = nn::dl_detect(model, ReceivedBlock{std::move(y), cfg.amplitude, var}, spec.threshold);
            break;
        }
        }
        for (int m : msgs) out.errors[d] += !(dec.ok() && dec.contains(m));
        if (dec.ok())
            for (int m : dec.messages) out.false_alarms[d] += std::find(msgs.begin(), msgs.end(), m) == msgs.end();
    }
    return out;
}

/// Trials run in chunks; after each chunk a detector stops once it has
/// min_error_events message errors. Chunk boundaries do not depend on the
/// worker count, so neither do the results.
inline std::vector<CurvePoint> run_bler_sweep(const ScenarioConfig& cfg) {
    cfg.validate();
    const auto prep = detail::prepare(cfg);
    const std::size_t D = cfg.detectors.size();
    std::vector<CurvePoint> table;

    for (std::size_t e = 0; e < cfg.ebn0_grid_db.size(); ++e) {
        for (int L : cfg.cells()) {
            std::vector<long> trials(D, 0), errors(D, 0), fas(D, 0);
            std::vector<char> active(D, 1);
            long done = 0;
            while (done < cfg.trials_per_point && std::any_of(active.begin(), active.end(), [](char a) { return a; })) {
                const long count = std::min(cfg.chunk, cfg.trials_per_point - done);
                std::vector<detail::TrialOutcome> results(static_cast<std::size_t>(count));
                std::atomic<long> next{0};
                std::exception_ptr failure;
                std::atomic<bool> failed{false};
                auto work = [&]() {
                    try {
                        for (long i; (i = next.fetch_add(1)) < count && !failed;)
                            results[static_cast<std::size_t>(i)] = run_trial(cfg, prep, e, L, done + i, active);
                    } catch (...) {
                        if (!failed.exchange(true)) failure = std::current_exception();
                    }
                };
                const int nthreads = static_cast<int>(std::min<long>(cfg.workers, count));
                if (nthreads <= 1) {
                    work();
                } else {
                    std::vector<std::thread> pool;
                    for (int w = 0; w < nthreads; ++w) pool.emplace_back(work);
                    for (auto& t : pool) t.join();
                }
                if (failure) std::rethrow_exception(failure);
                for (std::size_t d = 0; d < D; ++d) {
                    if (!active[d]) continue;
                    for (const auto& r : results) {
                        errors[d] += r.errors[d];
                        fas[d] += r.false_alarms[d];
                    }
                    trials[d] += count;
                    if (cfg.min_error_events > 0 && errors[d] >= cfg.min_error_events) active[d] = 0;
                }
                done += count;
            }
            for (std::size_t d = 0; d < D; ++d) {
                CurvePoint p;
                p.detector = cfg.detectors[d].name();
                p.ebn0_db = cfg.ebn0_grid_db[e];
                p.active_users = L;
                p.trials = trials[d];
                p.message_errors = errors[d];
                p.false_alarms = fas[d];
                const long total = trials[d] * L;
                p.bler = static_cast<double>(errors[d]) / static_cast<double>(total);
                const auto ci = wilson_interval(errors[d], total);
                p.ci_low = ci.low;
                p.ci_high = ci.high;
                table.push_back(std::move(p));
            }
        }
    }
    std::stable_sort(table.begin(), table.end(), [](const CurvePoint& a, const CurvePoint& b) {
        if (a.ebn0_db != b.ebn0_db) return a.ebn0_db < b.ebn0_db;
        return a.active_users < b.active_users;
    });
    return table;
}

// ---------------------------------------------------------------------------
// Output

inline constexpr const char* kCsvColumns =
    "scenario_id,detector,ebn0_db,active_users,trials,message_errors,false_alarms,bler,ci_low,ci_high";

inline std::string format_db(double db) {
    if (std::isinf(db)) return db > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(6);
    os << db;
    return os.str();
}

inline std::string bler_csv(const ScenarioConfig& cfg, const std::vector<CurvePoint>& table) {
    std::ostringstream os;
    os << "# gfnoma bler sweep\n";
    os << "# config_hash fnv1a64:" << config_hash(cfg) << '\n';
    os << "# calibration sigma^2 = A^2 * T / (2 * R * 10^(EbN0_dB / 10)), A = per-user chip amplitude, R = outer code rate\n";
    os << "# config " << scenario_to_json(cfg).dump() << '\n';
    os << kCsvColumns << '\n';
    os.precision(10);
    for (const auto& p : table) {
        os << cfg.scenario_id << ',' << p.detector << ',' << format_db(p.ebn0_db) << ',' << p.active_users << ','
           << p.trials << ',' << p.message_errors << ',' << p.false_alarms << ',' << p.bler << ',' << p.ci_low << ','
           << p.ci_high << '\n';
    }
    return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::FileError, "cannot write " + path);
    out << text;
    if (!out) fail(Errc::FileError, "write failed for " + path);
}

/// Writes a standalone matplotlib script that plots BLER against Eb/N0 on a
/// log axis, one series per (detector, L), and saves it next to the CSV.
inline std::string emit_plot_script(const std::string& csv_path, std::string script_path = {}, std::string image_path = {}) {
    if (!std::filesystem::exists(csv_path)) fail(Errc::FileError, "no such CSV " + csv_path);
    const auto base = std::filesystem::path(csv_path).replace_extension();
    if (script_path.empty()) script_path = base.string() + "_plot.py";
    if (image_path.empty()) image_path = base.string() + ".png";
    const auto abs_csv = std::filesystem::absolute(csv_path).string();
    const auto abs_png = std::filesystem::absolute(image_path).string();
    std::ostringstream py;
    py << R"PY(#!/usr/bin/env python3
import csv
import math
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV = sys.argv[1] if len(sys.argv) > 1 else )PY"
       << json(abs_csv).dump() << R"PY(
PNG = sys.argv[2] if len(sys.argv) > 2 else )PY"
       << json(abs_png).dump() << R"PY(

series = {}
with open(CSV) as f:
    rows = csv.DictReader(line for line in f if not line.startswith("#"))
    for r in rows:
        try:
            x = float(r["ebn0_db"])
            y = float(r["bler"])
        except (KeyError, TypeError, ValueError):
            continue
        if math.isinf(x) or y <= 0:
            continue
        key = (r["detector"], int(r["active_users"]))
        series.setdefault(key, []).append((x, y))

fig, ax = plt.subplots(figsize=(6, 4.5))
for (det, users), pts in sorted(series.items()):
    pts.sort()
    ax.semilogy([p[0] for p in pts], [p[1] for p in pts], marker="o", label="%s, L=%d" % (det, users))
ax.set_xlabel("Eb/N0 (dB)")
ax.set_ylabel("BLER")
ax.set_yscale("log")
ax.grid(True, which="both", alpha=0.3)
if series:
    ax.legend()
fig.tight_layout()
fig.savefig(PNG, dpi=120)
print("%d series -> %s" % (len(series), PNG))
)PY";
    write_text(script_path, py.str());
    std::filesystem::permissions(script_path, std::filesystem::perms::owner_exec, std::filesystem::perm_options::add);
    return script_path;
}

} // namespace gfnoma::harness
