#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gfnoma/detectors.hpp"
#include "gfnoma/error.hpp"
#include "gfnoma/phy.hpp"
#include "gfnoma/rng.hpp"

namespace gfnoma::sys {

struct NomaPartition {
    int cluster_id = 0;
    int gfru_count = 1;
    int pool_size = 15; // n signatures
    int capability = 2; // T
};

struct ResourcePoolConfig {
    std::vector<NomaPartition> partitions;
    int oma_block_count = 0; // reserved capacity, not simulated
    int frame_count = 1000;

    void validate() const {
        if (partitions.empty()) fail(Errc::ConfigError, "at least one NOMA partition is required");
        if (oma_block_count < 0 || frame_count < 0) fail(Errc::ConfigError, "counts must be >= 0");
        for (const auto& p : partitions)
            if (p.gfru_count < 1 || p.pool_size < 1 || p.capability < 0)
                fail(Errc::ConfigError, "partition " + std::to_string(p.cluster_id) + " has invalid counts");
    }
};

enum class Arrivals { Poisson, Fixed };

struct TrafficConfig {
    std::map<int, double> arrival_rate; // per cluster, packets per frame
    std::optional<int> population;      // cap on arrivals per cluster per frame
    Arrivals arrivals = Arrivals::Poisson;

    double rate(int cluster) const {
        const auto it = arrival_rate.find(cluster);
        return it == arrival_rate.end() ? 0.0 : it->second;
    }
    void validate() const {
        for (const auto& [c, l] : arrival_rate)
            if (!(l >= 0)) fail(Errc::ConfigError, "arrival rate of cluster " + std::to_string(c) + " must be >= 0");
        if (population && *population < 0) fail(Errc::ConfigError, "population must be >= 0");
    }
};

enum class SimMode { Abstract, FullPhy };

/// Link settings for FullPhy runs. The pool size of every partition must be
/// 2^k - 1 so that it maps onto a signature code.
struct PhyConfig {
    double ebn0_db = std::numeric_limits<double>::infinity();
    double amplitude = 1.0;
    bool coded = false;
    bool use_mld = false;
    BmaOptions bma;
};

struct ClusterMetrics {
    int cluster_id = 0;
    long frames = 0;
    long arrivals = 0;
    long successes = 0;
    long collided = 0;                // packets in an over-full GFRU or sharing a signature
    std::vector<long> occupancy;      // GFRU-frames by packet count
    // per-frame second moments of (successes, arrivals)
    double sum_s2 = 0, sum_n2 = 0, sum_sn = 0;

    double offered_load() const { return frames ? static_cast<double>(arrivals) / frames : 0.0; }
    double throughput() const { return frames ? static_cast<double>(successes) / frames : 0.0; }
    double success_prob() const {
        return arrivals ? static_cast<double>(successes) / arrivals : std::numeric_limits<double>::quiet_NaN();
    }
    /// Standard error of success_prob. Packets of one frame are not
    /// independent, so this is the ratio-estimator error over frames.
    double success_prob_stderr() const {
        if (!arrivals || frames < 2) return std::numeric_limits<double>::quiet_NaN();
        const double F = static_cast<double>(frames);
        const double R = success_prob();
        const double nbar = static_cast<double>(arrivals) / F;
        const double v = std::max(0.0, (sum_s2 - 2 * R * sum_sn + R * R * sum_n2) / (F - 1));
        return std::sqrt(v / F) / nbar;
    }
    double collision_rate() const {
        return arrivals ? static_cast<double>(collided) / arrivals : std::numeric_limits<double>::quiet_NaN();
    }
};

struct SystemMetrics {
    std::vector<ClusterMetrics> clusters; // sorted by cluster_id

    const ClusterMetrics& cluster(int id) const {
        for (const auto& c : clusters)
            if (c.cluster_id == id) return c;
        fail(Errc::InvalidArgument, "unknown cluster " + std::to_string(id));
    }
};

inline int field_degree_for_pool(int n) {
    for (int k = 2; k <= 16; ++k)
        if ((1 << k) - 1 == n) return k;
    fail(Errc::ConfigError, "pool size " + std::to_string(n) + " is not 2^k - 1");
}

namespace detail {

struct Gfru {
    std::vector<int> sigs; // one entry per packet
};

inline void grow(std::vector<long>& h, std::size_t i) {
    if (h.size() <= i) h.resize(i + 1, 0);
    ++h[i];
}

} // namespace detail

inline SystemMetrics run_system_sim(const ResourcePoolConfig& pools, const TrafficConfig& traffic, SimMode mode,
                                    std::uint64_t seed, const PhyConfig& phy = {}) {
    pools.validate();
    traffic.validate();

    // Partitions grouped by cluster; a packet picks uniformly among all GFRUs of its cluster.
    std::map<int, std::vector<const NomaPartition*>> by_cluster;
    for (const auto& p : pools.partitions) by_cluster[p.cluster_id].push_back(&p);

    std::map<std::pair<int, int>, std::unique_ptr<CodedSystem>> systems;
    auto system_for = [&](const NomaPartition& p) -> const CodedSystem& {
        auto& slot = systems[{p.pool_size, p.capability}];
        if (!slot) {
            const int k = field_degree_for_pool(p.pool_size);
            slot = std::make_unique<CodedSystem>(build_signature_code(FieldTables(k), p.capability),
                                                 phy.coded ? OuterCode::conv_171_133() : OuterCode::uncoded());
        }
        return *slot;
    };
    if (mode == SimMode::FullPhy)
        for (const auto& p : pools.partitions) system_for(p);

    SystemMetrics out;
    for (const auto& [cid, parts] : by_cluster) {
        ClusterMetrics cm;
        cm.cluster_id = cid;
        cm.frames = pools.frame_count;
        int total_gfru = 0;
        for (const auto* p : parts) total_gfru += p->gfru_count;
        const double lambda = traffic.rate(cid);

        for (long f = 0; f < pools.frame_count; ++f) {
            Rng rng = make_stream(seed, {0x5157, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(static_cast<std::int64_t>(cid))});
            int count = 0;
            if (traffic.arrivals == Arrivals::Fixed) count = static_cast<int>(std::lround(lambda));
            else if (lambda > 0) count = std::poisson_distribution<int>(lambda)(rng);
            if (traffic.population) count = std::min(count, *traffic.population);
            cm.arrivals += count;
            const long successes_before = cm.successes;

            std::vector<detail::Gfru> gfrus(static_cast<std::size_t>(total_gfru));
            std::vector<const NomaPartition*> owner;
            for (const auto* p : parts)
                for (int g = 0; g < p->gfru_count; ++g) owner.push_back(p);
            std::uniform_int_distribution<int> pick_gfru(0, total_gfru - 1);
            for (int i = 0; i < count; ++i) {
                const int g = pick_gfru(rng);
                const int n = owner[static_cast<std::size_t>(g)]->pool_size;
                gfrus[static_cast<std::size_t>(g)].sigs.push_back(std::uniform_int_distribution<int>(1, n)(rng));
            }

            for (std::size_t g = 0; g < gfrus.size(); ++g) {
                const auto& sigs = gfrus[g].sigs;
                const auto& part = *owner[g];
                detail::grow(cm.occupancy, sigs.size());
                if (sigs.empty()) continue;
                const bool overfull = static_cast<int>(sigs.size()) > part.capability;
                std::vector<bool> unique(sigs.size());
                for (std::size_t i = 0; i < sigs.size(); ++i)
                    unique[i] = std::count(sigs.begin(), sigs.end(), sigs[i]) == 1;
                for (std::size_t i = 0; i < sigs.size(); ++i) cm.collided += overfull || !unique[i];

                if (mode == SimMode::Abstract) {
                    if (!overfull)
                        for (std::size_t i = 0; i < sigs.size(); ++i) cm.successes += unique[i];
                    continue;
                }
                const auto& cs = system_for(part);
                RealVec y = cs.bank().synthesize(sigs, phy.amplitude);
                const double var = ebn0_to_noise_var(phy.ebn0_db, phy.amplitude, part.capability, cs.outer().rate());
                add_noise_inplace(y, var, rng);
                const ReceivedBlock blk{std::move(y), phy.amplitude, var};
                const DecodedSet d = phy.use_mld ? mld_decode(blk, cs, part.capability) : joint_activity_bma(blk, cs, phy.bma);
                if (d.ok())
                    for (int s : sigs) cm.successes += d.contains(s);
            }
            const double fs = static_cast<double>(cm.successes - successes_before), fn = count;
            cm.sum_s2 += fs * fs;
            cm.sum_n2 += fn * fn;
            cm.sum_sn += fs * fn;
        }
        out.clusters.push_back(std::move(cm));
    }
    return out;
}

/// Tagged-packet success under the Abstract rule when the other packets in
/// its GFRU are Poisson(lambda): at most T-1 others, none on its signature.
inline double analytic_success_probability(double lambda, int n, int T) {
    if (!(lambda >= 0) || n < 1) fail(Errc::InvalidArgument, "need lambda >= 0 and n >= 1");
    if (T < 1) return 0.0;
    const double q = static_cast<double>(n - 1) / n;
    double sum = 0;
    for (long l = 0; l <= T - 1; ++l) {
        const double log_p = lambda > 0 ? -lambda + l * std::log(lambda) - std::lgamma(static_cast<double>(l) + 1)
                                        : (l == 0 ? 0.0 : -std::numeric_limits<double>::infinity());
        const double term = std::exp(log_p) * std::pow(q, static_cast<double>(l));
        sum += term;
        if (l > lambda && term < 1e-18) break;
    }
    return sum;
}

inline std::string metrics_csv(const SystemMetrics& m) {
    std::ostringstream os;
    os.precision(10);
    os << "cluster_id,frames,offered_load,throughput,success_prob,collision_rate\n";
    for (const auto& c : m.clusters)
        os << c.cluster_id << ',' << c.frames << ',' << c.offered_load() << ',' << c.throughput() << ','
           << c.success_prob() << ',' << c.collision_rate() << '\n';
    return os.str();
}

} // namespace gfnoma::sys
