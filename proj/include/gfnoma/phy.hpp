#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gfnoma/error.hpp"
#include "gfnoma/rng.hpp"
#include "gfnoma/signatures.hpp"

namespace gfnoma {

using RealVec = std::vector<double>;

struct ReceivedBlock {
    RealVec chips;
    double amplitude = 1.0; // per-user received amplitude A
    double noise_var = 0.0; // sigma^2 per real dimension

    std::size_t length() const noexcept { return chips.size(); }
};

/// bit 0 -> +A, bit 1 -> -A.
inline RealVec bpsk_modulate(std::span<const std::uint8_t> bits, double amplitude) {
    if (!(amplitude > 0)) fail(Errc::InvalidArgument, "BPSK amplitude must be positive");
    RealVec out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ? -amplitude : amplitude;
    return out;
}

/// Element-wise sum; an empty set yields `length` zeros.
inline RealVec superpose(std::span<const RealVec> signals, std::size_t length) {
    RealVec out(length, 0.0);
    for (const auto& s : signals) {
        if (s.size() != length) fail(Errc::LengthMismatch, "superposed signals differ in length");
        for (std::size_t i = 0; i < length; ++i) out[i] += s[i];
    }
    return out;
}

inline RealVec superpose(std::span<const RealVec> signals) {
    return superpose(signals, signals.empty() ? 0 : signals.front().size());
}

inline void add_noise_inplace(RealVec& chips, double noise_var, Rng& rng) {
    if (noise_var < 0) fail(Errc::InvalidArgument, "noise variance must be >= 0");
    if (noise_var == 0) return;
    std::normal_distribution<double> gauss(0.0, std::sqrt(noise_var));
    for (auto& c : chips) c += gauss(rng);
}

inline ReceivedBlock awgn_add(RealVec chips, double amplitude, double noise_var, Rng& rng) {
    add_noise_inplace(chips, noise_var, rng);
    return ReceivedBlock{std::move(chips), amplitude, noise_var};
}

/// sigma^2 = A^2 T / (2 R 10^(EbN0/10)): each user spends kT/R chips of
/// energy A^2 on k information bits, and N0 = 2 sigma^2. +inf dB gives 0.
inline double ebn0_to_noise_var(double ebn0_db, double amplitude, int T, double rate) {
    if (!(amplitude > 0)) fail(Errc::InvalidArgument, "amplitude must be positive");
    if (!(rate > 0)) fail(Errc::InvalidArgument, "rate must be positive");
    if (std::isinf(ebn0_db) && ebn0_db > 0) return 0.0;
    return amplitude * amplitude * T / (2.0 * rate * std::pow(10.0, ebn0_db / 10.0));
}

struct ParityEstimate {
    BitVec parity;
    RealVec ones; // per-chip estimated number of users sending bit 1
    double metric = 0.0;
};

/// Per chip, estimate how many of L users sent a 1 and keep its parity.
inline ParityEstimate estimate_parity(const ReceivedBlock& block, int L) {
    if (L < 0) fail(Errc::InvalidArgument, "hypothesized active count must be >= 0");
    const double A = block.amplitude;
    ParityEstimate est;
    est.parity.assign(block.length(), 0);
    est.ones.assign(block.length(), 0.0);
    for (std::size_t i = 0; i < block.length(); ++i) {
        const double y = block.chips[i];
        double ones = 0;
        if (L > 0) ones = std::clamp(std::round((L * A - y) / (2 * A)), 0.0, static_cast<double>(L));
        const auto o = static_cast<long>(ones);
        est.parity[i] = static_cast<std::uint8_t>(o & 1);
        est.ones[i] = ones;
        const double r = y - (L - 2.0 * ones) * A;
        est.metric += r * r;
    }
    return est;
}

inline constexpr double kHardLlr = 1e6;

/// Per-chip log P(parity 0 | y) / P(parity 1 | y) under L users with
/// equiprobable bits. Falls back to +-kHardLlr when sigma^2 = 0.
inline RealVec parity_llrs(const ReceivedBlock& block, int L) {
    RealVec llr(block.length(), kHardLlr);
    if (L == 0) return llr;
    if (block.noise_var <= 0) {
        const auto est = estimate_parity(block, L);
        for (std::size_t i = 0; i < llr.size(); ++i) llr[i] = est.parity[i] ? -kHardLlr : kHardLlr;
        return llr;
    }
    const double A = block.amplitude;
    const double inv2s = 1.0 / (2 * block.noise_var);
    std::vector<double> log_binom(static_cast<std::size_t>(L) + 1);
    for (int o = 0; o <= L; ++o)
        log_binom[static_cast<std::size_t>(o)] = std::lgamma(L + 1.0) - std::lgamma(o + 1.0) - std::lgamma(L - o + 1.0);
    for (std::size_t i = 0; i < llr.size(); ++i) {
        const double y = block.chips[i];
        double m[2] = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        std::vector<double> terms(static_cast<std::size_t>(L) + 1);
        for (int o = 0; o <= L; ++o) {
            const double d = y - (L - 2.0 * o) * A;
            terms[static_cast<std::size_t>(o)] = log_binom[static_cast<std::size_t>(o)] - d * d * inv2s;
            m[o & 1] = std::max(m[o & 1], terms[static_cast<std::size_t>(o)]);
        }
        double s[2] = {0, 0};
        for (int o = 0; o <= L; ++o) s[o & 1] += std::exp(terms[static_cast<std::size_t>(o)] - m[o & 1]);
        const double v = (m[0] + std::log(s[0])) - (m[1] + std::log(s[1]));
        llr[i] = std::clamp(v, -kHardLlr, kHardLlr);
    }
    return llr;
}

// ---------------------------------------------------------------------------
// Outer code: rate-1/2 feedforward convolutional code, zero-tail terminated.

struct OuterCode {
    bool coded = false;
    int mem = 6;
    std::uint32_t g0 = 0171; // octal, MSB taps the current input
    std::uint32_t g1 = 0133;

    static OuterCode uncoded() { return OuterCode{}; }
    static OuterCode conv_171_133() { return OuterCode{true, 6, 0171, 0133}; }

    /// Nominal rate (tail ignored).
    double rate() const noexcept { return coded ? 0.5 : 1.0; }
    std::size_t coded_length(std::size_t info_len) const noexcept {
        return coded ? 2 * (info_len + static_cast<std::size_t>(mem)) : info_len;
    }
};

inline BitVec conv_encode(std::span<const std::uint8_t> bits, const OuterCode& code) {
    if (!code.coded) return BitVec(bits.begin(), bits.end());
    const int m = code.mem;
    BitVec out;
    out.reserve(code.coded_length(bits.size()));
    std::uint32_t state = 0; // previous inputs, bit (m-1) most recent
    auto step = [&](std::uint32_t b) {
        const std::uint32_t sr = (b << m) | state;
        out.push_back(static_cast<std::uint8_t>(std::popcount(sr & code.g0) & 1));
        out.push_back(static_cast<std::uint8_t>(std::popcount(sr & code.g1) & 1));
        state = sr >> 1;
    };
    for (auto b : bits) step(b & 1u);
    for (int i = 0; i < m; ++i) step(0);
    return out;
}

namespace detail {

// Branch metric callback: cost(step, out0, out1) to be minimised.
template <typename Cost>
BitVec viterbi_core(std::size_t steps, const OuterCode& code, Cost&& cost) {
    const int m = code.mem;
    const std::size_t nstates = std::size_t{1} << m;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> pm(nstates, inf), next(nstates);
    pm[0] = 0;
    std::vector<std::uint8_t> choice(steps * nstates);

    // Output bits for each (state, input) pair.
    std::vector<std::array<std::uint8_t, 2>> outs(2 * nstates);
    for (std::uint32_t s = 0; s < nstates; ++s)
        for (std::uint32_t b = 0; b < 2; ++b) {
            const std::uint32_t sr = (b << m) | s;
            outs[2 * s + b] = {static_cast<std::uint8_t>(std::popcount(sr & code.g0) & 1),
                               static_cast<std::uint8_t>(std::popcount(sr & code.g1) & 1)};
        }

    const std::uint32_t low_mask = (1u << (m - 1)) - 1;
    for (std::size_t t = 0; t < steps; ++t) {
        const std::array<double, 4> bm = {cost(t, 0, 0), cost(t, 0, 1), cost(t, 1, 0), cost(t, 1, 1)};
        for (std::uint32_t ns = 0; ns < nstates; ++ns) {
            const std::uint32_t b = ns >> (m - 1);
            double best = inf;
            std::uint8_t pick = 0;
            for (std::uint32_t x = 0; x < 2; ++x) {
                const std::uint32_t s = ((ns & low_mask) << 1) | x;
                if (pm[s] == inf) continue;
                const auto& o = outs[2 * s + b];
                const double v = pm[s] + bm[2u * o[0] + o[1]];
                if (v < best) {
                    best = v;
                    pick = static_cast<std::uint8_t>(x);
                }
            }
            next[ns] = best;
            choice[t * nstates + ns] = pick;
        }
        pm.swap(next);
    }

    // Zero-tail termination: trace back from state 0.
    BitVec inputs(steps);
    std::uint32_t ns = 0;
    for (std::size_t t = steps; t-- > 0;) {
        inputs[t] = static_cast<std::uint8_t>(ns >> (m - 1));
        const std::uint32_t x = choice[t * nstates + ns];
        ns = ((ns & low_mask) << 1) | x;
    }
    inputs.resize(steps - static_cast<std::size_t>(m));
    return inputs;
}

} // namespace detail

/// Hard-decision Viterbi (Hamming metric) on a terminated codeword.
inline BitVec viterbi_decode(std::span<const std::uint8_t> received, const OuterCode& code) {
    if (!code.coded) return BitVec(received.begin(), received.end());
    if (received.size() % 2 != 0 || received.size() < 2 * static_cast<std::size_t>(code.mem))
        fail(Errc::LengthMismatch, "codeword length must be 2(info+mem)");
    const std::size_t steps = received.size() / 2;
    return detail::viterbi_core(steps, code, [&](std::size_t t, int o0, int o1) {
        return static_cast<double>((received[2 * t] != o0) + (received[2 * t + 1] != o1));
    });
}

/// Soft Viterbi on per-bit LLRs, LLR = log P(0)/P(1).
inline BitVec viterbi_decode_soft(std::span<const double> llr, const OuterCode& code) {
    if (!code.coded) {
        BitVec out(llr.size());
        for (std::size_t i = 0; i < llr.size(); ++i) out[i] = llr[i] < 0;
        return out;
    }
    if (llr.size() % 2 != 0 || llr.size() < 2 * static_cast<std::size_t>(code.mem))
        fail(Errc::LengthMismatch, "codeword length must be 2(info+mem)");
    const std::size_t steps = llr.size() / 2;
    return detail::viterbi_core(steps, code, [&](std::size_t t, int o0, int o1) {
        return o0 * llr[2 * t] + o1 * llr[2 * t + 1];
    });
}

// ---------------------------------------------------------------------------

/// Per-message transmitted chips (outer-coded, antipodal at unit amplitude),
/// precomputed once per (code, outer code) pair.
class SignatureBank {
public:
    SignatureBank(const BchSignatureCode& code, const OuterCode& outer) : outer_(outer), n_(code.n()) {
        chip_len_ = outer.coded_length(static_cast<std::size_t>(code.seq_len()));
        coded_.reserve(static_cast<std::size_t>(n_));
        unit_.reserve(static_cast<std::size_t>(n_));
        for (int m = 1; m <= n_; ++m) {
            coded_.push_back(conv_encode(code.signature(m), outer));
            unit_.push_back(bpsk_modulate(coded_.back(), 1.0));
        }
    }

    int n() const noexcept { return n_; }
    std::size_t chip_len() const noexcept { return chip_len_; }
    const OuterCode& outer() const noexcept { return outer_; }
    const BitVec& coded_bits(int message) const { return coded_.at(static_cast<std::size_t>(message - 1)); }
    const RealVec& unit_chips(int message) const { return unit_.at(static_cast<std::size_t>(message - 1)); }

    /// Noiseless superposition of the given messages at amplitude A.
    RealVec synthesize(std::span<const int> messages, double amplitude) const {
        RealVec out(chip_len_, 0.0);
        add_to(out, messages, amplitude);
        return out;
    }

    void add_to(RealVec& acc, std::span<const int> messages, double amplitude) const {
        for (int m : messages) {
            if (m < 1 || m > n_) fail(Errc::MessageOutOfRange, "message " + std::to_string(m));
            const auto& u = unit_[static_cast<std::size_t>(m - 1)];
            for (std::size_t i = 0; i < chip_len_; ++i) acc[i] += amplitude * u[i];
        }
    }

private:
    OuterCode outer_;
    int n_;
    std::size_t chip_len_ = 0;
    std::vector<BitVec> coded_;
    std::vector<RealVec> unit_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(Errc::LengthMismatch, "distance operands differ in length");
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
}

} // namespace gfnoma
