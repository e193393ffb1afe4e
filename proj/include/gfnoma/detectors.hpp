#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gfnoma/error.hpp"
#include "gfnoma/galois.hpp"
#include "gfnoma/phy.hpp"
#include "gfnoma/signatures.hpp"

namespace gfnoma {

enum class DecodeStatus { Success, DecodeFailure };

struct DecodedSet {
    std::vector<int> messages; // sorted, 1-based
    int detected_count = 0;
    DecodeStatus status = DecodeStatus::DecodeFailure;
    double metric = std::numeric_limits<double>::infinity();

    bool ok() const noexcept { return status == DecodeStatus::Success; }
    bool contains(int m) const { return std::binary_search(messages.begin(), messages.end(), m); }
};

/// Signature code, outer code and the derived chip bank, bundled for detectors.
class CodedSystem {
public:
    CodedSystem(BchSignatureCode code, OuterCode outer)
        : code_(std::move(code)), outer_(outer), bank_(code_, outer_) {}

    const BchSignatureCode& code() const noexcept { return code_; }
    const OuterCode& outer() const noexcept { return outer_; }
    const SignatureBank& bank() const noexcept { return bank_; }
    std::size_t chip_len() const noexcept { return bank_.chip_len(); }

private:
    BchSignatureCode code_;
    OuterCode outer_;
    SignatureBank bank_;
};

// ---------------------------------------------------------------------------
// Berlekamp-Massey syndrome decoding

namespace detail {

// Coefficients low-order first; trailing zeros trimmed.
inline int poly_degree(const std::vector<gf_elem>& p) {
    for (int i = static_cast<int>(p.size()) - 1; i >= 0; --i)
        if (p[static_cast<std::size_t>(i)] != 0) return i;
    return -1;
}

} // namespace detail

/// Decode the XOR of at most T signature columns back to the set of columns.
/// The kT-bit input holds S1, S3, ..., S(2T-1); even syndromes come from
/// S(2i) = S(i)^2. Chien search checks every location.
inline DecodedSet bma_decode(std::span<const std::uint8_t> syndrome, const BchSignatureCode& code,
                             FieldOpCounter* counter = nullptr) {
    const int k = code.k();
    const int T = code.capability();
    if (syndrome.size() != static_cast<std::size_t>(k * T))
        fail(Errc::LengthMismatch, "syndrome must have kT bits");
    const CountingField gf(code.field(), counter);
    const auto n = static_cast<int>(code.field().order());

    std::vector<gf_elem> S(static_cast<std::size_t>(2 * T + 1), 0); // S[1..2T]
    bool all_zero = true;
    for (int i = 0; i < T; ++i) {
        S[static_cast<std::size_t>(2 * i + 1)] = bits_to_element(syndrome.data() + i * k, k);
        all_zero = all_zero && S[static_cast<std::size_t>(2 * i + 1)] == 0;
    }
    DecodedSet out;
    if (all_zero) {
        out.status = DecodeStatus::Success;
        out.detected_count = 0;
        return out;
    }
    for (int j = 1; j <= T; ++j) {
        const auto s = S[static_cast<std::size_t>(j)];
        S[static_cast<std::size_t>(2 * j)] = gf.mul(s, s);
    }

    std::vector<gf_elem> lambda(static_cast<std::size_t>(2 * T + 2), 0), prev(lambda.size(), 0), tmp;
    lambda[0] = 1;
    prev[0] = 1;
    int L = 0;
    int shift = 1;
    gf_elem b = 1;
    for (int r = 0; r < 2 * T; ++r) {
        gf_elem d = S[static_cast<std::size_t>(r + 1)];
        for (int i = 1; i <= L; ++i)
            d = gf.add(d, gf.mul(lambda[static_cast<std::size_t>(i)], S[static_cast<std::size_t>(r + 1 - i)]));
        if (d == 0) {
            ++shift;
            continue;
        }
        const gf_elem coef = gf.mul(d, gf.inv(b));
        const bool grow = 2 * L <= r;
        if (grow) tmp = lambda;
        const int prev_deg = detail::poly_degree(prev);
        for (int i = 0; i <= prev_deg && i + shift < static_cast<int>(lambda.size()); ++i) {
            auto& dst = lambda[static_cast<std::size_t>(i + shift)];
            dst = gf.add(dst, gf.mul(coef, prev[static_cast<std::size_t>(i)]));
        }
        if (grow) {
            L = r + 1 - L;
            prev = std::move(tmp);
            b = d;
            shift = 1;
        } else {
            ++shift;
        }
    }

    const int deg = detail::poly_degree(lambda);
    if (deg != L || deg > T) return out;

    // Chien search: lambda(alpha^-j) for j = 0..n-1, each term stepped by alpha^-i.
    std::vector<gf_elem> term(lambda.begin(), lambda.begin() + deg + 1);
    std::vector<gf_elem> step(static_cast<std::size_t>(deg) + 1);
    for (int i = 0; i <= deg; ++i) step[static_cast<std::size_t>(i)] = code.field().pow(code.field().exp(1), -i);
    std::vector<int> found;
    for (int j = 0; j < n; ++j) {
        gf_elem v = term[0];
        for (int i = 1; i <= deg; ++i) v = gf.add(v, term[static_cast<std::size_t>(i)]);
        if (v == 0) {
            found.push_back(j + 1);
            if (static_cast<int>(found.size()) > deg) break;
        }
        for (int i = 1; i <= deg; ++i)
            term[static_cast<std::size_t>(i)] = gf.mul(term[static_cast<std::size_t>(i)], step[static_cast<std::size_t>(i)]);
    }
    if (static_cast<int>(found.size()) != deg) return out;
    out.messages = std::move(found);
    out.detected_count = deg;
    out.status = DecodeStatus::Success;
    return out;
}

// ---------------------------------------------------------------------------
// Joint activity detection + BMA

struct BmaOptions {
    bool soft_viterbi = false;
    /// Largest activity hypothesis tried; < 0 means T.
    int max_hypothesis = -1;
};

struct HypothesisRecord {
    int hypothesis = 0;
    DecodeStatus status = DecodeStatus::DecodeFailure;
    std::vector<int> messages;
    bool consistent = false; // Success and |messages| == hypothesis
    double metric = std::numeric_limits<double>::infinity();
};

struct TracedDecode {
    DecodedSet result;
    std::vector<HypothesisRecord> hypotheses;
};

inline BitVec parity_to_syndrome(const ReceivedBlock& block, int L, const CodedSystem& sys, bool soft) {
    if (!sys.outer().coded) return estimate_parity(block, L).parity;
    if (soft) return viterbi_decode_soft(parity_llrs(block, L), sys.outer());
    return viterbi_decode(estimate_parity(block, L).parity, sys.outer());
}

/// For each hypothesis L = 0..T: estimate parities under L users, undo the
/// outer code, run BMA. Among hypotheses that decode to exactly L messages,
/// the one whose noiseless resynthesis is closest to the received chips wins.
inline TracedDecode joint_activity_bma_traced(const ReceivedBlock& block, const CodedSystem& sys,
                                              const BmaOptions& opts = {}) {
    if (block.length() != sys.chip_len())
        fail(Errc::LengthMismatch, "block length " + std::to_string(block.length()) + " != " + std::to_string(sys.chip_len()));
    const int T = sys.code().capability();
    const int Lmax = opts.max_hypothesis < 0 ? T : opts.max_hypothesis;
    TracedDecode out;
    for (int L = 0; L <= Lmax; ++L) {
        HypothesisRecord h;
        h.hypothesis = L;
        const BitVec syn = parity_to_syndrome(block, L, sys, opts.soft_viterbi);
        DecodedSet d = bma_decode(syn, sys.code());
        h.status = d.status;
        h.messages = d.messages;
        h.consistent = d.ok() && static_cast<int>(d.messages.size()) == L;
        if (h.consistent) {
            h.metric = squared_distance(block.chips, sys.bank().synthesize(d.messages, block.amplitude));
            if (h.metric < out.result.metric) {
                out.result = std::move(d);
                out.result.metric = h.metric;
            }
        }
        out.hypotheses.push_back(std::move(h));
    }
    if (!out.result.ok()) {
        out.result = DecodedSet{};
        out.result.status = DecodeStatus::DecodeFailure;
    }
    return out;
}

inline DecodedSet joint_activity_bma(const ReceivedBlock& block, const CodedSystem& sys, const BmaOptions& opts = {}) {
    return joint_activity_bma_traced(block, sys, opts).result;
}

// ---------------------------------------------------------------------------
// Maximum-likelihood detection by exhaustive subset search

inline double count_subsets(int n, int t_max) {
    double total = 0, c = 1;
    for (int t = 0; t <= t_max && t <= n; ++t) {
        total += c;
        c = c * (n - t) / (t + 1);
    }
    return total;
}

inline constexpr double kDefaultMldBudget = 1e7;

/// argmin over |S| <= T_max of ||y - synth(S)||^2; ties go to the smaller
/// set, then to the lexicographically first.
inline DecodedSet mld_decode(const ReceivedBlock& block, const CodedSystem& sys, int t_max,
                             double subset_budget = kDefaultMldBudget) {
    const auto& bank = sys.bank();
    const int n = bank.n();
    const std::size_t len = bank.chip_len();
    if (block.length() != len) fail(Errc::LengthMismatch, "block length does not match code");
    if (t_max < 0) fail(Errc::InvalidArgument, "T_max must be >= 0");
    const double subsets = count_subsets(n, t_max);
    if (subsets > subset_budget)
        fail(Errc::BudgetExceeded, std::to_string(static_cast<long long>(subsets)) + " subsets exceed budget");

    const double A = block.amplitude;
    // cost(S) = |y|^2 + sum_{i in S} h_i + 2 sum_{i<j in S} G_ij
    std::vector<double> h(static_cast<std::size_t>(n));
    std::vector<double> G(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& ui = bank.unit_chips(i + 1);
        double c = 0;
        for (std::size_t t = 0; t < len; ++t) c += block.chips[t] * ui[t];
        h[static_cast<std::size_t>(i)] = A * A * static_cast<double>(len) - 2 * A * c;
        for (int j = i; j < n; ++j) {
            const auto& uj = bank.unit_chips(j + 1);
            double g = 0;
            for (std::size_t t = 0; t < len; ++t) g += ui[t] * uj[t];
            G[static_cast<std::size_t>(i) * n + j] = G[static_cast<std::size_t>(j) * n + i] = A * A * g;
        }
    }
    double y2 = 0;
    for (double y : block.chips) y2 += y * y;

    const int depth_max = std::min(t_max, n);
    std::vector<double> best_cost(static_cast<std::size_t>(depth_max) + 1, std::numeric_limits<double>::infinity());
    std::vector<std::vector<int>> best_set(static_cast<std::size_t>(depth_max) + 1);
    best_cost[0] = y2;

    std::vector<int> current;
    std::vector<std::vector<double>> acc(static_cast<std::size_t>(depth_max) + 1,
                                         std::vector<double>(static_cast<std::size_t>(n), 0.0));
    // acc[d][j] = sum over the first d chosen elements of G(i, j)
    auto dfs = [&](auto&& self, int start, double cost) -> void {
        const auto d = current.size();
        const auto& a = acc[d];
        const auto size = d + 1;
        for (int j = start; j < n; ++j) {
            const double c = cost + h[static_cast<std::size_t>(j)] + 2 * a[static_cast<std::size_t>(j)];
            current.push_back(j);
            if (c < best_cost[size]) {
                best_cost[size] = c;
                best_set[size] = current;
            }
            if (static_cast<int>(size) < depth_max) {
                auto& nxt = acc[size];
                const double* row = &G[static_cast<std::size_t>(j) * n];
                for (int q = 0; q < n; ++q) nxt[static_cast<std::size_t>(q)] = a[static_cast<std::size_t>(q)] + row[q];
                self(self, j + 1, c);
            }
            current.pop_back();
        }
    };
    if (depth_max > 0) dfs(dfs, 0, y2);

    std::size_t pick = 0;
    for (std::size_t t = 1; t < best_cost.size(); ++t)
        if (best_cost[t] < best_cost[pick]) pick = t;

    DecodedSet out;
    out.status = DecodeStatus::Success;
    for (int j : best_set[pick]) out.messages.push_back(j + 1);
    out.detected_count = static_cast<int>(out.messages.size());
    out.metric = squared_distance(block.chips, bank.synthesize(out.messages, A));
    return out;
}

} // namespace gfnoma
