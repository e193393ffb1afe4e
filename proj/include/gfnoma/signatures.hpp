#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gfnoma/error.hpp"
#include "gfnoma/galois.hpp"

namespace gfnoma {

using BitVec = std::vector<std::uint8_t>;

/// Signature code whose columns are the odd-power syndromes of single-error
/// patterns of a binary BCH code with designed capability T. Column j is
/// bits(alpha^j) | bits(alpha^3j) | ... | bits(alpha^((2T-1)j)), LSB-first.
///
/// Any set of at most T distinct columns has a unique XOR sum, which is what
/// makes the code usable over the binary adder channel.
class BchSignatureCode {
public:
    BchSignatureCode(FieldTables field, int capability) : field_(std::move(field)), T_(capability) {
        const auto n = static_cast<long>(field_.order());
        if (T_ < 1 || 2L * T_ - 1 >= n)
            fail(Errc::InvalidCapability, "need 1 <= T and 2T-1 < 2^k-1, got T=" + std::to_string(T_));
        const int k = field_.degree();
        columns_.assign(static_cast<std::size_t>(n), BitVec(static_cast<std::size_t>(k * T_), 0));
        for (long j = 0; j < n; ++j) {
            for (int i = 0; i < T_; ++i) {
                const gf_elem s = field_.exp(static_cast<std::uint64_t>((2 * i + 1) * j));
                element_to_bits(s, k, columns_[static_cast<std::size_t>(j)].data() + i * k);
            }
        }
    }

    const FieldTables& field() const noexcept { return field_; }
    int k() const noexcept { return field_.degree(); }
    int capability() const noexcept { return T_; }
    /// Number of messages (= columns), 2^k - 1.
    int n() const noexcept { return static_cast<int>(field_.order()); }
    int seq_len() const noexcept { return k() * T_; }

    const BitVec& column(int j) const { return columns_.at(static_cast<std::size_t>(j)); }
    const std::vector<BitVec>& columns() const noexcept { return columns_; }

    /// Messages are 1-based: message m uses column m-1.
    const BitVec& signature(int message) const {
        if (message < 1 || message > n())
            fail(Errc::MessageOutOfRange, "message " + std::to_string(message) + " not in [1," + std::to_string(n()) + "]");
        return columns_[static_cast<std::size_t>(message - 1)];
    }

private:
    FieldTables field_;
    int T_;
    std::vector<BitVec> columns_;
};

inline BchSignatureCode build_signature_code(const FieldTables& field, int T) { return BchSignatureCode(field, T); }

inline const BitVec& message_to_signature(const BchSignatureCode& code, int m) { return code.signature(m); }

/// XOR of the signatures of a message set (the noiseless binary-adder syndrome).
inline BitVec xor_signatures(const BchSignatureCode& code, std::span<const int> messages) {
    BitVec acc(static_cast<std::size_t>(code.seq_len()), 0);
    for (int m : messages) {
        const auto& c = code.signature(m);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] ^= c[i];
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Zadoff-Chu sequences

struct ZcParams {
    long u = 1; // root index
    long q = 1; // length, odd
};

using ComplexSeq = std::vector<std::complex<double>>;

/// x[n] = exp(-i*pi*u*n*(n+1)/q) for odd q and gcd(u, q) = 1.
inline ComplexSeq zc_generate(const ZcParams& p) {
    if (p.q < 1 || p.q % 2 == 0) fail(Errc::InvalidZcParams, "q must be odd and positive");
    if (p.u < 1 || p.u >= p.q || std::gcd(p.u, p.q) != 1)
        fail(Errc::InvalidZcParams, "u must be in [1,q) with gcd(u,q)=1");
    ComplexSeq x(static_cast<std::size_t>(p.q));
    for (long n = 0; n < p.q; ++n) {
        // n(n+1) is even; reduce modulo 2q before scaling to keep the phase exact.
        const long long e = (static_cast<long long>(p.u) * ((static_cast<long long>(n) * (n + 1)) % (2 * p.q))) % (2 * p.q);
        const double phase = -std::numbers::pi * static_cast<double>(e) / static_cast<double>(p.q);
        x[static_cast<std::size_t>(n)] = std::polar(1.0, phase);
    }
    return x;
}

/// sum_n a[n] * conj(b[(n + lag) mod q]).
inline std::complex<double> periodic_correlation(std::span<const std::complex<double>> a,
                                                 std::span<const std::complex<double>> b, long lag) {
    if (a.size() != b.size()) fail(Errc::LengthMismatch, "correlation operands differ in length");
    const auto q = static_cast<long>(a.size());
    if (q == 0) return {};
    const long shift = ((lag % q) + q) % q;
    std::complex<double> acc{};
    for (long n = 0; n < q; ++n) acc += a[static_cast<std::size_t>(n)] * std::conj(b[static_cast<std::size_t>((n + shift) % q)]);
    return acc;
}

} // namespace gfnoma
