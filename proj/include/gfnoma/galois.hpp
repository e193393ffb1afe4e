#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "gfnoma/error.hpp"

namespace gfnoma {

using gf_elem = std::uint32_t;

/// Default primitive polynomials (bit i = coefficient of x^i) for k = 2..16.
inline constexpr std::array<std::uint32_t, 17> kDefaultPrimitivePoly = {
    0, 0,
    0x7,     // x^2+x+1
    0xB,     // x^3+x+1
    0x13,    // x^4+x+1
    0x25,    // x^5+x^2+1
    0x43,    // x^6+x+1
    0x89,    // x^7+x^3+1
    0x11D,   // x^8+x^4+x^3+x^2+1
    0x211,   // x^9+x^4+1
    0x409,   // x^10+x^3+1
    0x805,   // x^11+x^2+1
    0x1053,  // x^12+x^6+x^4+x+1
    0x201B,  // x^13+x^4+x^3+x+1
    0x4443,  // x^14+x^10+x^6+x+1
    0x8003,  // x^15+x+1
    0x1100B, // x^16+x^12+x^3+x+1
};

/// GF(2^k) with exp/log tables. Elements are k-bit polynomials over GF(2),
/// bit i holding the coefficient of x^i; alpha is the class of x.
class FieldTables {
public:
    FieldTables(int k, std::uint32_t primitive_poly) : k_(k), poly_(primitive_poly) {
        if (k < 2 || k > 16) fail(Errc::InvalidDegree, "field degree must be in [2,16], got " + std::to_string(k));
        if (std::bit_width(primitive_poly) != static_cast<unsigned>(k + 1))
            fail(Errc::InvalidDegree, "polynomial degree does not match k=" + std::to_string(k));

        const std::uint32_t size = 1u << k;
        const std::uint32_t order = size - 1;
        exp_.assign(2 * order, 0);
        log_.assign(size, 0);
        std::vector<bool> seen(size, false);

        gf_elem x = 1;
        for (std::uint32_t i = 0; i < order; ++i) {
            if (seen[x]) {
                fail(Errc::NonPrimitivePolynomial,
                     "cycle length " + std::to_string(i) + " < " + std::to_string(order));
            }
            seen[x] = true;
            exp_[i] = x;
            log_[x] = i;
            x <<= 1;
            if (x & size) x ^= primitive_poly;
        }
        if (x != 1) fail(Errc::NonPrimitivePolynomial, "alpha^(2^k-1) != 1");
        // Doubled table avoids a modulo in mul().
        for (std::uint32_t i = 0; i < order; ++i) exp_[order + i] = exp_[i];
    }

    explicit FieldTables(int k)
        : FieldTables(k, (k >= 2 && k <= 16) ? kDefaultPrimitivePoly[static_cast<std::size_t>(k)] : 0) {}

    int degree() const noexcept { return k_; }
    std::uint32_t primitive_poly() const noexcept { return poly_; }
    std::uint32_t size() const noexcept { return 1u << k_; }
    /// Multiplicative group order 2^k - 1.
    std::uint32_t order() const noexcept { return (1u << k_) - 1; }

    gf_elem exp(std::uint64_t i) const noexcept { return exp_[static_cast<std::size_t>(i % order())]; }
    std::uint32_t log(gf_elem a) const {
        if (a == 0 || a >= size()) fail(Errc::InvalidArgument, "log of zero or out-of-field element");
        return log_[a];
    }

    static constexpr gf_elem add(gf_elem a, gf_elem b) noexcept { return a ^ b; }

    gf_elem mul(gf_elem a, gf_elem b) const noexcept {
        if (a == 0 || b == 0) return 0;
        return exp_[log_[a] + log_[b]];
    }

    gf_elem inv(gf_elem a) const {
        if (a == 0) fail(Errc::DivisionByZero, "inverse of zero");
        return exp_[(order() - log_[a]) % order()];
    }

    gf_elem div(gf_elem a, gf_elem b) const { return mul(a, inv(b)); }

    gf_elem pow(gf_elem a, std::int64_t e) const noexcept {
        if (a == 0) return e == 0 ? 1 : 0;
        const auto ord = static_cast<std::int64_t>(order());
        std::int64_t r = (static_cast<std::int64_t>(log_[a]) * (e % ord)) % ord;
        if (r < 0) r += ord;
        return exp_[static_cast<std::size_t>(r)];
    }

    const std::vector<gf_elem>& exp_table() const noexcept { return exp_; }
    const std::vector<std::uint32_t>& log_table() const noexcept { return log_; }

private:
    int k_;
    std::uint32_t poly_;
    std::vector<gf_elem> exp_;      // length 2(2^k-1)
    std::vector<std::uint32_t> log_; // log_[0] unused
};

inline FieldTables build_field(int k, std::uint32_t primitive_poly) { return FieldTables(k, primitive_poly); }

inline gf_elem gf_mul(gf_elem a, gf_elem b, const FieldTables& f) noexcept { return f.mul(a, b); }
inline gf_elem gf_inv(gf_elem a, const FieldTables& f) { return f.inv(a); }
inline gf_elem gf_pow(gf_elem a, std::int64_t e, const FieldTables& f) noexcept { return f.pow(a, e); }

/// LSB-first serialization: out[i] = coefficient of x^i.
inline void element_to_bits(gf_elem a, int k, std::uint8_t* out) noexcept {
    for (int i = 0; i < k; ++i) out[i] = static_cast<std::uint8_t>((a >> i) & 1u);
}

inline gf_elem bits_to_element(const std::uint8_t* bits, int k) noexcept {
    gf_elem a = 0;
    for (int i = 0; i < k; ++i) a |= static_cast<gf_elem>(bits[i] & 1u) << i;
    return a;
}

/// Tallies field operations; used to check decoder complexity.
struct FieldOpCounter {
    std::uint64_t additions = 0;
    std::uint64_t multiplications = 0;
    std::uint64_t inversions = 0;

    std::uint64_t total() const noexcept { return additions + multiplications + inversions; }
};

/// Thin wrapper that forwards to FieldTables and counts each call.
class CountingField {
public:
    CountingField(const FieldTables& f, FieldOpCounter* counter) : f_(f), c_(counter) {}

    const FieldTables& tables() const noexcept { return f_; }

    gf_elem add(gf_elem a, gf_elem b) const noexcept {
        if (c_) ++c_->additions;
        return a ^ b;
    }
    gf_elem mul(gf_elem a, gf_elem b) const noexcept {
        if (c_) ++c_->multiplications;
        return f_.mul(a, b);
    }
    gf_elem inv(gf_elem a) const {
        if (c_) ++c_->inversions;
        return f_.inv(a);
    }

private:
    const FieldTables& f_;
    FieldOpCounter* c_;
};

} // namespace gfnoma
