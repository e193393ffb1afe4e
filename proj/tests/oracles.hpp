#pragma once

// Test-only reference routines. Nothing here calls into the library's
// table-driven paths so they can serve as independent checks.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

/// Carry-less multiply then reduce modulo the degree-k polynomial.
inline std::uint32_t poly_mulmod(std::uint32_t a, std::uint32_t b, std::uint32_t poly, int k) {
    std::uint64_t prod = 0;
    for (int i = 0; i < 32; ++i)
        if ((b >> i) & 1u) prod ^= static_cast<std::uint64_t>(a) << i;
    for (int d = 63; d >= k; --d)
        if ((prod >> d) & 1u) prod ^= static_cast<std::uint64_t>(poly) << (d - k);
    return static_cast<std::uint32_t>(prod);
}

/// alpha^e by repeated multiplication with x.
inline std::uint32_t alpha_pow(std::uint64_t e, std::uint32_t poly, int k) {
    std::uint32_t r = 1;
    for (std::uint64_t i = 0; i < e; ++i) r = poly_mulmod(r, 2, poly, k);
    return r;
}

/// Signature column j built directly from the definition, LSB-first.
inline std::vector<std::uint8_t> bch_column(int j, int T, std::uint32_t poly, int k) {
    std::vector<std::uint8_t> out;
    for (int i = 0; i < T; ++i) {
        const auto s = alpha_pow(static_cast<std::uint64_t>((2 * i + 1) * j), poly, k);
        for (int b = 0; b < k; ++b) out.push_back(static_cast<std::uint8_t>((s >> b) & 1u));
    }
    return out;
}

/// Visit every subset of {0..n-1} with size <= t_max.
inline void for_each_subset(int n, int t_max, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int start) {
        fn(cur);
        if (static_cast<int>(cur.size()) == t_max) return;
        for (int j = start; j < n; ++j) {
            cur.push_back(j);
            rec(j + 1);
            cur.pop_back();
        }
    };
    rec(0);
}

/// Shift-register evaluation of a rate-1/2 feedforward code, zero-tail.
inline std::vector<std::uint8_t> conv_reference(const std::vector<std::uint8_t>& in, std::uint32_t g0,
                                                std::uint32_t g1, int mem) {
    std::vector<std::uint8_t> reg(static_cast<std::size_t>(mem) + 1, 0); // reg[0] = current input
    std::vector<std::uint8_t> out;
    auto tap = [&](std::uint32_t g) {
        int p = 0;
        for (int i = 0; i <= mem; ++i)
            if ((g >> (mem - i)) & 1u) p ^= reg[static_cast<std::size_t>(i)];
        return static_cast<std::uint8_t>(p);
    };
    auto push = [&](std::uint8_t b) {
        for (int i = mem; i > 0; --i) reg[static_cast<std::size_t>(i)] = reg[static_cast<std::size_t>(i - 1)];
        reg[0] = b;
        out.push_back(tap(g0));
        out.push_back(tap(g1));
    };
    for (auto b : in) push(b);
    for (int i = 0; i < mem; ++i) push(0);
    return out;
}

/// Wilson score interval half-width at z.
inline double binomial_se(double p, double n) { return std::sqrt(p * (1 - p) / n); }

} // namespace oracle
