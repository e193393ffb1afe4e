#include <gtest/gtest.h>

#include "gfnoma/galois.hpp"
#include "oracles.hpp"

using namespace gfnoma;

TEST(Galois, AlphaPowersGF16) {
    const FieldTables f(4, 0x13);
    EXPECT_EQ(f.exp(0), 1u);
    EXPECT_EQ(f.exp(1), 0b0010u);
    EXPECT_EQ(f.exp(4), oracle::poly_mulmod(0b1000, 0b0010, 0x13, 4)); // alpha^4 = alpha^3 * alpha
    EXPECT_EQ(f.exp(4), 0b0011u);
}

TEST(Galois, ReduciblePolynomialRejected) {
    try {
        FieldTables f(4, 0b10101); // x^4+x^2+1 = (x^2+x+1)^2
        FAIL() << "expected NonPrimitivePolynomial";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NonPrimitivePolynomial);
    }
    // Irreducible but not primitive: x^4+x^3+x^2+x+1 has order 5.
    EXPECT_THROW(FieldTables(4, 0b11111), Error);
}

TEST(Galois, DegreeMismatchRejected) {
    EXPECT_THROW(FieldTables(4, 0x43), Error);
    EXPECT_THROW(FieldTables(1, 0x3), Error);
    EXPECT_THROW(FieldTables(17, 0x3), Error);
}

TEST(Galois, AllDefaultPolynomialsArePrimitive) {
    for (int k = 2; k <= 16; ++k) {
        const FieldTables f(k);
        EXPECT_EQ(f.exp(0), 1u) << k;
        for (std::uint32_t i = 0; i < f.order(); ++i) ASSERT_EQ(f.log(f.exp(i)), i) << "k=" << k;
    }
}

TEST(Galois, MulInvPowExamples) {
    const FieldTables f(4);
    EXPECT_EQ(gf_mul(7, 1, f), 7u);
    EXPECT_EQ(gf_mul(0b0010, 0b1001, f), 1u);
    EXPECT_EQ(gf_mul(7, 0, f), 0u);
    EXPECT_EQ(gf_inv(1, f), 1u);
    EXPECT_EQ(gf_inv(0b0010, f), 0b1001u);
    EXPECT_EQ(gf_pow(f.exp(1), 15, f), 1u);
    try {
        gf_inv(0, f);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DivisionByZero);
    }
}

class GaloisExhaustive : public ::testing::TestWithParam<int> {};

TEST_P(GaloisExhaustive, MatchesPolynomialOracleAndFieldAxioms) {
    const int k = GetParam();
    const FieldTables f(k);
    const std::uint32_t q = f.size();
    for (gf_elem a = 0; a < q; ++a) {
        EXPECT_EQ(f.mul(a, a), f.pow(a, 2));
        if (a != 0) {
            EXPECT_EQ(f.mul(a, f.inv(a)), 1u);
        }
        for (gf_elem b = 0; b < q; ++b) {
            const gf_elem ab = f.mul(a, b);
            ASSERT_EQ(ab, oracle::poly_mulmod(a, b, f.primitive_poly(), k));
            ASSERT_EQ(ab, f.mul(b, a));
            // Frobenius: (a+b)^2 = a^2 + b^2
            ASSERT_EQ(f.mul(a ^ b, a ^ b), f.mul(a, a) ^ f.mul(b, b));
            for (gf_elem c = 0; c < q; ++c) {
                ASSERT_EQ(f.mul(ab, c), f.mul(a, f.mul(b, c)));
                ASSERT_EQ(f.mul(a, b ^ c), ab ^ f.mul(a, c));
            }
        }
    }
}

INSTANTIATE_TEST_SUITE_P(SmallFields, GaloisExhaustive, ::testing::Values(3, 4, 5, 6));
