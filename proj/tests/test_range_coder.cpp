/*
Copyright 2026 The acfid Authors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
you may obtain a copy of the License at

                http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "acfid/random.hpp"
#include "acfid/range_coder.hpp"

using namespace acfid;

namespace {

// Textbook Hamilton apportionment over exact rationals; used only when no
// weight quantises to zero.
std::vector<std::uint32_t> hamilton(const std::vector<std::uint64_t>& w)
{
    const std::uint64_t total = std::accumulate(w.begin(), w.end(), std::uint64_t{0});
    std::vector<std::uint32_t> f(w.size());
    std::vector<std::pair<std::uint64_t, std::size_t>> frac;
    std::uint64_t used = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        f[i] = static_cast<std::uint32_t>(w[i] * 65536 / total);
        used += f[i];
        frac.emplace_back(w[i] * 65536 % total, i);
    }
    std::sort(frac.begin(), frac.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    for (std::size_t k = 0; used < 65536; ++k, ++used)
        ++f[frac[k].second];
    return f;
}

std::vector<std::uint32_t> freqs_of(const CdfTable& t)
{
    std::vector<std::uint32_t> f;
    for (std::size_t s = 0; s < t.size(); ++s)
        f.push_back(t.freq(s));
    return f;
}

struct Stream {
    std::vector<const CdfTable*> tables;
    std::vector<std::size_t> symbols;

    double ideal() const
    {
        double b = 0.0;
        for (std::size_t i = 0; i < symbols.size(); ++i)
            b += tables[i]->cost(symbols[i]);
        return b;
    }
};

Bytes encode(const Stream& s)
{
    RangeEncoder enc;
    for (std::size_t i = 0; i < s.symbols.size(); ++i)
        enc.encode(*s.tables[i], s.symbols[i]);
    return std::move(enc).finish();
}

std::size_t draw(const CdfTable& t, std::mt19937_64& rng)
{
    return t.find(static_cast<std::uint32_t>(uniform_below(rng, kProbTotal)));
}

} // namespace

TEST(CdfTable, SymmetricSmoothing)
{
    const std::vector<std::uint64_t> c{0, 0};
    const CdfTable t = cdf_from_frequencies(c);
    EXPECT_EQ(std::vector<std::uint32_t>(t.cumulative().begin(), t.cumulative().end()),
              (std::vector<std::uint32_t>{0, 32768, 65536}));
}

TEST(CdfTable, ApportionmentMatchesOracle)
{
    const std::vector<std::uint64_t> c{3, 1};
    const CdfTable t = cdf_from_frequencies(c);
    EXPECT_EQ(freqs_of(t), hamilton({4, 2}));
    EXPECT_EQ(t.freq(0) + t.freq(1), 65536U);
    EXPECT_NEAR(static_cast<double>(t.freq(0)) / t.freq(1), 2.0, 1e-3);

    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 300);
        std::vector<std::uint64_t> w(n);
        for (auto& x : w)
            x = 1 + uniform_below(rng, 200);
        EXPECT_EQ(freqs_of(cdf_from_weights(w)), hamilton(w)) << "trial " << trial;
    }
}

TEST(CdfTable, ZeroQuotaSymbolsKeepUnitFrequency)
{
    // One heavy symbol forces every other quota below 1.
    std::vector<std::uint64_t> c(256, 0);
    c[7] = 10'000'000;
    const CdfTable t = cdf_from_frequencies(c);
    for (std::size_t s = 0; s < t.size(); ++s)
        EXPECT_GE(t.freq(s), 1U);
    EXPECT_EQ(t.freq(7), 65536U - 255U);
    EXPECT_EQ(t.cum(256), 65536U);
}

TEST(CdfTable, Extremes)
{
    const std::vector<std::uint64_t> one{5};
    const CdfTable single = cdf_from_frequencies(one);
    EXPECT_EQ(single.freq(0), 65536U);
    EXPECT_DOUBLE_EQ(single.cost(0), 0.0);

    const std::vector<std::uint64_t> full(65536, 0);
    const CdfTable flat = cdf_from_frequencies(full);
    EXPECT_EQ(flat.freq(12345), 1U);
    const std::vector<std::uint64_t> too_many(65537, 0);
    EXPECT_THROW(cdf_from_frequencies(too_many), UsageError);
    EXPECT_THROW(cdf_from_frequencies(std::vector<std::uint64_t>{}), UsageError);
    EXPECT_THROW(CdfTable(std::vector<std::uint32_t>{0, 10, 10, 65536}), CoderError);
    EXPECT_THROW(CdfTable(std::vector<std::uint32_t>{0, 65535}), CoderError);
}

TEST(CdfTable, EntropyAndCost)
{
    const CdfTable t(std::vector<std::uint32_t>{0, 16384, 65536});
    EXPECT_DOUBLE_EQ(t.cost(0), 2.0);
    EXPECT_NEAR(t.cost(1), -std::log2(0.75), 1e-15);
    EXPECT_NEAR(t.entropy(), -(0.25 * std::log2(0.25) + 0.75 * std::log2(0.75)), 1e-15);
    EXPECT_EQ(t.find(0), 0U);
    EXPECT_EQ(t.find(16383), 0U);
    EXPECT_EQ(t.find(16384), 1U);
    EXPECT_EQ(t.find(65535), 1U);
}

TEST(RangeCoder, UniformBinaryCostsOneBitPerSymbol)
{
    const CdfTable t(std::vector<std::uint32_t>{0, 32768, 65536});
    std::mt19937_64 rng(1);
    Stream s;
    for (int i = 0; i < 1000; ++i) {
        s.tables.push_back(&t);
        s.symbols.push_back(rng() & 1);
    }
    const Bytes b = encode(s);
    const double excess = 8.0 * b.size() - 1000.0;
    EXPECT_GE(excess, 0.0);
    EXPECT_LE(excess, kStreamOverheadBits);
}

TEST(RangeCoder, NearCertainSymbolIsAlmostFree)
{
    const CdfTable t(std::vector<std::uint32_t>{0, 65535, 65536});
    Stream s;
    for (int i = 0; i < 1000; ++i) {
        s.tables.push_back(&t);
        s.symbols.push_back(0);
    }
    EXPECT_NEAR(s.ideal(), 1000 * -std::log2(65535.0 / 65536.0), 1e-9);
    EXPECT_NEAR(s.ideal(), 0.022, 1e-3);
    const Bytes b = encode(s);
    EXPECT_LE(b.size(), 8U);
    RangeDecoder dec(b);
    for (int i = 0; i < 1000; ++i)
        ASSERT_EQ(dec.decode(t), 0U);
}

TEST(RangeCoder, EmptyStream)
{
    const Bytes b = RangeEncoder{}.finish();
    EXPECT_LE(b.size(), 8U);
    EXPECT_EQ(b.size(), static_cast<std::size_t>(kFlushBytes));
}

TEST(RangeCoder, RejectsOutOfAlphabet)
{
    const CdfTable t(std::vector<std::uint32_t>{0, 100, 65536});
    RangeEncoder enc;
    EXPECT_THROW(enc.encode(t, 2), CoderError);
}

TEST(RangeCoder, MillionSkewedSymbolsRoundTrip)
{
    const std::vector<std::uint64_t> w{900000, 60000, 30000, 9000, 900, 90, 9, 1};
    const CdfTable t = cdf_from_weights(w);
    std::mt19937_64 rng(2024);
    Stream s;
    s.tables.assign(1'000'000, &t);
    s.symbols.reserve(s.tables.size());
    for (std::size_t i = 0; i < s.tables.size(); ++i)
        s.symbols.push_back(draw(t, rng));
    const Bytes b = encode(s);
    const double excess = 8.0 * b.size() - s.ideal();
    EXPECT_GE(excess, 0.0);
    EXPECT_LE(excess, kStreamOverheadBits);
    // The absolute bound is what scales: here about 0.8 bits/symbol, so 64 bits is ~1e-2 %.
    EXPECT_LT(excess / s.ideal() * 100.0, kStreamOverheadBits / s.ideal() * 100.0 + 1e-12);
    EXPECT_LT(excess / s.ideal() * 100.0, 1e-2);

    RangeDecoder dec(b);
    for (std::size_t i = 0; i < s.symbols.size(); ++i)
        ASSERT_EQ(dec.decode(t), s.symbols[i]) << "at " << i;
    EXPECT_EQ(dec.consumed(), b.size());
    EXPECT_EQ(dec.overrun(), 0U);
}

TEST(RangeCoder, RandomTablesPropertySweep)
{
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<CdfTable> pool;
        const int n_tables = 1 + static_cast<int>(uniform_below(rng, 6));
        for (int k = 0; k < n_tables; ++k) {
            const std::size_t n = 1 + uniform_below(rng, trial % 3 == 0 ? 3 : 300);
            std::vector<std::uint64_t> w(n);
            for (auto& x : w)
                x = uniform_below(rng, 4) == 0 ? 0 : uniform_below(rng, 1U << (uniform_below(rng, 30)));
            pool.push_back(cdf_from_frequencies(w));
        }
        Stream s;
        const std::size_t len = uniform_below(rng, 3000);
        for (std::size_t i = 0; i < len; ++i) {
            const CdfTable* t = &pool[uniform_below(rng, pool.size())];
            s.tables.push_back(t);
            // Mostly typical symbols, sometimes the rarest ones to stress carries.
            s.symbols.push_back(uniform_below(rng, 8) == 0 ? uniform_below(rng, t->size()) : draw(*t, rng));
        }
        const Bytes b = encode(s);
        const double excess = 8.0 * b.size() - s.ideal();
        ASSERT_GE(excess, -1e-6) << "trial " << trial;
        ASSERT_LE(excess, kStreamOverheadBits) << "trial " << trial;

        RangeSizer sz;
        for (std::size_t i = 0; i < s.symbols.size(); ++i)
            sz.encode(*s.tables[i], s.symbols[i]);
        ASSERT_EQ(sz.payload_bytes(), b.size());

        RangeDecoder dec(b);
        for (std::size_t i = 0; i < s.symbols.size(); ++i)
            ASSERT_EQ(dec.decode(*s.tables[i]), s.symbols[i]) << "trial " << trial << " at " << i;
        ASSERT_EQ(dec.consumed(), b.size());
    }
}

TEST(RangeCoder, CarryChainsSurvive)
{
    // Rare top-of-range symbols repeatedly push low toward 2^32 and build 0xFF runs.
    const CdfTable t(std::vector<std::uint32_t>{0, 1, 65535, 65536});
    std::mt19937_64 rng(5);
    Stream s;
    for (int i = 0; i < 50000; ++i) {
        s.tables.push_back(&t);
        const auto r = uniform_below(rng, 10);
        s.symbols.push_back(r < 6 ? 2 : (r < 9 ? 1 : 0));
    }
    const Bytes b = encode(s);
    RangeDecoder dec(b);
    for (std::size_t i = 0; i < s.symbols.size(); ++i)
        ASSERT_EQ(dec.decode(t), s.symbols[i]);
    const double excess = 8.0 * b.size() - s.ideal();
    EXPECT_GE(excess, 0.0);
    EXPECT_LE(excess, kStreamOverheadBits);
}

TEST(RangeCoder, AdversarialPayloadDecodesWithoutFault)
{
    const CdfTable a = cdf_from_frequencies(std::vector<std::uint64_t>{5, 0, 100, 3});
    const CdfTable b(std::vector<std::uint32_t>{0, 1, 65536});
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        Bytes junk(uniform_below(rng, 64));
        for (auto& x : junk)
            x = static_cast<std::uint8_t>(rng());
        RangeDecoder dec(junk, PastEnd::ZeroFill);
        for (int i = 0; i < 2000; ++i) {
            const std::size_t s = dec.decode(i % 2 ? a : b);
            ASSERT_LT(s, (i % 2 ? a : b).size());
        }
    }
}

TEST(RangeCoder, TruncatedPayloadIsDetected)
{
    const CdfTable t(std::vector<std::uint32_t>{0, 32768, 65536});
    Stream s;
    for (int i = 0; i < 400; ++i) {
        s.tables.push_back(&t);
        s.symbols.push_back(static_cast<std::size_t>(i % 3 == 0));
    }
    Bytes b = encode(s);
    b.resize(b.size() - 10);
    RangeDecoder dec(b);
    EXPECT_THROW(
        {
            for (int i = 0; i < 400; ++i)
                dec.decode(t);
        },
        CoderError);
}

TEST(RangeCoder, DeterministicBytes)
{
    const CdfTable t = cdf_from_frequencies(std::vector<std::uint64_t>{10, 20, 30, 40});
    Stream s;
    for (int i = 0; i < 1000; ++i) {
        s.tables.push_back(&t);
        s.symbols.push_back(static_cast<std::size_t>((i * 7) % 4));
    }
    EXPECT_EQ(encode(s), encode(s));
}
