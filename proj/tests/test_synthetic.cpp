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

#include "acfid/synthetic.hpp"

using namespace acfid;

namespace {

SyntheticConfig small_config(std::uint64_t seed, std::size_t n)
{
    SyntheticConfig c;
    c.seed = seed;
    c.n_events = n;
    return c;
}

} // namespace

TEST(Synthetic, Deterministic)
{
    const Dataset a = generate_synthetic(small_config(11, 100));
    const Dataset b = generate_synthetic(small_config(11, 100));
    EXPECT_EQ(a, b);
    EXPECT_NE(a, generate_synthetic(small_config(12, 100)));
    EXPECT_TRUE(validate_dataset(a).ok);
    EXPECT_TRUE(has_oracle_provenance(a, small_config(0, 1)));
}

TEST(Synthetic, NearbySeedsShareNoEvents)
{
    const Dataset a = generate_synthetic(small_config(41, 256));
    const Dataset b = generate_synthetic(small_config(42, 256));
    std::size_t shared = 0;
    for (const Event& e : a.events)
        shared += std::count(b.events.begin(), b.events.end(), e);
    EXPECT_EQ(shared, 0u);
}

TEST(Synthetic, EventsAreLeftPackedAndValid)
{
    const Dataset ds = generate_synthetic(small_config(3, 2000));
    for (const Event& e : ds.events) {
        ASSERT_TRUE(validate_event(e).ok);
        for (int l = 0; l < kLayerViews; ++l)
            for (int s = 1; s < kSlots; ++s)
                if (e.occupied(l, s))
                    ASSERT_TRUE(e.occupied(l, s - 1));
        const double p = e.momentum_magnitude();
        ASSERT_GE(p, 0.2 - 1e-5);
        ASSERT_LE(p, 10.0 + 1e-5);
    }
}

TEST(Synthetic, DegenerateRatesGivePadding)
{
    SyntheticConfig c = small_config(5, 500);
    c.occupancy_rate_base.fill(1e-12);
    c.occupancy_slope = 0.0;
    const Dataset ds = generate_synthetic(c);
    for (const Event& e : ds.events)
        for (int l = 0; l < kLayerViews; ++l)
            ASSERT_EQ(e.hit_count(l), 0);
    EXPECT_LT(SyntheticLaw(c).hits_entropy(), 1e-6);
}

TEST(Synthetic, PmfsNormalise)
{
    const SyntheticLaw law(SyntheticConfig{});
    for (double lam : {0.3, 2.5, 19.0, 20.0}) {
        double s = 0.0;
        for (int k = 0; k <= kSlots; ++k)
            s += SyntheticLaw::count_prob(k, lam);
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
    for (int l : {0, 1, 5}) {
        for (double c : {1.0, 10.3, 36.0}) {
            double s = 0.0;
            for (int k = 1; k <= n_strips(l); ++k)
                s += law.strip_prob(k, l, c);
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
    for (double mu : {0.5, 30.0, 600.0}) {
        long double s = 0.0L, h = 0.0L;
        for (int k = 0; k <= kAdcMax; ++k) {
            const double p = SyntheticLaw::adc_prob(k, mu);
            s += p;
            if (p > 0)
                h -= p * std::log2(p);
        }
        EXPECT_NEAR(static_cast<double>(s), 1.0, 1e-9);
        EXPECT_NEAR(SyntheticLaw::adc_entropy(mu), static_cast<double>(h), 1e-8);
    }
}

TEST(Synthetic, NotLeftPackedIsImpossible)
{
    const SyntheticLaw law(SyntheticConfig{});
    Event e;
    e.momentum = {0.1F, 0.1F, 3.0F};
    e.strips[0][1] = 10;
    e.adcs[0][1] = 5;
    EXPECT_TRUE(std::isinf(law.hits_codelength(e)));
    e.strips[0][0] = 10;
    e.adcs[0][0] = 5;
    EXPECT_TRUE(std::isfinite(law.hits_codelength(e)));
}

TEST(Synthetic, MeanHitCountMatchesLaw)
{
    const SyntheticConfig c = small_config(21, 100000);
    const SyntheticLaw law(c);
    const Dataset ds = generate_synthetic(c);
    for (int l = 0; l < kLayerViews; ++l) {
        double sum = 0.0;
        for (const Event& e : ds.events)
            sum += e.hit_count(l);
        const double mean = sum / static_cast<double>(ds.size());
        const double expected =
            law.momentum_integral([&](double p) { return law.expected_count(law.hit_rate(l, p)); }, c.p_min, c.p_max)
                .first;
        EXPECT_NEAR(mean / expected, 1.0, 0.02) << layer_view_name(l);
    }
}

TEST(Synthetic, OracleCodelengthConvergesToEntropy)
{
    const SyntheticConfig c = small_config(22, 100000);
    const SyntheticLaw law(c);
    const Dataset ds = generate_synthetic(c);
    double s = 0.0, s2 = 0.0;
    for (const Event& e : ds.events) {
        const double v = law.hits_codelength(e);
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(ds.size());
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / (n - 1));
    EXPECT_NEAR(mean, law.hits_entropy(), 3 * se);
}

TEST(SyntheticConfigText, RoundTripAndErrors)
{
    SyntheticConfig c;
    c.seed = 99;
    c.n_events = 1234;
    c.occupancy_slope = 0.75;
    c.adc_scale[4] = 12.5;
    c.momentum_law = MomentumLaw::LogUniform;
    const SyntheticConfig back = parse_synthetic_config(format_synthetic_config(c));
    EXPECT_EQ(back.law_hash(), c.law_hash());
    EXPECT_EQ(back.seed, 99U);
    EXPECT_EQ(back.n_events, 1234U);
    EXPECT_THROW(parse_synthetic_config("bogus = 1\n"), UsageError);
    EXPECT_THROW(parse_synthetic_config("shower_width = -1\n"), UsageError);
    EXPECT_EQ(parse_synthetic_config("# comment only\n").law_hash(), SyntheticConfig{}.law_hash());
}
