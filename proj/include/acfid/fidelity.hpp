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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "acfid/canonical.hpp"
#include "acfid/codec.hpp"
#include "acfid/metrics.hpp"
#include "acfid/parallel.hpp"
#include "acfid/random.hpp"

namespace acfid {

// ---------------------------------------------------------------------------
// Perturbation

/// ADC scale distortion a = 1 + eps: round half away from zero, clip to [0, 65535].
inline Dataset apply_adc_scale(const Dataset& ds, double eps)
{
    if (!(eps >= 0.0) || !std::isfinite(eps))
        throw UsageError("epsilon must be finite and non-negative");
    Dataset out = ds;
    out.provenance = ds.provenance + "|adc_scale(eps=" + fmt_g(eps) + ")";
    const double a = 1.0 + eps;
    for (Event& e : out.events)
        for (int l = 0; l < kLayerViews; ++l)
            for (int s = 0; s < kSlots; ++s)
                if (e.occupied(l, s))
                    e.adcs[l][s] = static_cast<std::int32_t>(
                        std::clamp(std::round(static_cast<double>(e.adcs[l][s]) * a), 0.0, double(kAdcMax)));
    return out;
}

/// Fraction of occupied ADC entries that differ between a dataset and its perturbation.
inline double changed_fraction(const Dataset& a, const Dataset& b)
{
    if (a.size() != b.size())
        throw UsageError("changed_fraction needs datasets of equal size");
    std::uint64_t occupied = 0, changed = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (int l = 0; l < kLayerViews; ++l) {
            for (int s = 0; s < kSlots; ++s) {
                if (a.events[i].occupied(l, s) != b.events[i].occupied(l, s))
                    throw UsageError("changed_fraction needs identical occupancy patterns");
                if (!a.events[i].occupied(l, s))
                    continue;
                ++occupied;
                changed += a.events[i].adcs[l][s] != b.events[i].adcs[l][s];
            }
        }
    }
    return occupied ? static_cast<double>(changed) / static_cast<double>(occupied) : 0.0;
}

// ---------------------------------------------------------------------------
// Blocked design

/// K disjoint equal-size blocks: contiguous chunks of a seeded shuffle; the remainder is dropped.
/// Block size defaults to floor(n / K).
struct BlockPlan {
    std::size_t k = 0;
    std::size_t block_size = 0;
    std::vector<std::size_t> order;

    std::span<const std::size_t> block(std::size_t i) const
    {
        return std::span<const std::size_t>(order).subspan(i * block_size, block_size);
    }
};

inline BlockPlan make_block_plan(std::size_t n, std::size_t k, std::uint64_t seed, std::size_t block_size = 0)
{
    if (k < 1)
        throw UsageError("block count must be at least 1");
    if (k > n)
        throw UsageError("block count K=" + std::to_string(k) + " exceeds the " + std::to_string(n) + " events");
    if (block_size == 0)
        block_size = n / k;
    if (block_size * k > n)
        throw UsageError(std::to_string(k) + " blocks of " + std::to_string(block_size) + " events need more than the " +
                         std::to_string(n) + " available");
    std::mt19937_64 rng(mix64(seed));
    BlockPlan p;
    p.k = k;
    p.block_size = block_size;
    p.order = shuffled_indices(n, rng);
    p.order.resize(k * p.block_size);
    return p;
}

/// L_A(D_k) = achieved payload bits / block size, each block encoded independently under m.
inline std::vector<double> blocked_codelengths(const LoweredDataset& low, const BlockPlan& plan)
{
    if (plan.order.size() > low.size())
        throw UsageError("block plan does not fit the dataset");
    std::vector<double> out(plan.k);
    for (std::size_t i = 0; i < plan.k; ++i)
        out[i] = static_cast<double>(low.payload_bits(plan.block(i))) / static_cast<double>(plan.block_size);
    return out;
}

inline std::vector<double> blocked_codelengths(const Dataset& ds, const ModelBundle& m, const BlockPlan& plan)
{
    return blocked_codelengths(LoweredDataset(ds, m), plan);
}

// ---------------------------------------------------------------------------
// Welch-type excess test with an empirical null

struct TestResult {
    double delta_l = 0.0;
    double se = 0.0;
    double t = 0.0;
    double p = std::numeric_limits<double>::quiet_NaN(); // set once a null is supplied
    std::size_t null_size = 0;
    bool degenerate = false; // SE == 0
    double mu_c = 0.0, mu_b = 0.0, s_c = 0.0, s_b = 0.0;
};

inline TestResult excess_test(std::span<const double> c, std::span<const double> b)
{
    if (c.size() != b.size())
        throw UsageError("excess test needs the same block count on both sides");
    if (c.size() < 2)
        throw UsageError("excess test needs at least 2 blocks");
    const double k = static_cast<double>(c.size());
    auto moments = [&](std::span<const double> v, double& mu, double& sd) {
        long double s = 0.0L;
        for (double x : v)
            s += x;
        mu = static_cast<double>(s / v.size());
        long double ss = 0.0L;
        for (double x : v)
            ss += (x - mu) * (x - mu);
        sd = std::sqrt(static_cast<double>(ss / (v.size() - 1)));
    };
    TestResult r;
    moments(c, r.mu_c, r.s_c);
    moments(b, r.mu_b, r.s_b);
    r.delta_l = r.mu_c - r.mu_b;
    r.se = std::sqrt(r.s_c * r.s_c / k + r.s_b * r.s_b / k);
    if (r.se > 0.0) {
        r.t = r.delta_l / r.se;
    } else {
        r.degenerate = true;
        r.t = r.delta_l == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.delta_l);
    }
    return r;
}

/// One-sided empirical p-value (1 + #{t_null >= t_obs}) / (R + 1).
inline double p_value(double t_obs, std::span<const double> null)
{
    std::size_t exceed = 0;
    for (double t : null)
        exceed += t >= t_obs;
    return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(null.size()) + 1.0);
}

/// Sorted null; p-values by binary search.
class NullDistribution {
public:
    NullDistribution() = default;
    explicit NullDistribution(std::vector<double> t) : t_(std::move(t)), sorted_(t_)
    {
        std::sort(sorted_.begin(), sorted_.end());
    }

    double p(double t_obs) const
    {
        const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), t_obs);
        return (1.0 + static_cast<double>(sorted_.end() - it)) / (static_cast<double>(sorted_.size()) + 1.0);
    }

    std::size_t size() const { return t_.size(); }
    const std::vector<double>& values() const { return t_; }

private:
    std::vector<double> t_;      // resample order
    std::vector<double> sorted_;
};

/// Real-vs-real null of t: R seeded splits of the pool into two disjoint halves,
/// each cut into K blocks of floor(|pool| / 2K) events.
inline std::vector<double> calibrate_null(const LoweredDataset& pool, std::size_t k, std::size_t r, std::uint64_t seed,
                                          unsigned jobs = 1)
{
    if (k < 2)
        throw UsageError("null calibration needs K >= 2");
    if (pool.size() < 4 * k)
        throw UsageError("null pool of " + std::to_string(pool.size()) + " events is too small for K=" +
                         std::to_string(k) + " (need at least 2 events per block per half)");
    if (r < 1)
        throw UsageError("null calibration needs R >= 1");
    const std::size_t n = pool.size();
    const std::size_t half = n / 2;
    const std::size_t bs = half / k;
    std::vector<double> out(r);
    parallel_for(r, jobs, [&](std::size_t i) {
        auto rng = stream_engine(seed, i);
        const auto idx = shuffled_indices(n, rng);
        std::vector<double> x(k), y(k);
        for (std::size_t b = 0; b < k; ++b) {
            x[b] = static_cast<double>(pool.payload_bits(std::span(idx).subspan(b * bs, bs))) / double(bs);
            y[b] = static_cast<double>(pool.payload_bits(std::span(idx).subspan(half + b * bs, bs))) / double(bs);
        }
        out[i] = excess_test(x, y).t;
    });
    return out;
}

/// Union of two datasets with exact duplicates removed (first occurrence kept).
inline Dataset union_unique(const Dataset& a, const Dataset& b)
{
    Dataset out;
    out.provenance = "union(" + a.provenance + "," + b.provenance + ")";
    std::unordered_multimap<std::uint64_t, std::size_t> seen;
    for (const Dataset* d : {&a, &b}) {
        for (const Event& e : d->events) {
            ByteWriter w;
            write_event(w, e);
            const std::uint64_t h = fnv1a64(w.bytes());
            bool dup = false;
            for (auto [it, end] = seen.equal_range(h); it != end; ++it)
                dup = dup || out.events[it->second] == e;
            if (dup)
                continue;
            seen.emplace(h, out.events.size());
            out.events.push_back(e);
        }
    }
    return out;
}

struct GapOptions {
    std::size_t k = 10;
    std::size_t r = 1500;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

/// Fidelity gap L(S) - L(R) under a model fitted on a sibling split of the real data,
/// with p calibrated on real-vs-real halves of `real_ref`. Both samples are blocked at
/// the null's block size floor(|R| / 2K), so observed and null t share one distribution.
inline TestResult fidelity_gap(const Dataset& real_ref, const Dataset& synth, const ModelBundle& m,
                               const GapOptions& opt = {})
{
    if (opt.k < 2)
        throw UsageError("fidelity gap needs K >= 2");
    const std::size_t bs = real_ref.size() / (2 * opt.k);
    if (bs < 1)
        throw UsageError("reference sample is too small for K=" + std::to_string(opt.k));
    const LoweredDataset real_low(real_ref, m);
    const LoweredDataset synth_low(synth, m);
    const std::uint64_t plan_seed = mix64(opt.seed ^ 0x51);
    const auto c = blocked_codelengths(synth_low, make_block_plan(synth.size(), opt.k, plan_seed, bs));
    const auto b = blocked_codelengths(real_low, make_block_plan(real_ref.size(), opt.k, plan_seed, bs));
    TestResult res = excess_test(c, b);
    const NullDistribution null(calibrate_null(real_low, opt.k, opt.r, mix64(opt.seed ^ 0x53), opt.jobs));
    res.p = null.p(res.t);
    res.null_size = null.size();
    return res;
}

// ---------------------------------------------------------------------------
// MMD baseline

inline constexpr int kFeatureDim = 6 * kLayerViews + 3;
using FeatureVector = std::array<double, kFeatureDim>;

/// Per layer-view: occupancy fraction, ADC mean/SD/max and strip mean/SD over occupied
/// slots (population SD; zeros for an empty layer-view); then px, py, pz.
inline FeatureVector extract_features(const Event& e)
{
    FeatureVector f{};
    for (int l = 0; l < kLayerViews; ++l) {
        double n = 0, sa = 0, sa2 = 0, amax = 0, ss = 0, ss2 = 0;
        for (int s = 0; s < kSlots; ++s) {
            if (!e.occupied(l, s))
                continue;
            const double a = e.adcs[l][s], st = e.strips[l][s];
            n += 1;
            sa += a;
            sa2 += a * a;
            ss += st;
            ss2 += st * st;
            amax = std::max(amax, a);
        }
        double* o = f.data() + 6 * l;
        o[0] = n / kSlots;
        if (n > 0) {
            const double ma = sa / n, ms = ss / n;
            o[1] = ma;
            o[2] = std::sqrt(std::max(0.0, sa2 / n - ma * ma));
            o[3] = amax;
            o[4] = ms;
            o[5] = std::sqrt(std::max(0.0, ss2 / n - ms * ms));
        }
    }
    for (int c = 0; c < 3; ++c)
        f[6 * kLayerViews + c] = e.momentum[c];
    return f;
}

inline std::vector<FeatureVector> extract_features(const Dataset& ds)
{
    std::vector<FeatureVector> out;
    out.reserve(ds.size());
    for (const Event& e : ds.events)
        out.push_back(extract_features(e));
    return out;
}

inline double squared_distance(const FeatureVector& a, const FeatureVector& b)
{
    double d = 0.0;
    for (int i = 0; i < kFeatureDim; ++i)
        d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
}

/// Unbiased MMD^2 U-statistic with k(u, v) = exp(-|u - v|^2 / (2 sigma^2)). Kernels and
/// sums are carried in long double: the three terms nearly cancel for similar samples.
inline double mmd2_unbiased(std::span<const FeatureVector> x, std::span<const FeatureVector> y, double sigma)
{
    if (x.size() < 2 || y.size() < 2)
        throw UsageError("MMD needs at least 2 points per sample");
    if (!(sigma > 0.0))
        throw UsageError("MMD bandwidth must be positive");
    const long double g = 1.0L / (2.0L * sigma * sigma);
    auto kernel = [&](const FeatureVector& a, const FeatureVector& b) {
        long double d = 0.0L;
        for (int i = 0; i < kFeatureDim; ++i) {
            const long double t = static_cast<long double>(a[i]) - b[i];
            d += t * t;
        }
        return std::exp(-g * d);
    };
    auto within = [&](std::span<const FeatureVector> v) {
        long double s = 0.0L;
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = i + 1; j < v.size(); ++j)
                s += kernel(v[i], v[j]);
        return 2.0L * s / (static_cast<long double>(v.size()) * static_cast<long double>(v.size() - 1));
    };
    long double cross = 0.0L;
    for (const auto& a : x)
        for (const auto& b : y)
            cross += kernel(a, b);
    return static_cast<double>(within(x) + within(y) -
                               2.0L * cross / (static_cast<long double>(x.size()) * static_cast<long double>(y.size())));
}

/// Median pairwise distance on a seeded subsample of at most `max_points` points.
inline double median_bandwidth(std::span<const FeatureVector> pooled, std::size_t max_points, std::uint64_t seed)
{
    if (pooled.size() < 2)
        throw UsageError("bandwidth heuristic needs at least 2 points");
    std::mt19937_64 rng(mix64(seed));
    auto idx = shuffled_indices(pooled.size(), rng);
    idx.resize(std::min(idx.size(), max_points));
    std::vector<double> d;
    d.reserve(idx.size() * (idx.size() - 1) / 2);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = i + 1; j < idx.size(); ++j)
            d.push_back(std::sqrt(squared_distance(pooled[idx[i]], pooled[idx[j]])));
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double med = *mid;
    if (d.size() % 2 == 0) {
        const double lower = *std::max_element(d.begin(), mid);
        med = 0.5 * (med + lower);
    }
    if (!(med > 0.0))
        throw UsageError("bandwidth heuristic found zero median distance");
    return med;
}

namespace detail {

inline std::vector<FeatureVector> gather(std::span<const FeatureVector> f, std::span<const std::size_t> idx,
                                         std::size_t n)
{
    std::vector<FeatureVector> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n && i < idx.size(); ++i)
        out.push_back(f[idx[i]]);
    return out;
}

} // namespace detail

/// d_k = MMD^2(C_k, B2_k) - MMD^2(B1_k, B2_k). C shares B1's plan (C is B1 perturbed
/// event by event); each MMD uses the first `mmd_block` events of the codec block.
inline std::vector<double> mmd_block_contrast(std::span<const FeatureVector> c, std::span<const FeatureVector> b1,
                                              std::span<const FeatureVector> b2, const BlockPlan& plan1,
                                              const BlockPlan& plan2, std::size_t mmd_block, double sigma)
{
    if (plan1.k != plan2.k)
        throw UsageError("MMD contrast needs a common block count");
    if (c.size() != b1.size())
        throw UsageError("perturbed sample must mirror its source sample");
    std::vector<double> d(plan1.k);
    for (std::size_t k = 0; k < plan1.k; ++k) {
        const std::size_t n = std::min({mmd_block, plan1.block_size, plan2.block_size});
        const auto ck = detail::gather(c, plan1.block(k), n);
        const auto b1k = detail::gather(b1, plan1.block(k), n);
        const auto b2k = detail::gather(b2, plan2.block(k), n);
        d[k] = mmd2_unbiased(ck, b2k, sigma) - mmd2_unbiased(b1k, b2k, sigma);
    }
    return d;
}

/// Real-vs-real null of the MMD contrast t: a seeded subsample of 3 K n pool points,
/// re-split R times into X, Y, Z blocks with d_k = MMD^2(X_k, Z_k) - MMD^2(Y_k, Z_k).
inline std::vector<double> calibrate_mmd_null(std::span<const FeatureVector> pool, std::size_t k, std::size_t n,
                                              std::size_t r, double sigma, std::uint64_t seed, unsigned jobs = 1)
{
    if (k < 2 || n < 2)
        throw UsageError("MMD null needs K >= 2 and at least 2 events per block");
    const std::size_t m = 3 * k * n;
    if (pool.size() < m)
        throw UsageError("MMD null pool of " + std::to_string(pool.size()) + " events is smaller than 3*K*n = " +
                         std::to_string(m));
    std::mt19937_64 rng(mix64(seed));
    auto sub = shuffled_indices(pool.size(), rng);
    sub.resize(m);
    const double g = 1.0 / (2.0 * sigma * sigma);
    std::vector<float> gram(m * m);
    parallel_for(m, jobs, [&](std::size_t i) {
        for (std::size_t j = 0; j < m; ++j)
            gram[i * m + j] = static_cast<float>(std::exp(-g * squared_distance(pool[sub[i]], pool[sub[j]])));
    });
    auto mmd = [&](std::span<const std::size_t> a, std::span<const std::size_t> b) {
        double sa = 0, sb = 0, sc = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                sa += gram[a[i] * m + a[j]];
                sb += gram[b[i] * m + b[j]];
            }
            for (std::size_t j = 0; j < n; ++j)
                sc += gram[a[i] * m + b[j]];
        }
        const double nn = static_cast<double>(n);
        return 2.0 * (sa + sb) / (nn * (nn - 1)) - 2.0 * sc / (nn * nn);
    };
    std::vector<double> out(r);
    parallel_for(r, jobs, [&](std::size_t i) {
        auto rr = stream_engine(seed, i);
        const auto idx = shuffled_indices(m, rr);
        const std::span<const std::size_t> all(idx);
        std::vector<double> d(k), zero(k, 0.0);
        for (std::size_t b = 0; b < k; ++b) {
            const auto x = all.subspan(b * n, n);
            const auto y = all.subspan((k + b) * n, n);
            const auto z = all.subspan((2 * k + b) * n, n);
            d[b] = mmd(x, z) - mmd(y, z);
        }
        out[i] = excess_test(d, zero).t;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Epsilon scan

struct ScanOptions {
    std::vector<double> eps_grid;
    std::size_t k = 10;
    std::size_t r = 1500;
    std::size_t mmd_block = 100;
    std::size_t bandwidth_points = 1000;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

struct ScanRow {
    double eps = 0.0;
    TestResult uncond;
    TestResult cond;
    TestResult mmd; // delta_l holds mean d_k (Delta MMD^2)
    double changed_adc_fraction = 0.0;
};

struct ScanResult {
    std::vector<ScanRow> rows;
    std::vector<double> null_uncond, null_cond, null_mmd;
    double bandwidth = 0.0;
    std::size_t block_size = 0;
    std::size_t null_block_size = 0;
    std::size_t mmd_block_size = 0;
    std::size_t mmd_null_block_size = 0;
};

/// Three-split protocol: C_eps = perturb(B1) and baseline B2 coded under models fitted
/// on a third split; blocks are fixed across the grid.
inline ScanResult run_scan(const Dataset& b1, const Dataset& b2, const ModelBundle& uncond, const ModelBundle& cond,
                           const ScanOptions& opt)
{
    if (opt.eps_grid.empty())
        throw UsageError("epsilon grid is empty");
    ScanResult res;
    const BlockPlan plan1 = make_block_plan(b1.size(), opt.k, mix64(opt.seed ^ 0xB1));
    const BlockPlan plan2 = make_block_plan(b2.size(), opt.k, mix64(opt.seed ^ 0xB2));
    if (plan1.block_size != plan2.block_size)
        throw UsageError("baseline samples must give equal block sizes");
    res.block_size = plan1.block_size;

    const Dataset pool = union_unique(b1, b2);
    const ModelBundle* models[2] = {&uncond, &cond};
    std::vector<double> base[2];
    NullDistribution nulls[2];
    for (int c = 0; c < 2; ++c) {
        const LoweredDataset pool_low(pool, *models[c]);
        base[c] = blocked_codelengths(LoweredDataset(b2, *models[c]), plan2);
        nulls[c] = NullDistribution(calibrate_null(pool_low, opt.k, opt.r, mix64(opt.seed ^ 0x4E), opt.jobs));
    }
    res.null_block_size = pool.size() / 2 / opt.k;
    res.null_uncond = nulls[0].values();
    res.null_cond = nulls[1].values();

    const auto f1 = extract_features(b1);
    const auto f2 = extract_features(b2);
    const auto fpool = extract_features(pool);
    res.bandwidth = median_bandwidth(fpool, opt.bandwidth_points, mix64(opt.seed ^ 0xBA));
    const std::size_t n_mmd = std::min(opt.mmd_block, plan1.block_size);
    // The null draws three disjoint block sets from the pool; shrink its blocks if the pool is short.
    const std::size_t n_mmd_null = std::min(n_mmd, fpool.size() / (3 * opt.k));
    res.mmd_block_size = n_mmd;
    res.mmd_null_block_size = n_mmd_null;
    const NullDistribution mmd_null(
        calibrate_mmd_null(fpool, opt.k, n_mmd_null, opt.r, res.bandwidth, mix64(opt.seed ^ 0x3D), opt.jobs));
    res.null_mmd = mmd_null.values();

    res.rows.resize(opt.eps_grid.size());
    parallel_for(opt.eps_grid.size(), opt.jobs, [&](std::size_t i) {
        ScanRow& row = res.rows[i];
        row.eps = opt.eps_grid[i];
        const Dataset c = apply_adc_scale(b1, row.eps);
        row.changed_adc_fraction = changed_fraction(b1, c);
        for (int m = 0; m < 2; ++m) {
            TestResult t = excess_test(blocked_codelengths(LoweredDataset(c, *models[m]), plan1), base[m]);
            t.p = nulls[m].p(t.t);
            t.null_size = nulls[m].size();
            (m == 0 ? row.uncond : row.cond) = t;
        }
        const auto fc = extract_features(c);
        const auto d = mmd_block_contrast(fc, f1, f2, plan1, plan2, n_mmd, res.bandwidth);
        const std::vector<double> zero(d.size(), 0.0);
        row.mmd = excess_test(d, zero);
        row.mmd.p = mmd_null.p(row.mmd.t);
        row.mmd.null_size = mmd_null.size();
    });
    return res;
}

/// "log:lo:hi:n" (n log-spaced points), "lin:lo:hi:n", or a comma-separated list.
inline std::vector<double> parse_eps_grid(const std::string& spec)
{
    auto num = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size() || !std::isfinite(v) || v < 0)
            throw UsageError("bad epsilon value '" + s + "' in grid '" + spec + "'");
        return v;
    };
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, spec.find(':') != std::string::npos ? ':' : ',');)
        parts.push_back(p);
    std::vector<double> grid;
    if (!parts.empty() && (parts[0] == "log" || parts[0] == "lin")) {
        if (parts.size() != 4)
            throw UsageError("grid must look like log:lo:hi:n");
        const double lo = num(parts[1]), hi = num(parts[2]);
        const double nd = num(parts[3]);
        const auto n = static_cast<std::size_t>(nd);
        if (static_cast<double>(n) != nd || n < 1 || !(hi >= lo) || (parts[0] == "log" && !(lo > 0)))
            throw UsageError("grid needs integer n >= 1, hi >= lo (lo > 0 for log): '" + spec + "'");
        for (std::size_t i = 0; i < n; ++i) {
            const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
            grid.push_back(parts[0] == "log" ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f);
        }
        if (n > 1)
            grid.back() = hi;
    } else {
        for (const auto& p : parts)
            grid.push_back(num(p));
    }
    if (grid.empty())
        throw UsageError("epsilon grid is empty");
    return grid;
}

inline std::string scan_csv(const ScanResult& s)
{
    std::ostringstream os;
    os << "eps,dL_uncond,p_uncond,dL_cond,p_cond,dMMD2,p_mmd,changed_adc_fraction\n";
    for (const auto& r : s.rows)
        os << fmt_g(r.eps) << ',' << fmt_g(r.uncond.delta_l) << ',' << fmt_g(r.uncond.p) << ','
           << fmt_g(r.cond.delta_l) << ',' << fmt_g(r.cond.p) << ',' << fmt_g(r.mmd.delta_l) << ','
           << fmt_g(r.mmd.p) << ',' << fmt_g(r.changed_adc_fraction) << '\n';
    return os.str();
}

/// Companion table with the test internals (SE, t) per method.
inline std::string scan_detail_csv(const ScanResult& s)
{
    std::ostringstream os;
    os << "eps,method,delta,se,t,p,degenerate,null_size\n";
    for (const auto& r : s.rows) {
        const std::pair<const char*, const TestResult*> m[] = {
            {"uncond", &r.uncond}, {"cond", &r.cond}, {"mmd", &r.mmd}};
        for (const auto& [name, t] : m)
            os << fmt_g(r.eps) << ',' << name << ',' << fmt_g(t->delta_l) << ',' << fmt_g(t->se) << ','
               << fmt_g(t->t) << ',' << fmt_g(t->p) << ',' << (t->degenerate ? 1 : 0) << ',' << t->null_size << '\n';
    }
    return os.str();
}

inline std::string null_csv(const ScanResult& s)
{
    std::ostringstream os;
    os << "resample,t_uncond,t_cond,t_mmd\n";
    for (std::size_t i = 0; i < s.null_uncond.size(); ++i)
        os << i << ',' << fmt_g(s.null_uncond[i]) << ',' << fmt_g(s.null_cond[i]) << ','
           << fmt_g(i < s.null_mmd.size() ? s.null_mmd[i] : std::numeric_limits<double>::quiet_NaN()) << '\n';
    return os.str();
}

inline std::string scan_text(const ScanResult& s)
{
    std::ostringstream os;
    char line[200];
    std::snprintf(line, sizeof line, "%10s %12s %11s %12s %11s %12s %11s %9s\n", "eps", "dL(uncond)", "p(uncond)",
                  "dL(cond)", "p(cond)", "dMMD2", "p(MMD)", "changed");
    os << line;
    for (const auto& r : s.rows) {
        std::snprintf(line, sizeof line, "%10.2e %12.3e %11.3e %12.3e %11.3e %12.3e %11.3e %9.4f\n", r.eps,
                      r.uncond.delta_l, r.uncond.p, r.cond.delta_l, r.cond.p, r.mmd.delta_l, r.mmd.p,
                      r.changed_adc_fraction);
        os << line;
    }
    return os.str();
}

} // namespace acfid
