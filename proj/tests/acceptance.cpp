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


// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// `acceptance 3 7` runs only criteria 3 and 7.

#include <algorithm>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "acfid/deflate.hpp"
#include "acfid/fidelity.hpp"
#include "acfid/manifest.hpp"

using namespace acfid;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string strf(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string strf(const char* f, ...)
{
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

Dataset synthetic(std::uint64_t seed, std::size_t n, SyntheticConfig cfg = {})
{
    cfg.seed = seed;
    cfg.n_events = n;
    return generate_synthetic(cfg);
}

const MomentumBinning kBins = MomentumBinning::uniform(10, 10.0);

// Budget additivity is checked on every encode the suite performs.
struct BudgetTally {
    std::size_t runs = 0;
    double max_dev = 0.0;
} g_budget;

void check_budget(const CodelengthAccount& acc, const Dataset& ds)
{
    const BitBudget b = bit_budget(acc, ds);
    double occ = 0, strip = 0, adc = 0, sum = 0;
    for (const auto& r : b.layers) {
        occ += r.occ;
        strip += r.strip;
        adc += r.adc;
        sum += r.sum();
    }
    const double n = ds.empty() ? 1.0 : static_cast<double>(ds.size());
    const double devs[] = {
        std::abs(occ - b.hits_total.occ),
        std::abs(strip - b.hits_total.strip),
        std::abs(adc - b.hits_total.adc),
        std::abs(sum - b.hits_total.sum()),
        std::abs(b.total() - static_cast<double>(acc.ideal_total()) / n),
    };
    ++g_budget.runs;
    for (double d : devs)
        g_budget.max_dev = std::max(g_budget.max_dev, d);
}

// Round trip with per-section bound bookkeeping.
struct RoundTrip {
    bool equal = false;
    double min_gap = 1e300, max_gap = -1e300;
    CodelengthAccount acc;
};

RoundTrip round_trip(const Dataset& ds, const ModelBundle& m)
{
    RoundTrip rt;
    auto [cd, acc] = encode_dataset(ds, m);
    const Dataset back = decode_dataset(load_compressed(save_compressed(cd)), m);
    rt.equal = canonical_serialize(back) == canonical_serialize(ds);
    for (int t = 0; t < kTags; ++t) {
        const double gap = static_cast<double>(acc.achieved_bits[t]) -
                           static_cast<double>(acc.section_ideal(static_cast<Tag>(t)));
        rt.min_gap = std::min(rt.min_gap, gap);
        rt.max_gap = std::max(rt.max_gap, gap);
    }
    check_budget(acc, ds);
    rt.acc = acc;
    return rt;
}

double g_gap_min = 1e300, g_gap_max = -1e300;

// ---------------------------------------------------------------------------

Outcome closure()
{
    const Stopwatch clock;
    const Dataset train = synthetic(1, 20000);
    const ModelBundle models[] = {fit_unconditional(train), fit_conditional(train, kBins)};
    const std::size_t sizes[] = {1, 10, 1000, 10000};
    int ok = 0, total = 0;
    for (int i = 0; i < 50; ++i) {
        const Dataset ds = synthetic(1000 + i, sizes[i % 4]);
        for (const auto& m : models) {
            const RoundTrip rt = round_trip(ds, m);
            ok += rt.equal;
            ++total;
            g_gap_min = std::min(g_gap_min, rt.min_gap);
            g_gap_max = std::max(g_gap_max, rt.max_gap);
        }
    }
    const double secs = clock.seconds();
    return {ok == total && secs < 120.0,
            strf("%d/%d bitwise round trips (50 datasets, N in {1,10,1e3,1e4}, both modes) in %.1f s (limit 120 s)", ok,
                 total, secs)};
}

Outcome shannon_bound()
{
    const Stopwatch clock;
    const Dataset train = synthetic(2, 20000);
    const Dataset ds = synthetic(3, 100000);
    double worst_pct = 0.0;
    bool equal = true;
    for (const auto& m : {fit_unconditional(train), fit_conditional(train, kBins)}) {
        const RoundTrip rt = round_trip(ds, m);
        equal = equal && rt.equal;
        g_gap_min = std::min(g_gap_min, rt.min_gap);
        g_gap_max = std::max(g_gap_max, rt.max_gap);
        const double ideal = static_cast<double>(rt.acc.ideal_total());
        worst_pct = std::max(worst_pct, (static_cast<double>(rt.acc.achieved_total()) - ideal) / ideal * 100.0);
    }
    const double secs = clock.seconds();
    const bool pass = equal && g_gap_min >= 0.0 && g_gap_max <= 64.0 && worst_pct < 1e-3 && secs < 60.0;
    return {pass, strf("section gaps over all encodes in [%.2f, %.2f] bits (bound [0, 64]); overhead at N=1e5 "
                       "%.2e %% (limit 1e-3 %%); %.1f s",
                       g_gap_min, g_gap_max, worst_pct, secs)};
}

Outcome oracle_kl()
{
    const Stopwatch clock;
    SyntheticConfig cfg;
    cfg.seed = 31;
    const SyntheticLaw law(cfg);
    ModelFitter fitter(ModelMode::Conditional, kBins);
    const std::size_t n_train = 1000000;
    for (std::size_t i = 0; i < n_train; ++i) {
        auto rng = stream_engine(cfg.seed, i);
        fitter.add(law.sample(rng));
    }
    const ModelBundle fit = fitter.finish();
    const ModelBundle oracle = oracle_model(cfg, fit);

    const Dataset eval = synthetic(32, 100000, cfg);
    const OracleKl kl_fit = kl_vs_oracle(eval, fit, cfg);
    const OracleKl kl_inj = kl_vs_oracle(eval, oracle, cfg);
    std::vector<double> diff(eval.size());
    for (std::size_t i = 0; i < eval.size(); ++i)
        diff[i] = hits_codelength(eval.events[i], fit) - hits_codelength(eval.events[i], oracle);
    const MeanEstimate excess = mean_and_se(diff);

    // Expected estimation and smoothing loss of add-one tables: about one count per
    // alphabet symbol, i.e. sum of alphabet sizes / (N ln 2) bits per event.
    double alphabet = 0.0;
    for (std::size_t t = 0; t < fit.kin_id(0); ++t)
        alphabet += fit.alphabet(t);
    const double smoothing_eps = alphabet / (static_cast<double>(n_train) * std::log(2.0));

    const double secs = clock.seconds();
    const bool nonneg = kl_fit.kl >= -3.0 * kl_fit.se && kl_inj.kl >= -3.0 * kl_inj.se;
    const bool converges = excess.mean >= -3.0 * excess.se && excess.mean <= smoothing_eps + 3.0 * excess.se;
    return {nonneg && converges && secs < 300.0,
            strf("KL(fit 1e6) = %.3f +- %.3f, KL(injected) = %.3f +- %.3f bits/event (>= -3 SE); "
                 "fit - injected = %.4f +- %.4f within [0, smoothing eps %.4f] at 3 SE; %.0f s",
                 kl_fit.kl, kl_fit.se, kl_inj.kl, kl_inj.se, excess.mean, excess.se, smoothing_eps, secs)};
}

Outcome train_test_asymmetry()
{
    // Small training sets: the overfitting gap shrinks as 1/N while event-to-event noise
    // shrinks only as 1/sqrt(N).
    std::vector<double> d[2];
    for (int s = 0; s < 20; ++s) {
        const Dataset a = synthetic(400 + s, 100);
        const Dataset b = synthetic(500 + s, 2000);
        const ModelBundle models[] = {fit_unconditional(a), fit_conditional(a, kBins)};
        for (int m = 0; m < 2; ++m)
            d[m].push_back(cross_entropy(b, models[m]).total() - cross_entropy(a, models[m]).total());
    }
    const MeanEstimate u = mean_and_se(d[0]);
    const MeanEstimate c = mean_and_se(d[1]);
    return {u.mean > 3.0 * u.se && c.mean > 3.0 * c.se,
            strf("H(pB,qA) - H(pA,qA) over 20 seeds: unconditional %.2f +- %.2f (%.1f sigma), conditional %.2f +- %.2f "
                 "(%.1f sigma); need > 3 sigma",
                 u.mean, u.se, u.mean / u.se, c.mean, c.se, c.mean / c.se)};
}

Outcome conditional_entropy()
{
    // H(q) direction with ample training; L direction where the conditional tables are sparse.
    const Dataset big = synthetic(601, 100000);
    const double hu = model_entropy(fit_unconditional(big)).hits();
    const double hc = model_entropy(fit_conditional(big, kBins)).hits();

    const Dataset small = synthetic(602, 1000);
    const Dataset held = synthetic(603, 20000);
    auto achieved = [&](const ModelBundle& m) {
        const auto [cd, acc] = encode_dataset(held, m);
        check_budget(acc, held);
        return static_cast<double>(acc.hits_achieved()) / static_cast<double>(held.size());
    };
    const double lu = achieved(fit_unconditional(small));
    const double lc = achieved(fit_conditional(small, kBins));
    return {hc < hu && lc > lu,
            strf("hit H(q) at N_A=1e5: conditional %.2f < unconditional %.2f; held-out hit L at N_A=1e3: "
                 "conditional %.2f > unconditional %.2f bits/event",
                 hc, hu, lc, lu)};
}

Outcome budget_additivity()
{
    // Extra runs on non-synthetic shapes; the tally also covers every earlier encode.
    for (std::uint64_t s = 0; s < 5; ++s) {
        const ModelBundle m = fit_conditional(synthetic(700 + s, 500), kBins);
        round_trip(synthetic(710 + s, 300), m);
        round_trip(synthetic(720 + s, 1), m);
    }
    return {g_budget.max_dev <= 1e-6,
            strf("max |sum of per-layer rows - totals| = %.2e bits over %zu encodes (limit 1e-6)", g_budget.max_dev,
                 g_budget.runs)};
}

Outcome null_calibration()
{
    const Stopwatch clock;
    const ModelBundle m = fit_conditional(synthetic(800, 5000), kBins);
    const int trials = 200;
    const double alpha = 0.05;
    int reject = 0;
    double p_min = 1.0;
    for (int i = 0; i < trials; ++i) {
        const Dataset real = synthetic(810000 + 2 * i, 600);
        const Dataset other = synthetic(810001 + 2 * i, 300);
        GapOptions opt;
        opt.k = 10;
        opt.r = 1500;
        opt.seed = 820000 + i;
        opt.jobs = default_jobs();
        const TestResult t = fidelity_gap(real, other, m, opt);
        reject += t.p < alpha;
        p_min = std::min(p_min, t.p);
    }
    const double rate = static_cast<double>(reject) / trials;
    const std::vector<double> null(1500, 0.0);
    const double floor = p_value(std::numeric_limits<double>::infinity(), null);
    const bool floor_ok = floor == 1.0 / 1501.0 && std::abs(floor - 6.662e-4) < 5e-8;
    return {rate >= 0.03 && rate <= 0.07 && floor_ok,
            strf("real-vs-real rejection at alpha=0.05: %d/%d = %.3f (band [0.03, 0.07]); smallest p %.4g; "
                 "p floor %.4e = 1/1501; %.0f s",
                 reject, trials, rate, p_min, floor, clock.seconds())};
}

double spearman(const std::vector<double>& x, const std::vector<double>& y)
{
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
                ++j;
            for (std::size_t k = i; k <= j; ++k)
                r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// Three independent 70/30 splits of R: perturb B from the first, baseline B from the
// second, train on A from the third.
ScanResult three_split_scan(std::size_t n, std::uint64_t seed, const std::vector<double>& grid)
{
    const Dataset r = synthetic(seed, n);
    auto part = [&](std::uint64_t s, bool train) {
        const auto [a, b] = split_indices(r.size(), mix64(seed ^ s), 0.7);
        return subset(r, train ? a : b, r.provenance);
    };
    const Dataset b1 = part(1, false);
    const Dataset b2 = part(2, false);
    const Dataset a3 = part(3, true);
    ScanOptions opt;
    opt.eps_grid = grid;
    opt.k = 10;
    opt.r = 1500;
    opt.mmd_block = 100;
    opt.seed = seed;
    opt.jobs = default_jobs();
    return run_scan(b1, b2, fit_unconditional(a3), fit_conditional(a3, kBins), opt);
}

Outcome sensitivity()
{
    const Stopwatch clock;
    const double alpha = 0.05;
    std::vector<double> grid = parse_eps_grid("log:1e-6:1e-1:23");
    const std::size_t n_log = grid.size();
    grid.insert(grid.begin(), 0.0);
    const ScanResult s = three_split_scan(100000, 9001, grid);

    std::vector<double> eps, du, dc;
    double first_u = INFINITY, first_c = INFINITY;
    for (const auto& row : s.rows) {
        eps.push_back(row.eps);
        du.push_back(row.uncond.delta_l);
        dc.push_back(row.cond.delta_l);
        if (row.eps > 0 && row.uncond.p < alpha)
            first_u = std::min(first_u, row.eps);
        if (row.eps > 0 && row.cond.p < alpha)
            first_c = std::min(first_c, row.eps);
    }
    const double rho_u = spearman(eps, du);
    const double rho_c = spearman(eps, dc);
    write_text("acceptance_scan.csv", scan_csv(s));

    // Null rows over 20 seeds on smaller samples; only the eps = 0 row is needed.
    int clean = 0;
    for (int i = 0; i < 20; ++i) {
        const ScanResult z = three_split_scan(4000, 9100 + i, {0.0});
        const auto& row = z.rows.front();
        clean += row.uncond.p >= alpha && row.cond.p >= alpha && row.mmd.p >= alpha;
    }
    const bool pass = n_log == 23 && rho_u > 0.9 && rho_c > 0.9 && std::isfinite(first_c) && first_c <= first_u &&
                      clean >= 19;
    return {pass, strf("Spearman(eps, dL) uncond %.3f, cond %.3f (> 0.9); smallest significant eps cond %.3g <= "
                       "uncond %.3g; eps=0 clean in %d/20 seeds (>= 95%%); %.0f s",
                       rho_u, rho_c, first_c, first_u, clean, clock.seconds())};
}

double brute_mmd2(const std::vector<FeatureVector>& x, const std::vector<FeatureVector>& y, double sigma)
{
    auto k = [&](const FeatureVector& a, const FeatureVector& b) {
        long double d = 0;
        for (int i = 0; i < kFeatureDim; ++i)
            d += (static_cast<long double>(a[i]) - b[i]) * (static_cast<long double>(a[i]) - b[i]);
        return std::exp(-d / (2.0L * sigma * sigma));
    };
    long double kxx = 0, kyy = 0, kxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j)
            if (i != j)
                kxx += k(x[i], x[j]);
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j)
            if (i != j)
                kyy += k(y[i], y[j]);
    for (const auto& a : x)
        for (const auto& b : y)
            kxy += k(a, b);
    const long double m = x.size(), n = y.size();
    return static_cast<double>(kxx / (m * (m - 1)) + kyy / (n * (n - 1)) - 2 * kxy / (m * n));
}

Outcome mmd_oracle()
{
    SyntheticConfig shifted;
    for (double& a : shifted.adc_scale)
        a *= 1.2;
    double worst_rel = 0.0, worst_self = 0.0;
    bool self_nonpos = true;
    std::vector<double> same_law;
    for (int i = 0; i < 20; ++i) {
        const auto x = extract_features(synthetic(900 + i, 50));
        const auto y = extract_features(synthetic(950 + i, 50, i % 2 ? shifted : SyntheticConfig{}));
        std::vector<FeatureVector> pooled = x;
        pooled.insert(pooled.end(), y.begin(), y.end());
        const double sigma = median_bandwidth(pooled, 1000, i);
        const double want = brute_mmd2(x, y, sigma);
        worst_rel = std::max(worst_rel, std::abs(mmd2_unbiased(x, y, sigma) - want) / std::abs(want));
        if (i % 2 == 0)
            same_law.push_back(want);

        // Identical point sets: only the cross-term diagonal survives, -(2/n)(1 - mean off-diagonal kernel).
        const double self = mmd2_unbiased(x, x, sigma);
        double off = 0.0;
        for (std::size_t a = 0; a < x.size(); ++a)
            for (std::size_t b = 0; b < x.size(); ++b)
                if (a != b)
                    off += std::exp(-squared_distance(x[a], x[b]) / (2 * sigma * sigma));
        off /= 50.0 * 49.0;
        self_nonpos = self_nonpos && self <= 0.0;
        worst_self = std::max(worst_self, std::abs(self - (-(2.0 / 50.0) * (1.0 - off))));
    }
    const MeanEstimate null = mean_and_se(same_law);
    const bool pass = worst_rel <= 1e-12 && self_nonpos && worst_self <= 1e-12 &&
                      std::abs(null.mean) <= 3.0 * null.se;
    return {pass, strf("max relative deviation from brute force %.1e over 20 pairs (n=50; limit 1e-12); MMD2(X,X) <= 0 "
                       "and matches -(2/n)(1-kbar) to %.1e; same-law pairs mean %.2e +- %.2e (0 within 3 SE)",
                       worst_rel, worst_self, null.mean, null.se)};
}

Outcome compression()
{
    const Dataset train = synthetic(1101, 20000);
    const Dataset ds = synthetic(1102, 10000);
    const Bytes canon = canonical_serialize(ds);
    const auto su = save_compressed(encode_dataset(ds, fit_unconditional(train)).first).size();
    const auto sc = save_compressed(encode_dataset(ds, fit_conditional(train, kBins)).first).size();
    const CompressionTable t = gzip_compare(canon, su, sc);
    write_text("acceptance_compression.csv", compression_csv(t));
    const auto* g = t.find("gzip-9");
    if (!g)
        return {false, "gzip-9 row missing"};
    const double ru = t.ratio(*t.find("U.-AC")), rc = t.ratio(*t.find("C.-AC")), rg = t.ratio(*g);
    return {ru > rg && rc > rg, strf("ratios U.-AC %.2fx, C.-AC %.2fx vs gzip-9 %.2fx on %zu canonical bytes "
                                     "(table in acceptance_compression.csv)",
                                     ru, rc, rg, canon.size())};
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"closure", closure},
        {"shannon-bound", shannon_bound},
        {"oracle-kl", oracle_kl},
        {"train-test-asymmetry", train_test_asymmetry},
        {"conditional-entropy", conditional_entropy},
        {"budget-additivity", budget_additivity},
        {"null-calibration", null_calibration},
        {"sensitivity-ordering", sensitivity},
        {"mmd-oracle", mmd_oracle},
        {"compression-vs-gzip", compression},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i)
        only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id))
            continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s [%2d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
