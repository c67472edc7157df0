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

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "acfid/codec.hpp"
#include "acfid/prob_model.hpp"
#include "acfid/synthetic.hpp"

namespace acfid {

/// Mean ideal bits per event, split by component.
inline ComponentBits cross_entropy(const Dataset& ds, const ModelBundle& m)
{
    if (ds.empty())
        return {};
    const CodelengthAccount acc = ideal_account(ds, m);
    const auto n = static_cast<long double>(ds.size());
    return ComponentBits{static_cast<double>(acc.section_ideal(Tag::Occ) / n),
                         static_cast<double>(acc.section_ideal(Tag::Strip) / n),
                         static_cast<double>(acc.section_ideal(Tag::Adc) / n), static_cast<double>(acc.kin_ideal / n)};
}

/// Ideal hit bits of a single event under m.
inline double hits_codelength(const Event& e, const ModelBundle& m)
{
    double bits = 0.0;
    visit_symbols(e, m, [&](const SymbolRef& r) {
        if (r.tag != Tag::Kin)
            bits += m.table(r.table).cost(r.symbol);
    });
    return bits;
}

struct MeanEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

inline MeanEstimate mean_and_se(std::span<const double> v)
{
    MeanEstimate r;
    r.n = v.size();
    if (v.empty())
        return r;
    long double s = 0.0L;
    for (double x : v)
        s += x;
    r.mean = static_cast<double>(s / v.size());
    if (v.size() > 1) {
        long double ss = 0.0L;
        for (double x : v)
            ss += (x - r.mean) * (x - r.mean);
        r.se = std::sqrt(static_cast<double>(ss / (v.size() - 1)) / static_cast<double>(v.size()));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Oracle comparisons on synthetic data

struct OracleKl {
    double kl = 0.0;     // mean(-log2 q) - mean(-log2 p), hit component, bits/event
    double se = 0.0;     // standard error of the paired per-event difference
    double model_bits = 0.0;
    double oracle_bits = 0.0;
    std::size_t n = 0;
};

/// KL(p || q) on the hit component given the kinematics, estimated with the
/// generator's exact conditional probabilities.
inline OracleKl kl_vs_oracle(const Dataset& ds, const ModelBundle& m, const SyntheticConfig& law_cfg)
{
    if (!has_oracle_provenance(ds, law_cfg))
        throw UsageError("dataset lacks oracle provenance for this generator law");
    const SyntheticLaw law(law_cfg);
    std::vector<double> diff;
    diff.reserve(ds.size());
    long double sq = 0.0L, sp = 0.0L;
    for (const Event& e : ds.events) {
        const double q = hits_codelength(e, m);
        const double p = law.hits_codelength(e);
        sq += q;
        sp += p;
        diff.push_back(q - p);
    }
    const MeanEstimate d = mean_and_se(diff);
    return {d.mean, d.se, static_cast<double>(sq / ds.size()), static_cast<double>(sp / ds.size()), ds.size()};
}

namespace detail {

// Marginal of the ADC high byte for a geometric with mean mu clipped at 65535.
inline std::vector<double> adc_hi_marginal(double mu)
{
    const double lt = std::log(mu / (1.0 + mu));
    std::vector<double> p(256);
    for (int h = 0; h < 255; ++h)
        p[h] = std::exp(256.0 * h * lt) * -std::expm1(256.0 * lt);
    p[255] = std::exp(256.0 * 255 * lt);
    return p;
}

inline std::vector<double> adc_lo_marginal(double mu)
{
    const double lt = std::log(mu / (1.0 + mu));
    const double one_minus_theta = 1.0 / (1.0 + mu);
    const double den = -std::expm1(256.0 * lt);
    std::vector<double> p(256);
    for (int j = 0; j < 255; ++j)
        p[j] = one_minus_theta * std::exp(j * lt) * -std::expm1(65536.0 * lt) / den;
    p[255] = one_minus_theta * std::exp(255 * lt) * -std::expm1(65280.0 * lt) / den + std::exp(65535.0 * lt);
    return p;
}

} // namespace detail

/// Quadrature nodes (|p|, weight * density) for E_p[f] over [lo, hi) of the momentum law.
inline std::vector<std::pair<double, double>> momentum_nodes(const SyntheticLaw& law, double lo, double hi,
                                                             int panels = 64)
{
    using boost::math::quadrature::gauss;
    const auto& cfg = law.config();
    lo = std::max(lo, cfg.p_min);
    hi = std::min(hi, cfg.p_max);
    std::vector<std::pair<double, double>> nodes;
    if (!(hi > lo))
        return nodes;
    const auto& x = gauss<double, 20>::abscissa();
    const auto& w = gauss<double, 20>::weights();
    const double h = (hi - lo) / panels;
    for (int k = 0; k < panels; ++k) {
        const double mid = lo + (k + 0.5) * h;
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (double sign : {-1.0, 1.0}) {
                if (x[i] == 0.0 && sign > 0)
                    continue;
                const double p = mid + sign * x[i] * h / 2;
                nodes.emplace_back(p, w[i] * h / 2 * law.momentum_density(p));
            }
        }
    }
    return nodes;
}

/// Model whose hit tables are the generator's exact per-context marginals
/// (the best tables this factorisation admits); kinematics tables copied from `kin_source`.
inline ModelBundle oracle_model(const SyntheticConfig& cfg, const ModelBundle& kin_source)
{
    const SyntheticLaw law(cfg);
    ModelBundle m = kin_source;
    const auto& edges = m.binning.edges;
    for (int l = 0; l < kLayerViews; ++l) {
        // Counts depend on |p| only and shower centres on direction only: one strip marginal for all bins.
        std::vector<double> strip(static_cast<std::size_t>(n_strips(l)));
        for (int k = 1; k <= n_strips(l); ++k)
            strip[k - 1] = law.direction_average(
                [&](double x, double y) { return law.strip_prob(k, l, law.shower_center_from_xy(l, x, y)); });
        const CdfTable strip_table = cdf_from_probabilities(strip);

        for (std::size_t b = 0; b < m.n_bins(); ++b) {
            const bool cond = m.mode == ModelMode::Conditional;
            const double lo = cond ? edges[b] : 0.0;
            const double hi = cond && b + 1 < edges.size() ? edges[b + 1] : std::numeric_limits<double>::infinity();
            const auto nodes = momentum_nodes(law, lo, hi);
            double mass = 0.0, hits = 0.0;
            std::vector<double> occ(kSlots, 0.0), hi_p(256, 0.0), lo_p(256, 0.0);
            for (const auto& [p, w] : nodes) {
                const double lam = law.hit_rate(l, p);
                const double n = SyntheticLaw::expected_count(lam);
                mass += w;
                hits += w * n;
                for (int s = 0; s < kSlots; ++s)
                    occ[s] += w * SyntheticLaw::occupancy_prob(s, lam);
                const auto ph = detail::adc_hi_marginal(law.adc_mean(l, p));
                const auto pl = detail::adc_lo_marginal(law.adc_mean(l, p));
                for (int byte = 0; byte < 256; ++byte) {
                    hi_p[byte] += w * n * ph[byte];
                    lo_p[byte] += w * n * pl[byte];
                }
            }
            if (!(mass > 0.0))
                continue; // bin outside the momentum law: keep the fitted tables
            for (int s = 0; s < kSlots; ++s) {
                const std::vector<double> probs{1.0 - occ[s] / mass, occ[s] / mass};
                m.tables[m.occ_id(b, l, s)] = cdf_from_probabilities(probs);
            }
            m.tables[m.strip_id(b, l)] = strip_table;
            m.tables[m.adc_hi_id(b, l)] = cdf_from_probabilities(hi_p);
            m.tables[m.adc_lo_id(b, l)] = cdf_from_probabilities(lo_p);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Entropy audit

struct AuditRow {
    std::string split;     // "A" (training) or "B" (evaluation)
    std::string component; // hits, kinematics, total
    double h_q = 0.0;
    double h_pq = 0.0;
    double l = 0.0;

    double overhead_pct() const { return h_pq > 0.0 ? (l - h_pq) / h_pq * 100.0 : 0.0; }
};

struct EntropyAudit {
    std::string mode;
    std::vector<AuditRow> rows;
};

namespace detail {

inline void audit_split(EntropyAudit& a, const std::string& label, const Dataset& ds, const ModelBundle& m)
{
    const ComponentBits hq = model_entropy(m, context_weights(ds, m.binning));
    const auto [cd, acc] = encode_dataset(ds, m);
    const double n = static_cast<double>(ds.size());
    const double hpq_hits = static_cast<double>(acc.hits_ideal()) / n;
    const double hpq_kin = static_cast<double>(acc.kin_ideal) / n;
    const double l_hits = static_cast<double>(acc.hits_achieved()) / n;
    const double l_kin = static_cast<double>(acc.achieved_bits[3]) / n;
    a.rows.push_back({label, "hits", hq.hits(), hpq_hits, l_hits});
    a.rows.push_back({label, "kinematics", hq.kin, hpq_kin, l_kin});
    a.rows.push_back({label, "total", hq.total(), hpq_hits + hpq_kin, l_hits + l_kin});
}

} // namespace detail

/// H(q), H(p,q) and L per component on the training and evaluation sets. H(q) on
/// each split uses that split's own context-visit weights.
inline EntropyAudit entropy_audit(const Dataset& train, const Dataset& test, const ModelBundle& m)
{
    EntropyAudit a;
    a.mode = std::string(mode_name(m.mode));
    detail::audit_split(a, "A", train, m);
    detail::audit_split(a, "B", test, m);
    return a;
}

// ---------------------------------------------------------------------------
// Bit budget

struct BudgetRow {
    std::string name;
    double occ = 0.0;
    double strip = 0.0;
    double adc = 0.0;
    double multiplicity = 0.0;

    double sum() const { return occ + strip + adc; }
};

struct BitBudget {
    std::vector<BudgetRow> layers; // one per layer-view
    BudgetRow hits_total;
    double kinematics = 0.0;

    double total() const { return hits_total.sum() + kinematics; }
};

/// Per layer-view decomposition of the ideal codelength, bits/event.
inline BitBudget bit_budget(const CodelengthAccount& acc, const Dataset& ds)
{
    BitBudget b;
    const long double n = acc.n_events ? static_cast<long double>(acc.n_events) : 1.0L;
    long double to = 0, ts = 0, ta = 0;
    for (int l = 0; l < kLayerViews; ++l) {
        BudgetRow r;
        r.name = std::string(layer_view_name(l));
        r.occ = static_cast<double>(acc.hit_ideal[l][0] / n);
        r.strip = static_cast<double>(acc.hit_ideal[l][1] / n);
        r.adc = static_cast<double>(acc.hit_ideal[l][2] / n);
        double hits = 0.0;
        for (const Event& e : ds.events)
            hits += e.hit_count(l);
        r.multiplicity = ds.empty() ? 0.0 : hits / static_cast<double>(ds.size());
        to += acc.hit_ideal[l][0];
        ts += acc.hit_ideal[l][1];
        ta += acc.hit_ideal[l][2];
        b.hits_total.multiplicity += r.multiplicity;
        b.layers.push_back(r);
    }
    b.hits_total.name = "Hits total";
    b.hits_total.occ = static_cast<double>(to / n);
    b.hits_total.strip = static_cast<double>(ts / n);
    b.hits_total.adc = static_cast<double>(ta / n);
    b.kinematics = static_cast<double>(acc.kin_ideal / n);
    return b;
}

// ---------------------------------------------------------------------------
// Output

inline std::string fmt(double v, int prec = 5)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

inline std::string fmt_g(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string audit_csv(const EntropyAudit& a)
{
    std::ostringstream os;
    os << "mode,split,component,H_q,H_pq,L,overhead_pct\n";
    for (const auto& r : a.rows)
        os << a.mode << ',' << r.split << ',' << r.component << ',' << fmt_g(r.h_q) << ',' << fmt_g(r.h_pq) << ','
           << fmt_g(r.l) << ',' << fmt_g(r.overhead_pct()) << '\n';
    return os.str();
}

inline std::string audit_text(const EntropyAudit& a)
{
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-18s %12s %12s %12s %14s\n", ("Component (" + a.mode + ")").c_str(), "H(q)",
                  "H(p,q)", "L", "Overhead (%)");
    os << line;
    for (const auto& r : a.rows) {
        std::snprintf(line, sizeof line, "(%s) %-14s %12.5f %12.5f %12.5f %14.2e\n", r.split.c_str(),
                      r.component.c_str(), r.h_q, r.h_pq, r.l, r.overhead_pct());
        os << line;
    }
    return os.str();
}

inline std::string budget_csv(const BitBudget& b)
{
    std::ostringstream os;
    os << "layer_view,occ_bits,strip_bits,adc_bits,sum_bits,mean_multiplicity\n";
    auto row = [&](const BudgetRow& r) {
        os << r.name << ',' << fmt_g(r.occ) << ',' << fmt_g(r.strip) << ',' << fmt_g(r.adc) << ',' << fmt_g(r.sum())
           << ',' << fmt_g(r.multiplicity) << '\n';
    };
    for (const auto& r : b.layers)
        row(r);
    row(b.hits_total);
    os << "Kinematics,,,," << fmt_g(b.kinematics) << ",\n";
    os << "Total,,,," << fmt_g(b.total()) << ",\n";
    return os.str();
}

inline std::string budget_text(const BitBudget& b)
{
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %10s %10s %10s %10s %8s\n", "Layer-view", "Occ", "Strip", "ADC", "Sum",
                  "<n>");
    os << line;
    auto row = [&](const BudgetRow& r) {
        std::snprintf(line, sizeof line, "%-12s %10.2f %10.2f %10.2f %10.2f %8.2f\n", r.name.c_str(), r.occ, r.strip,
                      r.adc, r.sum(), r.multiplicity);
        os << line;
    };
    for (const auto& r : b.layers)
        row(r);
    row(b.hits_total);
    std::snprintf(line, sizeof line, "%-12s %43.2f\n%-12s %43.2f\n", "Kinematics", b.kinematics, "Total", b.total());
    os << line;
    return os.str();
}

} // namespace acfid
