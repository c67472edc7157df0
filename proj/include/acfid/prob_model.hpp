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
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acfid/bytes.hpp"
#include "acfid/canonical.hpp"
#include "acfid/event.hpp"
#include "acfid/range_coder.hpp"

namespace acfid {

/// Contiguous |p| bins: bin i covers [edges[i], edges[i+1]); the last bin is open-ended.
struct MomentumBinning {
    std::vector<double> edges{0.0};

    std::size_t n_bins() const { return edges.size(); }

    std::size_t bin(double pmag) const
    {
        const auto it = std::upper_bound(edges.begin(), edges.end(), pmag);
        return it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
    }

    void validate() const
    {
        if (edges.empty())
            throw UsageError("binning needs at least one edge");
        for (std::size_t i = 0; i < edges.size(); ++i) {
            if (!std::isfinite(edges[i]) || edges[i] < 0.0)
                throw UsageError("binning edges must be finite and non-negative");
            if (i > 0 && !(edges[i] > edges[i - 1]))
                throw UsageError("binning edges must be strictly increasing");
        }
    }

    /// `bins` equal-width bins over [0, p_max) plus the overflow bin [p_max, inf).
    static MomentumBinning uniform(int bins, double p_max)
    {
        if (bins < 1 || !(p_max > 0.0))
            throw UsageError("binning needs bins >= 1 and p_max > 0");
        MomentumBinning b;
        b.edges.clear();
        for (int i = 0; i <= bins; ++i)
            b.edges.push_back(p_max * i / bins);
        return b;
    }

    static MomentumBinning single() { return MomentumBinning{}; }

    friend bool operator==(const MomentumBinning&, const MomentumBinning&) = default;
};

enum class ModelMode : std::uint8_t { Unconditional = 0, Conditional = 1 };

constexpr std::string_view mode_name(ModelMode m)
{
    return m == ModelMode::Conditional ? "conditional" : "unconditional";
}

enum class Tag : std::uint8_t { Occ = 0, Strip = 1, Adc = 2, Kin = 3 };
inline constexpr int kTags = 4;
inline constexpr std::array<std::string_view, kTags> kTagNames = {"occ", "strip", "adc", "kin"};

inline constexpr int kKinBytes = 12; // px, py, pz as little-endian float32

inline std::array<std::uint8_t, kKinBytes> momentum_bytes(const std::array<float, 3>& p)
{
    std::array<std::uint8_t, kKinBytes> b{};
    for (int c = 0; c < 3; ++c) {
        const auto u = std::bit_cast<std::uint32_t>(p[c]);
        for (int k = 0; k < 4; ++k)
            b[c * 4 + k] = static_cast<std::uint8_t>(u >> (8 * k));
    }
    return b;
}

inline std::array<float, 3> momentum_from_bytes(std::span<const std::uint8_t, kKinBytes> b)
{
    std::array<float, 3> p{};
    for (int c = 0; c < 3; ++c) {
        std::uint32_t u = 0;
        for (int k = 0; k < 4; ++k)
            u |= static_cast<std::uint32_t>(b[c * 4 + k]) << (8 * k);
        p[c] = std::bit_cast<float>(u);
    }
    return p;
}

/// Context visit counts: how often each table is consulted, per bin.
struct ContextWeights {
    std::uint64_t n_events = 0;
    std::vector<std::uint64_t> events_per_bin;  // [bin]
    std::vector<std::uint64_t> hits_per_bin_lv; // [bin * 9 + lv]

    friend bool operator==(const ContextWeights&, const ContextWeights&) = default;
};

inline ContextWeights context_weights(const Dataset& ds, const MomentumBinning& binning)
{
    ContextWeights w;
    w.n_events = ds.size();
    w.events_per_bin.assign(binning.n_bins(), 0);
    w.hits_per_bin_lv.assign(binning.n_bins() * kLayerViews, 0);
    for (const Event& e : ds.events) {
        const std::size_t b = binning.bin(e.momentum_magnitude());
        ++w.events_per_bin[b];
        for (int l = 0; l < kLayerViews; ++l)
            w.hits_per_bin_lv[b * kLayerViews + l] += static_cast<std::uint64_t>(e.hit_count(l));
    }
    return w;
}

/// One coded symbol: which table, which symbol, and where it is accounted.
struct SymbolRef {
    std::uint32_t table = 0;
    std::uint32_t symbol = 0;
    Tag tag = Tag::Occ;
    std::int8_t lv = -1;

    friend bool operator==(const SymbolRef&, const SymbolRef&) = default;
};

using SymbolStream = std::vector<SymbolRef>;

// Factorised model: occupancy per (bin, layer-view, slot); strip, ADC-high-byte and
// ADC-low-byte per (bin, layer-view); one table per kinematics byte position.
// The unconditional model is the single-bin case.
class ModelBundle {
public:
    ModelMode mode = ModelMode::Unconditional;
    MomentumBinning binning;
    std::vector<CdfTable> tables; // occ | strip | adc_hi | adc_lo | kin
    ContextWeights train_weights;
    std::uint64_t train_hash = 0;

    std::size_t n_bins() const { return binning.n_bins(); }

    std::size_t occ_id(std::size_t bin, int lv, int slot) const
    {
        return (bin * kLayerViews + static_cast<std::size_t>(lv)) * kSlots + static_cast<std::size_t>(slot);
    }
    std::size_t strip_id(std::size_t bin, int lv) const { return n_occ() + bin * kLayerViews + lv; }
    std::size_t adc_hi_id(std::size_t bin, int lv) const { return strip_id(bin, lv) + n_attr(); }
    std::size_t adc_lo_id(std::size_t bin, int lv) const { return adc_hi_id(bin, lv) + n_attr(); }
    std::size_t kin_id(int m) const { return n_occ() + 3 * n_attr() + static_cast<std::size_t>(m); }

    std::size_t n_occ() const { return n_bins() * kLayerViews * kSlots; }
    std::size_t n_attr() const { return n_bins() * kLayerViews; }
    std::size_t expected_table_count() const { return n_occ() + 3 * n_attr() + kKinBytes; }

    const CdfTable& table(std::size_t id) const { return tables[id]; }

    std::size_t context(const Event& e) const
    {
        return mode == ModelMode::Conditional ? binning.bin(e.momentum_magnitude()) : 0;
    }

    /// Alphabet size each table id must have.
    std::size_t alphabet(std::size_t id) const
    {
        if (id < n_occ())
            return 2;
        if (id < n_occ() + n_attr())
            return static_cast<std::size_t>(n_strips(static_cast<int>((id - n_occ()) % kLayerViews)));
        return 256;
    }
};

// ---------------------------------------------------------------------------
// Lowering

/// Calls f(SymbolRef) for every symbol of `e` in emission order:
/// per layer-view, per slot: OCC, then STRIP, ADC-hi, ADC-lo when occupied; finally 12 KIN bytes.
template <typename F>
void visit_symbols(const Event& e, const ModelBundle& m, F&& f)
{
    const std::size_t b = m.context(e);
    for (int l = 0; l < kLayerViews; ++l) {
        const auto lv = static_cast<std::int8_t>(l);
        for (int s = 0; s < kSlots; ++s) {
            const bool occ = e.occupied(l, s);
            f(SymbolRef{static_cast<std::uint32_t>(m.occ_id(b, l, s)), occ ? 1U : 0U, Tag::Occ, lv});
            if (!occ)
                continue;
            const std::int32_t strip = e.strips[l][s];
            const std::int32_t adc = e.adcs[l][s];
            if (strip < 1 || strip > n_strips(l) || adc < 0 || adc > kAdcMax)
                throw ValidationError("hit outside the model alphabet at " + std::string(layer_view_name(l)) +
                                      " slot " + std::to_string(s));
            f(SymbolRef{static_cast<std::uint32_t>(m.strip_id(b, l)), static_cast<std::uint32_t>(strip - 1),
                        Tag::Strip, lv});
            f(SymbolRef{static_cast<std::uint32_t>(m.adc_hi_id(b, l)), static_cast<std::uint32_t>(adc >> 8), Tag::Adc,
                        lv});
            f(SymbolRef{static_cast<std::uint32_t>(m.adc_lo_id(b, l)), static_cast<std::uint32_t>(adc & 0xFF),
                        Tag::Adc, lv});
        }
    }
    const auto kb = momentum_bytes(e.momentum);
    for (int k = 0; k < kKinBytes; ++k)
        f(SymbolRef{static_cast<std::uint32_t>(m.kin_id(k)), kb[k], Tag::Kin, -1});
}

// ---------------------------------------------------------------------------
// Fitting

/// Streaming tally; lets callers fit on more events than fit in memory.
class ModelFitter {
public:
    ModelFitter(ModelMode mode, const MomentumBinning& binning)
    {
        binning.validate();
        m_.mode = mode;
        m_.binning = mode == ModelMode::Conditional ? binning : MomentumBinning::single();
        counts_.resize(m_.expected_table_count());
        for (std::size_t id = 0; id < counts_.size(); ++id)
            counts_[id].assign(m_.alphabet(id), 0);
        m_.train_weights.events_per_bin.assign(m_.n_bins(), 0);
        m_.train_weights.hits_per_bin_lv.assign(m_.n_bins() * kLayerViews, 0);
        m_.train_hash = fnv1a64({});
    }

    void add(const Event& e)
    {
        const std::size_t b = m_.context(e);
        visit_symbols(e, m_, [&](const SymbolRef& r) { ++counts_[r.table][r.symbol]; });
        ++m_.train_weights.n_events;
        ++m_.train_weights.events_per_bin[b];
        for (int l = 0; l < kLayerViews; ++l)
            m_.train_weights.hits_per_bin_lv[b * kLayerViews + l] += static_cast<std::uint64_t>(e.hit_count(l));
        ByteWriter w;
        write_event(w, e);
        m_.train_hash = fnv1a64(w.bytes(), m_.train_hash);
    }

    /// Smoothed tables from the counts so far.
    ModelBundle finish() const
    {
        if (m_.train_weights.n_events == 0)
            throw UsageError("cannot fit a model on an empty dataset");
        ModelBundle m = m_;
        m.tables.reserve(counts_.size());
        for (const auto& c : counts_)
            m.tables.push_back(cdf_from_frequencies(c));
        return m;
    }

private:
    ModelBundle m_;
    std::vector<std::vector<std::uint64_t>> counts_;
};

inline ModelBundle fit_model(const Dataset& train, ModelMode mode, const MomentumBinning& binning)
{
    if (train.empty())
        throw UsageError("cannot fit a model on an empty dataset");
    ModelFitter f(mode, binning);
    for (const Event& e : train.events)
        f.add(e);
    return f.finish();
}

inline ModelBundle fit_unconditional(const Dataset& train)
{
    return fit_model(train, ModelMode::Unconditional, MomentumBinning::single());
}

inline ModelBundle fit_conditional(const Dataset& train, const MomentumBinning& binning)
{
    return fit_model(train, ModelMode::Conditional, binning);
}

inline SymbolStream lower_event(const Event& e, const ModelBundle& m)
{
    SymbolStream out;
    out.reserve(kLayerViews * kSlots + kKinBytes);
    visit_symbols(e, m, [&](const SymbolRef& r) { out.push_back(r); });
    return out;
}

/// Exact inverse of lower_event. Throws FormatError on a malformed stream.
inline Event raise_event(std::span<const SymbolRef> stream, const ModelBundle& m)
{
    if (stream.size() < static_cast<std::size_t>(kLayerViews * kSlots + kKinBytes))
        throw FormatError("symbol stream too short");
    auto check = [&](const SymbolRef& r, std::size_t want_table, Tag want_tag) {
        if (r.tag != want_tag || r.table != want_table)
            throw FormatError("symbol stream out of grammar");
        if (r.symbol >= m.table(want_table).size())
            throw FormatError("symbol outside alphabet");
    };
    Event e;
    const auto kin = stream.subspan(stream.size() - kKinBytes);
    std::array<std::uint8_t, kKinBytes> kb{};
    for (int k = 0; k < kKinBytes; ++k) {
        check(kin[k], m.kin_id(k), Tag::Kin);
        kb[k] = static_cast<std::uint8_t>(kin[k].symbol);
    }
    e.momentum = momentum_from_bytes(kb);
    const std::size_t b = m.context(e);

    std::size_t pos = 0;
    const std::size_t end = stream.size() - kKinBytes;
    auto next = [&]() -> const SymbolRef& {
        if (pos >= end)
            throw FormatError("symbol stream truncated");
        return stream[pos++];
    };
    for (int l = 0; l < kLayerViews; ++l) {
        for (int s = 0; s < kSlots; ++s) {
            const SymbolRef& occ = next();
            check(occ, m.occ_id(b, l, s), Tag::Occ);
            if (occ.symbol == 0)
                continue;
            const SymbolRef& strip = next();
            check(strip, m.strip_id(b, l), Tag::Strip);
            const SymbolRef& hi = next();
            check(hi, m.adc_hi_id(b, l), Tag::Adc);
            const SymbolRef& lo = next();
            check(lo, m.adc_lo_id(b, l), Tag::Adc);
            const auto adc = static_cast<std::int32_t>((hi.symbol << 8) | lo.symbol);
            e.strips[l][s] = static_cast<std::int32_t>(strip.symbol) + 1;
            e.adcs[l][s] = adc;
        }
    }
    if (pos != end)
        throw FormatError("symbol stream has " + std::to_string(end - pos) + " extra symbols");
    return e;
}

// ---------------------------------------------------------------------------
// Model entropy

struct ComponentBits {
    double occ = 0.0;
    double strip = 0.0;
    double adc = 0.0;
    double kin = 0.0;

    double hits() const { return occ + strip + adc; }
    double total() const { return hits() + kin; }
};

/// H(q): table entropies weighted by how often each context is visited per event.
inline ComponentBits model_entropy(const ModelBundle& m, const ContextWeights& w)
{
    if (w.n_events == 0 || w.events_per_bin.size() != m.n_bins() ||
        w.hits_per_bin_lv.size() != m.n_bins() * kLayerViews)
        throw UsageError("model entropy needs context weights matching the model binning");
    ComponentBits h;
    const double n = static_cast<double>(w.n_events);
    for (std::size_t b = 0; b < m.n_bins(); ++b) {
        const double wb = static_cast<double>(w.events_per_bin[b]) / n;
        for (int l = 0; l < kLayerViews; ++l) {
            for (int s = 0; s < kSlots; ++s)
                h.occ += wb * m.table(m.occ_id(b, l, s)).entropy();
            const double wh = static_cast<double>(w.hits_per_bin_lv[b * kLayerViews + l]) / n;
            h.strip += wh * m.table(m.strip_id(b, l)).entropy();
            h.adc += wh * (m.table(m.adc_hi_id(b, l)).entropy() + m.table(m.adc_lo_id(b, l)).entropy());
        }
    }
    for (int k = 0; k < kKinBytes; ++k)
        h.kin += m.table(m.kin_id(k)).entropy();
    return h;
}

inline ComponentBits model_entropy(const ModelBundle& m) { return model_entropy(m, m.train_weights); }

// ---------------------------------------------------------------------------
// Persistence (.acm)
//
//   "ACMODEL1" | u32 version | u8 mode | u32 n_edges | f64 edges...
//   | u64 n_events | u64 train_hash | u64 events_per_bin... | u64 hits_per_bin_lv...
//   | u32 n_tables | n_tables x { u32 block_len | u32 alphabet | u32 cum[alphabet+1] }
//   | u64 fnv1a64(all preceding bytes)

inline constexpr std::string_view kModelMagic = "ACMODEL1";
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline Bytes model_body(const ModelBundle& m)
{
    ByteWriter w;
    w.raw(kModelMagic);
    w.u32(kModelVersion);
    w.u8(static_cast<std::uint8_t>(m.mode));
    w.u32(static_cast<std::uint32_t>(m.binning.edges.size()));
    for (double e : m.binning.edges)
        w.f64(e);
    w.u64(m.train_weights.n_events);
    w.u64(m.train_hash);
    for (auto v : m.train_weights.events_per_bin)
        w.u64(v);
    for (auto v : m.train_weights.hits_per_bin_lv)
        w.u64(v);
    w.u32(static_cast<std::uint32_t>(m.tables.size()));
    for (const CdfTable& t : m.tables) {
        w.u32(static_cast<std::uint32_t>(4 * (t.size() + 2)));
        w.u32(static_cast<std::uint32_t>(t.size()));
        for (auto c : t.cumulative())
            w.u32(c);
    }
    return std::move(w).bytes();
}

} // namespace detail

/// Content hash binding compressed files to the model that produced them.
inline std::uint64_t model_hash(const ModelBundle& m) { return fnv1a64(detail::model_body(m)); }

inline Bytes save_model(const ModelBundle& m)
{
    Bytes body = detail::model_body(m);
    const std::uint64_t h = fnv1a64(body);
    ByteWriter w;
    w.raw(body);
    w.u64(h);
    return std::move(w).bytes();
}

inline ModelBundle load_model(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < kModelMagic.size() + 12 ||
        std::string_view(reinterpret_cast<const char*>(bytes.data()), kModelMagic.size()) != kModelMagic)
        throw FormatError("unrecognized model format (bad magic)");
    const auto body = bytes.first(bytes.size() - 8);
    ByteReader trailer(bytes.last(8));
    if (fnv1a64(body) != trailer.u64())
        throw HashMismatch("model content hash mismatch (corrupt model file)");

    ByteReader r(body.subspan(kModelMagic.size()));
    const std::uint32_t version = r.u32();
    if (version != kModelVersion)
        throw FormatError("model version mismatch: file has " + std::to_string(version) + ", expected " +
                          std::to_string(kModelVersion));
    ModelBundle m;
    const std::uint8_t mode = r.u8();
    if (mode > 1)
        throw FormatError("unknown model mode");
    m.mode = static_cast<ModelMode>(mode);
    const std::uint32_t n_edges = r.u32();
    if (n_edges == 0 || n_edges > 4096)
        throw FormatError("implausible binning size");
    m.binning.edges.resize(n_edges);
    for (auto& e : m.binning.edges)
        e = r.f64();
    m.binning.validate();
    if (m.mode == ModelMode::Unconditional && n_edges != 1)
        throw FormatError("unconditional model with multiple bins");
    m.train_weights.n_events = r.u64();
    m.train_hash = r.u64();
    m.train_weights.events_per_bin.resize(n_edges);
    for (auto& v : m.train_weights.events_per_bin)
        v = r.u64();
    m.train_weights.hits_per_bin_lv.resize(static_cast<std::size_t>(n_edges) * kLayerViews);
    for (auto& v : m.train_weights.hits_per_bin_lv)
        v = r.u64();
    const std::uint32_t n_tables = r.u32();
    if (n_tables != m.expected_table_count())
        throw FormatError("model has " + std::to_string(n_tables) + " tables, expected " +
                          std::to_string(m.expected_table_count()));
    m.tables.reserve(n_tables);
    for (std::uint32_t id = 0; id < n_tables; ++id) {
        const std::uint32_t len = r.u32();
        const std::uint32_t size = r.u32();
        if (size != m.alphabet(id) || len != 4 * (size + 2))
            throw FormatError("table " + std::to_string(id) + " has the wrong shape");
        std::vector<std::uint32_t> cum(size + 1);
        for (auto& c : cum)
            c = r.u32();
        try {
            m.tables.emplace_back(std::move(cum));
        } catch (const CoderError& e) {
            throw FormatError("table " + std::to_string(id) + ": " + e.what());
        }
    }
    if (!r.done())
        throw FormatError("trailing bytes in model file");
    return m;
}

} // namespace acfid
