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

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acfid/bytes.hpp"
#include "acfid/event.hpp"
#include "acfid/prob_model.hpp"
#include "acfid/range_coder.hpp"

namespace acfid {

/// Ideal (sum of -log2 q) and achieved (payload) bits for one encoded dataset.
struct CodelengthAccount {
    std::uint64_t n_events = 0;
    // Hit components per layer-view: [lv][Occ | Strip | Adc].
    std::array<std::array<long double, 3>, kLayerViews> hit_ideal{};
    long double kin_ideal = 0.0L;
    std::array<std::uint64_t, kTags> symbols{};
    std::array<std::uint64_t, kTags> achieved_bits{};

    void add(const SymbolRef& r, double cost)
    {
        if (r.tag == Tag::Kin)
            kin_ideal += cost;
        else
            hit_ideal[static_cast<std::size_t>(r.lv)][static_cast<std::size_t>(r.tag)] += cost;
        ++symbols[static_cast<std::size_t>(r.tag)];
    }

    long double section_ideal(Tag t) const
    {
        if (t == Tag::Kin)
            return kin_ideal;
        long double s = 0.0L;
        for (const auto& row : hit_ideal)
            s += row[static_cast<std::size_t>(t)];
        return s;
    }

    long double hits_ideal() const
    {
        long double s = 0.0L;
        for (const auto& row : hit_ideal)
            s += row[0] + row[1] + row[2];
        return s;
    }

    long double ideal_total() const { return hits_ideal() + kin_ideal; }

    std::uint64_t hits_achieved() const { return achieved_bits[0] + achieved_bits[1] + achieved_bits[2]; }
    std::uint64_t achieved_total() const { return hits_achieved() + achieved_bits[3]; }

    double mean_achieved() const
    {
        return n_events ? static_cast<double>(achieved_total()) / static_cast<double>(n_events) : 0.0;
    }
    double mean_ideal() const
    {
        return n_events ? static_cast<double>(ideal_total() / static_cast<long double>(n_events)) : 0.0;
    }
};

/// Four independently coded payload sections bound to one model.
struct CompressedDataset {
    ModelMode mode = ModelMode::Unconditional;
    std::uint64_t model_hash = 0;
    std::uint64_t n_events = 0;
    std::array<Bytes, kTags> sections;

    std::size_t payload_bytes() const
    {
        std::size_t n = 0;
        for (const auto& s : sections)
            n += s.size();
        return n;
    }

    friend bool operator==(const CompressedDataset&, const CompressedDataset&) = default;
};

inline CodelengthAccount ideal_account(const Dataset& ds, const ModelBundle& m)
{
    CodelengthAccount acc;
    acc.n_events = ds.size();
    for (const Event& e : ds.events)
        visit_symbols(e, m, [&](const SymbolRef& r) { acc.add(r, m.table(r.table).cost(r.symbol)); });
    return acc;
}

inline std::pair<CompressedDataset, CodelengthAccount> encode_dataset(const Dataset& ds, const ModelBundle& m)
{
    if (m.tables.size() != m.expected_table_count())
        throw UsageError("model is incomplete for its binning");
    std::array<RangeEncoder, kTags> enc;
    CodelengthAccount acc;
    acc.n_events = ds.size();
    for (const Event& e : ds.events) {
        visit_symbols(e, m, [&](const SymbolRef& r) {
            const CdfTable& t = m.table(r.table);
            enc[static_cast<std::size_t>(r.tag)].encode(t, r.symbol);
            acc.add(r, t.cost(r.symbol));
        });
    }
    CompressedDataset cd;
    cd.mode = m.mode;
    cd.model_hash = model_hash(m);
    cd.n_events = ds.size();
    for (int t = 0; t < kTags; ++t) {
        cd.sections[t] = std::move(enc[t]).finish();
        acc.achieved_bits[t] = 8ULL * cd.sections[t].size();
    }
    return {std::move(cd), acc};
}

inline Dataset decode_dataset(const CompressedDataset& cd, const ModelBundle& m)
{
    if (cd.model_hash != model_hash(m))
        throw HashMismatch("compressed data was produced by model " + hex64(cd.model_hash) +
                           ", not by the supplied model " + hex64(model_hash(m)));
    if (cd.mode != m.mode)
        throw FormatError("codec mode does not match the model");

    std::array<RangeDecoder, kTags> dec{RangeDecoder(cd.sections[0]), RangeDecoder(cd.sections[1]),
                                        RangeDecoder(cd.sections[2]), RangeDecoder(cd.sections[3])};
    Dataset ds;
    ds.events.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(cd.n_events, 1U << 20)));
    int section = 0;
    try {
        for (std::uint64_t i = 0; i < cd.n_events; ++i) {
            Event e;
            std::array<std::uint8_t, kKinBytes> kb{};
            section = 3;
            for (int k = 0; k < kKinBytes; ++k)
                kb[k] = static_cast<std::uint8_t>(dec[3].decode(m.table(m.kin_id(k))));
            e.momentum = momentum_from_bytes(kb);
            const std::size_t b = m.context(e);
            for (int l = 0; l < kLayerViews; ++l) {
                for (int s = 0; s < kSlots; ++s) {
                    section = 0;
                    if (dec[0].decode(m.table(m.occ_id(b, l, s))) == 0)
                        continue;
                    section = 1;
                    e.strips[l][s] = static_cast<std::int32_t>(dec[1].decode(m.table(m.strip_id(b, l)))) + 1;
                    section = 2;
                    const auto hi = dec[2].decode(m.table(m.adc_hi_id(b, l)));
                    const auto lo = dec[2].decode(m.table(m.adc_lo_id(b, l)));
                    e.adcs[l][s] = static_cast<std::int32_t>((hi << 8) | lo);
                }
            }
            ds.events.push_back(e);
        }
    } catch (const CoderError&) {
        throw FormatError("truncated section " + std::string(kTagNames[section]));
    }
    for (int t = 0; t < kTags; ++t)
        if (dec[t].consumed() != cd.sections[t].size())
            throw FormatError("section " + std::string(kTagNames[t]) + " has " +
                              std::to_string(cd.sections[t].size() - dec[t].consumed()) + " unread bytes");
    const auto report = validate_dataset(ds);
    if (!report.ok)
        throw FormatError("decoded data violates the event grammar: " + report.summary());
    return ds;
}

struct ClosureReport {
    bool equal = false;
    double achieved_bits = 0.0;
    double ideal_bits = 0.0;
    double overhead_pct = 0.0;
    std::string diagnostic;
};

/// Encode, decode and compare canonical bytes. Never throws; failures are reported.
inline ClosureReport closure_check(const Dataset& ds, const ModelBundle& m)
{
    ClosureReport rep;
    try {
        auto [cd, acc] = encode_dataset(ds, m);
        rep.achieved_bits = static_cast<double>(acc.achieved_total());
        rep.ideal_bits = static_cast<double>(acc.ideal_total());
        rep.overhead_pct = rep.ideal_bits > 0 ? (rep.achieved_bits - rep.ideal_bits) / rep.ideal_bits * 100.0 : 0.0;
        const Dataset back = decode_dataset(cd, m);
        rep.equal = canonical_serialize(back) == canonical_serialize(ds);
        if (!rep.equal)
            rep.diagnostic = "decoded dataset differs from the input";
    } catch (const std::exception& e) {
        rep.equal = false;
        rep.diagnostic = e.what();
    }
    return rep;
}

// ---------------------------------------------------------------------------
// .acz container
//
//   "ACZDATA1" | u32 version | u8 mode | u64 model_hash | u64 n_events
//   | 4 x { u64 length | payload }   (occ, strip, adc, kin)

inline constexpr std::string_view kCompressedMagic = "ACZDATA1";
inline constexpr std::uint32_t kCompressedVersion = 1;

inline Bytes save_compressed(const CompressedDataset& cd)
{
    ByteWriter w;
    w.raw(kCompressedMagic);
    w.u32(kCompressedVersion);
    w.u8(static_cast<std::uint8_t>(cd.mode));
    w.u64(cd.model_hash);
    w.u64(cd.n_events);
    for (const auto& s : cd.sections) {
        w.u64(s.size());
        w.raw(s);
    }
    return std::move(w).bytes();
}

inline CompressedDataset load_compressed(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < kCompressedMagic.size() ||
        std::string_view(reinterpret_cast<const char*>(bytes.data()), kCompressedMagic.size()) != kCompressedMagic)
        throw FormatError("unrecognized compressed format (bad magic)");
    ByteReader r(bytes.subspan(kCompressedMagic.size()));
    const std::uint32_t version = r.u32();
    if (version != kCompressedVersion)
        throw FormatError("compressed format version mismatch");
    CompressedDataset cd;
    const std::uint8_t mode = r.u8();
    if (mode > 1)
        throw FormatError("unknown codec mode");
    cd.mode = static_cast<ModelMode>(mode);
    cd.model_hash = r.u64();
    cd.n_events = r.u64();
    for (int t = 0; t < kTags; ++t) {
        const std::uint64_t len = r.u64();
        if (len > r.remaining())
            throw FormatError("truncated section " + std::string(kTagNames[t]));
        const auto s = r.raw(static_cast<std::size_t>(len));
        cd.sections[t].assign(s.begin(), s.end());
    }
    if (!r.done())
        throw FormatError("trailing bytes after the last section");
    return cd;
}

// ---------------------------------------------------------------------------
// Fast payload sizing for repeated block encodes under one fixed model.

/// Every event of a dataset pre-lowered to coder intervals, one list per stream.
/// An interval is packed as cum_lo | (freq - 1) << 16.
class LoweredDataset {
public:
    LoweredDataset(const Dataset& ds, const ModelBundle& m)
    {
        for (auto& o : offsets_)
            o.reserve(ds.size() + 1), o.push_back(0);
        for (const Event& e : ds.events) {
            visit_symbols(e, m, [&](const SymbolRef& r) {
                const CdfTable& t = m.table(r.table);
                const std::uint32_t lo = t.cum(r.symbol);
                const std::uint32_t f = t.cum(r.symbol + 1) - lo;
                packed_[static_cast<std::size_t>(r.tag)].push_back(lo | ((f - 1) << 16));
            });
            for (int t = 0; t < kTags; ++t)
                offsets_[t].push_back(packed_[t].size());
        }
    }

    std::size_t size() const { return offsets_[0].size() - 1; }

    /// Exact payload bits of encoding the listed events, in order, as one dataset.
    std::uint64_t payload_bits(std::span<const std::size_t> events) const
    {
        std::uint64_t bytes = 0;
        for (int t = 0; t < kTags; ++t) {
            RangeSizer sz;
            const auto& p = packed_[t];
            const auto& off = offsets_[t];
            for (std::size_t i : events) {
                for (std::size_t j = off[i]; j < off[i + 1]; ++j) {
                    const std::uint32_t lo = p[j] & 0xFFFFU;
                    sz.encode_interval(lo, lo + (p[j] >> 16) + 1);
                }
            }
            bytes += sz.payload_bytes();
        }
        return 8 * bytes;
    }

private:
    std::array<std::vector<std::uint32_t>, kTags> packed_;
    std::array<std::vector<std::size_t>, kTags> offsets_;
};

} // namespace acfid
