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

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "acfid/bytes.hpp"
#include "acfid/event.hpp"
#include "acfid/random.hpp"

namespace acfid {

// Canonical event file (.evcan):
//   "EVCAN001" | u64 N | N x { 180 x i32 strips | 180 x i32 adcs | 3 x f32 momentum }
// all little-endian, padding kept verbatim.
inline constexpr std::string_view kCanonicalMagic = "EVCAN001";
inline constexpr std::size_t kCanonicalHeaderBytes = 16;
inline constexpr std::size_t kCanonicalEventBytes = (2 * kLayerViews * kSlots) * 4 + 3 * 4;

inline void write_event(ByteWriter& w, const Event& e)
{
    for (const auto& row : e.strips)
        for (std::int32_t v : row)
            w.i32(v);
    for (const auto& row : e.adcs)
        for (std::int32_t v : row)
            w.i32(v);
    for (float p : e.momentum)
        w.f32(p);
}

inline Event read_event(ByteReader& r)
{
    Event e;
    for (auto& row : e.strips)
        for (auto& v : row)
            v = r.i32();
    for (auto& row : e.adcs)
        for (auto& v : row)
            v = r.i32();
    for (auto& p : e.momentum)
        p = r.f32();
    return e;
}

/// Deterministic, lossless byte form of a dataset. Refuses invalid datasets.
inline Bytes canonical_serialize(const Dataset& ds)
{
    if (auto rep = validate_dataset(ds); !rep.ok)
        throw ValidationError("refusing to serialize invalid dataset: " + rep.summary());
    ByteWriter w;
    w.raw(kCanonicalMagic);
    w.u64(ds.size());
    for (const Event& e : ds.events)
        write_event(w, e);
    return std::move(w).bytes();
}

inline Dataset canonical_deserialize(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < kCanonicalMagic.size() ||
        std::string_view(reinterpret_cast<const char*>(bytes.data()), kCanonicalMagic.size()) != kCanonicalMagic)
        throw FormatError("unrecognized format (bad magic)");
    ByteReader r(bytes.subspan(kCanonicalMagic.size()));
    if (!r.has(8))
        throw FormatError("truncated header");
    const std::uint64_t n = r.u64();
    if (n == 0)
        throw ValidationError("empty dataset");
    Dataset ds;
    // Guard the reservation against absurd counts in corrupt headers.
    ds.events.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, r.remaining() / kCanonicalEventBytes + 1)));
    for (std::uint64_t k = 0; k < n; ++k) {
        if (!r.has(kCanonicalEventBytes))
            throw FormatError("truncated at event " + std::to_string(k));
        ds.events.push_back(read_event(r));
        if (auto rep = validate_event(ds.events.back()); !rep.ok)
            throw ValidationError("invalid event " + std::to_string(k) + ": " + rep.summary());
    }
    if (!r.done())
        throw FormatError("trailing bytes after event " + std::to_string(n));
    return ds;
}

inline std::uint64_t dataset_hash(const Dataset& ds)
{
    ByteWriter w;
    for (const Event& e : ds.events)
        write_event(w, e);
    return fnv1a64(w.bytes());
}

// ---------------------------------------------------------------------------
// Splitting

/// Seeded Fisher-Yates partition into (floor(N*f), N - floor(N*f)) events.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, std::uint64_t seed, double train_fraction)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw UsageError("train_fraction must lie in (0, 1)");
    if (ds.size() < 2)
        throw UsageError("split needs at least 2 events");
    std::mt19937_64 rng(mix64(seed));
    const auto idx = shuffled_indices(ds.size(), rng);
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(ds.size()) * train_fraction));

    Dataset a, b;
    a.provenance = ds.provenance + "|split(seed=" + std::to_string(seed) + ",part=A)";
    b.provenance = ds.provenance + "|split(seed=" + std::to_string(seed) + ",part=B)";
    a.events.reserve(n_train);
    b.events.reserve(ds.size() - n_train);
    for (std::size_t i = 0; i < idx.size(); ++i)
        (i < n_train ? a : b).events.push_back(ds.events[idx[i]]);
    return {std::move(a), std::move(b)};
}

/// Index-level variant of split_dataset (same shuffle), used when callers need overlap bookkeeping.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, std::uint64_t seed,
                                                                                    double train_fraction)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw UsageError("train_fraction must lie in (0, 1)");
    if (n < 2)
        throw UsageError("split needs at least 2 events");
    std::mt19937_64 rng(mix64(seed));
    auto idx = shuffled_indices(n, rng);
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
    std::vector<std::size_t> b(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    idx.resize(n_train);
    return {std::move(idx), std::move(b)};
}

inline Dataset subset(const Dataset& ds, std::span<const std::size_t> idx, std::string provenance)
{
    Dataset out;
    out.provenance = std::move(provenance);
    out.events.reserve(idx.size());
    for (std::size_t i : idx)
        out.events.push_back(ds.events[i]);
    return out;
}

// ---------------------------------------------------------------------------
// File helpers

inline Bytes read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw UsageError("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw UsageError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw UsageError("write failed for " + path.string());
}

inline void write_text(const std::filesystem::path& path, std::string_view text)
{
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string read_text(const std::filesystem::path& path)
{
    auto b = read_file(path);
    return std::string(b.begin(), b.end());
}

/// Sidecar written next to every .evcan file.
inline std::string provenance_sidecar(const Dataset& ds)
{
    return "provenance=" + ds.provenance + "\n" + "n_events=" + std::to_string(ds.size()) + "\n" +
           "content_hash=" + hex64(dataset_hash(ds)) + "\n";
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& ds)
{
    write_file(path, canonical_serialize(ds));
    write_text(path.string() + ".meta", provenance_sidecar(ds));
}

inline Dataset load_dataset(const std::filesystem::path& path)
{
    Dataset ds = canonical_deserialize(read_file(path));
    const std::filesystem::path meta = path.string() + ".meta";
    if (std::filesystem::exists(meta)) {
        const std::string text = read_text(meta);
        const auto pos = text.find("provenance=");
        if (pos != std::string::npos) {
            const auto end = text.find('\n', pos);
            ds.provenance = text.substr(pos + 11, end == std::string::npos ? std::string::npos : end - pos - 11);
        }
    } else {
        ds.provenance = path.filename().string();
    }
    return ds;
}

} // namespace acfid
