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
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace acfid {

// Nine calorimeter readout planes: three detectors times three stereo views.
enum class LayerView : std::uint8_t {
    PcalU, PcalV, PcalW,
    EcinU, EcinV, EcinW,
    EcoutU, EcoutV, EcoutW,
};

inline constexpr int kLayerViews = 9;
inline constexpr int kSlots = 20;
inline constexpr std::int32_t kPad = -999;
inline constexpr std::int32_t kAdcMax = 65535;

inline constexpr std::array<int, kLayerViews> kStripsPerView = {68, 62, 62, 36, 36, 36, 36, 36, 36};

inline constexpr std::array<std::string_view, kLayerViews> kLayerViewNames = {
    "PCAL-U", "PCAL-V", "PCAL-W", "ECIN-U", "ECIN-V", "ECIN-W", "ECOUT-U", "ECOUT-V", "ECOUT-W"};

constexpr int n_strips(int lv) { return kStripsPerView[static_cast<std::size_t>(lv)]; }
constexpr int n_strips(LayerView lv) { return n_strips(static_cast<int>(lv)); }
constexpr std::string_view layer_view_name(int lv) { return kLayerViewNames[static_cast<std::size_t>(lv)]; }

using HitGrid = std::array<std::array<std::int32_t, kSlots>, kLayerViews>;

inline HitGrid padded_grid()
{
    HitGrid g;
    for (auto& row : g)
        row.fill(kPad);
    return g;
}

struct Event {
    HitGrid strips = padded_grid();
    HitGrid adcs = padded_grid();
    std::array<float, 3> momentum{0.0F, 0.0F, 0.0F}; // px, py, pz in GeV

    bool occupied(int lv, int slot) const { return strips[lv][slot] != kPad; }

    double momentum_magnitude() const
    {
        const double px = momentum[0], py = momentum[1], pz = momentum[2];
        return std::sqrt(px * px + py * py + pz * pz);
    }

    int hit_count(int lv) const
    {
        int n = 0;
        for (int s = 0; s < kSlots; ++s)
            n += occupied(lv, s) ? 1 : 0;
        return n;
    }

    friend bool operator==(const Event& a, const Event& b)
    {
        // Bitwise on momentum so that -0.0f and NaN payloads compare exactly.
        for (int i = 0; i < 3; ++i)
            if (std::bit_cast<std::uint32_t>(a.momentum[i]) != std::bit_cast<std::uint32_t>(b.momentum[i]))
                return false;
        return a.strips == b.strips && a.adcs == b.adcs;
    }
};

struct Dataset {
    std::vector<Event> events;
    std::string provenance;

    std::size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }

    friend bool operator==(const Dataset& a, const Dataset& b) { return a.events == b.events; }
};

// ---------------------------------------------------------------------------
// Validation

enum class Rule : std::uint8_t { PaddingPairing, StripRange, AdcRange, Momentum, EmptyDataset };

constexpr std::string_view rule_name(Rule r)
{
    switch (r) {
    case Rule::PaddingPairing: return "padding pairing";
    case Rule::StripRange: return "strip range";
    case Rule::AdcRange: return "adc range";
    case Rule::Momentum: return "momentum";
    case Rule::EmptyDataset: return "empty dataset";
    }
    return "unknown";
}

struct Violation {
    std::int64_t event = -1; // -1 when validating a single event
    int layer = -1;          // -1 for event-level rules
    int slot = -1;
    Rule rule = Rule::PaddingPairing;

    std::string describe() const
    {
        std::string s(rule_name(rule));
        if (event >= 0)
            s += " at event " + std::to_string(event);
        if (layer >= 0)
            s += " layer " + std::string(layer_view_name(layer)) + " slot " + std::to_string(slot);
        return s;
    }
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;

    std::string summary(std::size_t max_items = 5) const
    {
        if (ok)
            return "ok";
        std::string s = std::to_string(violations.size()) + " violation(s): ";
        for (std::size_t i = 0; i < violations.size() && i < max_items; ++i) {
            if (i)
                s += "; ";
            s += violations[i].describe();
        }
        if (violations.size() > max_items)
            s += "; ...";
        return s;
    }
};

namespace detail {

inline void check_event(const Event& e, std::int64_t index, ValidationReport& rep)
{
    auto fail = [&](int l, int s, Rule r) {
        rep.ok = false;
        rep.violations.push_back({index, l, s, r});
    };
    for (int l = 0; l < kLayerViews; ++l) {
        for (int s = 0; s < kSlots; ++s) {
            const std::int32_t strip = e.strips[l][s];
            const std::int32_t adc = e.adcs[l][s];
            if ((strip == kPad) != (adc == kPad)) {
                fail(l, s, Rule::PaddingPairing);
                continue;
            }
            if (strip == kPad)
                continue;
            if (strip < 1 || strip > n_strips(l))
                fail(l, s, Rule::StripRange);
            if (adc < 0 || adc > kAdcMax)
                fail(l, s, Rule::AdcRange);
        }
    }
    if (!std::isfinite(e.momentum_magnitude()))
        fail(-1, -1, Rule::Momentum);
}

} // namespace detail

/// Reports every invariant violation of one event; never throws.
inline ValidationReport validate_event(const Event& e)
{
    ValidationReport rep;
    detail::check_event(e, -1, rep);
    return rep;
}

inline ValidationReport validate_dataset(const Dataset& ds)
{
    ValidationReport rep;
    if (ds.empty()) {
        rep.ok = false;
        rep.violations.push_back({-1, -1, -1, Rule::EmptyDataset});
    }
    for (std::size_t i = 0; i < ds.size(); ++i)
        detail::check_event(ds.events[i], static_cast<std::int64_t>(i), rep);
    return rep;
}

} // namespace acfid
