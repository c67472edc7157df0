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

#include <random>

#include "acfid/event.hpp"
#include "acfid/random.hpp"

namespace acfid::testutil {

// Arbitrary valid event: random slot pattern (not left-packed), full strip and
// ADC ranges, finite momentum.
inline Event random_event(std::mt19937_64& rng, double occupancy = 0.2)
{
    Event e;
    for (int l = 0; l < kLayerViews; ++l) {
        for (int s = 0; s < kSlots; ++s) {
            if (uniform01(rng) >= occupancy)
                continue;
            e.strips[l][s] = 1 + static_cast<std::int32_t>(uniform_below(rng, n_strips(l)));
            e.adcs[l][s] = static_cast<std::int32_t>(uniform01(rng) < 0.5 ? uniform_below(rng, 600)
                                                                            : uniform_below(rng, kAdcMax + 1));
        }
    }
    for (auto& c : e.momentum)
        c = static_cast<float>(uniform01(rng) * 12.0 - 4.0);
    return e;
}

inline Dataset random_dataset(std::size_t n, std::uint64_t seed, double occupancy = 0.2)
{
    std::mt19937_64 rng(mix64(seed));
    Dataset ds;
    ds.provenance = "random(seed=" + std::to_string(seed) + ")";
    for (std::size_t i = 0; i < n; ++i)
        ds.events.push_back(random_event(rng, occupancy));
    return ds;
}

inline Event single_hit_event(int lv, int slot, std::int32_t strip, std::int32_t adc)
{
    Event e;
    e.strips[lv][slot] = strip;
    e.adcs[lv][slot] = adc;
    e.momentum = {0.5F, -0.25F, 2.0F};
    return e;
}

} // namespace acfid::testutil
