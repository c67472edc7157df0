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
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "acfid/bytes.hpp"
#include "acfid/event.hpp"
#include "acfid/random.hpp"

namespace acfid {

enum class MomentumLaw : std::uint8_t { Uniform, LogUniform };

// Toy calorimeter standing in for simulated detector data. Every sampling step
// has a closed-form probability so the generating law can score its own events.
struct SyntheticConfig {
    std::uint64_t seed = 1;
    std::size_t n_events = 1000;
    std::array<double, kLayerViews> occupancy_rate_base{2.26, 2.70, 3.27, 2.45, 2.24, 2.14, 1.44, 1.46, 1.42};
    double occupancy_slope = 0.3; // mean hits scale as base * (1 + slope * |p|)
    std::array<double, kLayerViews> adc_scale{60, 58, 55, 50, 48, 46, 40, 40, 38}; // mean ADC per GeV
    double shower_width = 2.0;                                                  // strips
    MomentumLaw momentum_law = MomentumLaw::Uniform;
    double p_min = 0.2;
    double p_max = 10.0;
    double cone_half_angle_deg = 30.0;

    void validate() const
    {
        if (n_events < 1)
            throw UsageError("n_events must be positive");
        for (int l = 0; l < kLayerViews; ++l) {
            if (!(occupancy_rate_base[l] > 0.0))
                throw UsageError("occupancy_rate_base must be strictly positive");
            if (!(adc_scale[l] > 0.0))
                throw UsageError("adc_scale must be strictly positive");
        }
        if (!(occupancy_slope >= 0.0))
            throw UsageError("occupancy_slope must be non-negative");
        if (!(shower_width > 0.0))
            throw UsageError("shower_width must be strictly positive");
        if (!(p_min > 0.0 && p_max > p_min))
            throw UsageError("momentum range must satisfy 0 < p_min < p_max");
        if (!(cone_half_angle_deg > 0.0 && cone_half_angle_deg < 80.0))
            throw UsageError("cone_half_angle_deg must lie in (0, 80)");
    }

    /// Digest of the law parameters only (seed and size excluded).
    std::uint64_t law_hash() const
    {
        ByteWriter w;
        for (double v : occupancy_rate_base)
            w.f64(v);
        w.f64(occupancy_slope);
        for (double v : adc_scale)
            w.f64(v);
        w.f64(shower_width);
        w.u8(static_cast<std::uint8_t>(momentum_law));
        w.f64(p_min);
        w.f64(p_max);
        w.f64(cone_half_angle_deg);
        return fnv1a64(w.bytes());
    }

    std::string provenance() const
    {
        return "synthetic(law=" + hex64(law_hash()) + ",seed=" + std::to_string(seed) +
               ",n=" + std::to_string(n_events) + ")";
    }
};

// ---------------------------------------------------------------------------
// Config text format: one `key = value` per line, arrays comma separated, '#' comments.

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size())
            throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': not a number: '" + v + "'");
    }
}

inline std::array<double, kLayerViews> parse_array(const std::string& key, const std::string& v)
{
    std::array<double, kLayerViews> out{};
    std::stringstream ss(v);
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= kLayerViews)
            throw UsageError("config key '" + key + "': expected 9 values");
        out[static_cast<std::size_t>(i++)] = parse_double(key, trim(item));
    }
    if (i != kLayerViews)
        throw UsageError("config key '" + key + "': expected 9 values");
    return out;
}

inline std::string format_array(const std::array<double, kLayerViews>& a)
{
    std::string s;
    for (int i = 0; i < kLayerViews; ++i) {
        if (i)
            s += ",";
        std::ostringstream os;
        os.precision(17);
        os << a[static_cast<std::size_t>(i)];
        s += os.str();
    }
    return s;
}

} // namespace detail

inline SyntheticConfig parse_synthetic_config(std::string_view text)
{
    SyntheticConfig cfg;
    std::stringstream ss{std::string(text)};
    std::string line;
    while (std::getline(ss, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line without '=': " + line);
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string val = detail::trim(std::string_view(line).substr(eq + 1));
        if (key == "seed")
            cfg.seed = std::stoull(val);
        else if (key == "n_events")
            cfg.n_events = static_cast<std::size_t>(std::stoull(val));
        else if (key == "occupancy_rate_base")
            cfg.occupancy_rate_base = detail::parse_array(key, val);
        else if (key == "occupancy_slope")
            cfg.occupancy_slope = detail::parse_double(key, val);
        else if (key == "adc_scale")
            cfg.adc_scale = detail::parse_array(key, val);
        else if (key == "shower_width")
            cfg.shower_width = detail::parse_double(key, val);
        else if (key == "momentum_law") {
            if (val == "uniform")
                cfg.momentum_law = MomentumLaw::Uniform;
            else if (val == "loguniform")
                cfg.momentum_law = MomentumLaw::LogUniform;
            else
                throw UsageError("momentum_law must be 'uniform' or 'loguniform'");
        } else if (key == "p_min")
            cfg.p_min = detail::parse_double(key, val);
        else if (key == "p_max")
            cfg.p_max = detail::parse_double(key, val);
        else if (key == "cone_half_angle_deg")
            cfg.cone_half_angle_deg = detail::parse_double(key, val);
        else
            throw UsageError("unknown config key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

inline std::string format_synthetic_config(const SyntheticConfig& c)
{
    std::ostringstream os;
    os.precision(17);
    os << "seed = " << c.seed << "\n"
       << "n_events = " << c.n_events << "\n"
       << "occupancy_rate_base = " << detail::format_array(c.occupancy_rate_base) << "\n"
       << "occupancy_slope = " << c.occupancy_slope << "\n"
       << "adc_scale = " << detail::format_array(c.adc_scale) << "\n"
       << "shower_width = " << c.shower_width << "\n"
       << "momentum_law = " << (c.momentum_law == MomentumLaw::Uniform ? "uniform" : "loguniform") << "\n"
       << "p_min = " << c.p_min << "\n"
       << "p_max = " << c.p_max << "\n"
       << "cone_half_angle_deg = " << c.cone_half_angle_deg << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// The generating law

/// Exact probability model of the toy detector, given an event's momentum.
class SyntheticLaw {
public:
    explicit SyntheticLaw(SyntheticConfig cfg) : cfg_(std::move(cfg))
    {
        cfg_.validate();
        tan_cone_ = std::tan(cfg_.cone_half_angle_deg * std::numbers::pi / 180.0);
    }

    const SyntheticConfig& config() const { return cfg_; }

    double hit_rate(int lv, double pmag) const
    {
        return std::min(cfg_.occupancy_rate_base[lv] * (1.0 + cfg_.occupancy_slope * pmag), double(kSlots));
    }

    double adc_mean(int lv, double pmag) const { return cfg_.adc_scale[lv] * pmag; }

    /// Shower centre (continuous strip coordinate) from the transverse direction.
    double shower_center(int lv, const std::array<float, 3>& p) const
    {
        const double px = p[0], py = p[1], pz = p[2];
        const double x = px / (pz * tan_cone_);
        const double y = py / (pz * tan_cone_);
        return shower_center_from_xy(lv, x, y);
    }

    double shower_center_from_xy(int lv, double x, double y) const
    {
        const double psi = (lv % 3) * std::numbers::pi / 3.0; // U, V, W stereo rotation
        const double u = std::clamp((x * std::cos(psi) + y * std::sin(psi) + 1.0) / 2.0, 0.0, 1.0);
        return 1.0 + (n_strips(lv) - 1) * u;
    }

    // count = min(Poisson(lambda), 20)
    static double count_prob(int k, double lambda)
    {
        if (lambda <= 0.0)
            return k == 0 ? 1.0 : 0.0;
        if (k < kSlots)
            return std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
        double below = 0.0;
        for (int j = 0; j < kSlots; ++j)
            below += count_prob(j, lambda);
        return std::max(0.0, 1.0 - below);
    }

    // P(count > s)
    static double occupancy_prob(int s, double lambda)
    {
        double below = 0.0;
        for (int j = 0; j <= s; ++j)
            below += count_prob(j, lambda);
        return std::clamp(1.0 - below, 0.0, 1.0);
    }

    static double expected_count(double lambda)
    {
        double e = 0.0;
        for (int s = 0; s < kSlots; ++s)
            e += occupancy_prob(s, lambda);
        return e;
    }

    // round(center + width * Z) clipped to [1, n]
    double strip_prob(int k, int lv, double center) const
    {
        const int n = n_strips(lv);
        const double w = cfg_.shower_width;
        auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - center) / (w * std::numbers::sqrt2)); };
        const double hi = k == n ? 1.0 : cdf(k + 0.5);
        const double lo = k == 1 ? 0.0 : cdf(k - 0.5);
        return std::max(hi - lo, 0.0);
    }

    // Geometric with mean mu on {0, 1, ...}, mass at and above kAdcMax lumped at kAdcMax.
    static double adc_prob(int k, double mu)
    {
        const double log_theta = std::log(mu / (1.0 + mu));
        if (k >= kAdcMax)
            return std::exp(kAdcMax * log_theta);
        return std::exp(k * log_theta) / (1.0 + mu);
    }

    /// -log2 p(hits | momentum); +inf if the event is impossible under this law.
    double hits_codelength(const Event& e) const
    {
        const double pmag = e.momentum_magnitude();
        double bits = 0.0;
        for (int l = 0; l < kLayerViews; ++l) {
            int count = 0;
            while (count < kSlots && e.occupied(l, count))
                ++count;
            for (int s = count; s < kSlots; ++s)
                if (e.occupied(l, s))
                    return std::numeric_limits<double>::infinity(); // not left-packed
            const double pc = count_prob(count, hit_rate(l, pmag));
            if (pc <= 0.0)
                return std::numeric_limits<double>::infinity();
            bits -= std::log2(pc);
            if (count == 0)
                continue;
            const double center = shower_center(l, e.momentum);
            const double mu = adc_mean(l, pmag);
            for (int s = 0; s < count; ++s) {
                const double ps = strip_prob(e.strips[l][s], l, center);
                const double pa = adc_prob(e.adcs[l][s], mu);
                if (ps <= 0.0 || pa <= 0.0)
                    return std::numeric_limits<double>::infinity();
                bits -= std::log2(ps) + std::log2(pa);
            }
        }
        return bits;
    }

    // ---- entropies --------------------------------------------------------

    static double count_entropy(double lambda)
    {
        double h = 0.0;
        for (int k = 0; k <= kSlots; ++k) {
            const double p = count_prob(k, lambda);
            if (p > 0.0)
                h -= p * std::log2(p);
        }
        return h;
    }

    double strip_entropy(int lv, double center) const
    {
        double h = 0.0;
        for (int k = 1; k <= n_strips(lv); ++k) {
            const double p = strip_prob(k, lv, center);
            if (p > 0.0)
                h -= p * std::log2(p);
        }
        return h;
    }

    // Closed form for the clipped geometric.
    static double adc_entropy(double mu)
    {
        const double log_theta = std::log(mu / (1.0 + mu)); // < 0
        const double one_minus_theta = 1.0 / (1.0 + mu);
        const double K = kAdcMax;
        const double tail = std::exp(K * log_theta);
        const double theta = std::exp(log_theta);
        const double s0 = 1.0 - tail;
        const double s1 = theta * (1.0 - tail) / one_minus_theta - K * tail;
        double h = -s0 * std::log2(one_minus_theta) - s1 * log_theta / std::numbers::ln2;
        if (tail > 0.0)
            h -= tail * std::log2(tail);
        return h;
    }

    /// Momentum-magnitude density on [p_min, p_max].
    double momentum_density(double p) const
    {
        if (p < cfg_.p_min || p > cfg_.p_max)
            return 0.0;
        if (cfg_.momentum_law == MomentumLaw::Uniform)
            return 1.0 / (cfg_.p_max - cfg_.p_min);
        return 1.0 / (p * std::log(cfg_.p_max / cfg_.p_min));
    }

    /// E_dir[f(x, y)] over the uniform-in-solid-angle cone, by 2-D Gauss-Kronrod.
    template <typename F>
    double direction_average(F&& f) const
    {
        using boost::math::quadrature::gauss_kronrod;
        const double cmin = std::cos(cfg_.cone_half_angle_deg * std::numbers::pi / 180.0);
        auto over_cos = [&](double c) {
            const double r = std::sqrt(std::max(0.0, 1.0 - c * c)) / c / tan_cone_;
            auto over_phi = [&](double phi) { return f(r * std::cos(phi), r * std::sin(phi)); };
            return gauss_kronrod<double, 61>::integrate(over_phi, 0.0, 2.0 * std::numbers::pi, 6, 1e-11) /
                   (2.0 * std::numbers::pi);
        };
        return gauss_kronrod<double, 61>::integrate(over_cos, cmin, 1.0, 6, 1e-11) / (1.0 - cmin);
    }

    /// E_p[f(|p|)] restricted to [lo, hi) and the normalising mass of that slab.
    template <typename F>
    std::pair<double, double> momentum_integral(F&& f, double lo, double hi) const
    {
        using boost::math::quadrature::gauss_kronrod;
        lo = std::max(lo, cfg_.p_min);
        hi = std::min(hi, cfg_.p_max);
        if (!(hi > lo))
            return {0.0, 0.0};
        const double mass =
            gauss_kronrod<double, 61>::integrate([&](double p) { return momentum_density(p); }, lo, hi, 8, 1e-12);
        const double val = gauss_kronrod<double, 61>::integrate(
            [&](double p) { return momentum_density(p) * f(p); }, lo, hi, 8, 1e-12);
        return {val, mass};
    }

    /// H(hits | momentum) in bits/event, by quadrature over the momentum law.
    double hits_entropy() const
    {
        double total = 0.0;
        for (int l = 0; l < kLayerViews; ++l) {
            auto per_p = [&](double p) {
                const double lam = hit_rate(l, p);
                return count_entropy(lam) + expected_count(lam) * adc_entropy(adc_mean(l, p));
            };
            total += momentum_integral(per_p, cfg_.p_min, cfg_.p_max).first;
            const double mean_count =
                momentum_integral([&](double p) { return expected_count(hit_rate(l, p)); }, cfg_.p_min, cfg_.p_max)
                    .first;
            const double h_strip =
                direction_average([&](double x, double y) { return strip_entropy(l, shower_center_from_xy(l, x, y)); });
            total += mean_count * h_strip;
        }
        return total;
    }

    // ---- sampling ---------------------------------------------------------

    Event sample(std::mt19937_64& rng) const
    {
        Event e;
        const double u = uniform01(rng);
        const double pmag_draw = cfg_.momentum_law == MomentumLaw::Uniform
                                     ? cfg_.p_min + (cfg_.p_max - cfg_.p_min) * u
                                     : cfg_.p_min * std::pow(cfg_.p_max / cfg_.p_min, u);
        const double cmin = std::cos(cfg_.cone_half_angle_deg * std::numbers::pi / 180.0);
        const double cos_t = cmin + (1.0 - cmin) * uniform01(rng);
        const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
        const double phi = 2.0 * std::numbers::pi * uniform01(rng);
        e.momentum = {static_cast<float>(pmag_draw * sin_t * std::cos(phi)),
                      static_cast<float>(pmag_draw * sin_t * std::sin(phi)), static_cast<float>(pmag_draw * cos_t)};
        // Everything downstream conditions on the stored float32 momentum.
        const double pmag = e.momentum_magnitude();

        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int l = 0; l < kLayerViews; ++l) {
            const int count = sample_count(hit_rate(l, pmag), rng);
            const double center = shower_center(l, e.momentum);
            const double log_theta = std::log(adc_mean(l, pmag) / (1.0 + adc_mean(l, pmag)));
            for (int s = 0; s < count; ++s) {
                const double x = std::round(center + cfg_.shower_width * gauss(rng));
                e.strips[l][s] = static_cast<std::int32_t>(std::clamp(x, 1.0, double(n_strips(l))));
                const double v = 1.0 - uniform01(rng); // (0, 1]
                const double k = std::floor(std::log(v) / log_theta);
                e.adcs[l][s] = static_cast<std::int32_t>(std::min(k, double(kAdcMax)));
            }
        }
        return e;
    }

private:
    static int sample_count(double lambda, std::mt19937_64& rng)
    {
        const double u = uniform01(rng);
        if (lambda <= 0.0)
            return 0;
        double p = std::exp(-lambda);
        double cdf = p;
        int k = 0;
        while (u >= cdf && k < kSlots) {
            ++k;
            p *= lambda / k;
            cdf += p;
        }
        return k;
    }

    SyntheticConfig cfg_;
    double tan_cone_ = 0.0;
};

/// Deterministic given cfg.seed; event i draws from its own stream stream_engine(seed, i).
inline Dataset generate_synthetic(const SyntheticConfig& cfg)
{
    const SyntheticLaw law(cfg);
    Dataset ds;
    ds.provenance = cfg.provenance();
    ds.events.reserve(cfg.n_events);
    for (std::size_t i = 0; i < cfg.n_events; ++i) {
        auto rng = stream_engine(cfg.seed, i);
        ds.events.push_back(law.sample(rng));
    }
    return ds;
}

/// True when the dataset (or a split of it) was drawn from this law.
inline bool has_oracle_provenance(const Dataset& ds, const SyntheticConfig& cfg)
{
    return ds.provenance.find("synthetic(law=" + hex64(cfg.law_hash())) != std::string::npos;
}

} // namespace acfid
