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
#include <cmath>
#include <cstdint>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "acfid/bytes.hpp"
#include "acfid/errors.hpp"

namespace acfid {

// Integer range coder over static cumulative-frequency tables.
//
// Registers: 33-bit low (bit 32 is the carry), 32-bit range, one cached output
// byte plus a count of pending 0xFF bytes that a carry may still ripple through.
// Every table sums to 2^16, so range * cum stays below 2^48. After each symbol
// range >= 2^24. Termination pushes the four bytes of low, so a stream of S
// renormalisation shifts is exactly S + 4 bytes long and its length exceeds the
// ideal -log2 q by between 24 and 32 bits (plus a sub-bit rounding drift).

inline constexpr int kProbBits = 16;
inline constexpr std::uint32_t kProbTotal = 1U << kProbBits;
inline constexpr std::uint64_t kRangeTop = 0xFFFFFFFFULL;
inline constexpr std::uint64_t kRangeBottom = 1ULL << 24;
inline constexpr int kFlushBytes = 4;
/// Upper bound on achieved minus ideal bits for one stream.
inline constexpr double kStreamOverheadBits = 64.0;

/// Immutable cumulative-frequency table with cum.back() == 2^16 and every frequency >= 1.
class CdfTable {
public:
    CdfTable() : CdfTable(std::vector<std::uint32_t>{0, kProbTotal}) {}

    /// Adopts a cumulative array; throws CoderError unless it is a valid table.
    explicit CdfTable(std::vector<std::uint32_t> cum) : cum_(std::move(cum))
    {
        if (cum_.size() < 2)
            throw CoderError("cdf table needs at least one symbol");
        if (cum_.front() != 0 || cum_.back() != kProbTotal)
            throw CoderError("cdf table must run from 0 to 65536");
        for (std::size_t s = 0; s + 1 < cum_.size(); ++s)
            if (cum_[s + 1] <= cum_[s])
                throw CoderError("cdf table has a zero-frequency symbol at " + std::to_string(s));
        bits_.resize(size());
        for (std::size_t s = 0; s < size(); ++s)
            bits_[s] = kProbBits - std::log2(static_cast<double>(freq(s)));
    }

    std::size_t size() const { return cum_.size() - 1; }
    std::uint32_t cum(std::size_t s) const { return cum_[s]; }
    std::uint32_t freq(std::size_t s) const { return cum_[s + 1] - cum_[s]; }
    std::span<const std::uint32_t> cumulative() const { return cum_; }

    double probability(std::size_t s) const { return static_cast<double>(freq(s)) / kProbTotal; }

    /// Ideal codelength -log2(f/2^16) of symbol s.
    double cost(std::size_t s) const { return bits_[s]; }

    /// Shannon entropy of the table in bits.
    double entropy() const
    {
        double h = 0.0;
        for (std::size_t s = 0; s < size(); ++s)
            h += probability(s) * bits_[s];
        return h;
    }

    /// Index s with cum[s] <= target < cum[s+1].
    std::size_t find(std::uint32_t target) const
    {
        const auto it = std::upper_bound(cum_.begin() + 1, cum_.end(), target);
        return static_cast<std::size_t>(it - (cum_.begin() + 1));
    }

    friend bool operator==(const CdfTable& a, const CdfTable& b) { return a.cum_ == b.cum_; }

private:
    std::vector<std::uint32_t> cum_;
    std::vector<double> bits_;
};

/// Scales non-negative integer weights to frequencies summing to 2^16, each >= 1,
/// by largest-remainder apportionment (ties to the lower symbol index).
inline CdfTable cdf_from_weights(std::span<const std::uint64_t> weights)
{
    const std::size_t n = weights.size();
    if (n == 0)
        throw UsageError("alphabet must have at least one symbol");
    if (n > kProbTotal)
        throw UsageError("alphabet of " + std::to_string(n) + " symbols exceeds 65536");
    unsigned __int128 total = 0;
    for (auto w : weights)
        total += w;
    std::vector<std::uint32_t> freq(n);
    std::vector<std::uint64_t> rem(n);
    std::vector<bool> bumped(n, false);
    std::int64_t assigned = 0;
    if (total == 0) {
        // All-zero weights: uniform.
        for (std::size_t s = 0; s < n; ++s) {
            freq[s] = static_cast<std::uint32_t>(kProbTotal / n);
            rem[s] = kProbTotal % n ? 1 : 0;
            assigned += freq[s];
        }
    } else {
        for (std::size_t s = 0; s < n; ++s) {
            const unsigned __int128 scaled = static_cast<unsigned __int128>(weights[s]) * kProbTotal;
            freq[s] = static_cast<std::uint32_t>(scaled / total);
            rem[s] = static_cast<std::uint64_t>(scaled % total);
            if (freq[s] == 0) {
                freq[s] = 1;
                bumped[s] = true;
            }
            assigned += freq[s];
        }
    }
    std::int64_t deficit = static_cast<std::int64_t>(kProbTotal) - assigned;
    if (deficit > 0) {
        std::vector<std::size_t> order;
        for (std::size_t s = 0; s < n; ++s)
            if (!bumped[s])
                order.push_back(s);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
        for (std::size_t i = 0; deficit > 0; ++i, --deficit)
            ++freq[order[i % order.size()]];
    } else if (deficit < 0) {
        // Zero-weight bumps overshot; take back from the largest frequencies.
        auto cmp = [&](std::size_t a, std::size_t b) { return freq[a] != freq[b] ? freq[a] < freq[b] : a > b; };
        std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(cmp)> heap(cmp);
        for (std::size_t s = 0; s < n; ++s)
            heap.push(s);
        for (; deficit < 0; ++deficit) {
            const std::size_t s = heap.top();
            heap.pop();
            --freq[s];
            heap.push(s);
        }
    }
    std::vector<std::uint32_t> cum(n + 1, 0);
    for (std::size_t s = 0; s < n; ++s)
        cum[s + 1] = cum[s] + freq[s];
    return CdfTable(std::move(cum));
}

/// Add-one smoothing of raw counts, then apportionment to 2^16.
inline CdfTable cdf_from_frequencies(std::span<const std::uint64_t> counts)
{
    std::vector<std::uint64_t> w(counts.begin(), counts.end());
    for (auto& c : w)
        c += 1;
    return cdf_from_weights(w);
}

/// Quantises a probability vector (no smoothing); used for injected reference tables.
inline CdfTable cdf_from_probabilities(std::span<const double> probs)
{
    std::vector<std::uint64_t> w(probs.size());
    for (std::size_t s = 0; s < probs.size(); ++s)
        w[s] = static_cast<std::uint64_t>(std::llround(std::max(0.0, probs[s]) * 0x1.0p50));
    return cdf_from_weights(w);
}

// ---------------------------------------------------------------------------

class RangeEncoder {
public:
    void encode(const CdfTable& table, std::size_t symbol)
    {
        if (symbol >= table.size())
            throw CoderError("symbol " + std::to_string(symbol) + " outside alphabet of " +
                             std::to_string(table.size()));
        encode_interval(table.cum(symbol), table.cum(symbol + 1));
    }

    /// Narrow to [cum_lo, cum_hi) of a 2^16 total; caller guarantees cum_lo < cum_hi <= 2^16.
    void encode_interval(std::uint32_t cum_lo, std::uint32_t cum_hi)
    {
        const std::uint64_t lo = (range_ * cum_lo) >> kProbBits;
        const std::uint64_t hi = (range_ * cum_hi) >> kProbBits;
        low_ += lo;
        range_ = hi - lo;
        while (range_ < kRangeBottom) {
            shift_low();
            range_ <<= 8;
        }
        ++symbols_;
    }

    /// Flushes the coder and returns the payload.
    Bytes finish() &&
    {
        for (int i = 0; i < kFlushBytes; ++i)
            shift_low();
        out_.push_back(cache_);
        for (; pending_ > 0; --pending_)
            out_.push_back(0xFF);
        return std::move(out_);
    }

    std::uint64_t symbols() const { return symbols_; }

private:
    void shift_low()
    {
        if (!has_cache_) {
            // Before the first shift low + range <= 2^32, so no carry can reach this byte.
            cache_ = static_cast<std::uint8_t>(low_ >> 24);
            has_cache_ = true;
        } else if (low_ < 0xFF000000ULL || low_ > kRangeTop) {
            const auto carry = static_cast<std::uint8_t>(low_ >> 32);
            out_.push_back(static_cast<std::uint8_t>(cache_ + carry));
            for (; pending_ > 0; --pending_)
                out_.push_back(static_cast<std::uint8_t>(0xFF + carry));
            cache_ = static_cast<std::uint8_t>(low_ >> 24);
        } else {
            ++pending_;
        }
        low_ = (low_ & 0x00FFFFFFULL) << 8;
    }

    std::uint64_t low_ = 0;
    std::uint64_t range_ = kRangeTop;
    std::uint64_t pending_ = 0;
    std::uint64_t symbols_ = 0;
    std::uint8_t cache_ = 0;
    bool has_cache_ = false;
    Bytes out_;
};

/// Tracks only the range register: yields the exact payload length of an
/// encoding without producing bytes.
class RangeSizer {
public:
    void encode_interval(std::uint32_t cum_lo, std::uint32_t cum_hi)
    {
        const std::uint64_t lo = (range_ * cum_lo) >> kProbBits;
        const std::uint64_t hi = (range_ * cum_hi) >> kProbBits;
        range_ = hi - lo;
        while (range_ < kRangeBottom) {
            ++shifts_;
            range_ <<= 8;
        }
    }

    void encode(const CdfTable& table, std::size_t symbol) { encode_interval(table.cum(symbol), table.cum(symbol + 1)); }

    std::uint64_t payload_bytes() const { return shifts_ + kFlushBytes; }

private:
    std::uint64_t range_ = kRangeTop;
    std::uint64_t shifts_ = 0;
};

enum class PastEnd : std::uint8_t {
    Throw,   ///< reading beyond the payload is an error
    ZeroFill ///< beyond the payload reads as zero bytes
};

class RangeDecoder {
public:
    explicit RangeDecoder(std::span<const std::uint8_t> payload, PastEnd policy = PastEnd::Throw)
        : data_(payload), policy_(policy)
    {
        for (int i = 0; i < kFlushBytes; ++i)
            code_ = (code_ << 8) | next();
        clamp();
    }

    std::size_t decode(const CdfTable& table)
    {
        const auto target = static_cast<std::uint32_t>(
            std::min<std::uint64_t>(((code_ + 1) * kProbTotal - 1) / range_, kProbTotal - 1));
        const std::size_t s = table.find(target);
        const std::uint64_t lo = (range_ * table.cum(s)) >> kProbBits;
        const std::uint64_t hi = (range_ * table.cum(s + 1)) >> kProbBits;
        code_ -= lo;
        range_ = hi - lo;
        while (range_ < kRangeBottom) {
            code_ = (code_ << 8) | next();
            range_ <<= 8;
        }
        clamp();
        return s;
    }

    std::size_t consumed() const { return std::min(pos_, data_.size()); }
    std::size_t overrun() const { return pos_ > data_.size() ? pos_ - data_.size() : 0; }

private:
    std::uint64_t next()
    {
        if (pos_ < data_.size())
            return data_[pos_++];
        if (policy_ == PastEnd::Throw)
            throw CoderError("payload exhausted prematurely");
        ++pos_;
        return 0;
    }

    // Valid payloads keep code < range; foreign bytes may not.
    void clamp()
    {
        if (code_ >= range_)
            code_ = range_ - 1;
    }

    std::span<const std::uint8_t> data_;
    PastEnd policy_;
    std::size_t pos_ = 0;
    std::uint64_t code_ = 0;
    std::uint64_t range_ = kRangeTop;
};

} // namespace acfid
