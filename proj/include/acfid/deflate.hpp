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

#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "acfid/bytes.hpp"
#include "acfid/errors.hpp"

namespace acfid {

/// gzip-framed DEFLATE of `data` at the given level (1..9), via zlib.
inline Bytes gzip_compress(std::span<const std::uint8_t> data, int level)
{
    z_stream zs{};
    if (deflateInit2(&zs, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw Error("zlib deflateInit2 failed");
    Bytes out(deflateBound(&zs, static_cast<uLong>(data.size())) + 32);
    zs.next_in = const_cast<Bytef*>(data.data());
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END)
        throw Error("zlib deflate did not finish");
    out.resize(zs.total_out);
    return out;
}

inline Bytes gzip_decompress(std::span<const std::uint8_t> data)
{
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK)
        throw Error("zlib inflateInit2 failed");
    Bytes out;
    std::uint8_t buf[1 << 15];
    zs.next_in = const_cast<Bytef*>(data.data());
    zs.avail_in = static_cast<uInt>(data.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf;
        zs.avail_out = sizeof buf;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw FormatError("corrupt gzip stream");
        }
        out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

struct CompressionRow {
    std::string method;
    std::uint64_t bytes = 0;
};

/// Size/ratio table: the uncompressed canonical size, the AC payloads, then gzip levels.
struct CompressionTable {
    std::uint64_t original = 0;
    std::vector<CompressionRow> rows;
    std::vector<std::string> warnings;

    double ratio(const CompressionRow& r) const { return r.bytes ? double(original) / double(r.bytes) : 0.0; }

    const CompressionRow* find(const std::string& method) const
    {
        for (const auto& r : rows)
            if (r.method == method)
                return &r;
        return nullptr;
    }
};

inline CompressionTable gzip_compare(std::span<const std::uint8_t> canonical, std::uint64_t ac_uncond_bytes,
                                     std::uint64_t ac_cond_bytes, std::vector<int> levels = {9, 6, 1})
{
    CompressionTable t;
    t.original = canonical.size();
    t.rows.push_back({"U.-AC", ac_uncond_bytes});
    t.rows.push_back({"C.-AC", ac_cond_bytes});
    for (int level : levels) {
        try {
            t.rows.push_back({"gzip-" + std::to_string(level), gzip_compress(canonical, level).size()});
        } catch (const Error& e) {
            t.warnings.push_back(std::string("gzip-") + std::to_string(level) + " unavailable: " + e.what());
        }
    }
    return t;
}

inline std::string compression_csv(const CompressionTable& t)
{
    std::ostringstream os;
    const auto* u = t.find("U.-AC");
    const auto* c = t.find("C.-AC");
    os << "method,size_bytes,ratio,rel_to_uac,rel_to_cac\n";
    os << "Uncompressed," << t.original << ",,,\n";
    for (const auto& r : t.rows) {
        os << r.method << ',' << r.bytes << ',' << t.ratio(r) << ',';
        if (u && &r != u)
            os << double(r.bytes) / double(u->bytes);
        os << ',';
        if (c && &r != c)
            os << double(r.bytes) / double(c->bytes);
        os << '\n';
    }
    return os.str();
}

inline std::string compression_text(const CompressionTable& t)
{
    std::ostringstream os;
    const auto* u = t.find("U.-AC");
    const auto* c = t.find("C.-AC");
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %14s %9s %14s %14s\n", "Method", "Size [bytes]", "Ratio", "Rel. to U.-AC",
                  "Rel. to C.-AC");
    os << line;
    std::snprintf(line, sizeof line, "%-14s %14llu %9s %14s %14s\n", "Uncompressed",
                  static_cast<unsigned long long>(t.original), "--", "--", "--");
    os << line;
    for (const auto& r : t.rows) {
        char ru[32] = "--", rc[32] = "--";
        if (u && &r != u)
            std::snprintf(ru, sizeof ru, "%.2fx", double(r.bytes) / double(u->bytes));
        if (c && &r != c)
            std::snprintf(rc, sizeof rc, "%.2fx", double(r.bytes) / double(c->bytes));
        std::snprintf(line, sizeof line, "%-14s %14llu %8.2fx %14s %14s\n", r.method.c_str(),
                      static_cast<unsigned long long>(r.bytes), t.ratio(r), ru, rc);
        os << line;
    }
    for (const auto& w : t.warnings)
        os << "warning: " << w << '\n';
    return os.str();
}

} // namespace acfid
