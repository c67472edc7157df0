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

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "acfid/canonical.hpp"

namespace acfid {

inline constexpr std::string_view kVersion = "0.1.0";

/// Record of one tool invocation. Re-running `argv` reproduces the outputs byte for byte.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, hash
    std::vector<std::pair<std::string, std::string>> outputs; // path, hash
    double wall_seconds = 0.0;
    int exit_code = 0;

    void add_input(const std::filesystem::path& p) { inputs.emplace_back(p.string(), file_hash(p)); }
    void add_output(const std::filesystem::path& p) { outputs.emplace_back(p.string(), file_hash(p)); }

    static std::string file_hash(const std::filesystem::path& p) { return hex64(fnv1a64(read_file(p))); }

    nlohmann::ordered_json to_json() const
    {
        nlohmann::ordered_json j;
        j["tool"] = "acfid";
        j["version"] = std::string(kVersion);
        j["command"] = command;
        j["argv"] = argv;
        j["seed"] = seed;
        j["params"] = params;
        auto files = [](const auto& v) {
            nlohmann::ordered_json a = nlohmann::ordered_json::array();
            for (const auto& [path, hash] : v)
                a.push_back({{"path", path}, {"fnv1a64", hash}});
            return a;
        };
        j["inputs"] = files(inputs);
        j["outputs"] = files(outputs);
        j["wall_seconds"] = wall_seconds;
        j["exit_code"] = exit_code;
        return j;
    }

    void save(const std::filesystem::path& p) const { write_text(p, to_json().dump(2) + "\n"); }
};

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

} // namespace acfid
