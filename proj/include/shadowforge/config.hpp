// Copyright 2026 The ShadowForge Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "shadowforge/dataset.hpp"
#include "shadowforge/engine.hpp"
#include "shadowforge/learner.hpp"

namespace shadowforge {

/// Everything one experiment needs. Read from a plain-text file with
/// [dataset], [learner] and [engine] sections of `key = value` lines.
struct RunConfig {
    DatasetConfig dataset;
    LearnerConfig learner;
    ConsistencyConfig consistency;
    int T = 6;
    Paradigm paradigm = Paradigm::sl;
    std::filesystem::path out_dir = ".";
    std::vector<std::uint64_t> seeds{0};

    void validate() const;
};

/// Parses "1,2,3" (whitespace allowed around entries).
std::vector<std::uint64_t> parse_seed_list(const std::string &text);

/// Relative file paths inside the config resolve against `base_dir`.
RunConfig parse_run_config(std::istream &in, const std::string &source = "<stream>",
                           const std::filesystem::path &base_dir = {});
RunConfig load_run_config(const std::filesystem::path &path);

} // namespace shadowforge
