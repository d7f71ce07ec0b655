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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace shadowforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

struct CliOptions {
    std::filesystem::path config;
    std::filesystem::path dataset;
    std::filesystem::path model;
    std::optional<std::filesystem::path> out;
    std::optional<std::string> seeds;
    std::string split = "test";
    bool wallclock = false;
    std::vector<std::string> patterns;
};

/// Each command writes results to `out`, diagnostics to `err`, and returns
/// the process exit code; exceptions never escape.
int cmd_gen(const CliOptions &opt, std::ostream &out, std::ostream &err);
int cmd_run(const CliOptions &opt, std::ostream &out, std::ostream &err);
int cmd_eval(const CliOptions &opt, std::ostream &out, std::ostream &err);
int cmd_table(const CliOptions &opt, std::ostream &out, std::ostream &err);

/// Sample mean and standard deviation (n - 1 denominator; 0 for one value).
std::pair<double, double> mean_std(const std::vector<double> &values);

} // namespace shadowforge
