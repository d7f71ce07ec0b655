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

#include "shadowforge/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include "shadowforge/errors.hpp"

namespace shadowforge {

namespace {

std::string trim(const std::string &s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return "";
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

struct Entry {
    std::string value;
    std::size_t line = 0;
};

using Section = std::map<std::string, Entry>;

std::map<std::string, Section> read_sections(std::istream &in, const std::string &source) {
    std::map<std::string, Section> sections;
    std::string current;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos) {
            raw.erase(hash);
        }
        const std::string line = trim(raw);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ParseError(source, line_no, "unterminated section header");
            }
            current = trim(line.substr(1, line.size() - 2));
            if (current != "dataset" && current != "learner" && current != "engine") {
                throw ParseError(source, line_no, "unknown section [" + current + "]");
            }
            sections[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(source, line_no, "expected key = value");
        }
        if (current.empty()) {
            throw ParseError(source, line_no, "key outside of a section");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw ParseError(source, line_no, "empty key");
        }
        auto [it, inserted] = sections[current].emplace(key, Entry{trim(line.substr(eq + 1)), line_no});
        if (!inserted) {
            throw ParseError(source, line_no, "duplicate key '" + key + "' in [" + current + "]");
        }
    }
    return sections;
}

double to_double(const std::string &v) {
    double out = 0.0;
    const auto *end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty()) {
        throw InvalidArgument("'" + v + "' is not a number");
    }
    return out;
}

template <typename Int> Int to_int(const std::string &v) {
    Int out = 0;
    const auto *end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty()) {
        throw InvalidArgument("'" + v + "' is not a non-negative integer");
    }
    return out;
}

bool to_bool(const std::string &v) {
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw InvalidArgument("'" + v + "' is not a boolean");
}

std::vector<int> to_int_list(const std::string &v) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const auto item = trim(v.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        out.push_back(to_int<int>(item));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

using Setter = std::function<void(const std::string &)>;

void apply(const std::string &section, const Section &entries, const std::map<std::string, Setter> &setters,
           const std::string &source) {
    for (const auto &[key, entry] : entries) {
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw ParseError(source, entry.line, "unknown key '" + key + "' in [" + section + "]");
        }
        try {
            it->second(entry.value);
        } catch (const InvalidArgument &e) {
            throw ParseError(source, entry.line, key + ": " + e.what());
        }
    }
}

} // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string &text) {
    std::vector<std::uint64_t> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        const auto item = trim(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        out.push_back(to_int<std::uint64_t>(item));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

void RunConfig::validate() const {
    dataset.validate();
    learner.validate();
    consistency.validate();
    if (T < 0) {
        throw InvalidArgument("T must be non-negative");
    }
    if (seeds.empty()) {
        throw InvalidArgument("seed list is empty");
    }
}

RunConfig parse_run_config(std::istream &in, const std::string &source, const std::filesystem::path &base_dir) {
    const auto sections = read_sections(in, source);
    RunConfig cfg;
    auto &d = cfg.dataset;
    auto &l = cfg.learner;
    auto &c = cfg.consistency;
    auto resolve = [&](const std::string &v) {
        const std::filesystem::path p(v);
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };

    const std::map<std::string, Setter> dataset_keys{
        {"system", [&](const std::string &v) { d.system = system_from_string(v); }},
        {"N", [&](const std::string &v) { d.n_qubits = to_int<int>(v); }},
        {"n", [&](const std::string &v) { d.n = to_int<std::size_t>(v); }},
        {"r", [&](const std::string &v) { d.r = to_double(v); }},
        {"m_l", [&](const std::string &v) { d.m_l = to_int<std::size_t>(v); }},
        {"m_u", [&](const std::string &v) { d.m_u = to_int<std::size_t>(v); }},
        {"n_val", [&](const std::string &v) { d.n_val = to_int<std::size_t>(v); }},
        {"n_test", [&](const std::string &v) { d.n_test = to_int<std::size_t>(v); }},
        {"task", [&](const std::string &v) { d.task = task_from_string(v); }},
        {"param_lo", [&](const std::string &v) { d.param_lo = to_double(v); }},
        {"param_hi", [&](const std::string &v) { d.param_hi = to_double(v); }},
        {"use_params_as_features", [&](const std::string &v) { d.use_params_as_features = to_bool(v); }},
        {"pure_state_labels", [&](const std::string &v) { d.pure_state_labels = to_bool(v); }},
        {"seed", [&](const std::string &v) { d.seed = to_int<std::uint64_t>(v); }},
        {"pauli_file", [&](const std::string &v) { d.pauli_file = resolve(v); }},
        {"pauli_file_drive", [&](const std::string &v) { d.pauli_file_drive = resolve(v); }},
    };
    const std::map<std::string, Setter> learner_keys{
        {"hidden", [&](const std::string &v) { l.hidden = to_int_list(v); }},
        {"learning_rate", [&](const std::string &v) { l.learning_rate = to_double(v); }},
        {"batch_size", [&](const std::string &v) { l.batch_size = to_int<std::size_t>(v); }},
        {"max_epochs", [&](const std::string &v) { l.max_epochs = to_int<int>(v); }},
        {"patience", [&](const std::string &v) { l.patience = to_int<int>(v); }},
        {"engine_patience", [&](const std::string &v) { l.engine_patience = to_int<int>(v); }},
        {"consistency_weight", [&](const std::string &v) { l.consistency_weight = to_double(v); }},
        {"ema_decay", [&](const std::string &v) { l.ema_decay = to_double(v); }},
        {"ridge", [&](const std::string &v) { l.ridge = to_double(v); }},
        {"holdout_fraction", [&](const std::string &v) { l.holdout_fraction = to_double(v); }},
    };
    const std::map<std::string, Setter> engine_keys{
        {"T", [&](const std::string &v) { cfg.T = to_int<int>(v); }},
        {"paradigm", [&](const std::string &v) { cfg.paradigm = paradigm_from_string(v); }},
        {"s", [&](const std::string &v) { c.s = to_int<int>(v); }},
        {"subset_fraction", [&](const std::string &v) { c.subset_fraction = to_double(v); }},
        {"admitted_fraction", [&](const std::string &v) { c.admitted_fraction = to_double(v); }},
        {"max_retries", [&](const std::string &v) { c.max_retries = to_int<int>(v); }},
        {"tighten", [&](const std::string &v) { c.tighten = to_double(v); }},
        {"selection", [&](const std::string &v) { c.selection = selection_from_string(v); }},
        {"tau", [&](const std::string &v) { c.tau = to_double(v); }},
        {"seeds", [&](const std::string &v) { cfg.seeds = parse_seed_list(v); }},
        {"out", [&](const std::string &v) { cfg.out_dir = resolve(v); }},
    };

    const auto ds_it = sections.find("dataset");
    for (const char *key : {"system", "N", "n", "r", "task"}) {
        if (ds_it == sections.end() || !ds_it->second.contains(key)) {
            throw InvalidArgument(source + ": missing required key '" + key + "' in [dataset]");
        }
    }
    apply("dataset", ds_it->second, dataset_keys, source);
    if (const auto it = sections.find("learner"); it != sections.end()) {
        apply("learner", it->second, learner_keys, source);
    }
    if (const auto it = sections.find("engine"); it != sections.end()) {
        apply("engine", it->second, engine_keys, source);
    }
    try {
        cfg.validate();
    } catch (const InvalidArgument &e) {
        throw InvalidArgument(source + ": " + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot open config " + path.string());
    }
    return parse_run_config(in, path.string(), path.parent_path());
}

} // namespace shadowforge
