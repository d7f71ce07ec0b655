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

#include "shadowforge/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "shadowforge/errors.hpp"
#include "shadowforge/parallel.hpp"

namespace shadowforge {

using ordered_json = nlohmann::ordered_json;

std::string to_string(SystemKind s) {
    switch (s) {
    case SystemKind::xxz:
        return "xxz";
    case SystemKind::cluster_ising:
        return "cluster_ising";
    case SystemKind::pauli_file:
        return "pauli_file";
    }
    return "?";
}

SystemKind system_from_string(const std::string &name) {
    if (name == "xxz") {
        return SystemKind::xxz;
    }
    if (name == "cluster_ising") {
        return SystemKind::cluster_ising;
    }
    if (name == "pauli_file") {
        return SystemKind::pauli_file;
    }
    throw InvalidArgument("unknown system '" + name + "' (expected xxz, cluster_ising or pauli_file)");
}

std::string to_string(Split s) {
    switch (s) {
    case Split::L:
        return "L";
    case Split::U:
        return "U";
    case Split::val:
        return "val";
    case Split::test:
        return "test";
    }
    return "?";
}

Split split_from_string(const std::string &name) {
    if (name == "L") {
        return Split::L;
    }
    if (name == "U") {
        return Split::U;
    }
    if (name == "val") {
        return Split::val;
    }
    if (name == "test") {
        return Split::test;
    }
    throw InvalidArgument("unknown split '" + name + "'");
}

MeasurementRecord DataPoint::visible_record() const {
    return visible_m == record.m() ? record : record.head(visible_m);
}

// ---------------------------------------------------------------------------
// Config

std::size_t DatasetConfig::n_labeled() const {
    return static_cast<std::size_t>(std::llround(r * static_cast<double>(n)));
}

void DatasetConfig::validate() const {
    if (!(r > 0.0 && r < 1.0)) {
        throw InvalidArgument("r must lie in (0, 1)");
    }
    if (!(m_l > m_u && m_u >= 2)) {
        throw InvalidArgument("need m_l > m_u >= 2");
    }
    if (n_val < 1) {
        throw InvalidArgument("n_val must be >= 1");
    }
    if (n < 2 || n_labeled() < 1) {
        throw InvalidArgument("dataset needs at least one labeled point");
    }
    if (n_qubits < 2 || n_qubits > kMaxQubits) {
        throw InvalidArgument("N must lie in [2, " + std::to_string(kMaxQubits) + "]");
    }
    if (system == SystemKind::xxz && n_qubits % 2 != 0) {
        throw InvalidArgument("xxz needs an even N");
    }
    if (system == SystemKind::cluster_ising && n_qubits < 3) {
        throw InvalidArgument("cluster_ising needs N >= 3");
    }
    if (system == SystemKind::pauli_file && pauli_file.empty()) {
        throw InvalidArgument("pauli_file system needs a pauli_file path");
    }
    if (!(param_lo < param_hi) || !std::isfinite(param_lo) || !std::isfinite(param_hi)) {
        throw InvalidArgument("parameter range must satisfy lo < hi");
    }
}

HamiltonianFamily::HamiltonianFamily(const DatasetConfig &cfg) : system_(cfg.system), n_qubits_(cfg.n_qubits) {
    if (system_ == SystemKind::pauli_file) {
        base_ = load_pauli_sum(cfg.pauli_file);
        if (!cfg.pauli_file_drive.empty()) {
            drive_ = load_pauli_sum(cfg.pauli_file_drive);
            if (drive_.n_qubits != base_.n_qubits) {
                throw InvalidArgument("pauli_file and pauli_file_drive disagree on N");
            }
        } else {
            drive_.n_qubits = base_.n_qubits;
        }
        if (base_.n_qubits != n_qubits_) {
            throw InvalidArgument("pauli_file has " + std::to_string(base_.n_qubits) + " qubits, config says " +
                                  std::to_string(n_qubits_));
        }
    }
}

HamiltonianSpec HamiltonianFamily::operator()(std::span<const double> params) const {
    if (params.size() != 1) {
        throw InvalidArgument("expected a single parameter ratio");
    }
    const double p = params[0];
    switch (system_) {
    case SystemKind::xxz:
        return build_xxz(n_qubits_, p, 1.0);
    case SystemKind::cluster_ising:
        return build_cluster_ising(n_qubits_, p, 1.0);
    case SystemKind::pauli_file: {
        HamiltonianSpec h = base_;
        for (const auto &t : drive_.terms) {
            h.add_term(t.axes, p * t.coefficient);
        }
        h.params = {p};
        return h;
    }
    }
    throw InvalidArgument("unknown system");
}

// ---------------------------------------------------------------------------
// Dataset container

const std::vector<DataPoint> &HybridDataset::test() const {
    if (access_ == Access::training) {
        throw AccessError("test split is not accessible in training mode");
    }
    return test_;
}

std::vector<DataPoint> &HybridDataset::mutable_test() {
    if (access_ == Access::training) {
        throw AccessError("test split is not accessible in training mode");
    }
    return test_;
}

void HybridDataset::seal_for_training() {
    test_.clear();
    test_.shrink_to_fit();
    access_ = Access::training;
}

// ---------------------------------------------------------------------------
// Construction

std::vector<std::vector<double>> sample_parameters(const DatasetConfig &cfg, std::size_t count, Rng &rng) {
    std::vector<std::vector<double>> out;
    out.reserve(count);
    const double width = cfg.param_hi - cfg.param_lo;
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back({cfg.param_lo + width * uniform01(rng)});
    }
    return out;
}

namespace {

enum StreamTag : std::uint64_t { kParamStream = 1, kGroundStream = 2, kShotStream = 3 };

std::string format_params(std::span<const double> p) {
    std::ostringstream os;
    os.precision(17);
    os << "(";
    for (std::size_t i = 0; i < p.size(); ++i) {
        os << (i ? ", " : "") << p[i];
    }
    os << ")";
    return os.str();
}

} // namespace

HybridDataset build_hybrid_dataset(const DatasetConfig &cfg) {
    cfg.validate();
    const HamiltonianFamily family(cfg);

    const std::size_t n_l = cfg.n_labeled();
    const std::size_t n_u = cfg.n - n_l;
    const std::size_t total = cfg.n + cfg.n_val + cfg.n_test;

    Rng param_rng = make_rng(cfg.seed, {kParamStream});
    const auto params = sample_parameters(cfg, total, param_rng);

    std::vector<DataPoint> points(total);
    parallel_for(total, [&](std::size_t i) {
        DataPoint &pt = points[i];
        pt.id = i;
        pt.params = params[i];
        if (i < n_l) {
            pt.split = Split::L;
        } else if (i < n_l + n_u) {
            pt.split = Split::U;
        } else if (i < cfg.n + cfg.n_val) {
            pt.split = Split::val;
        } else {
            pt.split = Split::test;
        }

        GroundState gs;
        try {
            gs = ground_state(family(pt.params), derive_seed(cfg.seed, {kGroundStream, i}));
        } catch (const NumericalFailure &e) {
            throw NumericalFailure("ground state failed at parameters " + format_params(pt.params) + ": " +
                                   e.what());
        }

        const bool high_budget = pt.split == Split::L || pt.split == Split::val;
        Rng shots = make_rng(cfg.seed, {kShotStream, i});
        pt.record = sample_measurements(gs.state, high_budget ? cfg.m_l : cfg.m_u, shots);
        pt.visible_m = pt.split == Split::L ? cfg.m_l : cfg.m_u;

        switch (pt.split) {
        case Split::L:
        case Split::val:
            pt.labels = cfg.pure_state_labels ? pure_state_label_vector(pt.record, cfg.task)
                                              : label_vector(pt.record, cfg.task);
            break;
        case Split::test:
            pt.labels = exact_label_vector(gs.state, cfg.task);
            break;
        case Split::U:
            break;
        }
    });

    HybridDataset ds;
    ds.config = cfg;
    for (auto &pt : points) {
        switch (pt.split) {
        case Split::L:
            ds.L.push_back(std::move(pt));
            break;
        case Split::U:
            ds.U.push_back(std::move(pt));
            break;
        case Split::val:
            ds.val.push_back(std::move(pt));
            break;
        case Split::test:
            ds.mutable_test().push_back(std::move(pt));
            break;
        }
    }
    return ds;
}

DataPoint mask_subset(const DataPoint &pt, std::span<const std::size_t> indices) {
    if (indices.empty()) {
        throw InvalidArgument("mask_subset: index set must be nonempty");
    }
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= pt.visible_m || (k > 0 && indices[k] <= indices[k - 1])) {
            throw InvalidArgument("mask_subset: indices must be strictly increasing and within the visible record");
        }
    }
    DataPoint out;
    out.id = pt.id;
    out.split = pt.split;
    out.params = pt.params;
    out.record = pt.record.select(indices);
    out.visible_m = indices.size();
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

std::string pack_outcomes(const MeasurementRecord &rec, std::size_t snapshot) {
    static constexpr char kHex[] = "0123456789abcdef";
    const int n = rec.n_qubits();
    const int digits = (n + 3) / 4;
    std::string out(static_cast<std::size_t>(digits), '0');
    // Bit (n-1-q) of the value holds qubit q; digit 0 is the most significant.
    for (int d = 0; d < digits; ++d) {
        int nibble = 0;
        for (int b = 0; b < 4; ++b) {
            const int bit_pos = 4 * (digits - 1 - d) + (3 - b);
            const int q = n - 1 - bit_pos;
            nibble <<= 1;
            if (q >= 0 && q < n) {
                nibble |= rec.outcome(snapshot, q);
            }
        }
        out[static_cast<std::size_t>(d)] = kHex[nibble];
    }
    return out;
}

namespace {

std::vector<std::uint8_t> unpack_outcomes(const std::string &hex, int n) {
    const int digits = (n + 3) / 4;
    if (static_cast<int>(hex.size()) != digits) {
        throw InvalidArgument("outcome string '" + hex + "' should have " + std::to_string(digits) + " hex digits");
    }
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(n));
    for (int d = 0; d < digits; ++d) {
        const char c = hex[static_cast<std::size_t>(d)];
        int v;
        if (c >= '0' && c <= '9') {
            v = c - '0';
        } else if (c >= 'a' && c <= 'f') {
            v = c - 'a' + 10;
        } else {
            throw InvalidArgument(std::string("bad hex digit '") + c + "'");
        }
        for (int b = 0; b < 4; ++b) {
            const int bit_pos = 4 * (digits - 1 - d) + (3 - b);
            const int q = n - 1 - bit_pos;
            const int bit = (v >> (3 - b)) & 1;
            if (q < 0) {
                if (bit) {
                    throw InvalidArgument("outcome string '" + hex + "' sets padding bits");
                }
                continue;
            }
            bits[static_cast<std::size_t>(q)] = static_cast<std::uint8_t>(bit);
        }
    }
    return bits;
}

ordered_json header_json(const DatasetConfig &c) {
    ordered_json h;
    h["version"] = kDatasetVersion;
    h["system"] = to_string(c.system);
    h["N"] = c.n_qubits;
    h["n"] = c.n;
    h["r"] = c.r;
    h["m_l"] = c.m_l;
    h["m_u"] = c.m_u;
    h["n_val"] = c.n_val;
    h["task"] = to_string(c.task);
    h["seed"] = c.seed;
    h["n_test"] = c.n_test;
    h["param_range"] = {c.param_lo, c.param_hi};
    h["use_params_as_features"] = c.use_params_as_features;
    h["pure_state_labels"] = c.pure_state_labels;
    if (c.system == SystemKind::pauli_file) {
        h["pauli_file"] = c.pauli_file.string();
        h["pauli_file_drive"] = c.pauli_file_drive.string();
    }
    return h;
}

DatasetConfig config_from_header(const ordered_json &h) {
    if (!h.contains("version")) {
        throw InvalidArgument("header has no version field");
    }
    const int version = h.at("version").get<int>();
    if (version != kDatasetVersion) {
        throw VersionError("dataset version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kDatasetVersion) + ")");
    }
    DatasetConfig c;
    c.system = system_from_string(h.at("system").get<std::string>());
    c.n_qubits = h.at("N").get<int>();
    c.n = h.at("n").get<std::size_t>();
    c.r = h.at("r").get<double>();
    c.m_l = h.at("m_l").get<std::size_t>();
    c.m_u = h.at("m_u").get<std::size_t>();
    c.n_val = h.at("n_val").get<std::size_t>();
    c.task = task_from_string(h.at("task").get<std::string>());
    c.seed = h.at("seed").get<std::uint64_t>();
    c.n_test = h.value("n_test", std::size_t{0});
    if (h.contains("param_range")) {
        c.param_lo = h.at("param_range").at(0).get<double>();
        c.param_hi = h.at("param_range").at(1).get<double>();
    }
    c.use_params_as_features = h.value("use_params_as_features", true);
    c.pure_state_labels = h.value("pure_state_labels", true);
    c.pauli_file = h.value("pauli_file", std::string{});
    c.pauli_file_drive = h.value("pauli_file_drive", std::string{});
    return c;
}

ordered_json point_json(const DataPoint &pt) {
    ordered_json j;
    j["id"] = pt.id;
    j["split"] = to_string(pt.split);
    j["params"] = pt.params;
    const std::size_t m = pt.record.m();
    const int n = pt.record.n_qubits();
    j["m"] = m;
    ordered_json bases = ordered_json::array();
    ordered_json outcomes = ordered_json::array();
    std::string row(static_cast<std::size_t>(n), ' ');
    for (std::size_t s = 0; s < m; ++s) {
        for (int q = 0; q < n; ++q) {
            row[static_cast<std::size_t>(q)] = axis_char(pt.record.basis(s, q));
        }
        bases.push_back(row);
        outcomes.push_back(pack_outcomes(pt.record, s));
    }
    j["bases"] = std::move(bases);
    j["outcomes"] = std::move(outcomes);
    j["labels"] = pt.labels ? ordered_json(*pt.labels) : ordered_json(nullptr);
    return j;
}

DataPoint point_from_json(const ordered_json &j, const DatasetConfig &cfg) {
    DataPoint pt;
    pt.id = j.at("id").get<std::uint64_t>();
    pt.split = split_from_string(j.at("split").get<std::string>());
    pt.params = j.at("params").get<std::vector<double>>();
    const auto m = j.at("m").get<std::size_t>();
    const auto &bases = j.at("bases");
    const auto &outcomes = j.at("outcomes");
    if (bases.size() != m || outcomes.size() != m) {
        throw InvalidArgument("bases/outcomes length does not match m = " + std::to_string(m));
    }
    const int n = cfg.n_qubits;
    pt.record = MeasurementRecord(n);
    std::vector<Axis> axes(static_cast<std::size_t>(n));
    for (std::size_t s = 0; s < m; ++s) {
        const auto row = bases[s].get<std::string>();
        if (static_cast<int>(row.size()) != n) {
            throw InvalidArgument("basis string '" + row + "' should have length " + std::to_string(n));
        }
        for (int q = 0; q < n; ++q) {
            axes[static_cast<std::size_t>(q)] = axis_from_char(row[static_cast<std::size_t>(q)]);
        }
        pt.record.add_snapshot(axes, unpack_outcomes(outcomes[s].get<std::string>(), n));
    }
    const auto &labels = j.at("labels");
    if (!labels.is_null()) {
        pt.labels = labels.get<std::vector<double>>();
        if (pt.labels->size() != static_cast<std::size_t>(n - 1)) {
            throw InvalidArgument("label vector should have N-1 entries");
        }
    }
    pt.visible_m = pt.split == Split::val ? std::min(cfg.m_u, m) : m;
    return pt;
}

} // namespace

void write_dataset(std::ostream &out, const HybridDataset &ds) {
    out << header_json(ds.config).dump() << '\n';
    auto emit = [&](const std::vector<DataPoint> &pts) {
        for (const auto &pt : pts) {
            out << point_json(pt).dump() << '\n';
        }
    };
    emit(ds.L);
    emit(ds.U);
    emit(ds.val);
    emit(ds.test());
}

void save_dataset(const HybridDataset &ds, const std::filesystem::path &path) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw InvalidArgument("cannot write " + tmp.string());
        }
        write_dataset(out, ds);
        if (!out) {
            throw InvalidArgument("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

HybridDataset read_dataset(std::istream &in, Access access, const std::string &source) {
    std::string line;
    std::size_t line_no = 0;
    HybridDataset ds;
    bool have_header = false;
    std::size_t test_seen = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception &e) {
            throw ParseError(source, line_no, std::string("invalid JSON: ") + e.what());
        }
        try {
            if (!have_header) {
                ds.config = config_from_header(j);
                have_header = true;
                continue;
            }
            const auto split = split_from_string(j.at("split").get<std::string>());
            if (split == Split::test) {
                ++test_seen;
                if (access == Access::training) {
                    continue;
                }
            }
            DataPoint pt = point_from_json(j, ds.config);
            switch (pt.split) {
            case Split::L:
                ds.L.push_back(std::move(pt));
                break;
            case Split::U:
                ds.U.push_back(std::move(pt));
                break;
            case Split::val:
                ds.val.push_back(std::move(pt));
                break;
            case Split::test:
                ds.mutable_test().push_back(std::move(pt));
                break;
            }
        } catch (const VersionError &) {
            throw;
        } catch (const nlohmann::json::exception &e) {
            throw ParseError(source, line_no, e.what());
        } catch (const InvalidArgument &e) {
            throw ParseError(source, line_no, e.what());
        }
    }
    if (!have_header) {
        throw ParseError(source, line_no, "missing header line");
    }
    const auto &c = ds.config;
    const std::size_t n_l = c.n_labeled();
    if (ds.L.size() != n_l || ds.U.size() != c.n - n_l || ds.val.size() != c.n_val || test_seen != c.n_test) {
        throw ParseError(source, line_no,
                         "point counts (L=" + std::to_string(ds.L.size()) + ", U=" + std::to_string(ds.U.size()) +
                             ", val=" + std::to_string(ds.val.size()) + ", test=" + std::to_string(test_seen) +
                             ") do not match the header; file truncated?");
    }
    if (access == Access::training) {
        ds.seal_for_training();
    }
    return ds;
}

HybridDataset load_dataset(const std::filesystem::path &path, Access access) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open dataset " + path.string());
    }
    return read_dataset(in, access, path.string());
}

} // namespace shadowforge
