/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#include "chunksched/topology.h"
#include <algorithm>
#include <array>
#include <fstream>
#include <json.hpp>
#include <sstream>

using namespace chunksched;
using json = nlohmann::json;

namespace {

bool is_power_of_two(int value) {
    return value > 0 && (value & (value - 1)) == 0;
}

std::string dim_label(const NetworkDim& dim) {
    return "dim" + std::to_string(dim.index);
}

// Translates a byte offset reported by the JSON parser into "line N, column M".
std::string describe_offset(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i + 1 < offset; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    std::ostringstream out;
    out << "line " << line << ", column " << column;
    return out.str();
}

struct Preset {
    const char* name;
    std::vector<NetworkDim> dims;
};

NetworkDim make_dim(int size, DimKind kind, double gbps, int links, double ns) {
    NetworkDim dim;
    dim.size = size;
    dim.kind = kind;
    dim.bw_per_link_gbps = gbps;
    dim.links_per_npu = links;
    dim.step_latency_ns = ns;
    return dim;
}

const std::vector<Preset>& presets() {
    using K = DimKind;
    static const std::vector<Preset> table = {
        {"2D-SW_SW", {make_dim(16, K::Switch, 200, 6, 700), make_dim(64, K::Switch, 800, 1, 1700)}},
        {"3D-SW_SW_SW_homo",
         {make_dim(16, K::Switch, 200, 4, 700), make_dim(8, K::Switch, 200, 4, 700),
          make_dim(8, K::Switch, 800, 1, 1700)}},
        {"3D-SW_SW_SW_hetero",
         {make_dim(16, K::Switch, 200, 8, 700), make_dim(8, K::Switch, 200, 4, 700),
          make_dim(8, K::Switch, 400, 1, 1700)}},
        {"3D-FC_Ring_SW",
         {make_dim(8, K::FullyConnected, 200, 7, 700), make_dim(16, K::Ring, 200, 4, 700),
          make_dim(8, K::Switch, 400, 1, 1700)}},
        {"4D-Ring_SW_SW_SW",
         {make_dim(4, K::Ring, 1000, 2, 20), make_dim(4, K::Switch, 200, 8, 700),
          make_dim(8, K::Switch, 200, 4, 700), make_dim(8, K::Switch, 400, 1, 1700)}},
        {"4D-Ring_FC_Ring_SW",
         {make_dim(4, K::Ring, 1500, 2, 20), make_dim(8, K::FullyConnected, 200, 7, 700),
          make_dim(4, K::Ring, 200, 6, 700), make_dim(8, K::Switch, 800, 1, 1700)}},
        {"current-2D", {make_dim(16, K::Switch, 200, 6, 700), make_dim(64, K::Switch, 100, 1, 1700)}},
    };
    return table;
}

NetworkDim parse_dim_record(const json& record, std::size_t position) {
    const auto where = "dimension record " + std::to_string(position + 1);
    if (!record.is_object()) {
        throw ParseError(where + ": expected an object");
    }
    static constexpr std::array<const char*, 5> kFields = {
        "size", "kind", "bw_per_link_gbps", "links_per_npu", "step_latency_ns"};
    for (const auto* field : kFields) {
        if (!record.contains(field)) {
            throw ParseError(where + ": missing field '" + field + "'");
        }
    }
    NetworkDim dim;
    dim.index = static_cast<DimIndex>(position + 1);
    try {
        dim.size = record.at("size").get<int>();
        dim.kind = parse_dim_kind(record.at("kind").get<std::string>());
        dim.bw_per_link_gbps = record.at("bw_per_link_gbps").get<double>();
        dim.links_per_npu = record.at("links_per_npu").get<int>();
        dim.step_latency_ns = record.at("step_latency_ns").get<double>();
    } catch (const json::exception& e) {
        throw ParseError(where + ": " + e.what());
    }
    return dim;
}

}  // namespace

std::string chunksched::to_string(DimKind kind) {
    switch (kind) {
    case DimKind::Ring:
        return "ring";
    case DimKind::FullyConnected:
        return "fully_connected";
    case DimKind::Switch:
        return "switch";
    }
    return "unknown";
}

DimKind chunksched::parse_dim_kind(std::string_view text) {
    if (text == "ring") {
        return DimKind::Ring;
    }
    if (text == "fully_connected") {
        return DimKind::FullyConnected;
    }
    if (text == "switch") {
        return DimKind::Switch;
    }
    throw ParseError("unknown dimension kind '" + std::string(text) +
                     "' (expected ring, fully_connected or switch)");
}

BytesPerSec chunksched::aggregate_bw(const NetworkDim& dim) noexcept {
    return dim.bw_per_link() * dim.links_per_npu;
}

void chunksched::validate_dim(const NetworkDim& dim) {
    const auto label = dim_label(dim);
    if (dim.size < 2) {
        throw ValidationError(label + ": size must be >= 2, got " + std::to_string(dim.size));
    }
    if (!(dim.bw_per_link_gbps > 0.0)) {
        throw ValidationError(label + ": bw_per_link must be positive");
    }
    if (dim.links_per_npu < 1) {
        throw ValidationError(label + ": links_per_npu must be >= 1");
    }
    if (!(dim.step_latency_ns >= 0.0)) {
        throw ValidationError(label + ": step_latency must be >= 0");
    }
    if (dim.kind == DimKind::Switch && !is_power_of_two(dim.size)) {
        throw ValidationError(label + ": switch dimension size " + std::to_string(dim.size) +
                              " is not a power of two (halving-doubling requires it)");
    }
}

Topology::Topology(std::vector<NetworkDim> dims, std::string name)
    : dims_(std::move(dims)), name_(std::move(name)) {
    if (dims_.empty()) {
        throw ValidationError("topology needs at least one dimension");
    }
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        dims_[i].index = static_cast<DimIndex>(i + 1);
        validate_dim(dims_[i]);
    }
}

const NetworkDim& Topology::dim(DimIndex k) const {
    if (k < 1 || k > dims_count()) {
        throw std::out_of_range("dimension index " + std::to_string(k) + " outside 1.." +
                                std::to_string(dims_count()));
    }
    return dims_[static_cast<std::size_t>(k - 1)];
}

long long Topology::npus_count() const noexcept {
    long long count = 1;
    for (const auto& dim : dims_) {
        count *= dim.size;
    }
    return count;
}

BytesPerSec Topology::total_bw() const noexcept {
    BytesPerSec total = 0.0;
    for (const auto& dim : dims_) {
        total += aggregate_bw(dim);
    }
    return total;
}

Topology Topology::sub_topology(DimIndex first, DimIndex last) const {
    if (first < 1 || last > dims_count() || first > last) {
        throw std::out_of_range("invalid dimension range " + std::to_string(first) + ".." +
                                std::to_string(last));
    }
    std::vector<NetworkDim> dims(dims_.begin() + (first - 1), dims_.begin() + last);
    return Topology(std::move(dims), name_);
}

BytesPerSec chunksched::required_balanced_bw(const Topology& topology, DimIndex k) {
    if (k < 1 || k > topology.dims_count()) {
        throw std::out_of_range("dimension index " + std::to_string(k) + " outside 1.." +
                                std::to_string(topology.dims_count()));
    }
    double product = 1.0;
    for (DimIndex i = 1; i < k; ++i) {
        product *= topology.dim(i).size;
    }
    return aggregate_bw(topology.dim(1)) / product;
}

Topology chunksched::load_topology(std::string_view config_text) {
    json doc;
    try {
        doc = json::parse(config_text.begin(), config_text.end());
    } catch (const json::parse_error& e) {
        throw ParseError("topology config: parse error at " + describe_offset(config_text, e.byte) +
                         ": " + e.what());
    }
    std::string name;
    const json* records = &doc;
    if (doc.is_object()) {
        if (!doc.contains("dims")) {
            throw ParseError("topology config: missing 'dims' array");
        }
        records = &doc.at("dims");
        if (doc.contains("name") && doc.at("name").is_string()) {
            name = doc.at("name").get<std::string>();
        }
    }
    if (!records->is_array()) {
        throw ParseError("topology config: 'dims' must be an array");
    }
    std::vector<NetworkDim> dims;
    for (std::size_t i = 0; i < records->size(); ++i) {
        dims.push_back(parse_dim_record((*records)[i], i));
    }
    return Topology(std::move(dims), std::move(name));
}

Topology chunksched::load_topology_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open topology file '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto topology = load_topology(buffer.str());
    if (topology.name().empty()) {
        return Topology(topology.dims(), path);
    }
    return topology;
}

std::string chunksched::serialize_topology(const Topology& topology) {
    json doc;
    doc["name"] = topology.name();
    doc["dims"] = json::array();
    for (const auto& dim : topology.dims()) {
        doc["dims"].push_back({{"size", dim.size},
                               {"kind", to_string(dim.kind)},
                               {"bw_per_link_gbps", dim.bw_per_link_gbps},
                               {"links_per_npu", dim.links_per_npu},
                               {"step_latency_ns", dim.step_latency_ns}});
    }
    return doc.dump(2);
}

std::vector<std::string> chunksched::preset_names() {
    std::vector<std::string> names;
    for (const auto& preset : presets()) {
        names.emplace_back(preset.name);
    }
    return names;
}

std::vector<std::string> chunksched::next_gen_preset_names() {
    auto names = preset_names();
    names.erase(std::remove(names.begin(), names.end(), "current-2D"), names.end());
    return names;
}

bool chunksched::is_preset(std::string_view name) {
    return std::any_of(presets().begin(), presets().end(),
                       [&](const Preset& preset) { return name == preset.name; });
}

Topology chunksched::preset_topology(std::string_view name) {
    for (const auto& preset : presets()) {
        if (name == preset.name) {
            return Topology(preset.dims, preset.name);
        }
    }
    throw ValidationError("unknown topology preset '" + std::string(name) + "'");
}

Topology chunksched::resolve_topology(const std::string& name_or_path) {
    if (is_preset(name_or_path)) {
        return preset_topology(name_or_path);
    }
    return load_topology_file(name_or_path);
}
