/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#include "chunksched/workload.h"
#include "chunksched/oracle.h"
#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

using namespace chunksched;

namespace {

std::string trim(std::string_view text) {
    const auto begin = text.find_first_not_of(" \t\r");
    if (begin == std::string_view::npos) {
        return {};
    }
    const auto end = text.find_last_not_of(" \t\r");
    return std::string(text.substr(begin, end - begin + 1));
}

std::string lower(std::string text) {
    std::transform(text.begin(), text.end(), text.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return text;
}

std::vector<std::string> split(std::string_view line, char separator) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(separator, start);
        fields.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return fields;
}

bool is_none(const std::string& field) {
    return field.empty() || lower(field) == "none" || field == "-";
}

// Parses a leading number and returns the (lower-cased) unit suffix.
std::pair<double, std::string> number_with_unit(const std::string& field) {
    double value = 0.0;
    const auto* begin = field.data();
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) {
        throw ParseError("expected a number, got '" + field + "'");
    }
    return {value, lower(trim(std::string_view(ptr, static_cast<std::size_t>(end - ptr))))};
}

Seconds parse_compute(const std::string& field, const WorkloadOptions& options) {
    if (is_none(field)) {
        return 0.0;
    }
    const auto [value, unit] = number_with_unit(field);
    Seconds seconds = 0.0;
    if (unit.empty() || unit == "us") {
        seconds = value * 1e-6;
    } else if (unit == "ms") {
        seconds = value * 1e-3;
    } else if (unit == "gflop") {
        seconds = roofline_seconds(value * 1e9, options.roofline_peak_flops);
    } else if (unit == "tflop") {
        seconds = roofline_seconds(value * 1e12, options.roofline_peak_flops);
    } else {
        throw ParseError("unknown compute unit '" + unit + "' in '" + field + "'");
    }
    if (seconds < 0.0) {
        throw ValidationError("compute time must be non-negative, got '" + field + "'");
    }
    return seconds;
}

Bytes parse_bytes(const std::string& field) {
    const auto [value, unit] = number_with_unit(field);
    double scale = 1.0;
    if (unit.empty() || unit == "b") {
        scale = 1.0;
    } else if (unit == "kb") {
        scale = 1e3;
    } else if (unit == "mb") {
        scale = kMB;
    } else if (unit == "gb") {
        scale = kGB;
    } else {
        throw ParseError("unknown size unit '" + unit + "' in '" + field + "'");
    }
    return value * scale;
}

CommKind parse_comm_kind(const std::string& field) {
    const auto text = lower(field);
    if (text == "allreduce" || text == "all_reduce" || text == "ar") {
        return CommKind::AllReduce;
    }
    if (text == "reducescatter" || text == "reduce_scatter" || text == "rs") {
        return CommKind::ReduceScatter;
    }
    if (text == "allgather" || text == "all_gather" || text == "ag") {
        return CommKind::AllGather;
    }
    if (text == "alltoall" || text == "all_to_all" || text == "a2a") {
        return CommKind::AllToAll;
    }
    throw ParseError("unknown collective kind '" + field + "'");
}

std::pair<DimIndex, DimIndex> parse_dims(const std::string& field) {
    const auto text = lower(field);
    if (text == "all") {
        return {1, 0};
    }
    if (text == "last") {
        return {0, 0};
    }
    if (text == "all-but-last") {
        return {1, -1};
    }
    const auto parts = split(field, '-');
    const auto to_int = [&](const std::string& part) {
        int value = 0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
        if (ec != std::errc() || ptr != part.data() + part.size()) {
            throw ParseError("bad dimension range '" + field + "'");
        }
        return value;
    };
    if (parts.size() == 1) {
        const auto k = to_int(parts[0]);
        return {k, k};
    }
    if (parts.size() == 2) {
        return {to_int(parts[0]), to_int(parts[1])};
    }
    throw ParseError("bad dimension range '" + field + "'");
}

std::optional<CommSpec> parse_comm(const std::string& kind, const std::string& bytes,
                                   const std::string& dims) {
    if (is_none(kind)) {
        return std::nullopt;
    }
    CommSpec comm;
    comm.kind = parse_comm_kind(kind);
    comm.bytes = is_none(bytes) ? 0.0 : parse_bytes(bytes);
    if (comm.bytes < 0.0) {
        throw ValidationError("collective size must be non-negative");
    }
    if (is_none(dims)) {
        throw ParseError("collective '" + kind + "' needs a dimension range");
    }
    std::tie(comm.first, comm.last) = parse_dims(dims);
    if (comm.first < 0 || (comm.first == 0 && comm.last != 0) ||
        (comm.last > 0 && comm.last < comm.first)) {
        throw ValidationError("bad dimension range '" + dims + "'");
    }
    return comm;
}

Parallelism parse_parallelism(const std::string& text) {
    const auto value = lower(text);
    if (value == "data") {
        return Parallelism::Data;
    }
    if (value == "model") {
        return Parallelism::Model;
    }
    if (value == "hybrid") {
        return Parallelism::Hybrid;
    }
    throw ParseError("unknown parallelism '" + text + "'");
}

// first 0 stands for the last dimension; last 0 for the last dimension and a
// negative last counts back from it.
std::pair<DimIndex, DimIndex> resolve_range(const CommSpec& comm, int dims_count) {
    const auto first = comm.first == 0 ? dims_count : comm.first;
    const auto last = comm.last <= 0 ? dims_count + comm.last : comm.last;
    return {first, last};
}

CommClass classify_comm(const Workload& workload, const CommSpec& comm, bool forward,
                        int dims_count) {
    if (forward || comm.kind == CommKind::AllToAll) {
        return CommClass::ModelParallel;
    }
    switch (workload.parallelism) {
    case Parallelism::Data:
        return CommClass::DataParallel;
    case Parallelism::Model:
        return CommClass::ModelParallel;
    case Parallelism::Hybrid:
        // Model-parallel groups occupy the leading dimensions, data-parallel
        // replicas the trailing ones.
        return resolve_range(comm, dims_count).second == dims_count ? CommClass::DataParallel
                                                             : CommClass::ModelParallel;
    }
    return CommClass::DataParallel;
}

CollectiveKind to_collective(CommKind kind) {
    switch (kind) {
    case CommKind::ReduceScatter:
        return CollectiveKind::ReduceScatter;
    case CommKind::AllGather:
        return CollectiveKind::AllGather;
    default:
        return CollectiveKind::AllReduce;
    }
}

}  // namespace

std::string chunksched::to_string(CommKind kind) {
    switch (kind) {
    case CommKind::ReduceScatter:
        return "reduce_scatter";
    case CommKind::AllGather:
        return "all_gather";
    case CommKind::AllReduce:
        return "all_reduce";
    case CommKind::AllToAll:
        return "all_to_all";
    }
    return "unknown";
}

std::string chunksched::to_string(Parallelism parallelism) {
    switch (parallelism) {
    case Parallelism::Data:
        return "data";
    case Parallelism::Model:
        return "model";
    case Parallelism::Hybrid:
        return "hybrid";
    }
    return "unknown";
}

Seconds chunksched::roofline_seconds(double flops, double peak_flops) {
    if (!(peak_flops > 0.0)) {
        throw ValidationError("roofline peak must be positive");
    }
    return flops / peak_flops;
}

Workload chunksched::load_workload(std::string_view text, const WorkloadOptions& options) {
    Workload workload;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_number = 0;
    while (std::getline(in, raw)) {
        ++line_number;
        auto line = raw.substr(0, raw.find('#'));
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto where = "line " + std::to_string(line_number);
        if (line.front() == '@') {
            const auto space = line.find_first_of(" \t");
            const auto key = lower(line.substr(1, space == std::string::npos ? space : space - 1));
            const auto value = space == std::string::npos ? std::string() : trim(line.substr(space));
            try {
                if (key == "name") {
                    workload.name = value;
                } else if (key == "parallelism") {
                    workload.parallelism = parse_parallelism(value);
                } else {
                    throw ParseError("unknown directive '@" + key + "'");
                }
            } catch (const ParseError& e) {
                throw ParseError(where + ": " + e.what());
            }
            continue;
        }
        const auto fields = split(line, ',');
        if (fields.size() == 11 && lower(fields[0]) == "name") {
            continue;  // header row
        }
        if (fields.size() != 11) {
            throw ParseError(where + ": expected 11 fields, got " + std::to_string(fields.size()));
        }
        LayerSpec layer;
        layer.name = fields[0];
        const auto context = where + " (layer '" + layer.name + "')";
        try {
            if (layer.name.empty()) {
                throw ParseError("layer name is empty");
            }
            layer.fwd_compute = parse_compute(fields[1], options);
            layer.bwd_ig_compute = parse_compute(fields[2], options);
            layer.bwd_wg_compute = parse_compute(fields[3], options);
            layer.fwd_comm = parse_comm(fields[4], fields[5], fields[6]);
            layer.bwd_comm = parse_comm(fields[7], fields[8], fields[9]);
            const auto tag = lower(fields[10]);
            if (tag == "blocking" || is_none(tag)) {
                layer.overlap = OverlapTag::Blocking;
            } else if (tag == "overlapped") {
                layer.overlap = OverlapTag::Overlapped;
            } else {
                throw ParseError("unknown overlap tag '" + fields[10] + "'");
            }
        } catch (const ParseError& e) {
            throw ParseError(context + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(context + ": " + e.what());
        }
        workload.layers.push_back(std::move(layer));
    }
    if (workload.layers.empty()) {
        throw ParseError("workload trace has no layers");
    }
    if (options.dims_count) {
        validate_workload(workload, *options.dims_count);
    }
    return workload;
}

Workload chunksched::load_workload_file(const std::string& path, const WorkloadOptions& options) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open workload trace '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto workload = load_workload(buffer.str(), options);
    if (workload.name.empty()) {
        workload.name = path;
    }
    return workload;
}

void chunksched::validate_workload(const Workload& workload, int dims_count) {
    if (workload.layers.empty()) {
        throw ValidationError("workload has no layers");
    }
    for (const auto& layer : workload.layers) {
        for (const auto* comm : {&layer.fwd_comm, &layer.bwd_comm}) {
            if (!comm->has_value()) {
                continue;
            }
            const auto [first, last] = resolve_range(**comm, dims_count);
            if (first < 1 || last > dims_count || first > last) {
                throw ValidationError("layer '" + layer.name + "': dimension range " +
                                      std::to_string(first) + "-" + std::to_string(last) +
                                      " does not fit " + std::to_string(dims_count) +
                                      " dimensions");
            }
            if (first != 1 && last != dims_count) {
                throw ValidationError("layer '" + layer.name +
                                      "': dimension range must be a prefix or a suffix");
            }
        }
    }
}

Seconds chunksched::collective_time(CommKind kind, Bytes bytes, const Topology& topology,
                                    SchedulingMode mode, const SchedulerConfig& config,
                                    const EnginePolicy& engine_policy, ScheduleCache* cache) {
    if (!(bytes > 0.0)) {
        return 0.0;
    }
    if (kind == CommKind::AllToAll) {
        const auto npus = static_cast<double>(topology.npus_count());
        Seconds latency = 0.0;
        for (const auto& dim : topology.dims()) {
            latency = std::max(latency, dim.step_latency());
        }
        return latency + (npus - 1.0) / npus * bytes / topology.total_bw();
    }
    if (mode == SchedulingMode::Ideal) {
        return ideal_latency(bytes, topology);
    }
    const auto collective = to_collective(kind);
    ScheduleList schedules;
    if (cache != nullptr) {
        schedules = cache->get(mode, collective, bytes, config, topology).schedules;
    } else if (mode == SchedulingMode::Baseline) {
        schedules = baseline_schedule(collective, topology, bytes, config.chunks_per_collective);
    } else {
        schedules = greedy_schedule(collective, bytes, config, topology);
    }
    const EnginePolicy policy{policy_for(mode), engine_policy.max_concurrency,
                              engine_policy.fixed_delay};
    return simulate(topology, schedules, policy).makespan;
}

IterationReport chunksched::run_iteration(const Workload& workload, const Topology& topology,
                                          const SchedulerConfig& config,
                                          const EnginePolicy& engine_policy, SchedulingMode mode,
                                          ScheduleCache* cache) {
    validate_workload(workload, topology.dims_count());
    validate(config);
    const auto dims_count = topology.dims_count();

    IterationReport report;
    Seconds now = 0.0;
    Seconds network_free = 0.0;
    // Overlapped collectives still in flight: (end time, record index).
    std::vector<std::pair<Seconds, std::size_t>> in_flight;

    const auto wait_until = [&](Seconds target, std::size_t record) {
        if (target > now) {
            const auto stall = target - now;
            auto& entry = report.collectives[record];
            entry.exposed += stall;
            (entry.comm_class == CommClass::DataParallel ? report.exposed_dp_comm
                                                         : report.exposed_mp_comm) += stall;
            now = target;
        }
    };
    const auto issue = [&](const LayerSpec& layer, const CommSpec& comm, bool forward) {
        CollectiveRecord record;
        record.layer = layer.name;
        record.forward = forward;
        record.kind = comm.kind;
        record.bytes = comm.bytes;
        std::tie(record.first, record.last) = resolve_range(comm, dims_count);
        record.comm_class = classify_comm(workload, comm, forward, dims_count);
        const auto group = topology.sub_topology(record.first, record.last);
        record.duration =
            collective_time(comm.kind, comm.bytes, group, mode, config, engine_policy, cache);
        report.collectives.push_back(record);
        const auto index = report.collectives.size() - 1;
        const auto start = std::max(now, network_free);
        const auto end = start + record.duration;
        network_free = end;
        if (layer.overlap == OverlapTag::Blocking) {
            wait_until(end, index);
        } else {
            in_flight.emplace_back(end, index);
        }
    };
    const auto drain = [&]() {
        std::sort(in_flight.begin(), in_flight.end());
        for (const auto& [end, index] : in_flight) {
            wait_until(end, index);
        }
        in_flight.clear();
    };

    for (const auto& layer : workload.layers) {
        now += layer.fwd_compute;
        report.fwd_compute += layer.fwd_compute;
        if (layer.fwd_comm) {
            issue(layer, *layer.fwd_comm, true);
        }
    }
    drain();
    for (auto it = workload.layers.rbegin(); it != workload.layers.rend(); ++it) {
        const auto compute = it->bwd_ig_compute + it->bwd_wg_compute;
        now += compute;
        report.bwd_compute += compute;
        if (it->bwd_comm) {
            issue(*it, *it->bwd_comm, false);
        }
    }
    drain();
    report.total = now;
    return report;
}

void chunksched::write_iteration_csv_header(std::ostream& out) {
    out << "workload,topology,mode,fwd_compute_s,bwd_compute_s,exposed_dp_comm_s,"
           "exposed_mp_comm_s,total_s\n";
}

void chunksched::write_iteration_csv_row(std::ostream& out, const std::string& workload,
                                         const std::string& topology, SchedulingMode mode,
                                         const IterationReport& report) {
    out << workload << ',' << topology << ',' << to_string(mode) << ',' << report.fwd_compute << ','
        << report.bwd_compute << ',' << report.exposed_dp_comm << ',' << report.exposed_mp_comm
        << ',' << report.total << '\n';
}
