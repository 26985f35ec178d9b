/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

// Experiment driver: collective sweeps, chunk-count sensitivity, training
// iterations, exhaustive oracle comparisons and provisioning reports. Every
// output is CSV preceded by a "# fingerprint=..." comment line.

#include "chunksched/oracle.h"
#include "chunksched/provisioning.h"
#include "chunksched/workload.h"

#include "CLI11.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

using namespace chunksched;

namespace {

constexpr double kMB = 1e6;

struct Common {
    std::vector<std::string> topologies;
    std::vector<std::string> modes;
    std::string kind = "allreduce";
    std::vector<double> sizes_mb;
    std::vector<int> cpcs;
    std::string policy;  // empty: each mode's own policy
    int concurrency = 1;
    std::string fixed_delay = "per-phase";
    double threshold_divisor = 16.0;
    int jobs = 0;
    std::string out = "-";
};

/// Output file or stdout.
class Sink {
  public:
    explicit Sink(const std::string& path) {
        if (path != "-") {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) {
                throw std::runtime_error("cannot open '" + path + "' for writing");
            }
        }
    }
    std::ostream& stream() {
        return file_ ? *file_ : std::cout;
    }

  private:
    std::unique_ptr<std::ofstream> file_;
};

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (const unsigned char c : text) {
        hash = (hash ^ c) * 1099511628211ULL;
    }
    return hash;
}

/// Canonical config text plus the topologies' serialized form, so a file
/// topology that changes on disk changes the fingerprint.
void write_fingerprint(std::ostream& out, const std::string& command, const std::string& config,
                       const std::vector<Topology>& topologies) {
    std::string material = command + "|" + config;
    for (const auto& t : topologies) {
        material += "|" + serialize_topology(t);
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(material)));
    out << "# fingerprint=" << hex << " command=" << command << ' ' << config << '\n';
}

template <typename T>
std::string join(const std::vector<T>& values, char sep = ',') {
    std::ostringstream out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out << (i ? std::string(1, sep) : "") << values[i];
    }
    return out.str();
}

std::vector<Topology> resolve_topologies(const std::vector<std::string>& names) {
    std::vector<std::string> expanded;
    for (const auto& name : names) {
        if (name == "next-gen") {
            const auto presets = next_gen_preset_names();
            expanded.insert(expanded.end(), presets.begin(), presets.end());
        } else {
            expanded.push_back(name);
        }
    }
    std::vector<Topology> topologies;
    for (const auto& name : expanded) {
        topologies.push_back(resolve_topology(name));
    }
    return topologies;
}

std::vector<SchedulingMode> resolve_modes(const std::vector<std::string>& names, bool allow_ideal) {
    std::vector<SchedulingMode> modes;
    for (const auto& name : names) {
        const auto mode = parse_scheduling_mode(name);
        if (mode == SchedulingMode::Ideal && !allow_ideal) {
            throw ValidationError("mode 'ideal' is not a chunk schedule here; see the ideal_s column");
        }
        modes.push_back(mode);
    }
    if (modes.empty()) {
        throw ValidationError("at least one mode is required");
    }
    return modes;
}

EnginePolicy engine_policy(const Common& c, SchedulingMode mode) {
    EnginePolicy policy;
    policy.intra_dim = c.policy.empty() ? policy_for(mode) : parse_intra_dim_policy(c.policy);
    policy.max_concurrency = c.concurrency;
    policy.fixed_delay = parse_fixed_delay_charging(c.fixed_delay);
    if (c.concurrency < 1) {
        throw ValidationError("--concurrency must be at least 1");
    }
    return policy;
}

SchedulerConfig scheduler_config(const Common& c, int cpc) {
    SchedulerConfig config;
    config.chunks_per_collective = cpc;
    config.threshold_divisor = c.threshold_divisor;
    validate(config);
    return config;
}

std::string common_config(const Common& c, bool with_sizes = true) {
    std::ostringstream out;
    out << "topology=" << join(c.topologies, ';') << " mode=" << join(c.modes, ';');
    if (with_sizes) {
        out << " kind=" << c.kind << " size_mb=" << join(c.sizes_mb, ';');
    }
    out << " cpc=" << join(c.cpcs, ';')
        << " policy=" << (c.policy.empty() ? "per-mode" : c.policy)
        << " concurrency=" << c.concurrency << " fixed_delay=" << c.fixed_delay
        << " threshold_divisor=" << c.threshold_divisor;
    return out.str();
}

/// Runs `count` independent tasks on up to `jobs` threads.
void parallel_for(int count, int jobs, const std::function<void(int)>& task) {
    if (jobs <= 0) {
        jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    }
    jobs = std::min(jobs, count);
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(jobs, 1)));
    const auto worker = [&](int w) {
        try {
            for (int i = next++; i < count; i = next++) {
                task(i);
            }
        } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
            next = count;
        }
    };
    std::vector<std::thread> threads;
    for (int w = 1; w < jobs; ++w) {
        threads.emplace_back(worker, w);
    }
    worker(0);
    for (auto& t : threads) {
        t.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

struct Point {
    std::size_t topology;
    SchedulingMode mode;
    double size_mb;
    int cpc;
};

struct PointResult {
    RunMetrics metrics;
    Seconds baseline = 0.0;
};

std::vector<PointResult> run_points(const Common& c, const std::vector<Topology>& topologies,
                                    const std::vector<Point>& points, CollectiveKind kind) {
    std::vector<PointResult> results(points.size());
    parallel_for(static_cast<int>(points.size()), c.jobs, [&](int i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        const auto& topology = topologies[p.topology];
        const auto config = scheduler_config(c, p.cpc);
        const Bytes bytes = p.size_mb * kMB;
        auto& r = results[static_cast<std::size_t>(i)];
        r.metrics = simulate(topology, schedules_for(p.mode, kind, bytes, config, topology),
                             engine_policy(c, p.mode));
        r.baseline = p.mode == SchedulingMode::Baseline
                         ? r.metrics.makespan
                         : simulate(topology,
                                    schedules_for(SchedulingMode::Baseline, kind, bytes, config, topology),
                                    engine_policy(c, SchedulingMode::Baseline))
                               .makespan;
    });
    return results;
}

void add_common(CLI::App* cmd, Common& c, bool with_sizes_and_cpc = true) {
    cmd->add_option("--topology", c.topologies,
                    "Preset name, topology JSON file, or 'next-gen' for the six next-generation presets")
        ->delimiter(',');
    cmd->add_option("--mode", c.modes, "baseline, greedy-fifo, greedy-scf, ideal")->delimiter(',');
    if (with_sizes_and_cpc) {
        cmd->add_option("--kind", c.kind, "allreduce, reduce_scatter or all_gather")
            ->capture_default_str();
        cmd->add_option("--size", c.sizes_mb, "Collective sizes in MB (10^6 bytes)")->delimiter(',');
        cmd->add_option("--cpc", c.cpcs, "Chunks per collective")->delimiter(',');
    }
    cmd->add_option("--policy", c.policy, "Override the intra-dimension policy: fifo or scf");
    cmd->add_option("--concurrency", c.concurrency, "Stages a dimension may serve at once")
        ->capture_default_str();
    cmd->add_option("--fixed-delay", c.fixed_delay, "per-phase or per-stage")->capture_default_str();
    cmd->add_option("--threshold-divisor", c.threshold_divisor)->capture_default_str();
    cmd->add_option("--jobs", c.jobs, "Worker threads (0: all cores)")->capture_default_str();
    cmd->add_option("--out", c.out, "Output CSV path, '-' for stdout")->capture_default_str();
}

void set_defaults(Common& c, std::vector<std::string> topologies, std::vector<std::string> modes,
                  std::vector<double> sizes, std::vector<int> cpcs) {
    if (c.topologies.empty()) {
        c.topologies = std::move(topologies);
    }
    if (c.modes.empty()) {
        c.modes = std::move(modes);
    }
    if (c.sizes_mb.empty()) {
        c.sizes_mb = std::move(sizes);
    }
    if (c.cpcs.empty()) {
        c.cpcs = std::move(cpcs);
    }
    for (const double s : c.sizes_mb) {
        if (!(s > 0)) {
            throw ValidationError("sizes must be positive");
        }
    }
}

void cmd_sweep(Common& c, const std::string& per_dim_path) {
    set_defaults(c, {"next-gen"}, {"baseline", "greedy-fifo", "greedy-scf"}, {100, 250, 500, 1000},
                 {64});
    const auto topologies = resolve_topologies(c.topologies);
    const auto modes = resolve_modes(c.modes, false);
    const auto kind = parse_collective_kind(c.kind);
    std::vector<Point> points;
    for (std::size_t t = 0; t < topologies.size(); ++t) {
        for (const double size : c.sizes_mb) {
            for (const int cpc : c.cpcs) {
                for (const auto mode : modes) {
                    points.push_back({t, mode, size, cpc});
                }
            }
        }
    }
    const auto results = run_points(c, topologies, points, kind);
    const auto config = common_config(c);

    Sink sink(c.out);
    auto& out = sink.stream();
    write_fingerprint(out, "sweep", config, topologies);
    out << "topology,kind,mode,size_mb,cpc,makespan_s,weighted_utilization,ideal_s,"
           "speedup_vs_baseline\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        const auto& t = topologies[p.topology];
        const auto& m = results[i].metrics;
        out << t.name() << ',' << to_string(kind) << ',' << to_string(p.mode) << ',' << p.size_mb
            << ',' << p.cpc << ',' << m.makespan << ',' << m.weighted_utilization << ','
            << ideal_latency(p.size_mb * kMB, t) << ',' << results[i].baseline / m.makespan << '\n';
    }
    if (!per_dim_path.empty()) {
        Sink dims(per_dim_path);
        auto& d = dims.stream();
        write_fingerprint(d, "sweep", config, topologies);
        d << "topology,mode,size_mb,cpc,dim,busy_s,idle_s,bytes,fixed_s,utilization\n";
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& p = points[i];
            const auto& m = results[i].metrics;
            for (std::size_t k = 0; k < m.dims.size(); ++k) {
                const auto& dm = m.dims[k];
                d << topologies[p.topology].name() << ',' << to_string(p.mode) << ',' << p.size_mb
                  << ',' << p.cpc << ',' << k + 1 << ',' << dm.busy << ',' << dm.idle << ','
                  << dm.bytes << ',' << dm.fixed_total << ',' << dm.busy / m.makespan << '\n';
            }
        }
    }
}

void cmd_sensitivity(Common& c) {
    set_defaults(c, {"3D-SW_SW_SW_hetero", "4D-Ring_FC_Ring_SW"}, {"baseline", "greedy-fifo", "greedy-scf"},
                 {100}, {4, 8, 16, 32, 64, 128, 256, 512});
    const auto topologies = resolve_topologies(c.topologies);
    const auto modes = resolve_modes(c.modes, false);
    const auto kind = parse_collective_kind(c.kind);
    std::vector<Point> points;
    for (std::size_t t = 0; t < topologies.size(); ++t) {
        for (const double size : c.sizes_mb) {
            for (const auto mode : modes) {
                for (const int cpc : c.cpcs) {
                    points.push_back({t, mode, size, cpc});
                }
            }
        }
    }
    const auto results = run_points(c, topologies, points, kind);
    Sink sink(c.out);
    auto& out = sink.stream();
    write_fingerprint(out, "sensitivity", common_config(c), topologies);
    out << "topology,mode,size_mb,cpc,makespan_s,weighted_utilization\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        out << topologies[p.topology].name() << ',' << to_string(p.mode) << ',' << p.size_mb << ','
            << p.cpc << ',' << results[i].metrics.makespan << ','
            << results[i].metrics.weighted_utilization << '\n';
    }
}

void cmd_workload(Common& c, const std::vector<std::string>& traces, double peak_tflops,
                  const std::string& collectives_path) {
    set_defaults(c, {"next-gen"}, {"baseline", "greedy-fifo", "greedy-scf", "ideal"}, {1}, {64});
    if (c.cpcs.size() != 1) {
        throw ValidationError("workload takes a single --cpc value");
    }
    const auto topologies = resolve_topologies(c.topologies);
    const auto modes = resolve_modes(c.modes, true);
    WorkloadOptions options;
    options.roofline_peak_flops = peak_tflops * 1e12;
    std::vector<Workload> workloads;
    for (const auto& path : traces) {
        workloads.push_back(load_workload_file(path, options));
    }
    struct Job {
        std::size_t workload;
        std::size_t topology;
        SchedulingMode mode;
    };
    std::vector<Job> jobs;
    for (std::size_t w = 0; w < workloads.size(); ++w) {
        for (std::size_t t = 0; t < topologies.size(); ++t) {
            for (const auto mode : modes) {
                jobs.push_back({w, t, mode});
            }
        }
    }
    const auto config = scheduler_config(c, c.cpcs.front());
    std::vector<IterationReport> reports(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), c.jobs, [&](int i) {
        const auto& j = jobs[static_cast<std::size_t>(i)];
        reports[static_cast<std::size_t>(i)] =
            run_iteration(workloads[j.workload], topologies[j.topology], config,
                          engine_policy(c, j.mode == SchedulingMode::Ideal ? SchedulingMode::Baseline : j.mode),
                          j.mode);
    });

    const auto cfg = common_config(c, false) + " traces=" + join(traces, ';') +
                     " peak_tflops=" + std::to_string(peak_tflops);
    Sink sink(c.out);
    auto& out = sink.stream();
    write_fingerprint(out, "workload", cfg, topologies);
    write_iteration_csv_header(out);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        write_iteration_csv_row(out, workloads[jobs[i].workload].name,
                                topologies[jobs[i].topology].name(), jobs[i].mode, reports[i]);
    }
    if (!collectives_path.empty()) {
        Sink sink_c(collectives_path);
        auto& d = sink_c.stream();
        write_fingerprint(d, "workload", cfg, topologies);
        d << "workload,topology,mode,layer,pass,kind,bytes,first_dim,last_dim,class,duration_s,"
             "exposed_s\n";
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            for (const auto& r : reports[i].collectives) {
                d << workloads[jobs[i].workload].name << ',' << topologies[jobs[i].topology].name()
                  << ',' << to_string(jobs[i].mode) << ',' << r.layer << ','
                  << (r.forward ? "fwd" : "bwd") << ',' << to_string(r.kind) << ',' << r.bytes << ','
                  << r.first << ',' << r.last << ','
                  << (r.comm_class == CommClass::DataParallel ? "dp" : "mp") << ',' << r.duration
                  << ',' << r.exposed << '\n';
            }
        }
    }
}

void cmd_oracle(Common& c, bool full_space, long long max_candidates,
                const std::string& candidates_path) {
    set_defaults(c, {}, {"greedy-scf"}, {256}, {4});
    if (c.topologies.size() != 1 || c.sizes_mb.size() != 1 || c.cpcs.size() != 1 ||
        c.modes.size() != 1) {
        throw ValidationError("oracle takes exactly one --topology, --mode, --size and --cpc");
    }
    const auto topologies = resolve_topologies(c.topologies);
    const auto& topology = topologies.front();
    const auto mode = resolve_modes(c.modes, false).front();
    const auto kind = parse_collective_kind(c.kind);
    const Bytes bytes = c.sizes_mb.front() * kMB;
    const auto config = scheduler_config(c, c.cpcs.front());
    const auto policy = engine_policy(c, mode);

    const auto baseline =
        simulate(topology, schedules_for(SchedulingMode::Baseline, kind, bytes, config, topology), policy);
    const auto greedy =
        simulate(topology, greedy_schedule(kind, bytes, config, topology), policy);

    OracleOptions options;
    options.kind = kind;
    options.total_bytes = bytes;
    options.chunks = config.chunks_per_collective;
    options.policy = policy;
    options.full_space = full_space;
    options.max_candidates = max_candidates;
    std::vector<OracleCandidate> candidates;
    const auto best = exhaustive_best(topology, options, [&](const OracleCandidate& candidate) {
        if (!candidates_path.empty()) {
            candidates.push_back(candidate);
        }
    });

    const auto cfg = common_config(c) + " full_space=" + (full_space ? "1" : "0");
    Sink sink(c.out);
    auto& out = sink.stream();
    write_fingerprint(out, "oracle", cfg, topologies);
    out << "topology,kind,size_mb,cpc,policy,space,baseline_s,greedy_s,optimal_s,optimal_schedule\n";
    out << topology.name() << ',' << to_string(kind) << ',' << c.sizes_mb.front() << ','
        << config.chunks_per_collective << ',' << to_string(policy.intra_dim) << ','
        << best.space_size << ',' << baseline.makespan << ',' << greedy.makespan << ','
        << best.best_makespan << ',' << encode_schedules(best.best_schedules) << '\n';
    if (!candidates_path.empty()) {
        Sink sink_c(candidates_path);
        auto& d = sink_c.stream();
        write_fingerprint(d, "oracle", cfg, topologies);
        d << "index,schedule,makespan_s\n";
        for (const auto& candidate : candidates) {
            d << candidate.index << ',' << candidate.encoding << ',' << candidate.makespan << '\n';
        }
    }
}

void cmd_provision(Common& c, double tolerance) {
    set_defaults(c, {"current-2D"}, {"baseline"}, {1}, {1});
    const auto topologies = resolve_topologies(c.topologies);
    Sink sink(c.out);
    auto& out = sink.stream();
    write_fingerprint(out, "provision",
                      "topology=" + join(c.topologies, ';') + " tolerance=" + std::to_string(tolerance),
                      topologies);
    for (const auto& topology : topologies) {
        std::ostringstream body;
        write_provisioning_csv(body, topology, classify_all(topology, tolerance));
        std::istringstream lines(body.str());
        std::string line;
        bool header = true;
        while (std::getline(lines, line)) {
            if (header) {
                if (&topology == &topologies.front()) {
                    out << "topology," << line << '\n';
                }
                header = false;
                continue;
            }
            out << topology.name() << ',' << line << '\n';
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chunk schedule simulator for multi-dimensional training networks"};
    app.require_subcommand(1);

    Common sweep;
    std::string per_dim;
    auto* sweep_cmd = app.add_subcommand("sweep", "Makespan and utilization over topologies, modes and sizes");
    add_common(sweep_cmd, sweep);
    sweep_cmd->add_option("--per-dim", per_dim, "Also write per-dimension rows to this CSV");

    Common sensitivity;
    auto* sensitivity_cmd = app.add_subcommand("sensitivity", "Utilization versus chunks per collective");
    add_common(sensitivity_cmd, sensitivity);

    Common workload;
    std::vector<std::string> traces;
    double peak_tflops = 312.0;
    std::string collectives;
    auto* workload_cmd = app.add_subcommand("workload", "One training iteration per trace, topology and mode");
    add_common(workload_cmd, workload);
    workload_cmd->add_option("--trace", traces, "Workload trace file(s)")->required()->delimiter(',');
    workload_cmd->add_option("--peak-tflops", peak_tflops, "Roofline peak for gflop/tflop compute fields")
        ->capture_default_str();
    workload_cmd->add_option("--collectives", collectives, "Also write per-collective rows to this CSV");

    Common oracle;
    bool full_space = false;
    long long max_candidates = 1'000'000;
    std::string candidates;
    auto* oracle_cmd = app.add_subcommand("oracle", "Exhaustive schedule search on a small instance");
    add_common(oracle_cmd, oracle);
    oracle_cmd->add_flag("--full-space", full_space, "Enumerate RS and AG orders independently");
    oracle_cmd->add_option("--max-candidates", max_candidates)->capture_default_str();
    oracle_cmd->add_option("--candidates", candidates, "Write every candidate's makespan to this CSV");

    Common provision;
    double tolerance = kDefaultProvisioningTolerance;
    auto* provision_cmd = app.add_subcommand("provision", "Bandwidth provisioning verdicts and balanced recommendation");
    provision_cmd->add_option("--topology", provision.topologies, "Preset name, topology JSON file, or 'next-gen'")
        ->delimiter(',');
    provision_cmd->add_option("--tolerance", tolerance, "Relative tolerance for just-enough")->capture_default_str();
    provision_cmd->add_option("--out", provision.out, "Output CSV path, '-' for stdout")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep_cmd->parsed()) {
            cmd_sweep(sweep, per_dim);
        } else if (sensitivity_cmd->parsed()) {
            cmd_sensitivity(sensitivity);
        } else if (workload_cmd->parsed()) {
            cmd_workload(workload, traces, peak_tflops, collectives);
        } else if (oracle_cmd->parsed()) {
            cmd_oracle(oracle, full_space, max_candidates, candidates);
        } else if (provision_cmd->parsed()) {
            cmd_provision(provision, tolerance);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
