/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#pragma once

#include "chunksched/scheduler.h"
#include <iosfwd>
#include <optional>
#include <string_view>

namespace chunksched {

enum class CommKind { ReduceScatter, AllGather, AllReduce, AllToAll };
enum class OverlapTag { Blocking, Overlapped };
enum class Parallelism { Data, Model, Hybrid };

std::string to_string(CommKind kind);
std::string to_string(Parallelism parallelism);

/// A collective issued by a layer over dimensions first..last, resolved per
/// topology: `first == 0` is the last dimension, `last == 0` runs through the
/// last dimension and `last < 0` stops that many dimensions short of it.
struct CommSpec {
    CommKind kind = CommKind::AllReduce;
    Bytes bytes = 0.0;
    DimIndex first = 1;
    DimIndex last = 0;
};

struct LayerSpec {
    std::string name;
    Seconds fwd_compute = 0.0;
    Seconds bwd_ig_compute = 0.0;
    Seconds bwd_wg_compute = 0.0;
    std::optional<CommSpec> fwd_comm;
    std::optional<CommSpec> bwd_comm;
    OverlapTag overlap = OverlapTag::Blocking;
};

struct Workload {
    std::string name;
    Parallelism parallelism = Parallelism::Data;
    std::vector<LayerSpec> layers;
};

struct WorkloadOptions {
    /// Peak FLOP/s used for compute fields given as "<n>gflop".
    double roofline_peak_flops = 312e12;
    /// When set, dimension ranges are checked against this many dimensions.
    std::optional<int> dims_count;
};

/// seconds = flops / peak.
[[nodiscard]] Seconds roofline_seconds(double flops, double peak_flops);

/// Line-oriented trace, one layer per line:
///   name, fwd_us, bwd_ig_us, bwd_wg_us, fwd_comm_kind, fwd_comm_bytes,
///   fwd_dims, bwd_comm_kind, bwd_comm_bytes, bwd_dims, overlap_tag
/// Dimension ranges are `k`, `a-b`, `all`, `last` or `all-but-last`.
/// `none` marks absent fields; `#` starts a comment; `@name X` and
/// `@parallelism data|model|hybrid` are directives.
[[nodiscard]] Workload load_workload(std::string_view text, const WorkloadOptions& options = {});
[[nodiscard]] Workload load_workload_file(const std::string& path,
                                          const WorkloadOptions& options = {});

/// Throws ValidationError if a range does not fit `dims_count` or is neither
/// a prefix nor a suffix.
void validate_workload(const Workload& workload, int dims_count);

enum class CommClass { DataParallel, ModelParallel };

struct CollectiveRecord {
    std::string layer;
    bool forward = true;
    CommKind kind = CommKind::AllReduce;
    Bytes bytes = 0.0;
    DimIndex first = 1;
    DimIndex last = 1;
    CommClass comm_class = CommClass::DataParallel;
    Seconds duration = 0.0;
    Seconds exposed = 0.0;
};

struct IterationReport {
    Seconds fwd_compute = 0.0;
    Seconds bwd_compute = 0.0;
    Seconds exposed_dp_comm = 0.0;
    Seconds exposed_mp_comm = 0.0;
    Seconds total = 0.0;
    std::vector<CollectiveRecord> collectives;
};

/// Duration of one collective over `topology` (already restricted to the
/// collective's dimensions). All-to-All is a single transfer of
/// ((p-1)/p) x bytes over the summed bandwidth plus the largest step latency,
/// the same in every mode.
[[nodiscard]] Seconds collective_time(CommKind kind, Bytes bytes, const Topology& topology,
                                      SchedulingMode mode, const SchedulerConfig& config,
                                      const EnginePolicy& engine_policy,
                                      ScheduleCache* cache = nullptr);

/// One training iteration: forward pass in layer order, backward pass in
/// reverse. Blocking collectives stall compute; overlapped ones run alongside
/// later compute and must finish by the end of their pass. Collectives share
/// the network one at a time.
[[nodiscard]] IterationReport run_iteration(const Workload& workload, const Topology& topology,
                                            const SchedulerConfig& config,
                                            const EnginePolicy& engine_policy, SchedulingMode mode,
                                            ScheduleCache* cache = nullptr);

void write_iteration_csv_header(std::ostream& out);
void write_iteration_csv_row(std::ostream& out, const std::string& workload,
                             const std::string& topology, SchedulingMode mode,
                             const IterationReport& report);

}  // namespace chunksched
