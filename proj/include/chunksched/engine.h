/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#pragma once

#include "chunksched/schedule.h"
#include "chunksched/topology.h"
#include <iosfwd>
#include <optional>
#include <vector>

namespace chunksched {

/// Which ready stage a dimension serves next.
///   Fifo: earliest ready time, ties by chunk id.
///   Scf:  smallest resident chunk bytes, ties by chunk id.
enum class IntraDimPolicy { Fifo, Scf };

std::string to_string(IntraDimPolicy policy);
IntraDimPolicy parse_intra_dim_policy(const std::string& text);

/// How a stage's fixed delay (steps x step latency) is charged.
///   PerStage: every stage pays it while occupying the dimension.
///   PerPhase: only the first stage of each (dimension, phase) pays it;
///             later chunks stream behind it.
enum class FixedDelayCharging { PerStage, PerPhase };

std::string to_string(FixedDelayCharging charging);
FixedDelayCharging parse_fixed_delay_charging(const std::string& text);

struct EnginePolicy {
    IntraDimPolicy intra_dim = IntraDimPolicy::Fifo;
    /// Stages a dimension may run at once; concurrent stages split its
    /// bandwidth equally.
    int max_concurrency = 1;
    FixedDelayCharging fixed_delay = FixedDelayCharging::PerPhase;
};

/// One (chunk, dimension, phase) stage of the 2xD pipeline.
struct ChunkOp {
    ChunkId chunk_id = 1;
    DimIndex dim_index = 1;
    Phase phase = Phase::ReduceScatter;
    Bytes bytes_before = 0.0;
    Seconds fixed = 0.0;      ///< A_K share charged to this stage
    Seconds byte_time = 0.0;  ///< byte term at full (unshared) bandwidth

    bool operator==(const ChunkOp&) const = default;
};

/// Expands schedules into each chunk's ordered stage list (RS then AG).
[[nodiscard]] std::vector<std::vector<ChunkOp>> expand_ops(const Topology& topology,
                                                           const ScheduleList& schedules);

struct BusyInterval {
    Seconds start = 0.0;
    Seconds end = 0.0;

    bool operator==(const BusyInterval&) const = default;
};

/// Executed stage with its timing.
struct OpRecord {
    ChunkOp op;
    Seconds ready = 0.0;
    Seconds start = 0.0;
    Seconds end = 0.0;
    long long start_sequence = 0;

    bool operator==(const OpRecord&) const = default;
};

struct DimMetrics {
    Seconds busy = 0.0;
    /// Idle time while stages for this dimension are still pending (idle_K).
    Seconds idle = 0.0;
    /// Bytes injected per NPU (N_K).
    Bytes bytes = 0.0;
    Seconds fixed_total = 0.0;
    Seconds last_end = 0.0;
    std::vector<BusyInterval> timeline;

    bool operator==(const DimMetrics&) const = default;
};

struct RunMetrics {
    Seconds makespan = 0.0;
    std::vector<DimMetrics> dims;  ///< index 0 holds dim1
    std::vector<OpRecord> ops;     ///< in start order
    double weighted_utilization = 0.0;

    bool operator==(const RunMetrics&) const = default;
};

/// Raised on deadlock or when an enforced order does not match the schedules.
class SimulationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Deterministic discrete-event execution of the schedules. If
/// `enforced_order` is given, each dimension starts stages strictly in that
/// order regardless of `policy.intra_dim`.
[[nodiscard]] RunMetrics simulate(const Topology& topology, const ScheduleList& schedules,
                                  const EnginePolicy& policy = {},
                                  const std::optional<IntraDimOrder>& enforced_order = std::nullopt);

/// sum_k BW_k * busy_k / makespan over sum_k BW_k. Throws on zero makespan.
[[nodiscard]] double weighted_utilization(const RunMetrics& metrics, const Topology& topology);

/// Per-dimension busy fraction of consecutive windows [i*w, (i+1)*w); the
/// last window is clipped at the makespan.
[[nodiscard]] std::vector<std::vector<double>> activity_rate(const RunMetrics& metrics,
                                                             Seconds window);

/// One row per dimension plus a summary row.
void write_metrics_csv(std::ostream& out, const RunMetrics& metrics, const Topology& topology);
/// `window_start,dim1,...,dimD` rows.
void write_activity_csv(std::ostream& out, const std::vector<std::vector<double>>& rates,
                        Seconds window);

}  // namespace chunksched
