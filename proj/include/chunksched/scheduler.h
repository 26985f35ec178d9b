/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#pragma once

#include "chunksched/engine.h"
#include "chunksched/latency_model.h"
#include <map>
#include <mutex>
#include <tuple>

namespace chunksched {

struct SchedulerConfig {
    int chunks_per_collective = 64;
    /// Threshold = predicted RS time of chunk_bytes / threshold_divisor on the
    /// least-loaded dimension.
    double threshold_divisor = 16.0;
};

void validate(const SchedulerConfig& config);

/// Predicted communication time accumulated per dimension while the chunks
/// of one collective are scheduled. Loads never decrease between resets.
class DimLoadTracker {
  public:
    /// Seeds every dimension with its fixed delay A_K for the phases `kind`
    /// will run (both phases for AllReduce).
    void reset(CollectiveKind kind, const Topology& topology);

    void add(DimIndex k, Seconds load);

    [[nodiscard]] const std::vector<Seconds>& loads() const noexcept {
        return loads_;
    }
    [[nodiscard]] Seconds load(DimIndex k) const {
        return loads_.at(static_cast<std::size_t>(k - 1));
    }
    /// Least-loaded dimension, lowest index on ties.
    [[nodiscard]] DimIndex min_dim() const;
    [[nodiscard]] Seconds spread() const;

  private:
    std::vector<Seconds> loads_;
};

/// Every chunk: RS over dim1..dimD, AG over dimD..dim1 (only the relevant
/// half for a standalone RS or AG). Chunks are equal slices of `total_bytes`.
[[nodiscard]] ScheduleList baseline_schedule(CollectiveKind kind, const Topology& topology,
                                             Bytes total_bytes = 1.0, int chunks = 1);

/// Greedy load-balancing threshold for the next chunk.
[[nodiscard]] Seconds threshold(const SchedulerConfig& config, const DimLoadTracker& tracker,
                                Bytes chunk_bytes, const Topology& topology);

/// Dynamic per-chunk scheduler. Holds the tracker so callers can inspect
/// the predicted loads after a pass.
class GreedyScheduler {
  public:
    GreedyScheduler(const Topology& topology, SchedulerConfig config);

    [[nodiscard]] ScheduleList schedule(CollectiveKind kind, Bytes total_bytes);

    [[nodiscard]] const DimLoadTracker& tracker() const noexcept {
        return tracker_;
    }
    /// Largest single per-stage load added during the last pass.
    [[nodiscard]] Seconds largest_increment() const noexcept {
        return largest_increment_;
    }

  private:
    DimOrder pick_order(Phase phase, Bytes chunk_bytes) const;
    void account(const DimOrder& order, Phase phase, Bytes& bytes);

    const Topology& topology_;
    SchedulerConfig config_;
    DimLoadTracker tracker_;
    Seconds largest_increment_ = 0.0;
};

[[nodiscard]] ScheduleList greedy_schedule(CollectiveKind kind, Bytes total_bytes,
                                           const SchedulerConfig& config,
                                           const Topology& topology);

/// Runs the engine once and records, per dimension, the order in which stages
/// begin. Enforcing this order on every NPU keeps them consistent.
[[nodiscard]] IntraDimOrder intra_dim_order(const ScheduleList& schedules,
                                            const Topology& topology, IntraDimPolicy policy);

enum class SchedulingMode { Baseline, GreedyFifo, GreedyScf, Ideal };

std::string to_string(SchedulingMode mode);
SchedulingMode parse_scheduling_mode(const std::string& text);
[[nodiscard]] IntraDimPolicy policy_for(SchedulingMode mode);

/// Baseline or greedy schedules for `mode`; throws for Ideal.
[[nodiscard]] ScheduleList schedules_for(SchedulingMode mode, CollectiveKind kind,
                                         Bytes total_bytes, const SchedulerConfig& config,
                                         const Topology& topology);

/// Computed schedules plus their intra-dimension order, memoized per
/// (kind, size, chunk count, threshold, policy, topology) so later training
/// iterations reuse them. Thread-safe.
class ScheduleCache {
  public:
    struct Entry {
        ScheduleList schedules;
        IntraDimOrder order;
    };

    const Entry& get(SchedulingMode mode, CollectiveKind kind, Bytes total_bytes,
                     const SchedulerConfig& config, const Topology& topology);

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::size_t hits() const;

  private:
    using Key = std::tuple<int, int, double, int, double, std::string>;
    mutable std::mutex mutex_;
    std::map<Key, Entry> entries_;
    std::size_t hits_ = 0;
};

}  // namespace chunksched
