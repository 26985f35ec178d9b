/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#include "chunksched/scheduler.h"
#include <algorithm>
#include <numeric>

using namespace chunksched;

void chunksched::validate(const SchedulerConfig& config) {
    if (config.chunks_per_collective < 1) {
        throw ValidationError("chunks per collective must be >= 1");
    }
    if (!(config.threshold_divisor > 0.0)) {
        throw ValidationError("threshold divisor must be positive");
    }
}

void DimLoadTracker::reset(CollectiveKind kind, const Topology& topology) {
    loads_.assign(static_cast<std::size_t>(topology.dims_count()), 0.0);
    for (const auto& dim : topology.dims()) {
        auto& load = loads_[static_cast<std::size_t>(dim.index - 1)];
        if (kind != CollectiveKind::AllGather) {
            load += fixed_delay(dim, Phase::ReduceScatter);
        }
        if (kind != CollectiveKind::ReduceScatter) {
            load += fixed_delay(dim, Phase::AllGather);
        }
    }
}

void DimLoadTracker::add(DimIndex k, Seconds load) {
    if (load < 0.0) {
        throw ValidationError("dimension load increments must be non-negative");
    }
    loads_.at(static_cast<std::size_t>(k - 1)) += load;
}

DimIndex DimLoadTracker::min_dim() const {
    const auto it = std::min_element(loads_.begin(), loads_.end());
    return static_cast<DimIndex>(it - loads_.begin()) + 1;
}

Seconds DimLoadTracker::spread() const {
    const auto [lo, hi] = std::minmax_element(loads_.begin(), loads_.end());
    return *hi - *lo;
}

namespace {

Bytes initial_chunk_bytes(CollectiveKind kind, Bytes chunk_bytes, const Topology& topology) {
    // A standalone AG of size S ends with S per NPU; it starts from S / N.
    if (kind == CollectiveKind::AllGather) {
        return chunk_bytes / static_cast<double>(topology.npus_count());
    }
    return chunk_bytes;
}

}  // namespace

ScheduleList chunksched::baseline_schedule(CollectiveKind kind, const Topology& topology,
                                           Bytes total_bytes, int chunks) {
    if (chunks < 1) {
        throw ValidationError("chunks per collective must be >= 1");
    }
    if (!(total_bytes > 0.0)) {
        throw ValidationError("collective size must be positive");
    }
    const auto dims = topology.dims_count();
    const auto chunk_bytes = total_bytes / chunks;
    ScheduleList schedules;
    for (int c = 1; c <= chunks; ++c) {
        ChunkSchedule schedule;
        schedule.chunk_id = c;
        if (kind != CollectiveKind::AllGather) {
            schedule.rs_order = DimOrder::ascending(dims);
        }
        if (kind != CollectiveKind::ReduceScatter) {
            schedule.ag_order = DimOrder::descending(dims);
        }
        schedule.initial_bytes = initial_chunk_bytes(kind, chunk_bytes, topology);
        schedules.push_back(std::move(schedule));
    }
    return schedules;
}

Seconds chunksched::threshold(const SchedulerConfig& config, const DimLoadTracker& tracker,
                              Bytes chunk_bytes, const Topology& topology) {
    // RS of X and AG ending at X move the same volume, so one probe serves
    // every collective kind.
    const auto& dim = topology.dim(tracker.min_dim());
    return chunk_load(dim, Phase::ReduceScatter, chunk_bytes / config.threshold_divisor);
}

GreedyScheduler::GreedyScheduler(const Topology& topology, SchedulerConfig config)
    : topology_(topology), config_(config) {
    validate(config_);
}

DimOrder GreedyScheduler::pick_order(Phase phase, Bytes chunk_bytes) const {
    const auto dims = topology_.dims_count();
    if (tracker_.spread() < threshold(config_, tracker_, chunk_bytes, topology_)) {
        return phase == Phase::ReduceScatter ? DimOrder::ascending(dims)
                                             : DimOrder::descending(dims);
    }
    std::vector<DimIndex> order(static_cast<std::size_t>(dims));
    std::iota(order.begin(), order.end(), 1);
    const auto& loads = tracker_.loads();
    std::stable_sort(order.begin(), order.end(), [&](DimIndex a, DimIndex b) {
        const auto la = loads[static_cast<std::size_t>(a - 1)];
        const auto lb = loads[static_cast<std::size_t>(b - 1)];
        return phase == Phase::ReduceScatter ? la < lb : la > lb;
    });
    return DimOrder(std::move(order));
}

void GreedyScheduler::account(const DimOrder& order, Phase phase, Bytes& bytes) {
    for (const auto k : order.dims()) {
        const auto& dim = topology_.dim(k);
        const auto load = chunk_load(dim, phase, bytes);
        largest_increment_ = std::max(largest_increment_, load);
        tracker_.add(k, load);
        bytes = size_after(phase, dim.size, bytes);
    }
}

ScheduleList GreedyScheduler::schedule(CollectiveKind kind, Bytes total_bytes) {
    if (!(total_bytes > 0.0)) {
        throw ValidationError("collective size must be positive");
    }
    tracker_.reset(kind, topology_);
    largest_increment_ = 0.0;
    const auto chunk_bytes = total_bytes / config_.chunks_per_collective;
    ScheduleList schedules;
    schedules.reserve(static_cast<std::size_t>(config_.chunks_per_collective));
    for (int c = 1; c <= config_.chunks_per_collective; ++c) {
        ChunkSchedule schedule;
        schedule.chunk_id = c;
        schedule.initial_bytes = initial_chunk_bytes(kind, chunk_bytes, topology_);
        auto bytes = schedule.initial_bytes;
        switch (kind) {
        case CollectiveKind::AllReduce:
            schedule.rs_order = pick_order(Phase::ReduceScatter, chunk_bytes);
            schedule.ag_order = schedule.rs_order.reversed();
            account(schedule.rs_order, Phase::ReduceScatter, bytes);
            account(schedule.ag_order, Phase::AllGather, bytes);
            break;
        case CollectiveKind::ReduceScatter:
            schedule.rs_order = pick_order(Phase::ReduceScatter, chunk_bytes);
            account(schedule.rs_order, Phase::ReduceScatter, bytes);
            break;
        case CollectiveKind::AllGather:
            schedule.ag_order = pick_order(Phase::AllGather, chunk_bytes);
            account(schedule.ag_order, Phase::AllGather, bytes);
            break;
        }
        schedules.push_back(std::move(schedule));
    }
    return schedules;
}

ScheduleList chunksched::greedy_schedule(CollectiveKind kind, Bytes total_bytes,
                                         const SchedulerConfig& config, const Topology& topology) {
    GreedyScheduler scheduler(topology, config);
    return scheduler.schedule(kind, total_bytes);
}

IntraDimOrder chunksched::intra_dim_order(const ScheduleList& schedules, const Topology& topology,
                                          IntraDimPolicy policy) {
    const auto metrics = simulate(topology, schedules, EnginePolicy{policy, 1});
    IntraDimOrder order(static_cast<std::size_t>(topology.dims_count()));
    // metrics.ops is already in start order.
    for (const auto& record : metrics.ops) {
        order[static_cast<std::size_t>(record.op.dim_index - 1)].push_back(
            {record.op.chunk_id, record.op.phase});
    }
    return order;
}

std::string chunksched::to_string(SchedulingMode mode) {
    switch (mode) {
    case SchedulingMode::Baseline:
        return "baseline";
    case SchedulingMode::GreedyFifo:
        return "greedy-fifo";
    case SchedulingMode::GreedyScf:
        return "greedy-scf";
    case SchedulingMode::Ideal:
        return "ideal";
    }
    return "unknown";
}

SchedulingMode chunksched::parse_scheduling_mode(const std::string& text) {
    for (const auto mode : {SchedulingMode::Baseline, SchedulingMode::GreedyFifo,
                            SchedulingMode::GreedyScf, SchedulingMode::Ideal}) {
        if (text == to_string(mode)) {
            return mode;
        }
    }
    throw ParseError("unknown mode '" + text +
                     "' (expected baseline, greedy-fifo, greedy-scf or ideal)");
}

IntraDimPolicy chunksched::policy_for(SchedulingMode mode) {
    return mode == SchedulingMode::GreedyScf ? IntraDimPolicy::Scf : IntraDimPolicy::Fifo;
}

ScheduleList chunksched::schedules_for(SchedulingMode mode, CollectiveKind kind,
                                       Bytes total_bytes, const SchedulerConfig& config,
                                       const Topology& topology) {
    switch (mode) {
    case SchedulingMode::Baseline:
        return baseline_schedule(kind, topology, total_bytes, config.chunks_per_collective);
    case SchedulingMode::GreedyFifo:
    case SchedulingMode::GreedyScf:
        return greedy_schedule(kind, total_bytes, config, topology);
    case SchedulingMode::Ideal:
        break;
    }
    throw ValidationError("the ideal mode has no chunk schedule");
}

const ScheduleCache::Entry& ScheduleCache::get(SchedulingMode mode, CollectiveKind kind,
                                               Bytes total_bytes, const SchedulerConfig& config,
                                               const Topology& topology) {
    if (mode == SchedulingMode::Ideal) {
        throw ValidationError("the ideal mode has no chunk schedule");
    }
    Key key{static_cast<int>(mode), static_cast<int>(kind), total_bytes,
            config.chunks_per_collective, config.threshold_divisor, serialize_topology(topology)};
    const std::lock_guard lock(mutex_);
    if (const auto it = entries_.find(key); it != entries_.end()) {
        ++hits_;
        return it->second;
    }
    Entry entry;
    entry.schedules = schedules_for(mode, kind, total_bytes, config, topology);
    entry.order = intra_dim_order(entry.schedules, topology, policy_for(mode));
    return entries_.emplace(std::move(key), std::move(entry)).first->second;
}

std::size_t ScheduleCache::size() const {
    const std::lock_guard lock(mutex_);
    return entries_.size();
}

std::size_t ScheduleCache::hits() const {
    const std::lock_guard lock(mutex_);
    return hits_;
}
