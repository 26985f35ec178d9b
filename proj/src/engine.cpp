/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#include "chunksched/engine.h"
#include "chunksched/latency_model.h"
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

using namespace chunksched;

namespace {

constexpr double kRelTolerance = 1e-12;

bool nearly_equal(double a, double b) {
    return std::abs(a - b) <= kRelTolerance * std::max({1e-30, std::abs(a), std::abs(b)});
}

struct OpRef {
    std::size_t chunk = 0;
    std::size_t stage = 0;
};

struct ActiveOp {
    OpRef ref;
    Seconds remaining_fixed = 0.0;
    Seconds remaining_work = 0.0;  // byte time at full bandwidth
    Seconds charged_fixed = 0.0;
    std::size_t record = 0;        // index into RunMetrics::ops
};

struct DimState {
    std::vector<OpRef> ready;
    std::vector<ActiveOp> active;
    std::size_t enforced_next = 0;
    std::size_t remaining_ops = 0;
    bool open = false;
    bool rs_charged = false;
    bool ag_charged = false;
    Seconds open_since = 0.0;
};

class Simulation {
  public:
    Simulation(const Topology& topology, const ScheduleList& schedules, const EnginePolicy& policy,
               const std::optional<IntraDimOrder>& enforced)
        : topology_(topology), policy_(policy), enforced_(enforced),
          chunks_(expand_ops(topology, schedules)),
          ready_time_(chunks_.size()),
          dims_(static_cast<std::size_t>(topology.dims_count())) {
        if (policy_.max_concurrency < 1) {
            throw ValidationError("max_concurrency must be >= 1");
        }
        for (std::size_t c = 0; c < chunks_.size(); ++c) {
            ready_time_[c].assign(chunks_[c].size(), 0.0);
            for (const auto& op : chunks_[c]) {
                ++dims_[dim_slot(op.dim_index)].remaining_ops;
            }
        }
        if (enforced_) {
            check_enforced_order();
        }
        metrics_.dims.resize(dims_.size());
    }

    RunMetrics run() {
        for (std::size_t c = 0; c < chunks_.size(); ++c) {
            make_ready({c, 0}, 0.0);
        }
        dispatch();
        update_busy_intervals();
        while (any_active()) {
            step();
        }
        if (std::any_of(dims_.begin(), dims_.end(),
                        [](const DimState& dim) { return dim.remaining_ops > 0; })) {
            throw SimulationError(describe_deadlock());
        }
        finalize();
        return std::move(metrics_);
    }

  private:
    static std::size_t dim_slot(DimIndex k) {
        return static_cast<std::size_t>(k - 1);
    }

    const ChunkOp& op_of(OpRef ref) const {
        return chunks_[ref.chunk][ref.stage];
    }

    bool any_active() const {
        return std::any_of(dims_.begin(), dims_.end(),
                           [](const DimState& dim) { return !dim.active.empty(); });
    }

    void check_enforced_order() const {
        const auto& order = *enforced_;
        if (order.size() != dims_.size()) {
            throw SimulationError("enforced order covers " + std::to_string(order.size()) +
                                  " dimensions, topology has " + std::to_string(dims_.size()));
        }
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            std::vector<OpKey> expected;
            for (const auto& stages : chunks_) {
                for (const auto& op : stages) {
                    if (dim_slot(op.dim_index) == k) {
                        expected.push_back({op.chunk_id, op.phase});
                    }
                }
            }
            auto given = order[k];
            std::sort(expected.begin(), expected.end());
            std::sort(given.begin(), given.end());
            if (expected != given) {
                throw SimulationError("enforced order for dim" + std::to_string(k + 1) +
                                      " does not match the stages implied by the schedules");
            }
        }
    }

    void make_ready(OpRef ref, Seconds now) {
        ready_time_[ref.chunk][ref.stage] = now;
        dims_[dim_slot(op_of(ref).dim_index)].ready.push_back(ref);
    }

    // Index into dim.ready of the stage to start next, or npos.
    std::size_t pick(std::size_t k) const {
        const auto& dim = dims_[k];
        constexpr auto npos = std::numeric_limits<std::size_t>::max();
        if (dim.ready.empty()) {
            return npos;
        }
        if (enforced_) {
            const auto& order = (*enforced_)[k];
            if (dim.enforced_next >= order.size()) {
                return npos;
            }
            const auto& want = order[dim.enforced_next];
            for (std::size_t i = 0; i < dim.ready.size(); ++i) {
                const auto& op = op_of(dim.ready[i]);
                if (op.chunk_id == want.chunk_id && op.phase == want.phase) {
                    return i;
                }
            }
            return npos;
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i < dim.ready.size(); ++i) {
            if (precedes(dim.ready[i], dim.ready[best])) {
                best = i;
            }
        }
        return best;
    }

    bool precedes(OpRef a, OpRef b) const {
        const auto& op_a = op_of(a);
        const auto& op_b = op_of(b);
        if (policy_.intra_dim == IntraDimPolicy::Fifo) {
            const auto ta = ready_time_[a.chunk][a.stage];
            const auto tb = ready_time_[b.chunk][b.stage];
            if (!nearly_equal(ta, tb)) {
                return ta < tb;
            }
        } else if (!nearly_equal(op_a.bytes_before, op_b.bytes_before)) {
            return op_a.bytes_before < op_b.bytes_before;
        }
        return op_a.chunk_id < op_b.chunk_id;
    }

    void dispatch() {
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            auto& dim = dims_[k];
            while (static_cast<int>(dim.active.size()) < policy_.max_concurrency) {
                const auto index = pick(k);
                if (index == std::numeric_limits<std::size_t>::max()) {
                    break;
                }
                const auto ref = dim.ready[index];
                dim.ready.erase(dim.ready.begin() + static_cast<std::ptrdiff_t>(index));
                if (enforced_) {
                    ++dim.enforced_next;
                }
                const auto& op = op_of(ref);
                OpRecord record;
                record.op = op;
                record.ready = ready_time_[ref.chunk][ref.stage];
                record.start = now_;
                record.start_sequence = static_cast<long long>(metrics_.ops.size());
                metrics_.ops.push_back(record);
                auto fixed = op.fixed;
                if (policy_.fixed_delay == FixedDelayCharging::PerPhase) {
                    auto& charged = op.phase == Phase::ReduceScatter ? dim.rs_charged : dim.ag_charged;
                    fixed = charged ? 0.0 : op.fixed;
                    charged = true;
                }
                dim.active.push_back({ref, fixed, op.byte_time, fixed, metrics_.ops.size() - 1});
            }
        }
    }

    void update_busy_intervals() {
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            auto& dim = dims_[k];
            if (dim.active.empty() && dim.open) {
                metrics_.dims[k].timeline.push_back({dim.open_since, now_});
                dim.open = false;
            } else if (!dim.active.empty() && !dim.open) {
                dim.open = true;
                dim.open_since = now_;
            }
        }
    }

    static Seconds time_to_finish(const ActiveOp& active, int share) {
        return active.remaining_fixed + active.remaining_work * share;
    }

    void step() {
        auto next = std::numeric_limits<Seconds>::infinity();
        for (const auto& dim : dims_) {
            const auto share = static_cast<int>(dim.active.size());
            for (const auto& active : dim.active) {
                next = std::min(next, now_ + time_to_finish(active, share));
            }
        }
        const auto elapsed = next - now_;
        std::vector<std::pair<std::size_t, ActiveOp>> finished;
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            auto& dim = dims_[k];
            const auto share = static_cast<int>(dim.active.size());
            std::vector<ActiveOp> still_running;
            for (auto active : dim.active) {
                if (nearly_equal(now_ + time_to_finish(active, share), next)) {
                    finished.emplace_back(k, active);
                    continue;
                }
                const auto fixed_part = std::min(active.remaining_fixed, elapsed);
                active.remaining_fixed -= fixed_part;
                active.remaining_work =
                    std::max(0.0, active.remaining_work - (elapsed - fixed_part) / share);
                still_running.push_back(active);
            }
            dim.active = std::move(still_running);
        }
        now_ = next;
        for (const auto& [k, active] : finished) {
            auto& record = metrics_.ops[active.record];
            record.end = now_;
            --dims_[k].remaining_ops;
            const auto& op = op_of(active.ref);
            auto& dm = metrics_.dims[k];
            dm.bytes += bytes_sent_per_npu(op.phase, topology_.dim(op.dim_index).size, op.bytes_before);
            dm.fixed_total += active.charged_fixed;
            dm.last_end = std::max(dm.last_end, now_);
            if (active.ref.stage + 1 < chunks_[active.ref.chunk].size()) {
                make_ready({active.ref.chunk, active.ref.stage + 1}, now_);
            }
        }
        dispatch();
        update_busy_intervals();
    }

    std::string describe_deadlock() const {
        // Each blocked dimension waits on the stage at the head of its
        // enforced order; that stage's chunk is parked on another dimension.
        std::map<std::size_t, std::size_t> waits_on;
        std::ostringstream detail;
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const auto& dim = dims_[k];
            if (dim.remaining_ops == 0 || !enforced_) {
                continue;
            }
            const auto& want = (*enforced_)[k][dim.enforced_next];
            for (std::size_t c = 0; c < chunks_.size(); ++c) {
                if (chunks_[c].empty() || chunks_[c].front().chunk_id != want.chunk_id) {
                    continue;
                }
                for (const auto& ref : all_ready()) {
                    if (ref.chunk == c) {
                        waits_on[k] = dim_slot(op_of(ref).dim_index);
                    }
                }
            }
            detail << " dim" << (k + 1) << " waits for chunk " << want.chunk_id << ' '
                   << to_string(want.phase) << ';';
        }
        std::string cycle;
        if (!waits_on.empty()) {
            std::set<std::size_t> visited;
            auto k = waits_on.begin()->first;
            while (waits_on.count(k) && !visited.count(k)) {
                visited.insert(k);
                cycle += "dim" + std::to_string(k + 1) + " -> ";
                k = waits_on.at(k);
            }
            cycle += "dim" + std::to_string(k + 1);
        }
        return "deadlock: no stage can start but work remains." + detail.str() +
               (cycle.empty() ? "" : " cycle: " + cycle);
    }

    std::vector<OpRef> all_ready() const {
        std::vector<OpRef> refs;
        for (const auto& dim : dims_) {
            refs.insert(refs.end(), dim.ready.begin(), dim.ready.end());
        }
        return refs;
    }

    void finalize() {
        metrics_.makespan = now_;
        for (auto& dm : metrics_.dims) {
            dm.busy = 0.0;
            for (const auto& interval : dm.timeline) {
                dm.busy += interval.end - interval.start;
            }
            dm.idle = std::max(0.0, dm.last_end - dm.busy);
        }
        metrics_.weighted_utilization =
            metrics_.makespan > 0.0 ? weighted_utilization(metrics_, topology_) : 0.0;
    }

    const Topology& topology_;
    EnginePolicy policy_;
    const std::optional<IntraDimOrder>& enforced_;
    std::vector<std::vector<ChunkOp>> chunks_;
    std::vector<std::vector<Seconds>> ready_time_;
    std::vector<DimState> dims_;
    RunMetrics metrics_;
    Seconds now_ = 0.0;
};

}  // namespace

std::string chunksched::to_string(IntraDimPolicy policy) {
    return policy == IntraDimPolicy::Fifo ? "fifo" : "scf";
}

IntraDimPolicy chunksched::parse_intra_dim_policy(const std::string& text) {
    if (text == "fifo" || text == "FIFO") {
        return IntraDimPolicy::Fifo;
    }
    if (text == "scf" || text == "SCF") {
        return IntraDimPolicy::Scf;
    }
    throw ParseError("unknown intra-dimension policy '" + text + "' (expected fifo or scf)");
}

std::string chunksched::to_string(FixedDelayCharging charging) {
    return charging == FixedDelayCharging::PerStage ? "per-stage" : "per-phase";
}

FixedDelayCharging chunksched::parse_fixed_delay_charging(const std::string& text) {
    if (text == "per-stage") {
        return FixedDelayCharging::PerStage;
    }
    if (text == "per-phase") {
        return FixedDelayCharging::PerPhase;
    }
    throw ParseError("unknown fixed-delay charging '" + text + "' (expected per-stage or per-phase)");
}

std::vector<std::vector<ChunkOp>> chunksched::expand_ops(const Topology& topology,
                                                         const ScheduleList& schedules) {
    const auto dims_count = topology.dims_count();
    std::set<ChunkId> ids;
    std::vector<std::vector<ChunkOp>> chunks;
    chunks.reserve(schedules.size());
    for (const auto& schedule : schedules) {
        const auto label = "chunk " + std::to_string(schedule.chunk_id);
        if (!ids.insert(schedule.chunk_id).second) {
            throw ValidationError(label + ": duplicate chunk id");
        }
        if (!(schedule.initial_bytes > 0.0)) {
            throw ValidationError(label + ": initial bytes must be positive");
        }
        if (schedule.rs_order.empty() && schedule.ag_order.empty()) {
            throw ValidationError(label + ": schedule has no stages");
        }
        for (const auto* order : {&schedule.rs_order, &schedule.ag_order}) {
            if (!order->empty() && order->size() != dims_count) {
                throw ValidationError(label + ": order '" + order->encode() + "' does not cover " +
                                      std::to_string(dims_count) + " dimensions");
            }
        }
        std::vector<ChunkOp> stages;
        auto bytes = schedule.initial_bytes;
        const auto append = [&](Phase phase, const DimOrder& order) {
            for (const auto k : order.dims()) {
                const auto& dim = topology.dim(k);
                stages.push_back({schedule.chunk_id, k, phase, bytes, fixed_delay(dim, phase),
                                  chunk_load(dim, phase, bytes)});
                bytes = size_after(phase, dim.size, bytes);
            }
        };
        append(Phase::ReduceScatter, schedule.rs_order);
        append(Phase::AllGather, schedule.ag_order);
        chunks.push_back(std::move(stages));
    }
    return chunks;
}

RunMetrics chunksched::simulate(const Topology& topology, const ScheduleList& schedules,
                                const EnginePolicy& policy,
                                const std::optional<IntraDimOrder>& enforced_order) {
    return Simulation(topology, schedules, policy, enforced_order).run();
}

double chunksched::weighted_utilization(const RunMetrics& metrics, const Topology& topology) {
    if (!(metrics.makespan > 0.0)) {
        throw ValidationError("weighted utilization needs a positive makespan");
    }
    double weighted = 0.0;
    double total = 0.0;
    for (int k = 1; k <= topology.dims_count(); ++k) {
        const auto bw = aggregate_bw(topology.dim(k));
        weighted += bw * metrics.dims.at(static_cast<std::size_t>(k - 1)).busy / metrics.makespan;
        total += bw;
    }
    return weighted / total;
}

std::vector<std::vector<double>> chunksched::activity_rate(const RunMetrics& metrics,
                                                           Seconds window) {
    if (!(window > 0.0)) {
        throw ValidationError("activity window must be positive");
    }
    const auto windows =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(metrics.makespan / window - 1e-9)));
    std::vector<std::vector<double>> rates;
    for (const auto& dm : metrics.dims) {
        std::vector<double> series(windows, 0.0);
        for (std::size_t w = 0; w < windows; ++w) {
            const auto lo = static_cast<double>(w) * window;
            const auto hi = std::min(lo + window, metrics.makespan);
            if (!(hi > lo)) {
                continue;
            }
            Seconds covered = 0.0;
            for (const auto& interval : dm.timeline) {
                covered += std::max(0.0, std::min(hi, interval.end) - std::max(lo, interval.start));
            }
            series[w] = std::min(1.0, covered / (hi - lo));
        }
        rates.push_back(std::move(series));
    }
    return rates;
}

void chunksched::write_metrics_csv(std::ostream& out, const RunMetrics& metrics,
                                   const Topology& topology) {
    out << "row,dim,busy_s,idle_s,bytes,utilization,makespan_s,weighted_utilization\n";
    for (std::size_t k = 0; k < metrics.dims.size(); ++k) {
        const auto& dm = metrics.dims[k];
        out << "dim," << (k + 1) << ',' << dm.busy << ',' << dm.idle << ',' << dm.bytes << ','
            << (metrics.makespan > 0.0 ? dm.busy / metrics.makespan : 0.0) << ",,\n";
    }
    out << "summary,,,,,," << metrics.makespan << ','
        << (metrics.makespan > 0.0 ? weighted_utilization(metrics, topology) : 0.0) << '\n';
}

void chunksched::write_activity_csv(std::ostream& out,
                                    const std::vector<std::vector<double>>& rates,
                                    Seconds window) {
    out << "window_start_s";
    for (std::size_t k = 0; k < rates.size(); ++k) {
        out << ",dim" << (k + 1);
    }
    out << '\n';
    const auto windows = rates.empty() ? 0 : rates.front().size();
    for (std::size_t w = 0; w < windows; ++w) {
        out << static_cast<double>(w) * window;
        for (const auto& series : rates) {
            out << ',' << series[w];
        }
        out << '\n';
    }
}
