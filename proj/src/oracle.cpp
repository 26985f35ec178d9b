/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#include "chunksched/oracle.h"
#include "chunksched/scheduler.h"
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

using namespace chunksched;

namespace {

std::vector<DimOrder> all_orders(int dims_count) {
    std::vector<DimIndex> dims(static_cast<std::size_t>(dims_count));
    std::iota(dims.begin(), dims.end(), 1);
    std::vector<DimOrder> orders;
    do {
        orders.emplace_back(dims);
    } while (std::next_permutation(dims.begin(), dims.end()));
    return orders;
}

long long checked_mul(long long a, long long b) {
    if (a != 0 && b > std::numeric_limits<long long>::max() / a) {
        throw OracleSpaceError("schedule space overflows 64-bit counting");
    }
    return a * b;
}

}  // namespace

long long chunksched::oracle_space_size(int dims_count, CollectiveKind kind, int chunks,
                                        bool full_space) {
    long long per_chunk = 1;
    for (int i = 2; i <= dims_count; ++i) {
        per_chunk = checked_mul(per_chunk, i);
    }
    if (kind == CollectiveKind::AllReduce && full_space) {
        per_chunk = checked_mul(per_chunk, per_chunk);
    }
    long long total = 1;
    for (int c = 0; c < chunks; ++c) {
        total = checked_mul(total, per_chunk);
    }
    return total;
}

std::string chunksched::encode_schedules(const ScheduleList& schedules) {
    std::string text;
    for (const auto& schedule : schedules) {
        if (!text.empty()) {
            text += ';';
        }
        text += 'c' + std::to_string(schedule.chunk_id) + ':' + schedule.rs_order.encode() + '|' +
                schedule.ag_order.encode();
    }
    return text;
}

OracleResult chunksched::exhaustive_best(const Topology& topology, const OracleOptions& options,
                                         const std::function<void(const OracleCandidate&)>& visit) {
    if (options.chunks < 1) {
        throw ValidationError("oracle needs at least one chunk");
    }
    const auto space = oracle_space_size(topology.dims_count(), options.kind, options.chunks,
                                         options.full_space);
    if (space > options.max_candidates) {
        throw OracleSpaceError("schedule space has " + std::to_string(space) +
                               " candidates, above the cap of " +
                               std::to_string(options.max_candidates) +
                               "; raise the cap to at least " + std::to_string(space));
    }

    const auto orders = all_orders(topology.dims_count());
    const auto order_count = static_cast<long long>(orders.size());
    const bool independent_ag = options.kind == CollectiveKind::AllReduce && options.full_space;
    const auto per_chunk = independent_ag ? order_count * order_count : order_count;
    const auto templates = baseline_schedule(options.kind, topology, options.total_bytes,
                                             options.chunks);

    // Candidate index is mixed-radix with chunk 1 most significant, so index
    // order matches lexicographic order of the encoding.
    const auto build = [&](long long index) {
        auto schedules = templates;
        for (int c = options.chunks - 1; c >= 0; --c) {
            const auto choice = index % per_chunk;
            index /= per_chunk;
            auto& schedule = schedules[static_cast<std::size_t>(c)];
            const auto& first = orders[static_cast<std::size_t>(independent_ag ? choice / order_count
                                                                               : choice)];
            switch (options.kind) {
            case CollectiveKind::AllReduce:
                schedule.rs_order = first;
                schedule.ag_order =
                    independent_ag ? orders[static_cast<std::size_t>(choice % order_count)]
                                   : first.reversed();
                break;
            case CollectiveKind::ReduceScatter:
                schedule.rs_order = first;
                break;
            case CollectiveKind::AllGather:
                schedule.ag_order = first;
                break;
            }
        }
        return schedules;
    };

    std::vector<Seconds> makespans(static_cast<std::size_t>(space));
    const auto workers = static_cast<long long>(
        std::clamp<unsigned>(std::thread::hardware_concurrency(), 1U, 16U));
    const auto evaluate = [&](long long begin, long long end) {
        for (long long i = begin; i < end; ++i) {
            makespans[static_cast<std::size_t>(i)] =
                simulate(topology, build(i), options.policy).makespan;
        }
    };
    if (space < 64 || workers == 1) {
        evaluate(0, space);
    } else {
        std::vector<std::jthread> pool;
        const auto stride = (space + workers - 1) / workers;
        for (long long begin = 0; begin < space; begin += stride) {
            pool.emplace_back(evaluate, begin, std::min(space, begin + stride));
        }
    }

    long long best = 0;
    for (long long i = 0; i < space; ++i) {
        const auto candidate = makespans[static_cast<std::size_t>(i)];
        const auto incumbent = makespans[static_cast<std::size_t>(best)];
        const auto tolerance = 1e-12 * std::max(candidate, incumbent);
        if (candidate < incumbent - tolerance) {
            best = i;
        }
    }
    if (visit) {
        for (long long i = 0; i < space; ++i) {
            visit({i, encode_schedules(build(i)), makespans[static_cast<std::size_t>(i)]});
        }
    }
    return {makespans[static_cast<std::size_t>(best)], build(best), space};
}

Seconds chunksched::ideal_latency(Bytes total_bytes, const Topology& topology) {
    if (!(total_bytes > 0.0)) {
        throw ValidationError("collective size must be positive");
    }
    return total_bytes / topology.total_bw();
}
