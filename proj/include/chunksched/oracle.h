/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#pragma once

#include "chunksched/engine.h"
#include <functional>
#include <iosfwd>

namespace chunksched {

struct OracleOptions {
    CollectiveKind kind = CollectiveKind::AllReduce;
    Bytes total_bytes = 0.0;
    int chunks = 1;
    EnginePolicy policy{};
    /// Enumerate RS and AG orders independently ((D!*D!)^C) instead of
    /// tying AG to the reversed RS order ((D!)^C).
    bool full_space = false;
    long long max_candidates = 1'000'000;
};

struct OracleCandidate {
    long long index = 0;
    std::string encoding;
    Seconds makespan = 0.0;
};

struct OracleResult {
    Seconds best_makespan = 0.0;
    ScheduleList best_schedules;
    long long space_size = 0;
};

class OracleSpaceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Size of the enumerated space; throws OracleSpaceError on overflow.
[[nodiscard]] long long oracle_space_size(int dims_count, CollectiveKind kind, int chunks,
                                          bool full_space);

/// Simulates every schedule assignment and keeps the minimum makespan; ties
/// go to the lexicographically smallest encoding. `visit` (optional) sees each
/// candidate in index order.
[[nodiscard]] OracleResult
exhaustive_best(const Topology& topology, const OracleOptions& options,
                const std::function<void(const OracleCandidate&)>& visit = {});

/// Table-style "ideal": collective size over the sum of all dimension bandwidths.
[[nodiscard]] Seconds ideal_latency(Bytes total_bytes, const Topology& topology);

/// "c1:1-2|2-1;c2:..." with one RS|AG pair per chunk.
[[nodiscard]] std::string encode_schedules(const ScheduleList& schedules);

}  // namespace chunksched
