/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#pragma once

#include "chunksched/types.h"
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace chunksched {

/// Order in which a chunk visits the dimensions during one phase. Always a
/// permutation of 1..n (n = 0 means the phase is absent).
class DimOrder {
  public:
    DimOrder() = default;
    /// Throws ValidationError unless `dims` is a permutation of 1..dims.size().
    explicit DimOrder(std::vector<DimIndex> dims);

    static DimOrder ascending(int dims_count);
    static DimOrder descending(int dims_count);

    [[nodiscard]] DimOrder reversed() const;
    [[nodiscard]] std::span<const DimIndex> dims() const noexcept {
        return dims_;
    }
    [[nodiscard]] int size() const noexcept {
        return static_cast<int>(dims_.size());
    }
    [[nodiscard]] bool empty() const noexcept {
        return dims_.empty();
    }
    [[nodiscard]] DimIndex operator[](int position) const {
        return dims_.at(static_cast<std::size_t>(position));
    }
    /// "1-2-3"; empty order encodes as "".
    [[nodiscard]] std::string encode() const;

    auto operator<=>(const DimOrder&) const = default;

  private:
    std::vector<DimIndex> dims_;
};

/// Per-chunk dimension traversal. All RS stages precede all AG stages.
/// `initial_bytes` is the chunk data resident per NPU before its first stage:
/// the chunk size for RS/AR, chunk size / NPU count for a standalone AG.
struct ChunkSchedule {
    ChunkId chunk_id = 1;
    DimOrder rs_order;
    DimOrder ag_order;
    Bytes initial_bytes = 0.0;

    bool operator==(const ChunkSchedule&) const = default;
};

using ScheduleList = std::vector<ChunkSchedule>;

/// One (chunk, phase) entry of a dimension's execution order.
struct OpKey {
    ChunkId chunk_id = 1;
    Phase phase = Phase::ReduceScatter;

    auto operator<=>(const OpKey&) const = default;
};

/// Per-dimension execution order; index 0 holds dim1.
using IntraDimOrder = std::vector<std::vector<OpKey>>;

/// `chunk_id,rs_order,ag_order,bytes` rows with a header.
void write_schedule_csv(std::ostream& out, const ScheduleList& schedules);
/// `dim,position,chunk_id,phase` rows with a header.
void write_intra_dim_order_csv(std::ostream& out, const IntraDimOrder& order);

}  // namespace chunksched
