/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#include "chunksched/schedule.h"
#include <algorithm>
#include <numeric>
#include <ostream>

using namespace chunksched;

DimOrder::DimOrder(std::vector<DimIndex> dims) : dims_(std::move(dims)) {
    std::vector<bool> seen(dims_.size() + 1, false);
    for (const auto k : dims_) {
        if (k < 1 || k > static_cast<DimIndex>(dims_.size()) || seen[static_cast<std::size_t>(k)]) {
            throw ValidationError("dimension order '" + encode() + "' is not a permutation of 1.." +
                                  std::to_string(dims_.size()));
        }
        seen[static_cast<std::size_t>(k)] = true;
    }
}

DimOrder DimOrder::ascending(int dims_count) {
    std::vector<DimIndex> dims(static_cast<std::size_t>(dims_count));
    std::iota(dims.begin(), dims.end(), 1);
    return DimOrder(std::move(dims));
}

DimOrder DimOrder::descending(int dims_count) {
    return ascending(dims_count).reversed();
}

DimOrder DimOrder::reversed() const {
    DimOrder out;
    out.dims_.assign(dims_.rbegin(), dims_.rend());
    return out;
}

std::string DimOrder::encode() const {
    std::string text;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i > 0) {
            text += '-';
        }
        text += std::to_string(dims_[i]);
    }
    return text;
}

void chunksched::write_schedule_csv(std::ostream& out, const ScheduleList& schedules) {
    out << "chunk_id,rs_order,ag_order,bytes\n";
    for (const auto& schedule : schedules) {
        out << schedule.chunk_id << ',' << schedule.rs_order.encode() << ','
            << schedule.ag_order.encode() << ',' << schedule.initial_bytes << '\n';
    }
}

void chunksched::write_intra_dim_order_csv(std::ostream& out, const IntraDimOrder& order) {
    out << "dim,position,chunk_id,phase\n";
    for (std::size_t k = 0; k < order.size(); ++k) {
        for (std::size_t i = 0; i < order[k].size(); ++i) {
            out << (k + 1) << ',' << (i + 1) << ',' << order[k][i].chunk_id << ','
                << to_string(order[k][i].phase) << '\n';
        }
    }
}
