/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#include "chunksched/collective.h"
#include <bit>

using namespace chunksched;

namespace {

void check_size(int p) {
    if (p < 2) {
        throw ValidationError("collective group size must be >= 2, got " + std::to_string(p));
    }
}

}  // namespace

std::string chunksched::to_string(Phase phase) {
    return phase == Phase::ReduceScatter ? "RS" : "AG";
}

std::string chunksched::to_string(CollectiveKind kind) {
    switch (kind) {
    case CollectiveKind::ReduceScatter:
        return "reduce_scatter";
    case CollectiveKind::AllGather:
        return "all_gather";
    case CollectiveKind::AllReduce:
        return "all_reduce";
    }
    return "unknown";
}

CollectiveKind chunksched::parse_collective_kind(const std::string& text) {
    if (text == "reduce_scatter" || text == "rs" || text == "reducescatter") {
        return CollectiveKind::ReduceScatter;
    }
    if (text == "all_gather" || text == "ag" || text == "allgather") {
        return CollectiveKind::AllGather;
    }
    if (text == "all_reduce" || text == "ar" || text == "allreduce") {
        return CollectiveKind::AllReduce;
    }
    throw ParseError("unknown collective kind '" + text + "'");
}

int chunksched::num_steps(Phase /*phase*/, DimKind kind, int p) {
    check_size(p);
    switch (kind) {
    case DimKind::Ring:
        return p - 1;
    case DimKind::FullyConnected:
        return 1;
    case DimKind::Switch: {
        const auto width = static_cast<unsigned>(p);
        if (!std::has_single_bit(width)) {
            throw ValidationError("halving-doubling needs a power-of-two group, got " +
                                  std::to_string(p));
        }
        return std::countr_zero(width);
    }
    }
    return 0;
}

Bytes chunksched::bytes_sent_per_npu(Phase phase, int p, Bytes bytes_before) {
    check_size(p);
    if (phase == Phase::ReduceScatter) {
        return bytes_before * (p - 1) / p;
    }
    return bytes_before * (p - 1);
}

Bytes chunksched::size_after(Phase phase, int p, Bytes bytes_before) {
    check_size(p);
    return phase == Phase::ReduceScatter ? bytes_before / p : bytes_before * p;
}
