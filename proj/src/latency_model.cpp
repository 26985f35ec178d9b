/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#include "chunksched/latency_model.h"

using namespace chunksched;

DimLatencyParams DimLatencyParams::of(const NetworkDim& dim) {
    return DimLatencyParams{fixed_delay(dim, Phase::ReduceScatter),
                            fixed_delay(dim, Phase::AllGather), 1.0 / aggregate_bw(dim)};
}

Seconds chunksched::fixed_delay(const NetworkDim& dim, Phase phase) {
    return num_steps(phase, dim.kind, dim.size) * dim.step_latency();
}

Seconds chunksched::chunk_load(const NetworkDim& dim, Phase phase, Bytes bytes_before) {
    return bytes_sent_per_npu(phase, dim.size, bytes_before) / aggregate_bw(dim);
}

Seconds chunksched::stage_duration(const NetworkDim& dim, Phase phase, Bytes bytes_before,
                                   int share) {
    if (share < 1) {
        throw ValidationError("stage share must be >= 1");
    }
    return fixed_delay(dim, phase) + chunk_load(dim, phase, bytes_before) * share;
}
