/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#pragma once

#include "chunksched/collective.h"

namespace chunksched {

/// Latency(dimK) = A_K + N_K * B_K + idle_K. The scheduler predicts with the
/// byte term only; the engine charges the fixed delay once per stage.
struct DimLatencyParams {
    Seconds a_rs = 0.0;  ///< fixed delay of an RS pass
    Seconds a_ag = 0.0;  ///< fixed delay of an AG pass
    double b = 0.0;      ///< seconds per byte, 1 / aggregate_bw

    static DimLatencyParams of(const NetworkDim& dim);
};

/// num_steps x step_latency.
[[nodiscard]] Seconds fixed_delay(const NetworkDim& dim, Phase phase);

/// Predicted byte time of one stage: bytes_sent_per_npu x B_K. Excludes A_K.
[[nodiscard]] Seconds chunk_load(const NetworkDim& dim, Phase phase, Bytes bytes_before);

/// Executed duration of one stage while `share` stages split the pipe.
[[nodiscard]] Seconds stage_duration(const NetworkDim& dim, Phase phase, Bytes bytes_before,
                                     int share = 1);

}  // namespace chunksched
