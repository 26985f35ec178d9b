/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#pragma once

#include "chunksched/topology.h"

namespace chunksched {

/// Per-dimension collective algorithm models. Ring, direct and
/// halving-doubling move the same volume per NPU; they differ only in the
/// number of steps.

/// Ring: p-1; FullyConnected (direct): 1; Switch (halving-doubling): log2(p).
/// Throws ValidationError for p < 2 or a non power-of-two switch size.
[[nodiscard]] int num_steps(Phase phase, DimKind kind, int p);

/// RS: ((p-1)/p) x bytes_before. AG: (p-1) x bytes_before.
[[nodiscard]] Bytes bytes_sent_per_npu(Phase phase, int p, Bytes bytes_before);

/// RS shrinks resident data by p, AG grows it by p.
[[nodiscard]] Bytes size_after(Phase phase, int p, Bytes bytes_before);

/// One (phase, dimension) step of a hierarchical collective.
struct StageSpec {
    Phase phase = Phase::ReduceScatter;
    DimIndex dim_index = 1;
    int p = 2;
    Bytes bytes_before = 0.0;
};

}  // namespace chunksched
