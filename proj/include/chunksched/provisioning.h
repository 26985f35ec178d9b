/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#pragma once

#include "chunksched/topology.h"
#include <iosfwd>
#include <vector>

namespace chunksched {

enum class Provisioning { JustEnough, OverProvisioned, UnderProvisioned };

std::string to_string(Provisioning scenario);

/// Bandwidth split between dimK and a later dimL (k < l).
/// ratio = BW(dimK) / (P_k * ... * P_(l-1) * BW(dimL)); ratio < 1 means dimL
/// has bandwidth the baseline schedule cannot use.
struct ProvisioningVerdict {
    DimIndex k = 1;
    DimIndex l = 2;
    Provisioning scenario = Provisioning::JustEnough;
    double ratio = 1.0;
};

inline constexpr double kDefaultProvisioningTolerance = 0.01;

[[nodiscard]] ProvisioningVerdict classify(const Topology& topology, DimIndex k, DimIndex l,
                                           double tolerance = kDefaultProvisioningTolerance);

/// Verdicts for every pair k < l.
[[nodiscard]] std::vector<ProvisioningVerdict>
classify_all(const Topology& topology, double tolerance = kDefaultProvisioningTolerance);

/// Aggregate bandwidth per dimension (bytes/s) at which baseline scheduling
/// is balanced, keeping dim1 as given.
[[nodiscard]] std::vector<BytesPerSec> recommend(const Topology& topology);

/// Same shape as `topology`, aggregate bandwidths replaced by `recommend`.
/// Link counts are kept; per-link bandwidth absorbs the change.
[[nodiscard]] Topology apply_recommendation(const Topology& topology);

void write_provisioning_csv(std::ostream& out, const Topology& topology,
                            const std::vector<ProvisioningVerdict>& verdicts);

}  // namespace chunksched
