/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#include "chunksched/provisioning.h"
#include <cmath>
#include <ostream>

using namespace chunksched;

std::string chunksched::to_string(Provisioning scenario) {
    switch (scenario) {
    case Provisioning::JustEnough:
        return "JustEnough";
    case Provisioning::OverProvisioned:
        return "OverProvisioned";
    case Provisioning::UnderProvisioned:
        return "UnderProvisioned";
    }
    return "unknown";
}

ProvisioningVerdict chunksched::classify(const Topology& topology, DimIndex k, DimIndex l,
                                         double tolerance) {
    if (k < 1 || l > topology.dims_count() || k >= l) {
        throw std::out_of_range("need 1 <= k < l <= " + std::to_string(topology.dims_count()) +
                                ", got k=" + std::to_string(k) + " l=" + std::to_string(l));
    }
    if (!(tolerance >= 0.0)) {
        throw ValidationError("tolerance must be non-negative");
    }
    double shrink = 1.0;
    for (DimIndex i = k; i < l; ++i) {
        shrink *= topology.dim(i).size;
    }
    ProvisioningVerdict verdict;
    verdict.k = k;
    verdict.l = l;
    verdict.ratio = aggregate_bw(topology.dim(k)) / (shrink * aggregate_bw(topology.dim(l)));
    if (std::abs(verdict.ratio - 1.0) <= tolerance) {
        verdict.scenario = Provisioning::JustEnough;
    } else if (verdict.ratio < 1.0) {
        verdict.scenario = Provisioning::OverProvisioned;
    } else {
        verdict.scenario = Provisioning::UnderProvisioned;
    }
    return verdict;
}

std::vector<ProvisioningVerdict> chunksched::classify_all(const Topology& topology,
                                                          double tolerance) {
    std::vector<ProvisioningVerdict> verdicts;
    for (DimIndex k = 1; k <= topology.dims_count(); ++k) {
        for (DimIndex l = k + 1; l <= topology.dims_count(); ++l) {
            verdicts.push_back(classify(topology, k, l, tolerance));
        }
    }
    return verdicts;
}

std::vector<BytesPerSec> chunksched::recommend(const Topology& topology) {
    std::vector<BytesPerSec> bandwidths;
    for (DimIndex k = 1; k <= topology.dims_count(); ++k) {
        bandwidths.push_back(required_balanced_bw(topology, k));
    }
    return bandwidths;
}

Topology chunksched::apply_recommendation(const Topology& topology) {
    const auto bandwidths = recommend(topology);
    auto dims = topology.dims();
    for (std::size_t i = 0; i < dims.size(); ++i) {
        dims[i].bw_per_link_gbps = bytes_per_sec_to_gbps(bandwidths[i]) / dims[i].links_per_npu;
    }
    return Topology(std::move(dims), topology.name() + "-balanced");
}

void chunksched::write_provisioning_csv(std::ostream& out, const Topology& topology,
                                        const std::vector<ProvisioningVerdict>& verdicts) {
    out << "row,k,l,scenario,ratio,current_gbps,recommended_gbps\n";
    for (const auto& verdict : verdicts) {
        out << "pair," << verdict.k << ',' << verdict.l << ',' << to_string(verdict.scenario) << ','
            << verdict.ratio << ",,\n";
    }
    const auto bandwidths = recommend(topology);
    for (DimIndex k = 1; k <= topology.dims_count(); ++k) {
        out << "dim," << k << ",,,," << bytes_per_sec_to_gbps(aggregate_bw(topology.dim(k))) << ','
            << bytes_per_sec_to_gbps(bandwidths[static_cast<std::size_t>(k - 1)]) << '\n';
    }
}
