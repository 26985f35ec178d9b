/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#pragma once

#include "chunksched/types.h"
#include <string>
#include <string_view>
#include <vector>

namespace chunksched {

/// Physical shape of one network dimension. Each kind maps to exactly one
/// contention-free collective algorithm: Ring -> ring, FullyConnected ->
/// direct, Switch -> halving-doubling.
enum class DimKind { Ring, FullyConnected, Switch };

std::string to_string(DimKind kind);
DimKind parse_dim_kind(std::string_view text);

/// One network dimension as configured. Bandwidth and latency are kept in
/// their configuration units (Gb/s, ns) so that a topology serializes back
/// exactly; the SI accessors are what the models use. All bandwidths are
/// unidirectional.
struct NetworkDim {
    DimIndex index = 1;
    int size = 2;
    DimKind kind = DimKind::Ring;
    double bw_per_link_gbps = 0.0;
    int links_per_npu = 1;
    double step_latency_ns = 0.0;

    [[nodiscard]] BytesPerSec bw_per_link() const noexcept {
        return gbps_to_bytes_per_sec(bw_per_link_gbps);
    }
    [[nodiscard]] Seconds step_latency() const noexcept {
        return ns_to_seconds(step_latency_ns);
    }

    bool operator==(const NetworkDim&) const = default;
};

/// bw_per_link x links_per_npu, in bytes/second. A dimension is modeled as
/// one shared pipe of this capacity per NPU.
[[nodiscard]] BytesPerSec aggregate_bw(const NetworkDim& dim) noexcept;

/// Validated, immutable multi-dimensional product topology P1 x ... x PD.
class Topology {
  public:
    /// Throws ValidationError naming the offending dimension. Indices are
    /// reassigned 1..D in the given order.
    explicit Topology(std::vector<NetworkDim> dims, std::string name = "");

    [[nodiscard]] int dims_count() const noexcept {
        return static_cast<int>(dims_.size());
    }
    /// 1-based access; throws std::out_of_range.
    [[nodiscard]] const NetworkDim& dim(DimIndex k) const;
    [[nodiscard]] const std::vector<NetworkDim>& dims() const noexcept {
        return dims_;
    }
    [[nodiscard]] const std::string& name() const noexcept {
        return name_;
    }
    [[nodiscard]] long long npus_count() const noexcept;
    [[nodiscard]] BytesPerSec total_bw() const noexcept;

    /// Topology made of dimensions first..last (inclusive), re-indexed from 1.
    [[nodiscard]] Topology sub_topology(DimIndex first, DimIndex last) const;

    bool operator==(const Topology& other) const {
        return dims_ == other.dims_;
    }

  private:
    std::vector<NetworkDim> dims_;
    std::string name_;
};

/// Throws ValidationError if the dimension violates an invariant.
void validate_dim(const NetworkDim& dim);

/// dimK bandwidth at which the baseline schedule is stage-balanced:
/// BW(dim1) / (P1 x ... x P(k-1)).
[[nodiscard]] BytesPerSec required_balanced_bw(const Topology& topology, DimIndex k);

/// Parses the JSON topology format. Accepts either an object with a "dims"
/// array (and optional "name") or a bare array of dimension records.
[[nodiscard]] Topology load_topology(std::string_view config_text);
[[nodiscard]] Topology load_topology_file(const std::string& path);
[[nodiscard]] std::string serialize_topology(const Topology& topology);

/// Built-in presets: the six next-gen topologies plus "current-2D"
/// (16x64, 1200/100 Gb/s), today's server + NIC platform.
[[nodiscard]] std::vector<std::string> preset_names();
[[nodiscard]] std::vector<std::string> next_gen_preset_names();
[[nodiscard]] bool is_preset(std::string_view name);
[[nodiscard]] Topology preset_topology(std::string_view name);

/// Preset name or path to a JSON file.
[[nodiscard]] Topology resolve_topology(const std::string& name_or_path);

}  // namespace chunksched
