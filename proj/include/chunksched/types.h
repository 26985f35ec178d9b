/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chunksched {

/// Byte quantities are real-valued: chunk sizes are divided by dimension
/// sizes without rounding.
using Bytes = double;
using Seconds = double;
using BytesPerSec = double;

/// 1-based dimension index (dim1 .. dimD).
using DimIndex = int;
using ChunkId = int;

inline constexpr double kBitsPerByte = 8.0;
inline constexpr Bytes kMB = 1e6;
inline constexpr Bytes kGB = 1e9;

constexpr BytesPerSec gbps_to_bytes_per_sec(double gbps) noexcept {
    return gbps * 1e9 / kBitsPerByte;
}

constexpr double bytes_per_sec_to_gbps(BytesPerSec bw) noexcept {
    return bw * kBitsPerByte / 1e9;
}

constexpr Seconds ns_to_seconds(double ns) noexcept {
    return ns * 1e-9;
}

enum class Phase { ReduceScatter, AllGather };

enum class CollectiveKind { ReduceScatter, AllGather, AllReduce };

std::string to_string(Phase phase);
std::string to_string(CollectiveKind kind);
CollectiveKind parse_collective_kind(const std::string& text);

/// Malformed input text (config files, traces, CLI values).
class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace chunksched
