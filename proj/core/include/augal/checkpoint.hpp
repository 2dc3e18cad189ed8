// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "augal/tensor.hpp"

namespace augal {

/// Flat binary parameter checkpoint.
/// Layout: magic "AGAL", u32 version=1, u32 tensor count; per tensor:
/// u32 rank, u32 dims..., f64 data. All integers and floats little-endian.
std::vector<std::uint8_t> serialize_tensors(const std::vector<Tensor>& tensors);

/// Parses a checkpoint into (shape, data) pairs. Throws FormatError with the
/// byte offset on malformed input.
std::vector<std::pair<std::vector<std::size_t>, std::vector<double>>> parse_checkpoint(
    const std::vector<std::uint8_t>& bytes);

/// Restores parsed values into existing tensors in order; shapes must match.
void restore_tensors(std::vector<Tensor>& tensors,
                     const std::vector<std::uint8_t>& bytes);

}  // namespace augal
