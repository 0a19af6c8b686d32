#pragma once

#include <array>
#include <string>

#include "i2i/tensor.hpp"

namespace i2i {

enum class VvolDtype : std::uint8_t { kF32 = 0, kU8 = 1 };

struct VvolVolume {
    Tensor data;  ///< (1,1,D,H,W), always f32 in memory
    VvolDtype dtype = VvolDtype::kF32;
    std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};  ///< mm per voxel, (D,H,W) order
};

/// Writes magic "VVOL" + version + dtype + extents (D,H,W) + spacing +
/// little-endian payload, W fastest. u8 volumes round and clamp to [0,255];
/// binary label volumes survive exactly.
void write_vvol(const std::string& path, const Tensor& volume, VvolDtype dtype,
                const std::array<float, 3>& spacing = {1.0f, 1.0f, 1.0f});

VvolVolume read_vvol(const std::string& path);

}  // namespace i2i
