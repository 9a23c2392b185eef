#pragma once
// Volume container: <stem>.vol.json header + <stem>.vol.raw packed voxels,
// z-major, little-endian. Round-trips are bit-exact, including f32 NaN payloads.

#include <filesystem>
#include <variant>

#include "bodyreg/volume.hpp"

namespace bodyreg {

using AnyVolume = std::variant<VolumeU8, VolumeF>;

void write_volume(const VolumeF& v, const std::filesystem::path& stem);
void write_volume(const VolumeU8& v, const std::filesystem::path& stem);

AnyVolume read_volume(const std::filesystem::path& stem);

// Typed readers; throw ValidationError when the stored dtype differs.
VolumeF read_volume_f32(const std::filesystem::path& stem);
VolumeU8 read_volume_u8(const std::filesystem::path& stem);

bool volume_exists(const std::filesystem::path& stem);

}  // namespace bodyreg
