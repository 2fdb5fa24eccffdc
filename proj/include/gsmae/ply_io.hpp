#pragma once

#include <filesystem>

#include "gsmae/splat.hpp"

namespace gsmae {

// Binary little-endian PLY in the common splat-checkpoint layout: vertex
// properties x,y,z, f_dc_0..2, f_rest_0..44, opacity, scale_0..2, rot_0..3
// (normals optional and ignored). Stored opacity/scale/rotation are raw;
// loading applies sigmoid/exp/normalization, saving inverts them.
SplatSet load_ply(const std::filesystem::path& path);
void save_ply(const SplatSet& set, const std::filesystem::path& path);

} // namespace gsmae
