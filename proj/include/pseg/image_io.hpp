#pragma once

#include <filesystem>

#include "pseg/lattice.hpp"

namespace pseg {

// On-disk image container: magic "PSEG1\n", a 4-byte little-endian header
// length, a JSON header {dims, dtype, kind}, then the row-major payload.
// Intensities store as little-endian f32, labels as i8 restricted to +/-1.
// Malformed files raise ConfigError; unwritable values raise
// ContractViolation.

void write_image(const std::filesystem::path& path, const Image& image);
void write_label_image(const std::filesystem::path& path,
                       const LabelImage& labels);

Image read_image(const std::filesystem::path& path);
LabelImage read_label_image(const std::filesystem::path& path);

}  // namespace pseg
