#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "hsdemosaic/mosaic.hpp"

namespace hsd::io {

/// Path of the JSON sidecar that describes a raw binary file.
std::filesystem::path sidecar_path(const std::filesystem::path& raw);

nlohmann::json pattern_to_json(const MosaicPattern& pattern, Phase phase = {});
MosaicPattern pattern_from_json(const nlohmann::json& j);
Phase phase_from_json(const nlohmann::json& j);

/// Raw little-endian f32, band-major, plus `<path>.json` sidecar.
void write_cube(const HyperCube& cube, const std::filesystem::path& path);
HyperCube read_cube(const std::filesystem::path& path);

/// Same raw layout with bands = 1; the sidecar also carries the pattern
/// descriptor (rows, cols, band_at, wavelengths_nm, phase).
void write_mosaic(const MosaicImage& mi, const std::filesystem::path& path);
MosaicImage read_mosaic(const std::filesystem::path& path);

/// Binary PGM (P5). 16-bit samples are divided by 65535, 8-bit ones by maxval.
MosaicImage read_pgm16(const std::filesystem::path& path, const MosaicPattern& pattern);
/// Values in [0,1] are scaled to 0..65535 and rounded; outside values clip.
void write_pgm16(std::span<const float> plane, int width, int height, const std::filesystem::path& path);

/// Loads a cube or mosaic by sniffing the extension (.pgm) or the sidecar.
MosaicImage read_mosaic_any(const std::filesystem::path& path, const MosaicPattern& fallback_pattern);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace hsd::io
