#pragma once

#include <optional>
#include <string_view>

#include "hsdemosaic/mosaic.hpp"

namespace hsd {

enum class ClassicalMethod { Bilinear, Bicubic, IntensityDifference };

std::optional<ClassicalMethod> parse_classical_method(std::string_view name);

struct DemosaicStats {
  /// Output values that fell below zero and were clamped.
  std::size_t clamped_values = 0;
};

/// Per-band bilinear interpolation over each band's sample lattice, with
/// nearest-sample extrapolation outside the lattice hull.
HyperCube demosaic_bilinear(const MosaicImage& mi);

/// Per-band Catmull-Rom (a = -0.5) interpolation; lattice samples are
/// edge-replicated. Negative overshoot is clamped and counted.
HyperCube demosaic_bicubic(const MosaicImage& mi, DemosaicStats* stats = nullptr);

/// Intensity-difference demosaicing: a pseudo-panchromatic image from a
/// uniform side x side box filter, plus bilinearly interpolated per-band
/// differences to it.
HyperCube demosaic_intensity_difference(const MosaicImage& mi, DemosaicStats* stats = nullptr);

HyperCube demosaic(const MosaicImage& mi, ClassicalMethod method);

/// Box average over the window [y-1, y+side-2] x [x-1, x+side-2] with edge
/// replication; every such window covers each band exactly once.
std::vector<float> pseudo_panchromatic(const MosaicImage& mi);

}  // namespace hsd
