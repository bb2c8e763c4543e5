#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsdemosaic/calibration.hpp"
#include "hsdemosaic/mosaic.hpp"

namespace hsd {

// ---------------------------------------------------------------------------
// Pixel-shift ground truth

struct ShiftCapture {
  int dx = 0;
  int dy = 0;
  MosaicImage image;
};

/// One capture per (dx, dy) in {0..side-1}^2. Capture order is metadata
/// only; composition looks captures up by their shift tag.
struct ShiftCaptureSet {
  std::vector<ShiftCapture> captures;
};

/// Boustrophedon walk over the side x side shift grid: row 0 left to right,
/// row 1 right to left, and so on. Pairs are (dx, dy).
std::vector<std::pair<int, int>> meander_order(int side);

/// Resamples a complete shift stack into a full-resolution cube. The capture
/// with shift (dx, dy) images scene pixel p at sensor pixel p + (dx, dy), so
/// the output shrinks by side - 1 pixels per axis.
HyperCube compose_shifted(const ShiftCaptureSet& set);

/// Samples the shift stack a camera would record of `cube`. A non-zero
/// `shift_error` scales every shift by (1 + shift_error) and resamples
/// bilinearly, emulating off-focus-plane parallax.
ShiftCaptureSet simulate_shift_set(const HyperCube& cube, const MosaicPattern& pattern, double shift_error = 0.0);

nlohmann::json shift_manifest_to_json(const std::vector<std::pair<std::pair<int, int>, std::string>>& entries);
/// Loads every capture listed in a shift-set manifest
/// {"captures": [{"dx":..,"dy":..,"path":..}, ...]}; relative paths resolve
/// against the manifest's directory.
ShiftCaptureSet load_shift_set(const std::filesystem::path& manifest);

// ---------------------------------------------------------------------------
// External cubes

struct AdaptResult {
  HyperCube cube;
  /// Target wavelengths outside the source range; those bands hold the
  /// nearest source band.
  std::size_t extrapolated_bands = 0;
};

/// Linear interpolation along the spectral axis onto `target_wavelengths`.
AdaptResult adapt_external_cube(const HyperCube& cube, const std::vector<double>& target_wavelengths);

// ---------------------------------------------------------------------------
// Synthetic scenes

enum class SceneKind { Gradient, Checker, Blobs, Edge };

std::string_view to_string(SceneKind kind);
std::optional<SceneKind> parse_scene_kind(std::string_view name);

/// Smooth reflectance spectra (sums of broad Gaussians over a baseline)
/// painted into a simple geometric layout.
HyperCube synthesize_scene(SceneKind kind, int width, int height, std::uint64_t seed,
                           const std::vector<double>& wavelengths_nm);

/// Two materials separated by a slanted straight edge. `edge_mask` (if
/// given) receives the pixels within `band_px` of the edge.
HyperCube synthesize_edge_scene(int width, int height, std::uint64_t seed, const std::vector<double>& wavelengths_nm,
                                std::vector<bool>* edge_mask = nullptr, double band_px = 2.0);

// ---------------------------------------------------------------------------
// Patch corpus

enum class Split { Train, Validation, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct CorpusSource {
  std::string id;
  HyperCube cube;
  /// Flat scenes (e.g. a colour chart) have no parallax error; other scenes
  /// get their ground truth Gaussian-smoothed.
  bool flat_scene = true;
  std::string provenance = "synthetic";
};

struct CorpusConfig {
  int patch_size = 100;
  int train_per_source = 20;
  int test_per_source = 5;
  /// Fraction of each source's width reserved (right-hand strip) for test
  /// patches. The strip is at least one patch wide.
  double test_width_fraction = 0.25;
  double validation_fraction = 0.1;
  bool smooth_non_flat = true;
  double smooth_sigma = 1.5;
  /// Optional sensor crosstalk applied to the mosaic input only.
  std::optional<CrosstalkMatrix> input_crosstalk;
  std::uint64_t seed = 42;

  nlohmann::json to_json() const;
  static CorpusConfig from_json(const nlohmann::json& j);
};

struct PatchPair {
  MosaicImage mosaic;   // [1, P, P]
  HyperCube truth;      // [L, P, P]
  Split split = Split::Train;
  std::string source_id;
  int x0 = 0;
  int y0 = 0;
  std::string provenance;
  /// Max |mosaic - simulate(truth)|; non-zero only after ground-truth-only
  /// corrections (smoothing) or input-only crosstalk.
  double truth_divergence = 0.0;
};

struct PatchCorpus {
  std::vector<PatchPair> pairs;

  std::size_t count(Split split) const;
  std::vector<const PatchPair*> select(Split split) const;
};

PatchCorpus build_corpus(const std::vector<CorpusSource>& sources, const MosaicPattern& pattern,
                         const CorpusConfig& cfg);

/// Writes every pair as raw+sidecar files plus `manifest.json`.
void write_corpus(const PatchCorpus& corpus, const std::filesystem::path& dir);
PatchCorpus read_corpus(const std::filesystem::path& manifest);

}  // namespace hsd
