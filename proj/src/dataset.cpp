#include "hsdemosaic/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "hsdemosaic/error.hpp"
#include "hsdemosaic/io.hpp"

namespace hsd {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Pixel-shift ground truth

std::vector<std::pair<int, int>> meander_order(int side) {
  std::vector<std::pair<int, int>> order;
  for (int dy = 0; dy < side; ++dy) {
    for (int i = 0; i < side; ++i) order.emplace_back(dy % 2 == 0 ? i : side - 1 - i, dy);
  }
  return order;
}

HyperCube compose_shifted(const ShiftCaptureSet& set) {
  if (set.captures.empty()) throw Error(ErrorCode::IncompleteSet, "no captures");
  const MosaicImage& ref = set.captures.front().image;
  const MosaicPattern& pattern = ref.pattern;
  const int side = pattern.side();
  std::map<std::pair<int, int>, const MosaicImage*> by_shift;
  for (const auto& c : set.captures) {
    if (c.image.width != ref.width || c.image.height != ref.height || c.image.pattern != pattern ||
        c.image.phase != ref.phase) {
      throw Error(ErrorCode::ShapeMismatch, "captures differ in size, pattern or phase");
    }
    if (c.dx < 0 || c.dx >= side || c.dy < 0 || c.dy >= side) {
      throw Error(ErrorCode::IncompleteSet, "shift (" + std::to_string(c.dx) + "," + std::to_string(c.dy) + ") out of range");
    }
    if (!by_shift.emplace(std::pair{c.dx, c.dy}, &c.image).second) {
      throw Error(ErrorCode::IncompleteSet, "duplicate shift (" + std::to_string(c.dx) + "," + std::to_string(c.dy) + ")");
    }
  }
  if (by_shift.size() != static_cast<std::size_t>(side * side)) {
    throw Error(ErrorCode::IncompleteSet, "expected " + std::to_string(side * side) + " captures, got " +
                                              std::to_string(by_shift.size()));
  }
  const int out_w = ref.width - (side - 1);
  const int out_h = ref.height - (side - 1);
  if (out_w <= 0 || out_h <= 0) throw Error(ErrorCode::ShapeMismatch, "captures smaller than the pattern");

  // Over the 16 shifts every scene pixel sees each band exactly once.
  HyperCube out(pattern.band_count(), out_w, out_h, pattern.wavelengths_nm);
  for (const auto& [shift, image] : by_shift) {
    const auto [dx, dy] = shift;
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) out.at(image->band_at_pixel(y + dy, x + dx), y, x) = image->at(y + dy, x + dx);
    }
  }
  return out;
}

ShiftCaptureSet simulate_shift_set(const HyperCube& cube, const MosaicPattern& pattern, double shift_error) {
  if (cube.bands != pattern.band_count()) {
    throw Error(ErrorCode::BandCountMismatch, "cube bands differ from the pattern's band count");
  }
  const int side = pattern.side();
  auto sample = [&](int band, double y, double x) {
    y = std::clamp(y, 0.0, static_cast<double>(cube.height - 1));
    x = std::clamp(x, 0.0, static_cast<double>(cube.width - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, cube.height - 1);
    const int x1 = std::min(x0 + 1, cube.width - 1);
    const double fy = y - y0;
    const double fx = x - x0;
    const double top = (1.0 - fx) * cube.at(band, y0, x0) + fx * cube.at(band, y0, x1);
    const double bottom = (1.0 - fx) * cube.at(band, y1, x0) + fx * cube.at(band, y1, x1);
    return static_cast<float>((1.0 - fy) * top + fy * bottom);
  };
  ShiftCaptureSet set;
  for (const auto& [dx, dy] : meander_order(side)) {
    MosaicImage mi(cube.width, cube.height, pattern);
    if (shift_error == 0.0) {
      for (int y = 0; y < cube.height; ++y) {
        for (int x = 0; x < cube.width; ++x) {
          const int sy = std::clamp(y - dy, 0, cube.height - 1);
          const int sx = std::clamp(x - dx, 0, cube.width - 1);
          mi.at(y, x) = cube.at(pattern.band(y % side, x % side), sy, sx);
        }
      }
    } else {
      const double scale = 1.0 + shift_error;
      for (int y = 0; y < cube.height; ++y) {
        for (int x = 0; x < cube.width; ++x) {
          mi.at(y, x) = sample(pattern.band(y % side, x % side), y - dy * scale, x - dx * scale);
        }
      }
    }
    set.captures.push_back({dx, dy, std::move(mi)});
  }
  return set;
}

nlohmann::json shift_manifest_to_json(const std::vector<std::pair<std::pair<int, int>, std::string>>& entries) {
  nlohmann::json captures = nlohmann::json::array();
  for (const auto& [shift, path] : entries) {
    captures.push_back({{"dx", shift.first}, {"dy", shift.second}, {"path", path}});
  }
  return {{"captures", captures}};
}

ShiftCaptureSet load_shift_set(const fs::path& manifest) {
  const auto j = io::read_json(manifest);
  ShiftCaptureSet set;
  try {
    for (const auto& entry : j.at("captures")) {
      fs::path p = entry.at("path").get<std::string>();
      if (p.is_relative()) p = manifest.parent_path() / p;
      set.captures.push_back({entry.at("dx").get<int>(), entry.at("dy").get<int>(), io::read_mosaic(p)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, manifest.string() + ": " + e.what());
  }
  return set;
}

// ---------------------------------------------------------------------------
// External cubes

AdaptResult adapt_external_cube(const HyperCube& cube, const std::vector<double>& targets) {
  const auto& src = cube.wavelengths_nm;
  if (src.size() != static_cast<std::size_t>(cube.bands) || src.empty()) {
    throw Error(ErrorCode::BandCountMismatch, "source cube needs one wavelength per band");
  }
  for (std::size_t i = 1; i < src.size(); ++i) {
    if (!(src[i] > src[i - 1])) throw Error(ErrorCode::NonMonotonicWavelengths, "source wavelengths not strictly increasing");
  }
  for (std::size_t i = 1; i < targets.size(); ++i) {
    if (!(targets[i] > targets[i - 1])) throw Error(ErrorCode::NonMonotonicWavelengths, "target wavelengths not strictly increasing");
  }
  AdaptResult result{HyperCube(static_cast<int>(targets.size()), cube.width, cube.height, targets), 0};
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const double wl = targets[t];
    auto out = result.cube.band(static_cast<int>(t));
    if (wl <= src.front() || wl >= src.back()) {
      const bool low = wl <= src.front();
      if (wl != src.front() && wl != src.back()) ++result.extrapolated_bands;
      const auto in = cube.band(low ? 0 : cube.bands - 1);
      std::copy(in.begin(), in.end(), out.begin());
      continue;
    }
    const auto hi = static_cast<std::size_t>(std::upper_bound(src.begin(), src.end(), wl) - src.begin());
    const std::size_t lo = hi - 1;
    const double f = (wl - src[lo]) / (src[hi] - src[lo]);
    const auto a = cube.band(static_cast<int>(lo));
    const auto b = cube.band(static_cast<int>(hi));
    if (f == 0.0) {
      std::copy(a.begin(), a.end(), out.begin());
      continue;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<float>((1.0 - f) * a[i] + f * b[i]);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * (static_cast<double>(engine_() >> 11) * 0x1.0p-53);
  }
  int integer(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }

 private:
  std::mt19937_64 engine_;
};

using Spectrum = std::vector<double>;

Spectrum random_material(SceneRng& rng, const std::vector<double>& wl) {
  const double base = rng.uniform(0.05, 0.35);
  const int peaks = rng.integer(1, 3);
  std::vector<std::array<double, 3>> bumps;
  for (int k = 0; k < peaks; ++k) {
    bumps.push_back({rng.uniform(-0.3, 0.6), rng.uniform(420.0, 700.0), rng.uniform(20.0, 90.0)});
  }
  Spectrum s(wl.size());
  for (std::size_t i = 0; i < wl.size(); ++i) {
    double v = base;
    for (const auto& [amp, center, width] : bumps) v += amp * std::exp(-0.5 * std::pow((wl[i] - center) / width, 2));
    s[i] = std::clamp(v, 0.02, 0.95);
  }
  return s;
}

void paint(HyperCube& cube, int y, int x, const Spectrum& s, double shade = 1.0) {
  for (int b = 0; b < cube.bands; ++b) {
    cube.at(b, y, x) = static_cast<float>(std::clamp(s[static_cast<std::size_t>(b)] * shade, 0.0, 1.0));
  }
}

void blend(HyperCube& cube, int y, int x, const Spectrum& a, const Spectrum& b, double t, double shade = 1.0) {
  for (int k = 0; k < cube.bands; ++k) {
    const double v = ((1.0 - t) * a[static_cast<std::size_t>(k)] + t * b[static_cast<std::size_t>(k)]) * shade;
    cube.at(k, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
}

}  // namespace

std::string_view to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::Gradient: return "gradient";
    case SceneKind::Checker: return "checker";
    case SceneKind::Blobs: return "blobs";
    case SceneKind::Edge: return "edge";
  }
  return "unknown";
}

std::optional<SceneKind> parse_scene_kind(std::string_view name) {
  for (SceneKind k : {SceneKind::Gradient, SceneKind::Checker, SceneKind::Blobs, SceneKind::Edge}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

HyperCube synthesize_edge_scene(int width, int height, std::uint64_t seed, const std::vector<double>& wl,
                                std::vector<bool>* edge_mask, double band_px) {
  SceneRng rng(seed);
  const Spectrum a = random_material(rng, wl);
  const Spectrum b = random_material(rng, wl);
  const double angle = rng.uniform(-0.6, 0.6);
  const double cx = width * rng.uniform(0.35, 0.65);
  const double cy = height * 0.5;
  const double nx = std::cos(angle);
  const double ny = std::sin(angle);
  HyperCube cube(static_cast<int>(wl.size()), width, height, wl);
  if (edge_mask) edge_mask->assign(cube.plane_size(), false);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double d = (x + 0.5 - cx) * nx + (y + 0.5 - cy) * ny;
      // One pixel of antialiasing across the edge.
      blend(cube, y, x, a, b, std::clamp(d + 0.5, 0.0, 1.0));
      if (edge_mask && std::abs(d) <= band_px) (*edge_mask)[static_cast<std::size_t>(y) * width + x] = true;
    }
  }
  return cube;
}

HyperCube synthesize_scene(SceneKind kind, int width, int height, std::uint64_t seed, const std::vector<double>& wl) {
  if (kind == SceneKind::Edge) return synthesize_edge_scene(width, height, seed, wl);
  SceneRng rng(seed);
  HyperCube cube(static_cast<int>(wl.size()), width, height, wl);
  switch (kind) {
    case SceneKind::Gradient: {
      const Spectrum a = random_material(rng, wl);
      const Spectrum b = random_material(rng, wl);
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double freq = rng.uniform(0.2, 0.5);
      const double extent = std::hypot(width, height);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const double u = (x * std::cos(angle) + y * std::sin(angle)) / extent;
          const double t = std::clamp(0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * u * extent * freq / 4.0), 0.0, 1.0);
          const double shade = 0.75 + 0.25 * std::cos(2.0 * std::numbers::pi * freq * y / 6.0);
          blend(cube, y, x, a, b, t, shade);
        }
      }
      break;
    }
    case SceneKind::Checker: {
      std::vector<Spectrum> mats;
      const int count = rng.integer(2, 4);
      for (int i = 0; i < count; ++i) mats.push_back(random_material(rng, wl));
      const int cell = rng.integer(3, 9);
      const int ox = rng.integer(0, cell - 1);
      const int oy = rng.integer(0, cell - 1);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const int cx = (x + ox) / cell;
          const int cy = (y + oy) / cell;
          paint(cube, y, x, mats[static_cast<std::size_t>((cx + 2 * cy) % count)]);
        }
      }
      break;
    }
    case SceneKind::Blobs: {
      const Spectrum bg = random_material(rng, wl);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) paint(cube, y, x, bg);
      }
      const int blobs = width * height / rng.integer(150, 300);
      for (int i = 0; i < blobs; ++i) {
        const Spectrum m = random_material(rng, wl);
        const double cx = rng.uniform(0.0, width);
        const double cy = rng.uniform(0.0, height);
        const double r = rng.uniform(1.5, std::min(12.0, 0.2 * std::min(width, height)));
        const int x0 = std::max(0, static_cast<int>(cx - r - 1)), x1 = std::min(width - 1, static_cast<int>(cx + r + 1));
        const int y0 = std::max(0, static_cast<int>(cy - r - 1)), y1 = std::min(height - 1, static_cast<int>(cy + r + 1));
        for (int y = y0; y <= y1; ++y) {
          for (int x = x0; x <= x1; ++x) {
            const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy) - r;
            const double t = std::clamp(0.5 - d, 0.0, 1.0);
            if (t <= 0.0) continue;
            std::vector<double> current(static_cast<std::size_t>(cube.bands));
            for (int b = 0; b < cube.bands; ++b) current[static_cast<std::size_t>(b)] = cube.at(b, y, x);
            blend(cube, y, x, current, m, t);
          }
        }
      }
      break;
    }
    case SceneKind::Edge: break;
  }
  return cube;
}

// ---------------------------------------------------------------------------
// Patch corpus

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "val";
    case Split::Test: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Validation;
  if (name == "test") return Split::Test;
  throw Error(ErrorCode::IoError, "unknown split '" + std::string(name) + "'");
}

nlohmann::json CorpusConfig::to_json() const {
  nlohmann::json j = {{"patch_size", patch_size},
                      {"train_per_source", train_per_source},
                      {"test_per_source", test_per_source},
                      {"test_width_fraction", test_width_fraction},
                      {"validation_fraction", validation_fraction},
                      {"smooth_non_flat", smooth_non_flat},
                      {"smooth_sigma", smooth_sigma},
                      {"seed", seed}};
  if (input_crosstalk) j["input_crosstalk"] = input_crosstalk->to_json();
  return j;
}

CorpusConfig CorpusConfig::from_json(const nlohmann::json& j) {
  CorpusConfig c;
  try {
    c.patch_size = j.value("patch_size", c.patch_size);
    c.train_per_source = j.value("train_per_source", c.train_per_source);
    c.test_per_source = j.value("test_per_source", c.test_per_source);
    c.test_width_fraction = j.value("test_width_fraction", c.test_width_fraction);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.smooth_non_flat = j.value("smooth_non_flat", c.smooth_non_flat);
    c.smooth_sigma = j.value("smooth_sigma", c.smooth_sigma);
    c.seed = j.value("seed", c.seed);
    if (j.contains("input_crosstalk")) c.input_crosstalk = CrosstalkMatrix::from_json(j.at("input_crosstalk"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("corpus config: ") + e.what());
  }
  return c;
}

std::size_t PatchCorpus::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [&](const PatchPair& p) { return p.split == split; }));
}

std::vector<const PatchPair*> PatchCorpus::select(Split split) const {
  std::vector<const PatchPair*> out;
  for (const auto& p : pairs) {
    if (p.split == split) out.push_back(&p);
  }
  return out;
}

PatchCorpus build_corpus(const std::vector<CorpusSource>& sources, const MosaicPattern& pattern, const CorpusConfig& cfg) {
  const int side = pattern.side();
  const int patch = cfg.patch_size;
  if (patch <= 0 || patch % side != 0) {
    throw Error(ErrorCode::MisalignedPatch, "patch size must be a positive multiple of the pattern side");
  }
  if (cfg.train_per_source < 0 || cfg.test_per_source < 0 || cfg.validation_fraction < 0.0 ||
      cfg.validation_fraction >= 1.0) {
    throw Error(ErrorCode::InvalidConfig, "invalid corpus counts or validation fraction");
  }
  SceneRng rng(cfg.seed);
  PatchCorpus corpus;
  for (const CorpusSource& src : sources) {
    const HyperCube& cube = src.cube;
    if (cube.bands != pattern.band_count()) {
      throw Error(ErrorCode::BandCountMismatch, src.id + ": expected " + std::to_string(pattern.band_count()) + " bands");
    }
    if (cube.width < patch || cube.height < patch) {
      throw Error(ErrorCode::SourceTooSmall, src.id + " is smaller than one " + std::to_string(patch) + " px patch");
    }
    // Test patches live in a right-hand strip, training patches left of it,
    // so the two never overlap.
    const int usable_w = cube.width / side * side;
    int test_w = 0;
    if (cfg.test_per_source > 0) {
      test_w = static_cast<int>(std::ceil(cfg.test_width_fraction * usable_w / side)) * side;
      test_w = std::max(test_w, patch);
    }
    const int train_w = usable_w - test_w;
    if ((cfg.train_per_source > 0 && train_w < patch) || test_w > usable_w) {
      throw Error(ErrorCode::InsufficientArea, src.id + ": cannot fit separate train and test regions");
    }

    HyperCube truth_full = cube;
    if (cfg.smooth_non_flat && !src.flat_scene) truth_full = gaussian_smooth(cube, cfg.smooth_sigma);
    const HyperCube& input_cube_src = cube;
    HyperCube mixed;
    if (cfg.input_crosstalk) mixed = apply_mixing(cube, *cfg.input_crosstalk);
    const MosaicImage mosaic_full =
        cube_to_mosaic(cfg.input_crosstalk ? mixed : input_cube_src, pattern, SamplingMode::Simulate);

    auto take = [&](int region_x0, int region_w, int count, Split split) {
      const int slots_x = (region_w - patch) / side;
      const int slots_y = (cube.height / side * side - patch) / side;
      for (int i = 0; i < count; ++i) {
        const int x0 = region_x0 + rng.integer(0, slots_x) * side;
        const int y0 = rng.integer(0, slots_y) * side;
        PatchPair pair;
        pair.mosaic = extract_patch(mosaic_full, x0, y0, patch, patch);
        pair.truth = truth_full.crop(x0, y0, patch, patch);
        pair.split = split;
        pair.source_id = src.id;
        pair.x0 = x0;
        pair.y0 = y0;
        pair.provenance = src.provenance;
        const MosaicImage expected = cube_to_mosaic(pair.truth, pattern, SamplingMode::Simulate);
        for (std::size_t k = 0; k < expected.data.size(); ++k) {
          pair.truth_divergence =
              std::max(pair.truth_divergence, std::abs(static_cast<double>(expected.data[k]) - pair.mosaic.data[k]));
        }
        corpus.pairs.push_back(std::move(pair));
      }
    };
    const std::size_t first_train = corpus.pairs.size();
    take(0, train_w, cfg.train_per_source, Split::Train);
    // Hold out a validation share of each source's training patches.
    const int val = static_cast<int>(std::lround(cfg.validation_fraction * cfg.train_per_source));
    for (int i = 0; i < val; ++i) corpus.pairs[first_train + static_cast<std::size_t>(i)].split = Split::Validation;
    if (cfg.test_per_source > 0) take(train_w, test_w, cfg.test_per_source, Split::Test);
  }
  return corpus;
}

void write_corpus(const PatchCorpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    const auto& p = corpus.pairs[i];
    std::ostringstream stem;
    stem << std::setw(5) << std::setfill('0') << i;
    const std::string mosaic_name = "mosaic_" + stem.str() + ".raw";
    const std::string cube_name = "cube_" + stem.str() + ".raw";
    io::write_mosaic(p.mosaic, dir / mosaic_name);
    io::write_cube(p.truth, dir / cube_name);
    pairs.push_back({{"mosaic_path", mosaic_name},
                     {"cube_path", cube_name},
                     {"split", to_string(p.split)},
                     {"source_id", p.source_id},
                     {"offset", {p.x0, p.y0}},
                     {"provenance", p.provenance},
                     {"truth_divergence", p.truth_divergence}});
  }
  const nlohmann::json manifest = {{"pairs", pairs},
                                   {"counts",
                                    {{"train", corpus.count(Split::Train)},
                                     {"val", corpus.count(Split::Validation)},
                                     {"test", corpus.count(Split::Test)}}}};
  io::write_json(manifest, dir / "manifest.json");
}

PatchCorpus read_corpus(const fs::path& manifest) {
  const auto j = io::read_json(manifest);
  const fs::path base = manifest.parent_path();
  PatchCorpus corpus;
  try {
    for (const auto& e : j.at("pairs")) {
      PatchPair p;
      p.mosaic = io::read_mosaic(base / e.at("mosaic_path").get<std::string>());
      p.truth = io::read_cube(base / e.at("cube_path").get<std::string>());
      p.split = parse_split(e.at("split").get<std::string>());
      p.source_id = e.value("source_id", "");
      if (e.contains("offset")) {
        p.x0 = e.at("offset").at(0).get<int>();
        p.y0 = e.at("offset").at(1).get<int>();
      }
      p.provenance = e.value("provenance", "");
      p.truth_divergence = e.value("truth_divergence", 0.0);
      corpus.pairs.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, manifest.string() + ": " + e.what());
  }
  return corpus;
}

}  // namespace hsd
