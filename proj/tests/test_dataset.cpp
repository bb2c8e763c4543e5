#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "hsdemosaic/dataset.hpp"
#include "hsdemosaic/io.hpp"
#include "test_util.hpp"

using namespace hsd;
using test::code_of;
namespace fs = std::filesystem;

namespace {

const std::vector<double>& wl() {
  static const std::vector<double> w = MosaicPattern::standard().wavelengths_nm;
  return w;
}

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, static_cast<double>(std::abs(a[i] - b[i])));
  return m;
}

}  // namespace

TEST_CASE("meander order") {
  const auto o = meander_order(4);
  REQUIRE(o.size() == 16);
  CHECK(o[0] == std::pair{0, 0});
  CHECK(o[3] == std::pair{3, 0});
  CHECK(o[4] == std::pair{3, 1});
  CHECK(o[7] == std::pair{0, 1});
  CHECK(o[8] == std::pair{0, 2});
  CHECK(o[15] == std::pair{0, 3});
  // Consecutive captures differ by a single one-pixel step.
  for (std::size_t i = 1; i < o.size(); ++i) {
    CHECK(std::abs(o[i].first - o[i - 1].first) + std::abs(o[i].second - o[i - 1].second) == 1);
  }
  CHECK(std::set(o.begin(), o.end()).size() == 16);
}

TEST_CASE("ideal pixel shifts reproduce the scene") {
  std::mt19937_64 rng(4);
  const HyperCube cube = test::random_cube(16, 37, 29, rng);
  const HyperCube out = compose_shifted(simulate_shift_set(cube, MosaicPattern::standard()));
  CHECK(out.width == 34);
  CHECK(out.height == 26);
  CHECK(max_abs_diff(out.data, cube.crop(0, 0, 34, 26).data) == 0.0);

  // Capture order does not matter.
  ShiftCaptureSet set = simulate_shift_set(cube, MosaicPattern::standard());
  std::reverse(set.captures.begin(), set.captures.end());
  CHECK(compose_shifted(set).data == out.data);
}

TEST_CASE("shift errors break the identity") {
  std::mt19937_64 rng(5);
  const HyperCube cube = test::random_cube(16, 24, 24, rng);
  const HyperCube out = compose_shifted(simulate_shift_set(cube, MosaicPattern::standard(), 0.1));
  CHECK(max_abs_diff(out.data, cube.crop(0, 0, 21, 21).data) > 1e-3);
}

TEST_CASE("incomplete shift sets are rejected") {
  std::mt19937_64 rng(6);
  ShiftCaptureSet set = simulate_shift_set(test::random_cube(16, 12, 12, rng), MosaicPattern::standard());
  set.captures.pop_back();
  CHECK(code_of([&] { compose_shifted(set); }) == ErrorCode::IncompleteSet);
  set.captures.push_back(set.captures.front());
  CHECK(code_of([&] { compose_shifted(set); }) == ErrorCode::IncompleteSet);
  CHECK(code_of([] { compose_shifted({}); }) == ErrorCode::IncompleteSet);
}

TEST_CASE("shift manifests load from disk") {
  const fs::path dir = test::scratch_dir("shifts");
  std::mt19937_64 rng(7);
  const HyperCube cube = test::random_cube(16, 16, 16, rng);
  const ShiftCaptureSet set = simulate_shift_set(cube, MosaicPattern::standard());
  std::vector<std::pair<std::pair<int, int>, std::string>> entries;
  for (const auto& c : set.captures) {
    const std::string name = "s" + std::to_string(c.dx) + std::to_string(c.dy) + ".raw";
    io::write_mosaic(c.image, dir / name);
    entries.push_back({{c.dx, c.dy}, name});
  }
  io::write_json(shift_manifest_to_json(entries), dir / "shifts.json");
  CHECK(compose_shifted(load_shift_set(dir / "shifts.json")).data == compose_shifted(set).data);
}

TEST_CASE("spectral adaptation interpolates linearly") {
  HyperCube src(3, 2, 1, {400.0, 500.0, 600.0});
  for (int b = 0; b < 3; ++b) {
    src.at(b, 0, 0) = static_cast<float>(b);
    src.at(b, 0, 1) = static_cast<float>(2 * b * b);
  }
  const AdaptResult r = adapt_external_cube(src, {380.0, 400.0, 450.0, 525.0, 600.0, 650.0});
  CHECK(r.extrapolated_bands == 2);
  CHECK(r.cube.bands == 6);
  CHECK(r.cube.at(0, 0, 0) == 0.0f);
  CHECK(r.cube.at(2, 0, 0) == doctest::Approx(0.5));
  CHECK(r.cube.at(3, 0, 0) == doctest::Approx(1.25));
  CHECK(r.cube.at(3, 0, 1) == doctest::Approx(2.0 + 0.25 * 6.0));
  CHECK(r.cube.at(5, 0, 1) == 8.0f);
  CHECK(code_of([&] { adapt_external_cube(src, {500.0, 450.0}); }) == ErrorCode::NonMonotonicWavelengths);
  src.wavelengths_nm = {400.0, 400.0, 600.0};
  CHECK(code_of([&] { adapt_external_cube(src, {500.0}); }) == ErrorCode::NonMonotonicWavelengths);
}

TEST_CASE("synthetic scenes are deterministic and in range") {
  for (SceneKind k : {SceneKind::Gradient, SceneKind::Checker, SceneKind::Blobs, SceneKind::Edge}) {
    const HyperCube a = synthesize_scene(k, 64, 48, 11, wl());
    CHECK(a.data == synthesize_scene(k, 64, 48, 11, wl()).data);
    CHECK(a.data != synthesize_scene(k, 64, 48, 12, wl()).data);
    CHECK(std::all_of(a.data.begin(), a.data.end(), [](float v) { return v >= 0.0f && v <= 1.0f; }));
    CHECK(parse_scene_kind(to_string(k)) == k);
  }
  std::vector<bool> mask;
  synthesize_edge_scene(64, 64, 3, wl(), &mask, 2.0);
  const auto n = std::count(mask.begin(), mask.end(), true);
  CHECK(n > 64 * 3);
  CHECK(n < 64 * 6);
}

TEST_CASE("corpus split counts and disjoint regions") {
  std::vector<CorpusSource> sources;
  for (int i = 0; i < 3; ++i) {
    sources.push_back({"s" + std::to_string(i), synthesize_scene(SceneKind::Checker, 200, 120, 30 + i, wl()), i != 1});
  }
  CorpusConfig cfg;
  cfg.patch_size = 40;
  const PatchCorpus c = build_corpus(sources, MosaicPattern::standard(), cfg);
  CHECK(c.pairs.size() == 75);
  CHECK(c.count(Split::Train) == 54);
  CHECK(c.count(Split::Validation) == 6);
  CHECK(c.count(Split::Test) == 15);
  std::map<std::string, int> train_end, test_start;
  for (const auto& p : c.pairs) {
    CHECK(p.x0 % 4 == 0);
    CHECK(p.y0 % 4 == 0);
    CHECK(p.mosaic.width == 40);
    CHECK(p.truth.bands == 16);
    if (p.split == Split::Test) {
      test_start.try_emplace(p.source_id, p.x0);
      test_start[p.source_id] = std::min(test_start[p.source_id], p.x0);
    } else {
      train_end[p.source_id] = std::max(train_end[p.source_id], p.x0 + 40);
    }
    // Only the non-flat source has smoothed ground truth.
    if (p.source_id == "s1") {
      CHECK(p.truth_divergence > 0.0);
    } else {
      CHECK(p.truth_divergence == 0.0);
      CHECK(p.mosaic.data == cube_to_mosaic(p.truth, MosaicPattern::standard(), SamplingMode::Simulate).data);
    }
  }
  // No training pixel lies inside any test patch.
  for (const auto& [id, end] : train_end) CHECK(end <= test_start.at(id));
  CHECK(build_corpus(sources, MosaicPattern::standard(), cfg).pairs[7].x0 == c.pairs[7].x0);

  cfg.patch_size = 42;
  CHECK(code_of([&] { build_corpus(sources, MosaicPattern::standard(), cfg); }) == ErrorCode::MisalignedPatch);
  cfg.patch_size = 160;
  CHECK(code_of([&] { build_corpus(sources, MosaicPattern::standard(), cfg); }) == ErrorCode::SourceTooSmall);
  cfg.patch_size = 120;
  CHECK(code_of([&] { build_corpus(sources, MosaicPattern::standard(), cfg); }) == ErrorCode::InsufficientArea);
}

TEST_CASE("corpus round trip through disk") {
  std::vector<CorpusSource> sources{{"a", synthesize_scene(SceneKind::Blobs, 96, 64, 1, wl())}};
  CorpusConfig cfg;
  cfg.patch_size = 32;
  cfg.train_per_source = 4;
  cfg.test_per_source = 2;
  cfg.validation_fraction = 0.25;
  const PatchCorpus c = build_corpus(sources, MosaicPattern::standard(), cfg);
  const fs::path dir = test::scratch_dir("corpus");
  write_corpus(c, dir);
  const PatchCorpus r = read_corpus(dir / "manifest.json");
  REQUIRE(r.pairs.size() == c.pairs.size());
  for (std::size_t i = 0; i < c.pairs.size(); ++i) {
    CHECK(r.pairs[i].split == c.pairs[i].split);
    CHECK(r.pairs[i].x0 == c.pairs[i].x0);
    CHECK(r.pairs[i].mosaic.data == c.pairs[i].mosaic.data);
    CHECK(r.pairs[i].truth.data == c.pairs[i].truth.data);
  }
  CHECK(r.count(Split::Validation) == 1);

  const CorpusConfig back = CorpusConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
}
