// hsdemosaic: command-line front end for the demosaicing toolkit.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "hsdemosaic/calibration.hpp"
#include "hsdemosaic/classical.hpp"
#include "hsdemosaic/dataset.hpp"
#include "hsdemosaic/error.hpp"
#include "hsdemosaic/io.hpp"
#include "hsdemosaic/metrics.hpp"
#include "hsdemosaic/model.hpp"
#include "hsdemosaic/render.hpp"
#include "hsdemosaic/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hsd;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

void print_config(const std::string& command, const json& cfg) {
  std::cout << "effective config (" << command << "): " << cfg.dump() << "\n";
}

MosaicPattern pattern_for(const std::optional<std::string>& path) {
  if (!path) return MosaicPattern::standard();
  MosaicPattern p = io::pattern_from_json(io::read_json(*path));
  p.validate();
  return p;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

MetricsReport evaluate_split(const ModelParams* params, std::optional<ClassicalMethod> method,
                             const std::vector<const PatchPair*>& pairs) {
  return params ? evaluate(*params, pairs) : evaluate_classical(*method, pairs);
}

// ---------------------------------------------------------------------------
// dataset

struct DatasetArgs {
  std::string manifest, in, out, wavelengths, sources, config, kind = "blobs", pattern;
  int width = 256, height = 256;
  double shift_error = 0.0;
};

void add_dataset(CLI::App& app, DatasetArgs& a, const std::uint64_t& seed) {
  auto* ds = app.add_subcommand("dataset", "Ground-truth and corpus preparation");
  ds->require_subcommand(1);

  auto* compose = ds->add_subcommand("compose-shifts", "Compose a pixel-shift capture set into a cube");
  compose->add_option("--manifest", a.manifest, "Shift-set manifest JSON")->required();
  compose->add_option("--out", a.out, "Output cube (.raw)")->required();
  compose->callback([&] {
    print_config("dataset compose-shifts", {{"manifest", a.manifest}, {"out", a.out}, {"seed", seed}});
    const HyperCube cube = compose_shifted(load_shift_set(a.manifest));
    io::write_cube(cube, a.out);
    std::cout << fmt::format("wrote {} ({}x{}x{})\n", a.out, cube.bands, cube.height, cube.width);
  });

  auto* simulate = ds->add_subcommand("simulate-shifts", "Render the shift captures a camera would record of a cube");
  simulate->add_option("--in", a.in, "Scene cube (.raw)")->required();
  simulate->add_option("--out", a.out, "Output directory")->required();
  simulate->add_option("--shift-error", a.shift_error, "Relative shift scale error");
  simulate->add_option("--pattern", a.pattern, "Pattern JSON (default: standard 4x4)");
  simulate->callback([&] {
    print_config("dataset simulate-shifts",
                 {{"in", a.in}, {"out", a.out}, {"shift_error", a.shift_error}, {"seed", seed}});
    const ShiftCaptureSet set = simulate_shift_set(io::read_cube(a.in), pattern_for(a.pattern.empty() ? std::nullopt : std::optional(a.pattern)), a.shift_error);
    ensure_dir(a.out);
    std::vector<std::pair<std::pair<int, int>, std::string>> entries;
    for (const ShiftCapture& c : set.captures) {
      const std::string name = fmt::format("shift_{}_{}.raw", c.dx, c.dy);
      io::write_mosaic(c.image, fs::path(a.out) / name);
      entries.push_back({{c.dx, c.dy}, name});
    }
    io::write_json(shift_manifest_to_json(entries), fs::path(a.out) / "shifts.json");
    std::cout << fmt::format("wrote {} captures to {}\n", entries.size(), a.out);
  });

  auto* adapt = ds->add_subcommand("adapt", "Resample an external cube onto the sensor wavelengths");
  adapt->add_option("--in", a.in, "Input cube (.raw)")->required();
  adapt->add_option("--wavelengths", a.wavelengths, "JSON array of target wavelengths (nm)")->required();
  adapt->add_option("--out", a.out, "Output cube (.raw)")->required();
  adapt->callback([&] {
    print_config("dataset adapt", {{"in", a.in}, {"wavelengths", a.wavelengths}, {"out", a.out}, {"seed", seed}});
    const json wl = io::read_json(a.wavelengths);
    const AdaptResult r = adapt_external_cube(io::read_cube(a.in), wl.get<std::vector<double>>());
    if (r.extrapolated_bands > 0) {
      std::cerr << fmt::format("warning: {} target band(s) outside the source range were held at the nearest band\n",
                               r.extrapolated_bands);
    }
    io::write_cube(r.cube, a.out);
  });

  auto* synth = ds->add_subcommand("synth", "Generate a synthetic 16-band scene cube");
  synth->add_option("--kind", a.kind, "gradient|checker|blobs|edge");
  synth->add_option("--width", a.width, "Width in pixels");
  synth->add_option("--height", a.height, "Height in pixels");
  synth->add_option("--out", a.out, "Output cube (.raw)")->required();
  synth->callback([&] {
    print_config("dataset synth",
                 {{"kind", a.kind}, {"width", a.width}, {"height", a.height}, {"out", a.out}, {"seed", seed}});
    const auto kind = parse_scene_kind(a.kind);
    if (!kind) throw CLI::ValidationError("--kind", "unknown scene kind '" + a.kind + "'");
    io::write_cube(synthesize_scene(*kind, a.width, a.height, seed, MosaicPattern::standard().wavelengths_nm), a.out);
  });

  auto* build = ds->add_subcommand("build", "Cut a directory of source cubes into a patch corpus");
  build->add_option("--sources", a.sources, "Directory of .raw cubes with JSON sidecars")->required();
  build->add_option("--config", a.config, "Corpus config JSON");
  build->add_option("--out", a.out, "Output corpus directory")->required();
  build->add_option("--pattern", a.pattern, "Pattern JSON (default: standard 4x4)");
  build->callback([&, ds] {
    json file_cfg = a.config.empty() ? json::object() : io::read_json(a.config);
    if (ds->get_parent()->get_option("--seed")->count() > 0) file_cfg["seed"] = seed;
    else if (!file_cfg.contains("seed")) file_cfg["seed"] = seed;
    const CorpusConfig cfg = CorpusConfig::from_json(file_cfg);
    print_config("dataset build", {{"sources", a.sources}, {"out", a.out}, {"corpus", cfg.to_json()}});

    std::vector<fs::path> raws;
    for (const auto& entry : fs::directory_iterator(a.sources)) {
      if (entry.path().extension() == ".raw") raws.push_back(entry.path());
    }
    std::sort(raws.begin(), raws.end());
    if (raws.empty()) throw Error(ErrorCode::EmptyInput, "no .raw cubes in " + a.sources);
    std::vector<CorpusSource> sources;
    for (const fs::path& raw : raws) {
      const json side = io::read_json(io::sidecar_path(raw));
      sources.push_back({raw.stem().string(), io::read_cube(raw), side.value("flat_scene", true),
                         side.value("provenance", std::string("file:") + raw.filename().string())});
    }
    const PatchCorpus corpus = build_corpus(sources, pattern_for(a.pattern.empty() ? std::nullopt : std::optional(a.pattern)), cfg);
    write_corpus(corpus, a.out);
    std::cout << fmt::format("corpus: {} train, {} val, {} test patches\n", corpus.count(Split::Train),
                             corpus.count(Split::Validation), corpus.count(Split::Test));
  });
}

// ---------------------------------------------------------------------------
// calib

struct CalibArgs {
  std::string raw, white, dark, matrix, in, out, pattern;
  double sigma = 1.5;
  double clip_max = 2.0;
};

void add_calib(CLI::App& app, CalibArgs& a, const std::uint64_t& seed) {
  auto* calib = app.add_subcommand("calib", "Radiometric and spectral calibration");
  calib->require_subcommand(1);

  auto* white = calib->add_subcommand("white", "Flat-field (white/dark) correction of a raw mosaic");
  white->add_option("--raw", a.raw, "Raw mosaic (.raw or .pgm)")->required();
  white->add_option("--white", a.white, "White reference mosaic")->required();
  white->add_option("--dark", a.dark, "Dark frame (default: zero)");
  white->add_option("--clip-max", a.clip_max, "Upper clamp of the corrected value");
  white->add_option("--pattern", a.pattern, "Pattern JSON for PGM inputs");
  white->add_option("--out", a.out, "Output mosaic (.raw)")->required();
  white->callback([&] {
    print_config("calib white", {{"raw", a.raw}, {"white", a.white}, {"dark", a.dark}, {"clip_max", a.clip_max},
                                 {"out", a.out}, {"seed", seed}});
    const MosaicPattern pattern = pattern_for(a.pattern.empty() ? std::nullopt : std::optional(a.pattern));
    std::optional<MosaicImage> dark;
    if (!a.dark.empty()) dark = io::read_mosaic_any(a.dark, pattern);
    WhiteCorrectOptions opts;
    opts.clip_max = a.clip_max;
    const WhiteCorrectResult r =
        white_correct(io::read_mosaic_any(a.raw, pattern), io::read_mosaic_any(a.white, pattern), dark, opts);
    if (r.degenerate_pixels > 0) {
      std::cerr << fmt::format("warning: {} degenerate white pixel(s) set to 0\n", r.degenerate_pixels);
    }
    io::write_mosaic(r.image, a.out);
  });

  auto* xt = calib->add_subcommand("crosstalk", "Undo linear spectral crosstalk in a cube");
  xt->add_option("--in", a.in, "Input cube (.raw)")->required();
  xt->add_option("--matrix", a.matrix, "Crosstalk matrix JSON")->required();
  xt->add_option("--out", a.out, "Output cube (.raw)")->required();
  xt->callback([&] {
    print_config("calib crosstalk", {{"in", a.in}, {"matrix", a.matrix}, {"out", a.out}, {"seed", seed}});
    io::write_cube(crosstalk_correct(io::read_cube(a.in), CrosstalkMatrix::from_json(io::read_json(a.matrix))), a.out);
  });

  auto* smooth = calib->add_subcommand("smooth", "Gaussian smoothing of every band of a cube");
  smooth->add_option("--in", a.in, "Input cube (.raw)")->required();
  smooth->add_option("--sigma", a.sigma, "Gaussian sigma in pixels");
  smooth->add_option("--out", a.out, "Output cube (.raw)")->required();
  smooth->callback([&] {
    print_config("calib smooth", {{"in", a.in}, {"sigma", a.sigma}, {"out", a.out}, {"seed", seed}});
    io::write_cube(gaussian_smooth(io::read_cube(a.in), a.sigma), a.out);
  });
}

// ---------------------------------------------------------------------------
// demosaic

struct DemosaicArgs {
  std::string method = "bilinear", checkpoint, in, out, pattern;
  int tile = 256;
};

void add_demosaic(CLI::App& app, DemosaicArgs& a, const std::uint64_t& seed) {
  auto* cmd = app.add_subcommand("demosaic", "Reconstruct a 16-band cube from a mosaic");
  cmd->add_option("--method", a.method, "bilinear|bicubic|intdiff|net")
      ->check(CLI::IsMember({"bilinear", "bicubic", "intdiff", "net"}));
  cmd->add_option("--checkpoint", a.checkpoint, "Network checkpoint (method net)");
  cmd->add_option("--in", a.in, "Input mosaic (.raw or .pgm)")->required();
  cmd->add_option("--out", a.out, "Output cube (.raw)")->required();
  cmd->add_option("--pattern", a.pattern, "Pattern JSON for PGM inputs");
  cmd->add_option("--tile", a.tile, "Tile size for network inference");
  cmd->callback([&] {
    print_config("demosaic", {{"method", a.method}, {"checkpoint", a.checkpoint}, {"in", a.in}, {"out", a.out},
                              {"tile", a.tile}, {"seed", seed}});
    const MosaicImage mi = io::read_mosaic_any(a.in, pattern_for(a.pattern.empty() ? std::nullopt : std::optional(a.pattern)));
    HyperCube cube;
    if (a.method == "net") {
      if (a.checkpoint.empty()) throw CLI::RequiredError("--checkpoint is required for --method net");
      cube = predict_cube(load_checkpoint(a.checkpoint), mi, a.tile);
    } else {
      DemosaicStats stats;
      const ClassicalMethod m = *parse_classical_method(a.method);
      if (m == ClassicalMethod::Bicubic) cube = demosaic_bicubic(mi, &stats);
      else if (m == ClassicalMethod::IntensityDifference) cube = demosaic_intensity_difference(mi, &stats);
      else cube = demosaic_bilinear(mi);
      if (stats.clamped_values > 0) std::cerr << fmt::format("note: {} negative value(s) clamped to 0\n", stats.clamped_values);
    }
    io::write_cube(cube, a.out);
  });
}

// ---------------------------------------------------------------------------
// train / eval

struct TrainArgs {
  std::string corpus, config, out, init;
  std::optional<int> epochs, filter_count, batch_size, checkpoint_interval;
  std::optional<double> lr, clip_norm;
  bool no_clip = false;
};

void add_train(CLI::App& app, TrainArgs& a, const std::uint64_t& seed) {
  auto* cmd = app.add_subcommand("train", "Train the demosaicing network on a corpus");
  cmd->add_option("--corpus", a.corpus, "Corpus manifest.json")->required();
  cmd->add_option("--config", a.config, "Training config JSON");
  cmd->add_option("--out", a.out, "Output directory for checkpoints and the loss log")->required();
  cmd->add_option("--epochs", a.epochs, "Maximum epochs");
  cmd->add_option("--filter-count", a.filter_count, "Deconvolution filters (32 or 128)");
  cmd->add_option("--batch-size", a.batch_size, "Mini-batch size");
  cmd->add_option("--checkpoint-interval", a.checkpoint_interval, "Save every N epochs (0 = final only)");
  cmd->add_option("--lr", a.lr, "Initial learning rate");
  cmd->add_option("--clip-norm", a.clip_norm, "Global gradient-norm clip");
  cmd->add_flag("--no-clip", a.no_clip, "Disable gradient clipping");
  cmd->add_option("--init", a.init, "Start from this checkpoint instead of a fresh init");
  cmd->callback([&, cmd] {
    TrainConfig cfg;
    if (!a.config.empty()) cfg = TrainConfig::from_json(io::read_json(a.config));
    if (cmd->get_parent()->get_option("--seed")->count() > 0 || a.config.empty()) cfg.seed = seed;
    if (a.epochs) cfg.max_epochs = *a.epochs;
    if (a.filter_count) cfg.filter_count = *a.filter_count;
    if (a.batch_size) cfg.batch_size = *a.batch_size;
    if (a.checkpoint_interval) cfg.checkpoint_interval = *a.checkpoint_interval;
    if (a.lr) cfg.lr_initial = *a.lr;
    if (a.clip_norm) cfg.clip_norm = *a.clip_norm;
    if (a.no_clip) cfg.clip_norm = 0.0;
    print_config("train", {{"corpus", a.corpus}, {"out", a.out}, {"train", cfg.to_json()}});
    cfg.validate();

    const PatchCorpus corpus = read_corpus(a.corpus);
    const auto train_set = corpus.select(Split::Train);
    const auto val_set = corpus.select(Split::Validation);
    ensure_dir(a.out);
    std::optional<ModelParams> initial;
    if (!a.init.empty()) initial = load_checkpoint(a.init, cfg.filter_count);

    TrainHooks hooks;
    hooks.on_epoch = [&](int epoch, const ModelParams& params, const LossRecord& rec) {
      std::cout << fmt::format("epoch {:5d}  lr {:.3e}  train {:.6e}  val {:.6e}\n", epoch, rec.lr, rec.train_mse,
                               rec.val_mse);
      if (cfg.checkpoint_interval > 0 && (epoch + 1) % cfg.checkpoint_interval == 0) {
        save_checkpoint(params, fs::path(a.out) / fmt::format("epoch_{:05d}.ckpt", epoch + 1));
      }
    };
    const TrainResult r = train(train_set, val_set, cfg, std::move(initial), hooks);
    save_checkpoint(r.best, fs::path(a.out) / "best.ckpt");
    save_checkpoint(r.last, fs::path(a.out) / "last.ckpt");
    r.log.write_csv(fs::path(a.out) / "loss_log.csv");
    io::write_json(cfg.to_json(), fs::path(a.out) / "config.json");
    std::cout << fmt::format("best epoch {} (loss {:.6e})\n", r.best_epoch, r.best_loss);
  });
}

struct EvalArgs {
  std::string corpus, checkpoint, out, split = "test";
  std::vector<std::string> baselines{"bilinear", "bicubic", "intdiff"};
};

void add_eval(CLI::App& app, EvalArgs& a, const std::uint64_t& seed) {
  auto* cmd = app.add_subcommand("eval", "Score the network and classical baselines on a corpus split");
  cmd->add_option("--corpus", a.corpus, "Corpus manifest.json")->required();
  cmd->add_option("--checkpoint", a.checkpoint, "Network checkpoint (omit to score baselines only)");
  cmd->add_option("--out", a.out, "Report JSON")->required();
  cmd->add_option("--split", a.split, "train|val|test");
  cmd->add_option("--baselines", a.baselines, "Classical methods to include");
  cmd->callback([&] {
    print_config("eval", {{"corpus", a.corpus}, {"checkpoint", a.checkpoint}, {"out", a.out}, {"split", a.split},
                          {"baselines", a.baselines}, {"seed", seed}});
    const PatchCorpus corpus = read_corpus(a.corpus);
    const auto pairs = corpus.select(parse_split(a.split));
    json report = {{"split", a.split}, {"patches", pairs.size()}, {"methods", json::array()}};
    std::vector<std::pair<std::string, double>> ranking;
    if (!a.checkpoint.empty()) {
      const ModelParams params = load_checkpoint(a.checkpoint);
      const MetricsReport r = evaluate_split(&params, std::nullopt, pairs);
      report["methods"].push_back(r.to_json());
      ranking.emplace_back(r.method, r.mean_psnr);
    }
    for (const std::string& name : a.baselines) {
      const auto m = parse_classical_method(name);
      if (!m) throw CLI::ValidationError("--baselines", "unknown method '" + name + "'");
      const MetricsReport r = evaluate_split(nullptr, m, pairs);
      report["methods"].push_back(r.to_json());
      ranking.emplace_back(r.method, r.mean_psnr);
    }
    std::stable_sort(ranking.begin(), ranking.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    json order = json::array();
    for (const auto& [name, psnr] : ranking) {
      order.push_back(name);
      std::cout << fmt::format("{:10s} PSNR {:.3f} dB\n", name, psnr);
    }
    report["psnr_ranking"] = order;
    io::write_json(report, a.out);
  });
}

// ---------------------------------------------------------------------------
// render

struct RenderArgs {
  std::string in, out;
  int band = 0;
};

void add_render(CLI::App& app, RenderArgs& a, const std::uint64_t& seed) {
  auto* cmd = app.add_subcommand("render", "Visualize a cube");
  cmd->require_subcommand(1);
  auto* rgb = cmd->add_subcommand("rgb", "sRGB rendering under D65 (8-bit PNG)");
  rgb->add_option("--in", a.in, "Input cube (.raw)")->required();
  rgb->add_option("--out", a.out, "Output PNG")->required();
  rgb->callback([&] {
    print_config("render rgb", {{"in", a.in}, {"out", a.out}, {"seed", seed}});
    write_png(cube_to_rgb(io::read_cube(a.in)), a.out);
  });
  auto* band = cmd->add_subcommand("band", "One band as a 16-bit PGM");
  band->add_option("--in", a.in, "Input cube (.raw)")->required();
  band->add_option("--band", a.band, "Band index");
  band->add_option("--out", a.out, "Output PGM")->required();
  band->callback([&] {
    print_config("render band", {{"in", a.in}, {"band", a.band}, {"out", a.out}, {"seed", seed}});
    write_band_pgm(io::read_cube(a.in), a.band, a.out);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperspectral 4x4 snapshot-mosaic demosaicing toolkit"};
  app.require_subcommand(1);
  std::uint64_t seed = 42;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

  DatasetArgs dataset_args;
  CalibArgs calib_args;
  DemosaicArgs demosaic_args;
  TrainArgs train_args;
  EvalArgs eval_args;
  RenderArgs render_args;
  add_dataset(app, dataset_args, seed);
  add_calib(app, calib_args, seed);
  add_demosaic(app, demosaic_args, seed);
  add_train(app, train_args, seed);
  add_eval(app, eval_args, seed);
  add_render(app, render_args, seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? kExitNumerical : kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
