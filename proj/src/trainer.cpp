#include "hsdemosaic/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "hsdemosaic/classical.hpp"
#include "hsdemosaic/error.hpp"

namespace hsd {

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  if (!(lr_floor > 0.0) || !(lr_floor <= lr_initial)) {
    throw Error(ErrorCode::InvalidConfig, "need 0 < lr_floor <= lr_initial");
  }
  if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (decay_epochs < 1) throw Error(ErrorCode::InvalidConfig, "decay_epochs must be >= 1");
  if (max_epochs < 0) throw Error(ErrorCode::InvalidConfig, "max_epochs must be >= 0");
  if (checkpoint_interval < 0) throw Error(ErrorCode::InvalidConfig, "checkpoint_interval must be >= 0");
  if (filter_count != 32 && filter_count != 128) throw Error(ErrorCode::InvalidFilterCount, "filter_count must be 32 or 128");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr_initial", lr_initial},
          {"lr_floor", lr_floor},
          {"decay_epochs", decay_epochs},
          {"max_epochs", max_epochs},
          {"batch_size", batch_size},
          {"seed", seed},
          {"checkpoint_interval", checkpoint_interval},
          {"patch_size", patch_size},
          {"filter_count", filter_count},
          {"clip_norm", clip_norm},
          {"selection", selection == SelectionMode::Validation ? "validation" : "training"}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const nlohmann::json& j, const TrainConfig& base) {
  TrainConfig c = base;
  try {
    c.lr_initial = j.value("lr_initial", c.lr_initial);
    c.lr_floor = j.value("lr_floor", c.lr_floor);
    c.decay_epochs = j.value("decay_epochs", c.decay_epochs);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    c.patch_size = j.value("patch_size", c.patch_size);
    c.filter_count = j.value("filter_count", c.filter_count);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    if (j.contains("selection")) {
      const auto s = j.at("selection").get<std::string>();
      if (s == "validation") c.selection = SelectionMode::Validation;
      else if (s == "training") c.selection = SelectionMode::Training;
      else throw Error(ErrorCode::InvalidConfig, "selection must be 'validation' or 'training'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("train config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Optimizer

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state, double lr) {
  if (params.size() != grads.size()) throw Error(ErrorCode::ShapeMismatch, "adam: parameter/gradient count differs");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "adam: state does not match parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->shape() != grads[k]->shape() || state.m[k].size() != params[k]->size()) {
      throw Error(ErrorCode::ShapeMismatch, "adam: shape mismatch in tensor " + std::to_string(k));
    }
    check_finite(*grads[k], "adam gradient " + std::to_string(k), true);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->data();
    const auto g = grads[k]->data();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] = static_cast<float>(static_cast<double>(p[i]) - lr * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
  }
}

namespace {

std::vector<Tensor*> tensor_list(ModelParams& p) {
  std::vector<Tensor*> out;
  for_each_parameter(p, [&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<const Tensor*> tensor_list(const ModelParams& p) {
  std::vector<const Tensor*> out;
  for_each_parameter(p, [&](const std::string&, const Tensor& t) { out.push_back(&t); });
  return out;
}

}  // namespace

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
  const auto p = tensor_list(params);
  const auto g = tensor_list(grads);
  adam_step(std::span<Tensor* const>(p), std::span<const Tensor* const>(g), state, lr);
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch <= 0) return cfg.lr_initial;
  if (epoch >= cfg.decay_epochs) return cfg.lr_floor;
  const double ratio = std::log(cfg.lr_floor / cfg.lr_initial) / cfg.decay_epochs;
  return std::max(cfg.lr_floor, cfg.lr_initial * std::exp(ratio * epoch));
}

double clip_gradients(ModelParams& grads, double max_norm) {
  double sq = 0.0;
  for_each_parameter(grads, [&](const std::string&, const Tensor& t) {
    for (float v : t.data()) sq += static_cast<double>(v) * v;
  });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for_each_parameter(grads, [&](const std::string&, Tensor& t) {
      for (float& v : t.data()) v = static_cast<float>(v * scale);
    });
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Loss log

std::string LossLog::to_csv() const {
  std::string out = "epoch,lr,train_mse,val_mse\n";
  for (const auto& r : records) {
    out += fmt::format("{},{:.9g},{:.9g},{:.9g}\n", r.epoch, r.lr, r.train_mse, r.val_mse);
  }
  return out;
}

void LossLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << to_csv();
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Batch {
  Tensor input;
  Tensor target;
};

Batch make_batch(std::span<const PatchPair* const> pairs, std::span<const std::size_t> indices) {
  const PatchPair& first = *pairs[indices.front()];
  const int h = first.mosaic.height, w = first.mosaic.width, bands = first.truth.bands;
  const int n = static_cast<int>(indices.size());
  Batch b{Tensor({n, 1, h, w}), Tensor({n, bands, h, w})};
  const std::size_t in_stride = static_cast<std::size_t>(h) * w;
  const std::size_t out_stride = in_stride * static_cast<std::size_t>(bands);
  for (int s = 0; s < n; ++s) {
    const PatchPair& p = *pairs[indices[static_cast<std::size_t>(s)]];
    if (p.mosaic.height != h || p.mosaic.width != w || p.truth.width != w || p.truth.height != h || p.truth.bands != bands) {
      throw Error(ErrorCode::ShapeMismatch, "patches in a batch must share one size");
    }
    std::copy(p.mosaic.data.begin(), p.mosaic.data.end(), b.input.data().begin() + static_cast<std::ptrdiff_t>(s * in_stride));
    std::copy(p.truth.data.begin(), p.truth.data.end(), b.target.data().begin() + static_cast<std::ptrdiff_t>(s * out_stride));
  }
  return b;
}

// Deterministic Fisher-Yates; independent of std::shuffle's algorithm.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

double dataset_mse(const ModelParams& params, std::span<const PatchPair* const> pairs, int batch_size) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyDataset, "no patches to evaluate");
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0);
  double total = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(batch_size), idx.size() - start);
    const Batch b = make_batch(pairs, std::span<const std::size_t>(idx).subspan(start, count));
    total += mse_loss(forward(params, b.input), b.target) * static_cast<double>(count);
  }
  return total / static_cast<double>(pairs.size());
}

TrainResult train(std::span<const PatchPair* const> train_set, std::span<const PatchPair* const> val_set,
                  const TrainConfig& cfg, std::optional<ModelParams> initial, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  const MosaicPattern& pattern = train_set.front()->mosaic.pattern;
  ModelParams params = initial ? std::move(*initial) : init_params(cfg.seed, cfg.filter_count, pattern);
  if (params.filter_count != cfg.filter_count) {
    throw Error(ErrorCode::ShapeMismatch, "initial parameters have " + std::to_string(params.filter_count) + " filters");
  }
  const bool use_val = cfg.selection == SelectionMode::Validation && !val_set.empty();

  TrainResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  AdamState adam;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      const Batch b = make_batch(train_set, std::span<const std::size_t>(order).subspan(start, count));
      ForwardTrace<float> trace;
      const Tensor pred = forward(params, b.input, &trace);
      const double loss = mse_loss(pred, b.target);
      if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, fmt::format("epoch {}: loss is {}", epoch, loss));
      ModelParams grads = backward(params, trace, mse_backward(pred, b.target));
      const double norm = clip_gradients(grads, cfg.clip_norm);
      if (!std::isfinite(norm)) {
        throw Error(ErrorCode::NonFiniteGradient, fmt::format("epoch {}: gradient norm is {}", epoch, norm));
      }
      adam_step(params, grads, adam, lr);
      epoch_loss += loss * static_cast<double>(count);
    }
    LossRecord rec{epoch, lr, epoch_loss / static_cast<double>(order.size()),
                   val_set.empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : dataset_mse(params, val_set, cfg.batch_size)};
    const double selection_loss = use_val ? rec.val_mse : rec.train_mse;
    if (selection_loss < result.best_loss) {
      result.best_loss = selection_loss;
      result.best_epoch = epoch;
      result.best = params;
    }
    result.log.records.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(epoch, params, rec);
  }
  if (result.log.records.empty()) result.best = params;
  result.last = params;
  const nlohmann::json provenance = {{"config", cfg.to_json()},
                                     {"best_epoch", result.best_epoch},
                                     {"epochs_run", cfg.max_epochs},
                                     {"train_patches", train_set.size()},
                                     {"val_patches", val_set.size()}};
  result.best.provenance = provenance;
  result.last.provenance = provenance;
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

MetricsReport evaluate(const ModelParams& params, std::span<const PatchPair* const> test_set) {
  if (test_set.empty()) throw Error(ErrorCode::EmptyDataset, "test set is empty");
  MetricsReport report;
  report.method = "net";
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const PatchPair& p = *test_set[i];
    const Tensor pred = forward(params, to_tensor(p.mosaic));
    const HyperCube cube = to_cube(pred, 0, p.truth.wavelengths_nm);
    report.images.push_back(measure(fmt::format("{}@{},{}", p.source_id, p.x0, p.y0), cube, p.truth));
  }
  report.finalize();
  return report;
}

MetricsReport evaluate_classical(ClassicalMethod method, std::span<const PatchPair* const> test_set) {
  if (test_set.empty()) throw Error(ErrorCode::EmptyDataset, "test set is empty");
  MetricsReport report;
  switch (method) {
    case ClassicalMethod::Bilinear: report.method = "bilinear"; break;
    case ClassicalMethod::Bicubic: report.method = "bicubic"; break;
    case ClassicalMethod::IntensityDifference: report.method = "intdiff"; break;
  }
  for (const PatchPair* p : test_set) {
    report.images.push_back(measure(fmt::format("{}@{},{}", p->source_id, p->x0, p->y0), demosaic(p->mosaic, method), p->truth));
  }
  report.finalize();
  return report;
}

}  // namespace hsd
