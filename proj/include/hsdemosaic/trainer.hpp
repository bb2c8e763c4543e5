#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsdemosaic/classical.hpp"
#include "hsdemosaic/dataset.hpp"
#include "hsdemosaic/metrics.hpp"
#include "hsdemosaic/model.hpp"

namespace hsd {

enum class SelectionMode { Validation, Training };

struct TrainConfig {
  double lr_initial = 1e-3;
  double lr_floor = 1e-4;
  /// Epoch at which the geometric decay reaches lr_floor.
  int decay_epochs = 30000;
  int max_epochs = 30000;
  int batch_size = 20;
  std::uint64_t seed = 42;
  /// Write a checkpoint every N epochs (0 = only the final ones).
  int checkpoint_interval = 0;
  int patch_size = 100;
  int filter_count = 128;
  /// Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 10.0;
  SelectionMode selection = SelectionMode::Validation;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j, const TrainConfig& base);
  static TrainConfig from_json(const nlohmann::json& j);
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One Adam update over parallel lists of parameter and gradient tensors.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state, double lr);
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr);

/// lr_initial * r^epoch with r = (lr_floor / lr_initial)^(1 / decay_epochs),
/// held at lr_floor from decay_epochs on.
double lr_schedule(int epoch, const TrainConfig& cfg);

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_gradients(ModelParams& grads, double max_norm);

struct LossRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_mse = 0.0;
  /// NaN when there is no validation split.
  double val_mse = 0.0;
};

struct LossLog {
  std::vector<LossRecord> records;

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
  ModelParams best;
  ModelParams last;
  int best_epoch = 0;
  double best_loss = 0.0;
  LossLog log;
};

struct TrainHooks {
  /// Called after every epoch with the current parameters.
  std::function<void(int epoch, const ModelParams&, const LossRecord&)> on_epoch;
};

/// Mean MSE of the network over `pairs`, evaluated in batches.
double dataset_mse(const ModelParams& params, std::span<const PatchPair* const> pairs, int batch_size);

TrainResult train(std::span<const PatchPair* const> train_set, std::span<const PatchPair* const> val_set,
                  const TrainConfig& cfg, std::optional<ModelParams> initial = std::nullopt,
                  const TrainHooks& hooks = {});

/// Network metrics (per-band PSNR/SSIM) over a test set.
MetricsReport evaluate(const ModelParams& params, std::span<const PatchPair* const> test_set);

/// The same report for a classical demosaicer.
MetricsReport evaluate_classical(ClassicalMethod method, std::span<const PatchPair* const> test_set);

}  // namespace hsd
