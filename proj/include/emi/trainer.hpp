#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "emi/loss.hpp"
#include "emi/metrics.hpp"
#include "emi/model.hpp"
#include "emi/optim.hpp"

namespace emi {

using Model = ModelBundle<float>;
using SampleRefs = std::vector<const Sample*>;

struct TrainConfig {
  std::size_t batch_size = 16;
  double lr = 2e-4;
  AdamWConfig adamw;
  LossConfig loss;
  std::size_t epochs = 50;          ///< unimodal cap for text, audio, vision
  std::size_t motion_epochs = 100;
  std::size_t fusion_epochs = 50;
  std::size_t early_stop_patience = 10;  ///< 0 disables
  double scheduler_factor = 0.5;
  std::size_t scheduler_patience = 5;
  double min_lr = 1e-7;
  double modality_dropout = 0.3;
  double encoder_lr_multiplier = 0.05;
  std::uint64_t seed = 42;
  bool clamp = false;  ///< clamp predictions to [0, 1] before validation metrics

  std::size_t epochs_for(Modality m) const { return m == Modality::motion ? motion_epochs : epochs; }
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string stage;
  double train_loss = 0;
  MetricsReport valid;
  std::vector<std::pair<std::string, double>> lrs;  ///< per optimizer group, as used this epoch
  double seconds = 0;
};

std::string to_json_line(const EpochRecord& record);

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Model model;  ///< parameters of the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_valid = 0;
  std::string rng_state;  ///< shuffle stream state when training ended
};

/// Splits [0, n) in `order` into batches of `batch_size`; a trailing batch of
/// one sample joins the previous batch.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch_size);

AdamW<float> make_unimodal_optimizer(const Model& model, const TrainConfig& cfg);

/// Two groups: "fusion" at the base rate and "encoders" at base * multiplier.
AdamW<float> make_fusion_optimizer(const Model& model, const TrainConfig& cfg);

/// Stage 1 for one modality. Training samples lacking the modality are skipped
/// (missing text is kept and encoded as the zero vector).
TrainResult train_unimodal(Modality modality, const ModelConfig& model_cfg, const SampleRefs& train,
                           const SampleRefs& valid, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Fusion bundle whose encoders are copied from the stage-1 models; the
/// regressor is freshly initialized.
Model assemble_fusion_bundle(const ModelConfig& model_cfg, const std::map<Modality, const Model*>& stage1,
                             std::uint64_t seed);

/// Stage 2: trains the fusion regressor and fine-tunes the encoders.
TrainResult train_fusion(const Model& initial, const SampleRefs& train, const SampleRefs& valid, const TrainConfig& cfg,
                         const TrainHooks& hooks = {});

/// Runs one training epoch in place and returns the mean loss.
double train_epoch(const Model& model, AdamW<float>& optimizer, const SampleRefs& train, const TrainConfig& cfg,
                   Rng& shuffle, Rng& dropout, Rng& modality_dropout);

/// Eval-mode predictions [N x 6], one row per sample in order.
Eigen::MatrixXd predict(const Model& model, const SampleRefs& samples, bool clamp);

/// Eval-mode metrics on a labeled split.
MetricsReport evaluate(const Model& model, const SampleRefs& samples, bool clamp);

Eigen::MatrixXd label_matrix(const SampleRefs& samples);

}  // namespace emi
