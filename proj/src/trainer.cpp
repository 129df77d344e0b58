#include "emi/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "emi/schedule.hpp"

namespace emi {

namespace {

constexpr std::size_t kEvalBatch = 32;

Tensor<float> forward(Tape<float>& tape, const Model& model, std::span<const Sample* const> batch,
                      const std::vector<Mask>& dropped, bool training, Rng& rng) {
  if (model.stage == Stage::unimodal) {
    return forward_unimodal(tape, model, model.config.modalities.front(), batch, training, rng);
  }
  return forward_fusion(tape, model, batch, dropped, training, rng);
}

Matrix<float> batch_targets(std::span<const Sample* const> batch) {
  Matrix<float> out(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(kNumEmotions));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch[i]->labels) throw DataError("sample " + batch[i]->id + " has no labels");
    out.row(static_cast<Eigen::Index>(i)) = *batch[i]->labels;
  }
  return out;
}

std::vector<Matrix<float>> snapshot(const ParameterList<float>& params) {
  std::vector<Matrix<float>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor.value());
  return out;
}

void restore(const ParameterList<float>& params, const std::vector<Matrix<float>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<float> handle = params[i].tensor;
    handle.mutable_value() = values[i];
  }
}

SampleRefs with_modality(const SampleRefs& samples, Modality m) {
  if (m == Modality::text) return samples;
  SampleRefs out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out), [m](const Sample* s) { return s->has(m); });
  return out;
}

TrainResult run_stage(Model model, AdamW<float> optimizer, const SampleRefs& train, const SampleRefs& valid,
                      const TrainConfig& cfg, std::size_t max_epochs, const std::string& stage,
                      const TrainHooks& hooks) {
  if (train.size() < 2) throw ContractError("stage " + stage + ": need at least 2 training samples");
  if (valid.size() < 2) throw ContractError("stage " + stage + ": need at least 2 validation samples");
  Rng shuffle = make_stream(cfg.seed, "shuffle/" + stage);
  Rng dropout = make_stream(cfg.seed, "dropout/" + stage);
  Rng modality_dropout = make_stream(cfg.seed, "modality_dropout/" + stage);
  PlateauScheduler scheduler(cfg.scheduler_factor, cfg.scheduler_patience, cfg.min_lr);
  EarlyStopping stopper(cfg.early_stop_patience);

  const auto params = model.parameters();
  auto best = snapshot(params);
  TrainResult result;
  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord record;
    record.epoch = epoch;
    record.stage = stage;
    for (const auto& g : optimizer.groups()) record.lrs.emplace_back(g.name, g.lr);

    record.train_loss = train_epoch(model, optimizer, train, cfg, shuffle, dropout, modality_dropout);
    record.valid = evaluate(model, valid, cfg.clamp);
    const double metric = record.valid.mean_pearson;
    if (!std::isfinite(metric)) throw NumericError("stage " + stage + ": validation metric is not finite");

    std::vector<double> lrs;
    for (const auto& g : optimizer.groups()) lrs.push_back(g.lr);
    scheduler.step(metric, lrs);
    for (std::size_t i = 0; i < lrs.size(); ++i) optimizer.set_lr(i, lrs[i]);

    if (stopper.update(metric)) best = snapshot(params);
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (hooks.on_epoch) hooks.on_epoch(record);
    result.history.push_back(std::move(record));
    if (stopper.should_stop()) break;
  }
  restore(params, best);
  result.best_epoch = stopper.best_epoch();
  result.best_valid = stopper.best();
  result.rng_state = serialize_state(shuffle);
  result.model = std::move(model);
  return result;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(encoder_lr_multiplier >= 0) || !std::isfinite(encoder_lr_multiplier)) {
    throw ConfigError("encoder_lr_multiplier must be non-negative");
  }
  if (!(modality_dropout >= 0 && modality_dropout < 1)) throw ConfigError("modality_dropout must lie in [0, 1)");
  if (!(scheduler_factor > 0 && scheduler_factor < 1)) throw ConfigError("scheduler_factor must lie in (0, 1)");
  if (!(min_lr >= 0)) throw ConfigError("min_lr must be non-negative");
  if (!(adamw.clip_norm >= 0)) throw ConfigError("clip_norm must be non-negative");
  if (epochs == 0 || motion_epochs == 0 || fusion_epochs == 0) throw ConfigError("epoch caps must be positive");
  loss.validate();
}

std::string to_json_line(const EpochRecord& record) {
  nlohmann::ordered_json j;
  j["epoch"] = record.epoch;
  j["stage"] = record.stage;
  j["train_loss"] = record.train_loss;
  j["val_rbar"] = record.valid.mean_pearson;
  j["val_r"] = record.valid.pearson;
  nlohmann::ordered_json lrs = nlohmann::ordered_json::object();
  for (const auto& [name, lr] : record.lrs) lrs[name] = lr;
  j["lr"] = lrs;
  j["seconds"] = record.seconds;
  return j.dump();
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  if (out.size() >= 2 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

AdamW<float> make_unimodal_optimizer(const Model& model, const TrainConfig& cfg) {
  OptimGroup<float> group{"unimodal", cfg.lr, {}};
  for (const auto& p : model.parameters()) group.params.push_back(p.tensor);
  return AdamW<float>({std::move(group)}, cfg.adamw);
}

AdamW<float> make_fusion_optimizer(const Model& model, const TrainConfig& cfg) {
  if (model.stage != Stage::fusion) throw ContractError("make_fusion_optimizer: model is not a fusion bundle");
  OptimGroup<float> fusion{"fusion", cfg.lr, {}};
  OptimGroup<float> encoders{"encoders", cfg.lr * cfg.encoder_lr_multiplier, {}};
  for (const auto& p : model.parameters()) {
    switch (p.group) {
      case ParamGroup::fusion: fusion.params.push_back(p.tensor); break;
      case ParamGroup::encoder: encoders.params.push_back(p.tensor); break;
      case ParamGroup::head: break;
    }
  }
  return AdamW<float>({std::move(fusion), std::move(encoders)}, cfg.adamw);
}

double train_epoch(const Model& model, AdamW<float>& optimizer, const SampleRefs& train, const TrainConfig& cfg,
                   Rng& shuffle, Rng& dropout, Rng& modality_dropout) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), shuffle);
  const bool drop_modalities = model.stage == Stage::fusion && cfg.modality_dropout > 0;
  const std::size_t modality_count = model.config.modalities.size();

  double total = 0;
  for (const auto& indices : make_batches(order, cfg.batch_size)) {
    SampleRefs batch;
    for (std::size_t i : indices) batch.push_back(train[i]);
    std::vector<Mask> dropped;
    if (drop_modalities) {
      for (std::size_t i = 0; i < batch.size(); ++i) {
        dropped.push_back(modality_drop_mask(modality_count, cfg.modality_dropout, modality_dropout));
      }
    }
    optimizer.zero_grad();
    Tape<float> tape;
    Tensor<float> pred = forward(tape, model, batch, dropped, true, dropout);
    Tensor<float> loss = combined_loss(tape, pred, batch_targets(batch), cfg.loss);
    const double value = loss.item();
    if (!std::isfinite(value)) throw NumericError("training loss is not finite");
    tape.backward(loss);
    optimizer.step();
    total += value * static_cast<double>(batch.size());
  }
  return total / static_cast<double>(train.size());
}

Eigen::MatrixXd predict(const Model& model, const SampleRefs& samples, bool clamp) {
  if (samples.empty()) throw ContractError("predict: empty split");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(kNumEmotions));
  Rng unused = make_stream(0, "eval");
  for (std::size_t start = 0; start < samples.size(); start += kEvalBatch) {
    const std::size_t count = std::min(kEvalBatch, samples.size() - start);
    std::span<const Sample* const> batch(samples.data() + start, count);
    Tape<float> tape(Tape<float>::Mode::inference);
    const Tensor<float> pred = forward(tape, model, batch, {}, false, unused);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) = pred.value().cast<double>();
  }
  if (!out.allFinite()) throw NumericError("predictions are not finite");
  if (clamp) out = out.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

Eigen::MatrixXd label_matrix(const SampleRefs& samples) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(kNumEmotions));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i]->labels) throw DataError("sample " + samples[i]->id + " has no labels");
    out.row(static_cast<Eigen::Index>(i)) = samples[i]->labels->cast<double>();
  }
  return out;
}

MetricsReport evaluate(const Model& model, const SampleRefs& samples, bool clamp) {
  if (samples.empty()) throw ContractError("evaluate: empty split");
  const Eigen::MatrixXd targets = label_matrix(samples);
  return average_pearson(predict(model, samples, clamp), targets);
}

TrainResult train_unimodal(Modality modality, const ModelConfig& model_cfg, const SampleRefs& train,
                           const SampleRefs& valid, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  Model model = make_unimodal_bundle<float>(model_cfg, modality);
  init_parameters(model, cfg.seed);
  AdamW<float> optimizer = make_unimodal_optimizer(model, cfg);
  return run_stage(std::move(model), std::move(optimizer), with_modality(train, modality),
                   with_modality(valid, modality), cfg, cfg.epochs_for(modality), std::string(to_string(modality)),
                   hooks);
}

Model assemble_fusion_bundle(const ModelConfig& model_cfg, const std::map<Modality, const Model*>& stage1,
                             std::uint64_t seed) {
  Model out = make_fusion_bundle<float>(model_cfg);
  init_parameters(out, seed);
  const auto target = out.parameters();
  for (Modality m : model_cfg.modalities) {
    auto it = stage1.find(m);
    if (it == stage1.end() || !it->second) {
      throw ContractError("no stage-1 model for modality " + std::string(to_string(m)));
    }
    ParameterList<float> source;
    for (const auto& p : it->second->parameters()) {
      if (p.group == ParamGroup::encoder && p.name.starts_with(std::string(to_string(m)) + ".")) source.push_back(p);
    }
    std::size_t expected = 0;
    for (const auto& p : target) {
      if (p.group == ParamGroup::encoder && p.name.starts_with(std::string(to_string(m)) + ".")) ++expected;
    }
    const std::size_t copied = copy_parameters(source, target);
    if (copied != expected || source.size() != expected) {
      throw ContractError("stage-1 model for " + std::string(to_string(m)) + " provides " +
                          std::to_string(source.size()) + " encoder tensors, fusion expects " +
                          std::to_string(expected));
    }
  }
  return out;
}

TrainResult train_fusion(const Model& initial, const SampleRefs& train, const SampleRefs& valid, const TrainConfig& cfg,
                         const TrainHooks& hooks) {
  cfg.validate();
  if (initial.stage != Stage::fusion) throw ContractError("train_fusion: model is not a fusion bundle");
  Model model = clone(initial);
  AdamW<float> optimizer = make_fusion_optimizer(model, cfg);
  return run_stage(std::move(model), std::move(optimizer), train, valid, cfg, cfg.fusion_epochs, "fusion", hooks);
}

}  // namespace emi
