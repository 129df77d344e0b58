#include "emi/run_config.hpp"

#include <cstdio>

#include "emi/errors.hpp"

namespace emi {

namespace {

std::size_t get_count(const KvDocument& doc, std::string_view section, std::string_view key, std::size_t fallback) {
  const long long v = doc.get_int(section, key, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError("[" + std::string(section) + "] " + std::string(key) + " must be non-negative");
  return static_cast<std::size_t>(v);
}

std::string count_text(std::size_t v) { return std::to_string(v); }

}  // namespace

RunConfig RunConfig::from_document(const KvDocument& doc) {
  for (const auto& s : doc.sections()) {
    if (s != "data" && s != "model" && s != "training" && s != "synth") {
      throw ConfigError("unknown config section [" + s + "]");
    }
  }
  doc.expect_keys("data", {"manifest", "modalities", "split", "split_seed", "target_train", "output_dir"});
  doc.expect_keys("model", {"text_dim", "audio_dim", "vision_dim", "motion_dim", "hidden_dim", "motion_hidden_dim",
                            "fusion_hidden_dim", "dropout", "layer_norm_eps"});
  doc.expect_keys("training", {"batch_size", "learning_rate", "weight_decay", "clip_norm", "beta1", "beta2",
                               "adam_eps", "epochs", "motion_epochs", "fusion_epochs", "early_stop_patience",
                               "scheduler_factor", "scheduler_patience", "min_lr", "loss_alpha", "ccc_epsilon",
                               "modality_dropout", "encoder_lr_multiplier", "seed", "clamp"});
  RunConfig c;
  auto& d = c.data;
  d.manifest = doc.get_string("data", "manifest", d.manifest);
  c.model.modalities = parse_modality_list(doc.get_string("data", "modalities", join_modalities(c.model.modalities)));
  d.split = doc.get_string("data", "split", d.split);
  d.split_seed = get_count(doc, "data", "split_seed", d.split_seed);
  d.target_train = get_count(doc, "data", "target_train", d.target_train);
  d.output_dir = doc.get_string("data", "output_dir", d.output_dir);

  auto& m = c.model;
  m.input.text = get_count(doc, "model", "text_dim", m.input.text);
  m.input.audio = get_count(doc, "model", "audio_dim", m.input.audio);
  m.input.vision = get_count(doc, "model", "vision_dim", m.input.vision);
  m.input.motion = get_count(doc, "model", "motion_dim", m.input.motion);
  m.hidden_dim = get_count(doc, "model", "hidden_dim", m.hidden_dim);
  m.motion_hidden_dim = get_count(doc, "model", "motion_hidden_dim", m.motion_hidden_dim);
  m.fusion_hidden_dim = get_count(doc, "model", "fusion_hidden_dim", m.fusion_hidden_dim);
  m.dropout = doc.get_double("model", "dropout", m.dropout);
  m.layer_norm_eps = doc.get_double("model", "layer_norm_eps", m.layer_norm_eps);

  auto& t = c.training;
  t.batch_size = get_count(doc, "training", "batch_size", t.batch_size);
  t.lr = doc.get_double("training", "learning_rate", t.lr);
  t.adamw.weight_decay = doc.get_double("training", "weight_decay", t.adamw.weight_decay);
  t.adamw.clip_norm = doc.get_double("training", "clip_norm", t.adamw.clip_norm);
  t.adamw.beta1 = doc.get_double("training", "beta1", t.adamw.beta1);
  t.adamw.beta2 = doc.get_double("training", "beta2", t.adamw.beta2);
  t.adamw.eps = doc.get_double("training", "adam_eps", t.adamw.eps);
  t.epochs = get_count(doc, "training", "epochs", t.epochs);
  t.motion_epochs = get_count(doc, "training", "motion_epochs", t.motion_epochs);
  t.fusion_epochs = get_count(doc, "training", "fusion_epochs", t.fusion_epochs);
  t.early_stop_patience = get_count(doc, "training", "early_stop_patience", t.early_stop_patience);
  t.scheduler_factor = doc.get_double("training", "scheduler_factor", t.scheduler_factor);
  t.scheduler_patience = get_count(doc, "training", "scheduler_patience", t.scheduler_patience);
  t.min_lr = doc.get_double("training", "min_lr", t.min_lr);
  t.loss.alpha = doc.get_double("training", "loss_alpha", t.loss.alpha);
  t.loss.epsilon = doc.get_double("training", "ccc_epsilon", t.loss.epsilon);
  t.modality_dropout = doc.get_double("training", "modality_dropout", t.modality_dropout);
  t.encoder_lr_multiplier = doc.get_double("training", "encoder_lr_multiplier", t.encoder_lr_multiplier);
  t.seed = get_count(doc, "training", "seed", t.seed);
  t.clamp = doc.get_bool("training", "clamp", t.clamp);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_document(KvDocument::load(path)); }

KvDocument RunConfig::to_document() const {
  KvDocument doc;
  doc.set("data", "manifest", data.manifest);
  doc.set("data", "modalities", join_modalities(model.modalities));
  doc.set("data", "split", data.split);
  doc.set("data", "split_seed", count_text(data.split_seed));
  doc.set("data", "target_train", count_text(data.target_train));
  doc.set("data", "output_dir", data.output_dir);

  doc.set("model", "text_dim", count_text(model.input.text));
  doc.set("model", "audio_dim", count_text(model.input.audio));
  doc.set("model", "vision_dim", count_text(model.input.vision));
  doc.set("model", "motion_dim", count_text(model.input.motion));
  doc.set("model", "hidden_dim", count_text(model.hidden_dim));
  doc.set("model", "motion_hidden_dim", count_text(model.motion_hidden_dim));
  doc.set("model", "fusion_hidden_dim", count_text(model.fusion_hidden_dim));
  doc.set("model", "dropout", format_double(model.dropout));
  doc.set("model", "layer_norm_eps", format_double(model.layer_norm_eps));

  const auto& t = training;
  doc.set("training", "batch_size", count_text(t.batch_size));
  doc.set("training", "learning_rate", format_double(t.lr));
  doc.set("training", "weight_decay", format_double(t.adamw.weight_decay));
  doc.set("training", "clip_norm", format_double(t.adamw.clip_norm));
  doc.set("training", "beta1", format_double(t.adamw.beta1));
  doc.set("training", "beta2", format_double(t.adamw.beta2));
  doc.set("training", "adam_eps", format_double(t.adamw.eps));
  doc.set("training", "epochs", count_text(t.epochs));
  doc.set("training", "motion_epochs", count_text(t.motion_epochs));
  doc.set("training", "fusion_epochs", count_text(t.fusion_epochs));
  doc.set("training", "early_stop_patience", count_text(t.early_stop_patience));
  doc.set("training", "scheduler_factor", format_double(t.scheduler_factor));
  doc.set("training", "scheduler_patience", count_text(t.scheduler_patience));
  doc.set("training", "min_lr", format_double(t.min_lr));
  doc.set("training", "loss_alpha", format_double(t.loss.alpha));
  doc.set("training", "ccc_epsilon", format_double(t.loss.epsilon));
  doc.set("training", "modality_dropout", format_double(t.modality_dropout));
  doc.set("training", "encoder_lr_multiplier", format_double(t.encoder_lr_multiplier));
  doc.set("training", "seed", count_text(t.seed));
  doc.set("training", "clamp", t.clamp ? "true" : "false");
  return doc;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(serialize())));
  return buf;
}

void RunConfig::validate() const {
  if (data.split != "2:1" && data.split != "4:1") {
    throw ConfigError("[data] split must be \"2:1\" or \"4:1\", got \"" + data.split + "\"");
  }
  if (model.modalities.empty()) throw ConfigError("[data] modalities must not be empty");
  for (Modality m : kAllModalities) {
    if (model.input.of(m) == 0) throw ConfigError("[model] " + std::string(to_string(m)) + "_dim must be positive");
  }
  if (model.hidden_dim == 0 || model.motion_hidden_dim == 0 || model.fusion_hidden_dim == 0) {
    throw ConfigError("[model] hidden dimensions must be positive");
  }
  if (!(model.dropout >= 0 && model.dropout < 1)) throw ConfigError("[model] dropout must lie in [0, 1)");
  if (!(model.layer_norm_eps > 0)) throw ConfigError("[model] layer_norm_eps must be positive");
  training.validate();
}

}  // namespace emi
