#include "emi/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "emi/checkpoint.hpp"
#include "emi/eda.hpp"
#include "emi/split.hpp"
#include "emi/synthetic.hpp"

namespace emi {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

const std::string& require_manifest(const RunConfig& cfg) {
  if (cfg.data.manifest.empty()) throw ConfigError("no manifest given (use --manifest or [data] manifest)");
  return cfg.data.manifest;
}

SampleRefs split_by_name(const Dataset& ds, const RunConfig& cfg, const std::string& name) {
  if (name == "test") return ds.split(SplitTag::test);
  const SplitRefs refs = resolve_split(ds, cfg.data);
  if (name == "train") return refs.train;
  if (name == "valid") return refs.valid;
  throw ConfigError("unknown split '" + name + "' (expected train, valid or test)");
}

SampleRefs usable_by(const Model& model, const SampleRefs& samples) {
  if (model.stage == Stage::fusion) return samples;
  const Modality m = model.config.modalities.front();
  if (m == Modality::text) return samples;
  SampleRefs out;
  for (const Sample* s : samples) {
    if (s->has(m)) out.push_back(s);
  }
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

class JsonLinesLog {
 public:
  explicit JsonLinesLog(const fs::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw DataError("cannot write log " + path.string());
  }
  void operator()(const EpochRecord& record) { out_ << to_json_line(record) << '\n' << std::flush; }

 private:
  std::ofstream out_;
};

CheckpointMeta meta_of(const TrainResult& r, const RunConfig& cfg) {
  return {cfg.hash(), r.rng_state, r.best_epoch, r.best_valid};
}

}  // namespace

RunConfig resolve_config(const CommandOptions& options) {
  KvDocument doc = options.config ? KvDocument::load(*options.config) : KvDocument{};
  if (options.manifest) doc.set("data", "manifest", *options.manifest);
  if (options.modalities) doc.set("data", "modalities", *options.modalities);
  if (options.out) doc.set("data", "output_dir", *options.out);
  if (options.seed) doc.set("training", "seed", std::to_string(*options.seed));
  if (options.clamp) doc.set("training", "clamp", "true");
  return RunConfig::from_document(doc);
}

SplitRefs resolve_split(const Dataset& dataset, const DataConfig& data) {
  SplitPlan plan = plan_from_manifest(dataset.manifest);
  if (data.split == "4:1") {
    const std::size_t target = data.target_train ? data.target_train : four_to_one_target(plan);
    plan = expand_split(plan, target, data.split_seed);
  }
  return {dataset.select(plan.train_ids), dataset.select(plan.valid_ids)};
}

fs::path stage1_checkpoint_path(const fs::path& out_dir, Modality m) {
  return out_dir / ("stage1_" + std::string(to_string(m)) + ".ckpt");
}

fs::path fusion_checkpoint_path(const fs::path& out_dir) { return out_dir / "fusion.ckpt"; }

void cmd_eda(const CommandOptions& options, std::ostream& out) {
  const RunConfig cfg = resolve_config(options);
  const Dataset ds = load_dataset(require_manifest(cfg), cfg.model.input);
  const auto train = ds.split(SplitTag::train);
  const auto valid = ds.split(SplitTag::valid);
  std::vector<SplitSummary> summaries{summarize_split(train, "train"), summarize_split(valid, "valid")};
  const ShiftReport shift = shift_report(train, valid);

  const fs::path dir = cfg.data.output_dir;
  make_dirs(dir);
  write_text(dir / "eda_summary.txt", summary_table(summaries));
  write_text(dir / "eda_summary.csv", summary_csv(summaries));
  write_text(dir / "eda_shift.txt", shift_table(shift));
  write_text(dir / "eda_shift.csv", shift_csv(shift));
  out << summary_table(summaries) << '\n' << shift_table(shift);
}

void cmd_synth(const CommandOptions& options, std::ostream& out) {
  const KvDocument doc = options.config ? KvDocument::load(*options.config) : KvDocument{};
  const SyntheticSpec spec = SyntheticSpec::from_document(doc);
  if (!options.out) throw ConfigError("synth needs --out");
  const auto corpus = generate_synthetic_corpus(spec, options.seed.value_or(42), *options.out);
  out << "wrote " << corpus.manifest.string() << ": " << corpus.train << " train, " << corpus.valid << " valid, "
      << corpus.test << " test, " << corpus.missing_text << " without text\n";
}

void cmd_train(const CommandOptions& options, std::ostream& out) {
  const RunConfig cfg = resolve_config(options);
  const auto& mods = cfg.model.modalities;
  std::vector<Modality> stage1;
  bool fusion = false;
  if (options.stage == "all") {
    stage1 = mods;
    fusion = true;
  } else if (options.stage == "fusion") {
    fusion = true;
  } else {
    const Modality m = parse_modality(options.stage);
    if (std::find(mods.begin(), mods.end(), m) == mods.end()) {
      throw ConfigError("stage " + options.stage + " is not in the configured modalities (" + join_modalities(mods) +
                        ")");
    }
    stage1 = {m};
  }

  const Dataset ds = load_dataset(require_manifest(cfg), cfg.model.input);
  const SplitRefs split = resolve_split(ds, cfg.data);
  const fs::path dir = cfg.data.output_dir;
  make_dirs(dir / "logs");
  write_text(dir / "config.toml", cfg.serialize());
  out << "train " << split.train.size() << ", valid " << split.valid.size() << " (" << cfg.data.split << ")\n";

  std::map<Modality, Model> trained;
  for (Modality m : stage1) {
    const fs::path path = stage1_checkpoint_path(dir, m);
    if (options.resume && fs::exists(path)) {
      trained.emplace(m, load_checkpoint(path).model);
      out << "stage1 " << to_string(m) << ": resumed from " << path.string() << '\n';
      continue;
    }
    JsonLinesLog log(dir / "logs" / (std::string(to_string(m)) + ".jsonl"));
    TrainResult r = train_unimodal(m, cfg.model, split.train, split.valid, cfg.training, {std::ref(log)});
    save_checkpoint(path, r.model, meta_of(r, cfg));
    out << "stage1 " << to_string(m) << ": best r=" << fmt("%.4f", r.best_valid) << " at epoch " << r.best_epoch
        << " -> " << path.string() << '\n';
    trained.emplace(m, std::move(r.model));
  }
  if (!fusion) return;

  std::map<Modality, const Model*> sources;
  for (Modality m : mods) {
    auto it = trained.find(m);
    if (it == trained.end()) {
      const fs::path path = stage1_checkpoint_path(dir, m);
      if (!fs::exists(path)) throw DataError("fusion needs stage-1 checkpoint " + path.string());
      it = trained.emplace(m, load_checkpoint(path).model).first;
    }
    sources[m] = &it->second;
  }
  const Model initial = assemble_fusion_bundle(cfg.model, sources, cfg.training.seed);
  JsonLinesLog log(dir / "logs" / "fusion.jsonl");
  TrainResult r = train_fusion(initial, split.train, split.valid, cfg.training, {std::ref(log)});
  const fs::path path = fusion_checkpoint_path(dir);
  save_checkpoint(path, r.model, meta_of(r, cfg));
  out << "fusion: best r=" << fmt("%.4f", r.best_valid) << " at epoch " << r.best_epoch << " -> " << path.string()
      << '\n';
}

MetricsReport cmd_evaluate(const CommandOptions& options, std::ostream& out) {
  if (!options.checkpoint) throw ConfigError("evaluate needs --checkpoint");
  RunConfig cfg = resolve_config(options);
  const Checkpoint ckpt = load_checkpoint(*options.checkpoint);
  const Dataset ds = load_dataset(require_manifest(cfg), ckpt.model.config.input);
  const std::string split = options.split.empty() ? "valid" : options.split;
  const SampleRefs samples = usable_by(ckpt.model, split_by_name(ds, cfg, split));
  const MetricsReport report = evaluate(ckpt.model, samples, cfg.training.clamp);

  out << "split " << split << " (" << report.count << " samples): mean r = " << fmt("%.4f", report.mean_pearson)
      << '\n';
  char line[128];
  std::snprintf(line, sizeof line, "%-14s %9s %9s\n", "dimension", "pearson", "ccc");
  out << line;
  for (std::size_t d = 0; d < kNumEmotions; ++d) {
    std::snprintf(line, sizeof line, "%-14s %9.4f %9.4f\n", std::string(kEmotionNames[d]).c_str(), report.pearson[d],
                  report.ccc[d]);
    out << line;
  }

  nlohmann::ordered_json j;
  j["checkpoint"] = *options.checkpoint;
  j["split"] = split;
  j["count"] = report.count;
  j["mean_pearson"] = report.mean_pearson;
  nlohmann::ordered_json per_dim = nlohmann::ordered_json::object();
  for (std::size_t d = 0; d < kNumEmotions; ++d) {
    per_dim[std::string(kEmotionNames[d])] = {{"pearson", report.pearson[d]}, {"ccc", report.ccc[d]}};
  }
  j["dimensions"] = per_dim;
  j["mse"] = report.mse;
  j["clamp"] = cfg.training.clamp;
  const fs::path dir = cfg.data.output_dir;
  make_dirs(dir);
  write_text(dir / ("eval_" + split + ".json"), j.dump(2) + "\n");
  return report;
}

void cmd_predict(const CommandOptions& options, std::ostream& out) {
  if (!options.checkpoint) throw ConfigError("predict needs --checkpoint");
  const RunConfig cfg = resolve_config(options);
  const Checkpoint ckpt = load_checkpoint(*options.checkpoint);
  const Dataset ds = load_dataset(require_manifest(cfg), ckpt.model.config.input);
  const std::string split = options.split.empty() ? "test" : options.split;
  const SampleRefs samples = split_by_name(ds, cfg, split);
  if (samples.empty()) throw DataError("split '" + split + "' has no samples");
  const Eigen::MatrixXd preds = predict(ckpt.model, samples, true);

  fs::path path = cfg.data.output_dir;
  if (path.extension() == ".csv") {
    if (path.has_parent_path()) make_dirs(path.parent_path());
  } else {
    make_dirs(path);
    path /= "predictions_" + split + ".csv";
  }
  std::string csv = "id";
  for (auto name : kEmotionNames) csv += "," + std::string(name);
  csv += "\n";
  char buf[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    csv += samples[i]->id;
    for (Eigen::Index d = 0; d < preds.cols(); ++d) {
      std::snprintf(buf, sizeof buf, ",%.6f", preds(static_cast<Eigen::Index>(i), d));
      csv += buf;
    }
    csv += "\n";
  }
  write_text(path, csv);
  out << "wrote " << samples.size() << " predictions to " << path.string() << '\n';
}

}  // namespace emi
