#include <doctest.h>

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "emi/synthetic.hpp"
#include "emi/trainer.hpp"
#include "support/oracles.hpp"

using namespace emi;

namespace {

ModelConfig small_model(const FeatureDims& dims) {
  ModelConfig cfg;
  cfg.input = dims;
  cfg.hidden_dim = 32;
  cfg.motion_hidden_dim = 16;
  cfg.fusion_hidden_dim = 32;
  return cfg;
}

struct Corpus {
  oracle::TempDir dir;
  Dataset ds;
  SampleRefs train, valid;

  Corpus(const std::string& tag, const SyntheticSpec& spec, std::uint64_t seed) : dir(tag) {
    generate_synthetic_corpus(spec, seed, dir.path());
    ds = load_dataset(dir.path() / "manifest.jsonl", spec.dims);
    train = ds.split(SplitTag::train);
    valid = ds.split(SplitTag::valid);
  }
};

SyntheticSpec small_spec(std::size_t n) {
  SyntheticSpec spec;
  spec.samples = n;
  spec.dims = FeatureDims{24, 20, 16, 6};
  spec.seq_median = 8;
  spec.seq_sigma = 0.3;
  return spec;
}

}  // namespace

TEST_CASE("make_batches") {
  std::vector<std::size_t> order(35);
  std::iota(order.begin(), order.end(), 0);
  auto b = make_batches(order, 16);
  REQUIRE(b.size() == 3);
  CHECK(b[0].size() == 16);
  CHECK(b[2].size() == 3);

  order.resize(33);
  b = make_batches(order, 16);
  REQUIRE(b.size() == 2);
  CHECK(b[1].size() == 17);
  CHECK(b[1].back() == 32);

  order.resize(32);
  b = make_batches(order, 16);
  CHECK(b.size() == 2);
  for (const auto& batch : b) CHECK(batch.size() >= 2);
}

TEST_CASE("optimizer groups and learning rates") {
  ModelConfig mc = small_model(FeatureDims{8, 8, 8, 4});
  TrainConfig cfg;
  Model uni = make_unimodal_bundle<float>(mc, Modality::audio);
  auto opt = make_unimodal_optimizer(uni, cfg);
  REQUIRE(opt.group_count() == 1);
  CHECK(opt.lr(0) == 2e-4);
  CHECK(opt.groups()[0].params.size() == uni.parameters().size());

  Model fusion = make_fusion_bundle<float>(mc);
  auto fopt = make_fusion_optimizer(fusion, cfg);
  REQUIRE(fopt.group_count() == 2);
  CHECK(fopt.groups()[0].name == "fusion");
  CHECK(fopt.lr(0) == 2e-4);
  CHECK(fopt.groups()[1].name == "encoders");
  CHECK(fopt.lr(1) == 0.05 * 2e-4);
  CHECK(fopt.lr(1) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(fopt.groups()[0].params.size() + fopt.groups()[1].params.size() == fusion.parameters().size());
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lr = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.modality_dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.loss.alpha = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(TrainConfig{}.epochs_for(Modality::motion) == 100);
  CHECK(TrainConfig{}.epochs_for(Modality::vision) == 50);
}

TEST_CASE("text branch overfits 32 noiseless samples") {
  SyntheticSpec spec = small_spec(32);
  spec.valid_fraction = 0.25;
  Corpus c("overfit", spec, 42);
  SampleRefs all = c.train;
  all.insert(all.end(), c.valid.begin(), c.valid.end());
  TrainConfig cfg;
  cfg.early_stop_patience = 0;
  cfg.epochs = 200;
  cfg.lr = 2e-3;
  const TrainResult r = train_unimodal(Modality::text, small_model(spec.dims), all, all, cfg);
  std::size_t reached = 0;
  for (const auto& e : r.history)
    if (!reached && e.valid.mean_pearson >= 0.95) reached = e.epoch;
  MESSAGE("reached 0.95 at epoch " << reached << ", best " << r.best_valid);
  CHECK(reached > 0);
  CHECK(r.history.size() == 200);
  // Best snapshot is the one restored.
  CHECK(evaluate(r.model, all, false).mean_pearson == doctest::Approx(r.best_valid).epsilon(1e-12));
}

TEST_CASE("a memorizing model scores near 1 on its own training split") {
  SyntheticSpec spec = small_spec(32);
  Corpus c("memorize", spec, 42);
  ModelConfig mc = small_model(spec.dims);
  mc.dropout = 0;
  TrainConfig cfg;
  cfg.early_stop_patience = 0;
  cfg.epochs = 300;
  cfg.lr = 2e-3;
  const TrainResult r = train_unimodal(Modality::text, mc, c.train, c.train, cfg);
  const MetricsReport rep = evaluate(r.model, c.train, false);
  MESSAGE("memorized r = " << rep.mean_pearson);
  CHECK(rep.mean_pearson >= 0.99);
}

TEST_CASE("early stopping ends at epoch 11 when the metric never improves") {
  Corpus c("stop", small_spec(48), 3);
  TrainConfig cfg;
  // Updates this small vanish in float arithmetic, so the metric is flat.
  cfg.lr = 1e-30;
  std::vector<std::size_t> seen;
  TrainHooks hooks{[&](const EpochRecord& e) { seen.push_back(e.epoch); }};
  const TrainResult r = train_unimodal(Modality::vision, small_model(small_spec(48).dims), c.train, c.valid, cfg, hooks);
  CHECK(r.history.size() == 11);
  CHECK(r.best_epoch == 1);
  CHECK(seen.size() == 11);
  CHECK(seen.back() == 11);
  for (std::size_t i = 1; i < r.history.size(); ++i)
    CHECK(r.history[i].valid.mean_pearson == r.history[0].valid.mean_pearson);
  // Plateau halves at epoch 6 and again at 11.
  CHECK(r.history[5].lrs.at(0).second == 1e-30);
  CHECK(r.history[6].lrs.at(0).second == doctest::Approx(0.5e-30));
}

TEST_CASE("training is deterministic per seed") {
  SyntheticSpec spec = small_spec(64);
  spec.plant(Modality::audio).snr = 1.0;
  Corpus c("det", spec, 7);
  TrainConfig cfg;
  cfg.epochs = 6;
  const auto mc = small_model(spec.dims);
  const TrainResult a = train_unimodal(Modality::audio, mc, c.train, c.valid, cfg);
  const TrainResult b = train_unimodal(Modality::audio, mc, c.train, c.valid, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(std::abs(a.history[i].train_loss - b.history[i].train_loss) <= 1e-7);
    CHECK(std::abs(a.history[i].valid.mean_pearson - b.history[i].valid.mean_pearson) <= 1e-7);
  }
  CHECK(a.rng_state == b.rng_state);
  cfg.seed = 43;
  const TrainResult d = train_unimodal(Modality::audio, mc, c.train, c.valid, cfg);
  CHECK(d.history[0].train_loss != a.history[0].train_loss);
}

TEST_CASE("motion branch skips samples without motion") {
  SyntheticSpec spec = small_spec(40);
  Corpus c("motion", spec, 9);
  SampleRefs train = c.train;
  std::vector<Sample> stripped;
  stripped.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); i += 3) {
    stripped.push_back(*train[i]);
    stripped.back().motion.reset();
    train[i] = &stripped.back();
  }
  TrainConfig cfg;
  cfg.epochs = cfg.motion_epochs = 2;
  CHECK_NOTHROW(train_unimodal(Modality::motion, small_model(spec.dims), train, c.valid, cfg));
}

TEST_CASE("evaluate: clamp no-op, clamping, empty split") {
  Corpus c("eval", small_spec(32), 4);
  const auto mc = small_model(small_spec(32).dims);
  Model m = make_unimodal_bundle<float>(mc, Modality::text);
  init_parameters(m, 1);
  const auto& head = m.heads.at(Modality::text);
  Tensor<float> w = head.weight, b = head.bias;
  w.mutable_value() *= 0.01f;
  b.mutable_value().setConstant(0.5f);

  const Eigen::MatrixXd raw = predict(m, c.valid, false);
  REQUIRE(raw.minCoeff() > 0.0);
  REQUIRE(raw.maxCoeff() < 1.0);
  const MetricsReport a = evaluate(m, c.valid, false), bb = evaluate(m, c.valid, true);
  CHECK(a.pearson == bb.pearson);
  CHECK(a.mse == bb.mse);

  b.mutable_value().setConstant(0.9f);
  w.mutable_value() *= 30.0f;
  const Eigen::MatrixXd wide = predict(m, c.valid, false);
  const Eigen::MatrixXd clamped = predict(m, c.valid, true);
  CHECK(wide.maxCoeff() > 1.0);
  CHECK((clamped - wide.cwiseMax(0.0).cwiseMin(1.0)).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS(evaluate(m, SampleRefs{}, false));
}

TEST_CASE("fusion assembly copies encoders and frozen encoders stay fixed") {
  SyntheticSpec spec = small_spec(48);
  Corpus c("fusion", spec, 12);
  const auto mc = small_model(spec.dims);
  TrainConfig cfg;
  cfg.epochs = 2;
  std::map<Modality, Model> stage1;
  for (Modality m : mc.modalities) stage1.emplace(m, train_unimodal(m, mc, c.train, c.valid, cfg).model);
  std::map<Modality, const Model*> refs;
  for (const auto& [m, model] : stage1) refs[m] = &model;
  const Model fused = assemble_fusion_bundle(mc, refs, 42);
  CHECK(fused.stage == Stage::fusion);
  CHECK(fused.heads.empty());
  std::map<std::string, Matrix<float>> stage1_values;
  for (const auto& [m, model] : stage1)
    for (const auto& p : model.parameters()) stage1_values[p.name] = p.tensor.value();
  for (const auto& p : fused.parameters()) {
    if (p.group != ParamGroup::encoder) continue;
    CHECK(p.tensor.value() == stage1_values.at(p.name));
  }

  std::map<Modality, const Model*> partial = {{Modality::text, &stage1.at(Modality::text)}};
  CHECK_THROWS(assemble_fusion_bundle(mc, partial, 42));

  cfg.fusion_epochs = 3;
  cfg.encoder_lr_multiplier = 0;
  const TrainResult r = train_fusion(fused, c.train, c.valid, cfg);
  CHECK(r.history.size() == 3);
  for (const auto& p : r.model.parameters()) {
    if (p.group == ParamGroup::encoder) CHECK(p.tensor.value() == stage1_values.at(p.name));
  }
  // train_fusion works on a copy.
  for (const auto& p : fused.parameters())
    if (p.group == ParamGroup::encoder) CHECK(p.tensor.value() == stage1_values.at(p.name));
}

TEST_CASE("epoch log line") {
  EpochRecord e;
  e.epoch = 3;
  e.stage = "fusion";
  e.train_loss = 0.25;
  e.valid.mean_pearson = 0.5;
  e.valid.pearson = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  e.lrs = {{"fusion", 2e-4}, {"encoders", 1e-5}};
  e.seconds = 1.5;
  const std::string line = to_json_line(e);
  CHECK(line.find('\n') == std::string::npos);
  const auto j = nlohmann::ordered_json::parse(line);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"epoch", "stage", "train_loss", "val_rbar", "val_r", "lr", "seconds"});
  REQUIRE(j["val_r"].size() == 6);
  CHECK(j["val_r"][3] == 0.4);
  CHECK(j["lr"]["encoders"] == 1e-5);
}

TEST_CASE("modality dropout does not catastrophically hurt (3-seed median)") {
  SyntheticSpec spec;
  spec.samples = 256;
  spec.seq_median = 8;
  spec.seq_sigma = 0.3;
  spec.with_motion = false;
  spec.plant(Modality::text) = {3.0, {0, 1, 2}, false};
  spec.plant(Modality::audio) = {3.0, {3, 4, 5}, false};
  spec.plant(Modality::vision) = {3.0, {}, false};
  std::vector<double> diffs;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    Corpus c("robust_" + std::to_string(seed), spec, seed);
    ModelConfig mc;
    TrainConfig cfg;
    cfg.seed = seed;
    std::map<Modality, Model> stage1;
    for (Modality m : mc.modalities) stage1.emplace(m, train_unimodal(m, mc, c.train, c.valid, cfg).model);
    std::map<Modality, const Model*> refs;
    for (const auto& [m, model] : stage1) refs[m] = &model;
    const Model fused = assemble_fusion_bundle(mc, refs, seed);
    const double on = train_fusion(fused, c.train, c.valid, cfg).best_valid;
    cfg.modality_dropout = 0;
    const double off = train_fusion(fused, c.train, c.valid, cfg).best_valid;
    MESSAGE("seed " << seed << ": dropout on " << on << ", off " << off);
    diffs.push_back(on - off);
  }
  std::sort(diffs.begin(), diffs.end());
  CHECK(diffs[1] >= -0.02);
}
