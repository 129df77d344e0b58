#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "emi/dataset.hpp"
#include "emi/eda.hpp"
#include "emi/run_config.hpp"
#include "support/oracles.hpp"

using namespace emi;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run run(const std::string& args, const fs::path& scratch) {
  const fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = std::string(EMI_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream o(out), e(err);
  std::stringstream so, se;
  so << o.rdbuf();
  se << e.rdbuf();
  r.out = so.str();
  r.err = se.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kSynth = R"([synth]
samples = 48
test_samples = 3
text_dim = 12
audio_dim = 10
vision_dim = 8
motion_dim = 4
seq_median = 5
seq_sigma = 0.3
audio_snr = 2.0
)";

std::string run_config(const fs::path& manifest, const fs::path& out) {
  return "[data]\nmanifest = \"" + manifest.string() + "\"\nmodalities = \"text,audio,vision,motion\"\noutput_dir = \"" +
         out.string() +
         "\"\n\n[model]\ntext_dim = 12\naudio_dim = 10\nvision_dim = 8\nmotion_dim = 4\nhidden_dim = 16\n"
         "motion_hidden_dim = 8\nfusion_hidden_dim = 16\n\n[training]\nepochs = 3\nmotion_epochs = 3\n"
         "fusion_epochs = 3\n";
}

// Log lines without the wall-clock field.
std::vector<nlohmann::json> log_without_time(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    j.erase("seconds");
    out.push_back(j);
  }
  return out;
}

}  // namespace

TEST_CASE("run config: defaults, round trip, unknown keys") {
  const RunConfig d = RunConfig::from_document(KvDocument::parse(""));
  CHECK(d.training.batch_size == 16);
  CHECK(d.training.lr == 2e-4);
  CHECK(d.training.adamw.weight_decay == 1e-2);
  CHECK(d.training.adamw.clip_norm == 1.0);
  CHECK(d.training.seed == 42);
  CHECK(d.training.loss.alpha == 0.7);
  CHECK(d.training.encoder_lr_multiplier == 0.05);
  CHECK(d.training.modality_dropout == 0.3);
  CHECK(d.model.hidden_dim == 384);
  CHECK(d.model.motion_hidden_dim == 128);
  CHECK(d.model.dropout == 0.45);
  CHECK(d.data.split == "2:1");

  RunConfig c = d;
  c.data.manifest = "data/m.jsonl";
  c.data.split = "4:1";
  c.model.modalities = {Modality::text, Modality::motion};
  c.training.lr = 3.3e-5;
  c.training.encoder_lr_multiplier = 0.0;
  c.training.clamp = true;
  c.model.layer_norm_eps = 1e-6;
  const RunConfig back = RunConfig::from_document(KvDocument::parse(c.serialize()));
  CHECK(back == c);
  CHECK(back.training.lr == 3.3e-5);
  CHECK(back.model.modalities == c.model.modalities);
  CHECK(back.serialize() == c.serialize());
  CHECK(back.hash() == c.hash());
  CHECK(back.hash().size() == 16);
  CHECK(d.hash() != c.hash());

  CHECK_THROWS_AS(RunConfig::from_document(KvDocument::parse("[training]\nlearning_rat = 1\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_document(KvDocument::parse("[trainig]\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_document(KvDocument::parse("[training]\nbatch_size = many\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_document(KvDocument::parse("[data]\nsplit = \"3:1\"\n")), ConfigError);
  CHECK_THROWS_AS(KvDocument::parse("[training\n"), ConfigError);
}

TEST_CASE("cli: synth, eda, train, evaluate, predict") {
  oracle::TempDir dir("cli");
  const fs::path corpus = dir.path() / "corpus", out = dir.path() / "run";
  write(dir.path() / "synth.toml", kSynth);

  Run r = run("synth --config " + (dir.path() / "synth.toml").string() + " --seed 5 --out " + corpus.string(), dir.path());
  REQUIRE(r.code == 0);
  const fs::path manifest = corpus / "manifest.jsonl";
  REQUIRE(fs::exists(manifest));
  write(dir.path() / "run.toml", run_config(manifest, out));
  const std::string config = " --config " + (dir.path() / "run.toml").string();

  SUBCASE("eda reports match the library") {
    CHECK(run("eda --manifest " + manifest.string(), dir.path()).code == 3);
    r = run("eda" + config, dir.path());
    REQUIRE(r.code == 0);
    FeatureDims dims{12, 10, 8, 4};
    const Dataset ds = load_dataset(manifest, dims);
    const auto train = summarize_split(ds.split(SplitTag::train), "train");
    const auto valid = summarize_split(ds.split(SplitTag::valid), "valid");
    CHECK(slurp(out / "eda_summary.csv") == summary_csv({train, valid}));
    CHECK(slurp(out / "eda_shift.csv") == shift_csv(shift_report(ds.split(SplitTag::train), ds.split(SplitTag::valid))));
    CHECK(fs::exists(out / "eda_summary.txt"));
    CHECK(fs::exists(out / "eda_shift.txt"));
  }

  SUBCASE("eda fails clearly on missing labels") {
    write(corpus / "labels/valid.csv", "id,Admiration,Amusement,Determination,EmpathicPain,Excitement,Joy\n");
    r = run("eda" + config, dir.path());
    CHECK(r.code == 3);
    CHECK(r.err.find("valid") != std::string::npos);
  }

  SUBCASE("stage text writes one checkpoint and one log") {
    r = run("train --config " + (dir.path() / "run.toml").string() + " --stage text", dir.path());
    REQUIRE(r.code == 0);
    std::size_t ckpts = 0;
    for (const auto& e : fs::directory_iterator(out)) ckpts += e.path().extension() == ".ckpt";
    CHECK(ckpts == 1);
    CHECK(fs::exists(out / "stage1_text.ckpt"));
    CHECK(fs::exists(out / "logs/text.jsonl"));
    CHECK(log_without_time(out / "logs/text.jsonl").size() == 3);
  }

  SUBCASE("full run, determinism, evaluate, predict") {
    r = run("train --config " + (dir.path() / "run.toml").string(), dir.path());
    REQUIRE(r.code == 0);
    std::vector<std::string> ckpts;
    for (const auto& e : fs::directory_iterator(out))
      if (e.path().extension() == ".ckpt") ckpts.push_back(e.path().filename().string());
    std::sort(ckpts.begin(), ckpts.end());
    CHECK(ckpts == std::vector<std::string>{"fusion.ckpt", "stage1_audio.ckpt", "stage1_motion.ckpt", "stage1_text.ckpt",
                                            "stage1_vision.ckpt"});
    CHECK(RunConfig::load(out / "config.toml") == RunConfig::load(dir.path() / "run.toml"));

    const auto first = log_without_time(out / "logs/fusion.jsonl");
    const std::string fusion_bytes = slurp(out / "fusion.ckpt");
    r = run("train --config " + (dir.path() / "run.toml").string(), dir.path());
    REQUIRE(r.code == 0);
    const auto second = log_without_time(out / "logs/fusion.jsonl");
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
      CHECK(std::abs(first[i]["train_loss"].get<double>() - second[i]["train_loss"].get<double>()) <= 1e-7);
      CHECK(std::abs(first[i]["val_rbar"].get<double>() - second[i]["val_rbar"].get<double>()) <= 1e-7);
    }
    CHECK(slurp(out / "fusion.ckpt") == fusion_bytes);

    r = run("evaluate --config " + (dir.path() / "run.toml").string() + " --checkpoint " + (out / "fusion.ckpt").string(),
            dir.path());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("Admiration") != std::string::npos);
    std::ifstream ej(out / "eval_valid.json");
    const auto report = nlohmann::json::parse(ej);
    CHECK(report.contains("mean_pearson"));

    r = run("predict --config " + (dir.path() / "run.toml").string() + " --checkpoint " + (out / "fusion.ckpt").string(),
            dir.path());
    REQUIRE(r.code == 0);
    std::ifstream csv(out / "predictions_test.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "id,Admiration,Amusement,Determination,EmpathicPain,Excitement,Joy");
    const auto test_ids = read_manifest(manifest).ids(SplitTag::test);
    REQUIRE(test_ids.size() == 3);
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
      REQUIRE(rows < test_ids.size());
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');
      CHECK(cell == test_ids[rows]);
      int values = 0;
      while (std::getline(ss, cell, ',')) {
        const double v = std::stod(cell);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        ++values;
      }
      CHECK(values == 6);
      ++rows;
    }
    CHECK(rows == 3);

    // Resume reuses stage-1 checkpoints and reproduces the fusion stage.
    r = run("train --config " + (dir.path() / "run.toml").string() + " --resume", dir.path());
    REQUIRE(r.code == 0);
    CHECK(slurp(out / "fusion.ckpt") == fusion_bytes);
  }
}

TEST_CASE("cli: exit codes") {
  oracle::TempDir dir("codes");
  write(dir.path() / "bad.toml", "[training]\nbatch_size = 0\n");
  write(dir.path() / "typo.toml", "[training]\nbach_size = 8\n");

  CHECK(run("", dir.path()).code == 2);
  CHECK(run("frobnicate", dir.path()).code == 2);
  CHECK(run("train --stage sideways", dir.path()).code == 2);
  CHECK(run("train --config " + (dir.path() / "bad.toml").string(), dir.path()).code == 2);
  CHECK(run("train --config " + (dir.path() / "typo.toml").string(), dir.path()).code == 2);
  CHECK(run("eda --manifest " + (dir.path() / "absent.jsonl").string(), dir.path()).code == 3);
  CHECK(run("evaluate --checkpoint " + (dir.path() / "absent.ckpt").string() + " --manifest x", dir.path()).code == 3);

  // A corrupted feature file is a data error.
  write(dir.path() / "synth.toml", kSynth);
  REQUIRE(run("synth --config " + (dir.path() / "synth.toml").string() + " --out " + (dir.path() / "c").string(),
              dir.path())
              .code == 0);
  const auto m = read_manifest(dir.path() / "c/manifest.jsonl");
  write(dir.path() / "c" / *m.entries[0].audio, "garbage");
  const Run r = run("eda --manifest " + (dir.path() / "c/manifest.jsonl").string() + " --out " +
                        (dir.path() / "o").string(),
                    dir.path());
  CHECK(r.code == 3);
  CHECK(r.err.find(m.entries[0].id) != std::string::npos);

  CHECK(run("--help", dir.path()).code == 0);
}

TEST_CASE("cli: synth is byte-identical per seed") {
  oracle::TempDir dir("synth");
  write(dir.path() / "s.toml", kSynth);
  for (const char* name : {"a", "b"})
    REQUIRE(run("synth --config " + (dir.path() / "s.toml").string() + " --seed 9 --out " + (dir.path() / name).string(),
                dir.path())
                .code == 0);
  for (const auto& e : fs::recursive_directory_iterator(dir.path() / "a")) {
    if (!e.is_regular_file()) continue;
    CHECK(slurp(e.path()) == slurp(dir.path() / "b" / fs::relative(e.path(), dir.path() / "a")));
  }
  CHECK(run("synth --out " + (dir.path() / "s.toml" / "sub").string(), dir.path()).code == 3);
}
