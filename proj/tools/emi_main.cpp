// emi: synthetic corpora, dataset reports, staged training and inference.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "emi/commands.hpp"
#include "emi/errors.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumeric = 4 };

void add_common(CLI::App* cmd, emi::CommandOptions& o) {
  cmd->add_option("--config", o.config, "TOML-style config file");
  cmd->add_option("--manifest", o.manifest, "dataset manifest (JSON lines)");
  cmd->add_option("--out", o.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal emotional mimicry intensity regression"};
  app.require_subcommand(1);
  emi::CommandOptions o;

  auto* eda = app.add_subcommand("eda", "split summaries and label-shift tests");
  add_common(eda, o);

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--config", o.config, "file with a [synth] section");
  synth->add_option("--seed", o.seed, "generator seed (default 42)");
  synth->add_option("--out", o.out, "corpus directory")->required();

  auto* train = app.add_subcommand("train", "staged training");
  add_common(train, o);
  train->add_option("--stage", o.stage, "text|audio|vision|motion|fusion|all")
      ->check(CLI::IsMember({"text", "audio", "vision", "motion", "fusion", "all"}));
  train->add_option("--seed", o.seed, "training seed");
  train->add_option("--modalities", o.modalities, "comma-separated modality set");
  train->add_flag("--clamp", o.clamp, "clamp validation predictions to [0, 1]");
  train->add_flag("--resume", o.resume, "reuse existing stage-1 checkpoints");

  auto* evaluate = app.add_subcommand("evaluate", "metrics of a checkpoint on a labeled split");
  add_common(evaluate, o);
  evaluate->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  evaluate->add_option("--split", o.split, "train|valid|test (default valid)");
  evaluate->add_flag("--clamp", o.clamp, "clamp predictions to [0, 1]");

  auto* predict = app.add_subcommand("predict", "write clamped predictions as CSV");
  add_common(predict, o);
  predict->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  predict->add_option("--split", o.split, "train|valid|test (default test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*eda) emi::cmd_eda(o, std::cout);
    if (*synth) emi::cmd_synth(o, std::cout);
    if (*train) emi::cmd_train(o, std::cout);
    if (*evaluate) emi::cmd_evaluate(o, std::cout);
    if (*predict) emi::cmd_predict(o, std::cout);
  } catch (const emi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const emi::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const emi::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
