// ambiguity-twin: generate data, train the predictor/uncertainty pair,
// evaluate prediction bands and query single inputs.
//
//   ambiguity-twin <gen|train|eval|predict> --config <path> [--data <path>]
//                  [--model <path>] [--out <dir>] [--seed <u64>]
//   ambiguity-twin convert-credit --data <symbolic file> --out <dir>

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ambitwin/commands.hpp"

namespace {

void add_common(CLI::App *cmd, ambitwin::cli::CommandOptions &opt, std::uint64_t &seed) {
  cmd->add_option("--config", opt.config_path, "Run configuration (JSON)");
  cmd->add_option("--data", opt.data_path, "Dataset file");
  cmd->add_option("--model", opt.model_path, "Twin model file");
  cmd->add_option("--out", opt.out_dir, "Output directory");
  cmd->add_option("--seed", seed, "Override the configuration's global seed");
}

} // namespace

int main(int argc, char **argv) {
  namespace tw = ambitwin::cli;
  CLI::App app{"Predictions with per-input reliability bands from two coupled networks"};
  app.require_subcommand(1);

  tw::CommandOptions opt;
  std::uint64_t seed = 0;

  auto *gen = app.add_subcommand("gen", "Generate a straw-chamber or synthetic dataset");
  auto *train = app.add_subcommand("train", "Train the predictor and uncertainty networks");
  auto *eval = app.add_subcommand("eval", "Evaluate a trained model and write report files");
  auto *predict = app.add_subcommand("predict", "Print 'value delta' for one input row");
  auto *convert = app.add_subcommand("convert-credit", "Convert the symbolic credit file to 24 numeric columns");
  for (auto *cmd : {gen, train, eval, predict, convert}) {
    add_common(cmd, opt, seed);
  }
  predict->add_option("--input", opt.input, "Input row, comma or space separated (default: read stdin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? tw::kExitOk : tw::kExitUsage;
  }
  for (auto *cmd : app.get_subcommands()) {
    if (cmd->count("--seed") > 0) {
      opt.seed = seed;
    }
  }

  return tw::run_guarded(
      [&]() -> int {
        if (gen->parsed()) {
          return tw::cmd_gen(opt);
        }
        if (train->parsed()) {
          return tw::cmd_train(opt);
        }
        if (eval->parsed()) {
          return tw::cmd_eval(opt);
        }
        if (predict->parsed()) {
          return tw::cmd_predict(opt, std::cin, std::cout);
        }
        return tw::cmd_convert_credit(opt);
      },
      std::cerr);
}
