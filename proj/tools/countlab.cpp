// countlab: Dyck-1 counting experiments for single-cell recurrent networks.
//
//   countlab generate|train|eval|zigzag|regress|gradcheck --config <path>
//            [--scale F] [--kinds lstm,gru,relu] [--jobs N] [--seed U64]
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 gradcheck failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "countlab/commands.hpp"
#include "countlab/errors.hpp"
#include "countlab/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCheck = 4;

struct Flags {
  std::string config;
  std::optional<double> scale;
  std::string kinds;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  bool oracle = false;
};

countlab::experiment::ExperimentConfig resolve_config(const Flags& f) {
  using namespace countlab;
  auto cfg = experiment::load_config(f.config);
  experiment::Overrides o;
  o.scale = f.scale;
  o.jobs = f.jobs;
  o.seed = f.seed;
  if (!f.kinds.empty()) {
    std::vector<cells::CellKind> kinds;
    std::string item;
    std::istringstream ss(f.kinds);
    try {
      while (std::getline(ss, item, ',')) kinds.push_back(cells::kind_from_string(item));
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    o.kinds = kinds;
  }
  if (const char* env = std::getenv("COUNTLAB_OUT"); env && *env) o.out_dir = env;
  experiment::apply_overrides(cfg, o);
  return cfg;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--scale", f.scale, "Multiply TRAIN/VALIDATION/LONG counts");
  sub->add_option("--kinds", f.kinds, "Comma-separated cell kinds (lstm,gru,relu)");
  sub->add_option("--jobs", f.jobs, "Parallel runs/checkpoints")->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "Global seed override");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace countlab;
  CLI::App app{"countlab: counting generalization of single-cell RNNs on Dyck-1"};
  app.require_subcommand(1);
  Flags flags;

  auto* gen = app.add_subcommand("generate", "Generate dataset splits and manifests");
  auto* train = app.add_subcommand("train", "Train all campaigns, write checkpoints and metrics");
  auto* eval = app.add_subcommand("eval", "Evaluate selected runs (accuracy overview, FPF, saturation)");
  auto* zigzag = app.add_subcommand("zigzag", "FPF histograms and delta profiles on the zigzag set");
  auto* regress = app.add_subcommand("regress", "Regress -log(loss) against mean very-long FPF");
  auto* grad = app.add_subcommand("gradcheck", "Check BPTT gradients against finite differences");
  for (auto* sub : {gen, train, eval, zigzag, regress}) add_common(sub, flags);
  for (auto* sub : {eval, zigzag})
    sub->add_flag("--oracle", flags.oracle, "Evaluate the exact ReLU counter instead of trained runs");
  grad->add_option("--config", flags.config, "Ignored; accepted for uniformity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage problems (unknown flags, missing --config) count as config errors.
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (grad->parsed()) {
      const auto report = commands::cmd_gradcheck(std::cout);
      return report.passed() ? 0 : kExitCheck;
    }
    const auto cfg = resolve_config(flags);
    if (gen->parsed()) commands::cmd_generate(cfg, std::cout);
    if (train->parsed()) commands::cmd_train(cfg, std::cout);
    if (eval->parsed()) commands::cmd_eval(cfg, std::cout, flags.oracle);
    if (zigzag->parsed()) commands::cmd_zigzag(cfg, std::cout, flags.oracle);
    if (regress->parsed()) commands::cmd_regress(cfg, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
