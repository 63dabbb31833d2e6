#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "countlab/experiment.hpp"
#include "countlab/training.hpp"

// Pipeline stages behind the countlab CLI. Every stage reads and writes files
// under config.out_dir only, and is a deterministic function of the config.
namespace countlab::commands {

using experiment::ExperimentConfig;

// data/<split>.txt and data/<split>.manifest.json for all five splits.
void cmd_generate(const ExperimentConfig& config, std::ostream& log);

// Loads a generated split; DataError when it is missing.
dyck::DatasetSplit load_generated(const ExperimentConfig& config, dyck::SplitName name);

struct CampaignResult {
  cells::CellKind kind;
  std::vector<training::RunRecord> runs;      // run index order
  std::vector<std::string> selected;          // run ids, best first
};

// Trains (or resumes) every run, writes runs/<kind>/<runId>/ and
// runs/<kind>/summary.csv.
std::vector<CampaignResult> cmd_train(const ExperimentConfig& config, std::ostream& log);

// Evaluates checkpoint epochs and best checkpoints of the selected runs:
// reports/eval.csv, fpf.csv, saturation.csv, overview.csv. With `oracle` only the
// exact ReLU counter is evaluated (kind "oracle").
void cmd_eval(const ExperimentConfig& config, std::ostream& log, bool oracle = false);

// reports/zigzag_fpf.csv, histogram.csv, deltas.csv.
void cmd_zigzag(const ExperimentConfig& config, std::ostream& log, bool oracle = false);

// reports/regress.csv and scatter.csv from eval.csv + fpf.csv.
void cmd_regress(const ExperimentConfig& config, std::ostream& log);

struct GradcheckEntry {
  cells::CellKind kind;
  int hidden;
  std::size_t length;
  double max_rel_error;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = 1e-4;
  bool passed() const;
  double worst(cells::CellKind kind) const;
};

// 20 random instances per kind, H alternating 1 and 2, lengths 2..12,
// central differences with h = 1e-5. `grad` replaces the analytic gradient
// (used to check that the suite catches a broken gradient).
GradcheckReport cmd_gradcheck(std::ostream& log, const training::GradFn& grad = {},
                              std::size_t instances_per_kind = 20);

}  // namespace countlab::commands
