#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "countlab/cells.hpp"
#include "countlab/dyck.hpp"

namespace countlab::training {

using cells::CellKind;
using cells::GradSet;
using cells::ParamSet;

enum class LossKind { Mse, CrossEntropy };

std::string to_string(LossKind kind);  // "mse", "xent"
LossKind loss_from_string(std::string_view name);

// Mean over timesteps and both outputs of the per-output loss. MSE is
// (y - target)^2; cross-entropy is binary log loss on the sigmoid outputs.
double sequence_loss(const cells::ForwardTrace& trace, const dyck::TargetSeq& targets,
                     LossKind kind = LossKind::Mse);

struct LossAndGrad {
  double loss = 0.0;
  GradSet grads;
};

// Full-sequence backpropagation through time.
LossAndGrad bptt_grads(const ParamSet& params, std::span<const dyck::Token> tokens,
                       const dyck::TargetSeq& targets, LossKind kind = LossKind::Mse);

using GradFn = std::function<LossAndGrad(const ParamSet&, std::span<const dyck::Token>,
                                         const dyck::TargetSeq&)>;

// max_i |g_i - fd_i| / max(1, |fd_i|) against central differences with step h.
// `grad` defaults to bptt_grads with the same loss. Steps in [1e-7, 1e-3] are
// the meaningful range; larger steps are accepted so truncation error can be
// measured.
double fd_check(const ParamSet& params, std::span<const dyck::Token> tokens,
                const dyck::TargetSeq& targets, double h, LossKind kind = LossKind::Mse,
                const GradFn& grad = {});

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  static OptState zeros(const ParamSet& params);
};

// Bias-corrected Adam, applied entrywise in place.
void adam_step(OptState& opt, ParamSet& params, const GradSet& grads, double lr,
               const AdamConfig& adam = {});

// 0.001 for GRU, 0.01 otherwise.
double default_learning_rate(CellKind kind);

struct TrainConfig {
  CellKind kind = CellKind::Lstm;
  int hidden = 1;
  double lr = 0.01;
  int epochs = 30;
  std::vector<int> checkpoint_epochs{1, 5, 10, 15, 20, 25};
  AdamConfig adam;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::Mse;
  cells::OutputActivation output_activation = cells::OutputActivation::Tanh;

  void validate() const;
  // Configured epochs that fall inside the run, plus the final epoch.
  std::vector<int> effective_checkpoint_epochs() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct CheckpointRef {
  int epoch = 0;
  ParamSet params;
  std::filesystem::path path;  // empty when the run is not written to disk
};

struct RunRecord {
  std::string run_id;
  CellKind kind = CellKind::Lstm;
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  std::vector<CheckpointRef> checkpoints;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::optional<ParamSet> best_params;
  std::uint64_t adam_steps = 0;
  bool failed = false;
  std::string failure;

  const CheckpointRef* checkpoint(int epoch) const;
};

// Mean sequence loss over a split, reduced in index order.
double mean_loss(const ParamSet& params, const dyck::DatasetSplit& split,
                 LossKind kind = LossKind::Mse);

struct RunOptions {
  std::string run_id = "run0";
  // Directory for epoch<N>.ckpt.json, best.ckpt.json and metrics.csv.
  std::optional<std::filesystem::path> run_dir;
  // Continue from the newest checkpoint in run_dir when present.
  bool resume = false;
  // Stop after this many epochs without finalizing (simulates interruption).
  std::optional<int> stop_after_epoch;
};

// Online training: one Adam update per training sequence, order shuffled per
// epoch from a stream derived from (seed, epoch). Non-finite values mark the
// record failed instead of throwing.
RunRecord train_run(const TrainConfig& config, const dyck::DatasetSplit& train,
                    const dyck::DatasetSplit& val, const RunOptions& options = {});

// The k non-failed records with the lowest best validation loss, ascending;
// ties ordered by run id.
std::vector<RunRecord> select_best_runs(std::vector<RunRecord> records, std::size_t k);

}  // namespace countlab::training
