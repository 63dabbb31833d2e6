#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "countlab/cells.hpp"
#include "countlab/training.hpp"

namespace countlab::training {

// State needed to continue a run exactly from a checkpoint epoch.
struct ResumeState {
  OptState opt;
  std::vector<EpochMetrics> history;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  ParamSet best_params;
};

// JSON document:
//   {kind, hidden, outputActivation, params{W_i:[..], ...}, seed, epoch, runId,
//    metrics{trainLoss, valLoss}, resume?{...}}
// Arrays are row-major; doubles are written with round-trip precision.
struct Checkpoint {
  ParamSet params;
  std::uint64_t seed = 0;
  int epoch = 0;
  std::string run_id;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<ResumeState> resume;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
// Throws DataError on malformed documents or inconsistent array sizes.
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::filesystem::path epoch_checkpoint_path(const std::filesystem::path& run_dir, int epoch);
std::filesystem::path best_checkpoint_path(const std::filesystem::path& run_dir);
std::filesystem::path metrics_path(const std::filesystem::path& run_dir);

}  // namespace countlab::training
