#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "countlab/cells.hpp"
#include "countlab/dyck.hpp"
#include "countlab/training.hpp"

namespace countlab::experiment {

using cells::CellKind;

struct Campaign {
  training::TrainConfig train;  // seed is per run, derived from the global seed
  std::size_t runs = 10;
  std::size_t select = 10;      // best runs kept for evaluation
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  int jobs = 1;

  // Split seeds are derived from `seed`; any seed in these specs is ignored.
  dyck::GenSpec train{10000, 2, 50};
  dyck::GenSpec validation{5000, 2, 50};
  dyck::GenSpec long_test{5000, 52, 100};
  dyck::GenSpec very_long{100, 1000, 1000};
  std::vector<std::size_t> zigzag_js{10, 20, 25, 50, 100, 125, 200, 250, 500, 1000};
  std::size_t zigzag_len = 2000;

  std::vector<CellKind> kinds{CellKind::Lstm, CellKind::Gru, CellKind::Relu};
  std::vector<Campaign> campaigns;  // one per entry of `kinds`, same order

  std::size_t histogram_bin_width = 10;
  std::size_t delta_j = 500;
  int delta_bucket_width = 50;
  double saturation_delta = 1e-2;

  // Throws ConfigError on any violated invariant.
  void validate() const;

  const Campaign& campaign(CellKind kind) const;
  dyck::GenSpec split_spec(dyck::SplitName name) const;  // with derived seed
  std::uint64_t run_seed(CellKind kind, std::size_t run) const;

  std::filesystem::path data_dir() const { return out_dir / "data"; }
  std::filesystem::path runs_dir(CellKind kind) const;
  std::filesystem::path reports_dir() const { return out_dir / "reports"; }
};

// Full-scale defaults: 10 runs x 30 epochs per kind, ReLU 30 select 10.
ExperimentConfig default_config();

ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

struct Overrides {
  std::optional<double> scale;  // multiplies TRAIN/VALIDATION/LONG counts
  std::optional<std::vector<CellKind>> kinds;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
};

// Applies overrides and re-validates.
void apply_overrides(ExperimentConfig& config, const Overrides& o);

std::string run_id(CellKind kind, std::size_t run);  // e.g. "lstm-03"

}  // namespace countlab::experiment
