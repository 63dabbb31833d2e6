#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "countlab/cells.hpp"
#include "countlab/dyck.hpp"
#include "countlab/training.hpp"

namespace countlab::evaluation {

using cells::ForwardTrace;
using cells::ParamSet;

// Both outputs thresholded at 0.5; exactly 0.5 counts as "valid".
bool token_correct(const std::array<double, 2>& probs, const dyck::Target& target);

// 0-based index of the first misclassified timestep, if any.
std::optional<std::size_t> first_failure(const ForwardTrace& trace,
                                         const dyck::TargetSeq& targets);

struct FpfRecord {
  std::size_t sequence_id = 0;
  std::size_t length = 0;
  std::optional<std::size_t> fpf;  // 1-based; empty when the word is fully correct

  bool censored() const { return !fpf.has_value(); }
  // Censored records count at the full length.
  std::size_t value_for_mean() const { return fpf.value_or(length); }
};

// Steps the network only until the first failure.
FpfRecord fpf(const ParamSet& params, const dyck::DyckWord& word, std::size_t sequence_id = 0);

std::vector<FpfRecord> fpf_records(const ParamSet& params, const dyck::DatasetSplit& split);

struct EvalReport {
  dyck::SplitName split = dyck::SplitName::Train;
  double mean_loss = 0.0;
  double sequence_accuracy = 0.0;  // percent of fully correct words
  std::size_t count = 0;
  std::size_t correct = 0;
};

EvalReport evaluate_split(const ParamSet& params, const dyck::DatasetSplit& split,
                          training::LossKind loss = training::LossKind::Mse);

struct Summary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

Summary summarize(std::span<const double> values);

struct ModelFpf {
  double mean = 0.0;
  bool none = false;  // the model never failed on the word set
};

ModelFpf model_fpf(std::span<const FpfRecord> records);

struct FpfAggregate {
  Summary summary;            // over per-model means
  bool any_none = false;      // report the maximum as "none"
  std::vector<ModelFpf> per_model;
};

FpfAggregate fpf_aggregate(std::span<const std::vector<FpfRecord>> per_model);

// c_t for LSTM, h_t otherwise, for one hidden unit.
std::vector<double> counter_trace(const ForwardTrace& trace, int unit = 0);

struct GateSaturation {
  std::string gate;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  // Sigmoid gates: fraction above 1 - delta. Tanh quantities: |a| > 1 - delta.
  // ReLU activations never saturate and report 0.
  double frac_saturated = 0.0;
  std::size_t samples = 0;
};

std::vector<GateSaturation> saturation_report(const ParamSet& params,
                                              const dyck::DatasetSplit& probe, double delta);

struct DeltaBucket {
  dyck::Token token = dyck::Token::Open;
  int bucket = 0;  // floor(depth before the token / width)
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

// Per-step change of the counter variable grouped by token and depth bucket,
// for timesteps 1..T-1. Sorted by (token, bucket).
std::vector<DeltaBucket> delta_profile(const ParamSet& params, const dyck::DyckWord& word,
                                       int bucket_width, int unit = 0);

}  // namespace countlab::evaluation
