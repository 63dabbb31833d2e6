#include "countlab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "countlab/errors.hpp"

namespace countlab::evaluation {

using cells::CellKind;

bool token_correct(const std::array<double, 2>& probs, const dyck::Target& target) {
  return (probs[0] >= 0.5) == target.open_valid && (probs[1] >= 0.5) == target.close_valid;
}

std::optional<std::size_t> first_failure(const ForwardTrace& trace,
                                         const dyck::TargetSeq& targets) {
  if (trace.size() != targets.size()) throw LengthMismatch("first_failure: length mismatch");
  for (std::size_t t = 0; t < trace.size(); ++t)
    if (!token_correct(trace.steps[t].probs, targets[t])) return t;
  return std::nullopt;
}

FpfRecord fpf(const ParamSet& params, const dyck::DyckWord& word, std::size_t sequence_id) {
  FpfRecord rec{sequence_id, word.size(), std::nullopt};
  auto state = cells::CellState::zero(params);
  const auto tokens = word.tokens();
  const auto depths = word.depths();
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    auto r = cells::step(params, state, tokens[t]);
    if (!token_correct(r.probs, {true, depths[t] > 0})) {
      rec.fpf = t + 1;
      break;
    }
    state = std::move(r.state);
  }
  return rec;
}

std::vector<FpfRecord> fpf_records(const ParamSet& params, const dyck::DatasetSplit& split) {
  std::vector<FpfRecord> out;
  out.reserve(split.words.size());
  for (std::size_t i = 0; i < split.words.size(); ++i) out.push_back(fpf(params, split.words[i], i));
  return out;
}

EvalReport evaluate_split(const ParamSet& params, const dyck::DatasetSplit& split,
                          training::LossKind loss) {
  if (split.words.empty()) throw InvalidArgument("evaluate_split: empty split");
  EvalReport rep{split.name, 0.0, 0.0, split.words.size(), 0};
  double loss_sum = 0.0;
  for (const auto& w : split.words) {
    const auto trace = cells::forward(params, w.tokens());
    const auto targets = dyck::next_targets(w);
    loss_sum += training::sequence_loss(trace, targets, loss);
    if (!first_failure(trace, targets)) ++rep.correct;
  }
  rep.mean_loss = loss_sum / static_cast<double>(rep.count);
  rep.sequence_accuracy = 100.0 * static_cast<double>(rep.correct) / static_cast<double>(rep.count);
  return rep;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("summarize: no values");
  Summary s{0.0, values[0], values[0]};
  for (double v : values) {
    s.mean += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean /= static_cast<double>(values.size());
  return s;
}

ModelFpf model_fpf(std::span<const FpfRecord> records) {
  if (records.empty()) throw InvalidArgument("model_fpf: no records");
  ModelFpf m{0.0, true};
  for (const auto& r : records) {
    m.mean += static_cast<double>(r.value_for_mean());
    m.none = m.none && r.censored();
  }
  m.mean /= static_cast<double>(records.size());
  return m;
}

FpfAggregate fpf_aggregate(std::span<const std::vector<FpfRecord>> per_model) {
  FpfAggregate agg;
  std::vector<double> means;
  for (const auto& recs : per_model) {
    agg.per_model.push_back(model_fpf(recs));
    means.push_back(agg.per_model.back().mean);
    agg.any_none = agg.any_none || agg.per_model.back().none;
  }
  agg.summary = summarize(means);
  return agg;
}

std::vector<double> counter_trace(const ForwardTrace& trace, int unit) {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& s : trace.steps)
    out.push_back(trace.kind == CellKind::Lstm ? s.state.c.at(unit) : s.state.h.at(unit));
  return out;
}

namespace {

bool is_tanh_gate(CellKind kind, int gate) {
  return (kind == CellKind::Lstm && gate == 3) || (kind == CellKind::Gru && gate == 2);
}

}  // namespace

std::vector<GateSaturation> saturation_report(const ParamSet& params,
                                              const dyck::DatasetSplit& probe, double delta) {
  if (!(delta > 0.0 && delta < 0.5)) throw InvalidArgument("saturation_report: delta must lie in (0, 0.5)");
  const int G = params.gates();
  const int H = params.hidden();
  std::vector<GateSaturation> out(G);
  std::vector<std::size_t> saturated(G, 0);
  for (int g = 0; g < G; ++g) {
    out[g].gate = std::string(cells::gate_name(params.kind(), g));
    out[g].min = std::numeric_limits<double>::infinity();
    out[g].max = -std::numeric_limits<double>::infinity();
  }
  for (const auto& w : probe.words) {
    const auto trace = cells::forward(params, w.tokens());
    for (const auto& s : trace.steps) {
      for (int g = 0; g < G; ++g) {
        for (int u = 0; u < H; ++u) {
          const double a = s.gates[g * H + u];
          auto& gs = out[g];
          gs.min = std::min(gs.min, a);
          gs.max = std::max(gs.max, a);
          gs.mean += a;
          ++gs.samples;
          if (params.kind() == CellKind::Relu) continue;
          const bool sat = is_tanh_gate(params.kind(), g) ? std::abs(a) > 1.0 - delta : a > 1.0 - delta;
          if (sat) ++saturated[g];
        }
      }
    }
  }
  for (int g = 0; g < G; ++g) {
    if (out[g].samples == 0) continue;
    out[g].mean /= static_cast<double>(out[g].samples);
    out[g].frac_saturated = static_cast<double>(saturated[g]) / static_cast<double>(out[g].samples);
  }
  return out;
}

std::vector<DeltaBucket> delta_profile(const ParamSet& params, const dyck::DyckWord& word,
                                       int bucket_width, int unit) {
  if (bucket_width < 1) throw InvalidArgument("delta_profile: bucket width must be >= 1");
  const auto trace = cells::forward(params, word.tokens());
  const auto counter = counter_trace(trace, unit);
  const auto tokens = word.tokens();
  const auto depths = word.depths();

  struct Acc {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::map<std::pair<int, int>, Acc> acc;
  for (std::size_t t = 1; t < counter.size(); ++t) {
    const double d = counter[t] - counter[t - 1];
    auto& a = acc[{static_cast<int>(tokens[t]), depths[t - 1] / bucket_width}];
    ++a.n;
    const double diff = d - a.mean;
    a.mean += diff / static_cast<double>(a.n);
    a.m2 += diff * (d - a.mean);
  }
  std::vector<DeltaBucket> out;
  for (const auto& [key, a] : acc) {
    out.push_back({static_cast<dyck::Token>(key.first), key.second, a.n, a.mean,
                   std::sqrt(a.m2 / static_cast<double>(a.n))});
  }
  return out;
}

}  // namespace countlab::evaluation
