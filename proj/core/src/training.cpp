#include "countlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "countlab/checkpoint.hpp"
#include "countlab/errors.hpp"
#include "countlab/file_util.hpp"
#include "countlab/random.hpp"

namespace countlab::training {

using cells::OutputActivation;
using dyck::Token;

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// d loss / d logit for one output at one timestep, already divided by 2T.
double logit_grad(double y, double target, std::size_t T, LossKind kind) {
  const double inv = 1.0 / static_cast<double>(2 * T);
  if (kind == LossKind::Mse) return 2.0 * (y - target) * y * (1.0 - y) * inv;
  return (y - target) * inv;
}

// Accumulates one gate's parameter gradients for pre-activation gradient
// `da`, token column `x` and recurrent input `h_in`; adds U^T da to dh_in.
void accumulate_gate(const ParamSet& p, GradSet& g, int gate, std::span<const double> da,
                     int x, std::span<const double> h_in, std::span<double> dh_in) {
  const std::size_t H = da.size();
  auto dW = g.W(gate);
  auto dU = g.U(gate);
  auto db = g.b(gate);
  const auto U = p.U(gate);
  for (std::size_t u = 0; u < H; ++u) {
    dW[u * 2 + x] += da[u];
    db[u] += da[u];
    for (std::size_t k = 0; k < H; ++k) {
      dU[u * H + k] += da[u] * h_in[k];
      dh_in[k] += U[u * H + k] * da[u];
    }
  }
}

}  // namespace

std::string to_string(LossKind kind) { return kind == LossKind::Mse ? "mse" : "xent"; }

LossKind loss_from_string(std::string_view name) {
  if (name == "mse") return LossKind::Mse;
  if (name == "xent") return LossKind::CrossEntropy;
  throw InvalidArgument("unknown loss '" + std::string(name) + "'");
}

double sequence_loss(const cells::ForwardTrace& trace, const dyck::TargetSeq& targets,
                     LossKind kind) {
  if (trace.size() != targets.size() || trace.size() == 0) {
    throw LengthMismatch("sequence_loss: trace has " + std::to_string(trace.size()) +
                         " steps, targets " + std::to_string(targets.size()));
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& s = trace.steps[t];
    const double tgt[2] = {targets[t].open_valid ? 1.0 : 0.0, targets[t].close_valid ? 1.0 : 0.0};
    for (int k = 0; k < 2; ++k) {
      if (kind == LossKind::Mse) {
        const double d = s.probs[k] - tgt[k];
        sum += d * d;
      } else {
        sum += tgt[k] * softplus(-s.logits[k]) + (1.0 - tgt[k]) * softplus(s.logits[k]);
      }
    }
  }
  return sum / static_cast<double>(2 * trace.size());
}

LossAndGrad bptt_grads(const ParamSet& params, std::span<const Token> tokens,
                       const dyck::TargetSeq& targets, LossKind kind) {
  const auto trace = cells::forward(params, tokens);
  LossAndGrad out{sequence_loss(trace, targets, kind),
                  GradSet(params.kind(), params.hidden(), params.output_activation())};
  GradSet& g = out.grads;

  const int H = params.hidden();
  const std::size_t T = tokens.size();
  const auto V = params.V();
  auto dV = g.V();
  auto dc_head = g.c();
  const std::vector<double> zeros(H, 0.0);

  std::vector<double> dh_next(H, 0.0);
  std::vector<double> dc_next(H, 0.0);  // LSTM cell-state carry
  std::vector<double> dh(H), dh_prev(H), da(H);

  for (std::size_t ti = T; ti-- > 0;) {
    const auto& s = trace.steps[ti];
    const int x = static_cast<int>(tokens[ti]);
    const std::span<const double> h_prev = ti > 0 ? std::span<const double>(trace.steps[ti - 1].state.h)
                                                  : std::span<const double>(zeros);
    const double tgt[2] = {targets[ti].open_valid ? 1.0 : 0.0,
                           targets[ti].close_valid ? 1.0 : 0.0};

    dh = dh_next;
    for (int k = 0; k < 2; ++k) {
      const double dz = logit_grad(s.probs[k], tgt[k], T, kind);
      dc_head[k] += dz;
      for (int u = 0; u < H; ++u) {
        dV[k * H + u] += dz * s.state.h[u];
        dh[u] += V[k * H + u] * dz;
      }
    }
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    auto gate = [&](int gi) { return std::span<const double>(s.gates.data() + gi * H, H); };

    switch (params.kind()) {
      case CellKind::Relu: {
        const auto h = gate(0);
        for (int u = 0; u < H; ++u) da[u] = h[u] > 0.0 ? dh[u] : 0.0;
        accumulate_gate(params, g, 0, da, x, h_prev, dh_prev);
        break;
      }
      case CellKind::Lstm: {
        const auto i = gate(0), f = gate(1), o = gate(2), cand = gate(3);
        const std::span<const double> c_prev =
            ti > 0 ? std::span<const double>(trace.steps[ti - 1].state.c)
                   : std::span<const double>(zeros);
        const bool squash = params.output_activation() == OutputActivation::Tanh;
        std::vector<double> da_i(H), da_f(H), da_o(H), da_g(H);
        for (int u = 0; u < H; ++u) {
          const double c = s.state.c[u];
          const double act = squash ? std::tanh(c) : c;
          const double act_d = squash ? 1.0 - act * act : 1.0;
          const double dc = dc_next[u] + dh[u] * o[u] * act_d;
          da_o[u] = dh[u] * act * o[u] * (1.0 - o[u]);
          da_i[u] = dc * cand[u] * i[u] * (1.0 - i[u]);
          da_f[u] = dc * c_prev[u] * f[u] * (1.0 - f[u]);
          da_g[u] = dc * i[u] * (1.0 - cand[u] * cand[u]);
          dc_next[u] = dc * f[u];
        }
        accumulate_gate(params, g, 0, da_i, x, h_prev, dh_prev);
        accumulate_gate(params, g, 1, da_f, x, h_prev, dh_prev);
        accumulate_gate(params, g, 2, da_o, x, h_prev, dh_prev);
        accumulate_gate(params, g, 3, da_g, x, h_prev, dh_prev);
        break;
      }
      case CellKind::Gru: {
        const auto z = gate(0), r = gate(1), n = gate(2);
        std::vector<double> reset_h(H), d_reset_h(H, 0.0), da_z(H), da_r(H);
        for (int u = 0; u < H; ++u) {
          reset_h[u] = r[u] * h_prev[u];
          da[u] = dh[u] * z[u] * (1.0 - n[u] * n[u]);
          da_z[u] = dh[u] * (n[u] - h_prev[u]) * z[u] * (1.0 - z[u]);
          dh_prev[u] += dh[u] * (1.0 - z[u]);
        }
        accumulate_gate(params, g, 2, da, x, reset_h, d_reset_h);
        for (int u = 0; u < H; ++u) {
          da_r[u] = d_reset_h[u] * h_prev[u] * r[u] * (1.0 - r[u]);
          dh_prev[u] += d_reset_h[u] * r[u];
        }
        accumulate_gate(params, g, 0, da_z, x, h_prev, dh_prev);
        accumulate_gate(params, g, 1, da_r, x, h_prev, dh_prev);
        break;
      }
    }
    dh_next = dh_prev;
  }

  if (!g.all_finite()) throw NonFinite(0);
  return out;
}

double fd_check(const ParamSet& params, std::span<const Token> tokens,
                const dyck::TargetSeq& targets, double h, LossKind kind, const GradFn& grad) {
  const GradSet analytic = grad ? grad(params, tokens, targets).grads
                                : bptt_grads(params, tokens, targets, kind).grads;
  ParamSet probe = params;
  auto values = probe.values();
  double worst = 0.0;
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    const double saved = values[idx];
    values[idx] = saved + h;
    const double up = sequence_loss(cells::forward(probe, tokens), targets, kind);
    values[idx] = saved - h;
    const double down = sequence_loss(cells::forward(probe, tokens), targets, kind);
    values[idx] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(analytic.values()[idx] - fd) / std::max(1.0, std::abs(fd));
    worst = std::max(worst, err);
  }
  return worst;
}

OptState OptState::zeros(const ParamSet& params) {
  return {std::vector<double>(params.size(), 0.0), std::vector<double>(params.size(), 0.0), 0};
}

void adam_step(OptState& opt, ParamSet& params, const GradSet& grads, double lr,
               const AdamConfig& adam) {
  auto p = params.values();
  const auto g = grads.values();
  if (p.size() != g.size() || opt.m.size() != p.size() || opt.v.size() != p.size())
    throw InvalidArgument("adam_step: shape mismatch");
  ++opt.t;
  const double t = static_cast<double>(opt.t);
  const double bc1 = 1.0 - std::pow(adam.beta1, t);
  const double bc2 = 1.0 - std::pow(adam.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    opt.m[i] = adam.beta1 * opt.m[i] + (1.0 - adam.beta1) * g[i];
    opt.v[i] = adam.beta2 * opt.v[i] + (1.0 - adam.beta2) * g[i] * g[i];
    const double m_hat = opt.m[i] / bc1;
    const double v_hat = opt.v[i] / bc2;
    p[i] -= lr * m_hat / (std::sqrt(v_hat) + adam.eps);
  }
}

double default_learning_rate(CellKind kind) { return kind == CellKind::Gru ? 0.001 : 0.01; }

void TrainConfig::validate() const {
  if (hidden < 1) throw InvalidArgument("TrainConfig: hidden must be >= 1");
  if (!(lr > 0.0)) throw InvalidArgument("TrainConfig: lr must be positive");
  if (epochs < 1) throw InvalidArgument("TrainConfig: epochs must be >= 1");
  if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0) || !(adam.beta2 > 0.0 && adam.beta2 < 1.0))
    throw InvalidArgument("TrainConfig: Adam betas must lie in (0,1)");
  if (!(adam.eps > 0.0)) throw InvalidArgument("TrainConfig: Adam eps must be positive");
  for (int e : checkpoint_epochs)
    if (e < 1) throw InvalidArgument("TrainConfig: checkpoint epochs must be >= 1");
}

std::vector<int> TrainConfig::effective_checkpoint_epochs() const {
  std::vector<int> out;
  for (int e : checkpoint_epochs)
    if (e <= epochs) out.push_back(e);
  out.push_back(epochs);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const CheckpointRef* RunRecord::checkpoint(int epoch) const {
  for (const auto& c : checkpoints)
    if (c.epoch == epoch) return &c;
  return nullptr;
}

double mean_loss(const ParamSet& params, const dyck::DatasetSplit& split, LossKind kind) {
  if (split.words.empty()) throw InvalidArgument("mean_loss: empty split");
  double sum = 0.0;
  for (const auto& w : split.words) {
    sum += sequence_loss(cells::forward(params, w.tokens()), dyck::next_targets(w), kind);
  }
  return sum / static_cast<double>(split.words.size());
}

namespace {

std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
  std::ostringstream out;
  out << "epoch,trainLoss,valLoss\n";
  for (const auto& r : rows)
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss)
        << '\n';
  return out.str();
}

// Newest epoch checkpoint in run_dir that carries resume state.
std::optional<Checkpoint> find_resume_point(const std::filesystem::path& run_dir, int max_epoch) {
  for (int e = max_epoch; e >= 1; --e) {
    const auto path = epoch_checkpoint_path(run_dir, e);
    if (!std::filesystem::exists(path)) continue;
    auto ckpt = load_checkpoint(path);
    if (ckpt.resume) return ckpt;
  }
  return std::nullopt;
}

}  // namespace

RunRecord train_run(const TrainConfig& config, const dyck::DatasetSplit& train,
                    const dyck::DatasetSplit& val, const RunOptions& options) {
  config.validate();
  if (train.words.empty() || val.words.empty())
    throw InvalidArgument("train_run: empty training or validation split");

  RunRecord rec;
  rec.run_id = options.run_id;
  rec.kind = config.kind;
  rec.seed = config.seed;

  ParamSet params =
      cells::init_params(config.kind, config.hidden, config.seed, config.output_activation);
  OptState opt = OptState::zeros(params);
  std::optional<ParamSet> best;
  const auto ckpt_epochs = config.effective_checkpoint_epochs();
  const auto is_ckpt_epoch = [&](int e) {
    return std::binary_search(ckpt_epochs.begin(), ckpt_epochs.end(), e);
  };

  int start_epoch = 1;
  if (options.resume && options.run_dir) {
    if (auto ckpt = find_resume_point(*options.run_dir, config.epochs)) {
      auto& rs = *ckpt->resume;
      params = ckpt->params;
      opt = rs.opt;
      rec.epochs = rs.history;
      rec.best_epoch = rs.best_epoch;
      rec.best_val_loss = rs.best_val_loss;
      best = rs.best_params;
      rec.adam_steps = opt.t;
      start_epoch = ckpt->epoch + 1;
      for (int e : ckpt_epochs) {
        if (e > ckpt->epoch) break;
        const auto path = epoch_checkpoint_path(*options.run_dir, e);
        rec.checkpoints.push_back({e, load_checkpoint(path).params, path});
      }
    }
  }

  const std::size_t n = train.words.size();
  std::vector<dyck::TargetSeq> train_targets;
  train_targets.reserve(n);
  for (const auto& w : train.words) train_targets.push_back(dyck::next_targets(w));
  std::vector<std::size_t> order(n);

  try {
    for (int epoch = start_epoch; epoch <= config.epochs; ++epoch) {
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      Rng shuffle_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

      double train_sum = 0.0;
      for (std::size_t idx : order) {
        const auto& w = train.words[idx];
        auto lg = bptt_grads(params, w.tokens(), train_targets[idx], config.loss);
        train_sum += lg.loss;
        adam_step(opt, params, lg.grads, config.lr, config.adam);
        ++rec.adam_steps;
        if (!params.all_finite()) throw NonFinite(0);
      }
      const double val_loss = mean_loss(params, val, config.loss);
      if (!std::isfinite(val_loss)) throw NonFinite(0);
      rec.epochs.push_back({epoch, train_sum / static_cast<double>(n), val_loss});
      if (!best || val_loss < rec.best_val_loss) {
        rec.best_epoch = epoch;
        rec.best_val_loss = val_loss;
        best = params;
      }

      if (is_ckpt_epoch(epoch)) {
        CheckpointRef ref{epoch, params, {}};
        if (options.run_dir) {
          Checkpoint ckpt{params, config.seed, epoch, rec.run_id, rec.epochs.back().train_loss,
                          val_loss, ResumeState{opt, rec.epochs, rec.best_epoch,
                                                rec.best_val_loss, *best}};
          ref.path = epoch_checkpoint_path(*options.run_dir, epoch);
          save_checkpoint(ref.path, ckpt);
        }
        rec.checkpoints.push_back(std::move(ref));
      }
      if (options.run_dir) write_file_atomic(metrics_path(*options.run_dir), metrics_csv(rec.epochs));
      if (options.stop_after_epoch && epoch >= *options.stop_after_epoch) {
        rec.best_params = best;
        return rec;
      }
    }
  } catch (const NonFinite& e) {
    rec.failed = true;
    rec.failure = e.what();
    return rec;
  }

  rec.best_params = best;
  if (options.run_dir && best) {
    const auto& m = rec.epochs[rec.best_epoch - 1];
    save_checkpoint(best_checkpoint_path(*options.run_dir),
                    Checkpoint{*best, config.seed, rec.best_epoch, rec.run_id, m.train_loss,
                               m.val_loss, std::nullopt});
  }
  return rec;
}

std::vector<RunRecord> select_best_runs(std::vector<RunRecord> records, std::size_t k) {
  std::erase_if(records, [](const RunRecord& r) { return r.failed || !r.best_params; });
  std::stable_sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    if (a.best_val_loss != b.best_val_loss) return a.best_val_loss < b.best_val_loss;
    return a.run_id < b.run_id;
  });
  if (records.size() > k) records.resize(k);
  return records;
}

}  // namespace countlab::training
