#include "countlab/cells.hpp"

#include <algorithm>
#include <cmath>

#include "countlab/errors.hpp"
#include "countlab/random.hpp"

namespace countlab::cells {

namespace {

constexpr std::string_view kLstmGates[] = {"i", "f", "o", "g"};
constexpr std::string_view kGruGates[] = {"z", "r", "n"};
constexpr std::string_view kReluGates[] = {"h"};

bool finite_all(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

// out[u] = W[u, token] + sum_k U[u, k] * h[k] + b[u]
void preactivation(std::span<const double> W, std::span<const double> U,
                   std::span<const double> b, int token, std::span<const double> h,
                   std::span<double> out) {
  const std::size_t H = out.size();
  for (std::size_t u = 0; u < H; ++u) {
    double a = W[u * 2 + token] + b[u];
    for (std::size_t k = 0; k < H; ++k) a += U[u * H + k] * h[k];
    out[u] = a;
  }
}

}  // namespace

std::string to_string(CellKind kind) {
  switch (kind) {
    case CellKind::Lstm: return "lstm";
    case CellKind::Gru: return "gru";
    case CellKind::Relu: return "relu";
  }
  return "?";
}

CellKind kind_from_string(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "lstm") return CellKind::Lstm;
  if (lower == "gru") return CellKind::Gru;
  if (lower == "relu") return CellKind::Relu;
  throw InvalidArgument("unknown cell kind '" + std::string(name) + "'");
}

std::string to_string(OutputActivation act) {
  return act == OutputActivation::Tanh ? "tanh" : "identity";
}

OutputActivation activation_from_string(std::string_view name) {
  if (name == "tanh") return OutputActivation::Tanh;
  if (name == "identity") return OutputActivation::Identity;
  throw InvalidArgument("unknown output activation '" + std::string(name) + "'");
}

int gate_count(CellKind kind) {
  switch (kind) {
    case CellKind::Lstm: return 4;
    case CellKind::Gru: return 3;
    case CellKind::Relu: return 1;
  }
  return 0;
}

std::string_view gate_name(CellKind kind, int gate) {
  switch (kind) {
    case CellKind::Lstm: return kLstmGates[gate];
    case CellKind::Gru: return kGruGates[gate];
    case CellKind::Relu: return kReluGates[gate];
  }
  return "?";
}

ParamSet::ParamSet(CellKind kind, int hidden, OutputActivation act)
    : kind_(kind), hidden_(hidden), act_(act) {
  if (hidden < 1) throw InvalidArgument("ParamSet: hidden size must be >= 1");
  values_.assign(gate_count(kind) * gate_stride() + 2 * hidden + 2, 0.0);
}

std::vector<ParamSet::NamedBlock> ParamSet::layout() const {
  std::vector<NamedBlock> out;
  const std::size_t H = hidden_;
  for (int g = 0; g < gates(); ++g) {
    const std::string n(gate_name(kind_, g));
    out.push_back({"W_" + n, gate_offset(g), 2 * H});
    out.push_back({"U_" + n, gate_offset(g) + 2 * H, H * H});
    out.push_back({"b_" + n, gate_offset(g) + 2 * H + H * H, H});
  }
  out.push_back({"V", head_offset(), 2 * H});
  out.push_back({"c", head_offset() + 2 * H, 2});
  return out;
}

bool ParamSet::all_finite() const { return finite_all(values_); }

CellState CellState::zero(const ParamSet& params) {
  CellState s;
  s.h.assign(params.hidden(), 0.0);
  if (params.kind() == CellKind::Lstm) s.c.assign(params.hidden(), 0.0);
  return s;
}

ParamSet init_params(CellKind kind, int hidden, std::uint64_t seed, OutputActivation act) {
  ParamSet p(kind, hidden, act);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto fill = [&](std::span<double> xs) {
    for (double& x : xs) x = rng.uniform(-bound, bound);
  };
  for (int g = 0; g < p.gates(); ++g) {
    fill(p.W(g));
    fill(p.U(g));
  }
  fill(p.V());
  return p;
}

StepResult step(const ParamSet& params, const CellState& state, dyck::Token token) {
  const int H = params.hidden();
  const int x = static_cast<int>(token);
  StepResult r;
  r.gates.assign(params.gates() * H, 0.0);
  std::vector<double> pre(H);
  auto gate = [&](int g) { return std::span<double>(r.gates.data() + g * H, H); };

  switch (params.kind()) {
    case CellKind::Relu: {
      preactivation(params.W(0), params.U(0), params.b(0), x, state.h, pre);
      auto h = gate(0);
      for (int u = 0; u < H; ++u) h[u] = std::max(0.0, pre[u]);
      r.state.h.assign(h.begin(), h.end());
      break;
    }
    case CellKind::Lstm: {
      for (int g = 0; g < 4; ++g) {
        preactivation(params.W(g), params.U(g), params.b(g), x, state.h, pre);
        auto out = gate(g);
        for (int u = 0; u < H; ++u) out[u] = g == 3 ? std::tanh(pre[u]) : sigmoid(pre[u]);
      }
      auto i = gate(0), f = gate(1), o = gate(2), cand = gate(3);
      r.state.c.resize(H);
      r.state.h.resize(H);
      const bool squash = params.output_activation() == OutputActivation::Tanh;
      for (int u = 0; u < H; ++u) {
        const double c = f[u] * state.c[u] + i[u] * cand[u];
        r.state.c[u] = c;
        r.state.h[u] = o[u] * (squash ? std::tanh(c) : c);
      }
      break;
    }
    case CellKind::Gru: {
      for (int g = 0; g < 2; ++g) {
        preactivation(params.W(g), params.U(g), params.b(g), x, state.h, pre);
        auto out = gate(g);
        for (int u = 0; u < H; ++u) out[u] = sigmoid(pre[u]);
      }
      auto z = gate(0), rr = gate(1), n = gate(2);
      std::vector<double> reset_h(H);
      for (int u = 0; u < H; ++u) reset_h[u] = rr[u] * state.h[u];
      preactivation(params.W(2), params.U(2), params.b(2), x, reset_h, pre);
      r.state.h.resize(H);
      for (int u = 0; u < H; ++u) {
        n[u] = std::tanh(pre[u]);
        r.state.h[u] = (1.0 - z[u]) * state.h[u] + z[u] * n[u];
      }
      break;
    }
  }

  const auto V = params.V();
  const auto c = params.c();
  for (int k = 0; k < 2; ++k) {
    double z = c[k];
    for (int u = 0; u < H; ++u) z += V[k * H + u] * r.state.h[u];
    r.logits[k] = z;
    r.probs[k] = sigmoid(z);
  }

  if (!finite_all(r.state.h) || !finite_all(r.state.c) || !finite_all(r.gates) ||
      !finite_all(r.logits)) {
    throw NonFinite(0);
  }
  return r;
}

ForwardTrace forward(const ParamSet& params, std::span<const dyck::Token> tokens) {
  if (tokens.empty()) throw InvalidArgument("forward: empty token sequence");
  ForwardTrace trace{params.kind(), params.hidden(), {}};
  trace.steps.reserve(tokens.size());
  CellState state = CellState::zero(params);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    try {
      trace.steps.push_back(step(params, state, tokens[t]));
    } catch (const NonFinite&) {
      throw NonFinite(t);
    }
    state = trace.steps.back().state;
  }
  return trace;
}

ParamSet make_relu_counter(const CounterSpec& spec) {
  if (!(spec.m > 0.0)) throw InvalidArgument("make_relu_counter: m must be positive");
  ParamSet p(CellKind::Relu, 1);
  p.W(0)[0] = spec.m;
  p.W(0)[1] = -spec.m;
  p.U(0)[0] = 1.0;
  p.V()[0] = 0.0;
  p.V()[1] = 20.0 / spec.m;
  p.c()[0] = 10.0;
  p.c()[1] = -10.0;
  return p;
}

ParamSet make_saturated_lstm_counter(const CounterSpec& spec) {
  if (!(spec.scale > 0.0))
    throw InvalidArgument("make_saturated_lstm_counter: scale must be positive");
  const double s = spec.scale;
  ParamSet p(CellKind::Lstm, 1, OutputActivation::Identity);
  for (int g = 0; g < 3; ++g) p.b(g)[0] = s;
  p.W(3)[0] = s;
  p.W(3)[1] = -s;
  const double unit = sigmoid(s) * sigmoid(s) * std::tanh(s);
  p.V()[0] = 0.0;
  p.V()[1] = 20.0 / unit;
  p.c()[0] = 10.0;
  p.c()[1] = -10.0;
  return p;
}

}  // namespace countlab::cells
