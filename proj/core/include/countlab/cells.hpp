#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "countlab/dyck.hpp"

namespace countlab::cells {

enum class CellKind { Lstm, Gru, Relu };

std::string to_string(CellKind kind);        // "lstm", "gru", "relu"
CellKind kind_from_string(std::string_view name);

// Squashing applied to c_t before the output gate (LSTM only).
enum class OutputActivation { Tanh, Identity };

std::string to_string(OutputActivation act);  // "tanh", "identity"
OutputActivation activation_from_string(std::string_view name);

// Gate order inside a ParamSet:
//   LSTM  i, f, o, g (g is the tanh candidate)
//   GRU   z, r, n    (n is the tanh candidate)
//   RELU  h
int gate_count(CellKind kind);
std::string_view gate_name(CellKind kind, int gate);

// Weights and biases of one recurrent cell plus its two-unit sigmoid head,
// stored contiguously so optimizers and gradient checks can treat them as one
// flat vector. Per gate: W (H x 2, over the one-hot token), U (H x H), b (H);
// then the head V (2 x H) and c (2). All matrices are row-major.
class ParamSet {
 public:
  ParamSet(CellKind kind, int hidden,
           OutputActivation act = OutputActivation::Tanh);

  CellKind kind() const { return kind_; }
  int hidden() const { return hidden_; }
  OutputActivation output_activation() const { return act_; }
  int gates() const { return gate_count(kind_); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> W(int gate) { return block(gate_offset(gate), 2 * hidden_); }
  std::span<double> U(int gate) {
    return block(gate_offset(gate) + 2 * hidden_, hidden_ * hidden_);
  }
  std::span<double> b(int gate) {
    return block(gate_offset(gate) + 2 * hidden_ + hidden_ * hidden_, hidden_);
  }
  std::span<double> V() { return block(head_offset(), 2 * hidden_); }
  std::span<double> c() { return block(head_offset() + 2 * hidden_, 2); }

  std::span<const double> W(int gate) const { return cblock(gate_offset(gate), 2 * hidden_); }
  std::span<const double> U(int gate) const {
    return cblock(gate_offset(gate) + 2 * hidden_, hidden_ * hidden_);
  }
  std::span<const double> b(int gate) const {
    return cblock(gate_offset(gate) + 2 * hidden_ + hidden_ * hidden_, hidden_);
  }
  std::span<const double> V() const { return cblock(head_offset(), 2 * hidden_); }
  std::span<const double> c() const { return cblock(head_offset() + 2 * hidden_, 2); }

  // Named blocks in storage order: W_<g>, U_<g>, b_<g> per gate, then V, c.
  struct NamedBlock {
    std::string name;
    std::size_t offset;
    std::size_t size;
  };
  std::vector<NamedBlock> layout() const;

  bool all_finite() const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::size_t gate_stride() const { return 2 * hidden_ + hidden_ * hidden_ + hidden_; }
  std::size_t gate_offset(int gate) const { return gate * gate_stride(); }
  std::size_t head_offset() const { return gates() * gate_stride(); }
  std::span<double> block(std::size_t off, std::size_t n) { return {values_.data() + off, n}; }
  std::span<const double> cblock(std::size_t off, std::size_t n) const {
    return {values_.data() + off, n};
  }

  CellKind kind_;
  int hidden_;
  OutputActivation act_;
  std::vector<double> values_;
};

// Gradients share the parameter layout entry for entry.
using GradSet = ParamSet;

struct CellState {
  std::vector<double> h;
  std::vector<double> c;  // empty unless LSTM

  static CellState zero(const ParamSet& params);
};

// Everything produced by one timestep. `gates` holds gate activations
// gate-major (gate * H + unit) in the order given by gate_name().
struct StepResult {
  CellState state;
  std::vector<double> gates;
  std::array<double, 2> logits{};
  std::array<double, 2> probs{};
};

// Weights drawn uniformly from [-1/sqrt(H), 1/sqrt(H)], biases zero.
ParamSet init_params(CellKind kind, int hidden, std::uint64_t seed,
                     OutputActivation act = OutputActivation::Tanh);

// Throws NonFinite(0) if any produced value is not finite.
StepResult step(const ParamSet& params, const CellState& state, dyck::Token token);

struct ForwardTrace {
  CellKind kind = CellKind::Relu;
  int hidden = 1;
  std::vector<StepResult> steps;

  std::size_t size() const { return steps.size(); }
};

// Runs step() from the zero state; NonFinite carries the failing timestep.
ForwardTrace forward(const ParamSet& params, std::span<const dyck::Token> tokens);

// Exact counter shapes. `m` is the ReLU increment; `scale` is the LSTM
// saturation sharpness s (gate and candidate pre-activations at +-s).
struct CounterSpec {
  double m = 1.0;
  double scale = 50.0;
};

// Open logit pinned at +10; close logit (20/m) h - 10 crosses zero at h = m/2.
ParamSet make_relu_counter(const CounterSpec& spec);

// Gates i, f, o sit at sigmoid(s), candidate at +-tanh(s), identity output
// activation. The close head is the ReLU scheme with the per-step unit
// sigmoid(s)^2 tanh(s) in place of m.
ParamSet make_saturated_lstm_counter(const CounterSpec& spec);

inline double sigmoid(double x) {
  // Split by sign to avoid overflow in exp for large |x|.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace countlab::cells
