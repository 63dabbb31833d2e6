#include <doctest.h>

#include <cmath>

#include "countlab/cells.hpp"
#include "countlab/errors.hpp"
#include "countlab/evaluation.hpp"

using namespace countlab;
using namespace countlab::cells;
using dyck::DyckWord;
using dyck::Token;

namespace {

constexpr CellKind kKinds[] = {CellKind::Lstm, CellKind::Gru, CellKind::Relu};

std::vector<Token> toks(std::string_view s) {
  std::vector<Token> out;
  for (char ch : s) out.push_back(ch == '(' ? Token::Open : Token::Close);
  return out;
}

}  // namespace

TEST_CASE("init_params is deterministic and bounded") {
  for (CellKind k : kKinds) {
    CHECK(init_params(k, 1, 17) == init_params(k, 1, 17));
    const auto p = init_params(k, 1, 17);
    for (double v : p.values()) CHECK(std::abs(v) <= 1.0);
    for (int g = 0; g < p.gates(); ++g) CHECK(p.b(g)[0] == 0.0);
    CHECK(p.c()[0] == 0.0);

    const auto p4 = init_params(k, 4, 3);
    for (double v : p4.values()) CHECK(std::abs(v) <= 0.5);
  }
  int differing = 0;
  for (std::uint64_t s = 0; s < 100; ++s)
    differing += init_params(CellKind::Lstm, 1, s) != init_params(CellKind::Lstm, 1, s + 1000);
  CHECK(differing == 100);
}

TEST_CASE("ParamSet layout") {
  ParamSet p(CellKind::Gru, 2);
  CHECK(p.size() == 3 * (4 + 4 + 2) + 4 + 2);
  const auto layout = p.layout();
  CHECK(layout.front().name == "W_z");
  CHECK(layout.back().name == "c");
  std::size_t total = 0;
  for (const auto& b : layout) total += b.size;
  CHECK(total == p.size());
  CHECK_THROWS_AS(ParamSet(CellKind::Relu, 0), InvalidArgument);
}

TEST_CASE("step with all-zero parameters") {
  {
    ParamSet p(CellKind::Relu, 1);
    p.c()[0] = 0.3;
    p.c()[1] = -0.7;
    for (Token t : {Token::Open, Token::Close}) {
      const auto r = step(p, CellState::zero(p), t);
      CHECK(r.state.h[0] == 0.0);
      CHECK(r.logits[0] == 0.3);
      CHECK(r.logits[1] == -0.7);
    }
  }
  {
    ParamSet p(CellKind::Lstm, 1);
    const auto r = step(p, CellState::zero(p), Token::Open);
    CHECK(r.gates == std::vector<double>{0.5, 0.5, 0.5, 0.0});
    CHECK(r.state.c[0] == 0.0);
    CHECK(r.state.h[0] == 0.0);
  }
  {
    ParamSet p(CellKind::Gru, 1);
    CellState s = CellState::zero(p);
    s.h[0] = 0.8;
    const auto r = step(p, s, Token::Close);
    CHECK(r.gates == std::vector<double>{0.5, 0.5, 0.0});
    CHECK(r.state.h[0] == doctest::Approx(0.4));
  }
}

TEST_CASE("step reports non-finite values") {
  ParamSet p(CellKind::Relu, 1);
  p.U(0)[0] = 1e308;
  p.W(0)[0] = 1e308;
  CellState s = CellState::zero(p);
  s.h[0] = 10.0;
  CHECK_THROWS_AS(step(p, s, Token::Open), NonFinite);
  try {
    forward(p, toks("(((("));
    FAIL("expected NonFinite");
  } catch (const NonFinite& e) {
    CHECK(e.timestep() == 1);
  }
}

TEST_CASE("forward: single step and prefix property") {
  for (CellKind k : kKinds) {
    const auto p = init_params(k, 2, 5);
    const auto one = forward(p, toks("("));
    const auto direct = step(p, CellState::zero(p), Token::Open);
    REQUIRE(one.size() == 1);
    CHECK(one.steps[0].state.h == direct.state.h);
    CHECK(one.steps[0].probs == direct.probs);

    const auto full = toks("(()(()))()");
    const auto whole = forward(p, full);
    for (std::size_t n = 1; n <= full.size(); ++n) {
      const auto prefix = forward(p, std::span(full).first(n));
      for (std::size_t t = 0; t < n; ++t) {
        CHECK(prefix.steps[t].state.h == whole.steps[t].state.h);
        CHECK(prefix.steps[t].logits == whole.steps[t].logits);
      }
    }
  }
  CHECK_THROWS_AS(forward(ParamSet(CellKind::Relu, 1), {}), InvalidArgument);
}

TEST_CASE("gate activations stay in their codomains") {
  Rng rng(404);
  for (int trial = 0; trial < 1000; ++trial) {
    const CellKind k = kKinds[trial % 3];
    ParamSet p(k, 1 + trial % 3, trial % 2 ? OutputActivation::Tanh : OutputActivation::Identity);
    for (double& v : p.values()) v = rng.uniform(-3.0, 3.0);
    const auto w = dyck::generate_word({1, 2, 40}, rng);
    const auto trace = forward(p, w.tokens());
    const int H = p.hidden();
    for (const auto& s : trace.steps) {
      for (int g = 0; g < p.gates(); ++g) {
        for (int u = 0; u < H; ++u) {
          const double a = s.gates[g * H + u];
          const bool tanh_gate = (k == CellKind::Lstm && g == 3) || (k == CellKind::Gru && g == 2);
          if (k == CellKind::Relu) {
            REQUIRE(a >= 0.0);
          } else if (tanh_gate) {
            REQUIRE((a >= -1.0 && a <= 1.0));
          } else {
            REQUIRE((a >= 0.0 && a <= 1.0));
          }
        }
      }
      for (double y : s.probs) REQUIRE((y >= 0.0 && y <= 1.0));
    }
  }
}

TEST_CASE("exact ReLU counter") {
  const auto p = make_relu_counter({1.0, 0.0});
  const auto trace = forward(p, toks("(()"));
  CHECK(evaluation::counter_trace(trace) == std::vector<double>{1, 2, 1});

  const auto w = DyckWord::parse("()");
  const auto t2 = forward(p, w.tokens());
  const auto targets = dyck::next_targets(w);
  for (std::size_t t = 0; t < w.size(); ++t) CHECK(evaluation::token_correct(t2.steps[t].probs, targets[t]));

  const auto half = make_relu_counter({0.5, 0.0});
  const auto w4 = DyckWord::parse("(())");
  CHECK(evaluation::counter_trace(forward(half, w4.tokens())) == std::vector<double>{0.5, 1.0, 0.5, 0.0});
  CHECK_FALSE(evaluation::fpf(half, w4).fpf.has_value());

  CHECK_FALSE(evaluation::fpf(p, dyck::generate_zigzag({1000, 2000})).fpf.has_value());
  CHECK_THROWS_AS(make_relu_counter({0.0, 0.0}), InvalidArgument);
}

TEST_CASE("ReLU counter is linear in depth") {
  for (double m : {1.0, 0.5, 0.25, 2.0}) {
    const auto p = make_relu_counter({m, 0.0});
    CellState s = CellState::zero(p);
    const int depth = m >= 1.0 ? 1000000 : 100000;
    for (int d = 1; d <= depth; ++d) {
      s = step(p, s, Token::Open).state;
      if (s.h[0] != m * d) {
        FAIL("h != m*depth at depth " << d << " for m=" << m);
      }
    }
    for (int d = depth - 1; d >= 0; --d) {
      s = step(p, s, Token::Close).state;
      if (s.h[0] != m * d) FAIL("h != m*depth on descent at depth " << d);
    }
  }
}

TEST_CASE("ReLU counter ignores token order at equal depth") {
  const auto p = make_relu_counter({1.0, 0.0});
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto a = dyck::generate_word({1, 2, 40}, rng);
    const auto b = dyck::generate_word({1, 2, 40}, rng);
    const auto ta = forward(p, a.tokens());
    const auto tb = forward(p, b.tokens());
    for (std::size_t x = 0; x < a.size(); ++x)
      for (std::size_t y = 0; y < b.size(); ++y)
        if (a.depths()[x] == b.depths()[y]) REQUIRE(ta.steps[x].state.h == tb.steps[y].state.h);
  }
}

TEST_CASE("saturated LSTM counter") {
  const auto p = make_saturated_lstm_counter({1.0, 50.0});
  const auto c = evaluation::counter_trace(forward(p, toks("(())")));
  const std::vector<double> expect{1, 2, 1, 0};
  for (std::size_t t = 0; t < 4; ++t) CHECK(std::abs(c[t] - expect[t]) <= 1e-15);

  const auto zz = dyck::generate_zigzag({500, 2000});
  std::vector<std::size_t> fpfs;
  for (double s : {2.0, 4.0, 8.0, 16.0}) {
    const auto rec = evaluation::fpf(make_saturated_lstm_counter({1.0, s}), zz);
    fpfs.push_back(rec.value_for_mean());
  }
  CHECK(fpfs[0] < 2000);
  for (std::size_t i = 1; i < fpfs.size(); ++i) CHECK(fpfs[i] >= fpfs[i - 1]);
  CHECK_FALSE(evaluation::fpf(make_saturated_lstm_counter({1.0, 16.0}), zz).fpf.has_value());
  CHECK_THROWS_AS(make_saturated_lstm_counter({1.0, 0.0}), InvalidArgument);
}

TEST_CASE("LSTM counter drift at depth-zero points shrinks with s") {
  const auto zz = dyck::generate_zigzag({50, 2000});
  double prev = INFINITY;
  for (double s : {8.0, 10.0, 12.0, 16.0, 20.0}) {
    const auto c = evaluation::counter_trace(forward(make_saturated_lstm_counter({1.0, s}), zz.tokens()));
    double worst = 0.0;
    for (std::size_t t = 0; t < zz.size(); ++t)
      if (zz.depths()[t] == 0) worst = std::max(worst, std::abs(c[t]));
    // After the first j opens and j closes from c = 0 the recurrence
    // c <- f c + u x (f = sigmoid(s), u = sigmoid(s) tanh(s)) gives
    // c_2j = -u (1 - f^j)^2 / (1 - f).
    const double f = sigmoid(s), u = f * std::tanh(s);
    const double first = -u * std::pow(1.0 - std::pow(f, 50), 2) / (1.0 - f);
    CHECK(c[99] == doctest::Approx(first).epsilon(1e-9));
    CHECK(worst < prev);
    prev = worst;
  }
}

TEST_CASE("kind and activation names") {
  for (CellKind k : kKinds) CHECK(kind_from_string(to_string(k)) == k);
  CHECK(kind_from_string("LSTM") == CellKind::Lstm);
  CHECK_THROWS_AS(kind_from_string("rnn"), InvalidArgument);
  CHECK(activation_from_string("identity") == OutputActivation::Identity);
}
