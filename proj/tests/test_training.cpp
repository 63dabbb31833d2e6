#include <doctest.h>

#include <cmath>

#include "countlab/checkpoint.hpp"
#include "countlab/errors.hpp"
#include "countlab/training.hpp"
#include "tmpdir.hpp"

using namespace countlab;
using namespace countlab::training;
using cells::CellKind;
using dyck::DyckWord;
using dyck::Token;

namespace {

constexpr CellKind kKinds[] = {CellKind::Lstm, CellKind::Gru, CellKind::Relu};

dyck::DatasetSplit small_split(dyck::SplitName name, std::size_t n, std::uint64_t seed,
                               std::size_t max_len = 20) {
  return dyck::generate_split(name, {n, 2, max_len, 0.5, 0.25, seed}, {});
}

ParamSet random_params(CellKind k, int H, Rng& rng,
                       cells::OutputActivation act = cells::OutputActivation::Tanh) {
  ParamSet p(k, H, act);
  for (double& v : p.values()) v = rng.uniform(-1.0, 1.0);
  return p;
}

}  // namespace

TEST_CASE("sequence loss examples") {
  const auto w = DyckWord::parse("()");
  const auto targets = dyck::next_targets(w);

  // Zero parameters predict 0.5 everywhere: every output is off by 0.5.
  ParamSet zero(CellKind::Relu, 1);
  CHECK(sequence_loss(cells::forward(zero, w.tokens()), targets) == doctest::Approx(0.25));

  const auto counter = cells::make_relu_counter({1.0, 0.0});
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto word = dyck::generate_word({1, 2, 50}, rng);
    CHECK(sequence_loss(cells::forward(counter, word.tokens()), dyck::next_targets(word)) < 1e-4);
  }

  const auto trace = cells::forward(zero, DyckWord::parse("(())").tokens());
  CHECK_THROWS_AS(sequence_loss(trace, targets), LengthMismatch);
}

TEST_CASE("cross-entropy of a coin flip is log 2") {
  ParamSet zero(CellKind::Gru, 2);
  const auto w = DyckWord::parse("(()())");
  CHECK(sequence_loss(cells::forward(zero, w.tokens()), dyck::next_targets(w), LossKind::CrossEntropy) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("single-step ReLU gradient by hand") {
  ParamSet p(CellKind::Relu, 1);
  p.W(0)[0] = 0.7;
  p.W(0)[1] = -0.4;
  p.U(0)[0] = 0.3;
  p.b(0)[0] = 0.1;
  p.V()[0] = -0.6;
  p.V()[1] = 0.9;
  p.c()[0] = 0.2;
  p.c()[1] = -0.5;

  const std::vector<Token> tokens{Token::Open};
  const dyck::TargetSeq targets{{true, true}};
  const auto lg = bptt_grads(p, tokens, targets);

  const double h = 0.7 + 0.1;
  const double y0 = 1.0 / (1.0 + std::exp(-(-0.6 * h + 0.2)));
  const double y1 = 1.0 / (1.0 + std::exp(-(0.9 * h - 0.5)));
  // L = ((y0 - 1)^2 + (y1 - 1)^2) / 2
  const double dz0 = (y0 - 1.0) * y0 * (1.0 - y0);
  const double dz1 = (y1 - 1.0) * y1 * (1.0 - y1);
  const double dh = dz0 * -0.6 + dz1 * 0.9;

  CHECK(lg.loss == doctest::Approx(((y0 - 1) * (y0 - 1) + (y1 - 1) * (y1 - 1)) / 2).epsilon(1e-14));
  const auto& g = lg.grads;
  CHECK(std::abs(g.W(0)[0] - dh) < 1e-12);
  CHECK(g.W(0)[1] == 0.0);
  CHECK(g.U(0)[0] == 0.0);
  CHECK(std::abs(g.b(0)[0] - dh) < 1e-12);
  CHECK(std::abs(g.V()[0] - dz0 * h) < 1e-12);
  CHECK(std::abs(g.V()[1] - dz1 * h) < 1e-12);
  CHECK(std::abs(g.c()[0] - dz0) < 1e-12);
  CHECK(std::abs(g.c()[1] - dz1) < 1e-12);
}

TEST_CASE("BPTT agrees with central differences") {
  Rng rng(77);
  for (CellKind k : kKinds) {
    for (int i = 0; i < 20; ++i) {
      const int H = 1 + i % 2;
      const auto act = (k == CellKind::Lstm && i % 4 >= 2) ? cells::OutputActivation::Identity
                                                           : cells::OutputActivation::Tanh;
      const auto p = random_params(k, H, rng, act);
      const auto w = dyck::generate_word({1, 2, 12}, rng);
      for (LossKind loss : {LossKind::Mse, LossKind::CrossEntropy}) {
        const double err = fd_check(p, w.tokens(), dyck::next_targets(w), 1e-5, loss);
        INFO("kind=" << cells::to_string(k) << " i=" << i << " word=" << w.str());
        CHECK(err <= 1e-4);
      }
    }
  }
}

TEST_CASE("gradient check catches a wrong gradient and a coarse step") {
  Rng rng(5);
  const auto p = random_params(CellKind::Lstm, 2, rng);
  const auto w = DyckWord::parse("(()(()))");
  const auto targets = dyck::next_targets(w);

  const GradFn flipped = [](const ParamSet& q, std::span<const Token> t, const dyck::TargetSeq& y) {
    auto lg = bptt_grads(q, t, y);
    for (double& g : lg.grads.values()) g = -g;
    return lg;
  };
  CHECK(fd_check(p, w.tokens(), targets, 1e-5, LossKind::Mse, flipped) > 1e-4);

  // Truncation error at a huge step must be visible.
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto q = random_params(CellKind::Gru, 2, rng);
    worst = std::max(worst, fd_check(q, w.tokens(), targets, 0.1));
  }
  CHECK(worst > 1e-4);
}

TEST_CASE("gradients at the exact counters") {
  const auto w = DyckWord::parse("((()())())");
  const auto targets = dyck::next_targets(w);
  CHECK(fd_check(cells::make_relu_counter({1.0, 0.0}), w.tokens(), targets, 1e-6) < 1e-4);
  CHECK(fd_check(cells::make_saturated_lstm_counter({1.0, 8.0}), w.tokens(), targets, 1e-6) < 1e-4);
}

TEST_CASE("Adam step examples") {
  ParamSet p(CellKind::Relu, 1);
  for (double& v : p.values()) v = 0.5;
  auto opt = OptState::zeros(p);

  ParamSet zero_grad(CellKind::Relu, 1);
  const ParamSet before = p;
  adam_step(opt, p, zero_grad, 0.01);
  CHECK(p == before);
  CHECK(opt.t == 1);

  ParamSet q(CellKind::Relu, 1);
  auto opt2 = OptState::zeros(q);
  ParamSet g(CellKind::Relu, 1);
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = (i % 2 ? -1.0 : 1.0) * (0.1 + i);
  adam_step(opt2, q, g, 0.01);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double expect = (i % 2 ? 0.01 : -0.01);
    CHECK(q.values()[i] == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("Adam descends a fixed-gradient direction monotonically") {
  ParamSet p(CellKind::Gru, 1);
  auto opt = OptState::zeros(p);
  ParamSet g(CellKind::Gru, 1);
  for (double& v : g.values()) v = 0.3;
  double prev = 0.0;
  for (int i = 0; i < 100; ++i) {
    adam_step(opt, p, g, 0.01);
    REQUIRE(p.values()[0] < prev);
    prev = p.values()[0];
  }
  CHECK(opt.t == 100);
}

TEST_CASE("TrainConfig validation and checkpoint epochs") {
  TrainConfig c;
  c.epochs = 10;
  CHECK(c.effective_checkpoint_epochs() == std::vector<int>{1, 5, 10});
  c.epochs = 7;
  CHECK(c.effective_checkpoint_epochs() == std::vector<int>{1, 5, 7});
  c.hidden = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.hidden = 1;
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK(default_learning_rate(CellKind::Gru) == 0.001);
  CHECK(default_learning_rate(CellKind::Lstm) == 0.01);
}

TEST_CASE("train_run bookkeeping") {
  const auto train = small_split(dyck::SplitName::Train, 60, 1);
  const auto val = small_split(dyck::SplitName::Validation, 30, 2);

  TrainConfig cfg;
  cfg.kind = CellKind::Relu;
  cfg.epochs = 1;
  cfg.seed = 9;
  const auto r = train_run(cfg, train, val);
  CHECK_FALSE(r.failed);
  CHECK(r.epochs.size() == 1);
  CHECK(r.checkpoints.size() == 1);
  CHECK(r.best_epoch == 1);
  CHECK(r.adam_steps == 60);
  REQUIRE(r.best_params.has_value());
  CHECK(*r.best_params == r.checkpoints[0].params);

  cfg.epochs = 3;
  const auto a = train_run(cfg, train, val);
  const auto b = train_run(cfg, train, val);
  CHECK(a.adam_steps == 180);
  REQUIRE(a.epochs.size() == 3);
  for (int e = 0; e < 3; ++e) {
    CHECK(a.epochs[e].train_loss == b.epochs[e].train_loss);
    CHECK(a.epochs[e].val_loss == b.epochs[e].val_loss);
  }
  CHECK(*a.best_params == *b.best_params);
  double best = INFINITY;
  int best_epoch = 0;
  for (const auto& m : a.epochs)
    if (m.val_loss < best) best = m.val_loss, best_epoch = m.epoch;
  CHECK(a.best_epoch == best_epoch);
  CHECK(a.best_val_loss == best);

  cfg.seed = 10;
  const auto c = train_run(cfg, train, val);
  CHECK(*c.best_params != *a.best_params);
}

TEST_CASE("LSTM training lowers validation loss") {
  const auto train = small_split(dyck::SplitName::Train, 300, 3);
  const auto val = small_split(dyck::SplitName::Validation, 100, 4);
  TrainConfig cfg;
  cfg.kind = CellKind::Lstm;
  cfg.epochs = 3;
  cfg.seed = 21;
  const double initial = mean_loss(cells::init_params(cfg.kind, 1, cfg.seed), val);
  const auto r = train_run(cfg, train, val);
  CHECK_FALSE(r.failed);
  CHECK(r.best_val_loss < 0.5 * initial);
}

TEST_CASE("divergent training is recorded as a failed run") {
  const auto train = small_split(dyck::SplitName::Train, 40, 5);
  const auto val = small_split(dyck::SplitName::Validation, 10, 6);
  TrainConfig cfg;
  cfg.kind = CellKind::Relu;
  cfg.epochs = 2;
  cfg.lr = 1e308;
  cfg.seed = 1;
  const auto r = train_run(cfg, train, val);
  CHECK(r.failed);
  CHECK_FALSE(r.failure.empty());
}

TEST_CASE("resumed training equals uninterrupted training") {
  TempDir tmp("resume");
  const auto train = small_split(dyck::SplitName::Train, 80, 7);
  const auto val = small_split(dyck::SplitName::Validation, 30, 8);
  TrainConfig cfg;
  cfg.kind = CellKind::Gru;
  cfg.lr = 0.01;
  cfg.epochs = 4;
  cfg.checkpoint_epochs = {1, 2};
  cfg.seed = 33;

  const auto full = train_run(cfg, train, val, {"g", tmp.path() / "full"});

  RunOptions part{"g", tmp.path() / "part"};
  part.stop_after_epoch = 2;
  train_run(cfg, train, val, part);
  part.stop_after_epoch.reset();
  part.resume = true;
  const auto resumed = train_run(cfg, train, val, part);

  CHECK(resumed.adam_steps == full.adam_steps);
  REQUIRE(resumed.epochs.size() == full.epochs.size());
  for (std::size_t e = 0; e < full.epochs.size(); ++e) {
    CHECK(resumed.epochs[e].train_loss == full.epochs[e].train_loss);
    CHECK(resumed.epochs[e].val_loss == full.epochs[e].val_loss);
  }
  CHECK(resumed.best_epoch == full.best_epoch);
  CHECK(*resumed.best_params == *full.best_params);
  CHECK(load_checkpoint(epoch_checkpoint_path(tmp.path() / "part", 4)).params ==
        load_checkpoint(epoch_checkpoint_path(tmp.path() / "full", 4)).params);
}

TEST_CASE("checkpoints reload to the recorded validation loss") {
  TempDir tmp("reload");
  const auto train = small_split(dyck::SplitName::Train, 50, 11);
  const auto val = small_split(dyck::SplitName::Validation, 40, 12);
  TrainConfig cfg;
  cfg.kind = CellKind::Lstm;
  cfg.epochs = 2;
  cfg.checkpoint_epochs = {1};
  cfg.seed = 4;
  const auto r = train_run(cfg, train, val, {"l", tmp.path()});

  for (const auto& ref : r.checkpoints) {
    const auto ck = load_checkpoint(ref.path);
    CHECK(ck.params == ref.params);
    CHECK(ck.epoch == ref.epoch);
    CHECK(ck.run_id == "l");
    CHECK(std::abs(mean_loss(ck.params, val) - ck.val_loss) <= 1e-12);
  }
  const auto best = load_checkpoint(best_checkpoint_path(tmp.path()));
  CHECK(best.epoch == r.best_epoch);
  CHECK(std::abs(mean_loss(best.params, val) - r.best_val_loss) <= 1e-12);
  CHECK(std::filesystem::exists(metrics_path(tmp.path())));
}

TEST_CASE("checkpoint JSON round trip and errors") {
  Rng rng(6);
  for (CellKind k : kKinds) {
    Checkpoint ck{random_params(k, 3, rng), 99, 5, "x-01", 0.125, 0.0625, std::nullopt};
    const auto back = checkpoint_from_json(checkpoint_to_json(ck));
    CHECK(back.params == ck.params);
    CHECK(back.seed == 99);
    CHECK(back.epoch == 5);
    CHECK(back.val_loss == 0.0625);
    CHECK_FALSE(back.resume.has_value());
  }
  CHECK_THROWS_AS(checkpoint_from_json("{"), DataError);
  CHECK_THROWS_AS(checkpoint_from_json(R"({"kind":"lstm"})"), DataError);
}

TEST_CASE("select_best_runs") {
  auto rec = [](std::string id, double loss, bool failed = false) {
    RunRecord r;
    r.run_id = std::move(id);
    r.best_val_loss = loss;
    r.failed = failed;
    r.best_params = ParamSet(CellKind::Relu, 1);
    return r;
  };
  const auto picked = select_best_runs(
      {rec("r3", 0.2), rec("r1", 0.1), rec("r0", 0.05, true), rec("r2", 0.2), rec("r4", 0.3)}, 3);
  REQUIRE(picked.size() == 3);
  CHECK(picked[0].run_id == "r1");
  CHECK(picked[1].run_id == "r2");
  CHECK(picked[2].run_id == "r3");
  CHECK(select_best_runs({rec("a", 1.0, true)}, 2).empty());
  auto no_params = rec("b", 0.01);
  no_params.best_params.reset();
  CHECK(select_best_runs({no_params}, 1).empty());
}
