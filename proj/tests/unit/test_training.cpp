#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "kge/checkpoint.hpp"
#include "kge/error.hpp"
#include "kge/training.hpp"
#include "support.hpp"

using namespace kge;
using namespace kge::testing;

namespace {

// Entity i -> i+1 (mod n) under one relation: every query has one answer.
Dataset ring(std::size_t n) {
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < n; ++i) lines.push_back("e" + std::to_string(i) + "\tnext\te" + std::to_string((i + 1) % n));
  return add_reciprocals(parse_dataset(lines, {lines[0], lines[1]}, {lines[2]}, false));
}

}  // namespace

TEST_CASE("weighted cross entropy examples") {
  const auto uniform = weighted_cross_entropy(Vec(7, 0.3), 2, 0.5);
  CHECK(uniform.loss == doctest::Approx(0.5 * std::log(7.0)));
  const auto peaked = weighted_cross_entropy(Vec{10, 0, 0}, 0, 1.0);
  CHECK(peaked.loss == doctest::Approx(std::log1p(2.0 * std::exp(-10.0))).epsilon(1e-10));
  CHECK(peaked.loss == doctest::Approx(9.08e-5).epsilon(1e-3));
  double sum = 0.0;
  for (double g : weighted_cross_entropy(Vec{1, -2, 0.5, 3}, 1, 0.8).grad) sum += g;
  CHECK(std::abs(sum) <= 1e-15);
  CHECK_THROWS_AS(weighted_cross_entropy(Vec{1, 2}, 2, 1.0), Error);
  // No overflow for huge scores.
  CHECK(std::isfinite(weighted_cross_entropy(Vec{1000, 999}, 1, 1.0).loss));
}

TEST_CASE("cross entropy is linear in the weight and its gradient matches differences") {
  std::mt19937_64 rng(41);
  Vec s(6);
  for (double& x : s) x = std::normal_distribution<double>()(rng);
  const auto one = weighted_cross_entropy(s, 3, 1.0);
  const auto w = weighted_cross_entropy(s, 3, 0.37);
  CHECK(w.loss == doctest::Approx(0.37 * one.loss).epsilon(1e-14));
  for (std::size_t k = 0; k < s.size(); ++k) {
    Vec up = s, down = s;
    up[k] += 1e-6;
    down[k] -= 1e-6;
    const double fd = (weighted_cross_entropy(up, 3, 0.37).loss - weighted_cross_entropy(down, 3, 0.37).loss) / 2e-6;
    CHECK(w.grad[k] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("adagrad arithmetic") {
  Vec p{1.0}, st{0.0};
  adagrad_update(p, Vec{3.0}, st, 0.1, 1e-10);
  CHECK(st[0] == 9.0);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-9));
  const double before = p[0];
  adagrad_update(p, Vec{3.0}, st, 0.1, 1e-10);
  CHECK(before - p[0] == doctest::Approx(0.1 * 3 / std::sqrt(18.0)).epsilon(1e-9));

  Vec q{0.5}, sq{2.0};
  adagrad_update(q, Vec{0.0}, sq, 0.1, 1e-10);
  CHECK(q[0] == 0.5);
  CHECK(sq[0] == 2.0);

  // Constant gradients give nonincreasing steps and monotone accumulators.
  Vec x{0.0}, acc{0.0};
  double last_step = 1e300, last_acc = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double old = x[0];
    adagrad_update(x, Vec{-0.7}, acc, 0.05, 1e-10);
    CHECK(x[0] - old <= last_step);
    CHECK(acc[0] >= last_acc);
    last_step = x[0] - old;
    last_acc = acc[0];
  }
}

TEST_CASE("adagrad_step leaves untouched rows alone") {
  std::mt19937_64 rng(42);
  const ModelShape shape = small_shape(ModelKind::CP, 4);
  ModelParams p = random_params(shape, rng);
  const ModelParams before = p;
  AdagradState state(shape);
  GradientSet g(shape);
  const auto batch = random_batch(shape, 1, rng);
  batch_objective(p, batch, RegSpec{}, 0, 1, &g);
  adagrad_step(p, g, state, 0.1, 1e-10);
  for (Id r = 0; r < shape.relations; ++r) {
    if (r == batch[0].relation) continue;
    for (std::size_t d = 0; d < 4; ++d) CHECK(p.relation(r, d) == before.relation(r, d));
  }
  for (Id e = 0; e < shape.entities; ++e) {
    if (e == batch[0].head) continue;
    for (std::size_t d = 0; d < 4; ++d) CHECK(p.head(e, d) == before.head(e, d));
  }
  for (double a : state.accum.head.flat()) CHECK(a >= 0.0);
}

TEST_CASE("batch objective gradient matches finite differences") {
  std::mt19937_64 rng(43);
  for (ModelKind kind : kAllKinds) {
    for (const RegSpec& spec : applicable_specs(kind)) {
      CAPTURE(to_string(kind));
      CAPTURE(to_string(spec.kind));
      const ModelShape shape = small_shape(kind, 4);
      const ModelParams p = random_params(shape, rng, 0.5);
      const auto batch = random_batch(shape, 4, rng);
      GradientSet g(shape);
      const double loss = batch_objective(p, batch, spec, 3, 1, &g);
      CHECK(loss == doctest::Approx(batch_objective(p, batch, spec, 3)).epsilon(1e-13));
      const GradientSet fd =
          numeric_gradient(p, [&](const ModelParams& m) { return batch_objective(m, batch, spec, 3); });
      CHECK(max_rel_error(g, fd) <= 1e-4);
    }
  }
}

TEST_CASE("a small step decreases the batch loss") {
  std::mt19937_64 rng(44);
  for (ModelKind kind : kAllKinds) {
    const ModelShape shape = small_shape(kind, 4);
    ModelParams p = random_params(shape, rng, 0.5);
    const auto batch = random_batch(shape, 5, rng);
    GradientSet g(shape);
    const double before = batch_objective(p, batch, RegSpec{}, 0, 1, &g);
    AdagradState state(shape);
    adagrad_step(p, g, state, 1e-3, 1e-10);
    CHECK(batch_objective(p, batch, RegSpec{}, 0) < before);
  }
}

TEST_CASE("config text round trip and validation") {
  TrainConfig c;
  c.model = ModelKind::TComplEx;
  c.dim = 64;
  c.batch_size = 17;
  c.lr = 0.123456789012345;
  c.epochs = 3;
  c.seed = 99;
  c.valid_every = 2;
  c.w0 = 0.1;
  c.reg.kind = RegKind::TWeighted;
  c.reg.lambda = 1e-2;
  c.reg.lambda1 = 0.1;
  c.reg.lambda2 = 0.2;
  c.reg.lambda3 = 0.3;
  c.reg.lambda4 = 0.4;
  c.reg.smoother = SmootherKind::L3;
  c.reg.smoother_weight = 0.01;
  c.reg.conjugate_tail = true;
  c.precision = Precision::F32;
  c.init_scale = 2e-3;
  c.adagrad_eps = 1e-8;
  c.threads = 3;
  const std::string text = to_config_text(c);
  CHECK(to_config_text(parse_config(text)) == text);
  CHECK(parse_config(text).lr == c.lr);

  CHECK_THROWS_AS(parse_config("nope=1"), ConfigError);
  CHECK_THROWS_AS(parse_config("dim=abc"), ConfigError);
  CHECK(parse_config("# comment\n dim = 12 \n").dim == 12);

  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = TrainConfig{};
  bad.model = ModelKind::ComplEx;
  bad.dim = 5;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = TrainConfig{};
  bad.lr = 0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = TrainConfig{};
  bad.model = ModelKind::RESCAL;
  bad.reg.kind = RegKind::N3;
  CHECK_THROWS_AS(validate(bad), UnsupportedError);
}

TEST_CASE("fit memorizes a 20-fact ring") {
  const Dataset d = ring(20);
  const FilterIndex f = build_filter_index(d);
  TrainConfig c;
  c.model = ModelKind::CP;
  c.dim = 8;
  c.epochs = 200;
  c.valid_every = 50;
  const FitResult r = fit(d, f, c);
  REQUIRE(r.log.size() == 4);
  CHECK(r.log.back().train_loss < 0.1 * std::log(20.0));
  CHECK(r.best_valid.mrr > 0.9);
  for (const LogEntry& e : r.log) {
    CHECK(e.valid.hits1 <= e.valid.hits3);
    CHECK(e.valid.hits3 <= e.valid.hits10);
    CHECK(e.valid.mrr >= e.valid.hits1);
  }
}

TEST_CASE("fit is deterministic and leaves the dataset alone") {
  std::mt19937_64 rng(45);
  const Dataset d = add_reciprocals(
      parse_dataset(random_kg_lines(12, 3, 60, rng, 4), random_kg_lines(12, 3, 10, rng, 4), {}, true));
  const Dataset copy = d;
  const FilterIndex f = build_filter_index(d);
  TrainConfig c;
  c.model = ModelKind::TComplEx;
  c.dim = 6;
  c.epochs = 6;
  c.valid_every = 2;
  c.batch_size = 16;
  c.reg.kind = RegKind::TDura1;
  c.reg.lambda = 0.05;
  c.reg.smoother = SmootherKind::L3;
  c.reg.smoother_weight = 0.01;
  std::ostringstream log_a, log_b;
  const FitResult a = fit(d, f, c, {&log_a, std::nullopt});
  const FitResult b = fit(d, f, c, {&log_b, std::nullopt});
  CHECK(a.best == b.best);
  CHECK(log_a.str() == log_b.str());
  CHECK(d.train == copy.train);
  CHECK(d.valid == copy.valid);
  CHECK(a.log.size() == 3);
  CHECK(a.best == rounded_to_f32(a.best));

  TrainConfig other = c;
  other.seed = 1;
  CHECK_FALSE(fit(d, f, other).best == a.best);
}

TEST_CASE("f32 precision keeps parameters representable as float") {
  const Dataset d = ring(10);
  const FilterIndex f = build_filter_index(d);
  TrainConfig c;
  c.dim = 4;
  c.epochs = 3;
  c.precision = Precision::F32;
  const FitResult r = fit(d, f, c);
  CHECK(r.best == rounded_to_f32(r.best));
}

TEST_CASE("divergence aborts with a diagnostic") {
  const Dataset d = ring(10);
  const FilterIndex f = build_filter_index(d);
  TrainConfig c;
  c.dim = 4;
  c.epochs = 5;
  c.lr = 1e200;
  try {
    fit(d, f, c);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
    CHECK(msg.find("max |param|") != std::string::npos);
  }
}

TEST_CASE("fit rejects mismatched inputs") {
  const Dataset d = ring(6);
  const FilterIndex f = build_filter_index(d);
  TrainConfig c;
  c.model = ModelKind::TComplEx;
  c.dim = 4;
  CHECK_THROWS_AS(fit(d, f, c), ConfigError);
  const Dataset raw = parse_dataset({"a\tr\tb"}, {}, {}, false);
  c.model = ModelKind::CP;
  CHECK_THROWS_AS(fit(raw, f, c), ConfigError);
}
