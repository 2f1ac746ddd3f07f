#include <doctest.h>

#include <complex>
#include <random>

#include "kge/error.hpp"
#include "kge/models.hpp"
#include "support.hpp"

using namespace kge;
using namespace kge::testing;

namespace {

using cd = std::complex<double>;

// Score written directly from the model definitions.
double oracle_score(const ModelParams& p, Id h, Id r, Id t, std::optional<Id> time) {
  const std::size_t d = p.dim();
  const auto u = p.head.row(h);
  const auto v = p.tail_table().row(t);
  const auto rel = p.relation.row(r);
  switch (p.kind()) {
    case ModelKind::CP: {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += u[i] * rel[i] * v[i];
      return s;
    }
    case ModelKind::ComplEx:
    case ModelKind::TComplEx: {
      const std::size_t k = d / 2;
      cd s = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        cd rr{rel[i], rel[k + i]};
        if (p.kind() == ModelKind::TComplEx) rr *= cd{p.timestamp(*time, i), p.timestamp(*time, k + i)};
        s += std::conj(cd{u[i], u[k + i]}) * rr * cd{v[i], v[k + i]};
      }
      return s.real();
    }
    case ModelKind::RESCAL:
    case ModelKind::TRESCAL: {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          double m = rel[i * d + j];
          if (p.kind() == ModelKind::TRESCAL) m *= p.timestamp(*time, i * d + j);
          s += u[i] * m * v[j];
        }
      }
      return s;
    }
  }
  return 0.0;
}

ModelParams tiny(ModelKind kind, std::size_t dim) {
  return zero_params(ModelShape{kind, dim, 2, 1, is_temporal(kind) ? 1u : 0u});
}

}  // namespace

TEST_CASE("hand examples") {
  ModelParams cp = tiny(ModelKind::CP, 2);
  cp.head(0, 0) = 1;
  cp.relation(0, 0) = cp.relation(0, 1) = 1;
  cp.tail(1, 0) = 1;
  CHECK(score(cp, Query{0, 0, {}}, 1) == 1.0);

  ModelParams rescal = tiny(ModelKind::RESCAL, 2);
  rescal.head(0, 0) = 1;
  rescal.head(1, 1) = 1;
  rescal.relation(0, 1) = 1;  // R = [[0,1],[0,0]]
  CHECK(score(rescal, Query{0, 0, {}}, 1) == 1.0);

  ModelParams tr = tiny(ModelKind::TRESCAL, 2);
  tr.head(0, 0) = 1;
  tr.head(1, 1) = 1;
  for (double& x : tr.relation.row(0)) x = 1;
  tr.timestamp(0, 0) = tr.timestamp(0, 3) = 2;
  CHECK(score(tr, Query{0, 0, 0}, 1) == 0.0);
  CHECK(score(tr, Query{0, 0, 0}, 0) == 2.0);

  CHECK_THROWS_AS(score(tr, Query{0, 0, {}}, 1), Error);
  CHECK_THROWS_AS(score(cp, Query{5, 0, {}}, 1), Error);
}

TEST_CASE("score matches the definitional oracle for every kind") {
  std::mt19937_64 rng(21);
  for (ModelKind kind : kAllKinds) {
    CAPTURE(to_string(kind));
    const ModelShape shape = small_shape(kind, 4, 7);
    const ModelParams p = random_params(shape, rng);
    for (const auto& ex : random_batch(shape, 20, rng)) {
      CHECK(std::abs(score(p, ex) - oracle_score(p, ex.head, ex.relation, ex.tail, ex.time)) <= 1e-12);
    }
  }
}

TEST_CASE("score_all_candidates equals per-candidate score bitwise") {
  std::mt19937_64 rng(22);
  for (ModelKind kind : kAllKinds) {
    const ModelShape shape = small_shape(kind, 6, 7);
    const ModelParams p = random_params(shape, rng);
    for (const auto& ex : random_batch(shape, 10, rng)) {
      const Vec all = score_all_candidates(p, ex.query());
      for (Id k = 0; k < shape.entities; ++k) CHECK(all[k] == score(p, ex.query(), k));
    }
    ModelParams z = p;
    z.head.fill(0.0);
    for (double s : score_all_candidates(z, random_batch(shape, 1, rng)[0].query())) CHECK(s == 0.0);
  }
}

TEST_CASE("score_batch agrees with per-query scoring") {
  std::mt19937_64 rng(23);
  for (ModelKind kind : kAllKinds) {
    const ModelShape shape = small_shape(kind, 6, 9);
    const ModelParams p = random_params(shape, rng);
    const auto batch = random_batch(shape, 5, rng);
    RealMat q, s;
    score_batch(p, batch, q, s, 2);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Vec all = score_all_candidates(p, batch[b].query());
      for (std::size_t k = 0; k < all.size(); ++k) CHECK(std::abs(s(b, k) - all[k]) <= 1e-12);
    }
  }
}

TEST_CASE("permutation invariance for diagonal kinds") {
  std::mt19937_64 rng(24);
  for (ModelKind kind : {ModelKind::CP, ModelKind::ComplEx, ModelKind::TComplEx}) {
    const ModelShape shape = small_shape(kind, 6);
    const ModelParams p = random_params(shape, rng);
    ModelParams q = p;
    // Complex kinds permute complex coordinates (both halves together).
    const std::vector<std::size_t> perm = is_complex(kind) ? std::vector<std::size_t>{2, 0, 1, 5, 3, 4}
                                                            : std::vector<std::size_t>{3, 5, 0, 1, 4, 2};
    for (RealMat* t : q.tables()) {
      const RealMat src = *t;
      for (std::size_t i = 0; i < t->rows(); ++i) {
        for (std::size_t d = 0; d < 6; ++d) (*t)(i, d) = src(i, perm[d]);
      }
    }
    for (const auto& ex : random_batch(shape, 10, rng)) {
      CHECK(std::abs(score(p, ex) - score(q, ex)) <= 1e-12);
    }
  }
}

TEST_CASE("backward matches finite differences of the score") {
  std::mt19937_64 rng(25);
  for (ModelKind kind : kAllKinds) {
    CAPTURE(to_string(kind));
    for (int trial = 0; trial < 5; ++trial) {
      const ModelShape shape = small_shape(kind, kind == ModelKind::CP ? 3 : 4);
      const ModelParams p = random_params(shape, rng);
      const auto batch = random_batch(shape, 3, rng);
      RealMat upstream(batch.size(), shape.entities);
      for (double& x : upstream.flat()) x = std::normal_distribution<double>()(rng);

      GradientSet g(shape);
      backward(p, batch, upstream, g);
      const GradientSet fd = numeric_gradient(p, [&](const ModelParams& m) {
        double s = 0.0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
          const Vec all = score_all_candidates(m, batch[b].query());
          for (std::size_t k = 0; k < all.size(); ++k) s += upstream(b, k) * all[k];
        }
        return s;
      });
      CHECK(max_rel_error(g, fd) <= 1e-6);
    }
  }
}

TEST_CASE("backward: zero upstream gives zero gradient; CP closed form") {
  std::mt19937_64 rng(26);
  const ModelShape shape = small_shape(ModelKind::CP, 2);
  const ModelParams p = random_params(shape, rng);
  const std::vector<BatchExample> batch{{1, 2, 3, std::nullopt, 1.0}};
  GradientSet zero(shape);
  backward(p, batch, RealMat(1, shape.entities), zero);
  CHECK(zero.max_abs() == 0.0);

  RealMat up(1, shape.entities);
  up(0, 3) = 1.0;
  GradientSet g(shape);
  backward(p, batch, up, g);
  for (std::size_t d = 0; d < 2; ++d) CHECK(g.head(1, d) == doctest::Approx(p.relation(2, d) * p.tail(3, d)));
}

TEST_CASE("backward is linear in upstream") {
  std::mt19937_64 rng(27);
  const ModelShape shape = small_shape(ModelKind::TComplEx, 4);
  const ModelParams p = random_params(shape, rng);
  const auto batch = random_batch(shape, 4, rng);
  RealMat a(4, shape.entities), b(4, shape.entities), ab(4, shape.entities);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.flat()[i] = std::normal_distribution<double>()(rng);
    b.flat()[i] = std::normal_distribution<double>()(rng);
    ab.flat()[i] = a.flat()[i] + 2.0 * b.flat()[i];
  }
  GradientSet ga(shape), gb(shape), gab(shape);
  backward(p, batch, a, ga);
  backward(p, batch, b, gb);
  backward(p, batch, ab, gab);
  for (std::size_t i = 0; i < ga.head.size(); ++i) {
    CHECK(std::abs(gab.head.flat()[i] - ga.head.flat()[i] - 2.0 * gb.head.flat()[i]) <= 1e-12);
  }
}

TEST_CASE("reduction equivalences") {
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 10; ++trial) {
    // TComplEx with identity timestamps == ComplEx.
    const ModelParams tc = random_params(small_shape(ModelKind::TComplEx, 6), rng);
    ModelParams tci = tc;
    for (std::size_t l = 0; l < tci.timestamp.rows(); ++l) {
      for (std::size_t d = 0; d < 6; ++d) tci.timestamp(l, d) = d < 3 ? 1.0 : 0.0;
    }
    ModelParams cx = zero_params(small_shape(ModelKind::ComplEx, 6));
    cx.head = tc.head;
    cx.relation = tc.relation;

    // RESCAL with diagonal matrices == CP with U = V.
    const ModelParams cp0 = random_params(small_shape(ModelKind::CP, 4), rng);
    ModelParams cp = cp0;
    cp.tail = cp.head;
    ModelParams rd = zero_params(small_shape(ModelKind::RESCAL, 4));
    rd.head = cp.head;
    for (std::size_t j = 0; j < rd.relation.rows(); ++j) {
      for (std::size_t d = 0; d < 4; ++d) rd.relation(j, d * 4 + d) = cp.relation(j, d);
    }

    // TRESCAL with all-ones timestamps == RESCAL.
    ModelParams trs = random_params(small_shape(ModelKind::TRESCAL, 3), rng);
    trs.timestamp.fill(1.0);
    ModelParams rs = zero_params(small_shape(ModelKind::RESCAL, 3));
    rs.head = trs.head;
    rs.relation = trs.relation;

    for (Id h = 0; h < 6; ++h) {
      for (Id r = 0; r < 4; ++r) {
        for (Id t = 0; t < 3; ++t) {
          const Vec a = score_all_candidates(tci, {h, r, t}), b = score_all_candidates(cx, {h, r, {}});
          const Vec c = score_all_candidates(rd, {h, r, {}}), d = score_all_candidates(cp, {h, r, {}});
          const Vec e = score_all_candidates(trs, {h, r, t}), f = score_all_candidates(rs, {h, r, {}});
          for (std::size_t k = 0; k < 6; ++k) {
            CHECK(std::abs(a[k] - b[k]) <= 1e-12);
            CHECK(std::abs(c[k] - d[k]) <= 1e-12);
            CHECK(std::abs(e[k] - f[k]) <= 1e-12);
          }
        }
      }
    }
  }
}

TEST_CASE("shape validation and init") {
  CHECK_THROWS_AS(validate_shape(ModelShape{ModelKind::ComplEx, 3, 2, 2, 0}), ConfigError);
  std::mt19937_64 rng(1), rng2(1);
  const ModelShape s = small_shape(ModelKind::CP, 4);
  const ModelParams a = make_params(s, 1e-3, rng), b = make_params(s, 1e-3, rng2);
  CHECK(a == b);
  CHECK(a.head.data() != a.tail.data());
  CHECK(max_abs(a.head.flat()) < 1e-2);
  const ModelParams rs = zero_params(small_shape(ModelKind::RESCAL, 3));
  CHECK(rs.relation.cols() == 9);
  CHECK(rs.tail.empty());
  CHECK(&rs.tail_table() == &rs.head);
}
