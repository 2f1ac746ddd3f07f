#include "kge/models.hpp"

#include <algorithm>
#include <thread>

#include <Eigen/Core>

#include "kge/error.hpp"
#include "kge/parallel.hpp"

namespace kge {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap as_eigen(const RealMat& m) {
  return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}
MutMap as_eigen(RealMat& m) {
  return MutMap(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

void fill_gaussian(RealMat& m, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : m.flat()) x = normal(rng) * scale;
}

}  // namespace

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::CP:
      return "cp";
    case ModelKind::ComplEx:
      return "complex";
    case ModelKind::RESCAL:
      return "rescal";
    case ModelKind::TComplEx:
      return "tcomplex";
    case ModelKind::TRESCAL:
      return "trescal";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& name) {
  for (auto k : {ModelKind::CP, ModelKind::ComplEx, ModelKind::RESCAL, ModelKind::TComplEx, ModelKind::TRESCAL}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown model kind: " + name);
}

std::vector<RealMat*> ModelParams::tables() {
  std::vector<RealMat*> out{&head};
  if (!shares_entity_table(shape.kind)) out.push_back(&tail);
  out.push_back(&relation);
  if (is_temporal(shape.kind)) out.push_back(&timestamp);
  return out;
}

std::vector<const RealMat*> ModelParams::tables() const {
  std::vector<const RealMat*> out{&head};
  if (!shares_entity_table(shape.kind)) out.push_back(&tail);
  out.push_back(&relation);
  if (is_temporal(shape.kind)) out.push_back(&timestamp);
  return out;
}

bool ModelParams::operator==(const ModelParams& o) const {
  return shape.kind == o.shape.kind && shape.dim == o.shape.dim && head == o.head && tail == o.tail &&
         relation == o.relation && timestamp == o.timestamp;
}

void validate_shape(const ModelShape& s) {
  if (s.dim == 0) throw ConfigError("embedding dimension must be positive");
  if (is_complex(s.kind) && s.dim % 2 != 0) throw ConfigError("complex models need an even dimension");
  if (s.entities == 0 || s.relations == 0) throw ConfigError("model needs at least one entity and relation");
  if (is_temporal(s.kind) && s.timestamps == 0) throw ConfigError("temporal models need timestamps");
}

ModelParams zero_params(const ModelShape& shape) {
  validate_shape(shape);
  ModelParams p;
  p.shape = shape;
  if (!is_temporal(shape.kind)) p.shape.timestamps = 0;
  p.head = RealMat(shape.entities, shape.dim);
  if (!shares_entity_table(shape.kind)) p.tail = RealMat(shape.entities, shape.dim);
  p.relation = RealMat(shape.relations, shape.relation_width());
  if (is_temporal(shape.kind)) p.timestamp = RealMat(shape.timestamps, shape.relation_width());
  return p;
}

ModelParams make_params(const ModelShape& shape, double init_scale, std::mt19937_64& rng) {
  ModelParams p = zero_params(shape);
  for (RealMat* t : p.tables()) fill_gaussian(*t, init_scale, rng);
  return p;
}

void check_query(const ModelParams& params, const Query& q) {
  const auto& s = params.shape;
  if (q.head >= s.entities) throw Error("head id out of range");
  if (q.relation >= s.relations) throw Error("relation id out of range");
  if (is_temporal(s.kind)) {
    if (!q.time) throw Error(std::string("model ") + to_string(s.kind) + " requires a timestamp");
    if (*q.time >= s.timestamps) throw Error("timestamp id out of range");
  }
}

void query_vector(const ModelParams& params, const Query& q, std::span<double> out) {
  check_query(params, q);
  const std::size_t dim = params.dim();
  if (out.size() != dim) throw DimensionError("query_vector: output size");
  const auto u = params.head.row(q.head);
  const auto r = params.relation.row(q.relation);
  switch (params.kind()) {
    case ModelKind::CP:
      for (std::size_t d = 0; d < dim; ++d) out[d] = u[d] * r[d];
      return;
    case ModelKind::ComplEx:
    case ModelKind::TComplEx: {
      const std::size_t h = dim / 2;
      for (std::size_t d = 0; d < h; ++d) {
        double c = r[d], e = r[d + h];
        if (params.kind() == ModelKind::TComplEx) {
          const auto t = params.timestamp.row(*q.time);
          const double f = t[d], g = t[d + h];
          const double rc = c * f - e * g;
          const double re = c * g + e * f;
          c = rc;
          e = re;
        }
        const double a = u[d], b = u[d + h];
        out[d] = a * c + b * e;
        out[d + h] = b * c - a * e;
      }
      return;
    }
    case ModelKind::RESCAL:
      row_matvec(u, r, out);
      return;
    case ModelKind::TRESCAL: {
      const auto t = params.timestamp.row(*q.time);
      Vec m(r.size());
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = r[i] * t[i];
      row_matvec(u, m, out);
      return;
    }
  }
}

Vec query_vector(const ModelParams& params, const Query& q) {
  Vec out(params.dim());
  query_vector(params, q, out);
  return out;
}

double score(const ModelParams& params, const Query& q, Id tail) {
  if (tail >= params.shape.entities) throw Error("tail id out of range");
  const Vec qv = query_vector(params, q);
  return dot(qv, params.tail_table().row(tail));
}

double score(const ModelParams& params, const BatchExample& example) {
  return score(params, example.query(), example.tail);
}

void score_all_candidates(const ModelParams& params, const Query& q, std::span<double> out) {
  const RealMat& v = params.tail_table();
  if (out.size() != v.rows()) throw DimensionError("score_all_candidates: output size");
  const Vec qv = query_vector(params, q);
  for (std::size_t k = 0; k < v.rows(); ++k) out[k] = dot(qv, v.row(k));
}

Vec score_all_candidates(const ModelParams& params, const Query& q) {
  Vec out(params.tail_table().rows());
  score_all_candidates(params, q, out);
  return out;
}

GradientSet::GradientSet(const ModelShape& shape)
    : head(shape.entities, shape.dim),
      tail(shares_entity_table(shape.kind) ? 0 : shape.entities, shares_entity_table(shape.kind) ? 0 : shape.dim),
      relation(shape.relations, shape.relation_width()),
      timestamp(is_temporal(shape.kind) ? shape.timestamps : 0, shape.relation_width()) {}

void GradientSet::finalize() {
  for (auto* rows : {&relation_rows, &timestamp_rows, &head_rows}) {
    std::sort(rows->begin(), rows->end());
    rows->erase(std::unique(rows->begin(), rows->end()), rows->end());
  }
}

void GradientSet::clear() {
  head.fill(0.0);
  tail.fill(0.0);
  for (Id r : relation_rows) std::fill(relation.row(r).begin(), relation.row(r).end(), 0.0);
  if (timestamps_dense) {
    timestamp.fill(0.0);
  } else {
    for (Id t : timestamp_rows) std::fill(timestamp.row(t).begin(), timestamp.row(t).end(), 0.0);
  }
  relation_rows.clear();
  timestamp_rows.clear();
  head_rows.clear();
  timestamps_dense = false;
}

double GradientSet::max_abs() const {
  return std::max({kge::max_abs(head.flat()), kge::max_abs(tail.flat()), kge::max_abs(relation.flat()),
                   kge::max_abs(timestamp.flat())});
}

void query_vector_backward(const ModelParams& params, const Query& q, std::span<const double> g,
                           GradientSet& grads) {
  const std::size_t dim = params.dim();
  const auto u = params.head.row(q.head);
  const auto r = params.relation.row(q.relation);
  auto gu = grads.head.row(q.head);
  auto gr = grads.relation.row(q.relation);
  grads.relation_rows.push_back(q.relation);
  grads.head_rows.push_back(q.head);

  switch (params.kind()) {
    case ModelKind::CP:
      for (std::size_t d = 0; d < dim; ++d) {
        gu[d] += g[d] * r[d];
        gr[d] += g[d] * u[d];
      }
      return;
    case ModelKind::ComplEx:
    case ModelKind::TComplEx: {
      const std::size_t h = dim / 2;
      const bool temporal = params.kind() == ModelKind::TComplEx;
      std::span<const double> t;
      std::span<double> gt;
      if (temporal) {
        t = params.timestamp.row(*q.time);
        gt = grads.timestamp.row(*q.time);
        grads.timestamp_rows.push_back(*q.time);
      }
      for (std::size_t d = 0; d < h; ++d) {
        const double a = u[d], b = u[d + h];
        double c = r[d], e = r[d + h];
        double f = 0.0, gi = 0.0;
        if (temporal) {
          f = t[d];
          gi = t[d + h];
          const double rc = c * f - e * gi;
          const double re = c * gi + e * f;
          c = rc;
          e = re;
        }
        const double g_re = g[d], g_im = g[d + h];
        gu[d] += g_re * c - g_im * e;
        gu[d + h] += g_re * e + g_im * c;
        const double dc = g_re * a + g_im * b;
        const double de = g_re * b - g_im * a;
        if (!temporal) {
          gr[d] += dc;
          gr[d + h] += de;
        } else {
          const double c0 = r[d], e0 = r[d + h];
          gr[d] += dc * f + de * gi;
          gr[d + h] += -dc * gi + de * f;
          gt[d] += dc * c0 + de * e0;
          gt[d + h] += -dc * e0 + de * c0;
        }
      }
      return;
    }
    case ModelKind::RESCAL:
    case ModelKind::TRESCAL: {
      const bool temporal = params.kind() == ModelKind::TRESCAL;
      std::span<const double> t;
      std::span<double> gt;
      if (temporal) {
        t = params.timestamp.row(*q.time);
        gt = grads.timestamp.row(*q.time);
        grads.timestamp_rows.push_back(*q.time);
      }
      for (std::size_t i = 0; i < dim; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          const std::size_t ij = i * dim + j;
          const double m = temporal ? r[ij] * t[ij] : r[ij];
          acc += m * g[j];
          const double dm = u[i] * g[j];
          if (temporal) {
            gr[ij] += dm * t[ij];
            gt[ij] += dm * r[ij];
          } else {
            gr[ij] += dm;
          }
        }
        gu[i] += acc;
      }
      return;
    }
  }
}

void backward(const ModelParams& params, std::span<const BatchExample> batch, const RealMat& upstream,
              GradientSet& grads, const RealMat* queries, int threads) {
  const std::size_t n = batch.size();
  const std::size_t dim = params.dim();
  const RealMat& v = params.tail_table();
  if (upstream.rows() != n || upstream.cols() != v.rows()) throw DimensionError("backward: upstream shape");
  if (n == 0) return;

  RealMat local_queries;
  if (queries == nullptr) {
    local_queries = RealMat(n, dim);
    for (std::size_t b = 0; b < n; ++b) query_vector(params, batch[b].query(), local_queries.row(b));
    queries = &local_queries;
  }

  // dV += G^T Q, split by entity rows.
  RealMat& gv = grads.tail_table(params.kind());
  const auto g_all = as_eigen(upstream);
  const auto q_all = as_eigen(*queries);
  parallel_blocks(v.rows(), threads, [&](std::size_t lo, std::size_t hi) {
    auto out = as_eigen(gv).middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo));
    out.noalias() +=
        g_all.middleCols(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo)).transpose() * q_all;
  });

  // dQ = G V, split by batch rows.
  RealMat grad_q(n, dim);
  const auto v_all = as_eigen(v);
  parallel_blocks(n, threads, [&](std::size_t lo, std::size_t hi) {
    const auto rows = static_cast<Eigen::Index>(hi - lo);
    as_eigen(grad_q).middleRows(static_cast<Eigen::Index>(lo), rows).noalias() =
        g_all.middleRows(static_cast<Eigen::Index>(lo), rows) * v_all;
  });

  for (std::size_t b = 0; b < n; ++b) query_vector_backward(params, batch[b].query(), grad_q.row(b), grads);
}

void score_batch(const ModelParams& params, std::span<const BatchExample> batch, RealMat& queries, RealMat& scores,
                 int threads) {
  const std::size_t n = batch.size();
  const RealMat& v = params.tail_table();
  queries = RealMat(n, params.dim());
  for (std::size_t b = 0; b < n; ++b) query_vector(params, batch[b].query(), queries.row(b));
  scores = RealMat(n, v.rows());
  const auto q_all = as_eigen(queries);
  const auto v_all = as_eigen(v);
  parallel_blocks(v.rows(), threads, [&](std::size_t lo, std::size_t hi) {
    const auto cols = static_cast<Eigen::Index>(hi - lo);
    as_eigen(scores).middleCols(static_cast<Eigen::Index>(lo), cols).noalias() =
        q_all * v_all.middleRows(static_cast<Eigen::Index>(lo), cols).transpose();
  });
}

}  // namespace kge
