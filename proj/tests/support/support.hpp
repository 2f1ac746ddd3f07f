#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "kge/data.hpp"
#include "kge/models.hpp"
#include "kge/regularizers.hpp"
#include "kge/training.hpp"

namespace kge::testing {

inline ModelShape small_shape(ModelKind kind, std::size_t dim, std::size_t entities = 6, std::size_t relations = 4,
                              std::size_t timestamps = 3) {
  return {kind, dim, entities, relations, is_temporal(kind) ? timestamps : 0};
}

/// Parameters with N(0, scale^2) entries.
inline ModelParams random_params(const ModelShape& shape, std::mt19937_64& rng, double scale = 1.0) {
  return make_params(shape, scale, rng);
}

inline std::vector<BatchExample> random_batch(const ModelShape& shape, std::size_t n, std::mt19937_64& rng,
                                              bool random_weights = true) {
  std::uniform_int_distribution<Id> ent(0, static_cast<Id>(shape.entities - 1));
  std::uniform_int_distribution<Id> rel(0, static_cast<Id>(shape.relations - 1));
  std::uniform_real_distribution<double> w(0.1, 1.0);
  std::vector<BatchExample> batch;
  for (std::size_t i = 0; i < n; ++i) {
    BatchExample ex{ent(rng), rel(rng), ent(rng), std::nullopt, random_weights ? w(rng) : 1.0};
    if (is_temporal(shape.kind)) {
      ex.time = std::uniform_int_distribution<Id>(0, static_cast<Id>(shape.timestamps - 1))(rng);
    }
    batch.push_back(ex);
  }
  return batch;
}

/// Central differences of f over every entry of every table, laid out like
/// GradientSet (tail only for CP).
inline GradientSet numeric_gradient(ModelParams params, const std::function<double(const ModelParams&)>& f,
                                    double h = 1e-5) {
  GradientSet g(params.shape);
  auto fill = [&](RealMat& table, RealMat& out) {
    for (std::size_t i = 0; i < table.size(); ++i) {
      const double x = table.flat()[i];
      table.flat()[i] = x + h;
      const double up = f(params);
      table.flat()[i] = x - h;
      const double down = f(params);
      table.flat()[i] = x;
      out.flat()[i] = (up - down) / (2.0 * h);
    }
  };
  fill(params.head, g.head);
  if (!shares_entity_table(params.kind())) fill(params.tail, g.tail);
  fill(params.relation, g.relation);
  if (is_temporal(params.kind())) fill(params.timestamp, g.timestamp);
  return g;
}

inline double rel_error(const RealMat& a, const RealMat& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a.flat()[i] - b.flat()[i]) * (a.flat()[i] - b.flat()[i]);
    na += a.flat()[i] * a.flat()[i];
    nb += b.flat()[i] * b.flat()[i];
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / scale;
}

/// Largest per-table relative error between two gradient sets.
inline double max_rel_error(const GradientSet& a, const GradientSet& b) {
  return std::max({rel_error(a.head, b.head), rel_error(a.tail, b.tail), rel_error(a.relation, b.relation),
                   rel_error(a.timestamp, b.timestamp)});
}

/// Every regularizer usable with `kind`, with weights that exercise all terms.
inline std::vector<RegSpec> applicable_specs(ModelKind kind) {
  std::vector<RegSpec> out;
  for (RegKind r : {RegKind::None, RegKind::Fro, RegKind::N3, RegKind::Dura, RegKind::DuraI, RegKind::DuraII,
                    RegKind::RegP1, RegKind::TDura1, RegKind::TDura2, RegKind::TWeighted}) {
    RegSpec spec;
    spec.kind = r;
    spec.lambda = 0.3;
    spec.lambda1 = 0.5;
    spec.lambda2 = 1.5;
    spec.lambda3 = 0.7;
    spec.lambda4 = 1.2;
    if (r == RegKind::TWeighted && kind == ModelKind::TRESCAL) spec.lambda1 = spec.lambda2 = 0.0;
    if (is_temporal(kind)) {
      spec.smoother = has_matrix_relations(kind) ? SmootherKind::L2 : SmootherKind::L3;
      spec.smoother_weight = 0.4;
    }
    try {
      validate(spec, kind);
    } catch (const UnsupportedError&) {
      continue;
    }
    out.push_back(spec);
  }
  return out;
}

inline constexpr ModelKind kAllKinds[] = {ModelKind::CP, ModelKind::ComplEx, ModelKind::RESCAL, ModelKind::TComplEx,
                                          ModelKind::TRESCAL};

/// A random KG as tab-separated lines over `entities` entities and `relations` relations.
inline std::vector<std::string> random_kg_lines(std::size_t entities, std::size_t relations, std::size_t facts,
                                                std::mt19937_64& rng, std::size_t timestamps = 0) {
  std::uniform_int_distribution<std::size_t> e(0, entities - 1), r(0, relations - 1);
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < facts; ++i) {
    std::string line = "e" + std::to_string(e(rng)) + "\tr" + std::to_string(r(rng)) + "\te" + std::to_string(e(rng));
    if (timestamps > 0) {
      line += "\t2014-01-" + std::to_string(10 + std::uniform_int_distribution<std::size_t>(0, timestamps - 1)(rng));
    }
    lines.push_back(line);
  }
  return lines;
}

}  // namespace kge::testing
