#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kge/algebra.hpp"
#include "kge/data.hpp"

namespace kge {

enum class ModelKind : std::uint8_t { CP = 0, ComplEx = 1, RESCAL = 2, TComplEx = 3, TRESCAL = 4 };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

inline bool is_temporal(ModelKind k) { return k == ModelKind::TComplEx || k == ModelKind::TRESCAL; }
inline bool is_complex(ModelKind k) { return k == ModelKind::ComplEx || k == ModelKind::TComplEx; }
/// RESCAL-style kinds carry a dense D x D matrix per relation (and per timestamp).
inline bool has_matrix_relations(ModelKind k) { return k == ModelKind::RESCAL || k == ModelKind::TRESCAL; }
/// Only CP keeps a separate tail-entity table.
inline bool shares_entity_table(ModelKind k) { return k != ModelKind::CP; }

struct ModelShape {
  ModelKind kind = ModelKind::CP;
  std::size_t dim = 0;
  std::size_t entities = 0;
  std::size_t relations = 0;   // |R_aug|
  std::size_t timestamps = 0;  // 0 for static kinds

  std::size_t relation_width() const { return has_matrix_relations(kind) ? dim * dim : dim; }
};

/// Embedding tables for one model. Row widths: entities D, relations D (or D*D
/// for matrix kinds), timestamps likewise. Complex kinds store split halves.
struct ModelParams {
  ModelShape shape;
  RealMat head;  // U
  RealMat tail;  // V; empty unless kind == CP
  RealMat relation;
  RealMat timestamp;

  ModelKind kind() const { return shape.kind; }
  std::size_t dim() const { return shape.dim; }
  RealMat& tail_table() { return shares_entity_table(shape.kind) ? head : tail; }
  const RealMat& tail_table() const { return shares_entity_table(shape.kind) ? head : tail; }

  /// Every table in checkpoint order (tail omitted when shared).
  std::vector<RealMat*> tables();
  std::vector<const RealMat*> tables() const;

  bool operator==(const ModelParams& o) const;
};

void validate_shape(const ModelShape& shape);

/// Allocates all tables and fills them with i.i.d. N(0, 1) * init_scale.
ModelParams make_params(const ModelShape& shape, double init_scale, std::mt19937_64& rng);
/// All-zero tables.
ModelParams zero_params(const ModelShape& shape);

struct Query {
  Id head = 0;
  Id relation = 0;
  std::optional<Id> time;
};

struct BatchExample {
  Id head = 0;
  Id relation = 0;
  Id tail = 0;
  std::optional<Id> time;
  double weight = 1.0;

  Query query() const { return {head, relation, time}; }
};

void check_query(const ModelParams& params, const Query& q);

/// The transformed head q such that score(head, rel, k[, t]) = dot(q, V_k).
/// CP: u*r. ComplEx: the real-form of conj(u)*r. RESCAL: u.R. TComplEx:
/// conj(u)*(r*t). TRESCAL: u.(R (.) T).
void query_vector(const ModelParams& params, const Query& q, std::span<double> out);
Vec query_vector(const ModelParams& params, const Query& q);

double score(const ModelParams& params, const BatchExample& example);
double score(const ModelParams& params, const Query& q, Id tail);

/// Scores of every entity as the tail of q. Entry k equals score(q, k) exactly.
Vec score_all_candidates(const ModelParams& params, const Query& q);
void score_all_candidates(const ModelParams& params, const Query& q, std::span<double> out);

/// Batched forward pass used by training: queries (batch x D) and scores
/// (batch x |E|) via a GEMM. Rounding may differ from score_all_candidates.
void score_batch(const ModelParams& params, std::span<const BatchExample> batch, RealMat& queries, RealMat& scores,
                 int threads = 1);

/// Gradient buffers shaped like ModelParams plus the rows that were written.
/// Entity tables are treated as dense (the 1-vs-All softmax touches every tail row).
struct GradientSet {
  RealMat head;
  RealMat tail;  // empty when the entity table is shared
  RealMat relation;
  RealMat timestamp;
  std::vector<Id> relation_rows;   // sorted, unique after finalize()
  std::vector<Id> timestamp_rows;  // sorted, unique after finalize()
  std::vector<Id> head_rows;       // CP only: rows of U touched (others zero)
  bool timestamps_dense = false;   // set by the smoother, which touches every row

  explicit GradientSet(const ModelShape& shape);
  GradientSet() = default;

  RealMat& tail_table(ModelKind kind) { return shares_entity_table(kind) ? head : tail; }
  void finalize();
  void clear();
  double max_abs() const;
};

/// Accumulates into `grads` the gradient of sum_b sum_k upstream(b, k) * score(example_b, k).
/// `upstream` is batch.size() x |E| row-major. `queries` (batch x D) may be passed
/// when already computed by the forward pass; otherwise it is recomputed.
void backward(const ModelParams& params, std::span<const BatchExample> batch, const RealMat& upstream,
              GradientSet& grads, const RealMat* queries = nullptr, int threads = 1);

/// Chain rule from dL/dq (one query) back to the head/relation/timestamp rows.
void query_vector_backward(const ModelParams& params, const Query& q, std::span<const double> grad_query,
                           GradientSet& grads);

}  // namespace kge
