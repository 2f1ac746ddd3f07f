#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kge/models.hpp"

namespace kge {

enum class RegKind {
  None,
  Fro,
  N3,
  Dura,
  DuraI,
  DuraII,
  RegP1,
  TDura1,
  TDura2,
  TWeighted,
};

enum class SmootherKind { None, L2, L3 };

const char* to_string(RegKind kind);
RegKind parse_reg_kind(const std::string& name);
const char* to_string(SmootherKind kind);
SmootherKind parse_smoother_kind(const std::string& name);

inline bool is_temporal_reg(RegKind k) {
  return k == RegKind::TDura1 || k == RegKind::TDura2 || k == RegKind::TWeighted;
}

struct RegSpec {
  RegKind kind = RegKind::None;
  double lambda = 0.0;
  // DURA: lambda1 weights ||u||^2 + ||v||^2, lambda2 the projected norms.
  // TWEIGHTED: the four part weights.
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  double lambda4 = 1.0;
  SmootherKind smoother = SmootherKind::None;
  double smoother_weight = 1.0;
  // Use v * conj(r) instead of v * r for the tail-side projection of complex
  // models. Only REG_P1 is affected; the squared-norm terms depend on moduli.
  bool conjugate_tail = false;
};

/// Throws UnsupportedError for combinations that are not defined (N3 on
/// RESCAL, TDURA2 on TRESCAL, temporal penalties on static models, ...) and
/// ConfigError for negative weights.
void validate(const RegSpec& spec, ModelKind model);

/// Unweighted (lambda not applied) per-example penalty for the static kinds
/// (NONE, FRO, N3, DURA, DURA_I, DURA_II, REG_P1). FRO and N3 also accept
/// temporal models and then include the timestamp row.
double static_penalty(const RegSpec& spec, const ModelParams& params, const BatchExample& example);

/// Per-example penalty for TDURA1, TDURA2 and TWEIGHTED.
double temporal_penalty(const RegSpec& spec, const ModelParams& params, const BatchExample& example);

/// Dispatches to static_penalty or temporal_penalty.
double penalty(const RegSpec& spec, const ModelParams& params, const BatchExample& example);

/// grads += scale * d penalty / d params for one example. Returns the
/// unweighted penalty value.
double penalty_gradient(const RegSpec& spec, const ModelParams& params, const BatchExample& example, double scale,
                      GradientSet& grads);

/// Mean over consecutive timestamp pairs among the first `chain_length` rows:
/// L3 sums |diff|^3 (complex modulus when `complex`), L2 the squared Frobenius
/// norm of the difference. Returns 0 when chain_length < 2, appending a warning.
double timestamp_smoother(SmootherKind kind, const RealMat& timestamps, std::size_t chain_length, bool complex,
                          std::vector<std::string>* warnings = nullptr);

/// grad += scale * d smoother / d timestamps.
void timestamp_smoother_gradient(SmootherKind kind, const RealMat& timestamps, std::size_t chain_length,
                                 bool complex, double scale, RealMat& grad);

}  // namespace kge
