#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kge/algebra.hpp"

namespace kge::theory {

/// Real CP-style factors: U (|E| x D), R (|R| x D, row j is diag(R_j)), V (|E| x D).
struct FactorTriple {
  RealMat U, R, V;
  std::size_t rank() const { return U.cols(); }
};

/// FactorTriple plus T (|T| x D, row l is diag(T_l)).
struct FactorQuad {
  RealMat U, R, V, T;
  std::size_t rank() const { return U.cols(); }
};

/// sum_j (||U R_j||_F^2 + ||V||_F^2 + ||V R_j^T||_F^2 + ||U||_F^2), evaluated slice by slice.
double global_dura_sum(const FactorTriple& f);
/// The same quantity through per-column norms.
double global_dura_sum_columnwise(const FactorTriple& f);

enum class TemporalVariant { Dura1, Dura2 };
const char* to_string(TemporalVariant v);

/// Sum over every (relation, timestamp) slice of the variant's per-example
/// penalty with all entity rows: DURA1 uses R_j T_l as one diagonal, DURA2 the
/// four cross terms (U R_j, V T_l, U T_l, V R_j).
double temporal_dura_sum(const FactorQuad& f, TemporalVariant variant);
double temporal_dura_sum_columnwise(const FactorQuad& f, TemporalVariant variant);

/// Lower bound 4 sqrt(|R|) sum_d ||u_d|| ||r_d|| ||v_d|| (and the 4D analogue).
double dura_lower_bound(const FactorTriple& f);
double temporal_lower_bound(const FactorQuad& f);

/// Removes columns where any factor column is zero.
FactorTriple drop_zero_columns(const FactorTriple& f);
FactorQuad drop_zero_columns(const FactorQuad& f);

/// Per-column rescaling to ||u'|| = ||v'|| = sqrt(||u|| ||r|| ||v|| / sqrt|R|),
/// ||r'|| = sqrt|R|. Keeps the reconstructed tensor and attains the lower bound.
FactorTriple balanced_rescale(const FactorTriple& f);
/// u fixed, r and v rescaled so that ||u|| ||r'|| = sqrt|R| ||v'||.
FactorTriple one_sided_rescale(const FactorTriple& f);
/// Rescaling that attains the variant's lower bound.
FactorQuad temporal_rescale(const FactorQuad& f, TemporalVariant variant);

/// Dense X[i][j][k] = sum_d U_id R_jd V_kd, flattened row-major.
Vec reconstruct(const FactorTriple& f);
Vec reconstruct(const FactorQuad& f);

double rank1_nuclear_oracle(const Vec& u, const Vec& r, const Vec& v);
double rank1_nuclear_oracle(const Vec& u, const Vec& r, const Vec& v, const Vec& t);

/// Largest deviations observed for one rescaled instance (all should be ~0).
struct BalanceReport {
  double reconstruction = 0.0;  // max abs diff of the reconstructed tensors
  double balance = 0.0;         // max relative violation of the per-column identities
  double bound = 0.0;           // relative gap between the rescaled sum and the lower bound
  double increase = 0.0;        // relative amount by which rescaling increased the sum (AM-GM direction)
  double below_bound = 0.0;     // relative amount by which the original sum fell below the bound
  double max_deviation() const;
};

BalanceReport verify_balance(const FactorTriple& f);
BalanceReport verify_temporal_balance(const FactorQuad& f, TemporalVariant variant);

struct CheckResult {
  std::string name;
  std::size_t seeds = 0;
  double max_deviation = 0.0;
  bool pass = false;
};

inline constexpr double kTheoryTolerance = 1e-9;

std::vector<CheckResult> run_theory_suite(std::size_t seeds, std::uint64_t base_seed = 0);
std::string format_check(const CheckResult& c);

}  // namespace kge::theory
