#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kge/data.hpp"
#include "kge/models.hpp"

namespace kge {

struct RankingMetrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t queries = 0;

  bool operator==(const RankingMetrics&) const = default;
};

struct RankingReport {
  RankingMetrics overall;
  std::map<RelationType, RankingMetrics> by_type;  // empty unless relation types were supplied

  bool operator==(const RankingReport&) const = default;
};

/// Filtered rank of `target` under the mean-rank tie policy:
/// 1 + #{strictly greater} + #{ties other than target} / 2, counted over
/// candidates not listed in `filtered_ids`. `filtered_ids` must not contain
/// the target and must not repeat ids.
double filtered_rank(std::span<const double> scores, Id target, std::span<const Id> filtered_ids);

RankingMetrics summarize_ranks(std::span<const double> ranks);

/// Ranks every (already reciprocal-augmented) fact as a tail query and
/// reports MRR / Hits@{1,3,10}. With `relation_types`, queries are also
/// grouped by the raw relation's type, reciprocal queries counting as the
/// flipped type.
RankingReport evaluate_split(const ModelParams& params, std::span<const Fact> split, const FilterIndex& filter,
                             const RelationTypeMap* relation_types = nullptr, int threads = 1);

/// Per-query filtered ranks in split order.
std::vector<double> rank_queries(const ModelParams& params, std::span<const Fact> split, const FilterIndex& filter,
                                 int threads = 1);

std::string format_report(const RankingReport& report);
/// key=value lines (mrr=..., hits@1=..., ...; per-type keys prefixed by the type).
std::string format_report_kv(const RankingReport& report);

/// Fraction of entries with |x| < lambda across the given tables.
double lambda_sparsity(std::span<const RealMat* const> tables, double lambda);
double lambda_sparsity(const RealMat& table, double lambda);

/// Smallest lambda with lambda_sparsity >= target over the given tables.
double sparsity_threshold(std::span<const RealMat* const> tables, double target);

/// Compressed sparse row matrix: u64 row pointers, u32 columns, f32 values.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint64_t> row_ptr;
  std::vector<std::uint32_t> col_idx;
  std::vector<float> values;

  std::size_t nnz() const { return values.size(); }
  /// Bytes of the three arrays (headers excluded).
  std::size_t payload_bytes() const;
  bool operator==(const CsrMatrix&) const = default;
};

CsrMatrix to_csr(const RealMat& m);
RealMat from_csr(const CsrMatrix& csr);

inline constexpr char kCsrMagic[4] = {'K', 'C', 'S', 'R'};
inline constexpr std::uint32_t kCsrVersion = 1;

/// Writes `<prefix>.rowptr`, `<prefix>.colidx`, `<prefix>.values`, each with an
/// 8-byte header (magic KCSR, u32 version) followed by the little-endian array.
void write_csr(const CsrMatrix& csr, const std::filesystem::path& prefix);
/// `cols` is not stored in the files and must be supplied.
CsrMatrix read_csr(const std::filesystem::path& prefix, std::size_t cols);

struct SparsityReport {
  double target = 0.0;
  double threshold = 0.0;  // lambda
  double achieved = 0.0;   // s_lambda after thresholding
  double mrr_before = 0.0;
  double mrr_after = 0.0;
  RankingReport before;
  RankingReport after;
  std::size_t nnz = 0;
  std::size_t csr_bytes = 0;
  std::size_t dense_bytes = 0;
};

struct ThresholdResult {
  SparsityReport report;
  ModelParams thresholded;  // copy with small entity entries zeroed
  std::vector<CsrMatrix> csr;  // one per entity table (U, then V for CP)
};

/// Zeroes the smallest-magnitude entity entries of a copy of `params` until
/// lambda-sparsity reaches `target`, re-evaluates on `test`, and builds CSR
/// forms of the thresholded entity tables. Writes them under `out_dir` when given.
ThresholdResult threshold_and_export(const ModelParams& params, double target, std::span<const Fact> test,
                                     const FilterIndex& filter,
                                     const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                     int threads = 1);

std::string format_sparsity_report(const SparsityReport& report);

}  // namespace kge
