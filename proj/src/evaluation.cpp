#include "kge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "binary_io.hpp"
#include "kge/error.hpp"
#include "kge/parallel.hpp"

namespace kge {

namespace {

struct Counts {
  std::size_t greater = 0;
  std::size_t ties = 0;
};

Counts count_above(std::span<const double> scores, Id target) {
  const double s = scores[target];
  Counts c;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (scores[k] > s) {
      ++c.greater;
    } else if (scores[k] == s) {
      ++c.ties;
    }
  }
  --c.ties;  // the target itself
  return c;
}

double rank_from(const Counts& c) {
  return 1.0 + static_cast<double>(c.greater) + static_cast<double>(c.ties) / 2.0;
}

std::optional<Id> query_time(const ModelParams& params, const Fact& f) {
  if (is_temporal(params.kind())) return f.time;
  return std::nullopt;
}

}  // namespace

double filtered_rank(std::span<const double> scores, Id target, std::span<const Id> filtered_ids) {
  if (target >= scores.size()) throw Error("filtered_rank: target out of range");
  if (!all_finite(scores)) throw Error("filtered_rank: non-finite score");
  Counts c = count_above(scores, target);
  const double s = scores[target];
  for (Id k : filtered_ids) {
    if (k == target) throw Error("filtered_rank: target must not be filtered");
    if (k >= scores.size()) throw Error("filtered_rank: filtered id out of range");
    if (scores[k] > s) {
      --c.greater;
    } else if (scores[k] == s) {
      --c.ties;
    }
  }
  return rank_from(c);
}

RankingMetrics summarize_ranks(std::span<const double> ranks) {
  RankingMetrics m;
  m.queries = ranks.size();
  if (ranks.empty()) return m;
  for (double r : ranks) {
    m.mrr += 1.0 / r;
    m.hits1 += r <= 1.0 ? 1.0 : 0.0;
    m.hits3 += r <= 3.0 ? 1.0 : 0.0;
    m.hits10 += r <= 10.0 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  return m;
}

std::vector<double> rank_queries(const ModelParams& params, std::span<const Fact> split, const FilterIndex& filter,
                                 int threads) {
  std::vector<double> ranks(split.size());
  const std::size_t n_entities = params.tail_table().rows();
  parallel_blocks(split.size(), threads, [&](std::size_t lo, std::size_t hi) {
    Vec scores(n_entities);
    for (std::size_t i = lo; i < hi; ++i) {
      const Fact& f = split[i];
      score_all_candidates(params, Query{f.head, f.relation, query_time(params, f)}, scores);
      if (!all_finite(scores)) throw Error("evaluate: non-finite score");
      Counts c = count_above(scores, f.tail);
      const double s = scores[f.tail];
      for (Id k : filter.answers(f.head, f.relation, f.time)) {
        if (k == f.tail) continue;
        if (scores[k] > s) {
          --c.greater;
        } else if (scores[k] == s) {
          --c.ties;
        }
      }
      ranks[i] = rank_from(c);
    }
  });
  return ranks;
}

RankingReport evaluate_split(const ModelParams& params, std::span<const Fact> split, const FilterIndex& filter,
                             const RelationTypeMap* relation_types, int threads) {
  if (split.empty()) throw Error("evaluate_split: empty split");
  const auto ranks = rank_queries(params, split, filter, threads);
  RankingReport report;
  report.overall = summarize_ranks(ranks);
  if (relation_types != nullptr) {
    std::map<RelationType, std::vector<double>> grouped;
    for (std::size_t i = 0; i < split.size(); ++i) {
      grouped[relation_types->type_of(split[i].relation)].push_back(ranks[i]);
    }
    for (const auto& [type, rs] : grouped) report.by_type[type] = summarize_ranks(rs);
  }
  return report;
}

namespace {

void format_row(std::ostringstream& out, const std::string& name, const RankingMetrics& m) {
  out << std::left << std::setw(8) << name << std::right << std::fixed << std::setprecision(4) << std::setw(9)
      << m.mrr << std::setw(9) << m.hits1 << std::setw(9) << m.hits3 << std::setw(9) << m.hits10 << std::setw(10)
      << m.queries << '\n';
}

void format_kv(std::ostringstream& out, const std::string& prefix, const RankingMetrics& m) {
  out << std::setprecision(17);
  out << prefix << "mrr=" << m.mrr << '\n';
  out << prefix << "hits@1=" << m.hits1 << '\n';
  out << prefix << "hits@3=" << m.hits3 << '\n';
  out << prefix << "hits@10=" << m.hits10 << '\n';
  out << prefix << "queries=" << m.queries << '\n';
}

}  // namespace

std::string format_report(const RankingReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(8) << "split" << std::right << std::setw(9) << "MRR" << std::setw(9) << "H@1"
      << std::setw(9) << "H@3" << std::setw(9) << "H@10" << std::setw(10) << "queries" << '\n';
  format_row(out, "all", report.overall);
  for (const auto& [type, m] : report.by_type) format_row(out, to_string(type), m);
  return out.str();
}

std::string format_report_kv(const RankingReport& report) {
  std::ostringstream out;
  format_kv(out, "", report.overall);
  for (const auto& [type, m] : report.by_type) format_kv(out, std::string(to_string(type)) + ".", m);
  return out.str();
}

double lambda_sparsity(std::span<const RealMat* const> tables, double lambda) {
  if (lambda < 0.0) throw ConfigError("lambda_sparsity: lambda must be >= 0");
  std::size_t below = 0, total = 0;
  for (const RealMat* t : tables) {
    for (double x : t->flat()) below += std::abs(x) < lambda ? 1 : 0;
    total += t->size();
  }
  return total == 0 ? 0.0 : static_cast<double>(below) / static_cast<double>(total);
}

double lambda_sparsity(const RealMat& table, double lambda) {
  const RealMat* tables[] = {&table};
  return lambda_sparsity(tables, lambda);
}

double sparsity_threshold(std::span<const RealMat* const> tables, double target) {
  if (!(target >= 0.0 && target < 1.0)) throw ConfigError("target sparsity must lie in [0, 1)");
  std::vector<double> mags;
  for (const RealMat* t : tables) {
    for (double x : t->flat()) mags.push_back(std::abs(x));
  }
  if (mags.empty()) return 0.0;
  const auto need = static_cast<std::size_t>(std::ceil(target * static_cast<double>(mags.size()) - 1e-9));
  if (need == 0) return 0.0;
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(need - 1), mags.end());
  return std::nextafter(mags[need - 1], std::numeric_limits<double>::infinity());
}

std::size_t CsrMatrix::payload_bytes() const {
  return row_ptr.size() * sizeof(std::uint64_t) + col_idx.size() * sizeof(std::uint32_t) +
         values.size() * sizeof(float);
}

CsrMatrix to_csr(const RealMat& m) {
  CsrMatrix csr;
  csr.rows = m.rows();
  csr.cols = m.cols();
  csr.row_ptr.reserve(m.rows() + 1);
  csr.row_ptr.push_back(0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      const auto v = static_cast<float>(row[j]);
      if (v != 0.0f) {
        csr.col_idx.push_back(static_cast<std::uint32_t>(j));
        csr.values.push_back(v);
      }
    }
    csr.row_ptr.push_back(csr.values.size());
  }
  return csr;
}

RealMat from_csr(const CsrMatrix& csr) {
  if (csr.row_ptr.size() != csr.rows + 1) throw ParseError("csr: row pointer count mismatch");
  RealMat m(csr.rows, csr.cols);
  for (std::size_t i = 0; i < csr.rows; ++i) {
    for (std::uint64_t k = csr.row_ptr[i]; k < csr.row_ptr[i + 1]; ++k) {
      if (k >= csr.values.size() || csr.col_idx[k] >= csr.cols) throw ParseError("csr: index out of range");
      m(i, csr.col_idx[k]) = csr.values[k];
    }
  }
  return m;
}

namespace {

template <typename T>
void write_array(const std::filesystem::path& path, const std::vector<T>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kCsrMagic, 4);
  io::put<std::uint32_t>(out, kCsrVersion);
  for (const T& v : data) io::put<T>(out, v);
  if (!out) throw Error("write failed: " + path.string());
}

template <typename T>
std::vector<T> read_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kCsrMagic)) throw ParseError(path.string() + ": bad CSR magic");
  if (io::get<std::uint32_t>(in) != kCsrVersion) throw ParseError(path.string() + ": unsupported CSR version");
  const auto begin = in.tellg();
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg() - begin);
  in.seekg(begin);
  if (bytes % sizeof(T) != 0) throw ParseError(path.string() + ": truncated array");
  std::vector<T> data(bytes / sizeof(T));
  for (T& v : data) v = io::get<T>(in);
  return data;
}

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* suffix) {
  return prefix.string() + suffix;
}

}  // namespace

void write_csr(const CsrMatrix& csr, const std::filesystem::path& prefix) {
  write_array(with_suffix(prefix, ".rowptr"), csr.row_ptr);
  write_array(with_suffix(prefix, ".colidx"), csr.col_idx);
  write_array(with_suffix(prefix, ".values"), csr.values);
}

CsrMatrix read_csr(const std::filesystem::path& prefix, std::size_t cols) {
  CsrMatrix csr;
  csr.row_ptr = read_array<std::uint64_t>(with_suffix(prefix, ".rowptr"));
  csr.col_idx = read_array<std::uint32_t>(with_suffix(prefix, ".colidx"));
  csr.values = read_array<float>(with_suffix(prefix, ".values"));
  if (csr.row_ptr.empty() || csr.col_idx.size() != csr.values.size() || csr.row_ptr.back() != csr.values.size()) {
    throw ParseError(prefix.string() + ": inconsistent CSR arrays");
  }
  csr.rows = csr.row_ptr.size() - 1;
  csr.cols = cols;
  return csr;
}

ThresholdResult threshold_and_export(const ModelParams& params, double target, std::span<const Fact> test,
                                     const FilterIndex& filter, const std::optional<std::filesystem::path>& out_dir,
                                     int threads) {
  ThresholdResult result;
  result.thresholded = params;
  std::vector<RealMat*> entity_tables{&result.thresholded.head};
  if (!shares_entity_table(params.kind())) entity_tables.push_back(&result.thresholded.tail);
  std::vector<const RealMat*> const_tables(entity_tables.begin(), entity_tables.end());

  const double lambda = sparsity_threshold(const_tables, target);
  for (RealMat* t : entity_tables) {
    for (double& x : t->flat()) {
      if (std::abs(x) < lambda) x = 0.0;
    }
  }
  bool all_zero = true;
  for (const RealMat* t : const_tables) {
    all_zero = all_zero && std::all_of(t->flat().begin(), t->flat().end(), [](double x) { return x == 0.0; });
  }
  if (all_zero) throw Error("threshold_and_export: every entity entry was zeroed");

  SparsityReport& rep = result.report;
  rep.target = target;
  rep.threshold = lambda;
  // Count exact zeros, which includes entries that were already zero.
  std::size_t zeros = 0, total = 0;
  for (const RealMat* t : const_tables) {
    for (double x : t->flat()) zeros += x == 0.0 ? 1 : 0;
    total += t->size();
  }
  rep.achieved = static_cast<double>(zeros) / static_cast<double>(total);
  rep.before = evaluate_split(params, test, filter, nullptr, threads);
  rep.after = evaluate_split(result.thresholded, test, filter, nullptr, threads);
  rep.mrr_before = rep.before.overall.mrr;
  rep.mrr_after = rep.after.overall.mrr;

  for (const RealMat* t : const_tables) {
    result.csr.push_back(to_csr(*t));
    rep.nnz += result.csr.back().nnz();
    rep.csr_bytes += result.csr.back().payload_bytes();
    rep.dense_bytes += t->size() * sizeof(float);
  }
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_csr(result.csr[0], *out_dir / "entities");
    if (result.csr.size() > 1) write_csr(result.csr[1], *out_dir / "entities_tail");
  }
  return result;
}

std::string format_sparsity_report(const SparsityReport& r) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "target_sparsity=" << r.target << '\n';
  out << "threshold=" << r.threshold << '\n';
  out << "achieved_sparsity=" << r.achieved << '\n';
  out << "mrr_before=" << r.mrr_before << '\n';
  out << "mrr_after=" << r.mrr_after << '\n';
  out << "nnz=" << r.nnz << '\n';
  out << "csr_bytes=" << r.csr_bytes << '\n';
  out << "dense_f32_bytes=" << r.dense_bytes << '\n';
  out << "csr_to_dense_ratio=" << (r.dense_bytes ? static_cast<double>(r.csr_bytes) / r.dense_bytes : 0.0) << '\n';
  return out.str();
}

}  // namespace kge
