#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kge {

using Vec = std::vector<double>;

// Dense row-major matrix. Also used as an embedding table: one row per index.
class RealMat {
 public:
  RealMat() = default;
  RealMat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v);
  bool operator==(const RealMat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec data_;
};

struct Norms {
  double l1 = 0.0;
  double l2_sq = 0.0;
  double l3_cubed = 0.0;
};

/// Sum of x[i] * y[i] with a fixed four-way accumulation order. Every score in
/// the library goes through this so that per-candidate and all-candidate
/// scoring agree bitwise.
double dot(std::span<const double> x, std::span<const double> y);

/// Re(sum_d conj(u_d) * r_d * v_d) over split-half complex vectors
/// (first half real parts, second half imaginary parts).
double re_trilinear(std::span<const double> u, std::span<const double> r, std::span<const double> v);

/// Row vector times matrix: out = u * m.
Vec row_matvec(std::span<const double> u, const RealMat& m);
/// Row vector times transposed matrix: out = u * m^T.
Vec row_matvec_transposed(std::span<const double> u, const RealMat& m);

/// Row vector times a D x D matrix stored flat (row-major) in `m`.
void row_matvec(std::span<const double> u, std::span<const double> m, std::span<double> out);
void row_matvec_transposed(std::span<const double> u, std::span<const double> m, std::span<double> out);

Norms norms(std::span<const double> x);
/// Norms of a split-half complex vector where the per-entry magnitude is the modulus.
Norms complex_norms(std::span<const double> x);

/// Elementwise complex product a * b (or a * conj(b)) of split-half vectors.
void complex_hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out,
                      bool conjugate_b = false);

/// Per-entry squared magnitude: x_d^2 for real vectors, |z_d|^2 for split-half complex
/// ones (length D/2 then).
Vec squared_magnitudes(std::span<const double> x, bool complex);

double max_abs(std::span<const double> x);
bool all_finite(std::span<const double> x);

}  // namespace kge
