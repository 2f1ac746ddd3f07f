#include "kge/algebra.hpp"

#include <algorithm>
#include <cmath>

#include "kge/error.hpp"

namespace kge {

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
}

}  // namespace

void RealMat::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double dot(std::span<const double> x, std::span<const double> y) {
  require_same(x.size(), y.size(), "dot");
  const std::size_t n = x.size();
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += x[i] * y[i];
    a1 += x[i + 1] * y[i + 1];
    a2 += x[i + 2] * y[i + 2];
    a3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) a0 += x[i] * y[i];
  return (a0 + a1) + (a2 + a3);
}

double re_trilinear(std::span<const double> u, std::span<const double> r, std::span<const double> v) {
  require_same(u.size(), r.size(), "re_trilinear");
  require_same(u.size(), v.size(), "re_trilinear");
  if (u.size() % 2 != 0) throw DimensionError("re_trilinear: complex storage length must be even");
  const std::size_t h = u.size() / 2;
  double acc = 0.0;
  for (std::size_t d = 0; d < h; ++d) {
    const double a = u[d], b = u[d + h];
    const double c = r[d], e = r[d + h];
    const double x = v[d], y = v[d + h];
    // conj(u) * r = (ac + be) + i(ae - bc)
    acc += (a * c + b * e) * x - (a * e - b * c) * y;
  }
  return acc;
}

void row_matvec(std::span<const double> u, std::span<const double> m, std::span<double> out) {
  const std::size_t n = u.size();
  require_same(m.size(), n * out.size(), "row_matvec");
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t cols = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ui = u[i];
    if (ui == 0.0) continue;
    const double* mi = m.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += ui * mi[j];
  }
}

void row_matvec_transposed(std::span<const double> u, std::span<const double> m, std::span<double> out) {
  const std::size_t cols = u.size();
  require_same(m.size(), out.size() * cols, "row_matvec_transposed");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dot(m.subspan(i * cols, cols), u);
}

Vec row_matvec(std::span<const double> u, const RealMat& m) {
  require_same(u.size(), m.rows(), "row_matvec");
  Vec out(m.cols());
  row_matvec(u, m.flat(), out);
  return out;
}

Vec row_matvec_transposed(std::span<const double> u, const RealMat& m) {
  require_same(u.size(), m.cols(), "row_matvec_transposed");
  Vec out(m.rows());
  row_matvec_transposed(u, m.flat(), out);
  return out;
}

Norms norms(std::span<const double> x) {
  Norms n;
  for (double v : x) {
    const double a = std::abs(v);
    n.l1 += a;
    n.l2_sq += a * a;
    n.l3_cubed += a * a * a;
  }
  return n;
}

Norms complex_norms(std::span<const double> x) {
  if (x.size() % 2 != 0) throw DimensionError("complex_norms: complex storage length must be even");
  const std::size_t h = x.size() / 2;
  Norms n;
  for (std::size_t d = 0; d < h; ++d) {
    const double sq = x[d] * x[d] + x[d + h] * x[d + h];
    const double m = std::sqrt(sq);
    n.l1 += m;
    n.l2_sq += sq;
    n.l3_cubed += sq * m;
  }
  return n;
}

void complex_hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out,
                      bool conjugate_b) {
  require_same(a.size(), b.size(), "complex_hadamard");
  require_same(a.size(), out.size(), "complex_hadamard");
  const std::size_t h = a.size() / 2;
  const double s = conjugate_b ? -1.0 : 1.0;
  for (std::size_t d = 0; d < h; ++d) {
    const double ar = a[d], ai = a[d + h];
    const double br = b[d], bi = s * b[d + h];
    out[d] = ar * br - ai * bi;
    out[d + h] = ar * bi + ai * br;
  }
}

Vec squared_magnitudes(std::span<const double> x, bool complex) {
  if (!complex) {
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * x[i];
    return out;
  }
  const std::size_t h = x.size() / 2;
  Vec out(h);
  for (std::size_t d = 0; d < h; ++d) out[d] = x[d] * x[d] + x[d + h] * x[d + h];
  return out;
}

double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace kge
