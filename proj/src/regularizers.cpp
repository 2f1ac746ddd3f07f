#include "kge/regularizers.hpp"

#include <array>
#include <cmath>
#include <initializer_list>

#include "kge/error.hpp"

namespace kge {

const char* to_string(RegKind kind) {
  switch (kind) {
    case RegKind::None:
      return "none";
    case RegKind::Fro:
      return "fro";
    case RegKind::N3:
      return "n3";
    case RegKind::Dura:
      return "dura";
    case RegKind::DuraI:
      return "dura_i";
    case RegKind::DuraII:
      return "dura_ii";
    case RegKind::RegP1:
      return "reg_p1";
    case RegKind::TDura1:
      return "tdura1";
    case RegKind::TDura2:
      return "tdura2";
    case RegKind::TWeighted:
      return "tweighted";
  }
  return "?";
}

RegKind parse_reg_kind(const std::string& name) {
  for (auto k : {RegKind::None, RegKind::Fro, RegKind::N3, RegKind::Dura, RegKind::DuraI, RegKind::DuraII,
                 RegKind::RegP1, RegKind::TDura1, RegKind::TDura2, RegKind::TWeighted}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown regularizer: " + name);
}

const char* to_string(SmootherKind kind) {
  switch (kind) {
    case SmootherKind::None:
      return "none";
    case SmootherKind::L2:
      return "l2";
    case SmootherKind::L3:
      return "l3";
  }
  return "?";
}

SmootherKind parse_smoother_kind(const std::string& name) {
  for (auto k : {SmootherKind::None, SmootherKind::L2, SmootherKind::L3}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown smoother: " + name);
}

void validate(const RegSpec& spec, ModelKind model) {
  for (double w : {spec.lambda, spec.lambda1, spec.lambda2, spec.lambda3, spec.lambda4, spec.smoother_weight}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("regularizer weights must be finite and >= 0");
  }
  auto combo = [&] { return std::string(to_string(spec.kind)) + " with " + to_string(model); };
  const bool temporal = is_temporal(model);
  switch (spec.kind) {
    case RegKind::None:
    case RegKind::Fro:
      break;
    case RegKind::N3:
      if (has_matrix_relations(model)) {
        throw UnsupportedError(combo() + ": N3 needs diagonal relations");
      }
      break;
    case RegKind::Dura:
    case RegKind::DuraI:
    case RegKind::DuraII:
    case RegKind::RegP1:
      if (temporal) throw UnsupportedError(combo() + ": use tdura1/tdura2/tweighted for temporal models");
      break;
    case RegKind::TDura1:
      if (!temporal) throw UnsupportedError(combo() + ": temporal regularizer on a static model");
      break;
    case RegKind::TDura2:
      if (!temporal) throw UnsupportedError(combo() + ": temporal regularizer on a static model");
      if (model == ModelKind::TRESCAL) throw UnsupportedError(combo() + ": matrix products do not commute");
      break;
    case RegKind::TWeighted:
      if (!temporal) throw UnsupportedError(combo() + ": temporal regularizer on a static model");
      if (model == ModelKind::TRESCAL && (spec.lambda1 != 0.0 || spec.lambda2 != 0.0)) {
        throw UnsupportedError(combo() + ": lambda1/lambda2 parts need diagonal relations (set them to 0)");
      }
      break;
  }
  if (spec.smoother != SmootherKind::None && !temporal) {
    throw UnsupportedError(std::string("timestamp smoother with static model ") + to_string(model));
  }
}

namespace {

struct Factor {
  std::span<const double> x;
  std::span<double> g;  // empty when gradients are not requested
};

struct Ctx {
  double scale = 0.0;
  bool grad = false;
  bool complex = false;
  std::size_t dim = 0;
};

double sq_norm(const Ctx& c, const Factor& f) {
  double v = 0.0;
  for (std::size_t i = 0; i < f.x.size(); ++i) {
    v += f.x[i] * f.x[i];
    if (c.grad) f.g[i] += c.scale * 2.0 * f.x[i];
  }
  return v;
}

double cube_norm(const Ctx& c, const Factor& f) {
  double v = 0.0;
  if (!c.complex) {
    for (std::size_t i = 0; i < f.x.size(); ++i) {
      const double a = std::abs(f.x[i]);
      v += a * a * a;
      if (c.grad) f.g[i] += c.scale * 3.0 * a * f.x[i];
    }
    return v;
  }
  const std::size_t h = f.x.size() / 2;
  for (std::size_t d = 0; d < h; ++d) {
    const double m = std::hypot(f.x[d], f.x[d + h]);
    v += m * m * m;
    if (c.grad) {
      f.g[d] += c.scale * 3.0 * m * f.x[d];
      f.g[d + h] += c.scale * 3.0 * m * f.x[d + h];
    }
  }
  return v;
}

// sum_d prod_i |x_i,d|^2 for diagonal factors.
double diag_prod_sq(const Ctx& c, std::initializer_list<const Factor*> factors) {
  const std::size_t n = c.complex ? c.dim / 2 : c.dim;
  const std::size_t k = factors.size();
  double mags[4];
  double v = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    std::size_t i = 0;
    for (const Factor* f : factors) {
      mags[i++] = c.complex ? f->x[d] * f->x[d] + f->x[d + n] * f->x[d + n] : f->x[d] * f->x[d];
    }
    double prod = 1.0;
    for (std::size_t j = 0; j < k; ++j) prod *= mags[j];
    v += prod;
    if (!c.grad) continue;
    i = 0;
    for (const Factor* f : factors) {
      double other = 1.0;
      for (std::size_t j = 0; j < k; ++j) {
        if (j != i) other *= mags[j];
      }
      f->g[d] += c.scale * 2.0 * f->x[d] * other;
      if (c.complex) f->g[d + n] += c.scale * 2.0 * f->x[d + n] * other;
      ++i;
    }
  }
  return v;
}

// Effective relation matrix M = R or R (.) T.
Vec effective_matrix(const Factor& r, const Factor* t) {
  Vec m(r.x.begin(), r.x.end());
  if (t != nullptr) {
    for (std::size_t i = 0; i < m.size(); ++i) m[i] *= t->x[i];
  }
  return m;
}

void scatter_matrix_grad(const Ctx& c, std::span<const double> gm, const Factor& r, const Factor* t) {
  if (!c.grad) return;
  for (std::size_t i = 0; i < gm.size(); ++i) {
    if (t != nullptr) {
      r.g[i] += gm[i] * t->x[i];
      t->g[i] += gm[i] * r.x[i];
    } else {
      r.g[i] += gm[i];
    }
  }
}

// ||u M||^2
double mat_head_sq(const Ctx& c, const Factor& u, const Factor& r, const Factor* t) {
  const std::size_t n = c.dim;
  const Vec m = effective_matrix(r, t);
  Vec p(n);
  row_matvec(u.x, m, p);
  double v = 0.0;
  for (double x : p) v += x * x;
  if (c.grad) {
    Vec gm(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        acc += m[i * n + j] * p[j];
        gm[i * n + j] = c.scale * 2.0 * u.x[i] * p[j];
      }
      u.g[i] += c.scale * 2.0 * acc;
    }
    scatter_matrix_grad(c, gm, r, t);
  }
  return v;
}

// ||v M^T||^2
double mat_tail_sq(const Ctx& c, const Factor& v, const Factor& r, const Factor* t) {
  const std::size_t n = c.dim;
  const Vec m = effective_matrix(r, t);
  Vec q(n);
  row_matvec_transposed(v.x, m, q);
  double val = 0.0;
  for (double x : q) val += x * x;
  if (c.grad) {
    Vec gm(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        gm[i * n + j] = c.scale * 2.0 * q[i] * v.x[j];
        v.g[j] += c.scale * 2.0 * m[i * n + j] * q[i];
      }
    }
    scatter_matrix_grad(c, gm, r, t);
  }
  return val;
}

// ||x * y - z||_1 for diagonal factors; `conj_y` conjugates y for complex vectors.
double diag_l1(const Ctx& c, const Factor& x, const Factor& y, const Factor& z, bool conj_y) {
  double v = 0.0;
  if (!c.complex) {
    for (std::size_t d = 0; d < c.dim; ++d) {
      const double p = x.x[d] * y.x[d] - z.x[d];
      v += std::abs(p);
      if (c.grad && p != 0.0) {
        const double s = c.scale * (p > 0.0 ? 1.0 : -1.0);
        x.g[d] += s * y.x[d];
        y.g[d] += s * x.x[d];
        z.g[d] -= s;
      }
    }
    return v;
  }
  const std::size_t h = c.dim / 2;
  const double sy = conj_y ? -1.0 : 1.0;
  for (std::size_t d = 0; d < h; ++d) {
    const double xr = x.x[d], xi = x.x[d + h];
    const double yr = y.x[d], yi = sy * y.x[d + h];
    const double pr = xr * yr - xi * yi - z.x[d];
    const double pi = xr * yi + xi * yr - z.x[d + h];
    const double m = std::hypot(pr, pi);
    v += m;
    if (c.grad && m > 0.0) {
      const double wr = c.scale * pr / m, wi = c.scale * pi / m;
      x.g[d] += wr * yr + wi * yi;
      x.g[d + h] += -wr * yi + wi * yr;
      y.g[d] += wr * xr + wi * xi;
      y.g[d + h] += sy * (-wr * xi + wi * xr);
      z.g[d] -= wr;
      z.g[d + h] -= wi;
    }
  }
  return v;
}

// ||u M - v||_1 (tail = false) or ||v M^T - u||_1 (tail = true).
double mat_l1(const Ctx& c, const Factor& u, const Factor& r, const Factor& v, bool tail) {
  const std::size_t n = c.dim;
  Vec p(n);
  if (!tail) {
    row_matvec(u.x, r.x, p);
    for (std::size_t j = 0; j < n; ++j) p[j] -= v.x[j];
  } else {
    row_matvec_transposed(v.x, r.x, p);
    for (std::size_t i = 0; i < n; ++i) p[i] -= u.x[i];
  }
  double val = 0.0;
  for (double x : p) val += std::abs(x);
  if (!c.grad) return val;
  Vec s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = p[i] > 0.0 ? c.scale : (p[i] < 0.0 ? -c.scale : 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double rij = r.x[i * n + j];
      if (!tail) {
        u.g[i] += rij * s[j];
        r.g[i * n + j] += u.x[i] * s[j];
      } else {
        v.g[j] += rij * s[i];
        r.g[i * n + j] += s[i] * v.x[j];
      }
    }
  }
  auto& minus = tail ? u : v;
  for (std::size_t i = 0; i < n; ++i) minus.g[i] -= s[i];
  return val;
}

// lambda1 (|u r|^2 + |v t|^2) + lambda2 (|u t|^2 + |v r|^2) + lambda3 (|u|^2 + |v|^2)
//   + lambda4 (|u (r t)|^2 + |v (r t)|^2). TDURA1 and TDURA2 are fixed weightings.
double weighted_temporal(const Ctx& c, const Factor& u, const Factor& r, const Factor& v, const Factor& t, bool matrix,
                         std::array<double, 4> w) {
  auto scaled = [&](double x) {
    Ctx ci = c;
    ci.scale = c.scale * x;
    return ci;
  };
  double val = 0.0;
  if (w[0] != 0.0) {
    const Ctx c1 = scaled(w[0]);
    val += w[0] * (diag_prod_sq(c1, {&u, &r}) + diag_prod_sq(c1, {&v, &t}));
  }
  if (w[1] != 0.0) {
    const Ctx c2 = scaled(w[1]);
    val += w[1] * (diag_prod_sq(c2, {&u, &t}) + diag_prod_sq(c2, {&v, &r}));
  }
  if (w[2] != 0.0) {
    const Ctx c3 = scaled(w[2]);
    val += w[2] * (sq_norm(c3, u) + sq_norm(c3, v));
  }
  if (w[3] != 0.0) {
    const Ctx c4 = scaled(w[3]);
    val += w[3] * (matrix ? mat_head_sq(c4, u, r, &t) + mat_tail_sq(c4, v, r, &t)
                          : diag_prod_sq(c4, {&u, &r, &t}) + diag_prod_sq(c4, {&v, &r, &t}));
  }
  return val;
}

double evaluate(const RegSpec& spec, const ModelParams& params, const BatchExample& ex, GradientSet* grads,
                double scale) {
  validate(spec, params.kind());
  check_query(params, ex.query());
  if (ex.tail >= params.shape.entities) throw Error("tail id out of range");
  const ModelKind kind = params.kind();
  const bool temporal = is_temporal(kind);
  const bool matrix = has_matrix_relations(kind);

  Ctx c{scale, grads != nullptr, is_complex(kind), params.dim()};
  Factor u{params.head.row(ex.head), {}};
  Factor r{params.relation.row(ex.relation), {}};
  Factor v{params.tail_table().row(ex.tail), {}};
  Factor t{};
  if (temporal) t.x = params.timestamp.row(*ex.time);
  if (grads != nullptr) {
    u.g = grads->head.row(ex.head);
    r.g = grads->relation.row(ex.relation);
    v.g = grads->tail_table(kind).row(ex.tail);
    grads->head_rows.push_back(ex.head);
    grads->relation_rows.push_back(ex.relation);
    if (temporal) {
      t.g = grads->timestamp.row(*ex.time);
      grads->timestamp_rows.push_back(*ex.time);
    }
  }

  switch (spec.kind) {
    case RegKind::None:
      return 0.0;
    case RegKind::Fro: {
      double val = sq_norm(c, u) + sq_norm(c, r) + sq_norm(c, v);
      if (temporal) val += sq_norm(c, t);
      return val;
    }
    case RegKind::N3: {
      double val = cube_norm(c, u) + cube_norm(c, r) + cube_norm(c, v);
      if (temporal) val += cube_norm(c, t);
      return val;
    }
    case RegKind::DuraI:
      return (matrix ? mat_head_sq(c, u, r, nullptr) : diag_prod_sq(c, {&u, &r})) + sq_norm(c, v);
    case RegKind::DuraII:
      return (matrix ? mat_tail_sq(c, v, r, nullptr) : diag_prod_sq(c, {&v, &r})) + sq_norm(c, u);
    case RegKind::Dura: {
      Ctx c1 = c;
      c1.scale = scale * spec.lambda1;
      Ctx c2 = c;
      c2.scale = scale * spec.lambda2;
      const double plain = sq_norm(c1, u) + sq_norm(c1, v);
      const double projected = matrix ? mat_head_sq(c2, u, r, nullptr) + mat_tail_sq(c2, v, r, nullptr)
                                      : diag_prod_sq(c2, {&u, &r}) + diag_prod_sq(c2, {&v, &r});
      return spec.lambda1 * plain + spec.lambda2 * projected;
    }
    case RegKind::RegP1:
      if (matrix) return mat_l1(c, u, r, v, false) + mat_l1(c, u, r, v, true);
      return diag_l1(c, u, r, v, true) + diag_l1(c, v, r, u, spec.conjugate_tail);
    case RegKind::TDura1:
      return weighted_temporal(c, u, r, v, t, matrix, {0.0, 0.0, 1.0, 1.0});
    case RegKind::TDura2:
      return weighted_temporal(c, u, r, v, t, matrix, {1.0, 1.0, 0.0, 0.0});
    case RegKind::TWeighted:
      return weighted_temporal(c, u, r, v, t, matrix, {spec.lambda1, spec.lambda2, spec.lambda3, spec.lambda4});
  }
  return 0.0;
}

}  // namespace

double static_penalty(const RegSpec& spec, const ModelParams& params, const BatchExample& example) {
  if (is_temporal_reg(spec.kind)) throw UnsupportedError("static_penalty: temporal regularizer kind");
  return evaluate(spec, params, example, nullptr, 1.0);
}

double temporal_penalty(const RegSpec& spec, const ModelParams& params, const BatchExample& example) {
  if (!is_temporal_reg(spec.kind)) throw UnsupportedError("temporal_penalty: static regularizer kind");
  return evaluate(spec, params, example, nullptr, 1.0);
}

double penalty(const RegSpec& spec, const ModelParams& params, const BatchExample& example) {
  return evaluate(spec, params, example, nullptr, 1.0);
}

double penalty_gradient(const RegSpec& spec, const ModelParams& params, const BatchExample& example, double scale,
                        GradientSet& grads) {
  if (spec.kind == RegKind::None) return 0.0;
  return evaluate(spec, params, example, &grads, scale);
}

namespace {

double smoother_impl(SmootherKind kind, const RealMat& ts, std::size_t chain, bool complex, double scale,
                     RealMat* grad) {
  if (kind == SmootherKind::None || chain < 2) return 0.0;
  if (chain > ts.rows()) throw DimensionError("timestamp_smoother: chain longer than table");
  const std::size_t width = ts.cols();
  const double norm = 1.0 / static_cast<double>(chain - 1);
  const double s = scale * norm;
  double total = 0.0;
  for (std::size_t l = 0; l + 1 < chain; ++l) {
    const auto a = ts.row(l);
    const auto b = ts.row(l + 1);
    if (kind == SmootherKind::L2) {
      for (std::size_t i = 0; i < width; ++i) {
        const double diff = b[i] - a[i];
        total += diff * diff;
        if (grad != nullptr) {
          (*grad)(l + 1, i) += s * 2.0 * diff;
          (*grad)(l, i) -= s * 2.0 * diff;
        }
      }
    } else if (!complex) {
      for (std::size_t i = 0; i < width; ++i) {
        const double diff = b[i] - a[i];
        const double m = std::abs(diff);
        total += m * m * m;
        if (grad != nullptr) {
          (*grad)(l + 1, i) += s * 3.0 * m * diff;
          (*grad)(l, i) -= s * 3.0 * m * diff;
        }
      }
    } else {
      const std::size_t h = width / 2;
      for (std::size_t d = 0; d < h; ++d) {
        const double dr = b[d] - a[d];
        const double di = b[d + h] - a[d + h];
        const double m = std::hypot(dr, di);
        total += m * m * m;
        if (grad != nullptr) {
          (*grad)(l + 1, d) += s * 3.0 * m * dr;
          (*grad)(l, d) -= s * 3.0 * m * dr;
          (*grad)(l + 1, d + h) += s * 3.0 * m * di;
          (*grad)(l, d + h) -= s * 3.0 * m * di;
        }
      }
    }
  }
  return total * norm;
}

}  // namespace

double timestamp_smoother(SmootherKind kind, const RealMat& timestamps, std::size_t chain_length, bool complex,
                          std::vector<std::string>* warnings) {
  if (kind != SmootherKind::None && chain_length < 2 && warnings != nullptr) {
    warnings->push_back("timestamp smoother needs at least two timestamps; returning 0");
  }
  return smoother_impl(kind, timestamps, chain_length, complex, 1.0, nullptr);
}

void timestamp_smoother_gradient(SmootherKind kind, const RealMat& timestamps, std::size_t chain_length,
                                 bool complex, double scale, RealMat& grad) {
  smoother_impl(kind, timestamps, chain_length, complex, scale, &grad);
}

}  // namespace kge
