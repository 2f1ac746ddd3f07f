#include "kge/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <limits>
#include <sstream>

#include "kge/checkpoint.hpp"
#include "kge/error.hpp"

namespace kge {

const char* to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

Precision parse_precision(const std::string& name) {
  if (name == "f32") return Precision::F32;
  if (name == "f64") return Precision::F64;
  throw ConfigError("unknown precision '" + name + "' (expected f32 or f64)");
}

void validate(const TrainConfig& c) {
  if (c.dim == 0) throw ConfigError("dim must be >= 1");
  if (is_complex(c.model) && c.dim % 2 != 0) throw ConfigError("dim must be even for complex models");
  if (c.batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw ConfigError("learning rate must be > 0");
  if (!(c.w0 >= 0.0 && c.w0 <= 1.0)) throw ConfigError("w0 must lie in [0, 1]");
  if (!(c.init_scale >= 0.0) || !std::isfinite(c.init_scale)) throw ConfigError("init scale must be >= 0");
  if (!(c.adagrad_eps > 0.0)) throw ConfigError("adagrad eps must be > 0");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  validate(c.reg, c.model);
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("bad value for " + key + ": '" + text + "'");
}

std::string fmt(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_setting(TrainConfig& c, const std::string& key, const std::string& v) {
  if (key == "model") c.model = parse_model_kind(v);
  else if (key == "dim") c.dim = parse_number<std::size_t>(key, v);
  else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, v);
  else if (key == "lr") c.lr = parse_number<double>(key, v);
  else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "valid_every") c.valid_every = parse_number<std::size_t>(key, v);
  else if (key == "w0") c.w0 = parse_number<double>(key, v);
  else if (key == "reg") c.reg.kind = parse_reg_kind(v);
  else if (key == "lambda") c.reg.lambda = parse_number<double>(key, v);
  else if (key == "lambda1") c.reg.lambda1 = parse_number<double>(key, v);
  else if (key == "lambda2") c.reg.lambda2 = parse_number<double>(key, v);
  else if (key == "lambda3") c.reg.lambda3 = parse_number<double>(key, v);
  else if (key == "lambda4") c.reg.lambda4 = parse_number<double>(key, v);
  else if (key == "smoother") c.reg.smoother = parse_smoother_kind(v);
  else if (key == "smoother_weight") c.reg.smoother_weight = parse_number<double>(key, v);
  else if (key == "conjugate_tail") c.reg.conjugate_tail = parse_bool(key, v);
  else if (key == "precision") c.precision = parse_precision(v);
  else if (key == "init_scale") c.init_scale = parse_number<double>(key, v);
  else if (key == "adagrad_eps") c.adagrad_eps = parse_number<double>(key, v);
  else if (key == "threads") c.threads = parse_number<int>(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string to_config_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "model=" << to_string(c.model) << '\n'
      << "dim=" << c.dim << '\n'
      << "batch_size=" << c.batch_size << '\n'
      << "lr=" << fmt(c.lr) << '\n'
      << "epochs=" << c.epochs << '\n'
      << "seed=" << c.seed << '\n'
      << "valid_every=" << c.valid_every << '\n'
      << "w0=" << fmt(c.w0) << '\n'
      << "reg=" << to_string(c.reg.kind) << '\n'
      << "lambda=" << fmt(c.reg.lambda) << '\n'
      << "lambda1=" << fmt(c.reg.lambda1) << '\n'
      << "lambda2=" << fmt(c.reg.lambda2) << '\n'
      << "lambda3=" << fmt(c.reg.lambda3) << '\n'
      << "lambda4=" << fmt(c.reg.lambda4) << '\n'
      << "smoother=" << to_string(c.reg.smoother) << '\n'
      << "smoother_weight=" << fmt(c.reg.smoother_weight) << '\n'
      << "conjugate_tail=" << (c.reg.conjugate_tail ? "true" : "false") << '\n'
      << "precision=" << to_string(c.precision) << '\n'
      << "init_scale=" << fmt(c.init_scale) << '\n'
      << "adagrad_eps=" << fmt(c.adagrad_eps) << '\n'
      << "threads=" << c.threads << '\n';
  return out.str();
}

namespace {

std::map<std::string, std::string> parse_kv_lines(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source + ":" + std::to_string(lineno) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

}  // namespace

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  for (const auto& [k, v] : parse_kv_lines(in, "<config>")) apply_setting(base, k, v);
  return base;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_kv_lines(in, path.string());
}

double weighted_cross_entropy_inplace(std::span<double> scores, Id target, double weight, double grad_scale) {
  if (target >= scores.size()) throw Error("cross entropy: target out of range");
  const double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - m);
    sum += s;
  }
  const double target_exp = scores[target];
  // log(sum exp(s)) - s_t = log(sum) - (s_t - m)
  const double loss = weight * (std::log(sum) - std::log(target_exp));
  const double g = weight * grad_scale;
  for (double& s : scores) s = g * (s / sum);
  scores[target] -= g;
  return loss;
}

CrossEntropy weighted_cross_entropy(std::span<const double> scores, Id target, double weight) {
  if (!all_finite(scores)) throw Error("cross entropy: non-finite score");
  CrossEntropy ce;
  ce.grad.assign(scores.begin(), scores.end());
  ce.loss = weighted_cross_entropy_inplace(ce.grad, target, weight, 1.0);
  return ce;
}

void adagrad_update(std::span<double> param, std::span<const double> grad, std::span<double> state, double lr,
                    double eps) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    if (g == 0.0) continue;
    state[i] += g * g;
    param[i] -= lr * g / (std::sqrt(state[i]) + eps);
  }
}

namespace {

void update_rows(RealMat& p, const RealMat& g, RealMat& s, std::span<const Id> rows, double lr, double eps) {
  for (Id r : rows) adagrad_update(p.row(r), g.row(r), s.row(r), lr, eps);
}

void update_all(RealMat& p, const RealMat& g, RealMat& s, double lr, double eps) {
  adagrad_update(p.flat(), g.flat(), s.flat(), lr, eps);
}

}  // namespace

void adagrad_step(ModelParams& params, const GradientSet& grads, AdagradState& state, double lr, double eps) {
  ModelParams& acc = state.accum;
  if (acc.shape.kind != params.shape.kind || acc.head.rows() != params.head.rows()) {
    throw DimensionError("adagrad_step: state shape does not match params");
  }
  if (shares_entity_table(params.kind())) {
    update_all(params.head, grads.head, acc.head, lr, eps);
  } else {
    update_rows(params.head, grads.head, acc.head, grads.head_rows, lr, eps);
    update_all(params.tail, grads.tail, acc.tail, lr, eps);
  }
  update_rows(params.relation, grads.relation, acc.relation, grads.relation_rows, lr, eps);
  if (is_temporal(params.kind())) {
    if (grads.timestamps_dense) {
      update_all(params.timestamp, grads.timestamp, acc.timestamp, lr, eps);
    } else {
      update_rows(params.timestamp, grads.timestamp, acc.timestamp, grads.timestamp_rows, lr, eps);
    }
  }
}

std::vector<BatchExample> make_examples(std::span<const Fact> facts, const FrequencyTable& freq, double w0,
                                        bool temporal) {
  std::vector<BatchExample> out;
  out.reserve(facts.size());
  for (const Fact& f : facts) {
    BatchExample ex{f.head, f.relation, f.tail, std::nullopt, entity_weight(freq, f.tail, w0)};
    if (temporal) ex.time = f.time;
    out.push_back(ex);
  }
  return out;
}

double batch_objective(const ModelParams& params, std::span<const BatchExample> batch, const RegSpec& reg,
                       std::size_t chain_length, int threads, GradientSet* grads) {
  if (batch.empty()) return 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  RealMat queries, scores;
  score_batch(params, batch, queries, scores, threads);
  if (!all_finite(scores.flat())) return std::numeric_limits<double>::quiet_NaN();

  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    loss += weighted_cross_entropy_inplace(scores.row(b), batch[b].tail, batch[b].weight, inv_b);
  }
  loss *= inv_b;
  if (grads != nullptr) backward(params, batch, scores, *grads, &queries, threads);

  if (reg.kind != RegKind::None && reg.lambda != 0.0) {
    const double scale = reg.lambda * inv_b;
    double pen = 0.0;
    for (const BatchExample& ex : batch) {
      pen += grads != nullptr ? penalty_gradient(reg, params, ex, scale, *grads) : penalty(reg, params, ex);
    }
    loss += scale * pen;
  }
  if (is_temporal(params.kind()) && reg.smoother != SmootherKind::None && reg.smoother_weight != 0.0) {
    const bool complex = is_complex(params.kind());
    loss += reg.smoother_weight * timestamp_smoother(reg.smoother, params.timestamp, chain_length, complex);
    if (grads != nullptr) {
      timestamp_smoother_gradient(reg.smoother, params.timestamp, chain_length, complex, reg.smoother_weight,
                                  grads->timestamp);
      grads->timestamps_dense = true;
    }
  }
  if (grads != nullptr) grads->finalize();
  return loss;
}

std::string format_log_header() { return "epoch\ttrain_loss\tvalid_mrr\tvalid_hits@1\tvalid_hits@3\tvalid_hits@10"; }

std::string format_log_line(const LogEntry& e) {
  std::ostringstream out;
  out << e.epoch << '\t' << std::setprecision(17) << e.train_loss << '\t' << e.valid.mrr << '\t' << e.valid.hits1
      << '\t' << e.valid.hits3 << '\t' << e.valid.hits10;
  return out.str();
}

ModelShape shape_for(const Dataset& dataset, const TrainConfig& config) {
  if (!dataset.reciprocal_applied) throw ConfigError("dataset must be reciprocal-augmented before training");
  if (is_temporal(config.model) != dataset.temporal) {
    throw ConfigError(std::string("model ") + to_string(config.model) +
                      (dataset.temporal ? " is static but the dataset is temporal"
                                        : " is temporal but the dataset is static"));
  }
  return {config.model, config.dim, dataset.num_entities(), dataset.num_relations(), dataset.num_timestamps()};
}

namespace {

std::seed_seq seeds_for(std::uint64_t seed, std::uint64_t stream) {
  return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
}

}  // namespace

FitResult fit(const Dataset& dataset, const FilterIndex& filter, const TrainConfig& config,
              const FitOptions& options) {
  validate(config);
  const ModelShape shape = shape_for(dataset, config);
  if (dataset.train.empty()) throw ConfigError("empty training split");

  auto init_seq = seeds_for(config.seed, 0);
  std::mt19937_64 init_rng(init_seq);
  ModelParams params = make_params(shape, config.init_scale, init_rng);
  if (config.precision == Precision::F32) round_to_f32(params);

  const FrequencyTable freq(dataset.train, dataset.num_entities());
  const auto examples = make_examples(dataset.train, freq, config.w0, dataset.temporal);
  const std::size_t chain = dataset.num_real_timestamps();
  std::vector<std::size_t> order(examples.size());
  std::vector<BatchExample> batch;
  batch.reserve(config.batch_size);

  AdagradState state(shape);
  GradientSet grads(shape);
  FitResult result;
  bool have_best = false;
  if (options.log != nullptr) *options.log << format_log_header() << '\n';

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto seq = seeds_for(config.seed, epoch);
    std::mt19937_64 rng(seq);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + config.batch_size);
      batch.clear();
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(examples[order[i]]);
      const double loss = batch_objective(params, batch, config.reg, chain, config.threads, &grads);
      if (!std::isfinite(loss)) {
        double max_param = 0.0;
        for (const RealMat* t : params.tables()) max_param = std::max(max_param, max_abs(t->flat()));
        std::ostringstream msg;
        msg << "training diverged: non-finite loss at epoch " << epoch << ", batch " << batches
            << ", max |param| = " << max_param;
        throw TrainingDiverged(msg.str());
      }
      adagrad_step(params, grads, state, config.lr, config.adagrad_eps);
      if (config.precision == Precision::F32) round_to_f32(params);
      grads.clear();
      epoch_loss += loss;
      ++batches;
    }

    const bool eval_now = epoch == config.epochs || (config.valid_every > 0 && epoch % config.valid_every == 0);
    if (!eval_now) continue;
    LogEntry entry{epoch, epoch_loss / static_cast<double>(batches), {}};
    ModelParams snapshot = rounded_to_f32(params);
    if (!dataset.valid.empty()) entry.valid = evaluate_split(snapshot, dataset.valid, filter, nullptr, config.threads).overall;
    result.log.push_back(entry);
    if (options.log != nullptr) *options.log << format_log_line(entry) << std::endl;
    const bool better = !have_best || entry.valid.mrr > result.best_valid.mrr || dataset.valid.empty();
    if (better) {
      have_best = true;
      result.best = std::move(snapshot);
      result.best_epoch = epoch;
      result.best_valid = entry.valid;
      if (options.checkpoint) write_checkpoint(result.best, *options.checkpoint);
    }
  }
  if (!have_best) {
    // epochs == 0: the initial parameters are the only candidate.
    result.best = rounded_to_f32(params);
    if (options.checkpoint) write_checkpoint(result.best, *options.checkpoint);
  }
  return result;
}

}  // namespace kge
