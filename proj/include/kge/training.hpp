#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kge/data.hpp"
#include "kge/error.hpp"
#include "kge/evaluation.hpp"
#include "kge/models.hpp"
#include "kge/regularizers.hpp"

namespace kge {

enum class Precision { F64, F32 };

const char* to_string(Precision p);
Precision parse_precision(const std::string& name);

struct TrainConfig {
  ModelKind model = ModelKind::CP;
  std::size_t dim = 200;
  std::size_t batch_size = 1000;
  double lr = 0.1;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  std::size_t valid_every = 5;
  double w0 = 0.0;
  RegSpec reg;
  // F32 rounds parameters through float after each step so training sees the
  // same values a checkpoint stores.
  Precision precision = Precision::F64;
  double init_scale = 1e-3;
  double adagrad_eps = 1e-10;
  int threads = 1;
};

void validate(const TrainConfig& config);

/// Sets one field from its key=value spelling. Unknown keys throw ConfigError.
void apply_setting(TrainConfig& config, const std::string& key, const std::string& value);
/// Every field as key=value lines, in a fixed order; parse_config inverts it.
std::string to_config_text(const TrainConfig& config);
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
/// Flat key=value lines; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

struct CrossEntropy {
  double loss = 0.0;
  Vec grad;
};

/// weight * (logsumexp(scores) - scores[target]) and its gradient over scores.
CrossEntropy weighted_cross_entropy(std::span<const double> scores, Id target, double weight);
/// In-place variant: overwrites `scores` with the gradient times `grad_scale`, returns the loss.
double weighted_cross_entropy_inplace(std::span<double> scores, Id target, double weight, double grad_scale);

/// Accumulated squared gradients, shaped like the model.
struct AdagradState {
  ModelParams accum;

  AdagradState() = default;
  explicit AdagradState(const ModelShape& shape) : accum(zero_params(shape)) {}
};

/// state += g^2; p -= lr * g / (sqrt(state) + eps), elementwise.
void adagrad_update(std::span<double> param, std::span<const double> grad, std::span<double> state, double lr,
                    double eps);
/// Applies adagrad_update to every row the gradient set marks as touched.
void adagrad_step(ModelParams& params, const GradientSet& grads, AdagradState& state, double lr, double eps);

std::vector<BatchExample> make_examples(std::span<const Fact> facts, const FrequencyTable& freq, double w0,
                                        bool temporal);

/// (1/B) sum_b w_b CE_b + (lambda/B) sum_b penalty_b + smoother_weight * smoother.
/// `chain_length` is the number of timestamps in the smoothness chain. With
/// `grads` the gradient of that objective is accumulated into it.
double batch_objective(const ModelParams& params, std::span<const BatchExample> batch, const RegSpec& reg,
                       std::size_t chain_length, int threads = 1, GradientSet* grads = nullptr);

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct LogEntry {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  RankingMetrics valid;
};

std::string format_log_header();
std::string format_log_line(const LogEntry& entry);

struct FitOptions {
  std::ostream* log = nullptr;  // TSV lines as they are produced
  std::optional<std::filesystem::path> checkpoint;  // rewritten on each new best
};

struct FitResult {
  ModelParams best;  // f32-rounded snapshot with the best valid MRR
  std::size_t best_epoch = 0;
  RankingMetrics best_valid;
  std::vector<LogEntry> log;
};

ModelShape shape_for(const Dataset& dataset, const TrainConfig& config);

/// Trains on dataset.train (reciprocal-augmented) and selects by filtered valid
/// MRR, evaluated every `valid_every` epochs and after the last one.
FitResult fit(const Dataset& dataset, const FilterIndex& filter, const TrainConfig& config,
              const FitOptions& options = {});

}  // namespace kge
