#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>

#include "kge/checkpoint.hpp"
#include "kge/data.hpp"
#include "kge/error.hpp"
#include "kge/evaluation.hpp"
#include "kge/theory.hpp"
#include "kge/training.hpp"

namespace kge::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

struct ConfigFlag {
  const char* flag;
  const char* key;
  const char* help;
};

// Flags that map one-to-one onto TrainConfig keys.
constexpr ConfigFlag kConfigFlags[] = {
    {"--model", "model", "cp | complex | rescal | tcomplex | trescal"},
    {"--dim", "dim", "embedding size D (even for complex kinds)"},
    {"--batch", "batch_size", "batch size"},
    {"--lr", "lr", "Adagrad learning rate"},
    {"--epochs", "epochs", "training epochs"},
    {"--seed", "seed", "RNG seed for init and shuffling"},
    {"--valid-every", "valid_every", "epochs between validations (0: only after the last)"},
    {"--w0", "w0", "frequency weighting of the loss, in [0, 1]"},
    {"--reg", "reg", "none | fro | n3 | dura | dura_i | dura_ii | reg_p1 | tdura1 | tdura2 | tweighted"},
    {"--lambda", "lambda", "regularization weight"},
    {"--lambda1", "lambda1", "DURA plain-norm weight / TWEIGHTED part 1"},
    {"--lambda2", "lambda2", "DURA projected-norm weight / TWEIGHTED part 2"},
    {"--lambda3", "lambda3", "TWEIGHTED part 3"},
    {"--lambda4", "lambda4", "TWEIGHTED part 4"},
    {"--smoother", "smoother", "timestamp smoother: none | l2 | l3"},
    {"--smoother-weight", "smoother_weight", "smoother coefficient"},
    {"--conjugate-tail", "conjugate_tail", "true | false: use v*conj(r) in the tail projection"},
    {"--precision", "precision", "f32 | f64"},
    {"--init-scale", "init_scale", "std of the Gaussian initialization"},
    {"--adagrad-eps", "adagrad_eps", "Adagrad epsilon"},
};

std::map<std::string, std::string> default_settings() {
  std::map<std::string, std::string> kv;
  std::istringstream in(to_config_text(TrainConfig{}));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string default_data_dir() {
  const char* env = std::getenv("KGE_DATA_DIR");
  return env != nullptr ? env : "";
}

fs::path require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what + " (pass --data or set KGE_DATA_DIR)");
  if (!fs::is_directory(path)) throw UsageError(std::string(what) + " not found: " + path);
  for (const char* f : {"train.txt", "valid.txt", "test.txt"}) {
    if (!fs::is_regular_file(fs::path(path) / f)) throw UsageError("missing " + (fs::path(path) / f).string());
  }
  return path;
}

fs::path require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what);
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
  return path;
}

fs::path require_out(const std::string& path) {
  if (path.empty()) throw UsageError("missing --out directory");
  fs::create_directories(path);
  return path;
}

struct Loaded {
  Dataset dataset;
  FilterIndex filter;
};

Loaded load(const fs::path& dir, bool temporal, std::ostream& err) {
  Loaded l;
  l.dataset = add_reciprocals(load_dataset_dir(dir, temporal));
  for (const auto& w : l.dataset.warnings) err << "warning: " << w << '\n';
  l.filter = build_filter_index(l.dataset);
  return l;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_f32(const fs::path& path, const RealMat& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (double x : m.flat()) {
    const float f = static_cast<float>(x);
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
}

void write_labels(const fs::path& path, const Vocab& vocab) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (Id i = 0; i < vocab.size(); ++i) out << i << '\t' << vocab.label(i) << '\n';
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  throw UsageError("--split must be train, valid or test");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge graph embedding toolkit: training, evaluation, sparsification, theory checks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  std::string data = default_data_dir();
  std::string out_dir, checkpoint, config_path, split_name = "test";
  int threads = 1;
  bool temporal = false, by_type = false;
  double sparsity = 0.5;
  std::size_t seeds = 20;
  std::uint64_t theory_seed = 0;

  const auto defaults = default_settings();
  std::map<std::string, std::string> settings;

  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", data, "dataset directory with train/valid/test.txt (default: $KGE_DATA_DIR)")
        ->capture_default_str();
  };
  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "worker threads; 1 is bitwise deterministic")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  };

  auto* train = app.add_subcommand("train", "train a model; writes checkpoint, log and config under --out");
  add_data(train);
  add_threads(train);
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--config", config_path, "flat key=value file; flags override it");
  std::map<std::string, CLI::Option*> config_options;
  for (const auto& f : kConfigFlags) {
    config_options[f.key] =
        train->add_option(f.flag, settings[f.key], f.help)->default_str(defaults.at(f.key));
  }

  auto* eval = app.add_subcommand("eval", "filtered ranking report for a checkpoint");
  add_data(eval);
  add_threads(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--split", split_name, "train | valid | test")->capture_default_str();
  eval->add_flag("--by-relation-type", by_type, "add 1-1 / 1-N / N-1 / N-N breakdowns");
  eval->add_option("--out", out_dir, "also write report.txt here");

  auto* sparsify = app.add_subcommand("sparsify", "threshold entity embeddings and export CSR");
  add_data(sparsify);
  add_threads(sparsify);
  sparsify->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  sparsify->add_option("--sparsity", sparsity, "target fraction of zeroed entity entries, in [0, 1)")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  sparsify->add_option("--out", out_dir, "output directory")->required();

  auto* verify = app.add_subcommand("verify", "numerical checks of the DURA balance theorems");
  verify->add_option("--seeds", seeds, "random instances per check")->capture_default_str()->check(CLI::PositiveNumber);
  verify->add_option("--seed", theory_seed, "base seed")->capture_default_str();

  auto* exporter = app.add_subcommand("export", "raw f32 embedding dump and vocab TSVs");
  add_data(exporter);
  exporter->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  exporter->add_option("--out", out_dir, "output directory")->required();

  auto* stats = app.add_subcommand("stats", "dataset statistics");
  add_data(stats);
  stats->add_flag("--temporal", temporal, "four-column (timestamped) files");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (train->parsed()) {
      TrainConfig config;
      if (!config_path.empty()) {
        for (const auto& [k, v] : read_config_file(require_file(config_path, "--config file"))) {
          apply_setting(config, k, v);
        }
      }
      for (const auto& [key, opt] : config_options) {
        if (opt->count() > 0) apply_setting(config, key, settings[key]);
      }
      if (train->count("--threads") > 0) config.threads = threads;
      validate(config);
      const fs::path dir = require_dir(data, "dataset directory");
      const fs::path outp = require_out(out_dir);

      Loaded l = load(dir, is_temporal(config.model), err);
      write_text(outp / "config.txt", to_config_text(config));
      const fs::path ckpt = outp / "model.kgec";
      std::ofstream log(outp / "train_log.tsv");
      out << "seed=" << config.seed << " model=" << to_string(config.model) << " reg=" << to_string(config.reg.kind)
          << '\n';
      FitOptions opts{&log, ckpt};
      FitResult r = fit(l.dataset, l.filter, config, opts);
      write_sidecar(vocab_hashes(l.dataset), ckpt);
      out << "best_epoch=" << r.best_epoch << '\n' << "best_valid_mrr=" << std::setprecision(17) << r.best_valid.mrr
          << '\n' << "checkpoint=" << ckpt.string() << '\n';
      return kExitOk;
    }

    if (eval->parsed() || sparsify->parsed() || exporter->parsed()) {
      const fs::path ckpt = require_file(checkpoint, "--checkpoint");
      const fs::path dir = require_dir(data, "dataset directory");
      const Split split = parse_split(split_name);
      ModelParams params = read_checkpoint(ckpt);
      Loaded l = load(dir, is_temporal(params.kind()), err);
      check_compatible(params, ckpt, l.dataset);

      if (eval->parsed()) {
        std::optional<RelationTypeMap> types;
        if (by_type) {
          types = classify_relations(l.dataset.train, l.dataset.raw_relation_count);
          for (const auto& w : types->warnings) err << "warning: " << w << '\n';
        }
        const RankingReport rep =
            evaluate_split(params, l.dataset.split(split), l.filter, types ? &*types : nullptr, threads);
        out << format_report(rep) << format_report_kv(rep);
        if (!out_dir.empty()) write_text(require_out(out_dir) / "report.txt", format_report_kv(rep));
      } else if (sparsify->parsed()) {
        const fs::path outp = require_out(out_dir);
        const ThresholdResult r = threshold_and_export(params, sparsity, l.dataset.test, l.filter, outp, threads);
        const std::string text = format_sparsity_report(r.report);
        write_text(outp / "sparsity_report.txt", text);
        out << text;
      } else {
        const fs::path outp = require_out(out_dir);
        write_f32(outp / "entities.f32", params.head);
        if (!shares_entity_table(params.kind())) write_f32(outp / "tail_entities.f32", params.tail);
        write_f32(outp / "relations.f32", params.relation);
        write_labels(outp / "entities.tsv", l.dataset.entities);
        write_labels(outp / "relations.tsv", l.dataset.relations);
        if (is_temporal(params.kind())) {
          write_f32(outp / "timestamps.f32", params.timestamp);
          write_labels(outp / "timestamps.tsv", l.dataset.timestamps);
        }
        out << "rows x cols: entities " << params.head.rows() << " x " << params.head.cols() << ", relations "
            << params.relation.rows() << " x " << params.relation.cols() << '\n';
      }
      return kExitOk;
    }

    if (verify->parsed()) {
      bool ok = true;
      for (const auto& c : theory::run_theory_suite(seeds, theory_seed)) {
        out << theory::format_check(c) << '\n';
        ok = ok && c.pass;
      }
      return ok ? kExitOk : kExitFailure;
    }

    if (stats->parsed()) {
      const Dataset d = load_dataset_dir(require_dir(data, "dataset directory"), temporal);
      for (const auto& w : d.warnings) err << "warning: " << w << '\n';
      const DatasetStats s = dataset_stats(d);
      out << "entities\t" << s.entities << '\n' << "relations\t" << s.relations << '\n';
      if (temporal) out << "timestamps\t" << s.timestamps << '\n';
      out << "train\t" << s.train << '\n' << "valid\t" << s.valid << '\n' << "test\t" << s.test << '\n';
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UnsupportedError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace kge::cli
