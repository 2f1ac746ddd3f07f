#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

using namespace kge;

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path toy_dataset() {
  const fs::path dir = fs::temp_directory_path() / "kge_cli_toy";
  fs::create_directories(dir);
  std::mt19937_64 rng(71);
  auto dump = [&](const char* name, std::size_t n) {
    std::ofstream out(dir / name);
    for (const auto& l : testing::random_kg_lines(15, 3, n, rng)) out << l << '\n';
  };
  dump("train.txt", 80);
  dump("valid.txt", 10);
  dump("test.txt", 10);
  return dir;
}

std::string value_of(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + "=");
  REQUIRE(pos != std::string::npos);
  const auto start = pos + key.size() + 1;
  return text.substr(start, text.find('\n', start) - start);
}

}  // namespace

TEST_CASE("stats") {
  const Run r = run({"stats", "--data", toy_dataset().string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("train\t80") != std::string::npos);
  CHECK(r.out.find("relations\t3") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"train", "--bogus"}).code == 2);
  CHECK(run({"stats", "--data", "/nonexistent/dir"}).code == 2);
  const fs::path out = fs::temp_directory_path() / "kge_cli_bad";
  CHECK(run({"train", "--data", toy_dataset().string(), "--out", out.string(), "--model", "rescal", "--reg", "n3"})
            .code == 2);
  CHECK(run({"train", "--data", toy_dataset().string(), "--out", out.string(), "--model", "complex", "--dim", "5"})
            .code == 2);
  CHECK(run({"eval", "--data", toy_dataset().string(), "--checkpoint", "/nonexistent.kgec"}).code == 2);
  CHECK(run({"train", "--data", toy_dataset().string(), "--out", out.string(), "--config", "/missing.cfg"}).code == 2);
}

TEST_CASE("help lists flags with defaults") {
  const Run r = run({"train", "--help"});
  CHECK(r.code == 0);
  for (const char* flag : {"--model", "--dim", "--batch", "--lr", "--epochs", "--seed", "--valid-every", "--w0",
                           "--reg", "--lambda", "--lambda1", "--lambda2", "--lambda3", "--lambda4", "--smoother",
                           "--smoother-weight", "--conjugate-tail", "--precision", "--threads", "--init-scale",
                           "--config", "--data", "--out"}) {
    CAPTURE(flag);
    CHECK(r.out.find(flag) != std::string::npos);
  }
  CHECK(r.out.find("0.001") != std::string::npos);  // init scale default
}

TEST_CASE("verify") {
  const Run r = run({"verify", "--seeds", "5"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("tdura2.balance") != std::string::npos);
}

TEST_CASE("train, eval, sparsify, export") {
  const fs::path data = toy_dataset();
  const fs::path out = fs::temp_directory_path() / "kge_cli_run";
  fs::remove_all(out);
  fs::create_directories(out);
  std::ofstream(out / "base.cfg") << "model=complex\ndim=8\nepochs=4\nlr=0.5\n";
  const Run t = run({"train", "--data", data.string(), "--out", out.string(), "--config", (out / "base.cfg").string(),
                     "--epochs", "6", "--valid-every", "3", "--reg", "dura", "--lambda", "0.01"});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("seed=0") != std::string::npos);
  const std::string config = [&] {
    std::ifstream in(out / "config.txt");
    return std::string(std::istreambuf_iterator<char>(in), {});
  }();
  CHECK(config.find("epochs=6") != std::string::npos);  // flag overrides file
  CHECK(config.find("lr=0.5") != std::string::npos);    // file overrides default
  CHECK(fs::exists(out / "model.kgec"));
  CHECK(fs::exists(out / "model.kgec.vocab"));
  CHECK(fs::exists(out / "train_log.tsv"));

  const Run e = run({"eval", "--data", data.string(), "--checkpoint", (out / "model.kgec").string(), "--split",
                     "valid", "--by-relation-type"});
  REQUIRE(e.code == 0);
  CHECK(value_of(e.out, "mrr") == value_of(t.out, "best_valid_mrr"));

  const Run s = run({"sparsify", "--data", data.string(), "--checkpoint", (out / "model.kgec").string(),
                     "--sparsity", "0.5", "--out", (out / "sparse").string()});
  REQUIRE(s.code == 0);
  CHECK(std::stod(value_of(s.out, "achieved_sparsity")) >= 0.5);
  for (const char* f : {"entities.rowptr", "entities.colidx", "entities.values", "sparsity_report.txt"}) {
    CHECK(fs::exists(out / "sparse" / f));
  }

  const Run x = run({"export", "--data", data.string(), "--checkpoint", (out / "model.kgec").string(), "--out",
                     (out / "export").string()});
  REQUIRE(x.code == 0);
  CHECK(fs::file_size(out / "export" / "entities.f32") == 15 * 8 * 4);
  CHECK(fs::exists(out / "export" / "relations.tsv"));

  // A checkpoint from another dataset is refused.
  const fs::path other = fs::temp_directory_path() / "kge_cli_other";
  fs::create_directories(other);
  for (const char* f : {"train.txt", "valid.txt", "test.txt"}) std::ofstream(other / f) << "p\tq\tr\n";
  CHECK(run({"eval", "--data", other.string(), "--checkpoint", (out / "model.kgec").string()}).code == 2);
}
