#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "kge/checkpoint.hpp"
#include "kge/error.hpp"
#include "support.hpp"

using namespace kge;
using namespace kge::testing;

namespace fs = std::filesystem;

TEST_CASE("checkpoint round trip for every kind") {
  const fs::path dir = fs::temp_directory_path() / "kge_test_ckpt";
  fs::create_directories(dir);
  std::mt19937_64 rng(61);
  for (ModelKind kind : kAllKinds) {
    const ModelParams p = rounded_to_f32(random_params(small_shape(kind, 4), rng));
    write_checkpoint(p, dir / "m.kgec");
    CHECK(read_checkpoint(dir / "m.kgec") == p);

    std::size_t floats = 0;
    for (const RealMat* t : p.tables()) floats += t->size();
    CHECK(fs::file_size(dir / "m.kgec") == 4 + 4 + 1 + 16 + 4 * floats);
  }
}

TEST_CASE("checkpoint header layout") {
  const fs::path path = fs::temp_directory_path() / "kge_test_header.kgec";
  ModelParams p = zero_params(ModelShape{ModelKind::TComplEx, 2, 3, 4, 5});
  write_checkpoint(p, path);
  std::ifstream in(path, std::ios::binary);
  unsigned char b[25];
  in.read(reinterpret_cast<char*>(b), 25);
  CHECK(std::string(b, b + 4) == "KGEC");
  CHECK(b[4] == 1);
  CHECK(b[8] == static_cast<unsigned char>(ModelKind::TComplEx));
  CHECK(b[9] == 2);
  CHECK(b[13] == 3);
  CHECK(b[17] == 4);
  CHECK(b[21] == 5);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const fs::path dir = fs::temp_directory_path() / "kge_test_ckpt_bad";
  fs::create_directories(dir);
  std::mt19937_64 rng(62);
  write_checkpoint(random_params(small_shape(ModelKind::CP, 4), rng), dir / "ok.kgec");
  const auto size = fs::file_size(dir / "ok.kgec");

  fs::copy_file(dir / "ok.kgec", dir / "short.kgec", fs::copy_options::overwrite_existing);
  fs::resize_file(dir / "short.kgec", size - 3);
  CHECK_THROWS_AS(read_checkpoint(dir / "short.kgec"), ParseError);

  fs::copy_file(dir / "ok.kgec", dir / "long.kgec", fs::copy_options::overwrite_existing);
  std::ofstream(dir / "long.kgec", std::ios::app | std::ios::binary) << "x";
  CHECK_THROWS_AS(read_checkpoint(dir / "long.kgec"), ParseError);

  std::ofstream(dir / "magic.kgec", std::ios::binary) << "NOPE";
  CHECK_THROWS_AS(read_checkpoint(dir / "magic.kgec"), ParseError);
  CHECK_THROWS_AS(read_checkpoint(dir / "absent.kgec"), Error);
}

TEST_CASE("sidecar hashes guard against the wrong dataset") {
  const fs::path path = fs::temp_directory_path() / "kge_test_sidecar.kgec";
  const Dataset a = add_reciprocals(parse_dataset({"x\tr\ty", "y\tr\tz"}, {}, {}, false));
  const Dataset b = add_reciprocals(parse_dataset({"x\tr\ty", "y\tr\tw"}, {}, {}, false));
  const ModelParams p = zero_params(ModelShape{ModelKind::CP, 2, 3, 2, 0});
  write_checkpoint(p, path);
  write_sidecar(vocab_hashes(a), path);
  CHECK(read_sidecar(path) == vocab_hashes(a));
  CHECK_NOTHROW(check_compatible(p, path, a));
  CHECK_THROWS_AS(check_compatible(p, path, b), ConfigError);
  const ModelParams wrong = zero_params(ModelShape{ModelKind::CP, 2, 4, 2, 0});
  CHECK_THROWS_AS(check_compatible(wrong, path, a), ConfigError);
}
