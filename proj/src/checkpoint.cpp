#include "kge/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <string>

#include "binary_io.hpp"
#include "kge/error.hpp"

namespace kge {

void round_to_f32(ModelParams& params) {
  for (RealMat* t : params.tables()) {
    for (double& x : t->flat()) x = static_cast<double>(static_cast<float>(x));
  }
}

ModelParams rounded_to_f32(const ModelParams& params) {
  ModelParams copy = params;
  round_to_f32(copy);
  return copy;
}

void write_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  validate_shape(params.shape);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kCheckpointMagic, 4);
  io::put<std::uint32_t>(out, kCheckpointVersion);
  io::put<std::uint8_t>(out, static_cast<std::uint8_t>(params.kind()));
  const ModelShape& s = params.shape;
  for (std::size_t v : {s.dim, s.entities, s.relations, s.timestamps}) {
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  for (const RealMat* t : params.tables()) {
    for (double x : t->flat()) io::put<float>(out, static_cast<float>(x));
  }
  if (!out) throw Error("write failed: " + path.string());
}

ModelParams read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kCheckpointMagic)) throw ParseError(path.string() + ": not a checkpoint");
  if (io::get<std::uint32_t>(in) != kCheckpointVersion) {
    throw ParseError(path.string() + ": unsupported checkpoint version");
  }
  const auto tag = io::get<std::uint8_t>(in);
  if (tag > static_cast<std::uint8_t>(ModelKind::TRESCAL)) throw ParseError(path.string() + ": unknown model kind");
  ModelShape shape;
  shape.kind = static_cast<ModelKind>(tag);
  shape.dim = io::get<std::uint32_t>(in);
  shape.entities = io::get<std::uint32_t>(in);
  shape.relations = io::get<std::uint32_t>(in);
  shape.timestamps = io::get<std::uint32_t>(in);
  try {
    validate_shape(shape);
  } catch (const Error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  ModelParams params = zero_params(shape);
  for (RealMat* t : params.tables()) {
    for (double& x : t->flat()) x = io::get<float>(in);
  }
  if (in.peek() != std::ifstream::traits_type::eof()) throw ParseError(path.string() + ": trailing bytes");
  return params;
}

VocabHashes vocab_hashes(const Dataset& dataset) {
  return {vocab_hash(dataset.entities), vocab_hash(dataset.relations),
          dataset.temporal ? vocab_hash(dataset.timestamps) : 0};
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  return checkpoint.string() + ".vocab";
}

void write_sidecar(const VocabHashes& h, const std::filesystem::path& checkpoint) {
  std::ofstream out(sidecar_path(checkpoint));
  if (!out) throw Error("cannot write " + sidecar_path(checkpoint).string());
  out << std::hex << "entities=" << h.entities << "\nrelations=" << h.relations << "\ntimestamps=" << h.timestamps
      << '\n';
}

VocabHashes read_sidecar(const std::filesystem::path& checkpoint) {
  const auto path = sidecar_path(checkpoint);
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::map<std::string, std::uint64_t> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string() + ": expected key=value");
    try {
      kv[line.substr(0, eq)] = std::stoull(line.substr(eq + 1), nullptr, 16);
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": bad hash value");
    }
  }
  for (const char* k : {"entities", "relations", "timestamps"}) {
    if (!kv.contains(k)) throw ParseError(path.string() + ": missing " + k);
  }
  return {kv["entities"], kv["relations"], kv["timestamps"]};
}

void check_compatible(const ModelParams& params, const std::filesystem::path& checkpoint, const Dataset& dataset) {
  const ModelShape& s = params.shape;
  if (s.entities != dataset.num_entities() || s.relations != dataset.num_relations() ||
      s.timestamps != dataset.num_timestamps()) {
    throw ConfigError("checkpoint shape does not match the dataset");
  }
  if (is_temporal(s.kind) != dataset.temporal) throw ConfigError("checkpoint and dataset disagree on temporality");
  if (std::filesystem::exists(sidecar_path(checkpoint)) && read_sidecar(checkpoint) != vocab_hashes(dataset)) {
    throw ConfigError("checkpoint vocab hashes do not match the dataset");
  }
}

}  // namespace kge
