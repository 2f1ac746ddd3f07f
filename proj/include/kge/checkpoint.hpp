#pragma once

#include <cstdint>
#include <filesystem>

#include "kge/data.hpp"
#include "kge/models.hpp"

namespace kge {

inline constexpr char kCheckpointMagic[4] = {'K', 'G', 'E', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Every table entry rounded through f32, i.e. exactly what a checkpoint stores.
ModelParams rounded_to_f32(const ModelParams& params);
void round_to_f32(ModelParams& params);

void write_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams read_checkpoint(const std::filesystem::path& path);

struct VocabHashes {
  std::uint64_t entities = 0;
  std::uint64_t relations = 0;
  std::uint64_t timestamps = 0;

  bool operator==(const VocabHashes&) const = default;
};

VocabHashes vocab_hashes(const Dataset& dataset);

/// `<checkpoint>.vocab`: key=value lines with the three hashes.
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);
void write_sidecar(const VocabHashes& hashes, const std::filesystem::path& checkpoint);
VocabHashes read_sidecar(const std::filesystem::path& checkpoint);

/// Throws ConfigError when the checkpoint's shape or sidecar hashes do not
/// belong to `dataset` (reciprocal-augmented).
void check_compatible(const ModelParams& params, const std::filesystem::path& checkpoint, const Dataset& dataset);

}  // namespace kge
