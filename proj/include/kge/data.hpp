#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace kge {

using Id = std::uint32_t;

/// A fact (head, relation, tail[, time]). Static datasets keep time = 0 and
/// never read it.
struct Fact {
  Id head = 0;
  Id relation = 0;
  Id tail = 0;
  Id time = 0;

  bool operator==(const Fact&) const = default;
};

/// Bidirectional label <-> id map. Ids are dense and assigned in insertion order.
class Vocab {
 public:
  Id intern(const std::string& label);
  Id id(const std::string& label) const;  // throws if absent
  bool contains(const std::string& label) const { return index_.contains(label); }
  const std::string& label(Id id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  static Vocab from_labels(std::vector<std::string> labels);

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, Id> index_;
};

enum class Split { Train, Valid, Test };

struct Dataset {
  Vocab entities;
  Vocab relations;   // raw relations, then reciprocals once augmented
  Vocab timestamps;  // sorted labels, NO_TIME (if any) last
  std::vector<Fact> train;
  std::vector<Fact> valid;
  std::vector<Fact> test;
  bool temporal = false;
  bool reciprocal_applied = false;
  bool has_no_time = false;
  std::size_t raw_relation_count = 0;
  std::vector<std::string> warnings;

  const std::vector<Fact>& split(Split s) const;
  std::size_t num_entities() const { return entities.size(); }
  std::size_t num_relations() const { return relations.size(); }
  std::size_t num_timestamps() const { return temporal ? timestamps.size() : 0; }
  /// Timestamps that take part in the smoothness chain (excludes NO_TIME).
  std::size_t num_real_timestamps() const {
    return temporal ? timestamps.size() - (has_no_time ? 1 : 0) : 0;
  }
};

inline constexpr const char* kNoTimeLabel = "<NO_TIME>";
inline constexpr const char* kReciprocalSuffix = "_reverse";

/// Parses tab-separated train/valid/test files. Static files have exactly
/// three fields per line; temporal files have four (or three, mapped to NO_TIME).
Dataset load_dataset(const std::filesystem::path& train_path, const std::filesystem::path& valid_path,
                     const std::filesystem::path& test_path, bool temporal);

/// Loads `<dir>/train.txt`, `<dir>/valid.txt`, `<dir>/test.txt`.
Dataset load_dataset_dir(const std::filesystem::path& dir, bool temporal);

/// Same as load_dataset but from in-memory lines; used by tests and tools.
Dataset parse_dataset(const std::vector<std::string>& train_lines, const std::vector<std::string>& valid_lines,
                      const std::vector<std::string>& test_lines, bool temporal);

/// Appends (v, r + |R_raw|, u[, t]) for every fact in every split.
Dataset add_reciprocals(Dataset dataset);

/// Maps a fact to its reciprocal and back: applying it twice is the identity.
Fact reciprocal_of(const Fact& f, std::size_t raw_relation_count);

void write_vocab(const Vocab& vocab, const std::filesystem::path& path);
Vocab read_vocab(const std::filesystem::path& path);

/// Known-true answers per (head, relation[, time]) query over train, valid and test.
class FilterIndex {
 public:
  FilterIndex() = default;
  FilterIndex(std::span<const Fact> facts, bool temporal);

  /// Sorted ascending; empty span for an unknown key.
  std::span<const Id> answers(Id head, Id relation, Id time = 0) const;
  bool contains(Id head, Id relation, Id time, Id tail) const;
  std::size_t num_keys() const { return index_.size(); }

 private:
  struct Key {
    Id head, relation, time;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  bool temporal_ = false;
  std::unordered_map<Key, std::vector<Id>, KeyHash> index_;
};

FilterIndex build_filter_index(const Dataset& dataset);

/// Occurrences of each entity as the answer (tail) of a training fact.
class FrequencyTable {
 public:
  FrequencyTable() = default;
  FrequencyTable(std::span<const Fact> train, std::size_t num_entities);

  std::uint64_t count(Id entity) const { return counts_.at(entity); }
  std::uint64_t max_count() const { return max_; }
  std::size_t size() const { return counts_.size(); }

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t max_ = 0;
};

/// w(v) = w0 * (#v / max #) + (1 - w0).
double entity_weight(const FrequencyTable& freq, Id entity, double w0);

enum class RelationType : std::uint8_t { OneToOne, OneToN, NToOne, NToN };

const char* to_string(RelationType t);
/// Type seen from the reciprocal direction (1-N <-> N-1).
RelationType flipped(RelationType t);

struct RelationTypeMap {
  std::vector<RelationType> types;  // per raw relation
  std::vector<double> tails_per_head;
  std::vector<double> heads_per_tail;
  std::vector<std::string> warnings;

  /// Type for a possibly reciprocal relation id.
  RelationType type_of(Id relation) const;
  std::size_t raw_count() const { return types.size(); }
};

inline constexpr double kRelationTypeThreshold = 1.5;

/// Labels raw relations by mean tails-per-head and heads-per-tail. Facts with a
/// reciprocal relation id (>= raw_relation_count) are ignored.
RelationTypeMap classify_relations(std::span<const Fact> train, std::size_t raw_relation_count);

struct DatasetStats {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t timestamps = 0;
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};

/// Counts of the raw (non-reciprocal) dataset.
DatasetStats dataset_stats(const Dataset& dataset);

/// FNV-1a 64 over the labels in id order; used for checkpoint sidecars.
std::uint64_t vocab_hash(const Vocab& vocab);

}  // namespace kge
