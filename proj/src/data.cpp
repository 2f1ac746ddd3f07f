#include "kge/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "kge/error.hpp"

namespace kge {

Id Vocab::intern(const std::string& label) {
  auto [it, inserted] = index_.try_emplace(label, static_cast<Id>(labels_.size()));
  if (inserted) labels_.push_back(label);
  return it->second;
}

Id Vocab::id(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw Error("unknown label: " + label);
  return it->second;
}

Vocab Vocab::from_labels(std::vector<std::string> labels) {
  Vocab v;
  for (auto& l : labels) {
    if (v.contains(l)) throw ParseError("duplicate vocabulary label: " + l);
    v.intern(l);
  }
  return v;
}

const std::vector<Fact>& Dataset::split(Split s) const {
  switch (s) {
    case Split::Train:
      return train;
    case Split::Valid:
      return valid;
    case Split::Test:
      return test;
  }
  return train;
}

namespace {

struct RawFact {
  std::string head, relation, tail, time;
  bool has_time = false;
};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::vector<RawFact> parse_lines(const std::vector<std::string>& lines, bool temporal, const std::string& source) {
  std::vector<RawFact> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    const bool ok = temporal ? (fields.size() == 3 || fields.size() == 4) : fields.size() == 3;
    if (!ok) {
      std::ostringstream msg;
      msg << source << ":" << (i + 1) << ": expected " << (temporal ? "3 or 4" : "3")
          << " tab-separated fields, got " << fields.size();
      throw ParseError(msg.str());
    }
    RawFact f{fields[0], fields[1], fields[2], "", false};
    if (fields.size() == 4) {
      f.time = fields[3];
      f.has_time = true;
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(std::move(line));
  return lines;
}

Dataset build(const std::vector<RawFact>& train, const std::vector<RawFact>& valid,
              const std::vector<RawFact>& test, bool temporal) {
  if (train.empty()) throw ParseError("train split is empty");
  Dataset ds;
  ds.temporal = temporal;

  const std::vector<RawFact>* splits[] = {&train, &valid, &test};
  if (temporal) {
    std::set<std::string> stamps;
    for (auto* s : splits) {
      for (const auto& f : *s) {
        if (f.has_time) {
          stamps.insert(f.time);
        } else {
          ds.has_no_time = true;
        }
      }
    }
    for (const auto& t : stamps) ds.timestamps.intern(t);
    if (ds.has_no_time) ds.timestamps.intern(kNoTimeLabel);
  }

  std::vector<Fact>* outs[] = {&ds.train, &ds.valid, &ds.test};
  for (int s = 0; s < 3; ++s) {
    outs[s]->reserve(splits[s]->size());
    for (const auto& f : *splits[s]) {
      Fact fact;
      fact.head = ds.entities.intern(f.head);
      fact.relation = ds.relations.intern(f.relation);
      fact.tail = ds.entities.intern(f.tail);
      if (temporal) fact.time = ds.timestamps.id(f.has_time ? f.time : kNoTimeLabel);
      outs[s]->push_back(fact);
    }
  }
  ds.raw_relation_count = ds.relations.size();

  // Splits should be disjoint; benchmark files occasionally are not.
  auto key = [](const Fact& f) {
    return (static_cast<std::uint64_t>(f.head) * 1315423911ULL) ^ (static_cast<std::uint64_t>(f.relation) << 40) ^
           (static_cast<std::uint64_t>(f.tail) << 20) ^ (static_cast<std::uint64_t>(f.time) * 2654435761ULL);
  };
  auto hash = [&](const Fact& f) { return static_cast<std::size_t>(key(f)); };
  std::unordered_set<Fact, decltype(hash)> train_set(ds.train.begin(), ds.train.end(), 16, hash);
  std::size_t overlap = 0;
  for (const auto& f : ds.valid) overlap += train_set.contains(f);
  for (const auto& f : ds.test) overlap += train_set.contains(f);
  if (overlap > 0) {
    ds.warnings.push_back(std::to_string(overlap) + " valid/test facts also appear in train");
  }
  if (ds.has_no_time) {
    ds.warnings.push_back("untimed facts mapped to " + std::string(kNoTimeLabel));
  }
  return ds;
}

}  // namespace

Dataset parse_dataset(const std::vector<std::string>& train_lines, const std::vector<std::string>& valid_lines,
                      const std::vector<std::string>& test_lines, bool temporal) {
  return build(parse_lines(train_lines, temporal, "train"), parse_lines(valid_lines, temporal, "valid"),
               parse_lines(test_lines, temporal, "test"), temporal);
}

Dataset load_dataset(const std::filesystem::path& train_path, const std::filesystem::path& valid_path,
                     const std::filesystem::path& test_path, bool temporal) {
  return build(parse_lines(read_lines(train_path), temporal, train_path.string()),
               parse_lines(read_lines(valid_path), temporal, valid_path.string()),
               parse_lines(read_lines(test_path), temporal, test_path.string()), temporal);
}

Dataset load_dataset_dir(const std::filesystem::path& dir, bool temporal) {
  return load_dataset(dir / "train.txt", dir / "valid.txt", dir / "test.txt", temporal);
}

Fact reciprocal_of(const Fact& f, std::size_t raw_relation_count) {
  const auto n = static_cast<Id>(raw_relation_count);
  const Id rel = f.relation < n ? f.relation + n : f.relation - n;
  return Fact{f.tail, rel, f.head, f.time};
}

Dataset add_reciprocals(Dataset dataset) {
  if (dataset.reciprocal_applied) throw Error("add_reciprocals: reciprocals already applied");
  const std::size_t n = dataset.raw_relation_count;
  for (std::size_t r = 0; r < n; ++r) {
    dataset.relations.intern(dataset.relations.label(static_cast<Id>(r)) + kReciprocalSuffix);
  }
  if (dataset.relations.size() != 2 * n) throw Error("add_reciprocals: reciprocal label collides with a raw label");
  for (auto* split : {&dataset.train, &dataset.valid, &dataset.test}) {
    const std::size_t m = split->size();
    split->reserve(2 * m);
    for (std::size_t i = 0; i < m; ++i) split->push_back(reciprocal_of((*split)[i], n));
  }
  dataset.reciprocal_applied = true;
  return dataset;
}

void write_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = 0; i < vocab.size(); ++i) out << i << '\t' << vocab.label(static_cast<Id>(i)) << '\n';
}

Vocab read_vocab(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto tab = lines[i].find('\t');
    if (tab == std::string::npos) throw ParseError(path.string() + ":" + std::to_string(i + 1) + ": missing tab");
    if (std::stoul(lines[i].substr(0, tab)) != labels.size()) {
      throw ParseError(path.string() + ":" + std::to_string(i + 1) + ": ids must be dense and ordered");
    }
    labels.push_back(lines[i].substr(tab + 1));
  }
  return Vocab::from_labels(std::move(labels));
}

std::size_t FilterIndex::KeyHash::operator()(const Key& k) const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (Id v : {k.head, k.relation, k.time}) {
    h ^= v;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

FilterIndex::FilterIndex(std::span<const Fact> facts, bool temporal) : temporal_(temporal) {
  for (const auto& f : facts) index_[Key{f.head, f.relation, temporal ? f.time : 0}].push_back(f.tail);
  for (auto& [key, tails] : index_) {
    std::sort(tails.begin(), tails.end());
    tails.erase(std::unique(tails.begin(), tails.end()), tails.end());
  }
}

std::span<const Id> FilterIndex::answers(Id head, Id relation, Id time) const {
  auto it = index_.find(Key{head, relation, temporal_ ? time : 0});
  if (it == index_.end()) return {};
  return it->second;
}

bool FilterIndex::contains(Id head, Id relation, Id time, Id tail) const {
  auto a = answers(head, relation, time);
  return std::binary_search(a.begin(), a.end(), tail);
}

FilterIndex build_filter_index(const Dataset& dataset) {
  if (!dataset.reciprocal_applied) throw Error("build_filter_index: apply reciprocals first");
  std::vector<Fact> all;
  all.reserve(dataset.train.size() + dataset.valid.size() + dataset.test.size());
  all.insert(all.end(), dataset.train.begin(), dataset.train.end());
  all.insert(all.end(), dataset.valid.begin(), dataset.valid.end());
  all.insert(all.end(), dataset.test.begin(), dataset.test.end());
  return FilterIndex(all, dataset.temporal);
}

FrequencyTable::FrequencyTable(std::span<const Fact> train, std::size_t num_entities) : counts_(num_entities, 0) {
  for (const auto& f : train) ++counts_.at(f.tail);
  max_ = counts_.empty() ? 0 : *std::max_element(counts_.begin(), counts_.end());
}

double entity_weight(const FrequencyTable& freq, Id entity, double w0) {
  if (!(w0 >= 0.0 && w0 <= 1.0)) throw ConfigError("w0 must lie in [0, 1]");
  if (w0 == 0.0) return 1.0;
  if (freq.max_count() == 0) throw ConfigError("entity_weight: frequency table has no counts");
  return w0 * (static_cast<double>(freq.count(entity)) / static_cast<double>(freq.max_count())) + (1.0 - w0);
}

const char* to_string(RelationType t) {
  switch (t) {
    case RelationType::OneToOne:
      return "1-1";
    case RelationType::OneToN:
      return "1-N";
    case RelationType::NToOne:
      return "N-1";
    case RelationType::NToN:
      return "N-N";
  }
  return "?";
}

RelationType flipped(RelationType t) {
  if (t == RelationType::OneToN) return RelationType::NToOne;
  if (t == RelationType::NToOne) return RelationType::OneToN;
  return t;
}

RelationType RelationTypeMap::type_of(Id relation) const {
  const std::size_t n = types.size();
  if (relation < n) return types[relation];
  return flipped(types.at(relation - n));
}

RelationTypeMap classify_relations(std::span<const Fact> train, std::size_t raw_relation_count) {
  const std::size_t n = raw_relation_count;
  std::vector<std::set<std::pair<Id, Id>>> pairs(n);
  for (const auto& f : train) {
    if (f.relation < n) pairs[f.relation].emplace(f.head, f.tail);
  }
  RelationTypeMap map;
  map.types.resize(n, RelationType::OneToOne);
  map.tails_per_head.resize(n, 0.0);
  map.heads_per_tail.resize(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    if (pairs[r].empty()) {
      map.warnings.push_back("relation " + std::to_string(r) + " has no training facts; labeled 1-1");
      continue;
    }
    std::set<Id> heads, tails;
    for (const auto& [h, t] : pairs[r]) {
      heads.insert(h);
      tails.insert(t);
    }
    const double count = static_cast<double>(pairs[r].size());
    const double tph = count / static_cast<double>(heads.size());
    const double hpt = count / static_cast<double>(tails.size());
    map.tails_per_head[r] = tph;
    map.heads_per_tail[r] = hpt;
    const bool many_tails = tph >= kRelationTypeThreshold;
    const bool many_heads = hpt >= kRelationTypeThreshold;
    if (many_tails && many_heads) {
      map.types[r] = RelationType::NToN;
    } else if (many_tails) {
      map.types[r] = RelationType::OneToN;
    } else if (many_heads) {
      map.types[r] = RelationType::NToOne;
    }
  }
  return map;
}

DatasetStats dataset_stats(const Dataset& dataset) {
  DatasetStats s;
  s.entities = dataset.num_entities();
  s.relations = dataset.raw_relation_count;
  s.timestamps = dataset.num_timestamps();
  const std::size_t div = dataset.reciprocal_applied ? 2 : 1;
  s.train = dataset.train.size() / div;
  s.valid = dataset.valid.size() / div;
  s.test = dataset.test.size() / div;
  return s;
}

std::uint64_t vocab_hash(const Vocab& vocab) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const auto& label : vocab.labels()) {
    for (unsigned char c : label) mix(c);
    mix(0);
  }
  return h;
}

}  // namespace kge
