#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "newscap/common.hpp"

namespace newscap::kg {

struct Triplet {
  std::string head;
  std::string relation;
  std::string tail;
  double weight = 0.0;

  bool operator==(const Triplet& o) const {
    return head == o.head && relation == o.relation && tail == o.tail && weight == o.weight;
  }
};

enum class RelationCategory { Explanatory, Relevant, Ignored };

// relation -> high-level category. Relations absent from the mapping are
// ignored (and counted) rather than guessed.
class RelationTaxonomy {
 public:
  void set(const std::string& relation, RelationCategory cat) { map_[relation] = cat; }

  RelationCategory category(const std::string& relation) const {
    auto it = map_.find(relation);
    if (it == map_.end()) {
      ++unknown_count_;
      return RelationCategory::Ignored;
    }
    return it->second;
  }

  bool known(const std::string& relation) const { return map_.count(relation) != 0; }
  size_t unknown_count() const { return unknown_count_; }
  size_t size() const { return map_.size(); }

  // Attested defaults: IsA explanatory; CreatedBy, RelatedTo relevant.
  static RelationTaxonomy defaults() {
    RelationTaxonomy t;
    t.set("IsA", RelationCategory::Explanatory);
    t.set("CreatedBy", RelationCategory::Relevant);
    t.set("RelatedTo", RelationCategory::Relevant);
    return t;
  }

  // Lines "relation=explanatory|relevant|ignored", '#' comments skipped.
  static RelationTaxonomy load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open taxonomy file: " + path);
    RelationTaxonomy t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ParseError(path + ":" + std::to_string(lineno) + ": expected relation=category");
      std::string rel = line.substr(0, eq), cat = line.substr(eq + 1);
      if (cat == "explanatory")
        t.set(rel, RelationCategory::Explanatory);
      else if (cat == "relevant")
        t.set(rel, RelationCategory::Relevant);
      else if (cat == "ignored")
        t.set(rel, RelationCategory::Ignored);
      else
        throw ParseError(path + ":" + std::to_string(lineno) + ": unknown category '" + cat + "'");
    }
    return t;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    for (const auto& [rel, cat] : map_) {
      const char* c = cat == RelationCategory::Explanatory ? "explanatory"
                      : cat == RelationCategory::Relevant  ? "relevant"
                                                           : "ignored";
      out << rel << "=" << c << "\n";
    }
  }

 private:
  std::map<std::string, RelationCategory> map_;
  mutable size_t unknown_count_ = 0;
};

struct Degree {
  int in = 0;
  int out = 0;
  int total() const { return in + out; }
};

// Indexed triple store. Immutable once built; triple ids are line order.
class KnowledgeGraph {
 public:
  void add(Triplet t) {
    if (t.head.empty() || t.tail.empty()) throw ParseError("triple with empty head or tail");
    if (t.weight < 0) throw ParseError("triple with negative weight");
    int id = int(triples_.size());
    head_index_[t.head].push_back(id);
    tail_index_[t.tail].push_back(id);
    degrees_[t.head].out += 1;
    degrees_[t.tail].in += 1;
    relations_.insert(t.relation);
    triples_.push_back(std::move(t));
  }

  const std::vector<Triplet>& triples() const { return triples_; }
  size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }

  Degree degree(const std::string& node) const {
    auto it = degrees_.find(node);
    return it == degrees_.end() ? Degree{} : it->second;
  }

  const std::set<std::string>& relation_inventory() const { return relations_; }

  std::vector<std::string> concepts() const {
    std::vector<std::string> out;
    out.reserve(degrees_.size());
    for (const auto& [c, d] : degrees_) out.push_back(c);
    return out;
  }

  size_t duplicate_count() const { return duplicates_; }
  void note_duplicate() { ++duplicates_; }

  const std::vector<int>* head_ids(const std::string& c) const {
    auto it = head_index_.find(c);
    return it == head_index_.end() ? nullptr : &it->second;
  }
  const std::vector<int>* tail_ids(const std::string& c) const {
    auto it = tail_index_.find(c);
    return it == tail_index_.end() ? nullptr : &it->second;
  }

 private:
  std::vector<Triplet> triples_;
  std::unordered_map<std::string, std::vector<int>> head_index_;
  std::unordered_map<std::string, std::vector<int>> tail_index_;
  std::map<std::string, Degree> degrees_;
  std::set<std::string> relations_;
  size_t duplicates_ = 0;
};

// One triple per line: head TAB relation TAB tail TAB weight. '#' comments
// skipped. Duplicate identical triples keep the first and are counted.
inline KnowledgeGraph ingest_triples(std::istream& in, const std::string& source = "<stream>") {
  KnowledgeGraph g;
  std::set<std::tuple<std::string, std::string, std::string, double>> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() != 4)
      throw ParseError(source + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields, got " +
                       std::to_string(fields.size()));
    double w;
    try {
      size_t pos = 0;
      w = std::stod(fields[3], &pos);
      if (pos != fields[3].size()) throw std::invalid_argument("suffix");
    } catch (const std::exception&) {
      throw ParseError(source + ":" + std::to_string(lineno) + ": bad weight '" + fields[3] + "'");
    }
    if (w < 0)
      throw ParseError(source + ":" + std::to_string(lineno) + ": negative weight");
    if (fields[0].empty() || fields[2].empty())
      throw ParseError(source + ":" + std::to_string(lineno) + ": empty head or tail");
    auto key = std::make_tuple(fields[0], fields[1], fields[2], w);
    if (!seen.insert(key).second) {
      g.note_duplicate();
      continue;
    }
    g.add(Triplet{fields[0], fields[1], fields[2], w});
  }
  return g;
}

inline KnowledgeGraph ingest_triples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open triple file: " + path);
  return ingest_triples(in, path);
}

// Union of triples where the entity is head or tail, deduplicated, in triple-id
// order (self-loops appear once).
inline std::vector<Triplet> one_hop_subgraph(const KnowledgeGraph& g, const std::string& entity) {
  std::vector<int> ids;
  if (const auto* h = g.head_ids(entity)) ids.insert(ids.end(), h->begin(), h->end());
  if (const auto* t = g.tail_ids(entity)) ids.insert(ids.end(), t->begin(), t->end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<Triplet> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(g.triples()[id]);
  return out;
}

struct WeightedConcept {
  std::string name;
  double weight = 0.0;
};

struct SubgraphPair {
  std::string entity;
  std::vector<WeightedConcept> explanatory;
  std::vector<WeightedConcept> relevant;
};

struct DivideStats {
  size_t unknown_relations = 0;
  size_t ignored = 0;
};

namespace detail {
// Descending weight, ties by original position; dedup keeps the first survivor.
inline std::vector<WeightedConcept> top_k(std::vector<std::pair<WeightedConcept, int>>& items, int k) {
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.first.weight > b.first.weight; });
  std::vector<WeightedConcept> out;
  std::set<std::string> taken;
  for (auto& [wc, pos] : items) {
    if (int(out.size()) >= k) break;
    if (!taken.insert(wc.name).second) continue;
    out.push_back(wc);
  }
  return out;
}
}  // namespace detail

// Route each triple's non-entity endpoint by its relation category, then keep
// the top-k per list by weight. non_division feeds every concept to both lists.
inline SubgraphPair divide(const std::vector<Triplet>& subgraph, const RelationTaxonomy& taxonomy,
                           const std::string& entity, int k, DivideStats* stats = nullptr,
                           bool non_division = false) {
  if (k < 0) throw ConfigError("divide: k must be >= 0");
  std::vector<std::pair<WeightedConcept, int>> expl, rel;
  int pos = 0;
  for (const auto& t : subgraph) {
    std::string endpoint = t.head == entity ? t.tail : t.head;
    RelationCategory cat = non_division ? RelationCategory::Explanatory : taxonomy.category(t.relation);
    if (stats && !taxonomy.known(t.relation)) ++stats->unknown_relations;
    if (non_division) {
      expl.push_back({{endpoint, t.weight}, pos});
      rel.push_back({{endpoint, t.weight}, pos});
    } else if (cat == RelationCategory::Explanatory) {
      expl.push_back({{endpoint, t.weight}, pos});
    } else if (cat == RelationCategory::Relevant) {
      rel.push_back({{endpoint, t.weight}, pos});
    } else if (stats) {
      ++stats->ignored;
    }
    ++pos;
  }
  SubgraphPair out;
  out.entity = entity;
  out.explanatory = detail::top_k(expl, k);
  out.relevant = detail::top_k(rel, k);
  return out;
}

struct EntityMention {
  std::string surface;
  int first_token_index = -1;
};

inline const std::set<std::string>& sentence_stopwords() {
  static const std::set<std::string> words = {
      "the", "a",  "an", "in", "on",  "at",  "of",  "to",  "and", "but", "or",   "for",
      "as",  "by", "it", "he", "she", "they", "we", "his", "her", "its", "this", "that"};
  return words;
}

namespace detail {
inline std::string lower(std::string s) {
  for (auto& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}
inline bool capitalized(const std::string& tok) {
  return !tok.empty() && std::isupper(static_cast<unsigned char>(tok[0]));
}
inline bool sentence_end(const std::string& tok) {
  return tok == "." || tok == "!" || tok == "?";
}
}  // namespace detail

// Maximal runs of capitalized tokens; a sentence-initial stopword never starts
// or extends a run.
inline std::vector<EntityMention> fallback_tag(const std::vector<std::string>& tokens) {
  std::vector<EntityMention> out;
  size_t i = 0;
  bool sentence_start = true;
  while (i < tokens.size()) {
    const std::string& tok = tokens[i];
    bool usable = detail::capitalized(tok) &&
                  !(sentence_start && sentence_stopwords().count(detail::lower(tok)));
    if (usable) {
      size_t j = i;
      std::string surface = tok;
      while (j + 1 < tokens.size() && detail::capitalized(tokens[j + 1])) {
        ++j;
        surface += " " + tokens[j];
      }
      out.push_back({surface, int(i)});
      sentence_start = false;
      i = j + 1;
      continue;
    }
    sentence_start = detail::sentence_end(tok);
    ++i;
  }
  return out;
}

// First k distinct entities in order of first appearance. Annotated spans win;
// the naive tagger runs only when annotations are absent and fallback is on.
inline std::vector<std::string> select_entities(const std::vector<std::string>& tokens,
                                                const std::optional<std::vector<EntityMention>>& annotations,
                                                int k, bool fallback) {
  std::vector<EntityMention> mentions;
  if (annotations.has_value()) {
    mentions = *annotations;
  } else if (fallback) {
    mentions = fallback_tag(tokens);
  } else {
    throw DataError("select_entities: no entity annotations and fallback tagger disabled");
  }
  std::stable_sort(mentions.begin(), mentions.end(),
                   [](const EntityMention& a, const EntityMention& b) {
                     return a.first_token_index < b.first_token_index;
                   });
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& m : mentions) {
    if (int(out.size()) >= k) break;
    if (seen.insert(m.surface).second) out.push_back(m.surface);
  }
  return out;
}

}  // namespace newscap::kg
