#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "newscap/kg.hpp"
#include "newscap/record.hpp"
#include "newscap/vocab.hpp"

namespace newscap::synth {

namespace detail {
inline std::string syllable(Rng& rng) {
  static const char* cons = "bdfgklmnprstvz";
  static const char* vowels = "aeiou";
  std::string s;
  s += cons[rng.index(14)];
  s += vowels[rng.index(5)];
  return s;
}

inline std::string make_token(Rng& rng, int syllables, bool capitalize) {
  std::string s;
  for (int i = 0; i < syllables; ++i) s += syllable(rng);
  if (capitalize) s[0] = char(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

// Fresh token avoiding every token seen so far (keeps test names truly unseen).
inline std::string fresh_token(Rng& rng, std::set<std::string>* used, int syllables,
                               bool capitalize) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::string t = make_token(rng, syllables, capitalize);
    if (used->insert(t).second) return t;
  }
  throw Error("fresh_token: name space exhausted");
}

inline int push_tokens(std::vector<std::string>* article, const std::string& surface) {
  int at = int(article->size());
  for (const auto& t : split_surface(surface)) article->push_back(t);
  return at;
}
}  // namespace detail

struct SyntheticData {
  kg::KnowledgeGraph graph;
  kg::RelationTaxonomy taxonomy;
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> test;
  std::vector<std::string> planted_words;  // per test record (enrich data only)
};

inline void write_triples(const kg::KnowledgeGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write triples: " + path);
  out.precision(17);
  for (const auto& t : g.triples())
    out << t.head << "\t" << t.relation << "\t" << t.tail << "\t" << t.weight << "\n";
}

// Functional planted graph: each (head, relation) pair maps to one tail, grown
// from a few seed nodes, so an exact translation embedding exists.
inline kg::KnowledgeGraph planted_transe_graph(int n_triples, uint64_t seed) {
  Rng rng(seed);
  kg::KnowledgeGraph g;
  int n_seeds = std::max(4, n_triples / 25);
  std::vector<std::string> nodes;
  for (int i = 0; i < n_seeds; ++i) nodes.push_back("c" + std::to_string(i));
  int next_node = n_seeds;
  std::set<std::pair<std::string, std::string>> used;
  const char* rels[3] = {"r0", "r1", "r2"};
  while (int(g.size()) < n_triples) {
    std::string head = nodes[rng.index(nodes.size())];
    std::string rel = rels[rng.index(3)];
    if (!used.insert({head, rel}).second) continue;
    std::string tail = "c" + std::to_string(next_node++);
    nodes.push_back(tail);
    g.add(kg::Triplet{head, rel, tail, 1.0});
  }
  return g;
}

// Random graph for the filter-law property checks.
inline kg::KnowledgeGraph random_graph(int n_triples, int n_concepts, int n_relations,
                                       uint64_t seed) {
  Rng rng(seed);
  kg::KnowledgeGraph g;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  int guard = 0;
  while (int(g.size()) < n_triples && guard++ < n_triples * 50) {
    std::string h = "n" + std::to_string(rng.index(uint64_t(n_concepts)));
    std::string t = "n" + std::to_string(rng.index(uint64_t(n_concepts)));
    if (h == t) continue;
    std::string r = "rel" + std::to_string(rng.index(uint64_t(n_relations)));
    if (!seen.insert({h, r, t}).second) continue;
    g.add(kg::Triplet{h, r, t, rng.uniform(0.0, 3.0)});
  }
  return g;
}

// 32-record memorization corpus: recurring two-token entities with planted
// explanatory roles and relevant organizations/places.
inline SyntheticData make_memorization_data(int n_records, uint64_t seed) {
  Rng rng(seed);
  SyntheticData d;
  d.taxonomy = kg::RelationTaxonomy::defaults();
  std::set<std::string> used;
  const std::vector<std::string> roles = {"painter", "senator", "architect",
                                          "novelist", "chemist", "pianist"};

  struct Ent {
    std::string surface, role, org, place;
  };
  std::vector<Ent> pool;
  for (int i = 0; i < 12; ++i) {
    Ent e;
    e.surface = detail::fresh_token(rng, &used, 2, true) + " " +
                detail::fresh_token(rng, &used, 3, true);
    e.role = roles[rng.index(roles.size())];
    e.org = detail::fresh_token(rng, &used, 3, true);
    e.place = detail::fresh_token(rng, &used, 2, true);
    pool.push_back(e);
    d.graph.add({e.surface, "IsA", e.role, 2.0 + rng.uniform(0.0, 1.0)});
    d.graph.add({e.surface, "IsA", "figure", 0.4});
    d.graph.add({e.org, "CreatedBy", e.surface, 1.5 + rng.uniform(0.0, 1.0)});
    d.graph.add({e.surface, "RelatedTo", e.place, 1.0 + rng.uniform(0.0, 0.5)});
  }

  for (int i = 0; i < n_records; ++i) {
    size_t ia = rng.index(pool.size());
    size_t ib = (ia + 1 + rng.index(pool.size() - 1)) % pool.size();
    const Ent& a = pool[ia];
    const Ent& b = pool[ib];
    DatasetRecord r;
    r.id = "mem" + std::to_string(i);
    std::vector<kg::EntityMention> mentions;
    r.article = {"this", "week", "in"};
    r.article.push_back(a.place);
    r.article.push_back(",");
    mentions.push_back({a.surface, detail::push_tokens(&r.article, a.surface)});
    r.article.push_back("met");
    mentions.push_back({b.surface, detail::push_tokens(&r.article, b.surface)});
    for (const auto& w : {"for", "long", "talks", "."}) r.article.push_back(w);
    r.entities = mentions;
    r.caption = {CaptionElement::entity(a.surface), CaptionElement::word("the"),
                 CaptionElement::word(a.role),      CaptionElement::word("of"),
                 CaptionElement::word(a.org),       CaptionElement::word("met"),
                 CaptionElement::entity(b.surface), CaptionElement::word("in"),
                 CaptionElement::word(b.place),     CaptionElement::word(".")};
    d.train.push_back(r);
  }
  d.test = d.train;
  return d;
}

// Confusable-entity corpus: two fresh entities share every article token
// except a cue word; only the planted explanatory concepts separate them.
// Each entity pair appears in two records with opposite cues, so memorizing
// name-to-caption associations cannot fit the training set: the cue-concept
// interaction is the only consistent signal. Test records use names absent
// from the training stream.
inline SyntheticData make_confusable_data(int n_train, int n_test, uint64_t seed) {
  Rng rng(seed);
  SyntheticData d;
  d.taxonomy = kg::RelationTaxonomy::defaults();
  std::set<std::string> used;
  const std::vector<std::string> family_a = {"statesman", "lawmaker", "diplomat", "envoy"};
  const std::vector<std::string> family_b = {"merchant", "financier", "trader", "broker"};
  const std::string cue_a = "parliament", cue_b = "market";

  auto make_pair = [&](const std::string& id, int idx, std::vector<DatasetRecord>* out) {
    std::string na = detail::fresh_token(rng, &used, 2, true) + " " +
                     detail::fresh_token(rng, &used, 3, true);
    std::string nb = detail::fresh_token(rng, &used, 2, true) + " " +
                     detail::fresh_token(rng, &used, 3, true);
    std::string ca = family_a[rng.index(family_a.size())];
    std::string cb = family_b[rng.index(family_b.size())];
    d.graph.add({na, "IsA", ca, 2.0});
    d.graph.add({na, "IsA", "figure", 0.3});
    d.graph.add({nb, "IsA", cb, 2.0});
    d.graph.add({nb, "IsA", "figure", 0.3});

    for (int variant = 0; variant < 2; ++variant) {
      bool pick_a = variant == 0;
      const std::string& cue = pick_a ? cue_a : cue_b;
      const std::string& gold = pick_a ? na : nb;

      DatasetRecord r;
      r.id = id + std::to_string(idx) + (pick_a ? "a" : "b");
      std::vector<kg::EntityMention> mentions;
      r.article = {"the", cue, "session", "drew"};
      bool a_first = rng.bernoulli(0.5);
      const std::string& first = a_first ? na : nb;
      const std::string& second = a_first ? nb : na;
      mentions.push_back({first, detail::push_tokens(&r.article, first)});
      r.article.push_back("and");
      mentions.push_back({second, detail::push_tokens(&r.article, second)});
      for (const auto& w : {"together", "."}) r.article.push_back(w);
      r.entities = mentions;
      r.caption = {CaptionElement::entity(gold), CaptionElement::word("attended"),
                   CaptionElement::word("the"), CaptionElement::word(cue),
                   CaptionElement::word("gathering"), CaptionElement::word(".")};
      out->push_back(std::move(r));
    }
  };

  for (int i = 0; i < (n_train + 1) / 2; ++i) make_pair("conf-train", i, &d.train);
  for (int i = 0; i < (n_test + 1) / 2; ++i) make_pair("conf-test", i, &d.test);
  d.train.resize(size_t(n_train));
  d.test.resize(size_t(n_test));
  return d;
}

// Enrich corpus: gold captions contain one planted word that never occurs in
// the article and, for test records, never in the training stream either; it
// is reachable only through the entity's relevant sub-graph.
inline SyntheticData make_enrich_data(int n_train, int n_test, uint64_t seed) {
  Rng rng(seed);
  SyntheticData d;
  d.taxonomy = kg::RelationTaxonomy::defaults();
  std::set<std::string> used;

  auto make_record = [&](const std::string& id, int idx, bool is_test) {
    std::string name = detail::fresh_token(rng, &used, 2, true) + " " +
                       detail::fresh_token(rng, &used, 3, true);
    std::string planted = detail::fresh_token(rng, &used, 3, false);
    d.graph.add({planted, "CreatedBy", name, 1.5});
    d.graph.add({name, "IsA", "figure", 0.5});

    DatasetRecord r;
    r.id = id + std::to_string(idx);
    std::vector<kg::EntityMention> mentions;
    r.article = {"reporters", "pressed"};
    mentions.push_back({name, detail::push_tokens(&r.article, name)});
    for (const auto& w : {"on", "future", "plans", "."}) r.article.push_back(w);
    r.entities = mentions;
    r.caption = {CaptionElement::entity(name), CaptionElement::word("the"),
                 CaptionElement::word("founder"), CaptionElement::word("of"),
                 CaptionElement::word(planted), CaptionElement::word(".")};
    if (is_test) d.planted_words.push_back(planted);
    return r;
  };

  for (int i = 0; i < n_train; ++i) d.train.push_back(make_record("enr-train", i, false));
  for (int i = 0; i < n_test; ++i) d.test.push_back(make_record("enr-test", i, true));
  return d;
}

}  // namespace newscap::synth
