#pragma once

#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "newscap/kg.hpp"
#include "newscap/record.hpp"
#include "newscap/transe.hpp"

namespace newscap {

// Filtered knowledge for one selected entity. Node degrees travel with the
// artifact so downstream stages never need the full graph.
struct ConceptInfo {
  std::string name;
  double weight = 0.0;
  int degree = 0;
};

struct EntityKnowledge {
  std::string surface;
  int degree = 0;
  std::vector<ConceptInfo> explanatory;       // descending weight
  std::vector<kg::WeightedConcept> relevant;  // descending weight
};

struct RecordKnowledge {
  std::string record_id;
  std::vector<EntityKnowledge> entities;  // selection order
};

struct FilterConfig {
  int max_entities = 40;  // K: queried entities, order of appearance
  int top_k = 5;          // concepts kept per sub-graph
  bool fallback_tagger = true;
  bool non_division = false;
  // -inf disables pruning (used when no TransE table is supplied)
  double threshold = -std::numeric_limits<double>::infinity();
};

inline RecordKnowledge filter_record(const kg::KnowledgeGraph& graph, const kg::TranseTable* table,
                                     const kg::RelationTaxonomy& taxonomy, const DatasetRecord& record,
                                     const FilterConfig& cfg, kg::DivideStats* stats = nullptr) {
  RecordKnowledge out;
  out.record_id = record.id;
  auto selected = kg::select_entities(record.article, record.entities, cfg.max_entities,
                                      cfg.fallback_tagger);
  for (const auto& surface : selected) {
    auto sub = kg::one_hop_subgraph(graph, surface);
    if (table) sub = kg::prune(sub, *table, cfg.threshold);
    auto pair = kg::divide(sub, taxonomy, surface, cfg.top_k, stats, cfg.non_division);
    EntityKnowledge ek;
    ek.surface = surface;
    ek.degree = graph.degree(surface).total();
    for (const auto& wc : pair.explanatory)
      ek.explanatory.push_back({wc.name, wc.weight, graph.degree(wc.name).total()});
    ek.relevant = pair.relevant;
    out.entities.push_back(std::move(ek));
  }
  return out;
}

inline std::vector<RecordKnowledge> filter_corpus(const kg::KnowledgeGraph& graph,
                                                  const kg::TranseTable* table,
                                                  const kg::RelationTaxonomy& taxonomy,
                                                  const std::vector<DatasetRecord>& records,
                                                  const FilterConfig& cfg,
                                                  kg::DivideStats* stats = nullptr) {
  std::vector<RecordKnowledge> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(filter_record(graph, table, taxonomy, r, cfg, stats));
  return out;
}

inline nlohmann::json knowledge_to_json(const RecordKnowledge& k) {
  nlohmann::json j;
  j["id"] = k.record_id;
  auto ents = nlohmann::json::array();
  for (const auto& e : k.entities) {
    nlohmann::json je;
    je["surface"] = e.surface;
    je["degree"] = e.degree;
    auto ex = nlohmann::json::array();
    for (const auto& c : e.explanatory)
      ex.push_back({{"concept", c.name}, {"weight", c.weight}, {"degree", c.degree}});
    je["explanatory"] = ex;
    auto rel = nlohmann::json::array();
    for (const auto& c : e.relevant) rel.push_back({{"concept", c.name}, {"weight", c.weight}});
    je["relevant"] = rel;
    ents.push_back(std::move(je));
  }
  j["entities"] = ents;
  return j;
}

inline RecordKnowledge knowledge_from_json(const nlohmann::json& j) {
  RecordKnowledge k;
  k.record_id = j.at("id").get<std::string>();
  for (const auto& je : j.at("entities")) {
    EntityKnowledge e;
    e.surface = je.at("surface").get<std::string>();
    e.degree = je.value("degree", 0);
    for (const auto& c : je.value("explanatory", nlohmann::json::array()))
      e.explanatory.push_back({c.at("concept").get<std::string>(), c.at("weight").get<double>(),
                               c.value("degree", 0)});
    for (const auto& c : je.value("relevant", nlohmann::json::array()))
      e.relevant.push_back({c.at("concept").get<std::string>(), c.at("weight").get<double>()});
    k.entities.push_back(std::move(e));
  }
  return k;
}

inline void save_knowledge(const std::vector<RecordKnowledge>& ks, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write knowledge file: " + path);
  for (const auto& k : ks) out << knowledge_to_json(k).dump() << "\n";
}

inline std::vector<RecordKnowledge> load_knowledge(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open knowledge file: " + path);
  std::vector<RecordKnowledge> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(knowledge_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace newscap
