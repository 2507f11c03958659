#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "newscap/common.hpp"
#include "newscap/kg.hpp"

namespace newscap {

// One ground-truth caption element: a plain word token or an entity span
// referencing a surface from the record's entity annotations.
struct CaptionElement {
  enum class Kind { Word, Entity };
  Kind kind = Kind::Word;
  std::string text;  // word token, or entity surface

  static CaptionElement word(std::string w) { return {Kind::Word, std::move(w)}; }
  static CaptionElement entity(std::string surface) { return {Kind::Entity, std::move(surface)}; }
};

struct ImageSpec {
  enum class Mode { Seed, File };
  Mode mode = Mode::Seed;
  std::optional<uint64_t> seed;  // overrides the record-id hash
  std::string path;              // file mode
};

struct DatasetRecord {
  std::string id;
  std::vector<std::string> article;
  std::optional<std::vector<kg::EntityMention>> entities;  // absent -> fallback tagger territory
  std::vector<CaptionElement> caption;
  ImageSpec image;
};

inline nlohmann::json record_to_json(const DatasetRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["article"] = r.article;
  if (r.entities) {
    auto arr = nlohmann::json::array();
    for (const auto& m : *r.entities)
      arr.push_back({{"surface", m.surface}, {"first_token_index", m.first_token_index}});
    j["entities"] = arr;
  }
  auto cap = nlohmann::json::array();
  for (const auto& e : r.caption) {
    if (e.kind == CaptionElement::Kind::Word)
      cap.push_back(e.text);
    else
      cap.push_back({{"entity", e.text}});
  }
  j["caption"] = cap;
  nlohmann::json img;
  img["mode"] = r.image.mode == ImageSpec::Mode::Seed ? "seed" : "file";
  if (r.image.seed) img["seed"] = *r.image.seed;
  if (!r.image.path.empty()) img["path"] = r.image.path;
  j["image"] = img;
  return j;
}

inline DatasetRecord record_from_json(const nlohmann::json& j) {
  DatasetRecord r;
  r.id = j.at("id").get<std::string>();
  r.article = j.at("article").get<std::vector<std::string>>();
  if (j.contains("entities")) {
    std::vector<kg::EntityMention> ms;
    for (const auto& e : j["entities"])
      ms.push_back({e.at("surface").get<std::string>(),
                    e.value("first_token_index", -1)});
    r.entities = std::move(ms);
  }
  for (const auto& e : j.at("caption")) {
    if (e.is_string())
      r.caption.push_back(CaptionElement::word(e.get<std::string>()));
    else if (e.is_object() && e.contains("entity"))
      r.caption.push_back(CaptionElement::entity(e["entity"].get<std::string>()));
    else
      throw ParseError("record " + r.id + ": caption element must be a token or {entity: surface}");
  }
  if (j.contains("image")) {
    const auto& img = j["image"];
    std::string mode = img.value("mode", "seed");
    if (mode == "seed")
      r.image.mode = ImageSpec::Mode::Seed;
    else if (mode == "file")
      r.image.mode = ImageSpec::Mode::File;
    else
      throw ParseError("record " + r.id + ": unknown image mode '" + mode + "'");
    if (img.contains("seed")) r.image.seed = img["seed"].get<uint64_t>();
    if (img.contains("path")) r.image.path = img["path"].get<std::string>();
  }
  return r;
}

inline std::vector<DatasetRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset: " + path);
  std::vector<DatasetRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void save_records(const std::vector<DatasetRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset: " + path);
  for (const auto& r : records) out << record_to_json(r).dump() << "\n";
}

}  // namespace newscap
