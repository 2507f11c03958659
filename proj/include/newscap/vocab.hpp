#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "newscap/common.hpp"
#include "newscap/record.hpp"

namespace newscap {

// Token <-> id map with fixed reserved ids 0..3.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  Vocabulary() {
    for (const char* t : {"<pad>", "<unk>", "<bos>", "<eos>"}) add(t);
  }

  int add(const std::string& token) {
    auto [it, fresh] = ids_.emplace(token, int(tokens_.size()));
    if (fresh) tokens_.push_back(token);
    return it->second;
  }

  // OOV maps to <unk>.
  int id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token) != 0; }

  const std::string& token(int id) const {
    if (id < 0 || id >= int(tokens_.size())) throw DataError("vocab id out of range");
    return tokens_[id];
  }

  int size() const { return int(tokens_.size()); }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write vocabulary: " + path);
    for (const auto& t : tokens_) out << t << "\n";
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open vocabulary: " + path);
    Vocabulary v;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (lineno <= 4) {
        if (line != v.tokens_[lineno - 1])
          throw ParseError(path + ": reserved token row " + std::to_string(lineno) + " corrupted");
        continue;
      }
      v.add(line);
    }
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

inline std::vector<std::string> split_surface(const std::string& surface) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : surface) {
    if (c == ' ') {
      if (!cur.empty()) toks.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) toks.push_back(cur);
  return toks;
}

// First-appearance order over articles, captions, annotated surfaces, then any
// extra surfaces (e.g. retrieved concept strings).
inline Vocabulary build_vocabulary(const std::vector<DatasetRecord>& records,
                                   const std::vector<std::string>& extra_surfaces = {}) {
  Vocabulary v;
  for (const auto& r : records) {
    for (const auto& t : r.article) v.add(t);
    for (const auto& e : r.caption) {
      if (e.kind == CaptionElement::Kind::Word)
        v.add(e.text);
      else
        for (const auto& t : split_surface(e.text)) v.add(t);
    }
    if (r.entities)
      for (const auto& m : *r.entities)
        for (const auto& t : split_surface(m.surface)) v.add(t);
  }
  for (const auto& s : extra_surfaces)
    for (const auto& t : split_surface(s)) v.add(t);
  return v;
}

}  // namespace newscap
