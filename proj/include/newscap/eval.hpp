#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "newscap/generate.hpp"
#include "newscap/record.hpp"
#include "newscap/vocab.hpp"

namespace newscap::eval {

namespace detail {
inline std::string lower(std::string s) {
  for (auto& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

using NgramCounts = std::map<std::vector<std::string>, int>;

inline NgramCounts ngrams(const std::vector<std::string>& toks, int n) {
  NgramCounts out;
  for (int i = 0; i + n <= int(toks.size()); ++i)
    out[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)] += 1;
  return out;
}

struct ClipStats {
  long matched = 0;
  long total = 0;
};

inline ClipStats clipped(const std::vector<std::string>& cand,
                         const std::vector<std::vector<std::string>>& refs, int n) {
  ClipStats st;
  NgramCounts cn = ngrams(cand, n);
  NgramCounts max_ref;
  for (const auto& r : refs)
    for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
  for (const auto& [g, c] : cn) {
    st.total += c;
    auto it = max_ref.find(g);
    if (it != max_ref.end()) st.matched += std::min(c, it->second);
  }
  return st;
}

// closest reference length; ties broken toward the shorter reference
inline long closest_ref_len(size_t cand_len, const std::vector<std::vector<std::string>>& refs) {
  long best = long(refs.front().size());
  for (const auto& r : refs) {
    long len = long(r.size());
    long d = std::labs(len - long(cand_len));
    long bd = std::labs(best - long(cand_len));
    if (d < bd || (d == bd && len < best)) best = len;
  }
  return best;
}

inline double bleu_from_stats(const std::vector<ClipStats>& per_n, long cand_len, long ref_len) {
  if (cand_len == 0) return 0.0;
  double log_prec = 0.0;
  for (const auto& st : per_n) {
    if (st.total == 0 || st.matched == 0) return 0.0;
    log_prec += std::log(double(st.matched) / double(st.total));
  }
  log_prec /= double(per_n.size());
  double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - double(ref_len) / double(cand_len));
  return bp * std::exp(log_prec);
}
}  // namespace detail

// BLEU@N: geometric mean of clipped n-gram precisions 1..N with brevity
// penalty; no smoothing, so any empty precision gives 0.
inline double bleu(const std::vector<std::string>& candidate,
                   const std::vector<std::vector<std::string>>& references, int n_max) {
  if (n_max < 1) throw ConfigError("bleu: N must be >= 1");
  if (references.empty()) throw DataError("bleu: need at least one reference");
  if (candidate.empty()) return 0.0;
  std::vector<detail::ClipStats> per_n;
  for (int n = 1; n <= n_max; ++n) per_n.push_back(detail::clipped(candidate, references, n));
  return detail::bleu_from_stats(per_n, long(candidate.size()),
                                 detail::closest_ref_len(candidate.size(), references));
}

// Corpus-level BLEU: counts aggregated over pairs before the geometric mean.
inline double corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                          const std::vector<std::vector<std::vector<std::string>>>& references,
                          int n_max) {
  if (candidates.size() != references.size()) throw DataError("corpus_bleu: size mismatch");
  std::vector<detail::ClipStats> per_n(static_cast<size_t>(n_max));
  long cand_len = 0, ref_len = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].empty()) continue;
    for (int n = 1; n <= n_max; ++n) {
      auto st = detail::clipped(candidates[i], references[i], n);
      per_n[size_t(n - 1)].matched += st.matched;
      per_n[size_t(n - 1)].total += st.total;
    }
    cand_len += long(candidates[i].size());
    ref_len += detail::closest_ref_len(candidates[i].size(), references[i]);
  }
  return detail::bleu_from_stats(per_n, cand_len, ref_len);
}

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  bool empty_gold = false;
};

using Multiset = std::map<std::string, int>;

inline Multiset to_multiset(const std::vector<std::string>& surfaces) {
  Multiset m;
  for (const auto& s : surfaces) m[detail::lower(s)] += 1;
  return m;
}

// Multiset-intersection precision/recall/F1 over case-normalized surfaces.
inline Prf entity_prf(const std::vector<std::string>& predicted,
                      const std::vector<std::string>& gold) {
  Multiset p = to_multiset(predicted), g = to_multiset(gold);
  long inter = 0, np = 0, ng = 0;
  for (const auto& [s, c] : p) {
    np += c;
    auto it = g.find(s);
    if (it != g.end()) inter += std::min(c, it->second);
  }
  for (const auto& [s, c] : g) ng += c;
  Prf out;
  out.empty_gold = ng == 0;
  out.precision = np > 0 ? double(inter) / double(np) : 0.0;
  out.recall = ng > 0 ? double(inter) / double(ng) : 0.0;
  out.f1 = out.precision + out.recall > 0
               ? 2 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

// A surface is "rare" when at least one of its tokens is outside the training
// vocabulary (so the generator could not have produced it word by word).
inline bool is_rare(const std::string& surface, const Vocabulary& train_vocab) {
  for (const auto& t : split_surface(surface))
    if (!train_vocab.contains(t)) return true;
  return false;
}

inline Prf rare_noun_prf(const std::vector<std::string>& predicted,
                         const std::vector<std::string>& gold, const Vocabulary& train_vocab) {
  std::vector<std::string> p, g;
  for (const auto& s : predicted)
    if (is_rare(s, train_vocab)) p.push_back(s);
  for (const auto& s : gold)
    if (is_rare(s, train_vocab)) g.push_back(s);
  if (g.empty()) {
    Prf out;
    out.empty_gold = true;
    return out;  // (0,0,0), flagged
  }
  return entity_prf(p, g);
}

// Micro-averaged: (caption tokens found in the paired article) / (caption tokens).
inline double coverage_ratio(const std::vector<std::vector<std::string>>& captions,
                             const std::vector<std::vector<std::string>>& articles) {
  if (captions.size() != articles.size()) throw DataError("coverage_ratio: size mismatch");
  long hit = 0, total = 0;
  for (size_t i = 0; i < captions.size(); ++i) {
    std::set<std::string> in_article(articles[i].begin(), articles[i].end());
    for (const auto& t : captions[i]) {
      ++total;
      if (in_article.count(t)) ++hit;
    }
  }
  return total > 0 ? double(hit) / double(total) : 0.0;
}

// v~ = (v - min) / min; undefined (error) when the minimum is not positive.
inline std::vector<double> normalize_scores(const std::vector<double>& values) {
  if (values.empty()) throw DataError("normalize_scores: need at least one value");
  double mn = *std::min_element(values.begin(), values.end());
  if (mn <= 0) throw DataError("normalize_scores: minimum must be positive, got " + std::to_string(mn));
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back((v - mn) / mn);
  return out;
}

struct RecordScores {
  std::string id;
  double bleu4 = 0.0;
  Prf entity;
};

struct EvalReport {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  Prf entity, rare;
  double coverage = 0.0;
  std::vector<RecordScores> per_record;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["bleu"] = {{"1", bleu1}, {"2", bleu2}, {"3", bleu3}, {"4", bleu4}};
    auto prf = [](const Prf& p) {
      return nlohmann::json{{"precision", p.precision},
                            {"recall", p.recall},
                            {"f1", p.f1},
                            {"empty_gold", p.empty_gold}};
    };
    j["entity"] = prf(entity);
    j["rare_noun"] = prf(rare);
    j["coverage"] = coverage;
    auto rows = nlohmann::json::array();
    for (const auto& r : per_record)
      rows.push_back({{"id", r.id}, {"bleu4", r.bleu4}, {"entity_f1", r.entity.f1}});
    j["per_record"] = rows;
    return j;
  }

  std::string to_table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "metric            value\n";
    os << "bleu@1            " << bleu1 << "\n";
    os << "bleu@2            " << bleu2 << "\n";
    os << "bleu@3            " << bleu3 << "\n";
    os << "bleu@4            " << bleu4 << "\n";
    os << "entity P/R/F1     " << entity.precision << " / " << entity.recall << " / " << entity.f1
       << "\n";
    os << "rare   P/R/F1     " << rare.precision << " / " << rare.recall << " / " << rare.f1
       << (rare.empty_gold ? "  (no rare gold nouns)" : "") << "\n";
    os << "coverage          " << coverage << "\n";
    return os.str();
  }
};

inline std::vector<std::string> gold_caption_tokens(const DatasetRecord& rec) {
  std::vector<std::string> out;
  for (const auto& e : rec.caption) {
    if (e.kind == CaptionElement::Kind::Word)
      out.push_back(e.text);
    else
      for (const auto& t : split_surface(e.text)) out.push_back(t);
  }
  return out;
}

inline std::vector<std::string> gold_entities(const DatasetRecord& rec) {
  std::vector<std::string> out;
  for (const auto& e : rec.caption)
    if (e.kind == CaptionElement::Kind::Entity) out.push_back(e.text);
  return out;
}

inline std::vector<std::string> predicted_entities(const GenerationOutput& g) {
  std::vector<std::string> out;
  for (const auto& s : g.symbols)
    if (s.sym.kind == GenSymbol::Kind::Entity) out.push_back(s.sym.text);
  return out;
}

// Generated captions vs gold: corpus BLEU, micro entity / rare-noun PRF over
// the generator's entity annotations, and article coverage of the generations.
inline EvalReport evaluate_generations(const std::vector<GenerationOutput>& gens,
                                       const std::vector<DatasetRecord>& gold,
                                       const Vocabulary* train_vocab) {
  if (gens.size() != gold.size()) throw DataError("evaluate_generations: size mismatch");
  EvalReport rep;
  std::vector<std::vector<std::string>> cands, arts;
  std::vector<std::vector<std::vector<std::string>>> refs;
  std::vector<std::string> pred_ents, gold_ents;
  for (size_t i = 0; i < gens.size(); ++i) {
    if (gens[i].id != gold[i].id)
      throw DataError("evaluate_generations: record order mismatch at " + gens[i].id);
    cands.push_back(gens[i].caption_tokens);
    refs.push_back({gold_caption_tokens(gold[i])});
    arts.push_back(gold[i].article);
    auto pe = predicted_entities(gens[i]);
    auto ge = gold_entities(gold[i]);
    RecordScores rs;
    rs.id = gens[i].id;
    rs.bleu4 = bleu(cands.back(), refs.back(), 4);
    rs.entity = entity_prf(pe, ge);
    rep.per_record.push_back(std::move(rs));
    pred_ents.insert(pred_ents.end(), pe.begin(), pe.end());
    gold_ents.insert(gold_ents.end(), ge.begin(), ge.end());
  }
  rep.bleu1 = corpus_bleu(cands, refs, 1);
  rep.bleu2 = corpus_bleu(cands, refs, 2);
  rep.bleu3 = corpus_bleu(cands, refs, 3);
  rep.bleu4 = corpus_bleu(cands, refs, 4);
  rep.entity = entity_prf(pred_ents, gold_ents);
  if (train_vocab) rep.rare = rare_noun_prf(pred_ents, gold_ents, *train_vocab);
  rep.coverage = coverage_ratio(cands, arts);
  return rep;
}

}  // namespace newscap::eval
