#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "newscap/train.hpp"

namespace newscap {

struct GeneratedSymbol {
  GenSymbol sym;
  double prob = 0.0;
};

struct GenerationOutput {
  std::string id;
  std::vector<GeneratedSymbol> symbols;  // emitted sequence, EOS excluded
  std::vector<SwitchGates> gates_trace;
  std::string caption_text;
  std::vector<std::string> caption_tokens;  // surfaces expanded to tokens
};

enum class DecodeMode { Greedy, Beam };

struct GenerateConfig {
  DecodeMode mode = DecodeMode::Greedy;
  int beam_width = 4;
  int max_len = 20;
  AblationFlags flags;
};

namespace detail {
// Symbol kind by the record's symbol tables: entity wins over concept wins
// over plain word (a copied surface may coincide with a vocabulary word).
inline GenSymbol attribute_symbol(int id, const ExtendedVocab& ext,
                                  const std::vector<int>& entity_symbols,
                                  const std::vector<int>& pair_symbols) {
  std::string surface = ext.surface(id);
  for (int e : entity_symbols)
    if (e == id) return GenSymbol::entity(surface);
  for (int p : pair_symbols)
    if (p == id) return GenSymbol::concept_symbol(surface);
  return GenSymbol::word(surface);
}

inline void expand_symbol(const GenSymbol& s, std::vector<std::string>* tokens) {
  if (s.kind == GenSymbol::Kind::Word) {
    tokens->push_back(s.text);
    return;
  }
  for (const auto& t : split_surface(s.text)) tokens->push_back(t);
}
}  // namespace detail

template <typename S>
StepMix last_step_mix(const ModelT<S>& model, const DatasetRecord& rec,
                      const RecordKnowledge& knowledge, const std::vector<GenSymbol>& prefix,
                      const AblationFlags& flags, typename ModelT<S>::Forward* fwd_out = nullptr) {
  nn::TapeT<S> tape(const_cast<nn::ParamStoreT<S>*>(&model.params));
  auto fwd = model.forward(tape, rec, knowledge, prefix, flags);
  StepMix mix = mix_step(tape, fwd, flags, fwd.steps - 1);
  if (fwd_out) *fwd_out = std::move(fwd);
  return mix;
}

// Autoregressive decoding until EOS or max_len. Greedy is a pure function of
// (checkpoint, record, flags); beam uses length-normalized log-probability.
template <typename S>
GenerationOutput generate(const ModelT<S>& model, const DatasetRecord& rec,
                          const RecordKnowledge& knowledge, const GenerateConfig& cfg) {
  GenerationOutput out;
  out.id = rec.id;

  struct Beam {
    std::vector<GenSymbol> prefix{GenSymbol::bos()};
    std::vector<GeneratedSymbol> symbols;
    std::vector<SwitchGates> gates;
    double logp = 0.0;
    bool finished = false;
    double score(double len_at_least_one) const { return logp / std::max(1.0, len_at_least_one); }
  };

  int width = cfg.mode == DecodeMode::Greedy ? 1 : std::max(1, cfg.beam_width);
  std::vector<Beam> beams{Beam{}};
  for (int step = 0; step < cfg.max_len; ++step) {
    std::vector<Beam> next;
    bool all_finished = true;
    for (const auto& beam : beams) {
      if (beam.finished) {
        next.push_back(beam);
        continue;
      }
      all_finished = false;
      typename ModelT<S>::Forward fwd;
      StepMix mix = last_step_mix(model, rec, knowledge, beam.prefix, cfg.flags, &fwd);

      std::vector<int> candidates;
      if (width == 1) {
        candidates.push_back(mix.dist.argmax());
      } else {
        candidates.resize(mix.dist.p.size());
        for (size_t i = 0; i < candidates.size(); ++i) candidates[size_t(i)] = int(i);
        std::partial_sort(candidates.begin(), candidates.begin() + std::min<size_t>(width, candidates.size()),
                          candidates.end(),
                          [&](int a, int b) { return mix.dist.p[size_t(a)] > mix.dist.p[size_t(b)]; });
        candidates.resize(std::min<size_t>(width, candidates.size()));
      }
      for (int id : candidates) {
        Beam b = beam;
        double p = mix.dist.p[size_t(id)];
        b.logp += std::log(std::max(p, 1e-300));
        b.gates.push_back(mix.gates);
        if (id == Vocabulary::kEos) {
          b.finished = true;
        } else {
          GenSymbol sym = detail::attribute_symbol(id, fwd.ext, fwd.entity_symbols, fwd.pair_symbols);
          b.symbols.push_back({sym, p});
          b.prefix.push_back(sym);
        }
        next.push_back(std::move(b));
      }
    }
    std::stable_sort(next.begin(), next.end(), [](const Beam& a, const Beam& b) {
      return a.score(double(a.symbols.size())) > b.score(double(b.symbols.size()));
    });
    if (int(next.size()) > width) next.resize(size_t(width));
    beams = std::move(next);
    if (all_finished) break;
  }

  const Beam& best = beams.front();
  out.symbols = best.symbols;
  out.gates_trace = best.gates;
  for (const auto& gs : out.symbols) detail::expand_symbol(gs.sym, &out.caption_tokens);
  for (size_t i = 0; i < out.caption_tokens.size(); ++i)
    out.caption_text += (i ? " " : "") + out.caption_tokens[i];
  return out;
}

inline nlohmann::json generation_to_json(const GenerationOutput& g) {
  nlohmann::json j;
  j["id"] = g.id;
  j["caption_text"] = g.caption_text;
  auto syms = nlohmann::json::array();
  for (const auto& s : g.symbols) {
    const char* kind = s.sym.kind == GenSymbol::Kind::Entity    ? "entity"
                       : s.sym.kind == GenSymbol::Kind::Concept ? "concept"
                                                                : "word";
    syms.push_back({{"kind", kind}, {"surface", s.sym.text}, {"prob", s.prob}});
  }
  j["symbols"] = syms;
  auto gates = nlohmann::json::array();
  for (const auto& g2 : g.gates_trace) gates.push_back({g2.x, g2.y});
  j["gates_trace"] = gates;
  return j;
}

inline GenerationOutput generation_from_json(const nlohmann::json& j) {
  GenerationOutput g;
  g.id = j.at("id").get<std::string>();
  g.caption_text = j.value("caption_text", "");
  for (const auto& s : j.value("symbols", nlohmann::json::array())) {
    std::string kind = s.at("kind").get<std::string>();
    std::string surface = s.at("surface").get<std::string>();
    GenSymbol sym = kind == "entity"    ? GenSymbol::entity(surface)
                    : kind == "concept" ? GenSymbol::concept_symbol(surface)
                                        : GenSymbol::word(surface);
    g.symbols.push_back({sym, s.value("prob", 0.0)});
    detail::expand_symbol(sym, &g.caption_tokens);
  }
  for (const auto& p : j.value("gates_trace", nlohmann::json::array()))
    g.gates_trace.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return g;
}

inline void save_generations(const std::vector<GenerationOutput>& gens, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write generations: " + path);
  for (const auto& g : gens) out << generation_to_json(g).dump() << "\n";
}

inline std::vector<GenerationOutput> load_generations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open generations: " + path);
  std::vector<GenerationOutput> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(generation_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace newscap
