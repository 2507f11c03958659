#pragma once

#include <map>
#include <string>
#include <vector>

#include "newscap/ops.hpp"
#include "newscap/vocab.hpp"

namespace newscap {

struct AblationFlags {
  bool non_commonsense = false;
  bool non_distinguish = false;
  bool non_enrich = false;
  bool non_division = false;  // filter-level: no explanatory/relevant split

  bool entity_pathway() const { return !non_commonsense && !non_distinguish; }
  bool concept_pathway() const { return !non_commonsense && !non_enrich; }
};

template <typename S>
struct DecoderLayerParamsT {
  nn::MhaParamsT<S> self_attn, cross_attn;
  typename nn::TapeT<S>::Ref ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

// L stacked layers; per layer masked self-attention over the step history then
// cross-attention over X_co, each with residual + layer norm. Causal mask
// guarantees step t never depends on inputs after t.
template <typename S>
typename nn::TapeT<S>::Ref decode_sequence(nn::TapeT<S>& tape, typename nn::TapeT<S>::Ref m0,
                                           typename nn::TapeT<S>::Ref x_co,
                                           const std::vector<DecoderLayerParamsT<S>>& layers,
                                           int heads, nn::DropoutSpec drop = {}) {
  auto mask = nn::causal_mask(tape.rows(m0));
  auto m = m0;
  for (const auto& layer : layers) {
    auto self_out = nn::multi_head_attention(tape, m, m, layer.self_attn, heads, &mask, drop);
    auto a = tape.layer_norm_rows(tape.add(m, self_out.output), layer.ln1_gain, layer.ln1_bias);
    auto cross_out = nn::multi_head_attention(tape, a, x_co, layer.cross_attn, heads, nullptr, drop);
    m = tape.layer_norm_rows(tape.add(a, cross_out.output), layer.ln2_gain, layer.ln2_bias);
  }
  return m;
}

// Soft switches x = sigma(W_x [m0; m]), y = sigma(W_y [m0; m]) per step.
template <typename S>
struct SwitchRefsT {
  typename nn::TapeT<S>::Ref x, y;  // each [T, 1]
};

template <typename S>
SwitchRefsT<S> compute_switches(nn::TapeT<S>& tape, typename nn::TapeT<S>::Ref m0,
                                typename nn::TapeT<S>::Ref m, typename nn::TapeT<S>::Ref wx,
                                typename nn::TapeT<S>::Ref wy) {
  auto cat = tape.concat_cols(m0, m);
  return {tape.sigmoid(tape.matmul(cat, wx)), tape.sigmoid(tape.matmul(cat, wy))};
}

struct SwitchGates {
  double x = 0.5, y = 0.5;
};

// Effective convex coefficients over (entity pointer, concept pointer,
// generation). The full model reparameterizes Eq.-18 style mixing as
// (x, y(1-x), (1-x)(1-y)) so the combination is always a distribution; the
// ablations use their own published forms. An empty pathway's coefficient is
// redistributed to the generation term.
struct EffectiveCoeffs {
  double entity = 0.0, concept_ = 0.0, gen = 1.0;

  double sum() const { return entity + concept_ + gen; }
};

inline EffectiveCoeffs effective_coeffs(const SwitchGates& g, const AblationFlags& flags,
                                        bool has_entities, bool has_concepts) {
  EffectiveCoeffs c;
  if (flags.non_commonsense) {
    c = {0.0, 0.0, 1.0};
  } else if (flags.non_distinguish) {
    c = {0.0, g.y, 1.0 - g.y};
  } else if (flags.non_enrich) {
    c = {g.x, 0.0, 1.0 - g.x};
  } else {
    c = {g.x, g.y * (1.0 - g.x), (1.0 - g.x) * (1.0 - g.y)};
  }
  if (!has_entities) {
    c.gen += c.entity;
    c.entity = 0.0;
  }
  if (!has_concepts) {
    c.gen += c.concept_;
    c.concept_ = 0.0;
  }
  return c;
}

// Base vocabulary extended with one symbol per entity / relevant-concept
// surface. Single-token surfaces already in the base vocabulary share the base
// symbol, so copy and generation mass add on the same word.
class ExtendedVocab {
 public:
  explicit ExtendedVocab(const Vocabulary* base) : base_(base) {}

  int add_surface(const std::string& surface) {
    auto toks = split_surface(surface);
    if (toks.size() == 1 && base_->contains(toks[0])) return base_->id(toks[0]);
    auto it = extra_ids_.find(surface);
    if (it != extra_ids_.end()) return it->second;
    int id = base_->size() + int(extra_.size());
    extra_.push_back(surface);
    extra_ids_.emplace(surface, id);
    return id;
  }

  // -1 when the surface is representable neither as a base word nor a symbol.
  int lookup(const std::string& surface) const {
    auto it = extra_ids_.find(surface);
    if (it != extra_ids_.end()) return it->second;
    auto toks = split_surface(surface);
    if (toks.size() == 1 && base_->contains(toks[0])) return base_->id(toks[0]);
    return -1;
  }

  int size() const { return base_->size() + int(extra_.size()); }
  int base_size() const { return base_->size(); }
  bool is_base(int id) const { return id < base_->size(); }

  std::string surface(int id) const {
    if (id < base_->size()) return base_->token(id);
    return extra_.at(size_t(id - base_->size()));
  }

  const Vocabulary& base() const { return *base_; }

 private:
  const Vocabulary* base_;
  std::vector<std::string> extra_;
  std::map<std::string, int> extra_ids_;
};

// p*(w) over the extended vocabulary.
struct MixedDistribution {
  std::vector<double> p;

  double sum() const {
    double s = 0;
    for (double v : p) s += v;
    return s;
  }
  int argmax() const {
    int best = 0;
    for (int i = 1; i < int(p.size()); ++i)
      if (p[i] > p[best]) best = i;
    return best;
  }
};

// Scatter the three distributions onto extended symbols. alpha_e is indexed by
// entity, alpha_r by pair; duplicate surfaces land on the same symbol and sum.
inline MixedDistribution mix_distributions(const std::vector<double>& p_vocab,
                                           const std::vector<double>& alpha_e,
                                           const std::vector<double>& alpha_r,
                                           const EffectiveCoeffs& coeffs,
                                           const std::vector<int>& entity_symbols,
                                           const std::vector<int>& pair_symbols, int extended_size) {
  MixedDistribution out;
  out.p.assign(size_t(extended_size), 0.0);
  for (size_t w = 0; w < p_vocab.size(); ++w) out.p[w] += coeffs.gen * p_vocab[w];
  for (size_t k = 0; k < alpha_e.size(); ++k) out.p[size_t(entity_symbols[k])] += coeffs.entity * alpha_e[k];
  for (size_t j = 0; j < alpha_r.size(); ++j) out.p[size_t(pair_symbols[j])] += coeffs.concept_ * alpha_r[j];
  return out;
}

}  // namespace newscap
