#pragma once

#include <string>
#include <vector>

#include "newscap/features.hpp"
#include "newscap/filter.hpp"
#include "newscap/ops.hpp"

namespace newscap {

// Stacked (concept, entity) pairs from the relevant sub-graphs: entity-major,
// concepts in descending weight, each pair a 2d-vector.
template <typename S>
struct ConceptEntitySequenceT {
  typename nn::TapeT<S>::Ref pairs;    // [P, 2d]
  std::vector<std::string> surfaces;   // concept surface per pair

  int pair_count() const { return int(surfaces.size()); }
  bool empty() const { return surfaces.empty(); }
};

template <typename S>
ConceptEntitySequenceT<S> build_concept_entity_sequence(nn::TapeT<S>& tape,
                                                        typename nn::TapeT<S>::Ref embed_table,
                                                        const Vocabulary& vocab,
                                                        const std::vector<EntityKnowledge>& entities) {
  ConceptEntitySequenceT<S> seq;
  std::vector<typename nn::TapeT<S>::Ref> rows;
  for (const auto& ek : entities) {
    if (ek.relevant.empty()) continue;
    auto efeat = surface_feature(tape, embed_table, vocab, ek.surface);
    for (const auto& c : ek.relevant) {
      auto cfeat = surface_feature(tape, embed_table, vocab, c.name);
      rows.push_back(tape.concat_cols(cfeat, efeat));
      seq.surfaces.push_back(c.name);
    }
  }
  if (!rows.empty()) seq.pairs = tape.concat_rows(rows);
  return seq;
}

template <typename S>
struct EnrichParamsT {
  typename nn::TapeT<S>::Ref pair_proj;  // [2d, d]
  nn::MhaParamsT<S> self;                // Eq.-style self-attention over pairs
};

template <typename S>
struct ConceptAttentionT {
  typename nn::TapeT<S>::Ref repr;     // X^R: [P, d]
  typename nn::TapeT<S>::Ref weights;  // alpha^R: [T, P], row-stochastic
};

// X^R = self-attention over the projected pairs (no positional terms, so the
// map is permutation-equivariant); alpha^R = head-averaged attention weights
// of the decoder context over X^R.
template <typename S>
typename nn::TapeT<S>::Ref refine_pairs(nn::TapeT<S>& tape, const ConceptEntitySequenceT<S>& seq,
                                        const EnrichParamsT<S>& p, int heads) {
  if (seq.empty()) throw DataError("refine_pairs: empty sequence");
  auto projected = tape.matmul(seq.pairs, p.pair_proj);
  return nn::multi_head_attention(tape, projected, projected, p.self, heads).output;
}

template <typename S>
ConceptAttentionT<S> refine_and_attend(nn::TapeT<S>& tape, const ConceptEntitySequenceT<S>& seq,
                                       typename nn::TapeT<S>::Ref context,
                                       const EnrichParamsT<S>& p,
                                       typename nn::TapeT<S>::Ref ptr_wq,
                                       typename nn::TapeT<S>::Ref ptr_wk, int heads) {
  ConceptAttentionT<S> out;
  out.repr = refine_pairs(tape, seq, p, heads);
  out.weights = nn::pointer_attention_weights(tape, context, out.repr, ptr_wq, ptr_wk, heads);
  return out;
}

}  // namespace newscap
