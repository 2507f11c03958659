#pragma once

#include <algorithm>
#include <vector>

#include "newscap/features.hpp"
#include "newscap/filter.hpp"
#include "newscap/ops.hpp"

namespace newscap {

// Entity-commonsense sequence through its refinement stages. Row 0 is the
// entity feature, rows 1..N the explanatory concept features.
template <typename S>
struct EntityContextSequenceT {
  using Ref = typename nn::TapeT<S>::Ref;

  std::string surface;
  Ref features;      // [(N+1), d], current refinement stage
  Ref sim_features;  // [N, d] concept rows captured post-degree, pre-position
  struct Meta {
    int degree = 0;
    double weight = 0.0;
    double irrelevance = 1.0;
  };
  int entity_degree = 0;
  std::vector<Meta> meta;  // per concept, aligned with rows 1..N

  int concept_count() const { return int(meta.size()); }
};

template <typename S>
EntityContextSequenceT<S> build_entity_sequence(nn::TapeT<S>& tape,
                                                typename nn::TapeT<S>::Ref embed_table,
                                                const Vocabulary& vocab, const EntityKnowledge& ek) {
  EntityContextSequenceT<S> seq;
  seq.surface = ek.surface;
  seq.entity_degree = ek.degree;
  std::vector<typename nn::TapeT<S>::Ref> rows;
  rows.push_back(surface_feature(tape, embed_table, vocab, ek.surface));
  for (const auto& c : ek.explanatory) {
    rows.push_back(surface_feature(tape, embed_table, vocab, c.name));
    seq.meta.push_back({c.degree, c.weight, 1.0});
  }
  seq.features = tape.concat_rows(rows);
  return seq;
}

// x~ = x + z_deg(n); degrees clamped to the bucket table's last row. The
// entity slot is embedded with its own degree.
template <typename S>
void degree_embed(nn::TapeT<S>& tape, EntityContextSequenceT<S>& seq,
                  typename nn::TapeT<S>::Ref degree_table, int bucket_max) {
  std::vector<int> buckets;
  buckets.push_back(std::min(seq.entity_degree, bucket_max));
  for (const auto& m : seq.meta) buckets.push_back(std::min(m.degree, bucket_max));
  seq.features = tape.add(seq.features, tape.gather_rows(degree_table, std::move(buckets)));
}

// Reorder concepts in descending edge weight (stable), capture the similarity
// features, then add the sinusoidal position encoding; entity stays at row 0
// and receives position 0.
template <typename S>
void order_and_position(nn::TapeT<S>& tape, EntityContextSequenceT<S>& seq) {
  int n = seq.concept_count();
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return seq.meta[a].weight > seq.meta[b].weight; });

  if (n > 0) {
    std::vector<typename nn::TapeT<S>::Ref> rows;
    rows.push_back(tape.slice_rows(seq.features, 0, 1));
    std::vector<typename EntityContextSequenceT<S>::Meta> meta;
    for (int i : order) {
      rows.push_back(tape.slice_rows(seq.features, i + 1, i + 2));
      meta.push_back(seq.meta[i]);
    }
    seq.features = tape.concat_rows(rows);
    seq.meta = std::move(meta);
    seq.sim_features = tape.slice_rows(seq.features, 1, n + 1);
  }
  int d = tape.cols(seq.features);
  seq.features = tape.add(seq.features, tape.constant(nn::sinusoidal_table<S>(n + 1, d)));
}

// Distinguish embedding: s_{n,m} = (cos+1)/2 against every other entity's
// concepts, s_n = sum over all of them, floor eps, then scale rows by 1/s_n.
// K=1 is the identity; entity rows are never scaled.
template <typename S>
void distinguish_scale(nn::TapeT<S>& tape, std::vector<EntityContextSequenceT<S>>& seqs,
                       double eps = 1e-3) {
  using Ref = typename nn::TapeT<S>::Ref;
  if (seqs.size() <= 1) return;
  std::vector<Ref> factors(seqs.size());
  for (size_t k = 0; k < seqs.size(); ++k) {
    int n = seqs[k].concept_count();
    if (n == 0) continue;
    Ref total{};
    bool any = false;
    for (size_t g = 0; g < seqs.size(); ++g) {
      if (g == k || seqs[g].concept_count() == 0) continue;
      Ref cos = nn::cosine_matrix(tape, seqs[k].sim_features, seqs[g].sim_features);
      Ref mapped = tape.scale(tape.add(cos, tape.constant(nn::TensorT<S>(tape.rows(cos), tape.cols(cos), S(1)))),
                              S(0.5));
      Ref row = tape.rowsum(mapped);
      total = any ? tape.add(total, row) : row;
      any = true;
    }
    if (!any) continue;  // no other entity contributes concepts
    factors[k] = tape.reciprocal(tape.clamp_min(total, S(eps)));
  }
  for (size_t k = 0; k < seqs.size(); ++k) {
    if (!factors[k].valid()) continue;
    int n = seqs[k].concept_count();
    Ref ones_entity = tape.constant(nn::TensorT<S>(1, 1, S(1)));
    Ref scalevec = tape.concat_rows({ones_entity, factors[k]});
    seqs[k].features = tape.mul_colvec(seqs[k].features, scalevec);
    const auto& f = tape.val(factors[k]);
    for (int i = 0; i < n; ++i) seqs[k].meta[i].irrelevance = double(f.at(i, 0));
  }
}

template <typename S>
struct EntityAttentionT {
  typename nn::TapeT<S>::Ref entity_matrix;  // X^E: [K, d]
  typename nn::TapeT<S>::Ref weights;        // alpha^E: [T, K], row-stochastic
};

// x_hat_k = mean over the N+1 refined vectors; alpha^E = head-averaged
// attention weights of the decoder context over X^E.
template <typename S>
typename nn::TapeT<S>::Ref entity_matrix(nn::TapeT<S>& tape,
                                         const std::vector<EntityContextSequenceT<S>>& seqs) {
  if (seqs.empty()) throw DataError("entity_matrix: no entities");
  std::vector<typename nn::TapeT<S>::Ref> rows;
  for (const auto& s : seqs) rows.push_back(tape.mean_rows(s.features));
  return tape.concat_rows(rows);
}

template <typename S>
EntityAttentionT<S> entity_matrix_and_attention(nn::TapeT<S>& tape,
                                                const std::vector<EntityContextSequenceT<S>>& seqs,
                                                typename nn::TapeT<S>::Ref context,
                                                typename nn::TapeT<S>::Ref wq,
                                                typename nn::TapeT<S>::Ref wk, int heads) {
  EntityAttentionT<S> out;
  out.entity_matrix = entity_matrix(tape, seqs);
  out.weights = nn::pointer_attention_weights(tape, context, out.entity_matrix, wq, wk, heads);
  return out;
}

}  // namespace newscap
