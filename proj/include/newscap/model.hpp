#pragma once

#include <string>
#include <vector>

#include "newscap/decoder.hpp"
#include "newscap/distinguish.hpp"
#include "newscap/enrich.hpp"
#include "newscap/features.hpp"
#include "newscap/filter.hpp"
#include "newscap/record.hpp"
#include "newscap/vocab.hpp"

namespace newscap {

struct ModelConfig {
  int d_model = 64;
  int heads = 4;
  int layers = 2;
  int patches = 4;
  int faces = 2;
  int objects = 4;
  int top_k_concepts = 5;
  int max_entities = 40;
  int max_article = 512;
  int degree_bucket_max = 16;
  double dropout = 0.1;
  std::string preset = "desk";

  // Desk-scale defaults: trainable in minutes on one core.
  static ModelConfig desk() { return ModelConfig{}; }

  // Published configuration: d=1024, 16 heads, 24 layers, 49/4/64 image rows.
  static ModelConfig paper() {
    ModelConfig c;
    c.d_model = 1024;
    c.heads = 16;
    c.layers = 24;
    c.patches = 49;
    c.faces = 4;
    c.objects = 64;
    c.preset = "paper";
    return c;
  }

  FeatureConfig feature_config() const { return {patches, faces, objects, d_model}; }
};

// One decoding-time symbol: the BOS marker, a vocabulary word, or a copied
// entity/concept surface.
struct GenSymbol {
  enum class Kind { Bos, Word, Entity, Concept };
  Kind kind = Kind::Word;
  std::string text;

  static GenSymbol bos() { return {Kind::Bos, "<bos>"}; }
  static GenSymbol word(std::string w) { return {Kind::Word, std::move(w)}; }
  static GenSymbol entity(std::string s) { return {Kind::Entity, std::move(s)}; }
  static GenSymbol concept_symbol(std::string s) { return {Kind::Concept, std::move(s)}; }
};

template <typename S>
class ModelT {
 public:
  using Tape = nn::TapeT<S>;
  using Ref = typename Tape::Ref;

  ModelConfig cfg;
  Vocabulary vocab;
  nn::ParamStoreT<S> params;

  ModelT(ModelConfig config, Vocabulary v) : cfg(std::move(config)), vocab(std::move(v)) {
    register_params();
  }

  void init_params(uint64_t seed) {
    Rng root(seed);
    for (auto& [name, e] : params.entries) {
      Rng r = root.fork(fnv1a(name));
      bool is_gain = name.find(".gain") != std::string::npos;
      bool is_bias = name.find(".bias") != std::string::npos;
      bool is_table = name == "embed.tokens" || name == "distinguish.degree";
      if (is_gain) {
        e.value.fill(S(1));
      } else if (is_bias) {
        e.value.fill(S(0));
      } else if (is_table) {
        for (auto& x : e.value.v) x = S(r.normal(0.0, 0.02));
      } else {
        double sd = std::sqrt(2.0 / double(e.value.n_rows + e.value.n_cols));
        for (auto& x : e.value.v) x = S(r.normal(0.0, sd));
      }
    }
  }

  struct Forward {
    int steps = 0;
    ExtendedVocab ext{nullptr};
    std::vector<int> entity_symbols;  // per selected entity
    std::vector<int> pair_symbols;    // per concept-entity pair
    std::vector<std::string> entity_surfaces;
    std::vector<std::string> pair_surfaces;
    Ref m0, m;                        // [T, d]
    Ref p_vocab;                      // [T, V]
    Ref alpha_e;                      // [T, K] when the entity pathway is live
    Ref alpha_r;                      // [T, P] when the concept pathway is live
    Ref gate_x, gate_y;               // [T, 1] when their formula needs them
    bool has_entities = false;
    bool has_pairs = false;
  };

  // Full teacher-forcing/prefix forward over `inputs` steps. Ablation flags
  // gate only the mixing pathway: X^E and X^R always participate in X_co, so
  // checkpoints and context vectors are shared across variants.
  Forward forward(Tape& tape, const DatasetRecord& rec, const RecordKnowledge& knowledge,
                  const std::vector<GenSymbol>& inputs, const AblationFlags& flags,
                  bool train_mode = false, Rng* dropout_rng = nullptr) const {
    if (inputs.empty()) throw DataError("forward: empty input sequence");
    const int d = cfg.d_model;
    Ref table = tape.param("embed.tokens");

    // image rows
    ImageFeatures img = load_image_features(rec, cfg.feature_config());
    Ref xi = tape.concat_rows({tape.constant(img.patches.template cast<S>()),
                               tape.constant(img.faces.template cast<S>()),
                               tape.constant(img.objects.template cast<S>())});

    // article rows: token embedding + position
    std::vector<std::string> article = rec.article;
    if (int(article.size()) > cfg.max_article) article.resize(size_t(cfg.max_article));
    if (article.empty()) article.push_back("<pad>");
    Ref xa = tape.add(embed_tokens(tape, table, vocab, article),
                      tape.constant(nn::sinusoidal_table<S>(int(article.size()), d)));

    Forward f;
    f.steps = int(inputs.size());
    f.ext = ExtendedVocab(&vocab);

    // distinguish: refined entity sequences -> X^E
    std::vector<EntityContextSequenceT<S>> seqs;
    Ref degree_table = tape.param("distinguish.degree");
    for (const auto& ek : knowledge.entities) {
      auto seq = build_entity_sequence(tape, table, vocab, ek);
      degree_embed(tape, seq, degree_table, cfg.degree_bucket_max);
      order_and_position(tape, seq);
      seqs.push_back(std::move(seq));
      f.entity_symbols.push_back(f.ext.add_surface(ek.surface));
      f.entity_surfaces.push_back(ek.surface);
    }
    distinguish_scale(tape, seqs);
    f.has_entities = !seqs.empty();
    Ref xe;
    if (f.has_entities) xe = entity_matrix(tape, seqs);

    // enrich: concept-entity pairs -> X^R
    auto ces = build_concept_entity_sequence(tape, table, vocab, knowledge.entities);
    f.has_pairs = !ces.empty();
    for (const auto& s : ces.surfaces) {
      f.pair_symbols.push_back(f.ext.add_surface(s));
      f.pair_surfaces.push_back(s);
    }
    EnrichParamsT<S> ep{tape.param("enrich.pair_proj"),
                        {tape.param("enrich.self.wq"), tape.param("enrich.self.wk"),
                         tape.param("enrich.self.wv"), tape.param("enrich.self.wo")}};
    Ref xr;
    if (f.has_pairs) xr = refine_pairs(tape, ces, ep, cfg.heads);

    // X_co = [X^I; X^A; X^E; X^R]
    std::vector<Ref> co_parts{xi, xa};
    if (f.has_entities) co_parts.push_back(xe);
    if (f.has_pairs) co_parts.push_back(xr);
    Ref xco = tape.concat_rows(co_parts);

    // decoder inputs: symbol embedding + position
    std::vector<Ref> in_rows;
    for (const auto& sym : inputs) in_rows.push_back(symbol_embedding(tape, table, sym));
    f.m0 = tape.add(tape.concat_rows(in_rows), tape.constant(nn::sinusoidal_table<S>(f.steps, d)));

    nn::DropoutSpec drop;
    if (train_mode && cfg.dropout > 0.0) {
      if (!dropout_rng) throw ConfigError("training forward requires a dropout rng");
      drop = {cfg.dropout, dropout_rng};
    }
    std::vector<DecoderLayerParamsT<S>> layers;
    for (int l = 0; l < cfg.layers; ++l) {
      std::string p = "dec." + std::to_string(l) + ".";
      layers.push_back({{tape.param(p + "self.wq"), tape.param(p + "self.wk"),
                         tape.param(p + "self.wv"), tape.param(p + "self.wo")},
                        {tape.param(p + "cross.wq"), tape.param(p + "cross.wk"),
                         tape.param(p + "cross.wv"), tape.param(p + "cross.wo")},
                        tape.param(p + "ln1.gain"), tape.param(p + "ln1.bias"),
                        tape.param(p + "ln2.gain"), tape.param(p + "ln2.bias")});
    }
    f.m = decode_sequence(tape, f.m0, xco, layers, cfg.heads, drop);

    // baseline vocabulary distribution
    f.p_vocab = tape.softmax_rows(tape.matmul(f.m, tape.param("out.w")));

    // switches: built only where the active mixing formula consumes them, so
    // ablations zero the gate gradients structurally
    if (!flags.non_commonsense) {
      Ref cat = tape.concat_cols(f.m0, f.m);
      if (!flags.non_distinguish) f.gate_x = tape.sigmoid(tape.matmul(cat, tape.param("gate.x")));
      if (!flags.non_enrich) f.gate_y = tape.sigmoid(tape.matmul(cat, tape.param("gate.y")));
    }

    // pointer distributions
    if (f.has_entities && flags.entity_pathway())
      f.alpha_e = nn::pointer_attention_weights(tape, f.m, xe, tape.param("ent_ptr.wq"),
                                                tape.param("ent_ptr.wk"), cfg.heads);
    if (f.has_pairs && flags.concept_pathway())
      f.alpha_r = nn::pointer_attention_weights(tape, f.m, xr, tape.param("con_ptr.wq"),
                                                tape.param("con_ptr.wk"), cfg.heads);
    return f;
  }

  // Caption length with trailing <pad> filler stripped; interior pads stay
  // (they are masked out of the loss by target id).
  static size_t effective_caption_length(const DatasetRecord& rec) {
    size_t n = rec.caption.size();
    while (n > 0 && rec.caption[n - 1].kind == CaptionElement::Kind::Word &&
           rec.caption[n - 1].text == "<pad>")
      --n;
    return n;
  }

  // Teacher-forcing inputs: BOS then the gold caption symbols.
  std::vector<GenSymbol> teacher_inputs(const DatasetRecord& rec) const {
    std::vector<GenSymbol> in;
    in.push_back(GenSymbol::bos());
    size_t n = effective_caption_length(rec);
    for (size_t i = 0; i < n; ++i) {
      const auto& e = rec.caption[i];
      in.push_back(e.kind == CaptionElement::Kind::Word ? GenSymbol::word(e.text)
                                                        : GenSymbol::entity(e.text));
    }
    return in;
  }

 private:
  Ref symbol_embedding(Tape& tape, Ref table, const GenSymbol& sym) const {
    switch (sym.kind) {
      case GenSymbol::Kind::Bos:
        return tape.gather_rows(table, {Vocabulary::kBos});
      case GenSymbol::Kind::Word:
        return tape.gather_rows(table, {vocab.id(sym.text)});
      case GenSymbol::Kind::Entity:
      case GenSymbol::Kind::Concept:
        return surface_feature(tape, table, vocab, sym.text);
    }
    throw Error("unreachable symbol kind");
  }

  void register_params() {
    const int d = cfg.d_model;
    if (d % cfg.heads != 0)
      throw ConfigError("d_model " + std::to_string(d) + " not divisible by heads " +
                        std::to_string(cfg.heads));
    params.add("embed.tokens", vocab.size(), d);
    params.add("distinguish.degree", cfg.degree_bucket_max + 1, d);
    for (int l = 0; l < cfg.layers; ++l) {
      std::string p = "dec." + std::to_string(l) + ".";
      for (const char* part : {"self", "cross"})
        for (const char* w : {"wq", "wk", "wv", "wo"})
          params.add(p + part + "." + w, d, d);
      for (const char* ln : {"ln1", "ln2"}) {
        params.add(p + ln + ".gain", 1, d);
        params.add(p + ln + ".bias", 1, d);
      }
    }
    params.add("ent_ptr.wq", d, d);
    params.add("ent_ptr.wk", d, d);
    params.add("con_ptr.wq", d, d);
    params.add("con_ptr.wk", d, d);
    params.add("enrich.pair_proj", 2 * d, d);
    for (const char* w : {"wq", "wk", "wv", "wo"}) params.add(std::string("enrich.self.") + w, d, d);
    params.add("out.w", d, vocab.size());
    params.add("gate.x", 2 * d, 1);
    params.add("gate.y", 2 * d, 1);
  }
};

using Model = ModelT<float>;

}  // namespace newscap
