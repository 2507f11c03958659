#pragma once

// Shared test scaffolding: synthetic world -> vocab -> filtered knowledge ->
// model, at configurable dimensions.

#include "newscap/filter.hpp"
#include "newscap/model.hpp"
#include "newscap/synthetic.hpp"
#include "newscap/train.hpp"

namespace testworld {

using namespace newscap;

struct World {
  synth::SyntheticData data;
  Vocabulary vocab;
  std::vector<RecordKnowledge> train_knowledge;
  std::vector<RecordKnowledge> test_knowledge;
  ModelConfig mcfg;
};

inline ModelConfig tiny_config(int d = 16, int heads = 2, int layers = 1) {
  ModelConfig c;
  c.d_model = d;
  c.heads = heads;
  c.layers = layers;
  c.patches = 2;
  c.faces = 1;
  c.objects = 2;
  c.max_article = 64;
  c.dropout = 0.0;
  return c;
}

inline World make_world(synth::SyntheticData data, ModelConfig mcfg) {
  World w;
  w.data = std::move(data);
  w.mcfg = mcfg;
  w.vocab = build_vocabulary(w.data.train, w.data.graph.concepts());
  FilterConfig fc;
  fc.max_entities = mcfg.max_entities;
  fc.top_k = mcfg.top_k_concepts;
  w.train_knowledge = filter_corpus(w.data.graph, nullptr, w.data.taxonomy, w.data.train, fc);
  w.test_knowledge = filter_corpus(w.data.graph, nullptr, w.data.taxonomy, w.data.test, fc);
  return w;
}

template <typename S>
ModelT<S> make_model(const World& w, uint64_t seed) {
  ModelT<S> model(w.mcfg, w.vocab);
  model.init_params(seed);
  return model;
}

inline double param_grad_norm(const nn::ParamStore& params, const std::string& name) {
  const auto& g = params.entries.at(name).grad;
  double s = 0;
  for (float x : g.v) s += double(x) * double(x);
  return std::sqrt(s);
}

}  // namespace testworld
