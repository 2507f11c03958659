#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "newscap/ops.hpp"
#include "newscap/record.hpp"
#include "newscap/tape.hpp"
#include "newscap/vocab.hpp"

namespace newscap {

struct FeatureConfig {
  int patches = 49;
  int faces = 4;
  int objects = 64;
  int dim = 64;  // model width; providers emit it directly
};

// Fixed-count feature groups; absent rows are exactly zero.
struct ImageFeatures {
  nn::Tensor patches, faces, objects;
  int patches_present = 0, faces_present = 0, objects_present = 0;
};

namespace detail {
inline nn::Tensor seeded_matrix(int rows, int cols, Rng rng) {
  nn::Tensor t(rows, cols);
  for (auto& v : t.v) v = float(rng.normal(0.0, 0.5));
  return t;
}

inline nn::Tensor padded_group(const nlohmann::json& rows_json, int max_rows, int dim,
                               const char* group, const std::string& record_id, int* present) {
  nn::Tensor t(max_rows, dim);
  int r = 0;
  for (const auto& row : rows_json) {
    if (r >= max_rows)
      throw DimensionError("record " + record_id + ": more " + group + " rows than configured (" +
                           std::to_string(max_rows) + ")");
    if (int(row.size()) != dim)
      throw DimensionError("record " + record_id + ": " + group + " row width " +
                           std::to_string(row.size()) + " != feature dim " + std::to_string(dim));
    for (int j = 0; j < dim; ++j) t.at(r, j) = row[j].get<float>();
    ++r;
  }
  *present = r;
  return t;
}
}  // namespace detail

// Pure function of (record, config): seed mode derives everything from the
// record id (optionally overridden by an explicit seed), file mode reads a
// JSON blob of row-major matrices and zero-pads missing rows.
inline ImageFeatures load_image_features(const DatasetRecord& record, const FeatureConfig& cfg) {
  ImageFeatures f;
  if (record.image.mode == ImageSpec::Mode::Seed) {
    uint64_t seed = record.image.seed ? *record.image.seed : fnv1a(record.id);
    Rng root(seed);
    f.patches = detail::seeded_matrix(cfg.patches, cfg.dim, root.fork(1));
    f.faces = detail::seeded_matrix(cfg.faces, cfg.dim, root.fork(2));
    f.objects = detail::seeded_matrix(cfg.objects, cfg.dim, root.fork(3));
    f.patches_present = cfg.patches;
    f.faces_present = cfg.faces;
    f.objects_present = cfg.objects;
    return f;
  }
  std::ifstream in(record.image.path);
  if (!in) throw ParseError("record " + record.id + ": cannot open feature file " + record.image.path);
  nlohmann::json j;
  in >> j;
  f.patches = detail::padded_group(j.value("patches", nlohmann::json::array()), cfg.patches, cfg.dim,
                                   "patches", record.id, &f.patches_present);
  f.faces = detail::padded_group(j.value("faces", nlohmann::json::array()), cfg.faces, cfg.dim,
                                 "faces", record.id, &f.faces_present);
  f.objects = detail::padded_group(j.value("objects", nlohmann::json::array()), cfg.objects, cfg.dim,
                                   "objects", record.id, &f.objects_present);
  return f;
}

// Token embedding lookup on the tape; OOV tokens hit the <unk> row.
template <typename S>
typename nn::TapeT<S>::Ref embed_tokens(nn::TapeT<S>& tape, typename nn::TapeT<S>::Ref table,
                                        const Vocabulary& vocab,
                                        const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return tape.gather_rows(table, std::move(ids));
}

// Single feature vector for a concept/entity surface string: token embeddings
// mean-pooled, so identical surfaces always yield identical features.
template <typename S>
typename nn::TapeT<S>::Ref surface_feature(nn::TapeT<S>& tape, typename nn::TapeT<S>::Ref table,
                                           const Vocabulary& vocab, const std::string& surface) {
  auto toks = split_surface(surface);
  if (toks.empty()) toks.push_back("<unk>");
  return tape.mean_rows(embed_tokens(tape, table, vocab, toks));
}

}  // namespace newscap
