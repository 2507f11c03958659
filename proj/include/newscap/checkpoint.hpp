#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "newscap/model.hpp"

namespace newscap {

// Checkpoint directory layout:
//   manifest.txt  one line per tensor: name <TAB> rows,cols <TAB> byte offset
//   params.bin    raw little-endian float32 blob
//   config.txt    model dimensions / preset (key=value)
//   vocab.txt     one token per line, id order
inline void save_params(const nn::ParamStoreT<float>& params, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  std::ofstream blob(fs::path(dir) / "params.bin", std::ios::binary);
  if (!manifest || !blob) throw Error("cannot write checkpoint to " + dir);
  size_t offset = 0;
  for (const auto& [name, e] : params.entries) {
    manifest << name << "\t" << e.value.n_rows << "," << e.value.n_cols << "\t" << offset << "\n";
    blob.write(reinterpret_cast<const char*>(e.value.v.data()),
               std::streamsize(e.value.v.size() * sizeof(float)));
    offset += e.value.v.size() * sizeof(float);
  }
}

inline void load_params(nn::ParamStoreT<float>& params, const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw ParseError("cannot open checkpoint manifest in " + dir);
  std::ifstream blob(fs::path(dir) / "params.bin", std::ios::binary);
  if (!blob) throw ParseError("cannot open checkpoint blob in " + dir);

  struct Row {
    int rows, cols;
    size_t offset;
  };
  std::map<std::string, Row> rows;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, shape;
    size_t offset;
    if (!std::getline(ls, name, '\t') || !std::getline(ls, shape, '\t') || !(ls >> offset))
      throw ParseError(dir + ": malformed manifest line: " + line);
    auto comma = shape.find(',');
    rows[name] = Row{std::stoi(shape.substr(0, comma)), std::stoi(shape.substr(comma + 1)), offset};
  }

  std::vector<std::string> missing;
  for (auto& [name, e] : params.entries) {
    auto it = rows.find(name);
    if (it == rows.end()) {
      missing.push_back(name);
      continue;
    }
    if (it->second.rows != e.value.n_rows || it->second.cols != e.value.n_cols)
      throw DimensionError("checkpoint tensor " + name + " has shape " +
                           std::to_string(it->second.rows) + "x" + std::to_string(it->second.cols) +
                           ", model expects " + std::to_string(e.value.n_rows) + "x" +
                           std::to_string(e.value.n_cols));
    blob.seekg(std::streamoff(it->second.offset));
    blob.read(reinterpret_cast<char*>(e.value.v.data()),
              std::streamsize(e.value.v.size() * sizeof(float)));
    if (!blob) throw ParseError("checkpoint blob truncated while reading " + name);
  }
  if (!missing.empty()) {
    std::string msg = "checkpoint is missing tensors:";
    for (const auto& m : missing) msg += " " + m;
    throw ParseError(msg);
  }
}

inline void save_model_config(const ModelConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model config: " + path);
  out << "d_model=" << cfg.d_model << "\nheads=" << cfg.heads << "\nlayers=" << cfg.layers
      << "\npatches=" << cfg.patches << "\nfaces=" << cfg.faces << "\nobjects=" << cfg.objects
      << "\ntop_k_concepts=" << cfg.top_k_concepts << "\nmax_entities=" << cfg.max_entities
      << "\nmax_article=" << cfg.max_article << "\ndegree_bucket_max=" << cfg.degree_bucket_max
      << "\ndropout=" << cfg.dropout << "\npreset=" << cfg.preset << "\n";
}

inline ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model config: " + path);
  ModelConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path + ": expected key=value, got: " + line);
    std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "d_model") cfg.d_model = std::stoi(v);
    else if (k == "heads") cfg.heads = std::stoi(v);
    else if (k == "layers") cfg.layers = std::stoi(v);
    else if (k == "patches") cfg.patches = std::stoi(v);
    else if (k == "faces") cfg.faces = std::stoi(v);
    else if (k == "objects") cfg.objects = std::stoi(v);
    else if (k == "top_k_concepts") cfg.top_k_concepts = std::stoi(v);
    else if (k == "max_entities") cfg.max_entities = std::stoi(v);
    else if (k == "max_article") cfg.max_article = std::stoi(v);
    else if (k == "degree_bucket_max") cfg.degree_bucket_max = std::stoi(v);
    else if (k == "dropout") cfg.dropout = std::stod(v);
    else if (k == "preset") cfg.preset = v;
    else throw ParseError(path + ": unknown model config key '" + k + "'");
  }
  return cfg;
}

inline void save_model(const Model& model, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_params(model.params, dir);
  save_model_config(model.cfg, (fs::path(dir) / "config.txt").string());
  model.vocab.save((fs::path(dir) / "vocab.txt").string());
}

inline Model load_model(const std::string& dir) {
  namespace fs = std::filesystem;
  ModelConfig cfg = load_model_config((fs::path(dir) / "config.txt").string());
  Vocabulary vocab = Vocabulary::load((fs::path(dir) / "vocab.txt").string());
  Model model(cfg, std::move(vocab));
  load_params(model.params, dir);
  return model;
}

}  // namespace newscap
