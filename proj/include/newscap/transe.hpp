#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "newscap/common.hpp"
#include "newscap/kg.hpp"

namespace newscap::kg {

struct TranseConfig {
  int dim = 50;
  double margin = 1.0;
  double lr = 0.01;
  int epochs = 100;
  uint64_t seed = 1;
};

using Vec = std::vector<double>;

// -||h + r - t||_2 ; higher = more plausible, 0 is the maximum.
inline double transe_score(const Vec& h, const Vec& r, const Vec& t) {
  if (h.size() != r.size() || h.size() != t.size())
    throw DimensionError("transe_score: vector dimensions disagree");
  double s = 0;
  for (size_t i = 0; i < h.size(); ++i) {
    double d = h[i] + r[i] - t[i];
    s += d * d;
  }
  return -std::sqrt(s);
}

// Entity/relation embeddings plus the pruning threshold. Entity vectors are
// L2-normalized after every training step.
class TranseTable {
 public:
  TranseTable() = default;
  explicit TranseTable(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  double threshold() const { return threshold_; }
  void set_threshold(double t) { threshold_ = t; }

  const Vec* entity(const std::string& name) const {
    auto it = ent_ids_.find(name);
    return it == ent_ids_.end() ? nullptr : &ent_[it->second];
  }
  const Vec* relation(const std::string& name) const {
    auto it = rel_ids_.find(name);
    return it == rel_ids_.end() ? nullptr : &rel_[it->second];
  }

  Vec& add_entity(const std::string& name) {
    auto [it, fresh] = ent_ids_.emplace(name, int(ent_.size()));
    if (fresh) ent_.emplace_back(dim_, 0.0);
    return ent_[it->second];
  }
  Vec& add_relation(const std::string& name) {
    auto [it, fresh] = rel_ids_.emplace(name, int(rel_.size()));
    if (fresh) rel_.emplace_back(dim_, 0.0);
    return rel_[it->second];
  }

  const std::map<std::string, int>& entity_ids() const { return ent_ids_; }
  const std::map<std::string, int>& relation_ids() const { return rel_ids_; }
  Vec& entity_at(int id) { return ent_[id]; }
  Vec& relation_at(int id) { return rel_[id]; }
  size_t entity_count() const { return ent_.size(); }

  // Missing symbols score -inf so pruning drops them at any finite threshold.
  double score(const Triplet& t) const {
    const Vec* h = entity(t.head);
    const Vec* r = relation(t.relation);
    const Vec* tl = entity(t.tail);
    if (!h || !r || !tl) return -std::numeric_limits<double>::infinity();
    return transe_score(*h, *r, *tl);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write transe table: " + path);
    out << "transe v1\n" << dim_ << "\t" << threshold_ << "\n";
    out.precision(17);
    for (const auto& [name, id] : ent_ids_) {
      out << "e\t" << name << "\t";
      for (int i = 0; i < dim_; ++i) out << (i ? " " : "") << ent_[id][i];
      out << "\n";
    }
    for (const auto& [name, id] : rel_ids_) {
      out << "r\t" << name << "\t";
      for (int i = 0; i < dim_; ++i) out << (i ? " " : "") << rel_[id][i];
      out << "\n";
    }
  }

  static TranseTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open transe table: " + path);
    std::string header;
    std::getline(in, header);
    if (header != "transe v1") throw ParseError(path + ": not a transe table");
    TranseTable t;
    in >> t.dim_ >> t.threshold_;
    in.ignore();
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto tab1 = line.find('\t');
      auto tab2 = line.find('\t', tab1 + 1);
      if (tab1 == std::string::npos || tab2 == std::string::npos)
        throw ParseError(path + ": malformed row");
      std::string kind = line.substr(0, tab1);
      std::string name = line.substr(tab1 + 1, tab2 - tab1 - 1);
      Vec& v = kind == "e" ? t.add_entity(name) : t.add_relation(name);
      std::istringstream vs(line.substr(tab2 + 1));
      for (int i = 0; i < t.dim_; ++i) vs >> v[i];
    }
    return t;
  }

 private:
  int dim_ = 0;
  double threshold_ = -std::numeric_limits<double>::infinity();
  std::map<std::string, int> ent_ids_, rel_ids_;
  std::vector<Vec> ent_, rel_;
};

namespace detail {
inline void l2_normalize(Vec& v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0)
    for (double& x : v) x /= n;
}

inline double hinge_eval(const KnowledgeGraph& g, const TranseTable& t,
                         const std::vector<Triplet>& negs, double margin) {
  double loss = 0;
  for (size_t i = 0; i < g.size(); ++i) {
    double dp = -t.score(g.triples()[i]);
    double dn = -t.score(negs[i]);
    loss += std::max(0.0, margin + dp - dn);
  }
  return loss;
}

inline Triplet corrupt(const Triplet& t, const std::vector<std::string>& entities, Rng& rng) {
  Triplet n = t;
  bool corrupt_head = rng.bernoulli(0.5);
  for (int attempt = 0; attempt < 16; ++attempt) {
    const std::string& e = entities[rng.index(entities.size())];
    if (corrupt_head) {
      if (e == t.head) continue;
      n.head = e;
      return n;
    }
    if (e == t.tail) continue;
    n.tail = e;
    return n;
  }
  return n;  // degenerate tiny graphs may fail to find a distinct entity
}
}  // namespace detail

struct TranseResult {
  TranseTable table;
  std::vector<double> loss_trace;  // initial eval loss + one entry per epoch
};

// Margin-ranking SGD with corrupted negatives. After each epoch the hinge loss
// on a fixed seeded evaluation set is compared against the previous epoch; an
// increase restores the pre-epoch table and halves the learning rate, so the
// trace is non-increasing.
inline TranseResult train_transe(const KnowledgeGraph& graph, const TranseConfig& cfg) {
  if (graph.empty()) throw DataError("train_transe: empty graph");
  Rng root(cfg.seed);
  TranseTable table(cfg.dim);

  Rng init = root.fork(1);
  double bound = 6.0 / std::sqrt(double(cfg.dim));
  for (const auto& name : graph.concepts()) {
    Vec& v = table.add_entity(name);
    for (double& x : v) x = init.uniform(-bound, bound);
    detail::l2_normalize(v);
  }
  for (const auto& rel : graph.relation_inventory()) {
    Vec& v = table.add_relation(rel);
    for (double& x : v) x = init.uniform(-bound, bound);
    detail::l2_normalize(v);
  }

  std::vector<std::string> entities = graph.concepts();
  Rng eval_rng = root.fork(2);
  std::vector<Triplet> eval_negs;
  eval_negs.reserve(graph.size());
  for (const auto& t : graph.triples()) eval_negs.push_back(detail::corrupt(t, entities, eval_rng));

  TranseResult res;
  res.loss_trace.push_back(detail::hinge_eval(graph, table, eval_negs, cfg.margin));
  if (cfg.epochs == 0) {
    res.table = std::move(table);
    return res;
  }

  double lr = cfg.lr;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    TranseTable snapshot = table;
    Rng er = root.fork(100 + uint64_t(epoch));
    for (const auto& pos : graph.triples()) {
      Triplet neg = detail::corrupt(pos, entities, er);
      Vec& h = table.add_entity(pos.head);
      Vec& r = table.add_relation(pos.relation);
      Vec& t = table.add_entity(pos.tail);
      Vec& nh = table.add_entity(neg.head);
      Vec& nt = table.add_entity(neg.tail);
      double dp = -transe_score(h, r, t);
      double dn = -transe_score(nh, r, nt);
      if (cfg.margin + dp - dn <= 0) continue;
      // d||h+r-t|| gradients; guard the 1/d factor for exact matches
      double ip = dp > 1e-12 ? 1.0 / dp : 0.0;
      double in_ = dn > 1e-12 ? 1.0 / dn : 0.0;
      for (int i = 0; i < cfg.dim; ++i) {
        double gp = (h[i] + r[i] - t[i]) * ip;
        double gn = (nh[i] + r[i] - nt[i]) * in_;
        h[i] -= lr * gp;
        t[i] += lr * gp;
        r[i] -= lr * (gp - gn);
        nh[i] += lr * gn;
        nt[i] -= lr * gn;
      }
      detail::l2_normalize(h);
      detail::l2_normalize(t);
      detail::l2_normalize(nh);
      detail::l2_normalize(nt);
    }
    double loss = detail::hinge_eval(graph, table, eval_negs, cfg.margin);
    if (loss > res.loss_trace.back()) {
      table = std::move(snapshot);
      lr *= 0.5;
      res.loss_trace.push_back(res.loss_trace.back());
    } else {
      res.loss_trace.push_back(loss);
    }
    if (lr < 1e-9) break;
  }
  res.table = std::move(table);
  return res;
}

// Keep triples scoring >= threshold; order preserved. -inf keeps everything.
inline std::vector<Triplet> prune(const std::vector<Triplet>& subgraph, const TranseTable& table,
                                  double threshold) {
  std::vector<Triplet> out;
  for (const auto& t : subgraph)
    if (table.score(t) >= threshold) out.push_back(t);
  return out;
}

// Classification threshold maximizing held-out accuracy: 10% of triples
// (seeded sample) against one corrupted negative each.
inline double choose_prune_threshold(const KnowledgeGraph& graph, const TranseTable& table,
                                     uint64_t seed) {
  if (graph.empty()) throw DataError("choose_prune_threshold: empty graph");
  Rng rng(seed);
  size_t held = std::max<size_t>(1, graph.size() / 10);
  std::vector<size_t> ids(graph.size());
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  for (size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng.index(i + 1)]);
  ids.resize(held);

  std::vector<std::string> entities = graph.concepts();
  std::vector<std::pair<double, bool>> scored;  // (score, is_positive)
  for (size_t id : ids) {
    const Triplet& pos = graph.triples()[id];
    Triplet neg = detail::corrupt(pos, entities, rng);
    scored.emplace_back(table.score(pos), true);
    scored.emplace_back(table.score(neg), false);
  }
  std::sort(scored.begin(), scored.end());
  double best_thr = scored.front().first;
  size_t best_correct = 0;
  for (size_t c = 0; c < scored.size(); ++c) {
    double thr = scored[c].first;
    size_t correct = 0;
    for (const auto& [s, positive] : scored) correct += (s >= thr) == positive;
    if (correct > best_correct) {
      best_correct = correct;
      best_thr = thr;
    }
  }
  return best_thr;
}

}  // namespace newscap::kg
