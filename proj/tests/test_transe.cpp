#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "newscap/synthetic.hpp"
#include "newscap/transe.hpp"

using namespace newscap;
using namespace newscap::kg;
using Catch::Approx;

TEST_CASE("transe_score: exact cases") {
  Vec h{1, 0}, r{0, 1}, t{0, 0};
  CHECK(transe_score(h, r, t) == Approx(-1.4142135623730951));

  Vec z2{0, 0};
  CHECK(transe_score(z2, z2, z2) == 0.0);

  Vec a{0.5, -0.25}, b{0.25, 0.5};
  Vec sum{0.75, 0.25};
  CHECK(transe_score(a, b, sum) == Approx(0.0).margin(1e-12));  // h + r = t exactly

  Vec d3{1, 2, 3};
  CHECK_THROWS_AS(transe_score(h, r, d3), DimensionError);
}

TEST_CASE("train_transe: planted 20-triple graph separates positives") {
  auto g = synth::planted_transe_graph(20, 7);
  TranseConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 200;
  cfg.seed = 3;
  auto res = train_transe(g, cfg);

  // brute-force comparison over all positives vs their corrupted counterparts
  Rng rng(99);
  auto entities = g.concepts();
  int wins = 0, total = 0;
  for (const auto& pos : g.triples()) {
    for (int rep = 0; rep < 5; ++rep) {
      Triplet neg = pos;
      if (rng.bernoulli(0.5))
        neg.head = entities[rng.index(entities.size())];
      else
        neg.tail = entities[rng.index(entities.size())];
      if (neg.head == pos.head && neg.tail == pos.tail) continue;
      ++total;
      wins += res.table.score(pos) > res.table.score(neg);
    }
  }
  CHECK(double(wins) / double(total) >= 0.9);
}

TEST_CASE("train_transe: single triple satisfies the margin") {
  KnowledgeGraph g;
  g.add({"A", "r", "B", 1.0});
  TranseConfig cfg;
  cfg.dim = 8;
  cfg.margin = 1.0;
  cfg.epochs = 300;
  cfg.seed = 5;
  auto res = train_transe(g, cfg);
  Triplet pos{"A", "r", "B", 1.0};
  Triplet neg{"B", "r", "B", 1.0};  // the only possible head corruption
  CHECK(res.table.score(pos) - res.table.score(neg) >= 0.0);
}

TEST_CASE("train_transe: epochs=0 returns the seeded initialization, deterministic") {
  auto g = synth::planted_transe_graph(10, 1);
  TranseConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 0;
  cfg.seed = 42;
  auto a = train_transe(g, cfg);
  auto b = train_transe(g, cfg);
  CHECK(a.loss_trace.size() == 1);
  for (const auto& [name, id] : a.table.entity_ids()) {
    const Vec* va = a.table.entity(name);
    const Vec* vb = b.table.entity(name);
    REQUIRE(va);
    REQUIRE(vb);
    CHECK(*va == *vb);
  }
}

TEST_CASE("train_transe: empty graph errors, loss trace non-increasing") {
  KnowledgeGraph empty;
  TranseConfig cfg;
  CHECK_THROWS_AS(train_transe(empty, cfg), DataError);

  auto g = synth::planted_transe_graph(40, 11);
  cfg.dim = 12;
  cfg.epochs = 120;
  cfg.seed = 9;
  auto res = train_transe(g, cfg);
  for (size_t i = 1; i < res.loss_trace.size(); ++i)
    CHECK(res.loss_trace[i] <= res.loss_trace[i - 1] + 1e-12);
}

TEST_CASE("prune: threshold extremes and hand-planted scores") {
  // table with hand-set vectors giving scores -0.1, -1.0, -2.0
  TranseTable table(2);
  table.add_entity("h") = {0.0, 0.0};
  table.add_entity("t") = {0.0, 0.0};
  table.add_relation("r1") = {0.1, 0.0};
  table.add_relation("r2") = {1.0, 0.0};
  table.add_relation("r3") = {2.0, 0.0};
  std::vector<Triplet> sub = {{"h", "r1", "t", 1}, {"h", "r2", "t", 1}, {"h", "r3", "t", 1}};

  double inf = std::numeric_limits<double>::infinity();
  CHECK(prune(sub, table, -inf).size() == 3);  // identity
  CHECK(prune(sub, table, inf).empty());

  auto kept = prune(sub, table, -0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].relation == "r1");

  // missing symbols score -inf and are pruned at any finite threshold
  std::vector<Triplet> ghost = {{"nope", "r1", "t", 1}};
  CHECK(prune(ghost, table, -1e18).empty());
  CHECK(prune(ghost, table, -inf).size() == 1);
}

TEST_CASE("prune monotonicity on trained tables") {
  auto g = synth::planted_transe_graph(60, 2);
  TranseConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 50;
  cfg.seed = 17;
  auto res = train_transe(g, cfg);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    double t1 = rng.uniform(-3.0, 0.0);
    double t2 = t1 + rng.uniform(0.0, 2.0);
    auto k1 = prune(g.triples(), res.table, t1);
    auto k2 = prune(g.triples(), res.table, t2);
    CHECK(k2.size() <= k1.size());
    size_t j = 0;
    for (const auto& t : k2) {
      while (j < k1.size() && !(k1[j] == t)) ++j;
      REQUIRE(j < k1.size());  // k2 is a subsequence of k1
      ++j;
    }
  }
}

TEST_CASE("choose_prune_threshold separates planted positives from negatives") {
  auto g = synth::planted_transe_graph(100, 4);
  TranseConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 150;
  cfg.seed = 23;
  auto res = train_transe(g, cfg);
  double thr = choose_prune_threshold(g, res.table, 77);
  CHECK(std::isfinite(thr));
  // most positives survive the chosen threshold
  auto kept = prune(g.triples(), res.table, thr);
  CHECK(double(kept.size()) / double(g.size()) > 0.6);
}

TEST_CASE("transe table save/load round-trip") {
  auto g = synth::planted_transe_graph(15, 3);
  TranseConfig cfg;
  cfg.dim = 6;
  cfg.epochs = 10;
  auto res = train_transe(g, cfg);
  res.table.set_threshold(-0.25);
  res.table.save("/tmp/newscap_transe_test.tsv");
  auto loaded = TranseTable::load("/tmp/newscap_transe_test.tsv");
  CHECK(loaded.dim() == 6);
  CHECK(loaded.threshold() == Approx(-0.25));
  for (const auto& t : g.triples())
    CHECK(loaded.score(t) == Approx(res.table.score(t)).margin(1e-12));
}
