#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "newscap/kg.hpp"
#include "newscap/synthetic.hpp"

using namespace newscap;
using namespace newscap::kg;

TEST_CASE("ingest: empty input") {
  std::istringstream in("");
  auto g = ingest_triples(in);
  CHECK(g.size() == 0);
  CHECK(one_hop_subgraph(g, "anything").empty());
  CHECK(g.degree("anything").total() == 0);
}

TEST_CASE("ingest: degrees forced by definition") {
  std::istringstream in("A\tIsA\tB\t1.0\nC\tRelatedTo\tA\t0.5\n");
  auto g = ingest_triples(in);
  REQUIRE(g.size() == 2);
  CHECK(g.degree("A").total() == 2);
  CHECK(g.degree("B").total() == 1);
  CHECK(g.degree("C").total() == 1);
  CHECK(g.degree("A").out == 1);
  CHECK(g.degree("A").in == 1);
}

TEST_CASE("ingest: malformed line names the line number") {
  std::istringstream in("A\tIsA\n");
  try {
    ingest_triples(in, "bad.tsv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("bad.tsv:1") != std::string::npos);
  }

  std::istringstream in2("A\tIsA\tB\t1.0\nA\tIsA\tB\tnotanumber\n");
  try {
    ingest_triples(in2, "bad2.tsv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("bad2.tsv:2") != std::string::npos);
  }
}

TEST_CASE("ingest: duplicates keep first and are counted, comments skipped") {
  std::istringstream in("# comment\nA\tIsA\tB\t1.0\nA\tIsA\tB\t1.0\nA\tIsA\tB\t2.0\n");
  auto g = ingest_triples(in);
  CHECK(g.size() == 2);  // same weight deduped; different weight is a new triple
  CHECK(g.duplicate_count() == 1);
}

TEST_CASE("one_hop_subgraph: union of head and tail roles") {
  std::istringstream in("A\tIsA\tB\t1.0\nC\tRelatedTo\tA\t0.5\nB\tIsA\tC\t0.2\n");
  auto g = ingest_triples(in);
  auto sub = one_hop_subgraph(g, "A");
  REQUIRE(sub.size() == 2);
  CHECK(sub[0].head == "A");
  CHECK(sub[1].head == "C");
  CHECK(one_hop_subgraph(g, "Z").empty());
}

TEST_CASE("one_hop_subgraph: self-loop appears once") {
  std::istringstream in("A\tIsA\tA\t1.0\n");
  auto g = ingest_triples(in);
  CHECK(one_hop_subgraph(g, "A").size() == 1);
}

TEST_CASE("one_hop equals brute-force scan on random graphs") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    auto g = synth::random_graph(300, 40, 5, seed);
    Rng rng(seed + 100);
    for (int q = 0; q < 10; ++q) {
      std::string entity = "n" + std::to_string(rng.index(40));
      auto fast = one_hop_subgraph(g, entity);
      std::vector<Triplet> brute;
      for (const auto& t : g.triples())
        if (t.head == entity || t.tail == entity) brute.push_back(t);
      REQUIRE(fast.size() == brute.size());
      for (size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == brute[i]);
    }
  }
}

TEST_CASE("taxonomy: defaults, file round-trip, unknown category error") {
  auto t = RelationTaxonomy::defaults();
  CHECK(t.category("IsA") == RelationCategory::Explanatory);
  CHECK(t.category("CreatedBy") == RelationCategory::Relevant);
  CHECK(t.category("RelatedTo") == RelationCategory::Relevant);
  CHECK(t.category("Mystery") == RelationCategory::Ignored);
  CHECK(t.unknown_count() == 1);

  std::string path = "/tmp/newscap_tax_test.txt";
  t.save(path);
  auto t2 = RelationTaxonomy::load(path);
  CHECK(t2.category("IsA") == RelationCategory::Explanatory);
  CHECK(t2.size() == t.size());

  std::ofstream bad("/tmp/newscap_tax_bad.txt");
  bad << "IsA=banana\n";
  bad.close();
  CHECK_THROWS_AS(RelationTaxonomy::load("/tmp/newscap_tax_bad.txt"), ParseError);
}

TEST_CASE("divide: paper routing examples") {
  auto tax = RelationTaxonomy::defaults();
  std::vector<Triplet> sub = {{"BillGates", "IsA", "Businessman", 2.0},
                              {"Microsoft", "CreatedBy", "BillGates", 1.5}};
  auto pair = divide(sub, tax, "BillGates", 5);
  REQUIRE(pair.explanatory.size() == 1);
  CHECK(pair.explanatory[0].name == "Businessman");
  REQUIRE(pair.relevant.size() == 1);
  CHECK(pair.relevant[0].name == "Microsoft");
}

TEST_CASE("divide: top-k truncation by weight with ingestion-order ties") {
  auto tax = RelationTaxonomy::defaults();
  std::vector<Triplet> sub;
  for (int i = 0; i < 7; ++i)
    sub.push_back({"E", "RelatedTo", "c" + std::to_string(i), double(i % 4)});
  auto pair = divide(sub, tax, "E", 5);
  REQUIRE(pair.relevant.size() == 5);
  // weights are 0,1,2,3,0,1,2 -> top5 by weight desc, ties by position:
  // c3(3), c2(2), c6(2), c1(1), c5(1)
  CHECK(pair.relevant[0].name == "c3");
  CHECK(pair.relevant[1].name == "c2");
  CHECK(pair.relevant[2].name == "c6");
  CHECK(pair.relevant[3].name == "c1");
  CHECK(pair.relevant[4].name == "c5");
  for (size_t i = 1; i < pair.relevant.size(); ++i)
    CHECK(pair.relevant[i - 1].weight >= pair.relevant[i].weight);
}

TEST_CASE("divide: unknown relations are ignored and counted") {
  auto tax = RelationTaxonomy::defaults();
  std::vector<Triplet> sub = {{"E", "WeirdRel", "c", 1.0}, {"E", "IsA", "d", 1.0}};
  DivideStats stats;
  auto pair = divide(sub, tax, "E", 5, &stats);
  CHECK(stats.unknown_relations == 1);
  CHECK(stats.ignored == 1);
  CHECK(pair.explanatory.size() == 1);
  CHECK(pair.relevant.empty());
}

TEST_CASE("divide: partition law on random graphs") {
  // pre-truncation cover: explanatory + relevant + ignored == all endpoints
  for (uint64_t seed = 0; seed < 10; ++seed) {
    auto g = synth::random_graph(200, 25, 6, seed);
    RelationTaxonomy tax;
    tax.set("rel0", RelationCategory::Explanatory);
    tax.set("rel1", RelationCategory::Explanatory);
    tax.set("rel2", RelationCategory::Relevant);
    tax.set("rel3", RelationCategory::Relevant);
    tax.set("rel4", RelationCategory::Ignored);
    // rel5 unknown -> ignored
    Rng rng(seed * 7 + 1);
    std::string entity = "n" + std::to_string(rng.index(25));
    auto sub = one_hop_subgraph(g, entity);
    DivideStats stats;
    auto pair = divide(sub, tax, entity, 1 << 20, &stats);  // k large: no truncation
    size_t expl_multi = 0, rel_multi = 0;
    // count pre-dedup routing directly
    size_t e_cnt = 0, r_cnt = 0, i_cnt = 0;
    for (const auto& t : sub) {
      auto c = tax.category(t.relation);
      if (c == RelationCategory::Explanatory) ++e_cnt;
      else if (c == RelationCategory::Relevant) ++r_cnt;
      else ++i_cnt;
    }
    CHECK(e_cnt + r_cnt + i_cnt == sub.size());
    // lists are deduped; sizes bounded by routed counts
    CHECK(pair.explanatory.size() <= e_cnt);
    CHECK(pair.relevant.size() <= r_cnt);
    (void)expl_multi;
    (void)rel_multi;
    // disjointness: no concept in both lists when categories are exclusive
    std::set<std::string> e_set;
    for (const auto& c : pair.explanatory) e_set.insert(c.name);
    size_t dup = 0;
    std::set<std::string> seen_rel;
    for (const auto& c : pair.relevant) {
      CHECK(seen_rel.insert(c.name).second);  // distinct within list
      // a concept may legitimately appear in both lists only if linked by
      // relations of both categories; verify membership implies such a triple
      if (e_set.count(c.name)) {
        bool has_rel_edge = false;
        for (const auto& t : sub) {
          std::string endpoint = t.head == entity ? t.tail : t.head;
          if (endpoint == c.name && tax.category(t.relation) == RelationCategory::Relevant)
            has_rel_edge = true;
        }
        CHECK(has_rel_edge);
        ++dup;
      }
    }
  }
}

TEST_CASE("select_entities: first-k distinct in appearance order") {
  std::vector<std::string> tokens = {"w"};
  std::vector<EntityMention> ms;
  for (int i = 0; i < 45; ++i) ms.push_back({"E" + std::to_string(i), i * 2});
  auto out = select_entities(tokens, ms, 40, false);
  REQUIRE(out.size() == 40);
  CHECK(out[0] == "E0");
  CHECK(out[39] == "E39");

  std::vector<EntityMention> dup = {{"A", 0}, {"B", 3}, {"A", 7}, {"C", 9}};
  auto out2 = select_entities(tokens, dup, 10, false);
  REQUIRE(out2.size() == 3);
  CHECK(out2 == std::vector<std::string>{"A", "B", "C"});

  CHECK(select_entities(tokens, dup, 0, false).empty());
  CHECK_THROWS_AS(select_entities(tokens, std::nullopt, 5, false), DataError);
}

TEST_CASE("fallback tagger: capitalized runs, sentence-initial stopwords excluded") {
  std::vector<std::string> tokens = {"The", "president", "met",  "Bill",  "Gates", ".",
                                     "He",  "praised",   "Anna", "Marlow", "yesterday"};
  auto out = select_entities(tokens, std::nullopt, 10, true);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == "Bill Gates");
  CHECK(out[1] == "Anna Marlow");
}
