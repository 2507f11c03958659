#include <catch2/catch_amalgamated.hpp>

#include "newscap/decoder.hpp"
#include "oracle.hpp"

using namespace newscap;
using Catch::Approx;

namespace {

struct Fixture {
  nn::ParamStoreT<double> store;
  int d = 4;

  Fixture() {
    Rng rng(21);
    for (const char* part : {"self", "cross"})
      for (const char* w : {"wq", "wk", "wv", "wo"}) {
        auto& t = store.add(std::string("dec.") + part + "." + w, d, d);
        for (auto& x : t.v) x = rng.normal(0, 0.4);
      }
    store.add("ln1.gain", 1, d).fill(1.0);
    store.add("ln1.bias", 1, d);
    store.add("ln2.gain", 1, d).fill(1.0);
    store.add("ln2.bias", 1, d);
    auto& wx = store.add("gate.x", 2 * d, 1);
    auto& wy = store.add("gate.y", 2 * d, 1);
    for (auto& x : wx.v) x = rng.normal(0, 0.3);
    for (auto& x : wy.v) x = rng.normal(0, 0.3);
  }

  std::vector<DecoderLayerParamsT<double>> layers(nn::TapeT<double>& tape) {
    return {{{tape.param("dec.self.wq"), tape.param("dec.self.wk"), tape.param("dec.self.wv"),
              tape.param("dec.self.wo")},
             {tape.param("dec.cross.wq"), tape.param("dec.cross.wk"), tape.param("dec.cross.wv"),
              tape.param("dec.cross.wo")},
             tape.param("ln1.gain"), tape.param("ln1.bias"), tape.param("ln2.gain"),
             tape.param("ln2.bias")}};
  }
};

oracle::Mat to_mat(const nn::TensorT<double>& t) {
  oracle::Mat m(size_t(t.n_rows), std::vector<double>(size_t(t.n_cols)));
  for (int i = 0; i < t.n_rows; ++i)
    for (int j = 0; j < t.n_cols; ++j) m[size_t(i)][size_t(j)] = t.at(i, j);
  return m;
}

}  // namespace

TEST_CASE("decode: t=0 single layer is finite and deterministic") {
  Fixture fx;
  nn::TensorT<double> m0(1, 4), xco(3, 4);
  Rng rng(2);
  for (auto& x : m0.v) x = rng.normal();
  for (auto& x : xco.v) x = rng.normal();
  auto run = [&] {
    nn::TapeT<double> tape(&fx.store);
    auto m = decode_sequence(tape, tape.constant(m0), tape.constant(xco), fx.layers(tape), 2);
    return tape.val(m);
  };
  auto a = run();
  auto b = run();
  CHECK(a.all_finite());
  CHECK(a.v == b.v);
}

TEST_CASE("decode: causality - perturbing a later step leaves earlier outputs bit-identical") {
  Fixture fx;
  nn::TensorT<double> m0(4, 4), xco(3, 4);
  Rng rng(8);
  for (auto& x : m0.v) x = rng.normal();
  for (auto& x : xco.v) x = rng.normal();
  nn::TensorT<double> m0b = m0;
  m0b.at(3, 1) += 5.0;  // perturb the last step only

  auto run = [&](const nn::TensorT<double>& in) {
    nn::TapeT<double> tape(&fx.store);
    auto m = decode_sequence(tape, tape.constant(in), tape.constant(xco), fx.layers(tape), 2);
    return tape.val(m);
  };
  auto a = run(m0);
  auto b = run(m0b);
  for (int t = 0; t < 3; ++t)
    for (int j = 0; j < 4; ++j) CHECK(a.at(t, j) == b.at(t, j));  // bit-identical
  bool last_differs = false;
  for (int j = 0; j < 4; ++j) last_differs = last_differs || a.at(3, j) != b.at(3, j);
  CHECK(last_differs);
}

TEST_CASE("decode: masked attention weights on future positions are exactly zero") {
  auto mask = nn::causal_mask(3);
  nn::TapeT<double> tape;
  nn::TensorT<double> logits(3, 3);
  Rng rng(3);
  for (auto& x : logits.v) x = rng.normal();
  auto w = tape.val(tape.softmax_rows(tape.constant(logits), &mask));
  CHECK(w.at(0, 1) == 0.0);
  CHECK(w.at(0, 2) == 0.0);
  CHECK(w.at(1, 2) == 0.0);
  CHECK(w.at(0, 0) == 1.0);
}

TEST_CASE("decode: L=1 hand params match the layer oracle at t=1") {
  Fixture fx;
  nn::TensorT<double> m0(2, 4), xco(3, 4);
  Rng rng(17);
  for (auto& x : m0.v) x = rng.normal();
  for (auto& x : xco.v) x = rng.normal();

  nn::TapeT<double> tape(&fx.store);
  auto m = decode_sequence(tape, tape.constant(m0), tape.constant(xco), fx.layers(tape), 2);
  const auto& got = tape.val(m);

  // oracle: causal self-attn + residual + LN, cross-attn + residual + LN
  auto self_out = oracle::mha_output_causal(to_mat(m0), to_mat(fx.store.at("dec.self.wq").value),
                                            to_mat(fx.store.at("dec.self.wk").value),
                                            to_mat(fx.store.at("dec.self.wv").value),
                                            to_mat(fx.store.at("dec.self.wo").value), 2);
  oracle::Mat a(2);
  for (int t = 0; t < 2; ++t) {
    std::vector<double> sum(4);
    for (int j = 0; j < 4; ++j) sum[size_t(j)] = m0.at(t, j) + self_out[size_t(t)][size_t(j)];
    a[size_t(t)] = oracle::layer_norm(sum);
  }
  auto cross_out = oracle::mha_output(a, to_mat(xco), to_mat(fx.store.at("dec.cross.wq").value),
                                      to_mat(fx.store.at("dec.cross.wk").value),
                                      to_mat(fx.store.at("dec.cross.wv").value),
                                      to_mat(fx.store.at("dec.cross.wo").value), 2);
  for (int t = 0; t < 2; ++t) {
    std::vector<double> sum(4);
    for (int j = 0; j < 4; ++j) sum[size_t(j)] = a[size_t(t)][size_t(j)] + cross_out[size_t(t)][size_t(j)];
    auto expect = oracle::layer_norm(sum);
    for (int j = 0; j < 4; ++j) CHECK(got.at(t, j) == Approx(expect[size_t(j)]).margin(1e-9));
  }
}

TEST_CASE("switches: zero logits give x=y=0.5 and coefficients (0.5,0.25,0.25)") {
  Fixture fx;
  fx.store.at("gate.x").value.fill(0.0);
  fx.store.at("gate.y").value.fill(0.0);
  nn::TapeT<double> tape(&fx.store);
  nn::TensorT<double> m0(1, 4), m(1, 4);
  Rng rng(4);
  for (auto& x : m0.v) x = rng.normal();
  for (auto& x : m.v) x = rng.normal();
  auto sw = compute_switches(tape, tape.constant(m0), tape.constant(m), tape.param("gate.x"),
                             tape.param("gate.y"));
  CHECK(tape.val(sw.x).at(0, 0) == Approx(0.5));
  CHECK(tape.val(sw.y).at(0, 0) == Approx(0.5));

  auto c = effective_coeffs({0.5, 0.5}, AblationFlags{}, true, true);
  CHECK(c.entity == Approx(0.5));
  CHECK(c.concept_ == Approx(0.25));
  CHECK(c.gen == Approx(0.25));
}

TEST_CASE("effective coefficients: saturation, ablations, redistribution, convexity") {
  AblationFlags none;
  auto sat_e = effective_coeffs({1.0, 0.7}, none, true, true);
  CHECK(sat_e.entity == Approx(1.0));
  CHECK(sat_e.concept_ == Approx(0.0).margin(1e-12));
  CHECK(sat_e.gen == Approx(0.0).margin(1e-12));

  auto sat_g = effective_coeffs({0.0, 0.0}, none, true, true);
  CHECK(sat_g.gen == Approx(1.0));

  AblationFlags nc;
  nc.non_commonsense = true;
  auto c_nc = effective_coeffs({0.9, 0.9}, nc, true, true);
  CHECK(c_nc.entity == 0.0);
  CHECK(c_nc.concept_ == 0.0);
  CHECK(c_nc.gen == 1.0);

  AblationFlags nd;
  nd.non_distinguish = true;
  auto c_nd = effective_coeffs({0.9, 0.3}, nd, true, true);
  CHECK(c_nd.entity == 0.0);
  CHECK(c_nd.concept_ == Approx(0.3));
  CHECK(c_nd.gen == Approx(0.7));

  AblationFlags ne;
  ne.non_enrich = true;
  auto c_ne = effective_coeffs({0.3, 0.9}, ne, true, true);
  CHECK(c_ne.entity == Approx(0.3));
  CHECK(c_ne.concept_ == 0.0);
  CHECK(c_ne.gen == Approx(0.7));

  // empty pathways redistribute to generation
  auto c_empty = effective_coeffs({0.6, 0.8}, none, false, true);
  CHECK(c_empty.entity == 0.0);
  CHECK(c_empty.sum() == Approx(1.0).margin(1e-12));

  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    SwitchGates g{rng.uniform(), rng.uniform()};
    auto c = effective_coeffs(g, none, rng.bernoulli(0.5), rng.bernoulli(0.5));
    CHECK(c.entity >= 0.0);
    CHECK(c.concept_ >= 0.0);
    CHECK(c.gen >= 0.0);
    CHECK(c.sum() == Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("extended vocab: shared base symbols, copy-only symbols, lookup") {
  Vocabulary base;
  base.add("paris");
  base.add("visited");
  ExtendedVocab ext(&base);
  int paris = ext.add_surface("paris");
  CHECK(paris == base.id("paris"));  // in-vocab single token shares the base id
  int gates = ext.add_surface("Bill Gates");
  CHECK(gates == base.size());  // first copy-only symbol
  CHECK(ext.add_surface("Bill Gates") == gates);
  int ovo = ext.add_surface("ovostat");  // OOV single token -> copy-only symbol
  CHECK(ovo == base.size() + 1);
  CHECK(ext.lookup("Bill Gates") == gates);
  CHECK(ext.lookup("paris") == paris);
  CHECK(ext.lookup("never seen") == -1);
  CHECK(ext.size() == base.size() + 2);
  CHECK(ext.surface(gates) == "Bill Gates");
  CHECK(!ext.is_base(gates));
}

TEST_CASE("mix_distributions: identity at (0,0,1), point mass, OOV copy, convexity") {
  Vocabulary base;
  base.add("w0");
  base.add("w1");
  ExtendedVocab ext(&base);
  std::vector<int> esyms{ext.add_surface("Ada Voss")};
  std::vector<int> psyms{ext.add_surface("ovostat"), ext.add_surface("w0")};

  std::vector<double> pv(size_t(base.size()), 0.0);
  pv[4] = 0.7;  // "w0"
  pv[5] = 0.2;  // "w1"
  pv[Vocabulary::kEos] = 0.1;

  SECTION("gates (0,0,1): p* equals p padded with zeros") {
    auto dist = mix_distributions(pv, {}, {}, {0, 0, 1}, esyms, psyms, ext.size());
    for (size_t i = 0; i < pv.size(); ++i) CHECK(dist.p[i] == pv[i]);
    CHECK(dist.p[size_t(esyms[0])] == 0.0);
    CHECK(dist.p[size_t(psyms[0])] == 0.0);
  }

  SECTION("pure entity pointer is a point mass on the entity symbol") {
    auto dist = mix_distributions(pv, {1.0}, {}, {1, 0, 0}, esyms, psyms, ext.size());
    CHECK(dist.p[size_t(esyms[0])] == 1.0);
    CHECK(dist.sum() == Approx(1.0).margin(1e-12));
  }

  SECTION("OOV concept mass comes only from the copy term") {
    auto dist = mix_distributions(pv, {}, {0.6, 0.4}, {0.0, 0.5, 0.5}, esyms, psyms, ext.size());
    CHECK(dist.p[size_t(psyms[0])] == Approx(0.5 * 0.6));              // copy only
    CHECK(dist.p[4] == Approx(0.5 * 0.7 + 0.5 * 0.4));                 // shared base word adds
    CHECK(dist.sum() == Approx(1.0).margin(1e-12));
  }

  SECTION("random convex combinations stay distributions") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      SwitchGates g{rng.uniform(), rng.uniform()};
      auto c = effective_coeffs(g, AblationFlags{}, true, true);
      std::vector<double> ae{0.3, 0.7}, ar{0.2, 0.8};
      std::vector<int> es{ext.lookup("Ada Voss"), ext.lookup("w1")};
      auto dist = mix_distributions(pv, ae, ar, c, es, psyms, ext.size());
      double sum = 0;
      for (double p : dist.p) {
        CHECK(p >= 0.0);
        sum += p;
      }
      CHECK(sum == Approx(1.0).margin(1e-9));
    }
  }
}
