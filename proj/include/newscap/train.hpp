#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "newscap/adam.hpp"
#include "newscap/checkpoint.hpp"
#include "newscap/model.hpp"

namespace newscap {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-5;
  int warmup_steps = 500;
  int epochs = 200;
  int batch_size = 16;
  uint64_t seed = 1;
  double dropout = 0.1;
  AblationFlags flags;
  std::string preset = "desk";
};

// Extended-vocabulary target ids for the teacher-forced steps: caption
// elements then EOS. A gold entity absent from the record's selected entity
// set is a dataset error.
template <typename S>
std::vector<int> target_symbols(const DatasetRecord& rec,
                                const typename ModelT<S>::Forward& fwd) {
  std::vector<int> out;
  size_t n = ModelT<S>::effective_caption_length(rec);
  for (size_t i = 0; i < n; ++i) {
    const auto& e = rec.caption[i];
    if (e.kind == CaptionElement::Kind::Word) {
      int id = fwd.ext.lookup(e.text);
      out.push_back(id >= 0 ? id : Vocabulary::kUnk);
    } else {
      bool known = false;
      for (const auto& s : fwd.entity_surfaces) known = known || s == e.text;
      if (!known)
        throw DataError("record " + rec.id + ": caption entity '" + e.text +
                        "' absent from the record's entity set");
      out.push_back(fwd.ext.lookup(e.text));
    }
  }
  out.push_back(Vocabulary::kEos);
  return out;
}

template <typename S>
struct RecordLossT {
  typename nn::TapeT<S>::Ref nll_sum;  // valid iff counted > 0
  int counted = 0;
  typename ModelT<S>::Forward fwd;
};

// Teacher-forced NLL of p*(target) per step. The mixing coefficients live on
// the tape, so the switch matrices train; ablation formulas skip absent gates
// and an empty pathway's coefficient is redistributed to the generation term.
// PAD targets contribute nothing.
template <typename S>
RecordLossT<S> compute_record_loss(nn::TapeT<S>& tape, const ModelT<S>& model,
                                   const DatasetRecord& rec, const RecordKnowledge& knowledge,
                                   const AblationFlags& flags, bool train_mode = false,
                                   Rng* dropout_rng = nullptr) {
  using Ref = typename nn::TapeT<S>::Ref;
  RecordLossT<S> out;
  auto inputs = model.teacher_inputs(rec);
  out.fwd = model.forward(tape, rec, knowledge, inputs, flags, train_mode, dropout_rng);
  auto targets = target_symbols<S>(rec, out.fwd);

  const int V = model.vocab.size();
  bool usable_e = out.fwd.alpha_e.valid();
  bool usable_r = out.fwd.alpha_r.valid();
  Ref one = tape.constant(nn::TensorT<S>(1, 1, S(1)));

  std::vector<Ref> step_losses;
  for (int t = 0; t < out.fwd.steps; ++t) {
    int target = targets[size_t(t)];
    if (target == Vocabulary::kPad) continue;

    Ref mass_g, mass_e, mass_r;
    if (target < V) mass_g = tape.pick(out.fwd.p_vocab, t, target);
    if (usable_e) {
      std::vector<std::pair<int, int>> hits;
      for (size_t k = 0; k < out.fwd.entity_symbols.size(); ++k)
        if (out.fwd.entity_symbols[k] == target) hits.emplace_back(t, int(k));
      if (!hits.empty()) mass_e = tape.pick_sum(out.fwd.alpha_e, std::move(hits));
    }
    if (usable_r) {
      std::vector<std::pair<int, int>> hits;
      for (size_t j = 0; j < out.fwd.pair_symbols.size(); ++j)
        if (out.fwd.pair_symbols[j] == target) hits.emplace_back(t, int(j));
      if (!hits.empty()) mass_r = tape.pick_sum(out.fwd.alpha_r, std::move(hits));
    }

    std::vector<Ref> terms;
    if (flags.non_commonsense) {
      if (mass_g.valid()) terms.push_back(mass_g);  // coefficient exactly 1
    } else {
      Ref c_ent, c_con, c_gen;
      if (flags.non_distinguish) {
        Ref yt = tape.pick(out.fwd.gate_y, t, 0);
        c_con = yt;
        c_gen = tape.sub(one, yt);
      } else if (flags.non_enrich) {
        Ref xt = tape.pick(out.fwd.gate_x, t, 0);
        c_ent = xt;
        c_gen = tape.sub(one, xt);
      } else {
        Ref xt = tape.pick(out.fwd.gate_x, t, 0);
        Ref yt = tape.pick(out.fwd.gate_y, t, 0);
        Ref inv_x = tape.sub(one, xt);
        c_ent = xt;
        c_con = tape.mul(yt, inv_x);
        c_gen = tape.mul(inv_x, tape.sub(one, yt));
      }
      if (c_ent.valid() && !usable_e) {
        c_gen = tape.add(c_gen, c_ent);
        c_ent = Ref{};
      }
      if (c_con.valid() && !usable_r) {
        c_gen = tape.add(c_gen, c_con);
        c_con = Ref{};
      }
      if (c_ent.valid() && mass_e.valid()) terms.push_back(tape.mul(c_ent, mass_e));
      if (c_con.valid() && mass_r.valid()) terms.push_back(tape.mul(c_con, mass_r));
      if (mass_g.valid()) terms.push_back(tape.mul(c_gen, mass_g));
    }

    Ref pstar;
    if (terms.empty()) {
      pstar = tape.constant(nn::TensorT<S>(1, 1, S(0)));
    } else {
      pstar = terms[0];
      for (size_t i = 1; i < terms.size(); ++i) pstar = tape.add(pstar, terms[i]);
    }
    step_losses.push_back(tape.scale(tape.log(tape.clamp_min(pstar, S(1e-12))), S(-1)));
    ++out.counted;
  }
  if (!step_losses.empty()) out.nll_sum = tape.sum_all(tape.concat_rows(step_losses));
  return out;
}

template <typename S>
struct BatchLossT {
  typename nn::TapeT<S>::Ref loss;  // mean NLL over non-pad targets
  int tokens = 0;
  std::vector<typename ModelT<S>::Forward> forwards;
};

template <typename S>
BatchLossT<S> compute_loss(nn::TapeT<S>& tape, const ModelT<S>& model,
                           const std::vector<const DatasetRecord*>& records,
                           const std::vector<const RecordKnowledge*>& knowledge,
                           const AblationFlags& flags, bool train_mode = false,
                           Rng* dropout_rng = nullptr) {
  using Ref = typename nn::TapeT<S>::Ref;
  if (records.size() != knowledge.size()) throw DataError("compute_loss: corpus misaligned");
  BatchLossT<S> out;
  Ref total;
  for (size_t i = 0; i < records.size(); ++i) {
    auto rl = compute_record_loss(tape, model, *records[i], *knowledge[i], flags, train_mode,
                                  dropout_rng);
    out.forwards.push_back(std::move(rl.fwd));
    if (rl.counted == 0) continue;
    out.tokens += rl.counted;
    total = total.valid() ? tape.add(total, rl.nll_sum) : rl.nll_sum;
  }
  if (out.tokens == 0) throw DataError("compute_loss: batch has no target tokens");
  out.loss = tape.scale(total, S(1) / S(out.tokens));
  return out;
}

// Per-step evaluation outputs on the plain (non-tape) side: gates, effective
// coefficients, and the materialized extended-vocabulary distribution.
struct StepMix {
  SwitchGates gates;
  EffectiveCoeffs coeffs;
  MixedDistribution dist;
};

template <typename S>
std::vector<double> tensor_row(const nn::TensorT<S>& t, int row) {
  std::vector<double> out(size_t(t.n_cols));
  for (int j = 0; j < t.n_cols; ++j) out[size_t(j)] = double(t.at(row, j));
  return out;
}

template <typename S>
StepMix mix_step(const nn::TapeT<S>& tape, const typename ModelT<S>::Forward& fwd,
                 const AblationFlags& flags, int t) {
  StepMix s;
  s.gates.x = fwd.gate_x.valid() ? double(tape.val(fwd.gate_x).at(t, 0)) : 0.0;
  s.gates.y = fwd.gate_y.valid() ? double(tape.val(fwd.gate_y).at(t, 0)) : 0.0;
  s.coeffs = effective_coeffs(s.gates, flags, fwd.alpha_e.valid(), fwd.alpha_r.valid());
  std::vector<double> pe, pr;
  if (fwd.alpha_e.valid()) pe = tensor_row(tape.val(fwd.alpha_e), t);
  if (fwd.alpha_r.valid()) pr = tensor_row(tape.val(fwd.alpha_r), t);
  s.dist = mix_distributions(tensor_row(tape.val(fwd.p_vocab), t), pe, pr, s.coeffs,
                             fwd.entity_symbols, fwd.pair_symbols, fwd.ext.size());
  return s;
}

struct FitResult {
  std::vector<double> epoch_loss;
  double best_loss = 0.0;
  int best_epoch = -1;
  nn::ParamStoreT<float> best_params;
  long steps = 0;
};

namespace detail {
template <typename S>
std::string nan_diagnostics(const nn::TapeT<S>& tape,
                            const std::vector<typename ModelT<S>::Forward>& fwds) {
  std::ostringstream os;
  os << "loss is not finite; diagnostics per record:";
  for (size_t i = 0; i < fwds.size(); ++i) {
    const auto& f = fwds[i];
    os << "\n  record " << i << ": gates(x,y)=";
    for (int t = 0; t < f.steps; ++t) {
      double x = f.gate_x.valid() ? double(tape.val(f.gate_x).at(t, 0)) : 0.0;
      double y = f.gate_y.valid() ? double(tape.val(f.gate_y).at(t, 0)) : 0.0;
      os << (t ? "," : "") << "(" << x << "," << y << ")";
    }
    auto row_sums = [&](typename nn::TapeT<S>::Ref r, const char* name) {
      if (!r.valid()) return;
      os << " " << name << " row sums=";
      const auto& m = tape.val(r);
      for (int t = 0; t < m.n_rows; ++t) {
        double s = 0;
        for (int j = 0; j < m.n_cols; ++j) s += double(m.at(t, j));
        os << (t ? "," : "") << s;
      }
    };
    row_sums(f.alpha_e, "alpha_e");
    row_sums(f.alpha_r, "alpha_r");
  }
  return os.str();
}
}  // namespace detail

// Teacher-forced MLE with warmup-then-linear-decay; deterministic in seed.
// Keeps the best-epoch parameter snapshot; aborts with a gate/attention dump
// when the loss stops being finite.
inline FitResult fit(Model& model, const std::vector<DatasetRecord>& records,
                     const std::vector<RecordKnowledge>& knowledge, const TrainConfig& cfg) {
  if (records.empty()) throw DataError("fit: empty corpus");
  if (records.size() != knowledge.size()) throw DataError("fit: knowledge misaligned with corpus");
  if (cfg.lr <= 0) throw ConfigError("fit: lr must be positive");
  if (cfg.batch_size < 1) throw ConfigError("fit: batch size must be >= 1");
  model.cfg.dropout = cfg.dropout;

  Rng root(cfg.seed);
  Rng shuffle_rng = root.fork(1);
  Rng dropout_rng = root.fork(2);

  const long batches_per_epoch = long((records.size() + cfg.batch_size - 1) / cfg.batch_size);
  const long total_steps = long(cfg.epochs) * batches_per_epoch;

  FitResult res;
  res.best_params = model.params;
  nn::AdamState adam;
  std::vector<size_t> order(records.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.index(i)]);
    double epoch_nll = 0;
    long epoch_tokens = 0;
    for (size_t b = 0; b < order.size(); b += size_t(cfg.batch_size)) {
      std::vector<const DatasetRecord*> recs;
      std::vector<const RecordKnowledge*> ks;
      for (size_t i = b; i < std::min(order.size(), b + size_t(cfg.batch_size)); ++i) {
        recs.push_back(&records[order[i]]);
        ks.push_back(&knowledge[order[i]]);
      }
      nn::Tape tape(&model.params);
      auto batch = compute_loss(tape, model, recs, ks, cfg.flags, true, &dropout_rng);
      double loss = double(tape.val(batch.loss).at(0, 0));
      if (!std::isfinite(loss)) throw Error(detail::nan_diagnostics<float>(tape, batch.forwards));
      model.params.zero_grad();
      tape.backward(batch.loss);
      ++step;
      adam_step(model.params, adam, nn::scheduled_lr(cfg.lr, step, cfg.warmup_steps, total_steps),
                cfg.weight_decay);
      epoch_nll += loss * batch.tokens;
      epoch_tokens += batch.tokens;
    }
    double mean = epoch_nll / double(epoch_tokens);
    res.epoch_loss.push_back(mean);
    if (res.best_epoch < 0 || mean < res.best_loss) {
      res.best_loss = mean;
      res.best_epoch = epoch;
      res.best_params = model.params;
    }
  }
  res.steps = step;
  return res;
}

// Central-difference audit of reverse-mode gradients: fourth-order stencil
// (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h, so truncation stays far
// below the tolerance at h=1e-3. compute_grads must fill params.grad from the
// current values; eval_loss must be a pure re-evaluation.
inline double grad_check(nn::ParamStoreT<double>& params, const std::function<double()>& eval_loss,
                         const std::function<void()>& compute_grads, double h = 1e-3) {
  params.zero_grad();
  compute_grads();
  std::map<std::string, nn::TensorT<double>> analytic;
  for (auto& [name, e] : params.entries) analytic.emplace(name, e.grad);

  double worst = 0;
  for (auto& [name, e] : params.entries) {
    for (size_t i = 0; i < e.value.v.size(); ++i) {
      double keep = e.value.v[i];
      auto at = [&](double delta) {
        e.value.v[i] = keep + delta;
        return eval_loss();
      };
      double numeric = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
      e.value.v[i] = keep;
      double a = analytic.at(name).v[i];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace newscap
