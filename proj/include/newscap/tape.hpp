#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "newscap/common.hpp"
#include "newscap/tensor.hpp"

namespace newscap::nn {

// Named parameter registry. std::map keeps iteration order deterministic for
// the optimizer and the checkpoint writer.
template <typename S>
struct ParamStoreT {
  struct Entry {
    TensorT<S> value;
    TensorT<S> grad;
  };
  std::map<std::string, Entry> entries;

  TensorT<S>& add(const std::string& name, int rows, int cols) {
    auto [it, fresh] = entries.emplace(name, Entry{TensorT<S>(rows, cols), TensorT<S>(rows, cols)});
    if (!fresh) throw ConfigError("parameter registered twice: " + name);
    return it->second.value;
  }

  Entry& at(const std::string& name) {
    auto it = entries.find(name);
    if (it == entries.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return entries.count(name) != 0; }

  void zero_grad() {
    for (auto& [k, e] : entries) e.grad.fill(S(0));
  }

  template <typename T>
  ParamStoreT<T> cast() const {
    ParamStoreT<T> out;
    for (const auto& [k, e] : entries)
      out.entries.emplace(k, typename ParamStoreT<T>::Entry{e.value.template cast<T>(),
                                                            TensorT<T>(e.value.n_rows, e.value.n_cols)});
    return out;
  }
};

// Reverse-mode tape over TensorT values. One tape per forward pass; backward
// visits nodes exactly once in reverse creation order and accumulates grads
// additively, scattering parameter grads back into the bound store.
template <typename S>
class TapeT {
 public:
  using Tensor = TensorT<S>;
  struct Ref {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  explicit TapeT(ParamStoreT<S>* store = nullptr) : store_(store) {}

  const Tensor& val(Ref r) const { return nodes_[r.id].value; }
  const Tensor& grad(Ref r) const { return nodes_[r.id].grad; }
  int rows(Ref r) const { return val(r).n_rows; }
  int cols(Ref r) const { return val(r).n_cols; }

  // ---- leaves ----

  Ref constant(Tensor t) { return push(std::move(t), {}); }

  Ref param(const std::string& name) {
    auto& e = store().at(name);
    Ref r = push(e.value, {});
    param_bindings_.push_back({r.id, name});
    return r;
  }

  // ---- primitives ----

  Ref matmul(Ref a, Ref b) {
    Ref out = push(nn::matmul(val(a), val(b)), {a, b});
    set_backward(out, [this, a, b, out] {
      const Tensor& g = nodes_[out.id].grad;
      // dA += g * B^T ; dB += A^T * g
      accumulate(a, nn::matmul(g, nn::transpose(val(b))));
      accumulate(b, nn::matmul(nn::transpose(val(a)), g));
    });
    return out;
  }

  Ref transpose(Ref a) {
    Ref out = push(nn::transpose(val(a)), {a});
    set_backward(out, [this, a, out] { accumulate(a, nn::transpose(nodes_[out.id].grad)); });
    return out;
  }

  Ref add(Ref a, Ref b) {
    check_same_shape(val(a), val(b), "tape add");
    Tensor t = val(a);
    axpy(t, S(1), val(b));
    Ref out = push(std::move(t), {a, b});
    set_backward(out, [this, a, b, out] {
      accumulate(a, nodes_[out.id].grad);
      accumulate(b, nodes_[out.id].grad);
    });
    return out;
  }

  Ref sub(Ref a, Ref b) {
    check_same_shape(val(a), val(b), "tape sub");
    Tensor t = val(a);
    axpy(t, S(-1), val(b));
    Ref out = push(std::move(t), {a, b});
    set_backward(out, [this, a, b, out] {
      accumulate(a, nodes_[out.id].grad);
      Tensor neg = nodes_[out.id].grad;
      for (auto& x : neg.v) x = -x;
      accumulate(b, neg);
    });
    return out;
  }

  Ref mul(Ref a, Ref b) {
    check_same_shape(val(a), val(b), "tape mul");
    Tensor t = val(a);
    for (size_t i = 0; i < t.v.size(); ++i) t.v[i] *= val(b).v[i];
    Ref out = push(std::move(t), {a, b});
    set_backward(out, [this, a, b, out] {
      const Tensor& g = nodes_[out.id].grad;
      Tensor da = g, db = g;
      for (size_t i = 0; i < g.v.size(); ++i) {
        da.v[i] *= val(b).v[i];
        db.v[i] *= val(a).v[i];
      }
      accumulate(a, da);
      accumulate(b, db);
    });
    return out;
  }

  Ref scale(Ref a, S c) {
    Tensor t = val(a);
    for (auto& x : t.v) x *= c;
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, c, out] {
      Tensor g = nodes_[out.id].grad;
      for (auto& x : g.v) x *= c;
      accumulate(a, g);
    });
    return out;
  }

  Ref sigmoid(Ref a) {
    Tensor t = val(a);
    for (auto& x : t.v) x = S(1) / (S(1) + std::exp(-x));
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, out] {
      const Tensor& y = nodes_[out.id].value;
      Tensor g = nodes_[out.id].grad;
      for (size_t i = 0; i < g.v.size(); ++i) g.v[i] *= y.v[i] * (S(1) - y.v[i]);
      accumulate(a, g);
    });
    return out;
  }

  Ref log(Ref a) {
    Tensor t = val(a);
    for (auto& x : t.v) x = std::log(x);
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, out] {
      Tensor g = nodes_[out.id].grad;
      for (size_t i = 0; i < g.v.size(); ++i) g.v[i] /= val(a).v[i];
      accumulate(a, g);
    });
    return out;
  }

  Ref sqrt_op(Ref a) {
    Tensor t = val(a);
    for (auto& x : t.v) x = std::sqrt(x);
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, out] {
      const Tensor& y = nodes_[out.id].value;
      Tensor g = nodes_[out.id].grad;
      for (size_t i = 0; i < g.v.size(); ++i) g.v[i] *= S(0.5) / y.v[i];
      accumulate(a, g);
    });
    return out;
  }

  Ref reciprocal(Ref a) {
    Tensor t = val(a);
    for (auto& x : t.v) x = S(1) / x;
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, out] {
      const Tensor& y = nodes_[out.id].value;
      Tensor g = nodes_[out.id].grad;
      for (size_t i = 0; i < g.v.size(); ++i) g.v[i] *= -y.v[i] * y.v[i];
      accumulate(a, g);
    });
    return out;
  }

  // Gradient passes only where the input is strictly above the floor.
  Ref clamp_min(Ref a, S floor) {
    Tensor t = val(a);
    for (auto& x : t.v) x = std::max(x, floor);
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, floor, out] {
      Tensor g = nodes_[out.id].grad;
      for (size_t i = 0; i < g.v.size(); ++i)
        if (val(a).v[i] <= floor) g.v[i] = S(0);
      accumulate(a, g);
    });
    return out;
  }

  // Row-wise softmax with optional 0/1 mask (0 = disallowed, output exactly 0).
  // Max-subtraction over the unmasked support for stability.
  Ref softmax_rows(Ref a, const TensorT<uint8_t>* mask = nullptr) {
    const Tensor& x = val(a);
    if (mask && (mask->n_rows != x.n_rows || mask->n_cols != x.n_cols))
      throw DimensionError("softmax mask shape mismatch");
    Tensor y(x.n_rows, x.n_cols);
    for (int i = 0; i < x.n_rows; ++i) {
      S mx = S(0);
      bool any = false;
      for (int j = 0; j < x.n_cols; ++j) {
        if (mask && !mask->at(i, j)) continue;
        S v = x.at(i, j);
        mx = any ? std::max(mx, v) : v;
        any = true;
      }
      if (!any) throw Error("softmax: all positions masked in row " + std::to_string(i));
      S sum = 0;
      for (int j = 0; j < x.n_cols; ++j) {
        if (mask && !mask->at(i, j)) {
          y.at(i, j) = S(0);
          continue;
        }
        S e = std::exp(x.at(i, j) - mx);
        y.at(i, j) = e;
        sum += e;
      }
      for (int j = 0; j < x.n_cols; ++j) y.at(i, j) /= sum;
    }
    Ref out = push(std::move(y), {a});
    set_backward(out, [this, a, out] {
      const Tensor& y2 = nodes_[out.id].value;
      const Tensor& g = nodes_[out.id].grad;
      Tensor dx(y2.n_rows, y2.n_cols);
      for (int i = 0; i < y2.n_rows; ++i) {
        S dotv = 0;
        for (int j = 0; j < y2.n_cols; ++j) dotv += g.at(i, j) * y2.at(i, j);
        for (int j = 0; j < y2.n_cols; ++j) dx.at(i, j) = y2.at(i, j) * (g.at(i, j) - dotv);
      }
      accumulate(a, dx);
    });
    return out;
  }

  // Per-row zero-mean unit-variance (eps inside the root) then affine.
  Ref layer_norm_rows(Ref x, Ref gain, Ref bias, S eps = S(1e-5)) {
    const Tensor& in = val(x);
    if (val(gain).n_cols != in.n_cols || val(bias).n_cols != in.n_cols)
      throw DimensionError("layer_norm: gain/bias width mismatch");
    Tensor y(in.n_rows, in.n_cols);
    Tensor xhat(in.n_rows, in.n_cols);
    std::vector<S> inv_std(in.n_rows);
    int n = in.n_cols;
    for (int i = 0; i < in.n_rows; ++i) {
      S mean = 0;
      for (int j = 0; j < n; ++j) mean += in.at(i, j);
      mean /= S(n);
      S var = 0;
      for (int j = 0; j < n; ++j) {
        S d = in.at(i, j) - mean;
        var += d * d;
      }
      var /= S(n);
      S is = S(1) / std::sqrt(var + eps);
      inv_std[i] = is;
      for (int j = 0; j < n; ++j) {
        S xh = (in.at(i, j) - mean) * is;
        xhat.at(i, j) = xh;
        y.at(i, j) = xh * val(gain).at(0, j) + val(bias).at(0, j);
      }
    }
    Ref out = push(std::move(y), {x, gain, bias});
    auto xhat_s = std::make_shared<Tensor>(std::move(xhat));
    auto istd_s = std::make_shared<std::vector<S>>(std::move(inv_std));
    set_backward(out, [this, x, gain, bias, out, xhat_s, istd_s] {
      const Tensor& g = nodes_[out.id].grad;
      int rows = g.n_rows, n2 = g.n_cols;
      Tensor dgain(1, n2), dbias(1, n2), dx(rows, n2);
      for (int i = 0; i < rows; ++i) {
        S mean_dxhat = 0, mean_dxhat_xhat = 0;
        for (int j = 0; j < n2; ++j) {
          S dxh = g.at(i, j) * val(gain).at(0, j);
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * xhat_s->at(i, j);
          dgain.at(0, j) += g.at(i, j) * xhat_s->at(i, j);
          dbias.at(0, j) += g.at(i, j);
        }
        mean_dxhat /= S(n2);
        mean_dxhat_xhat /= S(n2);
        for (int j = 0; j < n2; ++j) {
          S dxh = g.at(i, j) * val(gain).at(0, j);
          dx.at(i, j) = (*istd_s)[i] * (dxh - mean_dxhat - xhat_s->at(i, j) * mean_dxhat_xhat);
        }
      }
      accumulate(x, dx);
      accumulate(gain, dgain);
      accumulate(bias, dbias);
    });
    return out;
  }

  Ref concat_rows(const std::vector<Ref>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: empty");
    int cols = val(parts[0]).n_cols, rows = 0;
    for (Ref p : parts) {
      if (val(p).n_cols != cols) throw DimensionError("concat_rows: column mismatch");
      rows += val(p).n_rows;
    }
    Tensor t(rows, cols);
    int r = 0;
    for (Ref p : parts) {
      const Tensor& x = val(p);
      std::copy(x.v.begin(), x.v.end(), t.v.begin() + size_t(r) * cols);
      r += x.n_rows;
    }
    Ref out = push(std::move(t), parts);
    auto parts_s = std::make_shared<std::vector<Ref>>(parts);
    set_backward(out, [this, out, parts_s] {
      const Tensor& g = nodes_[out.id].grad;
      int r2 = 0;
      for (Ref p : *parts_s) {
        const Tensor& x = val(p);
        Tensor gp(x.n_rows, x.n_cols);
        std::copy(g.v.begin() + size_t(r2) * g.n_cols,
                  g.v.begin() + size_t(r2 + x.n_rows) * g.n_cols, gp.v.begin());
        accumulate(p, gp);
        r2 += x.n_rows;
      }
    });
    return out;
  }

  Ref concat_cols(Ref a, Ref b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    if (x.n_rows != y.n_rows) throw DimensionError("concat_cols: row mismatch");
    Tensor t(x.n_rows, x.n_cols + y.n_cols);
    for (int i = 0; i < x.n_rows; ++i) {
      std::copy(x.row_ptr(i), x.row_ptr(i) + x.n_cols, t.row_ptr(i));
      std::copy(y.row_ptr(i), y.row_ptr(i) + y.n_cols, t.row_ptr(i) + x.n_cols);
    }
    Ref out = push(std::move(t), {a, b});
    set_backward(out, [this, a, b, out] {
      const Tensor& g = nodes_[out.id].grad;
      const Tensor& x2 = val(a);
      const Tensor& y2 = val(b);
      Tensor ga(x2.n_rows, x2.n_cols), gb(y2.n_rows, y2.n_cols);
      for (int i = 0; i < g.n_rows; ++i) {
        std::copy(g.row_ptr(i), g.row_ptr(i) + x2.n_cols, ga.row_ptr(i));
        std::copy(g.row_ptr(i) + x2.n_cols, g.row_ptr(i) + g.n_cols, gb.row_ptr(i));
      }
      accumulate(a, ga);
      accumulate(b, gb);
    });
    return out;
  }

  Ref slice_rows(Ref a, int r0, int r1) {
    const Tensor& x = val(a);
    if (r0 < 0 || r1 > x.n_rows || r0 >= r1) throw DimensionError("slice_rows: bad range");
    Tensor t(r1 - r0, x.n_cols);
    std::copy(x.v.begin() + size_t(r0) * x.n_cols, x.v.begin() + size_t(r1) * x.n_cols, t.v.begin());
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, r0, out] {
      const Tensor& g = nodes_[out.id].grad;
      Tensor ga(val(a).n_rows, val(a).n_cols);
      std::copy(g.v.begin(), g.v.end(), ga.v.begin() + size_t(r0) * ga.n_cols);
      accumulate(a, ga);
    });
    return out;
  }

  Ref slice_cols(Ref a, int c0, int c1) {
    const Tensor& x = val(a);
    if (c0 < 0 || c1 > x.n_cols || c0 >= c1) throw DimensionError("slice_cols: bad range");
    Tensor t(x.n_rows, c1 - c0);
    for (int i = 0; i < x.n_rows; ++i)
      std::copy(x.row_ptr(i) + c0, x.row_ptr(i) + c1, t.row_ptr(i));
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, c0, out] {
      const Tensor& g = nodes_[out.id].grad;
      Tensor ga(val(a).n_rows, val(a).n_cols);
      for (int i = 0; i < g.n_rows; ++i)
        std::copy(g.row_ptr(i), g.row_ptr(i) + g.n_cols, ga.row_ptr(i) + c0);
      accumulate(a, ga);
    });
    return out;
  }

  // Row gather from an embedding table; repeated ids accumulate grads.
  Ref gather_rows(Ref table, std::vector<int> ids) {
    const Tensor& e = val(table);
    Tensor t(int(ids.size()), e.n_cols);
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= e.n_rows) throw DimensionError("gather_rows: id out of range");
      std::copy(e.row_ptr(ids[i]), e.row_ptr(ids[i]) + e.n_cols, t.row_ptr(int(i)));
    }
    Ref out = push(std::move(t), {table});
    auto ids_s = std::make_shared<std::vector<int>>(std::move(ids));
    set_backward(out, [this, table, out, ids_s] {
      const Tensor& g = nodes_[out.id].grad;
      Tensor gt(val(table).n_rows, val(table).n_cols);
      for (size_t i = 0; i < ids_s->size(); ++i)
        for (int j = 0; j < g.n_cols; ++j) gt.at((*ids_s)[i], j) += g.at(int(i), j);
      accumulate(table, gt);
    });
    return out;
  }

  Ref rowsum(Ref a) {  // [n,m] -> [n,1]
    const Tensor& x = val(a);
    Tensor t(x.n_rows, 1);
    for (int i = 0; i < x.n_rows; ++i) {
      S s = 0;
      for (int j = 0; j < x.n_cols; ++j) s += x.at(i, j);
      t.at(i, 0) = s;
    }
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, out] {
      const Tensor& g = nodes_[out.id].grad;
      Tensor ga(val(a).n_rows, val(a).n_cols);
      for (int i = 0; i < ga.n_rows; ++i)
        for (int j = 0; j < ga.n_cols; ++j) ga.at(i, j) = g.at(i, 0);
      accumulate(a, ga);
    });
    return out;
  }

  Ref mean_rows(Ref a) {  // [n,m] -> [1,m]
    const Tensor& x = val(a);
    Tensor t(1, x.n_cols);
    for (int j = 0; j < x.n_cols; ++j) {
      S s = 0;
      for (int i = 0; i < x.n_rows; ++i) s += x.at(i, j);
      t.at(0, j) = s / S(x.n_rows);
    }
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, out] {
      const Tensor& g = nodes_[out.id].grad;
      Tensor ga(val(a).n_rows, val(a).n_cols);
      S inv = S(1) / S(ga.n_rows);
      for (int i = 0; i < ga.n_rows; ++i)
        for (int j = 0; j < ga.n_cols; ++j) ga.at(i, j) = g.at(0, j) * inv;
      accumulate(a, ga);
    });
    return out;
  }

  Ref sum_all(Ref a) {  // [n,m] -> [1,1]
    const Tensor& x = val(a);
    S s = 0;
    for (S v : x.v) s += v;
    Tensor t(1, 1);
    t.at(0, 0) = s;
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, out] {
      S g = nodes_[out.id].grad.at(0, 0);
      Tensor ga(val(a).n_rows, val(a).n_cols, g);
      accumulate(a, ga);
    });
    return out;
  }

  // Multiply row i of X by c[i]  (X: [n,m], c: [n,1])
  Ref mul_colvec(Ref x, Ref c) {
    const Tensor& a = val(x);
    const Tensor& cv = val(c);
    if (cv.n_rows != a.n_rows || cv.n_cols != 1) throw DimensionError("mul_colvec: bad scaler shape");
    Tensor t = a;
    for (int i = 0; i < a.n_rows; ++i)
      for (int j = 0; j < a.n_cols; ++j) t.at(i, j) *= cv.at(i, 0);
    Ref out = push(std::move(t), {x, c});
    set_backward(out, [this, x, c, out] {
      const Tensor& g = nodes_[out.id].grad;
      const Tensor& a2 = val(x);
      const Tensor& cv2 = val(c);
      Tensor gx(a2.n_rows, a2.n_cols), gc(a2.n_rows, 1);
      for (int i = 0; i < a2.n_rows; ++i) {
        S s = 0;
        for (int j = 0; j < a2.n_cols; ++j) {
          gx.at(i, j) = g.at(i, j) * cv2.at(i, 0);
          s += g.at(i, j) * a2.at(i, j);
        }
        gc.at(i, 0) = s;
      }
      accumulate(x, gx);
      accumulate(c, gc);
    });
    return out;
  }

  // Multiply column j of X by r[j]  (X: [n,m], r: [1,m])
  Ref mul_rowvec(Ref x, Ref r) {
    const Tensor& a = val(x);
    const Tensor& rv = val(r);
    if (rv.n_cols != a.n_cols || rv.n_rows != 1) throw DimensionError("mul_rowvec: bad scaler shape");
    Tensor t = a;
    for (int i = 0; i < a.n_rows; ++i)
      for (int j = 0; j < a.n_cols; ++j) t.at(i, j) *= rv.at(0, j);
    Ref out = push(std::move(t), {x, r});
    set_backward(out, [this, x, r, out] {
      const Tensor& g = nodes_[out.id].grad;
      const Tensor& a2 = val(x);
      const Tensor& rv2 = val(r);
      Tensor gx(a2.n_rows, a2.n_cols), gr(1, a2.n_cols);
      for (int i = 0; i < a2.n_rows; ++i)
        for (int j = 0; j < a2.n_cols; ++j) {
          gx.at(i, j) = g.at(i, j) * rv2.at(0, j);
          gr.at(0, j) += g.at(i, j) * a2.at(i, j);
        }
      accumulate(x, gx);
      accumulate(r, gr);
    });
    return out;
  }

  Ref pick(Ref a, int i, int j) {  // -> [1,1]
    const Tensor& x = val(a);
    if (i < 0 || i >= x.n_rows || j < 0 || j >= x.n_cols) throw DimensionError("pick: out of range");
    Tensor t(1, 1);
    t.at(0, 0) = x.at(i, j);
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, i, j, out] {
      Tensor ga(val(a).n_rows, val(a).n_cols);
      ga.at(i, j) = nodes_[out.id].grad.at(0, 0);
      accumulate(a, ga);
    });
    return out;
  }

  // Sum of selected entries -> [1,1]; duplicates legal and accumulate.
  Ref pick_sum(Ref a, std::vector<std::pair<int, int>> idx) {
    const Tensor& x = val(a);
    S s = 0;
    for (auto [i, j] : idx) {
      if (i < 0 || i >= x.n_rows || j < 0 || j >= x.n_cols) throw DimensionError("pick_sum: out of range");
      s += x.at(i, j);
    }
    Tensor t(1, 1);
    t.at(0, 0) = s;
    Ref out = push(std::move(t), {a});
    auto idx_s = std::make_shared<std::vector<std::pair<int, int>>>(std::move(idx));
    set_backward(out, [this, a, out, idx_s] {
      Tensor ga(val(a).n_rows, val(a).n_cols);
      S g = nodes_[out.id].grad.at(0, 0);
      for (auto [i, j] : *idx_s) ga.at(i, j) += g;
      accumulate(a, ga);
    });
    return out;
  }

  // Inverted dropout; identity when rate == 0. Mask drawn once at forward.
  Ref dropout(Ref a, double rate, Rng& rng) {
    if (rate <= 0.0) return a;
    if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
    const Tensor& x = val(a);
    auto mask = std::make_shared<Tensor>(x.n_rows, x.n_cols);
    S keep_scale = S(1.0 / (1.0 - rate));
    for (auto& m : mask->v) m = rng.bernoulli(rate) ? S(0) : keep_scale;
    Tensor t = x;
    for (size_t i = 0; i < t.v.size(); ++i) t.v[i] *= mask->v[i];
    Ref out = push(std::move(t), {a});
    set_backward(out, [this, a, out, mask] {
      Tensor g = nodes_[out.id].grad;
      for (size_t i = 0; i < g.v.size(); ++i) g.v[i] *= mask->v[i];
      accumulate(a, g);
    });
    return out;
  }

  // ---- driver ----

  void backward(Ref loss) {
    if (val(loss).size() != 1) throw DimensionError("backward: loss must be scalar");
    for (auto& n : nodes_) n.grad = Tensor(n.value.n_rows, n.value.n_cols);
    nodes_[loss.id].grad.at(0, 0) = S(1);
    for (int i = int(nodes_.size()) - 1; i >= 0; --i)
      if (nodes_[i].backward) nodes_[i].backward();
    for (auto& [id, name] : param_bindings_) axpy(store().at(name).grad, S(1), nodes_[id].grad);
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> backward;
  };

  ParamStoreT<S>& store() {
    if (!store_) throw ConfigError("tape has no parameter store bound");
    return *store_;
  }

  Ref push(Tensor t, const std::vector<Ref>&) {
    nodes_.push_back(Node{std::move(t), Tensor(), nullptr});
    return Ref{int(nodes_.size()) - 1};
  }

  void set_backward(Ref r, std::function<void()> fn) { nodes_[r.id].backward = std::move(fn); }

  void accumulate(Ref r, const Tensor& g) { axpy(nodes_[r.id].grad, S(1), g); }

  ParamStoreT<S>* store_;
  std::deque<Node> nodes_;
  std::vector<std::pair<int, std::string>> param_bindings_;
};

using Tape = TapeT<float>;
using ParamStore = ParamStoreT<float>;

}  // namespace newscap::nn
