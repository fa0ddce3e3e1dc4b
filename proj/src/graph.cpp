// Copyright 2026 The TOWER Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tower/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tower/error.hpp"

namespace tower::nn {

std::string Shape::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
         std::to_string(w) + ")";
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape s, std::vector<T> values) : shape(s), data(values.begin(), values.end()) {
  if (data.size() != shape.size()) {
    throw DataError("tensor of shape " + shape.str() + " given " + std::to_string(data.size()) +
                    " values");
  }
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
const BasicTensor<T>& BasicVar<T>::value() const {
  if (!valid()) throw UsageError("use of an unbound graph variable");
  return graph->value(*this);
}

// ---------------------------------------------------------------------------
// Graph

template <typename T>
void BasicGraph<T>::check(VarT v) const {
  if (v.graph != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw UsageError("variable does not belong to this graph");
  }
}

template <typename T>
BasicVar<T> BasicGraph<T>::input(TensorT value) {
  Node node;
  node.op = "input";
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
BasicVar<T> BasicGraph<T>::param(BasicParameter<T>& p) {
  Node node;
  node.op = "param";
  node.value = p.value;
  node.param = &p;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
BasicVar<T> BasicGraph<T>::record(const char* op, TensorT value, std::vector<VarT> parents,
                                  BackwardFn fn) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.backward = std::move(fn);
  for (const VarT& p : parents) {
    check(p);
    node.parents.push_back(p.id);
    node.requires_grad = node.requires_grad || nodes_[p.id].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
const BasicTensor<T>& BasicGraph<T>::value(VarT v) const {
  check(v);
  return nodes_[v.id].value;
}

template <typename T>
BasicTensor<T>& BasicGraph<T>::grad_of(int id) {
  Node& n = nodes_[id];
  if (n.grad.shape != n.value.shape || n.grad.size() != n.value.size()) {
    n.grad = TensorT(n.value.shape);
  }
  return n.grad;
}

template <typename T>
const BasicTensor<T>& BasicGraph<T>::grad(VarT v) {
  check(v);
  return grad_of(v.id);
}

template <typename T>
void BasicGraph<T>::backward(VarT loss) {
  if (nodes_.empty() || !loss.valid()) {
    throw UsageError("backward called before any forward pass was recorded");
  }
  check(loss);
  if (backward_done_) throw UsageError("backward already ran on this graph");
  if (nodes_[loss.id].value.size() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " +
                     nodes_[loss.id].value.shape.str());
  }
  backward_done_ = true;
  grad_of(loss.id)[0] = T(1);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
  for (Node& n : nodes_) {
    if (!n.param) continue;
    BasicParameter<T>& p = *n.param;
    if (!p.has_grad || p.grad.size() != p.value.size()) p.zero_grad();
    if (n.grad.empty()) continue;
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += n.grad[i];
  }
}

namespace ops {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const Mat<T>>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw DataError(msg);
}

template <typename T>
void im2col(const T* x, int channels, int h, int w, int k, int pad, T* col) {
  const int hw = h * w;
  for (int c = 0; c < channels; ++c) {
    for (int kr = 0; kr < k; ++kr) {
      for (int kc = 0; kc < k; ++kc) {
        T* row = col + static_cast<std::size_t>((c * k + kr) * k + kc) * hw;
        for (int r = 0; r < h; ++r) {
          const int sr = r + kr - pad;
          T* out = row + r * w;
          if (sr < 0 || sr >= h) {
            std::fill(out, out + w, T(0));
            continue;
          }
          const T* in = x + (static_cast<std::size_t>(c) * h + sr) * w;
          for (int cc = 0; cc < w; ++cc) {
            const int sc = cc + kc - pad;
            out[cc] = (sc >= 0 && sc < w) ? in[sc] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int channels, int h, int w, int k, int pad, T* dx) {
  const int hw = h * w;
  for (int c = 0; c < channels; ++c) {
    for (int kr = 0; kr < k; ++kr) {
      for (int kc = 0; kc < k; ++kc) {
        const T* row = col + static_cast<std::size_t>((c * k + kr) * k + kc) * hw;
        for (int r = 0; r < h; ++r) {
          const int sr = r + kr - pad;
          if (sr < 0 || sr >= h) continue;
          T* out = dx + (static_cast<std::size_t>(c) * h + sr) * w;
          const T* in = row + r * w;
          for (int cc = 0; cc < w; ++cc) {
            const int sc = cc + kc - pad;
            if (sc >= 0 && sc < w) out[sc] += in[cc];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
BasicVar<T> conv2d(BasicVar<T> x, BasicVar<T> weight, BasicVar<T> bias, int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  require(ws.c == xs.c, "conv2d: weight expects " + std::to_string(ws.c) + " input channels, got " +
                            std::to_string(xs.c));
  require(ws.h == ws.w, "conv2d: kernel must be square");
  require(2 * pad == ws.h - 1, "conv2d: only same-size padding is supported");
  require(bias.value().size() == static_cast<std::size_t>(ws.n), "conv2d: bias size mismatch");
  const int cout = ws.n;
  const int k = ws.h;
  const int hw = xs.h * xs.w;
  const int ckk = xs.c * k * k;

  BasicTensor<T> out(Shape{xs.n, cout, xs.h, xs.w});
  AlignedVector<T> col(static_cast<std::size_t>(ckk) * hw);
  CMapMat<T> wm(weight.value().ptr(), cout, ckk);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bv(bias.value().ptr(), cout);
  for (int n = 0; n < xs.n; ++n) {
    im2col(x.value().ptr() + static_cast<std::size_t>(n) * xs.c * hw, xs.c, xs.h, xs.w, k, pad,
           col.data());
    MapMat<T> om(out.ptr() + static_cast<std::size_t>(n) * cout * hw, cout, hw);
    om.noalias() = wm * CMapMat<T>(col.data(), ckk, hw);
    om.colwise() += bv;
  }

  auto backward = [pad](BasicGraph<T>& g, int self) {
    const int xi = g.parent(self, 0), wi = g.parent(self, 1), bi = g.parent(self, 2);
    const auto& xv = g.value_of(xi);
    const auto& wv = g.value_of(wi);
    const auto& gout = g.grad_of(self);
    const Shape xs = xv.shape;
    const int cout = wv.shape.n;
    const int k = wv.shape.h;
    const int hw = xs.h * xs.w;
    const int ckk = xs.c * k * k;
    AlignedVector<T> col(static_cast<std::size_t>(ckk) * hw);
    AlignedVector<T> dcol(static_cast<std::size_t>(ckk) * hw);
    CMapMat<T> wm(wv.ptr(), cout, ckk);
    const bool need_x = g.requires_grad(xi);
    const bool need_w = g.requires_grad(wi);
    const bool need_b = g.requires_grad(bi);
    for (int n = 0; n < xs.n; ++n) {
      CMapMat<T> gm(gout.ptr() + static_cast<std::size_t>(n) * cout * hw, cout, hw);
      if (need_w) {
        im2col(xv.ptr() + static_cast<std::size_t>(n) * xs.c * hw, xs.c, xs.h, xs.w, k, pad,
               col.data());
        MapMat<T>(g.grad_of(wi).ptr(), cout, ckk).noalias() +=
            gm * CMapMat<T>(col.data(), ckk, hw).transpose();
      }
      if (need_b) {
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(g.grad_of(bi).ptr(), cout) +=
            gm.rowwise().sum();
      }
      if (need_x) {
        MapMat<T>(dcol.data(), ckk, hw).noalias() = wm.transpose() * gm;
        col2im_add(dcol.data(), xs.c, xs.h, xs.w, k, pad,
                   g.grad_of(xi).ptr() + static_cast<std::size_t>(n) * xs.c * hw);
      }
    }
  };
  return x.graph->record("conv2d", std::move(out), {x, weight, bias}, backward);
}

template <typename T>
BasicVar<T> dense(BasicVar<T> x, BasicVar<T> weight, BasicVar<T> bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const int din = static_cast<int>(xs.size() / xs.n);
  require(ws.c * ws.h * ws.w == din, "dense: weight expects " + std::to_string(ws.c) +
                                         " inputs, got " + std::to_string(din));
  require(bias.value().size() == static_cast<std::size_t>(ws.n), "dense: bias size mismatch");
  const int dout = ws.n;
  BasicTensor<T> out(Shape{xs.n, dout, 1, 1});
  MapMat<T> om(out.ptr(), xs.n, dout);
  om.noalias() = CMapMat<T>(x.value().ptr(), xs.n, din) *
                 CMapMat<T>(weight.value().ptr(), dout, din).transpose();
  om.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.value().ptr(), dout);

  auto backward = [](BasicGraph<T>& g, int self) {
    const int xi = g.parent(self, 0), wi = g.parent(self, 1), bi = g.parent(self, 2);
    const auto& xv = g.value_of(xi);
    const auto& wv = g.value_of(wi);
    const int n = xv.shape.n;
    const int din = static_cast<int>(xv.size() / n);
    const int dout = wv.shape.n;
    CMapMat<T> gm(g.grad_of(self).ptr(), n, dout);
    if (g.requires_grad(xi)) {
      MapMat<T>(g.grad_of(xi).ptr(), n, din).noalias() += gm * CMapMat<T>(wv.ptr(), dout, din);
    }
    if (g.requires_grad(wi)) {
      MapMat<T>(g.grad_of(wi).ptr(), dout, din).noalias() +=
          gm.transpose() * CMapMat<T>(xv.ptr(), n, din);
    }
    if (g.requires_grad(bi)) {
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g.grad_of(bi).ptr(), dout) +=
          gm.colwise().sum();
    }
  };
  return x.graph->record("dense", std::move(out), {x, weight, bias}, backward);
}

template <typename T>
BasicVar<T> matmul_nt(BasicVar<T> a, BasicVar<T> b) {
  const Shape as = a.shape();
  const Shape bs = b.shape();
  const int e = static_cast<int>(as.size() / as.n);
  require(static_cast<int>(bs.size() / bs.n) == e, "matmul_nt: inner dimensions differ");
  BasicTensor<T> out(Shape{as.n, bs.n, 1, 1});
  MapMat<T>(out.ptr(), as.n, bs.n).noalias() =
      CMapMat<T>(a.value().ptr(), as.n, e) * CMapMat<T>(b.value().ptr(), bs.n, e).transpose();
  auto backward = [](BasicGraph<T>& g, int self) {
    const int ai = g.parent(self, 0), bi = g.parent(self, 1);
    const auto& av = g.value_of(ai);
    const auto& bv = g.value_of(bi);
    const int n = av.shape.n, m = bv.shape.n;
    const int e = static_cast<int>(av.size() / n);
    CMapMat<T> gm(g.grad_of(self).ptr(), n, m);
    if (g.requires_grad(ai)) {
      MapMat<T>(g.grad_of(ai).ptr(), n, e).noalias() += gm * CMapMat<T>(bv.ptr(), m, e);
    }
    if (g.requires_grad(bi)) {
      MapMat<T>(g.grad_of(bi).ptr(), m, e).noalias() += gm.transpose() * CMapMat<T>(av.ptr(), n, e);
    }
  };
  return a.graph->record("matmul_nt", std::move(out), {a, b}, backward);
}

template <typename T>
BasicVar<T> max_pool2(BasicVar<T> x) {
  const Shape xs = x.shape();
  require(xs.h % 2 == 0 && xs.w % 2 == 0, "max_pool2: spatial dims must be even, got " + xs.str());
  const Shape os{xs.n, xs.c, xs.h / 2, xs.w / 2};
  BasicTensor<T> out(os);
  std::vector<std::uint32_t> argmax(os.size());
  const auto& xv = x.value();
  std::size_t o = 0;
  for (int nc = 0; nc < xs.n * xs.c; ++nc) {
    const std::size_t base = static_cast<std::size_t>(nc) * xs.plane();
    for (int r = 0; r < os.h; ++r) {
      for (int c = 0; c < os.w; ++c, ++o) {
        std::size_t best = base + static_cast<std::size_t>(2 * r) * xs.w + 2 * c;
        for (int dr = 0; dr < 2; ++dr) {
          for (int dc = 0; dc < 2; ++dc) {
            const std::size_t idx = base + static_cast<std::size_t>(2 * r + dr) * xs.w + 2 * c + dc;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        out[o] = xv[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  auto backward = [argmax = std::move(argmax)](BasicGraph<T>& g, int self) {
    const int xi = g.parent(self, 0);
    if (!g.requires_grad(xi)) return;
    const auto& gout = g.grad_of(self);
    auto& gx = g.grad_of(xi);
    for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += gout[i];
  };
  return x.graph->record("max_pool2", std::move(out), {x}, std::move(backward));
}

template <typename T>
BasicVar<T> upsample2(BasicVar<T> x) {
  const Shape xs = x.shape();
  const Shape os{xs.n, xs.c, xs.h * 2, xs.w * 2};
  BasicTensor<T> out(os);
  const auto& xv = x.value();
  for (int nc = 0; nc < xs.n * xs.c; ++nc) {
    for (int r = 0; r < os.h; ++r) {
      for (int c = 0; c < os.w; ++c) {
        out[static_cast<std::size_t>(nc) * os.plane() + static_cast<std::size_t>(r) * os.w + c] =
            xv[static_cast<std::size_t>(nc) * xs.plane() + static_cast<std::size_t>(r / 2) * xs.w +
               c / 2];
      }
    }
  }
  auto backward = [](BasicGraph<T>& g, int self) {
    const int xi = g.parent(self, 0);
    if (!g.requires_grad(xi)) return;
    const auto& gout = g.grad_of(self);
    auto& gx = g.grad_of(xi);
    const Shape xs = gx.shape;
    const Shape os = gout.shape;
    for (int nc = 0; nc < xs.n * xs.c; ++nc) {
      for (int r = 0; r < os.h; ++r) {
        for (int c = 0; c < os.w; ++c) {
          gx[static_cast<std::size_t>(nc) * xs.plane() + static_cast<std::size_t>(r / 2) * xs.w +
             c / 2] +=
              gout[static_cast<std::size_t>(nc) * os.plane() + static_cast<std::size_t>(r) * os.w + c];
        }
      }
    }
  };
  return x.graph->record("upsample2", std::move(out), {x}, backward);
}

template <typename T>
BasicVar<T> concat_channels(BasicVar<T> a, BasicVar<T> b) {
  const Shape as = a.shape();
  const Shape bs = b.shape();
  require(as.n == bs.n && as.h == bs.h && as.w == bs.w,
          "concat_channels: shapes " + as.str() + " and " + bs.str() + " are incompatible");
  BasicTensor<T> out(Shape{as.n, as.c + bs.c, as.h, as.w});
  const std::size_t sa = static_cast<std::size_t>(as.c) * as.plane();
  const std::size_t sb = static_cast<std::size_t>(bs.c) * bs.plane();
  for (int n = 0; n < as.n; ++n) {
    std::copy_n(a.value().ptr() + n * sa, sa, out.ptr() + n * (sa + sb));
    std::copy_n(b.value().ptr() + n * sb, sb, out.ptr() + n * (sa + sb) + sa);
  }
  auto backward = [sa, sb](BasicGraph<T>& g, int self) {
    const int ai = g.parent(self, 0), bi = g.parent(self, 1);
    const auto& gout = g.grad_of(self);
    const int batch = gout.shape.n;
    for (int n = 0; n < batch; ++n) {
      if (g.requires_grad(ai)) {
        auto& ga = g.grad_of(ai);
        for (std::size_t i = 0; i < sa; ++i) ga[n * sa + i] += gout[n * (sa + sb) + i];
      }
      if (g.requires_grad(bi)) {
        auto& gb = g.grad_of(bi);
        for (std::size_t i = 0; i < sb; ++i) gb[n * sb + i] += gout[n * (sa + sb) + sa + i];
      }
    }
  };
  return a.graph->record("concat_channels", std::move(out), {a, b}, backward);
}

template <typename T>
BasicVar<T> concat_batch(BasicVar<T> a, BasicVar<T> b) {
  const Shape as = a.shape();
  const Shape bs = b.shape();
  require(as.c == bs.c && as.h == bs.h && as.w == bs.w,
          "concat_batch: shapes " + as.str() + " and " + bs.str() + " are incompatible");
  BasicTensor<T> out(Shape{as.n + bs.n, as.c, as.h, as.w});
  std::copy(a.value().data.begin(), a.value().data.end(), out.data.begin());
  std::copy(b.value().data.begin(), b.value().data.end(), out.data.begin() + as.size());
  auto backward = [na = as.size()](BasicGraph<T>& g, int self) {
    const int ai = g.parent(self, 0), bi = g.parent(self, 1);
    const auto& gout = g.grad_of(self);
    if (g.requires_grad(ai)) {
      auto& ga = g.grad_of(ai);
      for (std::size_t i = 0; i < na; ++i) ga[i] += gout[i];
    }
    if (g.requires_grad(bi)) {
      auto& gb = g.grad_of(bi);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[na + i];
    }
  };
  return a.graph->record("concat_batch", std::move(out), {a, b}, backward);
}

template <typename T>
BasicVar<T> relu(BasicVar<T> x) {
  BasicTensor<T> out = x.value();
  for (T& v : out.data) v = v > T(0) ? v : T(0);
  auto backward = [](BasicGraph<T>& g, int self) {
    const int xi = g.parent(self, 0);
    if (!g.requires_grad(xi)) return;
    const auto& xv = g.value_of(xi);
    const auto& gout = g.grad_of(self);
    auto& gx = g.grad_of(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (xv[i] > T(0)) gx[i] += gout[i];
    }
  };
  return x.graph->record("relu", std::move(out), {x}, backward);
}

template <typename T>
BasicVar<T> sigmoid(BasicVar<T> x) {
  BasicTensor<T> out = x.value();
  for (T& v : out.data) {
    v = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  }
  auto backward = [](BasicGraph<T>& g, int self) {
    const int xi = g.parent(self, 0);
    if (!g.requires_grad(xi)) return;
    const auto& y = g.value_of(self);
    const auto& gout = g.grad_of(self);
    auto& gx = g.grad_of(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gout[i] * y[i] * (T(1) - y[i]);
  };
  return x.graph->record("sigmoid", std::move(out), {x}, backward);
}

template <typename T>
BasicVar<T> global_avg_pool(BasicVar<T> x) {
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  BasicTensor<T> out(Shape{xs.n, xs.c, 1, 1});
  const auto& xv = x.value();
  for (std::size_t nc = 0; nc < out.size(); ++nc) {
    T s = 0;
    for (std::size_t i = 0; i < plane; ++i) s += xv[nc * plane + i];
    out[nc] = s / static_cast<T>(plane);
  }
  auto backward = [plane](BasicGraph<T>& g, int self) {
    const int xi = g.parent(self, 0);
    if (!g.requires_grad(xi)) return;
    const auto& gout = g.grad_of(self);
    auto& gx = g.grad_of(xi);
    const T inv = T(1) / static_cast<T>(plane);
    for (std::size_t nc = 0; nc < gout.size(); ++nc) {
      for (std::size_t i = 0; i < plane; ++i) gx[nc * plane + i] += gout[nc] * inv;
    }
  };
  return x.graph->record("global_avg_pool", std::move(out), {x}, backward);
}

template <typename T>
BasicVar<T> l2_normalize_rows(BasicVar<T> x) {
  const Shape xs = x.shape();
  const int n = xs.n;
  const std::size_t e = xs.size() / n;
  BasicTensor<T> out = x.value();
  std::vector<T> norms(n);
  for (int i = 0; i < n; ++i) {
    T s = 0;
    for (std::size_t j = 0; j < e; ++j) s += out[i * e + j] * out[i * e + j];
    norms[i] = std::sqrt(s);
    if (!(norms[i] > T(0))) {
      throw NumericError("l2_normalize_rows: row " + std::to_string(i) + " has zero norm");
    }
    for (std::size_t j = 0; j < e; ++j) out[i * e + j] /= norms[i];
  }
  auto backward = [norms = std::move(norms), e](BasicGraph<T>& g, int self) {
    const int xi = g.parent(self, 0);
    if (!g.requires_grad(xi)) return;
    const auto& y = g.value_of(self);
    const auto& gout = g.grad_of(self);
    auto& gx = g.grad_of(xi);
    for (std::size_t i = 0; i < norms.size(); ++i) {
      T dot = 0;
      for (std::size_t j = 0; j < e; ++j) dot += y[i * e + j] * gout[i * e + j];
      for (std::size_t j = 0; j < e; ++j) {
        gx[i * e + j] += (gout[i * e + j] - y[i * e + j] * dot) / norms[i];
      }
    }
  };
  return x.graph->record("l2_normalize_rows", std::move(out), {x}, std::move(backward));
}

template <typename T>
BasicVar<T> scale(BasicVar<T> x, T s) {
  BasicTensor<T> out = x.value();
  for (T& v : out.data) v *= s;
  auto backward = [s](BasicGraph<T>& g, int self) {
    const int xi = g.parent(self, 0);
    if (!g.requires_grad(xi)) return;
    const auto& gout = g.grad_of(self);
    auto& gx = g.grad_of(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s * gout[i];
  };
  return x.graph->record("scale", std::move(out), {x}, backward);
}

template <typename T>
BasicVar<T> add(BasicVar<T> a, BasicVar<T> b) {
  require(a.shape() == b.shape(), "add: shapes " + a.shape().str() + " and " + b.shape().str() +
                                      " differ");
  BasicTensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  auto backward = [](BasicGraph<T>& g, int self) {
    const auto& gout = g.grad_of(self);
    for (int k = 0; k < 2; ++k) {
      const int pi = g.parent(self, k);
      if (!g.requires_grad(pi)) continue;
      auto& gp = g.grad_of(pi);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gout[i];
    }
  };
  return a.graph->record("add", std::move(out), {a, b}, backward);
}

template <typename T>
BasicVar<T> sum(BasicVar<T> x) {
  T s = 0;
  for (T v : x.value().data) s += v;
  auto backward = [](BasicGraph<T>& g, int self) {
    const int xi = g.parent(self, 0);
    if (!g.requires_grad(xi)) return;
    const T gs = g.grad_of(self)[0];
    for (T& v : g.grad_of(xi).data) v += gs;
  };
  return x.graph->record("sum", BasicTensor<T>(Shape{1, 1, 1, 1}, s), {x}, backward);
}

template <typename T>
BasicVar<T> softmax_cross_entropy(BasicVar<T> logits, const std::vector<int>& targets,
                                  const std::vector<int>& excluded) {
  const Shape ls = logits.shape();
  const int n = ls.n;
  const int k = static_cast<int>(ls.size() / n);
  require(static_cast<int>(targets.size()) == n, "softmax_cross_entropy: target count mismatch");
  require(excluded.empty() || static_cast<int>(excluded.size()) == n,
          "softmax_cross_entropy: exclusion count mismatch");
  const auto& lv = logits.value();
  BasicTensor<T> probs(ls);
  T loss = 0;
  for (int i = 0; i < n; ++i) {
    const int skip = excluded.empty() ? -1 : excluded[i];
    const int t = targets[i];
    require(t >= 0 && t < k && t != skip, "softmax_cross_entropy: bad target index");
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < k; ++j) {
      if (j != skip) mx = std::max(mx, lv[i * k + j]);
    }
    T z = 0;
    for (int j = 0; j < k; ++j) {
      if (j != skip) z += std::exp(lv[i * k + j] - mx);
    }
    const T lse = mx + std::log(z);
    for (int j = 0; j < k; ++j) {
      probs[i * k + j] = j == skip ? T(0) : std::exp(lv[i * k + j] - lse);
    }
    loss += lse - lv[i * k + t];
  }
  loss /= static_cast<T>(n);
  auto backward = [probs = std::move(probs), targets, n, k](BasicGraph<T>& g, int self) {
    const int li = g.parent(self, 0);
    if (!g.requires_grad(li)) return;
    const T gs = g.grad_of(self)[0] / static_cast<T>(n);
    auto& gl = g.grad_of(li);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        const T onehot = j == targets[i] ? T(1) : T(0);
        gl[i * k + j] += gs * (probs[i * k + j] - onehot);
      }
    }
  };
  return logits.graph->record("softmax_cross_entropy", BasicTensor<T>(Shape{1, 1, 1, 1}, loss),
                              {logits}, std::move(backward));
}

template <typename T>
BasicVar<T> mse_image_sum(BasicVar<T> prediction, BasicVar<T> target) {
  require(prediction.shape() == target.shape(), "mse: shapes " + prediction.shape().str() +
                                                     " and " + target.shape().str() + " differ");
  const Shape s = prediction.shape();
  const std::size_t per = s.size() / s.n;
  const auto& pv = prediction.value();
  const auto& tv = target.value();
  T loss = 0;
  for (int n = 0; n < s.n; ++n) {
    T acc = 0;
    for (std::size_t i = 0; i < per; ++i) {
      const T d = pv[n * per + i] - tv[n * per + i];
      acc += d * d;
    }
    loss += acc / static_cast<T>(per);
  }
  auto backward = [per](BasicGraph<T>& g, int self) {
    const int pi = g.parent(self, 0), ti = g.parent(self, 1);
    const auto& pv = g.value_of(pi);
    const auto& tv = g.value_of(ti);
    const T gs = g.grad_of(self)[0] * T(2) / static_cast<T>(per);
    if (g.requires_grad(pi)) {
      auto& gp = g.grad_of(pi);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gs * (pv[i] - tv[i]);
    }
    if (g.requires_grad(ti)) {
      auto& gt = g.grad_of(ti);
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= gs * (pv[i] - tv[i]);
    }
  };
  return prediction.graph->record("mse_image_sum", BasicTensor<T>(Shape{1, 1, 1, 1}, loss),
                                  {prediction, target}, backward);
}

template <typename T>
BasicVar<T> bce_with_logits(BasicVar<T> logits, BasicVar<T> target) {
  require(logits.shape() == target.shape(), "bce: shapes " + logits.shape().str() + " and " +
                                                target.shape().str() + " differ");
  const auto& zv = logits.value();
  const auto& tv = target.value();
  T loss = 0;
  for (std::size_t i = 0; i < zv.size(); ++i) {
    const T z = zv[i];
    loss += std::max(z, T(0)) - z * tv[i] + std::log1p(std::exp(-std::abs(z)));
  }
  const T count = static_cast<T>(zv.size());
  loss /= count;
  auto backward = [count](BasicGraph<T>& g, int self) {
    const int zi = g.parent(self, 0), ti = g.parent(self, 1);
    const auto& zv = g.value_of(zi);
    const auto& tv = g.value_of(ti);
    const T gs = g.grad_of(self)[0] / count;
    if (g.requires_grad(zi)) {
      auto& gz = g.grad_of(zi);
      for (std::size_t i = 0; i < gz.size(); ++i) {
        const T z = zv[i];
        const T sig = z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
        gz[i] += gs * (sig - tv[i]);
      }
    }
    if (g.requires_grad(ti)) {
      auto& gt = g.grad_of(ti);
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= gs * zv[i];
    }
  };
  return logits.graph->record("bce_with_logits", BasicTensor<T>(Shape{1, 1, 1, 1}, loss),
                              {logits, target}, backward);
}

#define TOWER_INSTANTIATE_OPS(T)                                                              \
  template BasicVar<T> conv2d(BasicVar<T>, BasicVar<T>, BasicVar<T>, int);                    \
  template BasicVar<T> dense(BasicVar<T>, BasicVar<T>, BasicVar<T>);                          \
  template BasicVar<T> matmul_nt(BasicVar<T>, BasicVar<T>);                                   \
  template BasicVar<T> max_pool2(BasicVar<T>);                                                \
  template BasicVar<T> upsample2(BasicVar<T>);                                                \
  template BasicVar<T> concat_channels(BasicVar<T>, BasicVar<T>);                             \
  template BasicVar<T> concat_batch(BasicVar<T>, BasicVar<T>);                                \
  template BasicVar<T> relu(BasicVar<T>);                                                     \
  template BasicVar<T> sigmoid(BasicVar<T>);                                                  \
  template BasicVar<T> global_avg_pool(BasicVar<T>);                                          \
  template BasicVar<T> l2_normalize_rows(BasicVar<T>);                                        \
  template BasicVar<T> scale(BasicVar<T>, T);                                                 \
  template BasicVar<T> add(BasicVar<T>, BasicVar<T>);                                         \
  template BasicVar<T> sum(BasicVar<T>);                                                      \
  template BasicVar<T> softmax_cross_entropy(BasicVar<T>, const std::vector<int>&,            \
                                             const std::vector<int>&);                        \
  template BasicVar<T> mse_image_sum(BasicVar<T>, BasicVar<T>);                               \
  template BasicVar<T> bce_with_logits(BasicVar<T>, BasicVar<T>);

TOWER_INSTANTIATE_OPS(float)
TOWER_INSTANTIATE_OPS(double)
#undef TOWER_INSTANTIATE_OPS

}  // namespace ops

template struct BasicTensor<float>;
template struct BasicTensor<double>;
template struct BasicVar<float>;
template struct BasicVar<double>;
template class BasicGraph<float>;
template class BasicGraph<double>;

}  // namespace tower::nn
