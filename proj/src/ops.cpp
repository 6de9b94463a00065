/* Copyright 2026 The TSCFormer Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "tscformer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tscformer/error.hpp"

namespace tsc {

namespace {

struct AxisSplit {
  std::size_t outer;
  std::size_t len;
  std::size_t inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + to_string(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

Tensor scaled(Tensor t, double s) {
  if (s != 1.0) t.vec() *= s;
  return t;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out.vec() += b.value().vec();
  Node* na = &a.node();
  Node* nb = &b.node();
  return record(std::move(out), {a, b}, [na, nb](const Tensor& g, const Tensor&) {
    const double f = gradient_fault_scale("add");
    if (na->requires_grad) na->accumulate(scaled(g, f));
    if (nb->requires_grad) nb->accumulate(scaled(g, f));
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  out.vec() -= b.value().vec();
  Node* na = &a.node();
  Node* nb = &b.node();
  return record(std::move(out), {a, b}, [na, nb](const Tensor& g, const Tensor&) {
    if (na->requires_grad) na->accumulate(g);
    if (nb->requires_grad) nb->accumulate(scaled(g, -1.0));
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  out.vec().array() *= b.value().vec().array();
  Node* na = &a.node();
  Node* nb = &b.node();
  return record(std::move(out), {a, b}, [na, nb](const Tensor& g, const Tensor&) {
    if (na->requires_grad) {
      Tensor ga = g;
      ga.vec().array() *= nb->value.vec().array();
      na->accumulate(std::move(ga));
    }
    if (nb->requires_grad) {
      Tensor gb = g;
      gb.vec().array() *= na->value.vec().array();
      nb->accumulate(std::move(gb));
    }
  });
}

Var scale(const Var& a, double s) {
  Node* na = &a.node();
  return record(scaled(a.value(), s), {a}, [na, s](const Tensor& g, const Tensor&) { na->accumulate(scaled(g, s)); });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  out.vec() = out.vec().cwiseMax(0.0);
  Node* nx = &x.node();
  return record(std::move(out), {x}, [nx](const Tensor& g, const Tensor&) {
    const double f = gradient_fault_scale("relu");
    Tensor gx = g;
    const auto& v = nx->value;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = v[i] > 0.0 ? gx[i] * f : 0.0;
    nx->accumulate(std::move(gx));
  });
}

Var gelu(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  Node* nx = &x.node();
  return record(std::move(out), {x}, [nx](const Tensor& g, const Tensor&) {
    Tensor gx = g;
    const auto& v = nx->value;
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(v[i] * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v[i] * v[i]);
      gx[i] *= cdf + v[i] * pdf;
    }
    nx->accumulate(std::move(gx));
  });
}

Var sum(const Var& x) {
  Node* nx = &x.node();
  return record(Tensor::scalar(x.value().sum()), {x},
                [nx](const Tensor& g, const Tensor&) { nx->accumulate(Tensor(nx->value.shape(), g[0])); });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  Node* nx = &x.node();
  return record(Tensor::scalar(x.value().sum() / n), {x},
                [nx, n](const Tensor& g, const Tensor&) { nx->accumulate(Tensor(nx->value.shape(), g[0] / n)); });
}

Var mean_axis(const Var& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape = {1};
  Tensor out(out_shape);
  const auto& v = x.value();
  const double inv = 1.0 / static_cast<double>(s.len);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.len; ++l) {
      const double* src = v.data() + (o * s.len + l) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i] * inv;
    }
  }
  Node* nx = &x.node();
  return record(std::move(out), {x}, [nx, s, inv](const Tensor& g, const Tensor&) {
    Tensor gx(nx->value.shape());
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t l = 0; l < s.len; ++l) {
        double* dst = gx.data() + (o * s.len + l) * s.inner;
        const double* src = g.data() + o * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] = src[i] * inv;
      }
    }
    nx->accumulate(std::move(gx));
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  Node* nx = &x.node();
  return record(std::move(out), {x}, [nx](const Tensor& g, const Tensor&) { nx->accumulate(g.reshaped(nx->value.shape())); });
}

namespace {

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> st(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) st[i - 1] = st[i] * shape[i];
  return st;
}

// out[idx] = in[permuted idx]; when `inverse` the scatter goes the other way.
void permute_copy(const Tensor& in, Tensor& out, const std::vector<std::size_t>& perm, bool inverse) {
  const Shape& in_shape = inverse ? out.shape() : in.shape();
  const auto in_strides = strides_of(in_shape);
  const std::size_t rank = perm.size();
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[perm[i]];
  std::vector<std::size_t> src_stride(rank);
  for (std::size_t i = 0; i < rank; ++i) src_stride[i] = in_strides[perm[i]];
  std::vector<std::size_t> idx(rank, 0);
  const std::size_t n = in.size();
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    if (inverse) {
      out[src] = in[flat];
    } else {
      out[flat] = in[src];
    }
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      src += src_stride[d];
      if (idx[d] < out_shape[d]) break;
      src -= src_stride[d] * out_shape[d];
      idx[d] = 0;
    }
  }
}

}  // namespace

Var permute(const Var& x, const std::vector<std::size_t>& perm) {
  const Shape& in_shape = x.shape();
  if (perm.size() != in_shape.size()) throw DimensionError("permute: rank mismatch for " + to_string(in_shape));
  std::vector<bool> seen(perm.size(), false);
  Shape out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= perm.size() || seen[perm[i]]) throw DimensionError("permute: invalid permutation");
    seen[perm[i]] = true;
    out_shape[i] = in_shape[perm[i]];
  }
  Tensor out(out_shape);
  permute_copy(x.value(), out, perm, false);
  Node* nx = &x.node();
  return record(std::move(out), {x}, [nx, perm](const Tensor& g, const Tensor&) {
    Tensor gx(nx->value.shape());
    permute_copy(g, gx, perm, true);
    nx->accumulate(std::move(gx));
  });
}

Var matmul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + to_string(sa) + " and " + to_string(sb));
  }
  const std::size_t m = sa[sa.size() - 2], k = sa.back(), kb = sb[sb.size() - 2], n = sb.back();
  if (k != kb) throw DimensionError("matmul: inner extents differ for " + to_string(sa) + " and " + to_string(sb));

  const std::size_t la = sa.size() - 2, lb = sb.size() - 2, lo = std::max(la, lb);
  Shape batch(lo), ba(lo, 1), bb(lo, 1);
  for (std::size_t i = 0; i < la; ++i) ba[lo - la + i] = sa[i];
  for (std::size_t i = 0; i < lb; ++i) bb[lo - lb + i] = sb[i];
  for (std::size_t i = 0; i < lo; ++i) {
    if (ba[i] != bb[i] && ba[i] != 1 && bb[i] != 1) {
      throw DimensionError("matmul: batch extents not broadcastable for " + to_string(sa) + " and " + to_string(sb));
    }
    batch[i] = std::max(ba[i], bb[i]);
  }
  const std::size_t nbatch = numel(batch.empty() ? Shape{1} : batch);
  std::vector<std::size_t> ia(nbatch), ib(nbatch);
  {
    std::vector<std::size_t> idx(lo, 0);
    for (std::size_t f = 0; f < nbatch; ++f) {
      std::size_t oa = 0, ob = 0;
      for (std::size_t d = 0; d < lo; ++d) {
        oa = oa * ba[d] + (ba[d] == 1 ? 0 : idx[d]);
        ob = ob * bb[d] + (bb[d] == 1 ? 0 : idx[d]);
      }
      ia[f] = oa;
      ib[f] = ob;
      for (std::size_t d = lo; d-- > 0;) {
        if (++idx[d] < batch[d]) break;
        idx[d] = 0;
      }
    }
  }
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out(out_shape);
  const auto em = static_cast<Eigen::Index>(m), ek = static_cast<Eigen::Index>(k), en = static_cast<Eigen::Index>(n);
  for (std::size_t f = 0; f < nbatch; ++f) {
    ConstMatrixMap A(a.value().data() + ia[f] * m * k, em, ek);
    ConstMatrixMap B(b.value().data() + ib[f] * k * n, ek, en);
    MatrixMap C(out.data() + f * m * n, em, en);
    C.noalias() = A * B;
  }
  Node* na = &a.node();
  Node* nb = &b.node();
  return record(std::move(out), {a, b}, [=](const Tensor& g, const Tensor&) {
    const double fault = gradient_fault_scale("matmul");
    Tensor ga, gb;
    if (na->requires_grad) ga = Tensor(na->value.shape());
    if (nb->requires_grad) gb = Tensor(nb->value.shape());
    for (std::size_t f = 0; f < nbatch; ++f) {
      ConstMatrixMap G(g.data() + f * m * n, em, en);
      if (na->requires_grad) {
        ConstMatrixMap B(nb->value.data() + ib[f] * k * n, ek, en);
        MatrixMap GA(ga.data() + ia[f] * m * k, em, ek);
        GA.noalias() += G * B.transpose();
      }
      if (nb->requires_grad) {
        ConstMatrixMap A(na->value.data() + ia[f] * m * k, em, ek);
        MatrixMap GB(gb.data() + ib[f] * k * n, ek, en);
        GB.noalias() += A.transpose() * G;
      }
    }
    if (na->requires_grad) na->accumulate(scaled(std::move(ga), fault));
    if (nb->requires_grad) nb->accumulate(std::move(gb));
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const Shape& sx = x.shape();
  if (w.rank() != 2) throw DimensionError("linear: weight must be rank 2, got " + to_string(w.shape()));
  const std::size_t in = w.dim(0), out_dim = w.dim(1);
  if (sx.back() != in) {
    throw DimensionError("linear: input " + to_string(sx) + " does not match weight " + to_string(w.shape()));
  }
  if (b.defined() && b.shape() != Shape{out_dim}) {
    throw DimensionError("linear: bias " + to_string(b.shape()) + " does not match weight " + to_string(w.shape()));
  }
  const std::size_t rows = x.value().size() / in;
  Shape out_shape = sx;
  out_shape.back() = out_dim;
  Tensor out(out_shape);
  const auto er = static_cast<Eigen::Index>(rows), ei = static_cast<Eigen::Index>(in),
             eo = static_cast<Eigen::Index>(out_dim);
  MatrixMap Y(out.data(), er, eo);
  Y.noalias() = ConstMatrixMap(x.value().data(), er, ei) * ConstMatrixMap(w.value().data(), ei, eo);
  if (b.defined()) Y.rowwise() += ConstVectorMap(b.value().data(), eo).transpose();
  Node* nx = &x.node();
  Node* nw = &w.node();
  Node* nb = b.defined() ? &b.node() : nullptr;
  std::vector<Var> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  return record(std::move(out), std::move(inputs), [=](const Tensor& g, const Tensor&) {
    const double fault = gradient_fault_scale("linear");
    ConstMatrixMap G(g.data(), er, eo);
    if (nx->requires_grad) {
      Tensor gx(nx->value.shape());
      MatrixMap(gx.data(), er, ei).noalias() = G * ConstMatrixMap(nw->value.data(), ei, eo).transpose();
      nx->accumulate(std::move(gx));
    }
    if (nw->requires_grad) {
      Tensor gw(nw->value.shape());
      MatrixMap(gw.data(), ei, eo).noalias() = ConstMatrixMap(nx->value.data(), er, ei).transpose() * G;
      nw->accumulate(scaled(std::move(gw), fault));
    }
    if (nb && nb->requires_grad) {
      Tensor gb({static_cast<std::size_t>(eo)});
      VectorMap(gb.data(), eo) = G.colwise().sum().transpose();
      nb->accumulate(std::move(gb));
    }
  });
}

namespace {

struct ConvGeometry {
  std::size_t batch, channels, height, width, out_channels, kh, kw, stride, pad, out_h, out_w;
  std::size_t patch() const { return channels * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// cols[(c*kh + i)*kw + j, oy*out_w + ox] = x[c, oy*s - p + i, ox*s - p + j]
void im2col(const double* img, const ConvGeometry& g, double* cols) {
  const std::size_t P = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = cols + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
          double* dst = row + oy * g.out_w;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = img + (c * g.height + static_cast<std::size_t>(y)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t xx =
                static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.width)) ? 0.0 : src[xx];
          }
        }
      }
    }
  }
}

void col2im(const double* cols, const ConvGeometry& g, double* img) {
  const std::size_t P = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = cols + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) continue;
          double* dst = img + (c * g.height + static_cast<std::size_t>(y)) * g.width;
          const double* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t xx =
                static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
            if (xx >= 0 && xx < static_cast<std::ptrdiff_t>(g.width)) dst[xx] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, std::size_t stride, std::size_t pad) {
  if (x.rank() != 4 || w.rank() != 4) {
    throw DimensionError("conv2d: expected rank-4 input and weight, got " + to_string(x.shape()) + " and " +
                         to_string(w.shape()));
  }
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  ConvGeometry geo{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), stride, pad, 0, 0};
  if (w.dim(1) != geo.channels) {
    throw DimensionError("conv2d: input " + to_string(x.shape()) + " does not match weight " + to_string(w.shape()));
  }
  if (geo.kh > geo.height + 2 * pad || geo.kw > geo.width + 2 * pad) {
    throw DimensionError("conv2d: kernel " + to_string(w.shape()) + " larger than padded input " +
                         to_string(x.shape()));
  }
  if (b.defined() && b.shape() != Shape{geo.out_channels}) {
    throw DimensionError("conv2d: bias " + to_string(b.shape()) + " does not match weight " + to_string(w.shape()));
  }
  geo.out_h = (geo.height + 2 * pad - geo.kh) / stride + 1;
  geo.out_w = (geo.width + 2 * pad - geo.kw) / stride + 1;

  const auto eo = static_cast<Eigen::Index>(geo.out_channels);
  const auto ek = static_cast<Eigen::Index>(geo.patch());
  const auto ep = static_cast<Eigen::Index>(geo.positions());
  const std::size_t in_img = geo.channels * geo.height * geo.width;
  const std::size_t out_img = geo.out_channels * geo.positions();

  Tensor out({geo.batch, geo.out_channels, geo.out_h, geo.out_w});
  ConstMatrixMap W(w.value().data(), eo, ek);
  RowMatrix cols(geo.pointwise() ? 0 : ek, geo.pointwise() ? 0 : ep);
  for (std::size_t n = 0; n < geo.batch; ++n) {
    const double* img = x.value().data() + n * in_img;
    MatrixMap Y(out.data() + n * out_img, eo, ep);
    if (geo.pointwise()) {
      Y.noalias() = W * ConstMatrixMap(img, ek, ep);
    } else {
      im2col(img, geo, cols.data());
      Y.noalias() = W * cols;
    }
    if (b.defined()) Y.colwise() += ConstVectorMap(b.value().data(), eo);
  }

  Node* nx = &x.node();
  Node* nw = &w.node();
  Node* nb = b.defined() ? &b.node() : nullptr;
  std::vector<Var> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  return record(std::move(out), std::move(inputs), [=](const Tensor& g, const Tensor&) {
    const double fault = gradient_fault_scale("conv2d");
    ConstMatrixMap Wm(nw->value.data(), eo, ek);
    Tensor gx, gw, gb;
    if (nx->requires_grad) gx = Tensor(nx->value.shape());
    if (nw->requires_grad) gw = Tensor(nw->value.shape());
    if (nb && nb->requires_grad) gb = Tensor(nb->value.shape());
    RowMatrix cols_b(geo.pointwise() ? 0 : ek, geo.pointwise() ? 0 : ep);
    RowMatrix dcols(geo.pointwise() ? 0 : ek, geo.pointwise() ? 0 : ep);
    for (std::size_t n = 0; n < geo.batch; ++n) {
      ConstMatrixMap G(g.data() + n * out_img, eo, ep);
      const double* img = nx->value.data() + n * in_img;
      if (!gw.empty()) {
        MatrixMap GW(gw.data(), eo, ek);
        if (geo.pointwise()) {
          GW.noalias() += G * ConstMatrixMap(img, ek, ep).transpose();
        } else {
          im2col(img, geo, cols_b.data());
          GW.noalias() += G * cols_b.transpose();
        }
      }
      if (!gx.empty()) {
        if (geo.pointwise()) {
          MatrixMap(gx.data() + n * in_img, ek, ep).noalias() = Wm.transpose() * G;
        } else {
          dcols.noalias() = Wm.transpose() * G;
          col2im(dcols.data(), geo, gx.data() + n * in_img);
        }
      }
      if (!gb.empty()) VectorMap(gb.data(), eo) += G.rowwise().sum();
    }
    if (!gx.empty()) nx->accumulate(std::move(gx));
    if (!gw.empty()) nw->accumulate(scaled(std::move(gw), fault));
    if (!gb.empty()) nb->accumulate(std::move(gb));
  });
}

Var maxpool2d(const Var& x, std::size_t k, std::size_t stride, std::size_t pad) {
  if (x.rank() != 4) throw DimensionError("maxpool2d: expected rank-4 input, got " + to_string(x.shape()));
  if (k < 1 || stride < 1) throw DimensionError("maxpool2d: kernel and stride must be >= 1");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (k > H + 2 * pad || k > W + 2 * pad) {
    throw DimensionError("maxpool2d: window " + std::to_string(k) + " exceeds input " + to_string(x.shape()));
  }
  const std::size_t Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
  Tensor out({N, C, Ho, Wo});
  // Flat source index of each maximum; npos marks a padding cell.
  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> argmax(out.size(), npos);
  const auto& v = x.value();
  for (std::size_t plane = 0; plane < N * C; ++plane) {
    const std::size_t base = plane * H * W;
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = npos;
        for (std::size_t i = 0; i < k; ++i) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * stride + i) - static_cast<std::ptrdiff_t>(pad);
          for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(ox * stride + j) - static_cast<std::ptrdiff_t>(pad);
            const bool inside = y >= 0 && y < static_cast<std::ptrdiff_t>(H) && xx >= 0 &&
                                xx < static_cast<std::ptrdiff_t>(W);
            const std::size_t idx = inside ? base + static_cast<std::size_t>(y) * W + static_cast<std::size_t>(xx) : npos;
            const double val = inside ? v[idx] : 0.0;
            if (val > best) {
              best = val;
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (plane * Ho + oy) * Wo + ox;
        out[o] = best;
        argmax[o] = best_idx;
      }
    }
  }
  Node* nx = &x.node();
  return record(std::move(out), {x}, [nx, argmax = std::move(argmax)](const Tensor& g, const Tensor&) {
    Tensor gx(nx->value.shape());
    for (std::size_t o = 0; o < g.size(); ++o) {
      if (argmax[o] != npos) gx[argmax[o]] += g[o];
    }
    nx->accumulate(std::move(gx));
  });
}

Var global_avgpool(const Var& x) {
  if (x.rank() != 4) throw DimensionError("global_avgpool: expected rank-4 input, got " + to_string(x.shape()));
  const std::size_t N = x.dim(0), C = x.dim(1), S = x.dim(2) * x.dim(3);
  Tensor out({N, C});
  for (std::size_t p = 0; p < N * C; ++p) {
    double acc = 0.0;
    const double* src = x.value().data() + p * S;
    for (std::size_t i = 0; i < S; ++i) acc += src[i];
    out[p] = acc / static_cast<double>(S);
  }
  Node* nx = &x.node();
  return record(std::move(out), {x}, [nx, S](const Tensor& g, const Tensor&) {
    Tensor gx(nx->value.shape());
    const double inv = 1.0 / static_cast<double>(S);
    for (std::size_t p = 0; p < g.size(); ++p) std::fill_n(gx.data() + p * S, S, g[p] * inv);
    nx->accumulate(std::move(gx));
  });
}

Var softmax(const Var& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis);
  Tensor out = x.value();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double* base = out.data() + o * s.len * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < s.len; ++l) mx = std::max(mx, base[l * s.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        base[l * s.inner] = std::exp(base[l * s.inner] - mx);
        z += base[l * s.inner];
      }
      for (std::size_t l = 0; l < s.len; ++l) base[l * s.inner] /= z;
    }
  }
  Node* nx = &x.node();
  return record(std::move(out), {x}, [nx, s](const Tensor& g, const Tensor& y) {
    const double fault = gradient_fault_scale("softmax");
    Tensor gx(nx->value.shape());
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        double dot = 0.0;
        for (std::size_t l = 0; l < s.len; ++l) dot += g[base + l * s.inner] * y[base + l * s.inner];
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t idx = base + l * s.inner;
          gx[idx] = fault * y[idx] * (g[idx] - dot);
        }
      }
    }
    nx->accumulate(std::move(gx));
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const std::size_t D = x.shape().back();
  if (gamma.shape() != Shape{D} || beta.shape() != Shape{D}) {
    throw DimensionError("layer_norm: affine parameters must have shape [" + std::to_string(D) + "]");
  }
  const std::size_t rows = x.value().size() / D;
  Tensor out(x.shape());
  std::vector<double> inv_std(rows);
  Tensor xhat(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = x.value().data() + r * D;
    double mu = 0.0;
    for (std::size_t d = 0; d < D; ++d) mu += src[d];
    mu /= static_cast<double>(D);
    double var = 0.0;
    for (std::size_t d = 0; d < D; ++d) var += (src[d] - mu) * (src[d] - mu);
    var /= static_cast<double>(D);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t d = 0; d < D; ++d) {
      const double h = (src[d] - mu) * inv_std[r];
      xhat[r * D + d] = h;
      out[r * D + d] = h * gamma.value()[d] + beta.value()[d];
    }
  }
  Node* nx = &x.node();
  Node* ng = &gamma.node();
  Node* nb = &beta.node();
  return record(std::move(out), {x, gamma, beta},
                [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Tensor& g, const Tensor&) {
                  const double fault = gradient_fault_scale("layer_norm");
                  Tensor gx, gg, gbeta;
                  if (nx->requires_grad) gx = Tensor(nx->value.shape());
                  if (ng->requires_grad) gg = Tensor({D});
                  if (nb->requires_grad) gbeta = Tensor({D});
                  const double invD = 1.0 / static_cast<double>(D);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t d = 0; d < D; ++d) {
                      const double gh = g[r * D + d] * ng->value[d];
                      s1 += gh;
                      s2 += gh * xhat[r * D + d];
                      if (!gg.empty()) gg[d] += g[r * D + d] * xhat[r * D + d];
                      if (!gbeta.empty()) gbeta[d] += g[r * D + d];
                    }
                    if (gx.empty()) continue;
                    for (std::size_t d = 0; d < D; ++d) {
                      const double gh = g[r * D + d] * ng->value[d];
                      gx[r * D + d] = fault * inv_std[r] * (gh - invD * s1 - xhat[r * D + d] * invD * s2);
                    }
                  }
                  if (!gx.empty()) nx->accumulate(std::move(gx));
                  if (!gg.empty()) ng->accumulate(std::move(gg));
                  if (!gbeta.empty()) nb->accumulate(std::move(gbeta));
                });
}

Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, Mode mode) {
  if (x.rank() != 4) throw DimensionError("batchnorm2d: expected rank-4 input, got " + to_string(x.shape()));
  const std::size_t N = x.dim(0), C = x.dim(1), S = x.dim(2) * x.dim(3);
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C}) {
    throw DimensionError("batchnorm2d: affine parameters must have shape [" + std::to_string(C) + "] for input " +
                         to_string(x.shape()));
  }
  const double M = static_cast<double>(N * S);
  const auto& v = x.value();
  std::vector<double> mu(C, 0.0), inv_std(C, 0.0);
  if (mode == Mode::kTrain) {
    std::vector<double> var(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* src = v.data() + (n * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) acc += src[i];
      }
      mu[c] = acc / M;
      double sq = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* src = v.data() + (n * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) sq += (src[i] - mu[c]) * (src[i] - mu[c]);
      }
      var[c] = sq / M;
      inv_std[c] = 1.0 / std::sqrt(var[c] + state.eps);
    }
    const double unbias = M > 1.0 ? M / (M - 1.0) : 1.0;
    if (!state.initialized) {
      state.running_mean = Tensor({C}, mu);
      state.running_var = Tensor({C});
      for (std::size_t c = 0; c < C; ++c) state.running_var[c] = var[c] * unbias;
      state.initialized = true;
    } else {
      if (state.running_mean.shape() != Shape{C}) {
        throw DimensionError("batchnorm2d: running statistics do not match " + std::to_string(C) + " channels");
      }
      for (std::size_t c = 0; c < C; ++c) {
        state.running_mean[c] = state.momentum * state.running_mean[c] + (1.0 - state.momentum) * mu[c];
        state.running_var[c] = state.momentum * state.running_var[c] + (1.0 - state.momentum) * var[c] * unbias;
      }
    }
  } else {
    if (!state.initialized) throw ValidationError("batchnorm2d: eval mode before running statistics were initialized");
    if (state.running_mean.shape() != Shape{C}) {
      throw DimensionError("batchnorm2d: running statistics do not match " + std::to_string(C) + " channels");
    }
    for (std::size_t c = 0; c < C; ++c) {
      mu[c] = state.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
    }
  }

  Tensor out(x.shape());
  Tensor xhat(x.shape());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (n * C + c) * S;
      const double gm = gamma.value()[c], bt = beta.value()[c];
      for (std::size_t i = 0; i < S; ++i) {
        const double h = (v[off + i] - mu[c]) * inv_std[c];
        xhat[off + i] = h;
        out[off + i] = gm * h + bt;
      }
    }
  }
  Node* nx = &x.node();
  Node* ng = &gamma.node();
  Node* nb = &beta.node();
  const bool train = mode == Mode::kTrain;
  return record(std::move(out), {x, gamma, beta},
                [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Tensor& g, const Tensor&) {
                  const double fault = gradient_fault_scale("batchnorm2d");
                  std::vector<double> sum_g(C, 0.0), sum_gh(C, 0.0);
                  for (std::size_t n = 0; n < N; ++n) {
                    for (std::size_t c = 0; c < C; ++c) {
                      const std::size_t off = (n * C + c) * S;
                      for (std::size_t i = 0; i < S; ++i) {
                        sum_g[c] += g[off + i];
                        sum_gh[c] += g[off + i] * xhat[off + i];
                      }
                    }
                  }
                  if (nx->requires_grad) {
                    Tensor gx(nx->value.shape());
                    for (std::size_t n = 0; n < N; ++n) {
                      for (std::size_t c = 0; c < C; ++c) {
                        const std::size_t off = (n * C + c) * S;
                        const double k = fault * ng->value[c] * inv_std[c];
                        for (std::size_t i = 0; i < S; ++i) {
                          gx[off + i] = train ? k * (g[off + i] - sum_g[c] / M - xhat[off + i] * sum_gh[c] / M)
                                              : k * g[off + i];
                        }
                      }
                    }
                    nx->accumulate(std::move(gx));
                  }
                  if (ng->requires_grad) ng->accumulate(Tensor({C}, sum_gh));
                  if (nb->requires_grad) nb->accumulate(Tensor({C}, sum_g));
                });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) throw DimensionError("concat: incompatible shapes " + to_string(first) + " and " + to_string(s));
    out_shape[axis] += s[axis];
  }
  const auto so = split_axis(out_shape, axis);
  Tensor out(out_shape);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t chunk = p.dim(axis) * so.inner;
    for (std::size_t o = 0; o < so.outer; ++o) {
      std::copy_n(p.value().data() + o * chunk, chunk, out.data() + (o * so.len + off) * so.inner);
    }
    off += p.dim(axis);
  }
  std::vector<Node*> nodes;
  for (const auto& p : parts) nodes.push_back(&p.node());
  return record(std::move(out), parts, [nodes, offsets, so, axis](const Tensor& g, const Tensor&) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      Node* n = nodes[k];
      if (!n->requires_grad) continue;
      Tensor gp(n->value.shape());
      const std::size_t chunk = n->value.dim(axis) * so.inner;
      for (std::size_t o = 0; o < so.outer; ++o) {
        std::copy_n(g.data() + (o * so.len + offsets[k]) * so.inner, chunk, gp.data() + o * chunk);
      }
      n->accumulate(std::move(gp));
    }
  });
}

Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length) {
  const auto s = split_axis(x.shape(), axis);
  if (length == 0 || start + length > s.len) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of bounds for " + to_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  Tensor out(out_shape);
  const std::size_t chunk = length * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.value().data() + (o * s.len + start) * s.inner, chunk, out.data() + o * chunk);
  }
  Node* nx = &x.node();
  return record(std::move(out), {x}, [nx, s, start, chunk](const Tensor& g, const Tensor&) {
    Tensor gx(nx->value.shape());
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(g.data() + o * chunk, chunk, gx.data() + (o * s.len + start) * s.inner);
    }
    nx->accumulate(std::move(gx));
  });
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be [B, K], got " + to_string(logits.shape()));
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  if (labels.size() != B) {
    throw ValidationError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                          std::to_string(B));
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= K) {
      throw ValidationError("cross_entropy: label " + std::to_string(l) + " outside [0, " + std::to_string(K) + ")");
    }
  }
  Tensor probs({B, K});
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = logits.value().data() + b * K;
    const double mx = *std::max_element(row, row + K);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - mx);
    const double lse = mx + std::log(z);
    loss += lse - row[labels[b]];
    for (std::size_t k = 0; k < K; ++k) probs[b * K + k] = std::exp(row[k] - lse);
  }
  loss /= static_cast<double>(B);
  Node* nl = &logits.node();
  std::vector<int> targets(labels.begin(), labels.end());
  return record(Tensor::scalar(loss), {logits},
                [nl, B, K, probs = std::move(probs), targets = std::move(targets)](const Tensor& g, const Tensor&) {
                  Tensor gl = probs;
                  for (std::size_t b = 0; b < B; ++b) gl[b * K + static_cast<std::size_t>(targets[b])] -= 1.0;
                  gl.vec() *= g[0] / static_cast<double>(B);
                  nl->accumulate(std::move(gl));
                });
}

}  // namespace tsc
