#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meflab/tensor.hpp"

namespace meflab {

enum class ConvPad { Valid, Same };

enum class OpKind : std::uint8_t {
  Leaf,
  MatMul,
  Conv2d,
  BiasAdd,
  Relu,
  MaxPool2,
  Flatten,
  SoftmaxCrossEntropy,
};

using NodeId = std::uint32_t;

// Record-and-replay graph over a fixed primitive set. Nodes are appended in
// evaluation order, so creation order is a topological order; every op's
// inputs precede it by construction. Values are immutable once recorded.
template <typename T>
class Tape {
 public:
  struct Node {
    OpKind kind;
    NodeId in0 = 0, in1 = 0;   // inputs where applicable
    Tensor<T> value;
    // op-specific state
    ConvPad pad = ConvPad::Valid;
    std::vector<std::uint32_t> argmax;  // MaxPool2: winning flat input index per output
    std::vector<int> labels;            // SoftmaxCrossEntropy
    std::vector<T> probs;               // SoftmaxCrossEntropy: cached softmax rows
  };

  NodeId leaf(Tensor<T> value) {
    Node n;
    n.kind = OpKind::Leaf;
    n.value = std::move(value);
    return push(std::move(n));
  }

  // [m,k] x [k,n] -> [m,n]
  NodeId matmul(NodeId a, NodeId b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    require(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(0),
            "matmul: incompatible shapes " + shape_str(av.shape) + " x " + shape_str(bv.shape));
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor<T> out({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) {
        T aik = av[i * k + kk];
        if (aik == T(0)) continue;
        const T* brow = &bv[kk * n];
        T* orow = &out[i * n];
        for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
      }
    Node node;
    node.kind = OpKind::MatMul;
    node.in0 = a;
    node.in1 = b;
    node.value = std::move(out);
    return push(std::move(node));
  }

  // x:[B,Ci,H,W], w:[Co,Ci,kh,kw], stride 1. Same padding requires odd kernels.
  NodeId conv2d(NodeId x, NodeId w, ConvPad pad) {
    const Tensor<T>& xv = value(x);
    const Tensor<T>& wv = value(w);
    require(xv.rank() == 4 && wv.rank() == 4, "conv2d: expects 4-d input and kernel");
    require(xv.dim(1) == wv.dim(1), "conv2d: channel mismatch, input " + shape_str(xv.shape) +
                                        " vs kernel " + shape_str(wv.shape));
    const std::size_t B = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const std::size_t Co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    std::size_t ph = 0, pw = 0, Ho, Wo;
    if (pad == ConvPad::Same) {
      require(kh % 2 == 1 && kw % 2 == 1, "conv2d: same padding needs odd kernel");
      ph = (kh - 1) / 2;
      pw = (kw - 1) / 2;
      Ho = H;
      Wo = W;
    } else {
      require(H >= kh && W >= kw, "conv2d: input smaller than kernel");
      Ho = H - kh + 1;
      Wo = W - kw + 1;
    }
    Tensor<T> out({B, Co, Ho, Wo});
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t co = 0; co < Co; ++co)
        for (std::size_t oy = 0; oy < Ho; ++oy)
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            T acc = 0;
            for (std::size_t ci = 0; ci < Ci; ++ci)
              for (std::size_t ky = 0; ky < kh; ++ky) {
                std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) -
                                    static_cast<std::ptrdiff_t>(ph);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) -
                                      static_cast<std::ptrdiff_t>(pw);
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                  acc += xv[((b * Ci + ci) * H + iy) * W + ix] *
                         wv[((co * Ci + ci) * kh + ky) * kw + kx];
                }
              }
            out[((b * Co + co) * Ho + oy) * Wo + ox] = acc;
          }
    Node node;
    node.kind = OpKind::Conv2d;
    node.in0 = x;
    node.in1 = w;
    node.pad = pad;
    node.value = std::move(out);
    return push(std::move(node));
  }

  // [B,F]+[F] or [B,C,H,W]+[C]; the only broadcast in the library.
  NodeId bias_add(NodeId x, NodeId b) {
    const Tensor<T>& xv = value(x);
    const Tensor<T>& bv = value(b);
    require(bv.rank() == 1, "bias_add: bias must be 1-d");
    Tensor<T> out = xv;
    if (xv.rank() == 2) {
      require(xv.dim(1) == bv.dim(0), "bias_add: feature mismatch " + shape_str(xv.shape) +
                                          " + " + shape_str(bv.shape));
      for (std::size_t i = 0; i < xv.dim(0); ++i)
        for (std::size_t j = 0; j < xv.dim(1); ++j) out[i * xv.dim(1) + j] += bv[j];
    } else if (xv.rank() == 4) {
      require(xv.dim(1) == bv.dim(0), "bias_add: channel mismatch " + shape_str(xv.shape) +
                                          " + " + shape_str(bv.shape));
      const std::size_t plane = xv.dim(2) * xv.dim(3);
      for (std::size_t b_i = 0; b_i < xv.dim(0); ++b_i)
        for (std::size_t c = 0; c < xv.dim(1); ++c) {
          T add = bv[c];
          T* p = &out[(b_i * xv.dim(1) + c) * plane];
          for (std::size_t k = 0; k < plane; ++k) p[k] += add;
        }
    } else {
      fail("bias_add: expects 2-d or 4-d input");
    }
    Node node;
    node.kind = OpKind::BiasAdd;
    node.in0 = x;
    node.in1 = b;
    node.value = std::move(out);
    return push(std::move(node));
  }

  // Subgradient at 0 is 0.
  NodeId relu(NodeId x) {
    Tensor<T> out = value(x);
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    Node node;
    node.kind = OpKind::Relu;
    node.in0 = x;
    node.value = std::move(out);
    return push(std::move(node));
  }

  // 2x2 window, stride 2; spatial dims must be even. Ties go to the first
  // element in scan order so replay is deterministic.
  NodeId maxpool2(NodeId x) {
    const Tensor<T>& xv = value(x);
    require(xv.rank() == 4, "maxpool2: expects 4-d input");
    require(xv.dim(2) % 2 == 0 && xv.dim(3) % 2 == 0,
            "maxpool2: spatial dims must be even, got " + shape_str(xv.shape));
    const std::size_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const std::size_t Ho = H / 2, Wo = W / 2;
    Tensor<T> out({B, C, Ho, Wo});
    std::vector<std::uint32_t> argmax(out.size());
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t oy = 0; oy < Ho; ++oy)
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            std::size_t base = (b * C + c) * H * W;
            std::size_t best = base + (2 * oy) * W + (2 * ox);
            T bestv = xv[best];
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                std::size_t idx = base + (2 * oy + dy) * W + (2 * ox + dx);
                if (xv[idx] > bestv) {
                  bestv = xv[idx];
                  best = idx;
                }
              }
            std::size_t o = ((b * C + c) * Ho + oy) * Wo + ox;
            out[o] = bestv;
            argmax[o] = static_cast<std::uint32_t>(best);
          }
    Node node;
    node.kind = OpKind::MaxPool2;
    node.in0 = x;
    node.value = std::move(out);
    node.argmax = std::move(argmax);
    return push(std::move(node));
  }

  // [B,...] -> [B, prod(rest)]
  NodeId flatten(NodeId x) {
    const Tensor<T>& xv = value(x);
    require(xv.rank() >= 2, "flatten: expects batch dimension");
    Tensor<T> out = xv.reshaped({xv.dim(0), xv.size() / xv.dim(0)});
    Node node;
    node.kind = OpKind::Flatten;
    node.in0 = x;
    node.value = std::move(out);
    return push(std::move(node));
  }

  // logits [B,K] -> per-sample loss [B]; log-sum-exp stabilized.
  NodeId softmax_cross_entropy(NodeId logits, std::span<const int> labels) {
    const Tensor<T>& zv = value(logits);
    require(zv.rank() == 2, "softmax_cross_entropy: logits must be 2-d");
    const std::size_t B = zv.dim(0), K = zv.dim(1);
    require(labels.size() == B, "softmax_cross_entropy: label count mismatch");
    Tensor<T> out({B});
    std::vector<T> probs(B * K);
    for (std::size_t b = 0; b < B; ++b) {
      int y = labels[b];
      require(y >= 0 && static_cast<std::size_t>(y) < K,
              "softmax_cross_entropy: label " + std::to_string(y) + " out of range for K=" +
                  std::to_string(K));
      const T* z = &zv[b * K];
      T m = z[0];
      for (std::size_t k = 1; k < K; ++k) m = std::max(m, z[k]);
      T sum = 0;
      for (std::size_t k = 0; k < K; ++k) {
        T e = std::exp(z[k] - m);
        probs[b * K + k] = e;
        sum += e;
      }
      for (std::size_t k = 0; k < K; ++k) probs[b * K + k] /= sum;
      out[b] = std::log(sum) - (z[y] - m);
    }
    Node node;
    node.kind = OpKind::SoftmaxCrossEntropy;
    node.in0 = logits;
    node.value = std::move(out);
    node.labels.assign(labels.begin(), labels.end());
    node.probs = std::move(probs);
    return push(std::move(node));
  }

  const Tensor<T>& value(NodeId id) const { return nodes_[id].value; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  // Gradients of sum_j <seed_j, out_j> with respect to each node in `wrt`.
  // One reverse sweep; a node used several times accumulates from every use.
  std::vector<Tensor<T>> backward(std::span<const NodeId> outputs,
                                  std::span<const Tensor<T>> seeds,
                                  std::span<const NodeId> wrt) const {
    require(outputs.size() == seeds.size(), "backward: seed count mismatch");
    std::vector<Tensor<T>> grads(nodes_.size());
    std::vector<bool> active(nodes_.size(), false);
    auto touch = [&](NodeId id) {
      if (!active[id]) {
        grads[id] = Tensor<T>::zeros_like(nodes_[id].value);
        active[id] = true;
      }
    };
    for (std::size_t j = 0; j < outputs.size(); ++j) {
      require(seeds[j].same_shape(nodes_[outputs[j]].value), "backward: seed shape mismatch");
      touch(outputs[j]);
      for (std::size_t i = 0; i < seeds[j].size(); ++i) grads[outputs[j]][i] += seeds[j][i];
    }
    for (std::size_t idx = nodes_.size(); idx-- > 0;) {
      if (!active[idx]) continue;
      const Node& n = nodes_[idx];
      const Tensor<T>& g = grads[idx];
      switch (n.kind) {
        case OpKind::Leaf:
          break;
        case OpKind::MatMul: {
          const Tensor<T>& av = nodes_[n.in0].value;
          const Tensor<T>& bv = nodes_[n.in1].value;
          const std::size_t m = av.dim(0), k = av.dim(1), nn = bv.dim(1);
          touch(n.in0);
          touch(n.in1);
          Tensor<T>& da = grads[n.in0];
          Tensor<T>& db = grads[n.in1];
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < nn; ++j) {
              T gij = g[i * nn + j];
              if (gij == T(0)) continue;
              for (std::size_t kk = 0; kk < k; ++kk) {
                da[i * k + kk] += gij * bv[kk * nn + j];
                db[kk * nn + j] += gij * av[i * k + kk];
              }
            }
          break;
        }
        case OpKind::Conv2d: {
          const Tensor<T>& xv = nodes_[n.in0].value;
          const Tensor<T>& wv = nodes_[n.in1].value;
          const std::size_t B = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
          const std::size_t Co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
          const std::size_t Ho = n.value.dim(2), Wo = n.value.dim(3);
          const std::size_t ph = n.pad == ConvPad::Same ? (kh - 1) / 2 : 0;
          const std::size_t pw = n.pad == ConvPad::Same ? (kw - 1) / 2 : 0;
          touch(n.in0);
          touch(n.in1);
          Tensor<T>& dx = grads[n.in0];
          Tensor<T>& dw = grads[n.in1];
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t co = 0; co < Co; ++co)
              for (std::size_t oy = 0; oy < Ho; ++oy)
                for (std::size_t ox = 0; ox < Wo; ++ox) {
                  T go = g[((b * Co + co) * Ho + oy) * Wo + ox];
                  if (go == T(0)) continue;
                  for (std::size_t ci = 0; ci < Ci; ++ci)
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                      std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) -
                                          static_cast<std::ptrdiff_t>(ph);
                      if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                      for (std::size_t kx = 0; kx < kw; ++kx) {
                        std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) -
                                            static_cast<std::ptrdiff_t>(pw);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                        dx[((b * Ci + ci) * H + iy) * W + ix] +=
                            go * wv[((co * Ci + ci) * kh + ky) * kw + kx];
                        dw[((co * Ci + ci) * kh + ky) * kw + kx] +=
                            go * xv[((b * Ci + ci) * H + iy) * W + ix];
                      }
                    }
                }
          break;
        }
        case OpKind::BiasAdd: {
          const Tensor<T>& xv = nodes_[n.in0].value;
          touch(n.in0);
          touch(n.in1);
          Tensor<T>& dx = grads[n.in0];
          Tensor<T>& db = grads[n.in1];
          for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
          if (xv.rank() == 2) {
            for (std::size_t i = 0; i < xv.dim(0); ++i)
              for (std::size_t j = 0; j < xv.dim(1); ++j) db[j] += g[i * xv.dim(1) + j];
          } else {
            const std::size_t plane = xv.dim(2) * xv.dim(3);
            for (std::size_t b = 0; b < xv.dim(0); ++b)
              for (std::size_t c = 0; c < xv.dim(1); ++c) {
                const T* p = &g[(b * xv.dim(1) + c) * plane];
                T acc = 0;
                for (std::size_t k = 0; k < plane; ++k) acc += p[k];
                db[c] += acc;
              }
          }
          break;
        }
        case OpKind::Relu: {
          const Tensor<T>& xv = nodes_[n.in0].value;
          touch(n.in0);
          Tensor<T>& dx = grads[n.in0];
          for (std::size_t i = 0; i < g.size(); ++i)
            if (xv[i] > T(0)) dx[i] += g[i];
          break;
        }
        case OpKind::MaxPool2: {
          touch(n.in0);
          Tensor<T>& dx = grads[n.in0];
          for (std::size_t i = 0; i < g.size(); ++i) dx[n.argmax[i]] += g[i];
          break;
        }
        case OpKind::Flatten: {
          touch(n.in0);
          Tensor<T>& dx = grads[n.in0];
          for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
          break;
        }
        case OpKind::SoftmaxCrossEntropy: {
          const std::size_t B = n.value.dim(0);
          const std::size_t K = nodes_[n.in0].value.dim(1);
          touch(n.in0);
          Tensor<T>& dz = grads[n.in0];
          for (std::size_t b = 0; b < B; ++b) {
            T gb = g[b];
            if (gb == T(0)) continue;
            for (std::size_t k = 0; k < K; ++k) {
              T p = n.probs[b * K + k];
              dz[b * K + k] += gb * (p - (static_cast<int>(k) == n.labels[b] ? T(1) : T(0)));
            }
          }
          break;
        }
      }
    }
    std::vector<Tensor<T>> out;
    out.reserve(wrt.size());
    for (NodeId id : wrt)
      out.push_back(active[id] ? std::move(grads[id]) : Tensor<T>::zeros_like(nodes_[id].value));
    return out;
  }

  // d(sum of out elements)/d(wrt)
  Tensor<T> backward_sum(NodeId out, NodeId wrt) const {
    Tensor<T> seed(nodes_[out].value.shape, T(1));
    NodeId outs[1] = {out};
    Tensor<T> seeds[1] = {std::move(seed)};
    NodeId w[1] = {wrt};
    return std::move(backward(outs, seeds, w)[0]);
  }

  // Recompute a node's value from leaf values; used to verify the record is
  // replayable and deterministic.
  Tensor<T> replay(NodeId target) const {
    Tape<T> copy;
    std::vector<NodeId> map(nodes_.size());
    for (std::size_t i = 0; i <= target; ++i) {
      const Node& n = nodes_[i];
      switch (n.kind) {
        case OpKind::Leaf: map[i] = copy.leaf(n.value); break;
        case OpKind::MatMul: map[i] = copy.matmul(map[n.in0], map[n.in1]); break;
        case OpKind::Conv2d: map[i] = copy.conv2d(map[n.in0], map[n.in1], n.pad); break;
        case OpKind::BiasAdd: map[i] = copy.bias_add(map[n.in0], map[n.in1]); break;
        case OpKind::Relu: map[i] = copy.relu(map[n.in0]); break;
        case OpKind::MaxPool2: map[i] = copy.maxpool2(map[n.in0]); break;
        case OpKind::Flatten: map[i] = copy.flatten(map[n.in0]); break;
        case OpKind::SoftmaxCrossEntropy:
          map[i] = copy.softmax_cross_entropy(map[n.in0], n.labels);
          break;
      }
    }
    return copy.value(map[target]);
  }

 private:
  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

}  // namespace meflab
