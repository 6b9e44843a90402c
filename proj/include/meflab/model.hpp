#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meflab/rng.hpp"
#include "meflab/tape.hpp"

namespace meflab {

struct LayerDesc {
  enum class Kind { Dense, Conv, Relu, MaxPool2, Flatten };
  Kind kind;
  std::string name;         // parameterized layers only
  std::size_t in = 0;       // dense in-features / conv in-channels
  std::size_t out = 0;      // dense out-features / conv out-channels
  std::size_t k = 0;        // conv kernel side
  ConvPad pad = ConvPad::Valid;
};

struct ParamSpec {
  std::string name;
  Shape shape;
  std::size_t fan_in;
};

// Three fixed topologies sized for 16x16 grayscale inputs:
//   mlp    flatten -> dense(widths...) -> dense(K)
//   cnn-a  conv(same) -> pool -> conv(valid) -> dense(K)
//   cnn-b  conv(valid) -> pool -> dense(widths...) -> dense(K)
// The two CNNs differ from the MLP and from each other on purpose: transfer
// measurements need genuinely distinct architectures on both ends.
struct ModelSpec {
  std::string arch;  // "mlp" | "cnn-a" | "cnn-b"
  std::size_t in_c = 1, in_h = 16, in_w = 16;
  std::size_t classes = 4;
  std::vector<std::size_t> widths;    // hidden dense widths
  std::vector<std::size_t> channels;  // conv out-channels, in order
  std::vector<std::size_t> kernels;   // conv kernel sides, aligned with channels

  static ModelSpec make(const std::string& arch, std::size_t classes = 4) {
    ModelSpec s;
    s.arch = arch;
    s.classes = classes;
    if (arch == "mlp") {
      s.widths = {64, 32};
    } else if (arch == "cnn-a") {
      s.channels = {8, 16};
      s.kernels = {3, 3};
    } else if (arch == "cnn-b") {
      s.channels = {6};
      s.kernels = {5};
      s.widths = {32};
    } else {
      fail("ModelSpec: unknown architecture '" + arch + "'");
    }
    return s;
  }

  // Expands the descriptor into a concrete layer list, validating every
  // shape transition along the way.
  std::vector<LayerDesc> layers() const {
    require(classes >= 2, "ModelSpec: need at least 2 classes");
    require(in_c >= 1 && in_h >= 1 && in_w >= 1, "ModelSpec: bad input shape");
    std::vector<LayerDesc> out;
    std::size_t c = in_c, h = in_h, w = in_w;
    auto add_convs = [&]() {
      require(channels.size() == kernels.size(), "ModelSpec: channels/kernels length mismatch");
      for (std::size_t i = 0; i < channels.size(); ++i) {
        ConvPad pad = (arch == "cnn-a" && i == 0) ? ConvPad::Same : ConvPad::Valid;
        LayerDesc d{LayerDesc::Kind::Conv, "conv" + std::to_string(i + 1), c, channels[i],
                    kernels[i], pad};
        if (pad == ConvPad::Valid) {
          require(h >= kernels[i] && w >= kernels[i],
                  "ModelSpec: conv" + std::to_string(i + 1) + " kernel exceeds input");
          h = h - kernels[i] + 1;
          w = w - kernels[i] + 1;
        } else {
          require(kernels[i] % 2 == 1, "ModelSpec: same-padded conv needs odd kernel");
        }
        c = channels[i];
        out.push_back(std::move(d));
        out.push_back({LayerDesc::Kind::Relu, "", 0, 0, 0, ConvPad::Valid});
        if (i == 0 && (arch == "cnn-a" || arch == "cnn-b")) {
          require(h % 2 == 0 && w % 2 == 0, "ModelSpec: pool needs even spatial dims");
          out.push_back({LayerDesc::Kind::MaxPool2, "", 0, 0, 0, ConvPad::Valid});
          h /= 2;
          w /= 2;
        }
      }
    };
    std::size_t features = 0;
    if (arch == "mlp") {
      out.push_back({LayerDesc::Kind::Flatten, "", 0, 0, 0, ConvPad::Valid});
      features = c * h * w;
    } else if (arch == "cnn-a" || arch == "cnn-b") {
      add_convs();
      out.push_back({LayerDesc::Kind::Flatten, "", 0, 0, 0, ConvPad::Valid});
      features = c * h * w;
    } else {
      fail("ModelSpec: unknown architecture '" + arch + "'");
    }
    std::size_t d_idx = 0;
    for (std::size_t wdt : widths) {
      require(wdt >= 1, "ModelSpec: zero-width dense layer");
      out.push_back(
          {LayerDesc::Kind::Dense, "dense" + std::to_string(++d_idx), features, wdt, 0,
           ConvPad::Valid});
      out.push_back({LayerDesc::Kind::Relu, "", 0, 0, 0, ConvPad::Valid});
      features = wdt;
    }
    out.push_back({LayerDesc::Kind::Dense, "out", features, classes, 0, ConvPad::Valid});
    return out;
  }

  std::vector<ParamSpec> param_specs() const {
    std::vector<ParamSpec> out;
    for (const LayerDesc& d : layers()) {
      if (d.kind == LayerDesc::Kind::Dense) {
        out.push_back({d.name + ".w", Shape{d.in, d.out}, d.in});
        out.push_back({d.name + ".b", Shape{d.out}, d.in});
      } else if (d.kind == LayerDesc::Kind::Conv) {
        out.push_back({d.name + ".w", Shape{d.out, d.in, d.k, d.k}, d.in * d.k * d.k});
        out.push_back({d.name + ".b", Shape{d.out}, d.in * d.k * d.k});
      }
    }
    return out;
  }

  // Canonical one-line form; hashed into checkpoints so a loaded parameter
  // blob can never be attached to the wrong topology.
  std::string describe() const {
    auto join = [](const std::vector<std::size_t>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + std::to_string(v[i]);
      return s;
    };
    return arch + "|in=" + std::to_string(in_c) + "x" + std::to_string(in_h) + "x" +
           std::to_string(in_w) + "|k=" + std::to_string(classes) + "|widths=" + join(widths) +
           "|channels=" + join(channels) + "|kernels=" + join(kernels);
  }
};

struct TrainMeta {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  bool trained = false;
};

template <typename T>
struct Model {
  ModelSpec spec;
  std::vector<Tensor<T>> params;  // same order as spec.param_specs()
  TrainMeta meta;

  const Tensor<T>& param(const std::string& name) const {
    std::vector<ParamSpec> ps = spec.param_specs();
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (ps[i].name == name) return params[i];
    fail("Model: no parameter named '" + name + "'");
  }

  template <typename U>
  Model<U> cast() const {
    Model<U> m;
    m.spec = spec;
    m.meta = meta;
    m.params.reserve(params.size());
    for (const Tensor<T>& p : params) m.params.push_back(p.template cast<U>());
    return m;
  }
};

// Weights ~ Uniform[-sqrt(3)/sqrt(fan_in), +sqrt(3)/sqrt(fan_in)] (std is
// exactly 1/sqrt(fan_in)); biases zero. Fully determined by (spec, seed).
template <typename T = float>
Model<T> build(const ModelSpec& spec, std::uint64_t init_seed) {
  Model<T> m;
  m.spec = spec;
  m.meta.seed = init_seed;
  rng::Stream rs(rng::mix(init_seed, rng::fnv1a("param-init")));
  for (const ParamSpec& ps : spec.param_specs()) {
    Tensor<T> t(ps.shape);
    if (ps.name.ends_with(".w")) {
      double a = std::sqrt(3.0) / std::sqrt(static_cast<double>(ps.fan_in));
      for (T& v : t.data) v = static_cast<T>(rs.uniform(-a, a));
    }
    m.params.push_back(std::move(t));
  }
  return m;
}

template <typename T>
struct LossGraph {
  Tape<T> tape;
  NodeId input = 0;
  std::vector<NodeId> params;  // aligned with model.params
  NodeId logits = 0;
  NodeId loss = 0;  // per-sample vector [B]
};

// Records the whole forward pass for x:[B,C,H,W]; per-sample cross-entropy
// comes back through graph.loss. Gradients are then one backward() away.
template <typename T>
LossGraph<T> forward_loss(const Model<T>& m, const Tensor<T>& x, std::span<const int> y) {
  require(x.rank() == 4, "forward_loss: input must be [B,C,H,W], got " + shape_str(x.shape));
  require(x.dim(1) == m.spec.in_c && x.dim(2) == m.spec.in_h && x.dim(3) == m.spec.in_w,
          "forward_loss: input " + shape_str(x.shape) + " does not match model input " +
              std::to_string(m.spec.in_c) + "x" + std::to_string(m.spec.in_h) + "x" +
              std::to_string(m.spec.in_w));
  require(x.dim(0) == y.size(), "forward_loss: batch/label count mismatch");
  require(x.all_finite(), "forward_loss: non-finite input rejected");

  LossGraph<T> g;
  g.input = g.tape.leaf(x);
  std::vector<ParamSpec> pspecs = m.spec.param_specs();
  require(pspecs.size() == m.params.size(), "forward_loss: parameter count mismatch");
  g.params.reserve(m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    require(m.params[i].shape == pspecs[i].shape,
            "forward_loss: parameter '" + pspecs[i].name + "' has shape " +
                shape_str(m.params[i].shape) + ", spec wants " + shape_str(pspecs[i].shape));
    g.params.push_back(g.tape.leaf(m.params[i]));
  }

  NodeId cur = g.input;
  std::size_t pi = 0;
  for (const LayerDesc& d : m.spec.layers()) {
    try {
      switch (d.kind) {
        case LayerDesc::Kind::Dense:
          cur = g.tape.bias_add(g.tape.matmul(cur, g.params[pi]), g.params[pi + 1]);
          pi += 2;
          break;
        case LayerDesc::Kind::Conv:
          cur = g.tape.bias_add(g.tape.conv2d(cur, g.params[pi], d.pad), g.params[pi + 1]);
          pi += 2;
          break;
        case LayerDesc::Kind::Relu: cur = g.tape.relu(cur); break;
        case LayerDesc::Kind::MaxPool2: cur = g.tape.maxpool2(cur); break;
        case LayerDesc::Kind::Flatten: cur = g.tape.flatten(cur); break;
      }
    } catch (const Error& e) {
      std::string where = d.name.empty() ? "anonymous layer" : "layer '" + d.name + "'";
      fail("forward_loss: " + where + ": " + e.what());
    }
  }
  g.logits = cur;
  g.loss = g.tape.softmax_cross_entropy(g.logits, y);
  require(g.tape.value(g.loss).all_finite(), "forward_loss: non-finite loss");
  return g;
}

// d(sum_b loss_b)/dx
template <typename T>
Tensor<T> grad_input(const Model<T>& m, const Tensor<T>& x, std::span<const int> y) {
  LossGraph<T> g = forward_loss(m, x, y);
  Tensor<T> gi = g.tape.backward_sum(g.loss, g.input);
  require(gi.all_finite(), "grad_input: non-finite gradient");
  return gi;
}

// d(sum_b loss_b)/dparams, aligned with model.params.
template <typename T>
std::vector<Tensor<T>> grad_params(const Model<T>& m, const Tensor<T>& x,
                                   std::span<const int> y) {
  LossGraph<T> g = forward_loss(m, x, y);
  Tensor<T> seed(g.tape.value(g.loss).shape, T(1));
  NodeId outs[1] = {g.loss};
  Tensor<T> seeds[1] = {std::move(seed)};
  std::vector<Tensor<T>> grads = g.tape.backward(outs, seeds, g.params);
  for (const Tensor<T>& gr : grads)
    require(gr.all_finite(), "grad_params: non-finite gradient");
  return grads;
}

// Restriction to a named subset; layers left out of `names` are treated as
// frozen and simply don't appear in the result.
template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> grad_params(const Model<T>& m, const Tensor<T>& x,
                                                           std::span<const int> y,
                                                           std::span<const std::string> names) {
  std::vector<ParamSpec> pspecs = m.spec.param_specs();
  std::vector<Tensor<T>> all = grad_params(m, x, y);
  std::vector<std::pair<std::string, Tensor<T>>> out;
  for (const std::string& want : names) {
    bool found = false;
    for (std::size_t i = 0; i < pspecs.size(); ++i)
      if (pspecs[i].name == want) {
        out.emplace_back(want, std::move(all[i]));
        found = true;
        break;
      }
    require(found, "grad_params: no parameter named '" + want + "'");
  }
  return out;
}

// Argmax class per sample; ties resolve to the lowest index.
template <typename T>
std::vector<int> predict(const Model<T>& m, const Tensor<T>& x) {
  std::vector<int> dummy(x.dim(0), 0);
  LossGraph<T> g = forward_loss(m, x, dummy);
  const Tensor<T>& z = g.tape.value(g.logits);
  std::vector<int> out(z.dim(0));
  for (std::size_t b = 0; b < z.dim(0); ++b) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < z.dim(1); ++k)
      if (z[b * z.dim(1) + k] > z[b * z.dim(1) + best]) best = k;
    out[b] = static_cast<int>(best);
  }
  return out;
}

template <typename T>
double accuracy(const Model<T>& m, const Tensor<T>& images, std::span<const int> labels) {
  require(images.rank() == 4 && images.dim(0) == labels.size(),
          "accuracy: image/label shape mismatch");
  require(images.dim(0) > 0, "accuracy: empty dataset");
  const std::size_t n = images.dim(0), chw = images.size() / n;
  const std::size_t chunk = 64;  // bounds tape memory, result is chunk-invariant
  std::size_t hits = 0;
  for (std::size_t at = 0; at < n; at += chunk) {
    std::size_t b = std::min(chunk, n - at);
    Tensor<T> xb({b, images.dim(1), images.dim(2), images.dim(3)});
    std::copy(images.data.begin() + at * chw, images.data.begin() + (at + b) * chw,
              xb.data.begin());
    std::vector<int> pred = predict(m, xb);
    for (std::size_t i = 0; i < b; ++i)
      if (pred[i] == labels[at + i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

// Mean per-sample loss over a batch; forward only.
template <typename T>
double mean_loss(const Model<T>& m, const Tensor<T>& x, std::span<const int> y) {
  LossGraph<T> g = forward_loss(m, x, y);
  const Tensor<T>& l = g.tape.value(g.loss);
  double acc = 0.0;
  for (std::size_t b = 0; b < l.size(); ++b) acc += static_cast<double>(l[b]);
  return acc / static_cast<double>(l.size());
}

// J(., y; F) for one sample as a differentiable scalar field. Accepts a
// [C,H,W] or [1,C,H,W] point. Gradient evaluations are tallied into an
// optional external counter — this is the unit every cost comparison uses —
// while plain loss() evaluations are free.
template <typename T>
class ModelField {
 public:
  ModelField(const Model<T>& m, int label, std::uint64_t* grad_counter = nullptr)
      : model_(&m), labels_{label}, counter_(grad_counter) {}

  T loss(const Tensor<T>& x) const {
    LossGraph<T> g = forward_loss(*model_, batched(x), labels_);
    return g.tape.value(g.loss)[0];
  }

  Tensor<T> grad(const Tensor<T>& x) const {
    Tensor<T> gi = grad_input(*model_, batched(x), std::span<const int>(labels_));
    if (counter_) ++*counter_;
    return gi.reshaped(x.shape);
  }

  const Model<T>& model() const { return *model_; }
  int label() const { return labels_[0]; }

 private:
  Tensor<T> batched(const Tensor<T>& x) const {
    if (x.rank() == 4) {
      require(x.dim(0) == 1, "ModelField: expects a single sample");
      return x;
    }
    require(x.rank() == 3, "ModelField: point must be [C,H,W] or [1,C,H,W]");
    return x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)});
  }

  const Model<T>* model_;
  std::vector<int> labels_;
  std::uint64_t* counter_;
};

}  // namespace meflab
