#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "meflab/dataset.hpp"
#include "meflab/model.hpp"

namespace meflab {

struct TrainConfig {
  double lr = 0.05;
  std::size_t epochs = 10;
  std::size_t batch = 32;
  std::string optimizer = "sgd-momentum";  // "sgd" | "sgd-momentum"
  double momentum = 0.9;
  std::uint64_t seed = 1;

  void validate() const {
    // lr = 0 is deliberately admitted: a zero step is the cheapest possible
    // no-op baseline and pins down that nothing else mutates parameters.
    require(lr >= 0 && std::isfinite(lr), "TrainConfig: bad learning rate");
    require(epochs >= 1, "TrainConfig: epochs must be >= 1");
    require(batch >= 1, "TrainConfig: batch must be >= 1");
    require(optimizer == "sgd" || optimizer == "sgd-momentum",
            "TrainConfig: unknown optimizer '" + optimizer + "'");
    require(momentum >= 0 && momentum < 1, "TrainConfig: momentum must be in [0,1)");
  }
};

struct EpochStats {
  std::size_t epoch;  // 1-based
  double train_loss;  // mean over batches
  double train_acc;
  double test_acc;
};

template <typename T>
double accuracy(const Model<T>& m, const DatasetHandle<T>& ds) {
  return accuracy(m, ds.images, std::span<const int>(ds.labels));
}

namespace detail {

template <typename T>
Tensor<T> gather(const DatasetHandle<T>& ds, const std::vector<std::size_t>& idx,
                 std::size_t from, std::size_t count) {
  const std::size_t chw = ds.images.size() / ds.size();
  Tensor<T> out({count, ds.images.dim(1), ds.images.dim(2), ds.images.dim(3)});
  for (std::size_t i = 0; i < count; ++i)
    std::copy(ds.images.data.begin() + idx[from + i] * chw,
              ds.images.data.begin() + (idx[from + i] + 1) * chw, out.data.begin() + i * chw);
  return out;
}

}  // namespace detail

// Minibatch SGD, optionally with classical momentum (v <- mu*v + g,
// p <- p - lr*v). Epoch order is a seeded shuffle, so the whole run is a
// pure function of (model, data, cfg).
template <typename T>
std::pair<Model<T>, std::vector<EpochStats>> train(Model<T> model,
                                                   const DatasetHandle<T>& train_ds,
                                                   const DatasetHandle<T>& test_ds,
                                                   const TrainConfig& cfg) {
  cfg.validate();
  train_ds.validate(model.spec.classes);
  test_ds.validate(model.spec.classes);

  const bool use_momentum = cfg.optimizer == "sgd-momentum";
  std::vector<Tensor<T>> velocity;
  if (use_momentum)
    for (const Tensor<T>& p : model.params) velocity.push_back(Tensor<T>::zeros_like(p));

  rng::Stream rs(rng::mix(cfg.seed, rng::fnv1a("train")));
  std::vector<std::size_t> order(train_ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<EpochStats> history;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rs.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch) {
      std::size_t b = std::min(cfg.batch, order.size() - at);
      Tensor<T> xb = detail::gather(train_ds, order, at, b);
      std::vector<int> yb(b);
      for (std::size_t i = 0; i < b; ++i) yb[i] = train_ds.labels[order[at + i]];

      // Divergence surfaces either as a non-finite batch loss below or as a
      // non-finite forward pass once parameters blow up; both name the epoch.
      LossGraph<T> g = [&] {
        try {
          return forward_loss(model, xb, yb);
        } catch (const Error& e) {
          fail("train: epoch " + std::to_string(epoch) + ": " + e.what());
        }
      }();
      const Tensor<T>& lv = g.tape.value(g.loss);
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < lv.size(); ++i) batch_loss += static_cast<double>(lv[i]);
      batch_loss /= static_cast<double>(b);
      require(std::isfinite(batch_loss),
              "train: non-finite loss at epoch " + std::to_string(epoch));
      require(batch_loss < 1e30, "train: diverged (loss overflow) at epoch " +
                                     std::to_string(epoch));
      loss_sum += batch_loss;
      ++batches;

      Tensor<T> seed(lv.shape, T(1));
      NodeId outs[1] = {g.loss};
      Tensor<T> seeds[1] = {std::move(seed)};
      std::vector<Tensor<T>> grads = g.tape.backward(outs, seeds, g.params);
      const T scale = T(1) / static_cast<T>(b);
      for (std::size_t pi = 0; pi < model.params.size(); ++pi) {
        Tensor<T>& p = model.params[pi];
        Tensor<T>& gr = grads[pi];
        require(gr.all_finite(), "train: non-finite gradient at epoch " + std::to_string(epoch));
        if (use_momentum) {
          Tensor<T>& v = velocity[pi];
          for (std::size_t j = 0; j < p.size(); ++j) {
            v[j] = static_cast<T>(cfg.momentum) * v[j] + gr[j] * scale;
            p[j] -= static_cast<T>(cfg.lr) * v[j];
          }
        } else {
          for (std::size_t j = 0; j < p.size(); ++j)
            p[j] -= static_cast<T>(cfg.lr) * gr[j] * scale;
        }
      }
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / static_cast<double>(batches);
    try {  // parameters can blow up on the last update of the epoch
      st.train_acc = accuracy(model, train_ds);
      st.test_acc = accuracy(model, test_ds);
    } catch (const Error& e) {
      fail("train: epoch " + std::to_string(epoch) + ": " + e.what());
    }
    history.push_back(st);
  }

  model.meta.seed = cfg.seed;
  model.meta.epochs = cfg.epochs;
  model.meta.train_acc = history.back().train_acc;
  model.meta.test_acc = history.back().test_acc;
  model.meta.trained = true;
  return {std::move(model), std::move(history)};
}

// Transfer experiments require the two endpoints to be comparably good on
// clean data; otherwise success-rate differences say nothing.
template <typename T>
void check_alignment(const Model<T>& surrogate, const Model<T>& target,
                     double max_gap = 0.15) {
  require(surrogate.meta.trained && target.meta.trained,
          "alignment: both models must be trained");
  double gap = std::abs(surrogate.meta.test_acc - target.meta.test_acc);
  require(gap <= max_gap,
          "alignment: clean test accuracies differ by " + std::to_string(gap) +
              " (limit " + std::to_string(max_gap) +
              "); transfer comparison refused");
}

}  // namespace meflab
