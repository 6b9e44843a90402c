#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "meflab/field.hpp"
#include "meflab/model.hpp"
#include "meflab/rng.hpp"

namespace meflab {

// Loss-landscape geometry around a point, estimated by Monte Carlo over the
// L-inf neighborhood (independent per-coordinate Uniform[-xi, xi] offsets).
// order 0 compares loss values, order 1 compares input gradients.
struct FlatnessEstimate {
  double value = 0;
  int order = 0;                // 0 | 1
  std::string mode;             // "average" | "worst" | "worst-neighborhood-average"
  double xi = 0;
  double gamma = 0;             // worst-neighborhood mode only
  std::size_t samples = 0;      // M
  std::size_t centers = 0;      // K, worst-neighborhood mode only
  double std_error = 0;         // average mode only
};

namespace detail {

template <typename T>
Tensor<T> uniform_ball_point(const Tensor<T>& center, double radius, rng::Stream& rs) {
  Tensor<T> out = center;
  if (radius > 0)
    for (T& v : out.data) v = static_cast<T>(static_cast<double>(v) + rs.uniform(-radius, radius));
  return out;
}

// The order-n deviation between x' and the reference point: |dJ| or ||dgrad||2.
template <typename T, typename F>
  requires LossField<F, T>
double deviation(const F& f, const Tensor<T>& probe, double loss0, const Tensor<T>& grad0,
                 int order) {
  if (order == 0) return std::abs(static_cast<double>(f.loss(probe)) - loss0);
  Tensor<T> g = f.grad(probe);
  return l2_dist(g, grad0);
}

}  // namespace detail

// Mean order-n deviation over M uniform draws from the xi-ball, with the
// standard error of the mean attached.
template <typename T, typename F>
  requires LossField<F, T>
FlatnessEstimate avg_flatness(const F& f, const Tensor<T>& x, double xi, int order,
                              std::size_t M, rng::Stream& rs) {
  require(xi >= 0, "avg_flatness: radius must be >= 0");
  require(order == 0 || order == 1, "avg_flatness: order must be 0 or 1");
  require(M >= 1, "avg_flatness: need at least one draw");
  double loss0 = order == 0 ? static_cast<double>(f.loss(x)) : 0.0;
  Tensor<T> grad0 = order == 1 ? f.grad(x) : Tensor<T>();
  double sum = 0, sumsq = 0;
  for (std::size_t m = 0; m < M; ++m) {
    Tensor<T> probe = detail::uniform_ball_point(x, xi, rs);
    double d = detail::deviation(f, probe, loss0, grad0, order);
    sum += d;
    sumsq += d * d;
  }
  FlatnessEstimate est;
  est.value = sum / static_cast<double>(M);
  est.order = order;
  est.mode = "average";
  est.xi = xi;
  est.samples = M;
  if (M > 1) {
    double var = (sumsq - sum * sum / static_cast<double>(M)) / static_cast<double>(M - 1);
    est.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(M));
  }
  return est;
}

// Max order-n deviation over M draws — a lower-bound estimate of the true
// supremum over the ball, monotone in M under a shared stream.
template <typename T, typename F>
  requires LossField<F, T>
FlatnessEstimate worst_flatness(const F& f, const Tensor<T>& x, double xi, int order,
                                std::size_t M, rng::Stream& rs) {
  require(xi >= 0, "worst_flatness: radius must be >= 0");
  require(order == 0 || order == 1, "worst_flatness: order must be 0 or 1");
  require(M >= 1, "worst_flatness: need at least one draw");
  double loss0 = order == 0 ? static_cast<double>(f.loss(x)) : 0.0;
  Tensor<T> grad0 = order == 1 ? f.grad(x) : Tensor<T>();
  double worst = 0;
  for (std::size_t m = 0; m < M; ++m) {
    Tensor<T> probe = detail::uniform_ball_point(x, xi, rs);
    worst = std::max(worst, detail::deviation(f, probe, loss0, grad0, order));
  }
  FlatnessEstimate est;
  est.value = worst;
  est.order = order;
  est.mode = "worst";
  est.xi = xi;
  est.samples = M;
  return est;
}

// Worst zeroth-order neighborhood average: the most loss-variable center
// within gamma of x, each center judged by its own xi-ball average.
template <typename T, typename F>
  requires LossField<F, T>
FlatnessEstimate wna_flatness(const F& f, const Tensor<T>& x, double gamma, double xi,
                              std::size_t K, std::size_t M, rng::Stream& rs) {
  require(gamma >= 0, "wna_flatness: center radius must be >= 0");
  require(K >= 1, "wna_flatness: need at least one center");
  double worst = 0;
  for (std::size_t k = 0; k < K; ++k) {
    Tensor<T> center = detail::uniform_ball_point(x, gamma, rs);
    FlatnessEstimate inner = avg_flatness(f, center, xi, 0, M, rs);
    worst = std::max(worst, inner.value);
  }
  FlatnessEstimate est;
  est.value = worst;
  est.order = 0;
  est.mode = "worst-neighborhood-average";
  est.xi = xi;
  est.gamma = gamma;
  est.samples = M;
  est.centers = K;
  return est;
}

// --- model-facing wrappers -------------------------------------------------

template <typename T>
FlatnessEstimate avg_flatness(const Model<T>& m, const Tensor<T>& x, int label, double xi,
                              int order, std::size_t M, rng::Stream& rs) {
  return avg_flatness(ModelField<T>(m, label), x, xi, order, M, rs);
}

template <typename T>
FlatnessEstimate worst_flatness(const Model<T>& m, const Tensor<T>& x, int label, double xi,
                                int order, std::size_t M, rng::Stream& rs) {
  return worst_flatness(ModelField<T>(m, label), x, xi, order, M, rs);
}

template <typename T>
FlatnessEstimate wna_flatness(const Model<T>& m, const Tensor<T>& x, int label, double gamma,
                              double xi, std::size_t K, std::size_t M, rng::Stream& rs) {
  return wna_flatness(ModelField<T>(m, label), x, gamma, xi, K, M, rs);
}

// --- transfer gap and its decomposition ------------------------------------

// Loss gap between two classifiers at the same perturbed input. Positive
// means the perturbation hurts the second model more than the first.
struct AtgRecord {
  double atg = 0;
  double surrogate_loss = 0;  // J(x+delta; F)
  double target_loss = 0;     // J(x+delta; F')
  double clean_surrogate = 0;
  double clean_target = 0;
};

template <typename T>
AtgRecord atg(const Model<T>& f, const Model<T>& fprime, const Tensor<T>& x,
              const Tensor<T>& delta, int label) {
  require(delta.same_shape(x), "atg: perturbation/input shape mismatch");
  Tensor<T> moved = x;
  for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += delta[i];
  ModelField<T> ff(f, label), fp(fprime, label);
  AtgRecord r;
  r.surrogate_loss = static_cast<double>(ff.loss(moved));
  r.target_loss = static_cast<double>(fp.loss(moved));
  r.clean_surrogate = static_cast<double>(ff.loss(x));
  r.clean_target = static_cast<double>(fp.loss(x));
  r.atg = r.target_loss - r.surrogate_loss;
  return r;
}

// One Monte Carlo draw of the triangle-inequality decomposition: the
// cross-model deviation at x is bounded by the two single-model deviations
// plus the cross-model deviation at the probe, so slack >= 0 up to float
// noise on every draw.
struct DecompositionCheck {
  double a = 0;      // ||D^n J(x';F)  - D^n J(x;F)||
  double b = 0;      // ||D^n J(x';F') - D^n J(x;F')||
  double c = 0;      // ||D^n J(x';F') - D^n J(x';F)||
  double t = 0;      // ||D^n J(x;F')  - D^n J(x;F)||
  double slack = 0;  // a + b + c - t
};

struct Theorem1Report {
  std::vector<DecompositionCheck> checks;
  double mean_a = 0;     // neighborhood deviation of the first model
  double mean_b = 0;     // neighborhood deviation of the second model
  double mean_c = 0;     // mean cross-model deviation over probes
  double t_term = 0;     // cross-model deviation at the center
  double bound_sum = 0;  // mean_a + mean_b + mean_c
};

template <typename T>
Theorem1Report theorem1_check(const Model<T>& f, const Model<T>& fprime, const Tensor<T>& x,
                              int label, double xi, int order, std::size_t M, rng::Stream& rs) {
  require(order == 0 || order == 1, "theorem1_check: order must be 0 or 1");
  require(M >= 1, "theorem1_check: need at least one draw");
  ModelField<T> ff(f, label), fp(fprime, label);

  double lf0 = 0, lp0 = 0;
  Tensor<T> gf0, gp0;
  if (order == 0) {
    lf0 = static_cast<double>(ff.loss(x));
    lp0 = static_cast<double>(fp.loss(x));
  } else {
    gf0 = ff.grad(x);
    gp0 = fp.grad(x);
  }

  Theorem1Report rep;
  rep.t_term = order == 0 ? std::abs(lp0 - lf0) : l2_dist(gp0, gf0);
  rep.checks.reserve(M);
  for (std::size_t m = 0; m < M; ++m) {
    Tensor<T> probe = detail::uniform_ball_point(x, xi, rs);
    DecompositionCheck ck;
    if (order == 0) {
      double lf = static_cast<double>(ff.loss(probe));
      double lp = static_cast<double>(fp.loss(probe));
      ck.a = std::abs(lf - lf0);
      ck.b = std::abs(lp - lp0);
      ck.c = std::abs(lp - lf);
    } else {
      Tensor<T> gf = ff.grad(probe);
      Tensor<T> gp = fp.grad(probe);
      ck.a = l2_dist(gf, gf0);
      ck.b = l2_dist(gp, gp0);
      ck.c = l2_dist(gp, gf);
    }
    ck.t = rep.t_term;
    ck.slack = ck.a + ck.b + ck.c - ck.t;
    rep.mean_a += ck.a;
    rep.mean_b += ck.b;
    rep.mean_c += ck.c;
    rep.checks.push_back(ck);
  }
  rep.mean_a /= static_cast<double>(M);
  rep.mean_b /= static_cast<double>(M);
  rep.mean_c /= static_cast<double>(M);
  rep.bound_sum = rep.mean_a + rep.mean_b + rep.mean_c;
  return rep;
}

// Cosine similarity between consecutive realized updates; zero-length
// updates contribute 0 by convention.
template <typename T>
double update_cos_similarity(const Tensor<T>& u_prev, const Tensor<T>& u_curr) {
  require(u_prev.same_shape(u_curr), "update_cos_similarity: shape mismatch");
  double dot = 0;
  for (std::size_t i = 0; i < u_prev.size(); ++i)
    dot += static_cast<double>(u_prev[i]) * static_cast<double>(u_curr[i]);
  double na = l2_norm(u_prev), nb = l2_norm(u_curr);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return clamp_val(dot / (na * nb), -1.0, 1.0);
}

// Which samples the model gets right on clean inputs; standard denominator
// restriction for success-rate reporting.
template <typename T>
std::vector<bool> correct_mask(const Model<T>& m, const Tensor<T>& images,
                               std::span<const int> labels) {
  require(images.dim(0) == labels.size(), "correct_mask: image/label count mismatch");
  std::vector<bool> mask(labels.size());
  const std::size_t chunk = 64;
  const std::size_t chw = images.size() / images.dim(0);
  for (std::size_t at = 0; at < labels.size(); at += chunk) {
    std::size_t b = std::min(chunk, labels.size() - at);
    Tensor<T> xb({b, images.dim(1), images.dim(2), images.dim(3)});
    std::copy(images.data.begin() + at * chw, images.data.begin() + (at + b) * chw,
              xb.data.begin());
    std::vector<int> pred = predict(m, xb);
    for (std::size_t i = 0; i < b; ++i) mask[at + i] = pred[i] == labels[at + i];
  }
  return mask;
}

// Attack success rate over the clean-correct subset: the fraction of those
// samples the model now misclassifies.
template <typename T>
double asr(const Model<T>& target, const Tensor<T>& adversarials, std::span<const int> labels,
           const std::vector<bool>& clean_correct) {
  require(adversarials.rank() == 4 && adversarials.dim(0) == labels.size(),
          "asr: batch/label mismatch");
  require(clean_correct.size() == labels.size(), "asr: mask size mismatch");
  std::size_t denom = 0;
  for (bool b : clean_correct) denom += b ? 1 : 0;
  require(denom > 0, "asr: no clean-correct samples to evaluate");
  std::vector<int> pred;
  {
    const std::size_t chunk = 64;
    const std::size_t chw = adversarials.size() / adversarials.dim(0);
    for (std::size_t at = 0; at < labels.size(); at += chunk) {
      std::size_t b = std::min(chunk, labels.size() - at);
      Tensor<T> xb({b, adversarials.dim(1), adversarials.dim(2), adversarials.dim(3)});
      std::copy(adversarials.data.begin() + at * chw,
                adversarials.data.begin() + (at + b) * chw, xb.data.begin());
      std::vector<int> p = predict(target, xb);
      pred.insert(pred.end(), p.begin(), p.end());
    }
  }
  std::size_t fooled = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (clean_correct[i] && pred[i] != labels[i]) ++fooled;
  return static_cast<double>(fooled) / static_cast<double>(denom);
}

// Loss deltas along D shared unit directions at a ladder of magnitudes;
// the standard "poke the landscape and look" visualization data.
struct LandscapeProfile {
  std::vector<double> magnitudes;
  std::size_t directions = 0;
  std::vector<std::vector<double>> deltas;  // [magnitude][direction]
  std::vector<double> mean_delta;           // per magnitude
};

template <typename T>
LandscapeProfile landscape_profile(const Model<T>& m, const Tensor<T>& x_adv, int label,
                                   const std::vector<double>& magnitudes, std::size_t D,
                                   rng::Stream& rs) {
  require(D >= 1, "landscape_profile: need at least one direction");
  require(!magnitudes.empty(), "landscape_profile: empty magnitude ladder");
  ModelField<T> field(m, label);
  const double loss0 = static_cast<double>(field.loss(x_adv));

  // Gaussian directions normalized onto the unit L2 sphere, drawn once and
  // reused across the whole magnitude ladder.
  std::vector<Tensor<T>> dirs;
  dirs.reserve(D);
  for (std::size_t d = 0; d < D; ++d) {
    Tensor<T> dir(x_adv.shape);
    double nrm2 = 0;
    for (T& v : dir.data) {
      double z = rs.normal();
      v = static_cast<T>(z);
      nrm2 += z * z;
    }
    double nrm = std::sqrt(nrm2);
    require(nrm > 0, "landscape_profile: degenerate direction draw");
    for (T& v : dir.data) v = static_cast<T>(static_cast<double>(v) / nrm);
    dirs.push_back(std::move(dir));
  }

  LandscapeProfile prof;
  prof.magnitudes = magnitudes;
  prof.directions = D;
  for (double mmag : magnitudes) {
    std::vector<double> row(D);
    double mean = 0;
    for (std::size_t d = 0; d < D; ++d) {
      Tensor<T> probe = x_adv;
      for (std::size_t i = 0; i < probe.size(); ++i)
        probe[i] = static_cast<T>(clamp_val(
            static_cast<double>(x_adv[i]) + mmag * static_cast<double>(dirs[d][i]), 0.0, 1.0));
      row[d] = static_cast<double>(field.loss(probe)) - loss0;
      mean += row[d];
    }
    prof.mean_delta.push_back(mean / static_cast<double>(D));
    prof.deltas.push_back(std::move(row));
  }
  return prof;
}

}  // namespace meflab
