#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "meflab/field.hpp"
#include "meflab/flatness.hpp"
#include "meflab/io.hpp"
#include "meflab/model.hpp"
#include "meflab/rng.hpp"

namespace meflab {

enum class Method { Pgd, Fgsm, Mi, Ni, Rap, Fem, Pgn, Tpa, Mef };

inline Method method_from_string(const std::string& s) {
  if (s == "pgd") return Method::Pgd;
  if (s == "fgsm") return Method::Fgsm;
  if (s == "mi") return Method::Mi;
  if (s == "ni") return Method::Ni;
  if (s == "rap") return Method::Rap;
  if (s == "fem") return Method::Fem;
  if (s == "pgn") return Method::Pgn;
  if (s == "tpa") return Method::Tpa;
  if (s == "mef") return Method::Mef;
  fail("unknown attack method '" + s + "'");
}

// One knob set covers every method; fields a method doesn't use are inert.
// Negative values mean "derive the documented default" and are filled in by
// resolved(). Desk-scale per-method presets (radii, penalty weights, inner
// schedules) are deliberately NOT baked in here — they live in config files
// and in the experiment definitions, where they can be revised without
// touching library semantics.
struct AttackConfig {
  std::string method = "mef";
  double eps = 16.0 / 255.0;  // L-inf budget in pixel units
  std::size_t iters = 10;     // T
  double alpha = -1;          // step size; <0 -> eps/T
  std::size_t samples = 20;   // N, neighborhood draws per iteration
  double gamma = -1;          // exploration radius; <0 -> 2*eps
  double xi = -1;             // neighborhood / inner radius; <0 -> 0.15*eps
  double mu_outer = 0.5;
  double mu_inner = 0.9;
  double lambda = 0.5;                                  // penalty weight (pgn/tpa)
  std::size_t inner_steps = 8;                          // rap
  std::size_t late_start = std::numeric_limits<std::size_t>::max();  // rap; max -> T/4
  double fd_step = -1;        // r for gradient-norm differences; <0 -> 0.01*xi
  std::uint64_t seed = 0;
  std::string ncs_sign_variant = "as-algorithm";  // | "descent"

  // eps = 0 is admitted (it must produce x_adv == x); every positive-radius
  // rule below then degenerates consistently to zero movement.
  AttackConfig resolved() const {
    AttackConfig r = *this;
    if (r.method == "fgsm") r.iters = 1;
    require(std::isfinite(r.eps) && r.eps >= 0, "AttackConfig: bad eps");
    require(r.iters >= 1, "AttackConfig: need at least one iteration");
    require(r.samples >= 1, "AttackConfig: need at least one sample slot");
    require(r.inner_steps >= 1, "AttackConfig: need at least one inner step");
    require(r.mu_outer >= 0 && r.mu_inner >= 0, "AttackConfig: negative momentum");
    require(r.lambda >= 0, "AttackConfig: negative penalty weight");
    require(r.ncs_sign_variant == "as-algorithm" || r.ncs_sign_variant == "descent",
            "AttackConfig: unknown ncs_sign_variant '" + r.ncs_sign_variant + "'");
    if (r.alpha < 0) r.alpha = r.eps / static_cast<double>(r.iters);
    require(std::isfinite(r.alpha) && r.alpha >= 0, "AttackConfig: bad alpha");
    if (r.gamma < 0) r.gamma = 2.0 * r.eps;
    if (r.xi < 0) r.xi = 0.15 * r.eps;
    if (r.fd_step < 0) r.fd_step = 0.01 * r.xi > 0 ? 0.01 * r.xi : 1e-3;
    require(r.fd_step > 0, "AttackConfig: fd_step must be positive");
    if (r.late_start == std::numeric_limits<std::size_t>::max()) r.late_start = r.iters / 4;
    return r;
  }
};

struct TelemetryRow {
  std::size_t t = 0;
  double loss = 0;             // surrogate loss at x_adv entering this iteration
  double update_cos_sim = 0;   // vs previous realized update; 0 at t=0
  std::uint64_t bp_count = 0;  // cumulative gradient evaluations for this sample
  double wall_ms = 0;          // elapsed since attack start (never serialized)
};

template <typename T>
struct AttackState {
  Tensor<T> x;        // clean sample [1,C,H,W]
  int y = 0;
  Tensor<T> x_adv;    // current iterate
  Tensor<T> g_outer;  // accumulated outer momentum [1,C,H,W]
  Tensor<T> g_inner;  // per-slot inner momentum [N,C,H,W]
  std::size_t t = 0;
  std::vector<TelemetryRow> telemetry;
  std::uint64_t bp = 0;
};

template <typename T>
struct AttackResult {
  Tensor<T> adversarial;  // [B,C,H,W]
  std::vector<std::vector<TelemetryRow>> telemetry;  // per sample
  AttackConfig config;    // resolved echo
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> bp_per_sample;
};

// g / ||g||_1 over the whole tensor; (near-)zero input maps to exact zeros
// rather than NaN.
template <typename T>
Tensor<T> l1_normalize(const Tensor<T>& g) {
  double s = l1_norm(g);
  Tensor<T> out = Tensor<T>::zeros_like(g);
  if (s < 1e-12) return out;
  for (std::size_t i = 0; i < g.size(); ++i)
    out[i] = static_cast<T>(static_cast<double>(g[i]) / s);
  return out;
}

// Clamp to the eps-ball around x, then to the valid pixel range.
template <typename T>
Tensor<T> project(const Tensor<T>& cand, const Tensor<T>& x, double eps) {
  require(cand.same_shape(x), "project: shape mismatch");
  require(eps >= 0, "project: negative budget");
  Tensor<T> out(cand.shape);
  for (std::size_t i = 0; i < cand.size(); ++i) {
    double v = clamp_val(static_cast<double>(cand[i]), static_cast<double>(x[i]) - eps,
                         static_cast<double>(x[i]) + eps);
    out[i] = static_cast<T>(clamp_val(v, 0.0, 1.0));
  }
  return out;
}

// One-sided directional difference (grad(x + r*u) - grad(x)) / r along the
// unit gradient direction u — a first-order stand-in for the gradient of
// ||grad J||_2. Returns zeros when the gradient is (near-)zero.
template <typename T, typename F>
  requires LossField<F, T>
Tensor<T> grad_norm_fd(const F& f, const Tensor<T>& x, double r) {
  require(r > 0, "grad_norm_fd: step must be positive");
  Tensor<T> g = f.grad(x);
  double n2 = l2_norm(g);
  if (n2 < 1e-12) return Tensor<T>::zeros_like(x);
  Tensor<T> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i)
    probe[i] = static_cast<T>(static_cast<double>(x[i]) +
                              r * static_cast<double>(g[i]) / n2);
  Tensor<T> g2 = f.grad(probe);
  Tensor<T> out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = static_cast<T>((static_cast<double>(g2[i]) - static_cast<double>(g[i])) / r);
  return out;
}

template <typename T>
Tensor<T> grad_norm_fd(const Model<T>& m, const Tensor<T>& x, int label, double r,
                       std::uint64_t* bp = nullptr) {
  ModelField<T> f(m, label, bp);
  return grad_norm_fd(f, x, r);
}

namespace detail {

template <typename T>
Tensor<T> sample_slice(const Tensor<T>& batch, std::size_t i) {
  const std::size_t chw = batch.size() / batch.dim(0);
  Tensor<T> out({1, batch.dim(1), batch.dim(2), batch.dim(3)});
  std::copy(batch.data.begin() + i * chw, batch.data.begin() + (i + 1) * chw,
            out.data.begin());
  return out;
}

// Gradient of summed loss over a stack of points that share one label;
// row i of the result is the gradient at point i. Each row is one
// backpropagation in the accounting.
template <typename T>
Tensor<T> stack_grad(const Model<T>& model, const Tensor<T>& pts, int label,
                     std::uint64_t& bp) {
  std::vector<int> ys(pts.dim(0), label);
  Tensor<T> g = grad_input(model, pts, ys);
  bp += pts.dim(0);
  return g;
}

// l1_normalize applied independently to each [C,H,W] row of a stack.
template <typename T>
Tensor<T> l1_normalize_rows(const Tensor<T>& g) {
  const std::size_t n = g.dim(0), sz = g.size() / n;
  Tensor<T> out = Tensor<T>::zeros_like(g);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < sz; ++j) s += std::abs(static_cast<double>(g[i * sz + j]));
    if (s < 1e-12) continue;
    for (std::size_t j = 0; j < sz; ++j)
      out[i * sz + j] = static_cast<T>(static_cast<double>(g[i * sz + j]) / s);
  }
  return out;
}

template <typename T>
double row_l2(const Tensor<T>& g, std::size_t i) {
  const std::size_t sz = g.size() / g.dim(0);
  double s = 0;
  for (std::size_t j = 0; j < sz; ++j) {
    double v = static_cast<double>(g[i * sz + j]);
    s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace detail

template <typename T>
AttackState<T> make_attack_state(const Tensor<T>& x, int y, std::size_t slots) {
  require(x.rank() == 4 && x.dim(0) == 1, "AttackState: expects a single [1,C,H,W] sample");
  require(slots >= 1, "AttackState: need at least one inner slot");
  AttackState<T> st;
  st.x = x;
  st.y = y;
  st.x_adv = x;
  st.g_outer = Tensor<T>::zeros_like(x);
  st.g_inner = Tensor<T>({slots, x.dim(1), x.dim(2), x.dim(3)});
  return st;
}

// Conditional neighborhood redraw: each slot gets a fresh uniform point in
// the gamma-ball around the current iterate, shifted xi along its remembered
// inner-momentum sign (+ under "as-algorithm", - under "descent"), then
// clamped back to the gamma-ball and the pixel range. Slots with zero inner
// momentum (e.g. at t=0) reduce to the plain uniform draw. Purely a
// sampling step — no gradient evaluations happen here.
template <typename T>
Tensor<T> ncs_step(const AttackState<T>& st, const AttackConfig& cfg, rng::Stream& rs) {
  const std::size_t n = st.g_inner.dim(0);
  const std::size_t sz = st.x_adv.size();
  require(st.g_inner.size() == n * sz, "ncs_step: slot/input shape mismatch");
  const double dir = cfg.ncs_sign_variant == "descent" ? -1.0 : 1.0;
  Tensor<T> pts({n, st.x_adv.dim(1), st.x_adv.dim(2), st.x_adv.dim(3)});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < sz; ++j) {
      double center = static_cast<double>(st.x_adv[j]);
      double v = center + (cfg.gamma > 0 ? rs.uniform(-cfg.gamma, cfg.gamma) : 0.0);
      v += dir * cfg.xi * static_cast<double>(sign_of(st.g_inner[i * sz + j]));
      v = clamp_val(v, center - cfg.gamma, center + cfg.gamma);
      pts[i * sz + j] = static_cast<T>(clamp_val(v, 0.0, 1.0));
    }
  return pts;
}

// Balanced inner update: slot-wise g_inner <- l1n(g) - mu_inner * g_inner,
// reusing the already-computed outer gradients (no extra evaluations).
template <typename T>
void gbo_update(AttackState<T>& st, const Tensor<T>& gradients, const AttackConfig& cfg) {
  require(gradients.same_shape(st.g_inner), "gbo_update: gradient stack shape mismatch");
  Tensor<T> ghat = detail::l1_normalize_rows(gradients);
  for (std::size_t i = 0; i < st.g_inner.size(); ++i)
    st.g_inner[i] = ghat[i] - static_cast<T>(cfg.mu_inner) * st.g_inner[i];
}

// The reverse-perturbation inner loop: signed gradient descent inside the
// xi-ball around x_adv, returning the lowest-loss iterate seen. The start
// point participates, so loss(result) <= loss(x_adv) always holds. Costs
// inner_steps backpropagations.
template <typename T>
Tensor<T> rap_inner_point(const Model<T>& model, const Tensor<T>& x_adv, int label,
                          const AttackConfig& cfg, std::uint64_t& bp) {
  require(x_adv.rank() == 4 && x_adv.dim(0) == 1, "rap_inner_point: expects [1,C,H,W]");
  ModelField<T> field(model, label);
  const std::size_t sz = x_adv.size();
  const double beta = cfg.xi / static_cast<double>(cfg.inner_steps);
  Tensor<T> p = x_adv;
  Tensor<T> best = p;
  double best_loss = static_cast<double>(field.loss(p));
  for (std::size_t k = 0; k < cfg.inner_steps; ++k) {
    std::vector<int> ys{label};
    Tensor<T> g = grad_input(model, p, ys);
    bp += 1;
    for (std::size_t j = 0; j < sz; ++j) {
      double v = static_cast<double>(p[j]) - beta * static_cast<double>(sign_of(g[j]));
      double c = static_cast<double>(x_adv[j]);
      p[j] = static_cast<T>(clamp_val(v, c - cfg.xi, c + cfg.xi));
    }
    double lp = static_cast<double>(field.loss(p));
    if (lp < best_loss) {
      best_loss = lp;
      best = p;
    }
  }
  return best;
}

namespace detail {

// Uniform per-coordinate draw around the iterate, one row per slot.
template <typename T>
Tensor<T> uniform_stack(const Tensor<T>& center, std::size_t n, double radius,
                        rng::Stream& rs) {
  const std::size_t sz = center.size();
  Tensor<T> pts({n, center.dim(1), center.dim(2), center.dim(3)});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < sz; ++j) {
      double v = static_cast<double>(center[j]);
      if (radius > 0) v += rs.uniform(-radius, radius);
      pts[i * sz + j] = static_cast<T>(v);
    }
  return pts;
}

// (grad(p_i + r*u_i) - grad(p_i)) / r for every row, reusing the first
// gradient stack; rows with (near-)zero gradients contribute exact zeros.
// Costs one extra backpropagation per row.
template <typename T>
Tensor<T> stack_grad_norm_fd(const Model<T>& model, const Tensor<T>& pts, const Tensor<T>& g1,
                             int label, double r, std::uint64_t& bp) {
  const std::size_t n = pts.dim(0), sz = pts.size() / n;
  Tensor<T> probes = pts;
  for (std::size_t i = 0; i < n; ++i) {
    double n2 = row_l2(g1, i);
    if (n2 < 1e-12) continue;  // probe stays at p_i; its difference is exactly zero
    for (std::size_t j = 0; j < sz; ++j)
      probes[i * sz + j] = static_cast<T>(static_cast<double>(pts[i * sz + j]) +
                                          r * static_cast<double>(g1[i * sz + j]) / n2);
  }
  Tensor<T> g2 = stack_grad(model, probes, label, bp);
  Tensor<T> fd(g1.shape);
  for (std::size_t i = 0; i < g1.size(); ++i)
    fd[i] = static_cast<T>((static_cast<double>(g2[i]) - static_cast<double>(g1[i])) / r);
  return fd;
}

// One full attack on a single sample. Every method shares the loop skeleton
// (telemetry -> direction -> sign step -> projection); they differ only in
// how the ascent direction is formed. `on_iterate`, when set, sees the
// projected iterate after each step; it must not mutate it.
template <typename T>
void attack_sample(Method method, const Model<T>& model, const AttackConfig& cfg,
                   const Tensor<T>& x, int label, rng::Stream& rs, Tensor<T>& adv_out,
                   std::vector<TelemetryRow>& telem_out, std::uint64_t& bp_out,
                   const std::function<void(std::size_t, const Tensor<T>&)>& on_iterate = {}) {
  const std::size_t sz = x.size();
  const std::size_t n = cfg.samples;
  ModelField<T> field(model, label);  // telemetry losses; forward-only

  AttackState<T> st = make_attack_state(x, label, n);
  Tensor<T> prev_update;
  const auto wall0 = std::chrono::steady_clock::now();

  for (std::size_t t = 0; t < cfg.iters; ++t) {
    st.t = t;
    const double loss_now = static_cast<double>(field.loss(st.x_adv));

    Tensor<T> dir;
    switch (method) {
      case Method::Pgd:
      case Method::Fgsm: {
        std::vector<int> ys{label};
        dir = grad_input(model, st.x_adv, ys);
        st.bp += 1;
        break;
      }
      case Method::Mi:
      case Method::Ni: {
        Tensor<T> at = st.x_adv;
        if (method == Method::Ni)  // Nesterov lookahead along the momentum
          for (std::size_t j = 0; j < sz; ++j)
            at[j] = static_cast<T>(static_cast<double>(st.x_adv[j]) +
                                   cfg.alpha * cfg.mu_outer *
                                       static_cast<double>(st.g_outer[j]));
        std::vector<int> ys{label};
        Tensor<T> ghat = l1_normalize(grad_input(model, at, ys));
        st.bp += 1;
        for (std::size_t j = 0; j < sz; ++j)
          st.g_outer[j] = static_cast<T>(cfg.mu_outer) * st.g_outer[j] + ghat[j];
        dir = st.g_outer;
        break;
      }
      case Method::Rap: {
        // Late-start reverse perturbation: find the worst (lowest-loss)
        // nearby point first, then ascend from there.
        Tensor<T> eval_at = st.x_adv;
        if (t >= cfg.late_start && cfg.xi > 0)
          eval_at = rap_inner_point(model, st.x_adv, label, cfg, st.bp);
        std::vector<int> ys{label};
        Tensor<T> ghat = l1_normalize(grad_input(model, eval_at, ys));
        st.bp += 1;
        for (std::size_t j = 0; j < sz; ++j)
          st.g_outer[j] = static_cast<T>(cfg.mu_outer) * st.g_outer[j] + ghat[j];
        dir = st.g_outer;
        break;
      }
      case Method::Fem: {
        Tensor<T> pts = uniform_stack(st.x_adv, n, cfg.xi, rs);
        Tensor<T> g = stack_grad(model, pts, label, st.bp);
        Tensor<T> mean_g = Tensor<T>::zeros_like(st.x_adv);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < sz; ++j)
            mean_g[j] += g[i * sz + j] / static_cast<T>(n);
        Tensor<T> ghat = l1_normalize(mean_g);
        for (std::size_t j = 0; j < sz; ++j)
          st.g_outer[j] = static_cast<T>(cfg.mu_outer) * st.g_outer[j] + ghat[j];
        dir = st.g_outer;
        break;
      }
      case Method::Pgn: {
        // Penalized neighborhood ascent: per sampled point, ascend the loss
        // while descending the local gradient norm, both read from the same
        // two gradient stacks (two backprops per point, exactly).
        Tensor<T> pts = uniform_stack(st.x_adv, n, cfg.xi, rs);
        Tensor<T> g1 = stack_grad(model, pts, label, st.bp);
        Tensor<T> d = g1;
        if (cfg.lambda > 0) {
          Tensor<T> fd = stack_grad_norm_fd(model, pts, g1, label, cfg.fd_step, st.bp);
          for (std::size_t i = 0; i < d.size(); ++i)
            d[i] = static_cast<T>(static_cast<double>(g1[i]) -
                                  cfg.lambda * static_cast<double>(fd[i]));
        }
        Tensor<T> dhat = l1_normalize_rows(d);
        Tensor<T> contrib = Tensor<T>::zeros_like(st.x_adv);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < sz; ++j)
            contrib[j] += dhat[i * sz + j] / static_cast<T>(n);
        for (std::size_t j = 0; j < sz; ++j)
          st.g_outer[j] = static_cast<T>(cfg.mu_outer) * st.g_outer[j] + contrib[j];
        dir = st.g_outer;
        break;
      }
      case Method::Tpa: {
        // Expected-loss ascent plus expected gradient-norm ascent over the
        // same neighborhood draws; lambda = 0 degrades to the plain
        // expected-loss direction.
        Tensor<T> pts = uniform_stack(st.x_adv, n, cfg.xi, rs);
        Tensor<T> g1 = stack_grad(model, pts, label, st.bp);
        Tensor<T> combined = g1;
        if (cfg.lambda > 0) {
          Tensor<T> fd = stack_grad_norm_fd(model, pts, g1, label, cfg.fd_step, st.bp);
          for (std::size_t i = 0; i < combined.size(); ++i)
            combined[i] = static_cast<T>(static_cast<double>(g1[i]) +
                                         cfg.lambda * static_cast<double>(fd[i]));
        }
        Tensor<T> mean_c = Tensor<T>::zeros_like(st.x_adv);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < sz; ++j)
            mean_c[j] += combined[i * sz + j] / static_cast<T>(n);
        Tensor<T> ghat = l1_normalize(mean_c);
        for (std::size_t j = 0; j < sz; ++j)
          st.g_outer[j] = static_cast<T>(cfg.mu_outer) * st.g_outer[j] + ghat[j];
        dir = st.g_outer;
        break;
      }
      case Method::Mef: {
        Tensor<T> pts = ncs_step(st, cfg, rs);
        Tensor<T> g = stack_grad(model, pts, label, st.bp);
        Tensor<T> ghat = l1_normalize_rows(g);
        gbo_update(st, g, cfg);
        Tensor<T> mean_hat = Tensor<T>::zeros_like(st.x_adv);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < sz; ++j)
            mean_hat[j] += ghat[i * sz + j] / static_cast<T>(n);
        for (std::size_t j = 0; j < sz; ++j)
          st.g_outer[j] = static_cast<T>(cfg.mu_outer) * st.g_outer[j] + mean_hat[j];
        dir = st.g_outer;
        break;
      }
    }

    Tensor<T> cand(x.shape);
    for (std::size_t j = 0; j < sz; ++j)
      cand[j] = static_cast<T>(static_cast<double>(st.x_adv[j]) +
                               cfg.alpha * static_cast<double>(sign_of(dir[j])));
    Tensor<T> next = project(cand, st.x, cfg.eps);

    Tensor<T> update(x.shape);
    for (std::size_t j = 0; j < sz; ++j) update[j] = next[j] - st.x_adv[j];
    const double cos =
        t == 0 ? 0.0 : update_cos_similarity(prev_update, update);

    TelemetryRow row;
    row.t = t;
    row.loss = loss_now;
    row.update_cos_sim = cos;
    row.bp_count = st.bp;
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - wall0)
                      .count();
    st.telemetry.push_back(row);

    prev_update = std::move(update);
    st.x_adv = std::move(next);
    if (on_iterate) on_iterate(t, st.x_adv);
  }

  adv_out = st.x_adv;
  telem_out = std::move(st.telemetry);
  bp_out = st.bp;
}

}  // namespace detail

// Optional per-iteration hook: (sample index, iteration t, projected iterate).
// Used by trajectory studies to track transfer success while an attack runs
// without paying for a second pass.
template <typename T>
using IterObserver = std::function<void(std::size_t, std::size_t, const Tensor<T>&)>;

// Uniform dispatch over a batch. Every sample runs on its own RNG stream
// derived from (seed, sample index, method), so results are independent of
// batch composition and of how callers schedule the work. The budget and
// pixel-range invariants are enforced on every returned sample.
template <typename T>
AttackResult<T> run_attack(const std::string& method_str, const Model<T>& model,
                           const Tensor<T>& batch, std::span<const int> labels,
                           const AttackConfig& cfg_in,
                           const IterObserver<T>& observe = {}) {
  Method method = method_from_string(method_str);
  AttackConfig cfg = cfg_in;
  cfg.method = method_str;
  cfg = cfg.resolved();
  require(batch.rank() == 4 && batch.dim(0) == labels.size(),
          "run_attack: batch/label mismatch");

  AttackResult<T> res;
  res.adversarial = Tensor<T>(batch.shape);
  res.config = cfg;
  res.seed = cfg.seed;
  const std::size_t chw = batch.size() / batch.dim(0);
  for (std::size_t i = 0; i < batch.dim(0); ++i) {
    Tensor<T> xi = detail::sample_slice(batch, i);
    rng::Stream rs(rng::cell_seed(cfg.seed, i, method_str));
    Tensor<T> adv;
    std::vector<TelemetryRow> telem;
    std::uint64_t bp = 0;
    std::function<void(std::size_t, const Tensor<T>&)> hook;
    if (observe)
      hook = [&observe, i](std::size_t t, const Tensor<T>& it) { observe(i, t, it); };
    detail::attack_sample(method, model, cfg, xi, labels[i], rs, adv, telem, bp, hook);

    require(linf_dist(adv, xi) <= cfg.eps + 1e-7,
            "run_attack: budget invariant violated on sample " + std::to_string(i));
    for (const T& v : adv.data)
      require(v >= T(0) && v <= T(1),
              "run_attack: pixel-range invariant violated on sample " + std::to_string(i));

    std::copy(adv.data.begin(), adv.data.end(), res.adversarial.data.begin() + i * chw);
    res.telemetry.push_back(std::move(telem));
    res.bp_per_sample.push_back(bp);
  }
  return res;
}

template <typename T>
AttackResult<T> pgd(const Model<T>& m, const Tensor<T>& x, std::span<const int> y,
                    const AttackConfig& cfg) {
  return run_attack("pgd", m, x, y, cfg);
}
template <typename T>
AttackResult<T> fgsm(const Model<T>& m, const Tensor<T>& x, std::span<const int> y,
                     const AttackConfig& cfg) {
  return run_attack("fgsm", m, x, y, cfg);
}
template <typename T>
AttackResult<T> mi(const Model<T>& m, const Tensor<T>& x, std::span<const int> y,
                   const AttackConfig& cfg) {
  return run_attack("mi", m, x, y, cfg);
}
template <typename T>
AttackResult<T> ni(const Model<T>& m, const Tensor<T>& x, std::span<const int> y,
                   const AttackConfig& cfg) {
  return run_attack("ni", m, x, y, cfg);
}
template <typename T>
AttackResult<T> rap(const Model<T>& m, const Tensor<T>& x, std::span<const int> y,
                    const AttackConfig& cfg) {
  return run_attack("rap", m, x, y, cfg);
}
template <typename T>
AttackResult<T> fem(const Model<T>& m, const Tensor<T>& x, std::span<const int> y,
                    const AttackConfig& cfg) {
  return run_attack("fem", m, x, y, cfg);
}
template <typename T>
AttackResult<T> pgn(const Model<T>& m, const Tensor<T>& x, std::span<const int> y,
                    const AttackConfig& cfg) {
  return run_attack("pgn", m, x, y, cfg);
}
template <typename T>
AttackResult<T> tpa(const Model<T>& m, const Tensor<T>& x, std::span<const int> y,
                    const AttackConfig& cfg) {
  return run_attack("tpa", m, x, y, cfg);
}
template <typename T>
AttackResult<T> mef(const Model<T>& m, const Tensor<T>& x, std::span<const int> y,
                    const AttackConfig& cfg) {
  return run_attack("mef", m, x, y, cfg);
}

// Adversarial batch container ("MEFA"): magic, u32 version, u32 rank,
// rank * u32 dims, f32 LE payload, trailing u64 seed.
template <typename T>
void save_adversarials(const AttackResult<T>& res, const std::string& path) {
  std::string out;
  out += "MEFA";
  io::put_u32le(out, 1u);
  io::put_u32le(out, static_cast<std::uint32_t>(res.adversarial.rank()));
  for (std::size_t d : res.adversarial.shape)
    io::put_u32le(out, static_cast<std::uint32_t>(d));
  for (const T& v : res.adversarial.data) io::put_f32le(out, static_cast<float>(v));
  io::put_u64le(out, res.seed);
  io::write_file(path, out);
}

struct AdversarialBatch {
  Tensor<float> advs;
  std::uint64_t seed = 0;
};

inline AdversarialBatch load_adversarials(const std::string& path) {
  std::string bytes = io::read_file(path);
  io::Reader r(bytes, "adversarial batch '" + path + "'");
  r.expect_magic("MEFA");
  std::uint32_t version = r.u32le();
  require(version == 1, "adversarial batch '" + path + "': unsupported version " +
                            std::to_string(version));
  std::uint32_t rank = r.u32le();
  require(rank >= 1 && rank <= 8, "adversarial batch '" + path + "': implausible rank");
  Shape shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) shape[i] = r.u32le();
  AdversarialBatch out;
  out.advs = Tensor<float>(shape);
  for (float& v : out.advs.data) v = r.f32le();
  out.seed = r.u64le();
  r.expect_end();
  require(out.advs.all_finite(), "adversarial batch '" + path + "': non-finite values");
  return out;
}

}  // namespace meflab
