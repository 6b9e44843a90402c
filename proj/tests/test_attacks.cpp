// Attack building blocks (normalization, projection, sampling, inner updates)
// and full method runs: reductions between methods, budget invariants,
// gradient-evaluation accounting, determinism, and batch persistence.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "meflab/attacks.hpp"
#include "meflab/dataset.hpp"
#include "meflab/train.hpp"

using namespace meflab;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Tensor<float> random_images(std::size_t n, std::uint64_t seed) {
  Tensor<float> x({n, 1, 16, 16});
  rng::Stream rs(seed);
  for (auto& v : x.data) v = static_cast<float>(rs.uniform(0, 1));
  return x;
}

bool same_floats(const Tensor<float>& a, const Tensor<float>& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data.data(), b.data.data(), sizeof(float) * a.size()) == 0;
}

// Loss 0.5 * sum a_i x_i^2 with diagonal curvature; every derived quantity
// has a closed form.
struct DiagQuad {
  std::vector<double> a;
  double loss(const Tensor<double>& x) const {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += 0.5 * a[i] * x[i] * x[i];
    return s;
  }
  Tensor<double> grad(const Tensor<double>& x) const {
    Tensor<double> g(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = a[i] * x[i];
    return g;
  }
};

struct LinearField {
  std::vector<double> c;
  double loss(const Tensor<double>& x) const {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += c[i] * x[i];
    return s;
  }
  Tensor<double> grad(const Tensor<double>& x) const {
    Tensor<double> g(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = c[i];
    return g;
  }
};

}  // namespace

TEST_CASE("l1_normalize: worked example, zero guard, and unit-L1 property") {
  Tensor<float> g({1, 1, 1, 2});
  g[0] = 3.0f;
  g[1] = -1.0f;
  Tensor<float> out = l1_normalize(g);
  REQUIRE(out[0] == Approx(0.75));
  REQUIRE(out[1] == Approx(-0.25));

  Tensor<float> z({1, 1, 1, 4}, 0.0f);
  Tensor<float> zn = l1_normalize(z);
  for (float v : zn.data) REQUIRE(v == 0.0f);

  Tensor<float> r = random_images(1, 7);
  for (auto& v : r.data) v -= 0.5f;
  Tensor<float> rn = l1_normalize(r);
  REQUIRE(l1_norm(rn) == Approx(1.0).epsilon(1e-6));
  for (std::size_t i = 0; i < r.size(); ++i)
    REQUIRE(static_cast<double>(rn[i]) * static_cast<double>(r[i]) >= 0.0);
}

TEST_CASE("project: feasible points unchanged, violations clamped to both constraints") {
  Tensor<float> x({1, 1, 1, 1}, 0.5f);
  Tensor<float> cand({1, 1, 1, 1}, 0.9f);
  REQUIRE(project(cand, x, 0.1)[0] == Approx(0.6));
  cand[0] = 0.55f;
  REQUIRE(project(cand, x, 0.1)[0] == 0.55f);

  Tensor<float> xs = random_images(2, 11);
  Tensor<float> cs = random_images(2, 12);
  for (auto& v : cs.data) v = v * 3.0f - 1.0f;  // deliberately out of range
  Tensor<float> ps = project(cs, xs, 0.2);
  REQUIRE(linf_dist(ps, xs) <= 0.2 + 1e-7);
  for (float v : ps.data) {
    REQUIRE(v >= 0.0f);
    REQUIRE(v <= 1.0f);
  }
  Tensor<float> wrong({1, 1, 1, 2});
  REQUIRE_THROWS_WITH(project(wrong, x, 0.1), ContainsSubstring("shape"));
  REQUIRE_THROWS_WITH(project(cand, x, -0.1), ContainsSubstring("negative"));
}

TEST_CASE("gradient-norm difference has a closed form on a diagonal quadratic") {
  const std::size_t n = 6;
  DiagQuad f;
  f.a = {0.5, 1.0, 2.0, 3.0, 0.25, 1.5};
  Tensor<double> x({1, 1, 1, n});
  for (std::size_t i = 0; i < n; ++i) x[i] = 0.3 + 0.1 * static_cast<double>(i);
  Tensor<double> got = grad_norm_fd<double>(f, x, 1e-3);
  // (grad(x + r u) - grad(x)) / r = A u exactly, u = A x / ||A x||
  double norm = 0;
  for (std::size_t i = 0; i < n; ++i) norm += f.a[i] * x[i] * f.a[i] * x[i];
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < n; ++i)
    REQUIRE(got[i] == Approx(f.a[i] * f.a[i] * x[i] / norm).epsilon(1e-9));
}

TEST_CASE("gradient-norm difference is exactly zero for constant and zero gradients") {
  LinearField lin;
  lin.c = {0.2, -0.4, 0.6, 0.0};
  Tensor<double> x({1, 1, 1, 4}, 0.5);
  Tensor<double> out = grad_norm_fd<double>(lin, x, 1e-2);
  for (double v : out.data) REQUIRE(v == 0.0);

  LinearField zero;
  zero.c = {0, 0, 0, 0};
  Tensor<double> z = grad_norm_fd<double>(zero, x, 1e-2);
  for (double v : z.data) REQUIRE(v == 0.0);

  REQUIRE_THROWS_WITH(grad_norm_fd<double>(lin, x, 0.0), ContainsSubstring("positive"));
}

TEST_CASE("model-level gradient-norm difference costs two evaluations and matches manual") {
  Model<float> m = build<float>(ModelSpec::make("mlp"), 21);
  Tensor<float> x = random_images(1, 22);
  std::uint64_t bp = 0;
  const double r = 1e-3;
  Tensor<float> got = grad_norm_fd(m, x, 2, r, &bp);
  REQUIRE(bp == 2);

  ModelField<float> f(m, 2);
  Tensor<float> g = f.grad(x);
  double n2 = l2_norm(g);
  REQUIRE(n2 > 1e-12);
  Tensor<float> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i)
    probe[i] = static_cast<float>(static_cast<double>(x[i]) +
                                  r * static_cast<double>(g[i]) / n2);
  Tensor<float> g2 = f.grad(probe);
  for (std::size_t i = 0; i < x.size(); ++i)
    REQUIRE(got[i] ==
            Approx((static_cast<double>(g2[i]) - static_cast<double>(g[i])) / r)
                .margin(1e-6));
}

TEST_CASE("neighborhood redraw replays exactly from the stream contract") {
  Tensor<float> x = random_images(1, 31);
  AttackState<float> st = make_attack_state(x, 1, 3);
  rng::Stream fill(32);
  for (auto& v : st.g_inner.data) v = static_cast<float>(fill.uniform(-1, 1));

  AttackConfig cfg;
  cfg.gamma = 0.3;
  cfg.xi = 0.1;
  for (const char* variant : {"as-algorithm", "descent"}) {
    cfg.ncs_sign_variant = variant;
    rng::Stream rs(77);
    Tensor<float> pts = ncs_step(st, cfg, rs);
    const double dir = std::string(variant) == "descent" ? -1.0 : 1.0;
    rng::Stream replay(77);
    const std::size_t sz = x.size();
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < sz; ++j) {
        double center = static_cast<double>(st.x_adv[j]);
        double v = center + replay.uniform(-cfg.gamma, cfg.gamma);
        v += dir * cfg.xi * static_cast<double>(sign_of(st.g_inner[i * sz + j]));
        v = clamp_val(v, center - cfg.gamma, center + cfg.gamma);
        float want = static_cast<float>(clamp_val(v, 0.0, 1.0));
        REQUIRE(pts[i * sz + j] == want);
      }
  }
}

TEST_CASE("neighborhood redraw stays inside the exploration ball and pixel range") {
  Tensor<float> x = random_images(1, 41);
  AttackState<float> st = make_attack_state(x, 0, 100);
  for (auto& v : st.g_inner.data) v = 1.0f;  // make the shift active everywhere
  AttackConfig cfg;
  cfg.gamma = 0.25;
  cfg.xi = 0.2;
  rng::Stream rs(42);
  for (int rep = 0; rep < 100; ++rep) {  // 100 x 100 slots = 10^4 draws
    Tensor<float> pts = ncs_step(st, cfg, rs);
    for (std::size_t i = 0; i < 100; ++i)
      for (std::size_t j = 0; j < x.size(); ++j) {
        double d = std::abs(static_cast<double>(pts[i * x.size() + j]) -
                            static_cast<double>(st.x_adv[j]));
        REQUIRE(d <= cfg.gamma + 1e-7);
        REQUIRE(pts[i * x.size() + j] >= 0.0f);
        REQUIRE(pts[i * x.size() + j] <= 1.0f);
      }
  }
}

TEST_CASE("neighborhood redraw with zero radius returns copies of the iterate") {
  Tensor<float> x = random_images(1, 51);
  AttackState<float> st = make_attack_state(x, 0, 4);
  for (auto& v : st.g_inner.data) v = -2.0f;
  AttackConfig cfg;
  cfg.gamma = 0.0;
  cfg.xi = 0.5;  // shift is active but the ball clamp cancels it
  rng::Stream rs(52);
  Tensor<float> pts = ncs_step(st, cfg, rs);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      REQUIRE(pts[i * x.size() + j] == st.x_adv[j]);
}

TEST_CASE("balanced inner update: zero momentum copies the normalization, recursion by hand") {
  Tensor<float> x({1, 1, 1, 4}, 0.5f);
  AttackState<float> st = make_attack_state(x, 0, 2);
  Tensor<float> g({2, 1, 1, 4});
  float vals[8] = {1.0f, -3.0f, 0.0f, 4.0f, 2.0f, 2.0f, -2.0f, -2.0f};
  std::copy(vals, vals + 8, g.data.begin());

  AttackConfig cfg;
  cfg.mu_inner = 0.0;
  gbo_update(st, g, cfg);
  // row L1 norms are 8 and 8
  REQUIRE(st.g_inner[0] == Approx(1.0 / 8.0));
  REQUIRE(st.g_inner[1] == Approx(-3.0 / 8.0));
  REQUIRE(st.g_inner[3] == Approx(4.0 / 8.0));
  REQUIRE(st.g_inner[4] == Approx(0.25));

  st = make_attack_state(x, 0, 2);
  cfg.mu_inner = 0.9;
  gbo_update(st, g, cfg);  // g_inner = ghat (state starts at zero)
  gbo_update(st, g, cfg);  // g_inner = ghat - mu * ghat
  REQUIRE(st.g_inner[0] == Approx((1.0 - 0.9) * 1.0 / 8.0).margin(1e-6));
  REQUIRE(st.g_inner[1] == Approx((1.0 - 0.9) * -3.0 / 8.0).margin(1e-6));
  REQUIRE(st.g_inner[4] == Approx((1.0 - 0.9) * 0.25).margin(1e-6));

  Tensor<float> wrong({3, 1, 1, 4});
  REQUIRE_THROWS_WITH(gbo_update(st, wrong, cfg), ContainsSubstring("shape"));
}

TEST_CASE("reverse inner search never returns a higher-loss point and respects its ball") {
  Model<float> m = build<float>(ModelSpec::make("mlp"), 61);
  AttackConfig cfg;
  cfg.xi = 0.1;
  cfg.inner_steps = 6;
  for (std::uint64_t s = 0; s < 4; ++s) {
    Tensor<float> x = random_images(1, 100 + s);
    ModelField<float> f(m, static_cast<int>(s % 4));
    std::uint64_t bp = 0;
    Tensor<float> p = rap_inner_point(m, x, static_cast<int>(s % 4), cfg, bp);
    REQUIRE(bp == 6);
    REQUIRE(static_cast<double>(f.loss(p)) <= static_cast<double>(f.loss(x)) + 1e-7);
    REQUIRE(linf_dist(p, x) <= cfg.xi + 1e-7);
  }
}

TEST_CASE("single-step and momentum-free reductions collapse to the same trajectories") {
  Model<float> m = build<float>(ModelSpec::make("mlp"), 71);
  Tensor<float> x = random_images(3, 72);
  std::vector<int> y{0, 1, 2};

  AttackConfig one;
  one.iters = 1;
  auto a_pgd1 = run_attack("pgd", m, x, y, one);
  auto a_fgsm = run_attack("fgsm", m, x, y, one);
  REQUIRE(same_floats(a_pgd1.adversarial, a_fgsm.adversarial));

  AttackConfig nomom;
  nomom.iters = 5;
  nomom.mu_outer = 0.0;
  auto a_pgd = run_attack("pgd", m, x, y, nomom);
  auto a_mi = run_attack("mi", m, x, y, nomom);
  auto a_ni = run_attack("ni", m, x, y, nomom);
  REQUIRE(same_floats(a_pgd.adversarial, a_mi.adversarial));
  REQUIRE(same_floats(a_pgd.adversarial, a_ni.adversarial));

  AttackConfig base;  // mu_outer stays at its default for the momentum family
  base.iters = 5;
  auto b_mi = run_attack("mi", m, x, y, base);

  AttackConfig raps = base;  // zero inner radius disables the reverse search
  raps.xi = 0.0;
  raps.late_start = 0;
  auto b_rap = run_attack("rap", m, x, y, raps);
  REQUIRE(same_floats(b_mi.adversarial, b_rap.adversarial));

  AttackConfig fems = base;  // one draw of radius zero is the iterate itself
  fems.samples = 1;
  fems.xi = 0.0;
  auto b_fem = run_attack("fem", m, x, y, fems);
  REQUIRE(same_floats(b_mi.adversarial, b_fem.adversarial));

  AttackConfig pgns = base;  // no penalty, no spread: every row is the plain gradient
  pgns.samples = 5;
  pgns.xi = 0.0;
  pgns.lambda = 0.0;
  auto b_pgn = run_attack("pgn", m, x, y, pgns);
  REQUIRE(same_floats(b_mi.adversarial, b_pgn.adversarial));
}

TEST_CASE("expected-loss methods coincide when the penalty weight is zero") {
  // Same stream, same draws: feed one sample through both inner loops directly.
  Model<float> m = build<float>(ModelSpec::make("mlp"), 81);
  Tensor<float> x = random_images(1, 82);
  AttackConfig cfg;
  cfg.iters = 4;
  cfg.samples = 6;
  cfg.xi = 0.08;
  cfg.lambda = 0.0;
  AttackConfig res = cfg.resolved();

  Tensor<float> adv_tpa, adv_fem;
  std::vector<TelemetryRow> t1, t2;
  std::uint64_t b1 = 0, b2 = 0;
  rng::Stream rs1(99), rs2(99);
  detail::attack_sample(Method::Tpa, m, res, x, 1, rs1, adv_tpa, t1, b1);
  detail::attack_sample(Method::Fem, m, res, x, 1, rs2, adv_fem, t2, b2);
  REQUIRE(same_floats(adv_tpa, adv_fem));
  REQUIRE(b1 == b2);
}

TEST_CASE("fully degenerate flat-minima search reduces to the single-step attack") {
  Model<float> m = build<float>(ModelSpec::make("cnn-b"), 91);
  Tensor<float> x = random_images(2, 92);
  std::vector<int> y{3, 0};
  AttackConfig cfg;
  cfg.iters = 1;
  cfg.samples = 1;
  cfg.gamma = 0.0;
  cfg.xi = 0.0;
  cfg.mu_outer = 0.0;
  auto a_mef = run_attack("mef", m, x, y, cfg);
  auto a_fgsm = run_attack("fgsm", m, x, y, cfg);
  REQUIRE(same_floats(a_mef.adversarial, a_fgsm.adversarial));
}

TEST_CASE("zero budget leaves inputs untouched and telemetry at the clean loss") {
  Model<float> m = build<float>(ModelSpec::make("mlp"), 101);
  Tensor<float> x = random_images(2, 102);
  std::vector<int> y{1, 2};
  AttackConfig cfg;
  cfg.eps = 0.0;
  cfg.iters = 5;
  cfg.samples = 3;
  for (const char* method : {"pgd", "mi", "mef", "pgn"}) {
    auto res = run_attack(method, m, x, y, cfg);
    REQUIRE(same_floats(res.adversarial, x));
    for (std::size_t i = 0; i < 2; ++i) {
      REQUIRE(res.telemetry[i].size() == 5);
      for (const TelemetryRow& row : res.telemetry[i]) {
        REQUIRE(row.loss == res.telemetry[i][0].loss);
        REQUIRE(row.update_cos_sim == 0.0);
      }
    }
  }
}

TEST_CASE("gradient-evaluation accounting matches each method's formula") {
  Model<float> m = build<float>(ModelSpec::make("mlp"), 111);
  Tensor<float> x = random_images(1, 112);
  std::vector<int> y{2};
  AttackConfig cfg;  // defaults: T=10, N=20, lambda=0.5, inner_steps=8

  auto bp_of = [&](const char* method, const AttackConfig& c) {
    auto res = run_attack(method, m, x, y, c);
    REQUIRE(res.telemetry[0].back().bp_count == res.bp_per_sample[0]);
    return res.bp_per_sample[0];
  };

  REQUIRE(bp_of("mef", cfg) == 200);   // N * T
  REQUIRE(bp_of("pgn", cfg) == 400);   // 2 * N * T with the penalty active
  REQUIRE(bp_of("pgd", cfg) == 10);    // T
  REQUIRE(bp_of("fgsm", cfg) == 1);
  REQUIRE(bp_of("mi", cfg) == 10);
  REQUIRE(bp_of("ni", cfg) == 10);
  REQUIRE(bp_of("fem", cfg) == 200);   // N * T
  REQUIRE(bp_of("tpa", cfg) == 400);   // 2 * N * T

  AttackConfig nopen = cfg;
  nopen.lambda = 0.0;
  REQUIRE(bp_of("pgn", nopen) == 200);  // penalty off: one stack per step
  REQUIRE(bp_of("tpa", nopen) == 200);

  // T + inner_steps * number of late iterations (late_start = T/4 = 2)
  REQUIRE(bp_of("rap", cfg) == 10 + 8 * 8);
}

TEST_CASE("every method respects the budget and pixel range and is deterministic") {
  Model<float> m = build<float>(ModelSpec::make("mlp"), 121);
  Tensor<float> x = random_images(2, 122);
  std::vector<int> y{0, 3};
  AttackConfig cfg;
  cfg.eps = 0.12;
  cfg.iters = 3;
  cfg.samples = 4;
  cfg.seed = 5;
  for (const char* method :
       {"pgd", "fgsm", "mi", "ni", "rap", "fem", "pgn", "tpa", "mef"}) {
    auto r1 = run_attack(method, m, x, y, cfg);
    REQUIRE(linf_dist(r1.adversarial, x) <= cfg.eps + 1e-7);
    for (float v : r1.adversarial.data) {
      REQUIRE(v >= 0.0f);
      REQUIRE(v <= 1.0f);
    }
    auto r2 = run_attack(method, m, x, y, cfg);
    REQUIRE(same_floats(r1.adversarial, r2.adversarial));
    REQUIRE(r1.bp_per_sample == r2.bp_per_sample);
  }
}

TEST_CASE("per-sample streams make results independent of batch composition") {
  Model<float> m = build<float>(ModelSpec::make("mlp"), 131);
  Tensor<float> x = random_images(3, 132);
  std::vector<int> y{1, 0, 2};
  AttackConfig cfg;
  cfg.iters = 3;
  cfg.samples = 5;
  cfg.seed = 9;
  auto full = run_attack("mef", m, x, y, cfg);

  Tensor<float> first({1, 1, 16, 16});
  std::copy(x.data.begin(), x.data.begin() + 256, first.data.begin());
  std::vector<int> y0{1};
  auto solo = run_attack("mef", m, first, y0, cfg);
  REQUIRE(std::memcmp(full.adversarial.data.data(), solo.adversarial.data.data(),
                      sizeof(float) * 256) == 0);
}

TEST_CASE("telemetry rows follow the conventions: indices, first-row similarity, monotone count") {
  Model<float> m = build<float>(ModelSpec::make("mlp"), 141);
  Tensor<float> x = random_images(1, 142);
  std::vector<int> y{1};
  AttackConfig cfg;
  cfg.iters = 6;
  cfg.samples = 4;
  auto res = run_attack("mef", m, x, y, cfg);
  const auto& rows = res.telemetry[0];
  REQUIRE(rows.size() == 6);
  REQUIRE(rows[0].update_cos_sim == 0.0);
  ModelField<float> f(m, 1);
  Tensor<float> x0({1, 1, 16, 16});
  std::copy(x.data.begin(), x.data.begin() + 256, x0.data.begin());
  REQUIRE(rows[0].loss == Approx(static_cast<double>(f.loss(x0))));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    REQUIRE(rows[t].t == t);
    if (t > 0) {
      REQUIRE(rows[t].bp_count >= rows[t - 1].bp_count);
      REQUIRE(rows[t].update_cos_sim >= -1.0);
      REQUIRE(rows[t].update_cos_sim <= 1.0);
    }
  }
}

TEST_CASE("a trained model's loss rises under the iterative white-box attack") {
  DatasetHandle<float> tr = gen_shapes16<float>(40, 0.05, 151, "train");
  DatasetHandle<float> te = gen_shapes16<float>(10, 0.05, 152, "test");
  auto [m, hist] =
      train(build<float>(ModelSpec::make("mlp"), 153), tr, te, TrainConfig{.epochs = 4});
  DatasetHandle<float> eval = gen_shapes16<float>(2, 0.05, 154, "eval");
  AttackConfig cfg;
  cfg.eps = 0.3;
  cfg.iters = 10;
  auto res = run_attack("pgd", m, eval.images, eval.labels, cfg);
  double first = 0, last = 0;
  for (const auto& rows : res.telemetry) {
    first += rows.front().loss;
    last += rows.back().loss;
  }
  REQUIRE(last > first);
}

TEST_CASE("adversarial batches round-trip through their container format") {
  AttackResult<float> res;
  res.adversarial = random_images(3, 161);
  res.seed = 424242;
  const std::string path = temp_path("atk_batch.mefa");
  save_adversarials(res, path);
  AdversarialBatch back = load_adversarials(path);
  REQUIRE(back.seed == 424242);
  REQUIRE(same_floats(back.advs, res.adversarial));

  std::string bytes = io::read_file(path);
  std::string bad = bytes;
  bad[0] = 'Z';
  io::write_file(path, bad);
  REQUIRE_THROWS_WITH(load_adversarials(path), ContainsSubstring("magic"));

  bad = bytes;
  bad[4] = 3;
  io::write_file(path, bad);
  REQUIRE_THROWS_WITH(load_adversarials(path), ContainsSubstring("version"));

  io::write_file(path, bytes.substr(0, bytes.size() - 4));
  REQUIRE_THROWS_WITH(load_adversarials(path), ContainsSubstring("truncated"));

  io::write_file(path, bytes + "xx");
  REQUIRE_THROWS_WITH(load_adversarials(path), ContainsSubstring("trailing"));
}

TEST_CASE("method names parse exhaustively and reject strangers") {
  for (const char* name :
       {"pgd", "fgsm", "mi", "ni", "rap", "fem", "pgn", "tpa", "mef"})
    REQUIRE_NOTHROW(method_from_string(name));
  REQUIRE_THROWS_WITH(method_from_string("cw"), ContainsSubstring("cw"));
}

TEST_CASE("attack configuration resolution fills derived values and validates") {
  AttackConfig cfg;
  cfg.eps = 0.2;
  cfg.iters = 8;
  AttackConfig r = cfg.resolved();
  REQUIRE(r.alpha == Approx(0.025));
  REQUIRE(r.gamma == Approx(0.4));
  REQUIRE(r.xi == Approx(0.03));
  REQUIRE(r.fd_step == Approx(0.0003));
  REQUIRE(r.late_start == 2);

  cfg = AttackConfig{};
  cfg.eps = -0.1;
  REQUIRE_THROWS_WITH(cfg.resolved(), ContainsSubstring("eps"));
  cfg = AttackConfig{};
  cfg.iters = 0;
  REQUIRE_THROWS_AS(cfg.resolved(), Error);
  cfg = AttackConfig{};
  cfg.samples = 0;
  REQUIRE_THROWS_AS(cfg.resolved(), Error);
  cfg = AttackConfig{};
  cfg.ncs_sign_variant = "sideways";
  REQUIRE_THROWS_WITH(cfg.resolved(), ContainsSubstring("sideways"));

  Model<float> m = build<float>(ModelSpec::make("mlp"), 171);
  Tensor<float> x = random_images(2, 172);
  std::vector<int> y{0};  // deliberately wrong count
  REQUIRE_THROWS_WITH(run_attack("pgd", m, x, y, AttackConfig{}),
                      ContainsSubstring("mismatch"));
}
