// Differentiation-engine tests. Hand-computed oracles are derived inside each
// test before the library result is compared against them.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "meflab/field.hpp"
#include "meflab/model.hpp"
#include "meflab/rng.hpp"
#include "meflab/tape.hpp"

using namespace meflab;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

// x as a [1,n] row for matmul-based scalarization.
template <typename T>
Tensor<T> row(std::vector<T> v) {
  const std::size_t n = v.size();  // read before the move; arguments are unsequenced
  return Tensor<T>({1, n}, std::move(v));
}

}  // namespace

TEST_CASE("tensor basics: shape bookkeeping and norms") {
  Tensor<double> t({2, 3}, {1, -2, 3, -4, 5, -6});
  REQUIRE(t.size() == 6);
  REQUIRE(t.rank() == 2);
  REQUIRE(t.dim(1) == 3);
  REQUIRE(l1_norm(t) == Approx(21.0));
  REQUIRE(l2_norm(t) == Approx(std::sqrt(1.0 + 4 + 9 + 16 + 25 + 36)));
  Tensor<double> u = Tensor<double>::zeros_like(t);
  REQUIRE(linf_dist(t, u) == Approx(6.0));
  REQUIRE(sign_of(0.0) == 0.0);
  REQUIRE(sign_of(-3.5) == -1.0);
  REQUIRE(sign_of(2.0) == 1.0);
  // a single-element braced list binds to the fill overload, so spell out the
  // vector to hit the length check
  REQUIRE_THROWS_AS(Tensor<double>({2, 2}, std::vector<double>{1.0}), Error);
}

TEST_CASE("matmul forward and backward match hand-computed values") {
  // [1,2] x [2,2]: y = (1*5+2*7, 1*6+2*8) = (19, 22)
  Tape<double> tape;
  NodeId a = tape.leaf(row<double>({1, 2}));
  NodeId b = tape.leaf(Tensor<double>({2, 2}, {5, 6, 7, 8}));
  NodeId y = tape.matmul(a, b);
  REQUIRE(tape.value(y)[0] == Approx(19));
  REQUIRE(tape.value(y)[1] == Approx(22));

  // d(sum y)/da = row sums of b = (11, 15); d/db = a broadcast = (1,1,2,2)
  Tensor<double> seed({1, 2}, {1, 1});
  std::vector<NodeId> outs{y}, wrt{a, b};
  std::vector<Tensor<double>> seeds{seed};
  auto grads = tape.backward(outs, seeds, wrt);
  REQUIRE(grads[0][0] == Approx(11));
  REQUIRE(grads[0][1] == Approx(15));
  REQUIRE(grads[1][0] == Approx(1));
  REQUIRE(grads[1][2] == Approx(2));
}

TEST_CASE("shared node accumulates gradient from every use: d(x*x)/dx = 2x") {
  Tape<double> tape;
  NodeId x = tape.leaf(Tensor<double>({1, 1}, {3.0}));
  NodeId y = tape.matmul(x, x);  // scalar x squared, x used twice
  REQUIRE(tape.value(y)[0] == Approx(9.0));
  Tensor<double> g = tape.backward_sum(y, x);
  REQUIRE(g[0] == Approx(6.0));
}

TEST_CASE("conv2d valid matches a hand-convolved 3x3 example") {
  // input 3x3: 1..9, kernel 2x2: (1,0,0,1) -> out[i][j] = x[i][j] + x[i+1][j+1]
  Tape<double> tape;
  NodeId x = tape.leaf(Tensor<double>({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
  NodeId w = tape.leaf(Tensor<double>({1, 1, 2, 2}, {1, 0, 0, 1}));
  NodeId y = tape.conv2d(x, w, ConvPad::Valid);
  REQUIRE(tape.value(y).shape == std::vector<std::size_t>{1, 1, 2, 2});
  REQUIRE(tape.value(y)[0] == Approx(1 + 5));
  REQUIRE(tape.value(y)[1] == Approx(2 + 6));
  REQUIRE(tape.value(y)[2] == Approx(4 + 8));
  REQUIRE(tape.value(y)[3] == Approx(5 + 9));
  REQUIRE_THROWS_WITH(tape.conv2d(x, w, ConvPad::Same), ContainsSubstring("odd kernel"));
}

TEST_CASE("conv2d same padding preserves spatial dims and zero-pads") {
  Tape<double> tape;
  NodeId x = tape.leaf(Tensor<double>({1, 1, 2, 2}, {1, 2, 3, 4}));
  // 3x3 kernel that just picks the center -> identity under same padding
  NodeId w = tape.leaf(Tensor<double>({1, 1, 3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0}));
  NodeId y = tape.conv2d(x, w, ConvPad::Same);
  REQUIRE(tape.value(y).shape == std::vector<std::size_t>{1, 1, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(tape.value(y)[i] == Approx(tape.value(x)[i]));
}

TEST_CASE("maxpool2 takes the first maximum in scan order") {
  Tape<double> tape;
  NodeId x = tape.leaf(Tensor<double>({1, 1, 2, 4}, {5, 5, 1, 2, 3, 4, 2, 1}));
  NodeId y = tape.maxpool2(x);
  REQUIRE(tape.value(y).shape == std::vector<std::size_t>{1, 1, 1, 2});
  REQUIRE(tape.value(y)[0] == Approx(5));
  REQUIRE(tape.value(y)[1] == Approx(2));
  // gradient flows only to the first 5 in the tied window
  Tensor<double> g = tape.backward_sum(y, x);
  REQUIRE(g[0] == Approx(1));
  REQUIRE(g[1] == Approx(0));
  NodeId odd = tape.leaf(Tensor<double>({1, 1, 3, 2}, std::vector<double>(6, 0.0)));
  REQUIRE_THROWS_WITH(tape.maxpool2(odd), ContainsSubstring("even"));
}

TEST_CASE("relu uses subgradient 0 at the kink, consistently") {
  Tape<double> tape;
  NodeId x = tape.leaf(row<double>({-1.0, 0.0, 2.0}));
  NodeId r = tape.relu(x);
  NodeId ones = tape.leaf(Tensor<double>({3, 1}, {1, 1, 1}));
  NodeId y = tape.matmul(r, ones);
  Tensor<double> g1 = tape.backward_sum(y, x);
  Tensor<double> g2 = tape.backward_sum(y, x);
  REQUIRE(g1[0] == 0.0);
  REQUIRE(g1[1] == 0.0);  // exact kink -> 0
  REQUIRE(g1[2] == 1.0);
  for (std::size_t i = 0; i < 3; ++i) REQUIRE(g1[i] == g2[i]);
}

TEST_CASE("softmax cross-entropy on logits (1,0) with y=0 equals ln(1+e^-1)") {
  const double oracle = std::log(1.0 + std::exp(-1.0));  // ~0.31326
  Tape<double> tape;
  NodeId x = tape.leaf(row<double>({1.0, 0.0}));
  std::vector<int> y{0};
  NodeId loss = tape.softmax_cross_entropy(x, y);
  REQUIRE(tape.value(loss)[0] == Approx(oracle).epsilon(1e-12));
  REQUIRE(oracle == Approx(0.3133).margin(5e-5));
}

TEST_CASE("softmax cross-entropy is stable for extreme logits") {
  Tape<double> tape;
  NodeId x = tape.leaf(row<double>({1000.0, 0.0}));
  std::vector<int> y0{0}, y1{1};
  REQUIRE(tape.value(tape.softmax_cross_entropy(x, y0))[0] == Approx(0.0).margin(1e-12));
  Tape<double> tape2;
  NodeId x2 = tape2.leaf(row<double>({1000.0, 0.0}));
  REQUIRE(tape2.value(tape2.softmax_cross_entropy(x2, y1))[0] == Approx(1000.0).margin(1e-9));
}

TEST_CASE("softmax cross-entropy gradient wrt weights is (softmax - onehot) outer x") {
  // single linear layer, B=1: z = x W, y = 1
  Tape<double> tape;
  Tensor<double> xv = row<double>({0.5, -1.0, 2.0, 0.25});
  Tensor<double> wv({4, 3});
  rng::Stream rs(99);
  for (auto& v : wv.data) v = rs.uniform(-0.5, 0.5);
  NodeId x = tape.leaf(xv);
  NodeId w = tape.leaf(wv);
  NodeId z = tape.matmul(x, w);
  std::vector<int> y{1};
  NodeId loss = tape.softmax_cross_entropy(z, y);

  // oracle: softmax of the recorded logits, computed right here
  const Tensor<double>& zv = tape.value(z);
  double zmax = std::max({zv[0], zv[1], zv[2]});
  double denom = 0;
  std::vector<double> p(3);
  for (int j = 0; j < 3; ++j) denom += std::exp(zv[j] - zmax);
  for (int j = 0; j < 3; ++j) p[j] = std::exp(zv[j] - zmax) / denom;

  Tensor<double> gw = tape.backward_sum(loss, w);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double want = xv[i] * (p[j] - (j == 1 ? 1.0 : 0.0));
      REQUIRE(gw[i * 3 + j] == Approx(want).margin(1e-12));
    }
}

TEST_CASE("backward seeds are linear: grad(a*J1 + b*J2) = a*grad(J1) + b*grad(J2)") {
  rng::Stream rs(7);
  Tensor<double> xv({1, 6});
  for (auto& v : xv.data) v = rs.uniform(-1, 1);
  Tensor<double> w1({6, 4}), w2({6, 4});
  for (auto& v : w1.data) v = rs.uniform(-1, 1);
  for (auto& v : w2.data) v = rs.uniform(-1, 1);
  std::vector<int> y1{0}, y2{3};

  Tape<double> tape;
  NodeId x = tape.leaf(xv);
  NodeId j1 = tape.softmax_cross_entropy(tape.matmul(x, tape.leaf(w1)), y1);
  NodeId j2 = tape.softmax_cross_entropy(tape.matmul(x, tape.leaf(w2)), y2);

  const double a = rs.uniform(0.2, 2.0), b = rs.uniform(0.2, 2.0);
  Tensor<double> sa({1}, {a}), sb({1}, {b}), one({1}, {1.0});
  std::vector<NodeId> wrt{x};

  std::vector<NodeId> both{j1, j2};
  std::vector<Tensor<double>> seeds{sa, sb};
  Tensor<double> combined = tape.backward(both, seeds, wrt)[0];

  std::vector<NodeId> o1{j1}, o2{j2};
  std::vector<Tensor<double>> s1{one}, s2{one};
  Tensor<double> g1 = tape.backward(o1, s1, wrt)[0];
  Tensor<double> g2 = tape.backward(o2, s2, wrt)[0];

  for (std::size_t i = 0; i < combined.size(); ++i) {
    double want = a * g1[i] + b * g2[i];
    double rel = std::abs(combined[i] - want) / std::max(std::abs(want), 1e-12);
    REQUIRE(rel < 1e-6);
  }
}

TEST_CASE("replay rebuilds the same value bit for bit") {
  rng::Stream rs(21);
  Tensor<double> xv({1, 1, 4, 4});
  for (auto& v : xv.data) v = rs.uniform(0, 1);
  Tensor<double> wv({2, 1, 3, 3});
  for (auto& v : wv.data) v = rs.uniform(-1, 1);
  Tape<double> tape;
  NodeId y = tape.maxpool2(tape.relu(tape.conv2d(tape.leaf(xv), tape.leaf(wv), ConvPad::Same)));
  Tensor<double> again = tape.replay(y);
  REQUIRE(again.same_shape(tape.value(y)));
  for (std::size_t i = 0; i < again.size(); ++i) REQUIRE(again[i] == tape.value(y)[i]);
}

// --- model-level loss/gradient contracts ------------------------------------

TEST_CASE("zero-weight model yields uniform logits: loss = ln K for every sample") {
  Model<double> m = build<double>(ModelSpec::make("mlp"), 5);
  for (auto& p : m.params)
    for (auto& v : p.data) v = 0.0;
  Tensor<double> x({3, 1, 16, 16});
  rng::Stream rs(3);
  for (auto& v : x.data) v = rs.uniform(0, 1);
  std::vector<int> y{0, 1, 3};
  LossGraph<double> g = forward_loss(m, x, y);
  const Tensor<double>& loss = g.tape.value(g.loss);
  for (std::size_t b = 0; b < 3; ++b) REQUIRE(loss[b] == Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("duplicate samples in a batch produce identical loss entries") {
  Model<float> m = build<float>(ModelSpec::make("mlp"), 11);
  Tensor<float> one({1, 1, 16, 16});
  rng::Stream rs(4);
  for (auto& v : one.data) v = static_cast<float>(rs.uniform(0, 1));
  Tensor<float> two({2, 1, 16, 16});
  std::copy(one.data.begin(), one.data.end(), two.data.begin());
  std::copy(one.data.begin(), one.data.end(), two.data.begin() + 256);
  std::vector<int> y{2, 2};
  LossGraph<float> g = forward_loss(m, two, y);
  REQUIRE(g.tape.value(g.loss)[0] == g.tape.value(g.loss)[1]);
}

TEST_CASE("forward_loss rejects bad shapes naming the layer, and non-finite input") {
  Model<float> m = build<float>(ModelSpec::make("mlp"), 1);
  Tensor<float> wrong({1, 1, 8, 8}, std::vector<float>(64, 0.5f));
  REQUIRE_THROWS_WITH(forward_loss(m, wrong, std::vector<int>{0}),
                      ContainsSubstring("does not match model input"));
  // parameter blob with the wrong shape points at the offending tensor
  Model<float> broken = m;
  broken.params[0] = Tensor<float>({3, 3}, std::vector<float>(9, 0.0f));
  Tensor<float> ok({1, 1, 16, 16}, std::vector<float>(256, 0.5f));
  REQUIRE_THROWS_WITH(forward_loss(broken, ok, std::vector<int>{0}),
                      ContainsSubstring("dense1"));
  Tensor<float> nan_in = ok;
  nan_in[7] = std::numeric_limits<float>::quiet_NaN();
  REQUIRE_THROWS_WITH(forward_loss(m, nan_in, std::vector<int>{0}),
                      ContainsSubstring("non-finite"));
}

TEST_CASE("grad_input of a constant-output (zero-weight) model is all zeros") {
  Model<double> m = build<double>(ModelSpec::make("mlp"), 5);
  for (auto& p : m.params)
    for (auto& v : p.data) v = 0.0;
  Tensor<double> x({1, 1, 16, 16});
  rng::Stream rs(8);
  for (auto& v : x.data) v = rs.uniform(0, 1);
  Tensor<double> g = grad_input(m, x, std::vector<int>{1});
  for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(g[i] == 0.0);
}

TEST_CASE("grad_input matches f64 central differences on a random mlp") {
  Model<double> m = build<double>(ModelSpec::make("mlp"), 17);
  Tensor<double> x({1, 1, 16, 16});
  rng::Stream rs(18);
  for (auto& v : x.data) v = rs.uniform(0.05, 0.95);
  ModelField<double> field(m, 2);
  rng::Stream coords(19);
  double err = finite_diff_check(field, x.reshaped({1, 1, 16, 16}), 1e-3, 32, coords);
  REQUIRE(err < 1e-4);
}

TEST_CASE("grad_params: named subset excludes frozen layers and checks against FD") {
  Model<double> m = build<double>(ModelSpec::make("mlp"), 23);
  Tensor<double> x({1, 1, 16, 16});
  rng::Stream rs(24);
  for (auto& v : x.data) v = rs.uniform(0, 1);
  std::vector<int> y{3};

  std::vector<std::string> only{"dense1.w", "out.b"};
  auto subset = grad_params(m, x, y, only);
  REQUIRE(subset.size() == 2);
  REQUIRE(subset[0].first == "dense1.w");
  REQUIRE(subset[1].first == "out.b");
  REQUIRE_THROWS_WITH(grad_params(m, x, y, std::vector<std::string>{"nope.w"}),
                      ContainsSubstring("nope.w"));

  // finite-difference check over 32 random parameter coordinates of dense1.w
  auto specs = m.spec.param_specs();
  std::size_t pidx = 0;
  for (std::size_t i = 0; i < specs.size(); ++i)
    if (specs[i].name == "dense1.w") pidx = i;
  std::vector<Tensor<double>> analytic = grad_params(m, x, y);
  rng::Stream pick(77);
  double worst = 0;
  const double h = 1e-3;
  for (int s = 0; s < 32; ++s) {
    std::size_t i = pick.index(m.params[pidx].size());
    Model<double> up = m, dn = m;
    up.params[pidx][i] += h;
    dn.params[pidx][i] -= h;
    LossGraph<double> gu = forward_loss(up, x, y);
    LossGraph<double> gd = forward_loss(dn, x, y);
    double fd = (gu.tape.value(gu.loss)[0] - gd.tape.value(gd.loss)[0]) / (2 * h);
    double rel = std::abs(analytic[pidx][i] - fd) / std::max(std::abs(analytic[pidx][i]), 1e-8);
    worst = std::max(worst, rel);
  }
  REQUIRE(worst < 1e-4);
}

TEST_CASE("finite_diff_check: quadratic field is exact, constant field is zero") {
  struct Quad {
    double loss(const Tensor<double>& x) const {
      double s = 0;
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * x[i];
      return s;
    }
    Tensor<double> grad(const Tensor<double>& x) const {
      Tensor<double> g(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2 * x[i];
      return g;
    }
  };
  struct Flat {
    double loss(const Tensor<double>&) const { return 4.2; }
    Tensor<double> grad(const Tensor<double>& x) const { return Tensor<double>::zeros_like(x); }
  };
  static_assert(LossField<Quad, double>);
  Tensor<double> x({8});
  rng::Stream rs(31);
  for (auto& v : x.data) v = rs.uniform(-2, 2);
  rng::Stream c1(32), c2(33);
  REQUIRE(finite_diff_check(Quad{}, x, 1e-3, 8, c1) < 1e-9);
  REQUIRE(finite_diff_check(Flat{}, x, 1e-3, 8, c2) == 0.0);

  struct Bad {
    double loss(const Tensor<double>& x) const { return x[0] > 0 ? 1e308 * 1e308 : 0.0; }
    Tensor<double> grad(const Tensor<double>& x) const { return Tensor<double>::zeros_like(x); }
  };
  Tensor<double> pos({2}, {1.0, 1.0});
  rng::Stream c3(34);
  REQUIRE_THROWS_WITH(finite_diff_check(Bad{}, pos, 1e-3, 4, c3),
                      ContainsSubstring("non-finite"));
}

TEST_CASE("identical (model, x, y) produce bit-identical loss and gradients") {
  Model<float> m = build<float>(ModelSpec::make("cnn-a"), 41);
  Tensor<float> x({2, 1, 16, 16});
  rng::Stream rs(42);
  for (auto& v : x.data) v = static_cast<float>(rs.uniform(0, 1));
  std::vector<int> y{0, 2};
  Tensor<float> g1 = grad_input(m, x, y);
  Tensor<float> g2 = grad_input(m, x, y);
  REQUIRE(std::memcmp(g1.data.data(), g2.data.data(), sizeof(float) * g1.size()) == 0);
  LossGraph<float> l1 = forward_loss(m, x, y), l2 = forward_loss(m, x, y);
  REQUIRE(l1.tape.value(l1.loss)[0] == l2.tape.value(l2.loss)[0]);
  REQUIRE(l1.tape.value(l1.loss)[1] == l2.tape.value(l2.loss)[1]);
}

TEST_CASE("cnn architectures pass the f64 finite-difference gate") {
  for (const char* arch : {"cnn-a", "cnn-b"}) {
    Model<double> m = build<double>(ModelSpec::make(arch), 55);
    Tensor<double> x({1, 1, 16, 16});
    rng::Stream rs(56);
    for (auto& v : x.data) v = rs.uniform(0.05, 0.95);
    ModelField<double> field(m, 1);
    rng::Stream coords(57);
    REQUIRE(finite_diff_check(field, x, 1e-3, 16, coords) < 1e-4);
  }
}
