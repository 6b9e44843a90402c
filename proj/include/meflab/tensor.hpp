#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "meflab/error.hpp"

namespace meflab {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// Dense row-major array. Invariant: data.size() == product(shape) and every
// dimension is positive.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)) {
    for (std::size_t d : shape) require(d > 0, "Tensor: zero dimension in " + shape_str(shape));
    data.assign(shape_numel(shape), fill);
  }

  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    require(data.size() == shape_numel(shape),
            "Tensor: data length " + std::to_string(data.size()) + " does not match shape " +
                shape_str(shape));
  }

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }
  std::size_t rank() const { return shape.size(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  Tensor reshaped(Shape s) const {
    require(shape_numel(s) == size(), "reshape: element count mismatch");
    return Tensor(std::move(s), data);
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape); }
};

template <typename T>
double l1_norm(const Tensor<T>& t) {
  double s = 0;
  for (T v : t.data) s += std::abs(static_cast<double>(v));
  return s;
}

template <typename T>
double l2_norm(const Tensor<T>& t) {
  double s = 0;
  for (T v : t.data) s += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(s);
}

template <typename T>
double linf_dist(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.same_shape(b), "linf_dist: shape mismatch");
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

template <typename T>
double l2_dist(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.same_shape(b), "l2_dist: shape mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

template <typename T>
T sign_of(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

template <typename T>
T clamp_val(T v, T lo, T hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace meflab
