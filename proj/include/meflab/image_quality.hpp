#pragma once

#include <cmath>
#include <limits>

#include "meflab/tensor.hpp"

namespace meflab {

namespace detail {

// Accepts [H,W], [1,H,W] or [1,1,H,W]; anything else is a caller bug.
template <typename T>
std::pair<std::size_t, std::size_t> single_channel_hw(const Tensor<T>& img) {
  if (img.rank() == 2) return {img.dim(0), img.dim(1)};
  if (img.rank() == 3 && img.dim(0) == 1) return {img.dim(1), img.dim(2)};
  if (img.rank() == 4 && img.dim(0) == 1 && img.dim(1) == 1) return {img.dim(2), img.dim(3)};
  fail("image metric: expected a single-channel image, got " + shape_str(img.shape));
}

}  // namespace detail

// Structural similarity with the reference parameters: 11x11 Gaussian window
// (sigma 1.5), K1=0.01, K2=0.03, dynamic range 1.0, averaged over windows
// that fit entirely inside the image.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
  auto [h, w] = detail::single_channel_hw(a);
  auto [hb, wb] = detail::single_channel_hw(b);
  require(h == hb && w == wb, "ssim: image size mismatch");
  constexpr int win = 11;
  require(h >= win && w >= win, "ssim: image smaller than the 11x11 window");

  double weights[win][win];
  {
    const double sigma = 1.5;
    double sum = 0;
    for (int dy = 0; dy < win; ++dy)
      for (int dx = 0; dx < win; ++dx) {
        double ry = dy - (win - 1) / 2.0, rx = dx - (win - 1) / 2.0;
        weights[dy][dx] = std::exp(-(rx * rx + ry * ry) / (2 * sigma * sigma));
        sum += weights[dy][dx];
      }
    for (int dy = 0; dy < win; ++dy)
      for (int dx = 0; dx < win; ++dx) weights[dy][dx] /= sum;
  }

  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // (K*L)^2 with L = 1
  double total = 0;
  std::size_t count = 0;
  for (std::size_t oy = 0; oy + win <= h; ++oy)
    for (std::size_t ox = 0; ox + win <= w; ++ox) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = 0; dy < win; ++dy)
        for (int dx = 0; dx < win; ++dx) {
          double va = static_cast<double>(a[(oy + dy) * w + (ox + dx)]);
          double vb = static_cast<double>(b[(oy + dy) * w + (ox + dx)]);
          double wt = weights[dy][dx];
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      double va = saa - ma * ma;
      double vb = sbb - mb * mb;
      double cov = sab - ma * mb;
      double num = (2 * ma * mb + c1) * (2 * cov + c2);
      double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
      total += num / den;
      ++count;
    }
  return total / static_cast<double>(count);
}

// Peak signal-to-noise ratio against a unit dynamic range:
// 10*log10(1/MSE). Identical images report +infinity.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.same_shape(b), "psnr: shape mismatch");
  require(a.size() > 0, "psnr: empty image");
  double mse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace meflab
