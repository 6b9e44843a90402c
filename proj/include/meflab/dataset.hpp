#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "meflab/io.hpp"
#include "meflab/rng.hpp"
#include "meflab/tensor.hpp"

namespace meflab {

template <typename T = float>
struct DatasetHandle {
  Tensor<T> images;  // [n, C, H, W], values in [0,1]
  std::vector<int> labels;
  std::string split;
  std::string provenance;

  std::size_t size() const { return labels.size(); }

  void validate(std::size_t num_classes) const {
    require(images.rank() == 4, "dataset: images must be [n,C,H,W]");
    require(images.dim(0) == labels.size(), "dataset: image/label count mismatch");
    require(!labels.empty(), "dataset: empty");
    for (int y : labels)
      require(y >= 0 && static_cast<std::size_t>(y) < num_classes,
              "dataset: label " + std::to_string(y) + " out of range");
    for (const T& v : images.data)
      require(v >= T(0) && v <= T(1), "dataset: pixel outside [0,1]");
  }

  // One sample as a batch of 1.
  Tensor<T> sample(std::size_t i) const {
    require(i < size(), "dataset: sample index out of range");
    const std::size_t chw = images.size() / size();
    Tensor<T> out({1, images.dim(1), images.dim(2), images.dim(3)});
    std::copy(images.data.begin() + i * chw, images.data.begin() + (i + 1) * chw,
              out.data.begin());
    return out;
  }

  DatasetHandle<T> head(std::size_t n) const {
    require(n >= 1 && n <= size(), "dataset: bad head count");
    const std::size_t chw = images.size() / size();
    DatasetHandle<T> out;
    out.images = Tensor<T>({n, images.dim(1), images.dim(2), images.dim(3)});
    std::copy(images.data.begin(), images.data.begin() + n * chw, out.images.data.begin());
    out.labels.assign(labels.begin(), labels.begin() + n);
    out.split = split;
    out.provenance = provenance + "[0:" + std::to_string(n) + "]";
    return out;
  }

  // Content hash over the exact f32 payload plus labels: two handles with
  // the same digest hold the same pixels.
  std::uint64_t digest() const {
    std::string bytes;
    bytes.reserve(images.size() * 4 + labels.size() * 4);
    for (const T& v : images.data) io::put_f32le(bytes, static_cast<float>(v));
    for (int y : labels) io::put_u32le(bytes, static_cast<std::uint32_t>(y));
    return rng::fnv1a(bytes);
  }
};

namespace detail {

// Binary 16x16 stencils, drawn around a jittered center. Geometry is integer
// arithmetic only, so a zero-noise dataset is exactly reproducible by hand.
template <typename T>
void draw_shape16(Tensor<T>& img, std::size_t base, int cls, int cx, int cy) {
  auto put = [&](int x, int y) {
    if (x >= 0 && x < 16 && y >= 0 && y < 16) img[base + static_cast<std::size_t>(y) * 16 + x] = T(1);
  };
  switch (cls) {
    case 0:  // filled square, 8x8
      for (int y = cy - 4; y <= cy + 3; ++y)
        for (int x = cx - 4; x <= cx + 3; ++x) put(x, y);
      break;
    case 1:  // circle outline, radius 5
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
          int d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          if (d2 >= 16 && d2 <= 29) img[base + static_cast<std::size_t>(y) * 16 + x] = T(1);
        }
      break;
    case 2:  // plus sign, arms 11 long, 3 wide
      for (int d = -5; d <= 5; ++d)
        for (int w = -1; w <= 1; ++w) {
          put(cx + d, cy + w);
          put(cx + w, cy + d);
        }
      break;
    case 3:  // diagonal cross
      for (int d = -5; d <= 5; ++d)
        for (int w = -1; w <= 1; ++w) {
          put(cx + d + w, cy + d);
          put(cx + d + w, cy - d);
        }
      break;
    default: fail("draw_shape16: unknown class " + std::to_string(cls));
  }
}

}  // namespace detail

// Synthetic 4-class benchmark: filled square / circle outline / plus sign /
// diagonal cross on a 16x16 canvas, each instance jittered by up to 2 px and
// overlaid with clipped Gaussian pixel noise. Classes are interleaved
// (label i%4) so every prefix of the set is balanced.
template <typename T = float>
DatasetHandle<T> gen_shapes16(std::size_t n_per_class, double noise_std, std::uint64_t seed,
                              const std::string& split = "train") {
  require(n_per_class >= 1, "gen_shapes16: need at least one sample per class");
  require(noise_std >= 0, "gen_shapes16: negative noise");
  const std::size_t n = 4 * n_per_class;
  DatasetHandle<T> ds;
  ds.images = Tensor<T>({n, 1, 16, 16});
  ds.labels.resize(n);
  ds.split = split;
  ds.provenance = "shapes16(n_per_class=" + std::to_string(n_per_class) +
                  ",noise_std=" + std::to_string(noise_std) + ",seed=" + std::to_string(seed) +
                  ")";
  rng::Stream rs(rng::mix(seed, rng::fnv1a("shapes16")));
  for (std::size_t i = 0; i < n; ++i) {
    int cls = static_cast<int>(i % 4);
    ds.labels[i] = cls;
    int cx = 8 + static_cast<int>(rs.index(5)) - 2;  // jitter in [-2, 2]
    int cy = 8 + static_cast<int>(rs.index(5)) - 2;
    std::size_t base = i * 256;
    detail::draw_shape16(ds.images, base, cls, cx, cy);
    if (noise_std > 0) {
      for (std::size_t p = 0; p < 256; ++p) {
        double v = static_cast<double>(ds.images[base + p]) + noise_std * rs.normal();
        ds.images[base + p] = static_cast<T>(clamp_val(v, 0.0, 1.0));
      }
    }
  }
  return ds;
}

// IDX ingestion (the MNIST container format): big-endian magic + dims, then
// raw unsigned bytes. Pixels are scaled to [0,1].
template <typename T = float>
DatasetHandle<T> load_idx(const std::string& images_path, const std::string& labels_path) {
  std::string ib = io::read_file(images_path);
  std::string lb = io::read_file(labels_path);

  io::Reader ir(ib, "idx images '" + images_path + "'");
  std::uint32_t imagic = ir.u32be();
  require(imagic == 0x00000803u, "idx images '" + images_path + "': bad magic " +
                                     std::to_string(imagic) + ", expected 2051");
  std::uint32_t n = ir.u32be(), rows = ir.u32be(), cols = ir.u32be();
  require(n >= 1 && rows >= 1 && cols >= 1, "idx images: degenerate dimensions");

  io::Reader lr(lb, "idx labels '" + labels_path + "'");
  std::uint32_t lmagic = lr.u32be();
  require(lmagic == 0x00000801u, "idx labels '" + labels_path + "': bad magic " +
                                     std::to_string(lmagic) + ", expected 2049");
  std::uint32_t ln = lr.u32be();
  require(ln == n, "idx: image count " + std::to_string(n) + " != label count " +
                       std::to_string(ln));

  DatasetHandle<T> ds;
  ds.images = Tensor<T>({n, 1, rows, cols});
  std::string pixels = ir.take(static_cast<std::size_t>(n) * rows * cols);
  ir.expect_end();
  for (std::size_t i = 0; i < pixels.size(); ++i)
    ds.images[i] = static_cast<T>(static_cast<unsigned char>(pixels[i])) / T(255);
  std::string labels = lr.take(n);
  lr.expect_end();
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<unsigned char>(labels[i]);
  ds.split = "idx";
  ds.provenance = "idx(images_digest=" + std::to_string(rng::fnv1a(ib)) +
                  ",labels_digest=" + std::to_string(rng::fnv1a(lb)) + ")";
  return ds;
}

}  // namespace meflab
