#pragma once

#include <string>

#include <json.hpp>

#include "meflab/io.hpp"
#include "meflab/model.hpp"

namespace meflab {

// Checkpoint layout ("MEFW"):
//   4 bytes  magic "MEFW"
//   u32 LE   format version (currently 1)
//   u32 LE   byte length of the JSON header
//   ...      UTF-8 JSON: architecture descriptor, training metadata, and an
//            FNV-1a digest of the canonical spec string
//   ...      parameter payload, f32 LE, tensors in spec order
// Storage is always f32; that is the experiment precision. Loading gives a
// float model; cast<double>() afterwards when a wider check is wanted.

inline nlohmann::json spec_to_json(const ModelSpec& s) {
  return nlohmann::json{{"arch", s.arch},
                        {"in_c", s.in_c},
                        {"in_h", s.in_h},
                        {"in_w", s.in_w},
                        {"classes", s.classes},
                        {"widths", s.widths},
                        {"channels", s.channels},
                        {"kernels", s.kernels}};
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.arch = j.at("arch").get<std::string>();
  s.in_c = j.at("in_c").get<std::size_t>();
  s.in_h = j.at("in_h").get<std::size_t>();
  s.in_w = j.at("in_w").get<std::size_t>();
  s.classes = j.at("classes").get<std::size_t>();
  s.widths = j.at("widths").get<std::vector<std::size_t>>();
  s.channels = j.at("channels").get<std::vector<std::size_t>>();
  s.kernels = j.at("kernels").get<std::vector<std::size_t>>();
  return s;
}

template <typename T>
void save(const Model<T>& m, const std::string& path) {
  std::vector<ParamSpec> pspecs = m.spec.param_specs();
  require(pspecs.size() == m.params.size(), "save: parameter count mismatch");
  nlohmann::json header = {
      {"spec", spec_to_json(m.spec)},
      {"spec_digest", rng::fnv1a(m.spec.describe())},
      {"meta",
       {{"seed", m.meta.seed},
        {"epochs", m.meta.epochs},
        {"train_acc", m.meta.train_acc},
        {"test_acc", m.meta.test_acc},
        {"trained", m.meta.trained}}},
  };
  std::string js = header.dump();
  std::string out;
  out += "MEFW";
  io::put_u32le(out, 1u);
  io::put_u32le(out, static_cast<std::uint32_t>(js.size()));
  out += js;
  for (const Tensor<T>& p : m.params)
    for (const T& v : p.data) io::put_f32le(out, static_cast<float>(v));
  io::write_file(path, out);
}

inline Model<float> load(const std::string& path) {
  std::string bytes = io::read_file(path);
  io::Reader r(bytes, "checkpoint '" + path + "'");
  r.expect_magic("MEFW");
  std::uint32_t version = r.u32le();
  require(version == 1, "checkpoint '" + path + "': unsupported version " +
                            std::to_string(version));
  std::uint32_t jlen = r.u32le();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.take(jlen));
  } catch (const nlohmann::json::exception& e) {
    fail("checkpoint '" + path + "': corrupt header: " + e.what());
  }

  Model<float> m;
  try {
    m.spec = spec_from_json(header.at("spec"));
    const nlohmann::json& meta = header.at("meta");
    m.meta.seed = meta.at("seed").get<std::uint64_t>();
    m.meta.epochs = meta.at("epochs").get<std::size_t>();
    m.meta.train_acc = meta.at("train_acc").get<double>();
    m.meta.test_acc = meta.at("test_acc").get<double>();
    m.meta.trained = meta.at("trained").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail("checkpoint '" + path + "': missing header field: " + e.what());
  }

  std::uint64_t want_digest = header.at("spec_digest").get<std::uint64_t>();
  std::uint64_t got_digest = rng::fnv1a(m.spec.describe());
  require(want_digest == got_digest,
          "checkpoint '" + path + "': spec digest mismatch (file " +
              std::to_string(want_digest) + ", recomputed " + std::to_string(got_digest) + ")");

  for (const ParamSpec& ps : m.spec.param_specs()) {
    Tensor<float> t(ps.shape);
    for (float& v : t.data) v = r.f32le();
    require(t.all_finite(), "checkpoint '" + path + "': non-finite values in '" + ps.name + "'");
    m.params.push_back(std::move(t));
  }
  r.expect_end();
  return m;
}

}  // namespace meflab
