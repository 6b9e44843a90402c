#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "meflab/attacks.hpp"
#include "meflab/checkpoint.hpp"
#include "meflab/csv.hpp"
#include "meflab/dataset.hpp"
#include "meflab/flatness.hpp"
#include "meflab/model.hpp"
#include "meflab/toml.hpp"
#include "meflab/train.hpp"
#include "meflab/version.hpp"

namespace meflab {

// ---------------------------------------------------------------------------
// Worker pool. MEFLAB_THREADS caps the pool; unset means one thread per
// hardware core. Work items pull indices from a shared counter, and the first
// exception thrown by any worker is rethrown on the caller's thread.
// ---------------------------------------------------------------------------

inline std::size_t thread_budget() {
  const char* env = std::getenv("MEFLAB_THREADS");
  if (env == nullptr || *env == '\0')
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
  std::size_t value = 0;
  const char* end = env;
  while (*end != '\0') {
    require(*end >= '0' && *end <= '9', "MEFLAB_THREADS must be a positive integer");
    value = value * 10 + static_cast<std::size_t>(*end - '0');
    ++end;
  }
  require(value >= 1, "MEFLAB_THREADS must be a positive integer");
  return value;
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min(thread_budget(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Experiment description
// ---------------------------------------------------------------------------

struct MethodPlan {
  std::string name;  // attack kernel id, e.g. "mef", "pgd"
  AttackConfig cfg;  // per-method overrides; seed is stamped per run
};

struct DataPlan {
  double noise_std = 0.05;
  std::uint64_t seed = 424242;
};

inline const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> k = {
      "asr_surrogate",  "asr_target",     "bp_mean",        "atg_mean",
      "avg_flatness_0", "avg_flatness_1", "landscape_delta"};
  return k;
}

struct ExperimentConfig {
  std::string id = "experiment";
  std::string surrogate_path;
  std::string target_path;
  std::vector<MethodPlan> methods;
  std::vector<std::string> metrics = {"asr_surrogate", "asr_target", "bp_mean"};
  std::size_t sample_count = 100;
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "runs/experiment";
  DataPlan data;
  double flat_xi = 0.125;        // radius for the flatness metrics
  std::size_t flat_samples = 64; // Monte Carlo draws per flatness estimate
  std::vector<double> landscape_magnitudes = {0.05, 0.1, 0.2};
  std::size_t landscape_dirs = 8;
  bool save_adversarial_batches = false;
  double alignment_max_gap = 0.15;

  void validate() const {
    require(!id.empty(), "ExperimentConfig: empty experiment id");
    require(!methods.empty(), "ExperimentConfig: need at least one method");
    for (const MethodPlan& m : methods) method_from_string(m.name);  // throws on junk
    require(!seeds.empty(), "ExperimentConfig: need at least one seed");
    require(sample_count >= 1, "ExperimentConfig: need at least one sample");
    require(!metrics.empty(), "ExperimentConfig: need at least one metric");
    for (const std::string& m : metrics) {
      const auto& known = known_metrics();
      require(std::find(known.begin(), known.end(), m) != known.end(),
              "ExperimentConfig: unknown metric '" + m + "'");
    }
    require(!out_dir.empty(), "ExperimentConfig: empty output directory");
    require(std::filesystem::exists(surrogate_path),
            "ExperimentConfig: surrogate checkpoint not found: " + surrogate_path);
    require(std::filesystem::exists(target_path),
            "ExperimentConfig: target checkpoint not found: " + target_path);
    if (std::find(metrics.begin(), metrics.end(), "landscape_delta") != metrics.end()) {
      require(!landscape_magnitudes.empty() && landscape_dirs >= 1,
              "ExperimentConfig: landscape metric needs magnitudes and directions");
    }
    require(flat_xi >= 0 && flat_samples >= 1, "ExperimentConfig: bad flatness settings");
  }

  // Canonical text form used for the manifest digest: every field that can
  // influence an output byte appears here, in fixed order.
  std::string canonical_string() const {
    std::string s = "id=" + id + ";surrogate=" + surrogate_path + ";target=" + target_path +
                    ";samples=" + std::to_string(sample_count) + ";out=" + out_dir;
    s += ";seeds=";
    for (std::uint64_t v : seeds) s += std::to_string(v) + ",";
    s += ";metrics=";
    for (const std::string& m : metrics) s += m + ",";
    s += ";data=noise:" + csv::fmt(data.noise_std) + ",seed:" + std::to_string(data.seed);
    s += ";flat=xi:" + csv::fmt(flat_xi) + ",m:" + std::to_string(flat_samples);
    s += ";landscape=dirs:" + std::to_string(landscape_dirs) + ",mags:";
    for (double m : landscape_magnitudes) s += csv::fmt(m) + ",";
    s += ";save_advs=" + std::string(save_adversarial_batches ? "1" : "0");
    s += ";align=" + csv::fmt(alignment_max_gap);
    for (const MethodPlan& m : methods) {
      const AttackConfig& c = m.cfg;
      s += ";method=" + m.name + "{eps:" + csv::fmt(c.eps) + ",iters:" + std::to_string(c.iters) +
           ",alpha:" + csv::fmt(c.alpha) + ",n:" + std::to_string(c.samples) +
           ",gamma:" + csv::fmt(c.gamma) + ",xi:" + csv::fmt(c.xi) +
           ",mu_o:" + csv::fmt(c.mu_outer) + ",mu_i:" + csv::fmt(c.mu_inner) +
           ",lambda:" + csv::fmt(c.lambda) + ",inner:" + std::to_string(c.inner_steps) +
           ",late:" + std::to_string(c.late_start) + ",fd:" + csv::fmt(c.fd_step) +
           ",variant:" + c.ncs_sign_variant + "}";
    }
    return s;
  }
};

// ---------------------------------------------------------------------------
// Run manifest: enough provenance to audit a results directory. Timestamps
// are informational; every digested byte is seed-determined.
// ---------------------------------------------------------------------------

struct RunManifest {
  std::string experiment_id;
  std::uint64_t config_digest = 0;
  std::string library_name = kLibraryName;
  std::string library_version = kLibraryVersion;
  std::string started_utc;
  std::string finished_utc;
  std::vector<std::uint64_t> seeds;
  std::vector<std::pair<std::string, std::uint64_t>> output_digests;  // file -> fnv1a
};

inline std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_manifest(const RunManifest& man, const std::string& path) {
  nlohmann::json j;
  j["experiment"] = man.experiment_id;
  j["config_digest"] = std::to_string(man.config_digest);
  j["library"] = {{"name", man.library_name}, {"version", man.library_version}};
  j["started_utc"] = man.started_utc;
  j["finished_utc"] = man.finished_utc;
  j["seeds"] = man.seeds;
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& [file, digest] : man.output_digests)
    outs.push_back({{"file", file}, {"fnv1a", std::to_string(digest)}});
  j["outputs"] = outs;
  io::write_file(path, j.dump(2) + "\n");
}

inline RunManifest read_manifest(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(io::read_file(path));
  RunManifest m;
  m.experiment_id = j.at("experiment").get<std::string>();
  m.config_digest = std::stoull(j.at("config_digest").get<std::string>());
  m.library_name = j.at("library").at("name").get<std::string>();
  m.library_version = j.at("library").at("version").get<std::string>();
  m.started_utc = j.at("started_utc").get<std::string>();
  m.finished_utc = j.at("finished_utc").get<std::string>();
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  for (const auto& o : j.at("outputs"))
    m.output_digests.emplace_back(o.at("file").get<std::string>(),
                                  std::stoull(o.at("fnv1a").get<std::string>()));
  return m;
}

inline std::uint64_t file_digest(const std::string& path) {
  std::string bytes = io::read_file(path);
  return rng::fnv1a(std::string_view(bytes.data(), bytes.size()));
}

// ---------------------------------------------------------------------------
// Full pipeline: load both checkpoints, refuse misaligned pairs, synthesize
// the evaluation batch, fan (method x seed) cells out to the pool, then sort
// rows by (method, seed, sample, step, metric) so scheduling is unobservable.
// results.csv / results.json land in out_dir; manifest.json is written last
// so its digests cover the final bytes of everything else.
// ---------------------------------------------------------------------------

inline std::pair<std::vector<ResultRow>, RunManifest> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();

  RunManifest man;
  man.experiment_id = cfg.id;
  man.config_digest = rng::fnv1a(cfg.canonical_string());
  man.seeds = cfg.seeds;
  man.started_utc = utc_timestamp();

  Model<float> surrogate = load(cfg.surrogate_path);
  Model<float> target = load(cfg.target_path);
  check_alignment(surrogate, target, cfg.alignment_max_gap);

  const std::size_t k = surrogate.spec.classes;
  const std::size_t per_class = (cfg.sample_count + k - 1) / k;
  DatasetHandle<float> ds =
      gen_shapes16<float>(per_class, cfg.data.noise_std, cfg.data.seed, "eval")
          .head(cfg.sample_count);
  std::span<const int> labels(ds.labels.data(), ds.labels.size());
  std::vector<bool> mask_s = correct_mask(surrogate, ds.images, labels);
  std::vector<bool> mask_t = correct_mask(target, ds.images, labels);

  const auto want = [&](const char* name) {
    return std::find(cfg.metrics.begin(), cfg.metrics.end(), name) != cfg.metrics.end();
  };

  struct Cell {
    std::size_t method_index;
    std::size_t seed_index;
  };
  std::vector<Cell> cells;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) cells.push_back({mi, si});

  std::vector<std::vector<ResultRow>> cell_rows(cells.size());
  std::vector<AttackResult<float>> cell_results(cells.size());

  parallel_for(cells.size(), [&](std::size_t c) {
    const MethodPlan& plan = cfg.methods[cells[c].method_index];
    const std::uint64_t seed = cfg.seeds[cells[c].seed_index];
    AttackConfig ac = plan.cfg;
    ac.method = plan.name;
    ac.seed = seed;
    AttackResult<float> res = run_attack(plan.name, surrogate, ds.images, labels, ac);

    std::vector<ResultRow>& out = cell_rows[c];
    auto aggregate = [&](const std::string& metric, double value, const std::string& units) {
      out.push_back({cfg.id, plan.name, seed, -1, -1, metric, value, units});
    };
    auto per_sample = [&](std::int64_t i, std::int64_t step, const std::string& metric,
                          double value, const std::string& units) {
      out.push_back({cfg.id, plan.name, seed, i, step, metric, value, units});
    };

    if (want("asr_surrogate"))
      aggregate("asr_surrogate", asr(surrogate, res.adversarial, labels, mask_s), "fraction");
    if (want("asr_target"))
      aggregate("asr_target", asr(target, res.adversarial, labels, mask_t), "fraction");
    if (want("bp_mean")) {
      double total = 0;
      for (std::uint64_t b : res.bp_per_sample) total += static_cast<double>(b);
      aggregate("bp_mean", total / static_cast<double>(res.bp_per_sample.size()), "backprops");
    }
    if (want("atg_mean")) {
      double total = 0;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        Tensor<float> x = ds.sample(i);
        Tensor<float> adv = detail::sample_slice(res.adversarial, i);
        Tensor<float> delta(x.shape);
        for (std::size_t j = 0; j < x.size(); ++j) delta[j] = adv[j] - x[j];
        total += atg(surrogate, target, x, delta, ds.labels[i]).atg;
      }
      aggregate("atg_mean", total / static_cast<double>(ds.size()), "loss");
    }
    for (int order = 0; order <= 1; ++order) {
      const char* name = order == 0 ? "avg_flatness_0" : "avg_flatness_1";
      if (!want(name)) continue;
      double total = 0;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        rng::Stream rs(rng::cell_seed(seed, i, plan.name + "/flat" + std::to_string(order)));
        Tensor<float> adv = detail::sample_slice(res.adversarial, i);
        FlatnessEstimate est =
            avg_flatness(surrogate, adv, ds.labels[i], cfg.flat_xi, order, cfg.flat_samples, rs);
        per_sample(static_cast<std::int64_t>(i), -1, name, est.value,
                   order == 0 ? "loss" : "grad-l2");
        total += est.value;
      }
      aggregate(std::string(name) + "_mean", total / static_cast<double>(ds.size()),
                order == 0 ? "loss" : "grad-l2");
    }
    if (want("landscape_delta")) {
      for (std::size_t i = 0; i < ds.size(); ++i) {
        rng::Stream rs(rng::cell_seed(seed, i, plan.name + "/landscape"));
        Tensor<float> adv = detail::sample_slice(res.adversarial, i);
        LandscapeProfile prof = landscape_profile(surrogate, adv, ds.labels[i],
                                                  cfg.landscape_magnitudes,
                                                  cfg.landscape_dirs, rs);
        for (std::size_t mg = 0; mg < prof.magnitudes.size(); ++mg)
          per_sample(static_cast<std::int64_t>(i), static_cast<std::int64_t>(mg),
                     "landscape_delta", prof.mean_delta[mg], "loss");
      }
    }
    cell_results[c] = std::move(res);
  });

  std::vector<ResultRow> rows;
  {
    double acc_s = 0, acc_t = 0;
    for (bool b : mask_s) acc_s += b ? 1 : 0;
    for (bool b : mask_t) acc_t += b ? 1 : 0;
    const double n = static_cast<double>(ds.size());
    rows.push_back({cfg.id, "clean", 0, -1, -1, "clean_acc_surrogate", acc_s / n, "fraction"});
    rows.push_back({cfg.id, "clean", 0, -1, -1, "clean_acc_target", acc_t / n, "fraction"});
  }
  for (std::vector<ResultRow>& cr : cell_rows)
    rows.insert(rows.end(), std::make_move_iterator(cr.begin()),
                std::make_move_iterator(cr.end()));
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.method, a.seed, a.sample_id, a.step, a.metric) <
           std::tie(b.method, b.seed, b.sample_id, b.step, b.metric);
  });

  const std::filesystem::path dir(cfg.out_dir);
  std::vector<std::string> written;
  emit_csv(rows, (dir / "results.csv").string());
  written.push_back("results.csv");
  emit_json(rows, (dir / "results.json").string());
  written.push_back("results.json");
  if (cfg.save_adversarial_batches) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string name = "advs_" + cfg.methods[cells[c].method_index].name + "_seed" +
                               std::to_string(cfg.seeds[cells[c].seed_index]) + ".mefb";
      save_adversarials(cell_results[c], (dir / name).string());
      written.push_back(name);
    }
  }
  std::sort(written.begin(), written.end());
  for (const std::string& name : written)
    man.output_digests.emplace_back(name, file_digest((dir / name).string()));

  man.finished_utc = utc_timestamp();
  write_manifest(man, (dir / "manifest.json").string());
  return {std::move(rows), std::move(man)};
}

// ---------------------------------------------------------------------------
// Trajectory study: run each method for T iterations on the surrogate while
// watching every projected iterate against the target. Emits one similarity
// row per (sample, iteration >= 1), plus per-iteration aggregates: the mean
// update cosine similarity and the running transfer success rate.
// ---------------------------------------------------------------------------

inline std::vector<ResultRow> dynamics_experiment(const Model<float>& surrogate,
                                                  const Model<float>& target,
                                                  const std::vector<MethodPlan>& methods,
                                                  std::size_t T,
                                                  const DatasetHandle<float>& data,
                                                  std::uint64_t seed,
                                                  const std::string& experiment_id = "dynamics") {
  require(!methods.empty(), "dynamics_experiment: need at least one method");
  require(T >= 1, "dynamics_experiment: need at least one iteration");
  require(data.size() >= 1, "dynamics_experiment: empty dataset");
  std::span<const int> labels(data.labels.data(), data.labels.size());
  const std::vector<bool> mask_t = correct_mask(target, data.images, labels);
  std::size_t denom = 0;
  for (bool b : mask_t) denom += b ? 1 : 0;
  require(denom > 0, "dynamics_experiment: target misclassifies every clean sample");

  const std::size_t n = data.size();
  std::vector<ResultRow> rows;
  for (const MethodPlan& plan : methods) {
    AttackConfig ac = plan.cfg;
    ac.method = plan.name;
    ac.iters = T;
    ac.seed = seed;

    std::vector<std::vector<char>> fooled(n, std::vector<char>(T, 0));
    IterObserver<float> watch = [&](std::size_t i, std::size_t t, const Tensor<float>& it) {
      fooled[i][t] = predict(target, it)[0] != data.labels[i] ? 1 : 0;
    };
    AttackResult<float> res = run_attack(plan.name, surrogate, data.images, labels, ac, watch);

    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 1; t < T; ++t)
        rows.push_back({experiment_id, plan.name, seed, static_cast<std::int64_t>(i),
                        static_cast<std::int64_t>(t), "update_cos_sim",
                        res.telemetry[i][t].update_cos_sim, "cosine"});
    for (std::size_t t = 1; t < T; ++t) {
      double total = 0;
      for (std::size_t i = 0; i < n; ++i) total += res.telemetry[i][t].update_cos_sim;
      rows.push_back({experiment_id, plan.name, seed, -1, static_cast<std::int64_t>(t),
                      "update_cos_sim_mean", total / static_cast<double>(n), "cosine"});
    }
    for (std::size_t t = 0; t < T; ++t) {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask_t[i] && fooled[i][t]) ++hits;
      rows.push_back({experiment_id, plan.name, seed, -1, static_cast<std::int64_t>(t),
                      "asr_target_running",
                      static_cast<double>(hits) / static_cast<double>(denom), "fraction"});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// TOML bindings. One file describes a whole experiment; unknown keys and
// unknown sections are hard errors so typos cannot silently change a run.
// ---------------------------------------------------------------------------

namespace detail {

inline void check_keys(const toml::Section& s, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  for (const auto& [key, value] : s) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    require(ok, "config: unknown key '" + key + "' in [" + where + "]");
  }
}

inline std::uint64_t to_seed(const toml::Value& v) {
  std::int64_t raw = v.as_int();
  require(raw >= 0, "config: seeds must be non-negative");
  return static_cast<std::uint64_t>(raw);
}

}  // namespace detail

// Populate an AttackConfig from one [attack.<name>] section. eps can be given
// directly ("eps") or as an integer numerator over 255 ("eps_255").
inline AttackConfig attack_config_from_section(const toml::Section& s, const std::string& where) {
  detail::check_keys(s,
                     {"eps", "eps_255", "iters", "alpha", "samples", "gamma", "xi", "mu_outer",
                      "mu_inner", "lambda", "inner_steps", "late_start", "fd_step", "variant"},
                     where);
  require(!(s.contains("eps") && s.contains("eps_255")),
          "config: give either eps or eps_255 in [" + where + "], not both");
  AttackConfig c;
  if (s.contains("eps")) c.eps = s.at("eps").as_float();
  if (s.contains("eps_255")) {
    std::int64_t num = s.at("eps_255").as_int();
    require(num >= 0, "config: eps_255 must be >= 0 in [" + where + "]");
    c.eps = static_cast<double>(num) / 255.0;
  }
  if (s.contains("iters")) c.iters = s.at("iters").as_size();
  if (s.contains("alpha")) c.alpha = s.at("alpha").as_float();
  if (s.contains("samples")) c.samples = s.at("samples").as_size();
  if (s.contains("gamma")) c.gamma = s.at("gamma").as_float();
  if (s.contains("xi")) c.xi = s.at("xi").as_float();
  if (s.contains("mu_outer")) c.mu_outer = s.at("mu_outer").as_float();
  if (s.contains("mu_inner")) c.mu_inner = s.at("mu_inner").as_float();
  if (s.contains("lambda")) c.lambda = s.at("lambda").as_float();
  if (s.contains("inner_steps")) c.inner_steps = s.at("inner_steps").as_size();
  if (s.contains("late_start")) c.late_start = s.at("late_start").as_size();
  if (s.contains("fd_step")) c.fd_step = s.at("fd_step").as_float();
  if (s.contains("variant")) c.ncs_sign_variant = s.at("variant").as_string();
  return c;
}

inline ExperimentConfig experiment_config_from_toml(const toml::Table& t) {
  ExperimentConfig cfg;
  const toml::Section& exp = t.at("experiment");
  detail::check_keys(exp,
                     {"id", "surrogate", "target", "samples", "seeds", "metrics", "methods",
                      "out_dir", "save_adversarials", "alignment_max_gap"},
                     "experiment");
  require(exp.contains("surrogate") && exp.contains("target"),
          "config: [experiment] needs surrogate and target checkpoint paths");
  require(exp.contains("methods"), "config: [experiment] needs a methods list");
  if (exp.contains("id")) cfg.id = exp.at("id").as_string();
  cfg.surrogate_path = exp.at("surrogate").as_string();
  cfg.target_path = exp.at("target").as_string();
  if (exp.contains("samples")) cfg.sample_count = exp.at("samples").as_size();
  if (exp.contains("seeds")) {
    cfg.seeds.clear();
    for (const toml::Value& v : exp.at("seeds").as_array()) cfg.seeds.push_back(detail::to_seed(v));
  }
  if (exp.contains("metrics")) {
    cfg.metrics.clear();
    for (const toml::Value& v : exp.at("metrics").as_array()) cfg.metrics.push_back(v.as_string());
  }
  if (exp.contains("out_dir")) cfg.out_dir = exp.at("out_dir").as_string();
  if (exp.contains("save_adversarials"))
    cfg.save_adversarial_batches = exp.at("save_adversarials").as_bool();
  if (exp.contains("alignment_max_gap"))
    cfg.alignment_max_gap = exp.at("alignment_max_gap").as_float();

  std::vector<std::string> method_names;
  for (const toml::Value& v : exp.at("methods").as_array()) method_names.push_back(v.as_string());
  for (const std::string& name : method_names) {
    MethodPlan plan;
    plan.name = name;
    const std::string section = "attack." + name;
    if (t.has(section)) plan.cfg = attack_config_from_section(t.at(section), section);
    cfg.methods.push_back(std::move(plan));
  }

  if (t.has("data")) {
    const toml::Section& d = t.at("data");
    detail::check_keys(d, {"noise_std", "seed"}, "data");
    if (d.contains("noise_std")) cfg.data.noise_std = d.at("noise_std").as_float();
    if (d.contains("seed")) cfg.data.seed = detail::to_seed(d.at("seed"));
  }
  if (t.has("flatness")) {
    const toml::Section& f = t.at("flatness");
    detail::check_keys(f, {"xi", "mc_samples"}, "flatness");
    if (f.contains("xi")) cfg.flat_xi = f.at("xi").as_float();
    if (f.contains("mc_samples")) cfg.flat_samples = f.at("mc_samples").as_size();
  }
  if (t.has("landscape")) {
    const toml::Section& l = t.at("landscape");
    detail::check_keys(l, {"magnitudes", "directions"}, "landscape");
    if (l.contains("magnitudes")) {
      cfg.landscape_magnitudes.clear();
      for (const toml::Value& v : l.at("magnitudes").as_array())
        cfg.landscape_magnitudes.push_back(v.as_float());
    }
    if (l.contains("directions")) cfg.landscape_dirs = l.at("directions").as_size();
  }

  // Every section must be one we consumed; a stray [attack.typo] is an error.
  for (const auto& [name, section] : t.sections) {
    if (name.empty()) {
      require(section.empty(), "config: top-level keys are not allowed; use sections");
      continue;
    }
    bool ok = name == "experiment" || name == "data" || name == "flatness" || name == "landscape";
    for (const std::string& m : method_names) ok = ok || name == "attack." + m;
    require(ok, "config: unknown section [" + name + "]");
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  ExperimentConfig cfg = experiment_config_from_toml(toml::parse_file(path));
  cfg.validate();
  return cfg;
}

}  // namespace meflab
