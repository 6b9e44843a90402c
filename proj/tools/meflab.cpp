// meflab command-line front end. Every subcommand is a thin shell over the
// library: it parses flags, builds the same structs a programmatic caller
// would, runs one operation, and prints a short human-readable report.
// Machine-readable output always goes through the CSV/JSON emitters.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "meflab/experiment.hpp"
#include "meflab/image_quality.hpp"
#include "meflab/version.hpp"

namespace {

using namespace meflab;

// --- shared flag bundles ---------------------------------------------------

struct DataArgs {
  std::size_t count = 100;
  double noise_std = 0.05;
  std::uint64_t seed = 424242;
  std::string split = "eval";
  std::string idx_dir;  // when set, read images.idx / labels.idx instead
};

void add_data_flags(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--count", d.count, "number of evaluation samples")->capture_default_str();
  cmd->add_option("--noise-std", d.noise_std, "Gaussian pixel noise of the synthetic set")
      ->capture_default_str();
  cmd->add_option("--data-seed", d.seed, "seed for the synthetic set")->capture_default_str();
  cmd->add_option("--data", d.idx_dir, "directory with images.idx / labels.idx (IDX format)");
}

DatasetHandle<float> make_batch(const DataArgs& d) {
  require(d.count >= 1, "need at least one sample");
  if (!d.idx_dir.empty()) {
    std::filesystem::path dir(d.idx_dir);
    DatasetHandle<float> ds =
        load_idx<float>((dir / "images.idx").string(), (dir / "labels.idx").string());
    require(ds.size() >= d.count, "IDX set has fewer samples than --count");
    return ds.head(d.count);
  }
  const std::size_t classes = 4;
  const std::size_t per_class = (d.count + classes - 1) / classes;
  return gen_shapes16<float>(per_class, d.noise_std, d.seed, d.split).head(d.count);
}

struct AttackArgs {
  std::string method = "mef";
  int eps255 = 16;  // numerator over 255, the conventional budget notation
  AttackConfig cfg;
};

void add_attack_flags(CLI::App* cmd, AttackArgs& a) {
  cmd->add_option("--method", a.method, "pgd|fgsm|mi|ni|rap|fem|pgn|tpa|mef")
      ->capture_default_str();
  cmd->add_option("--eps", a.eps255, "L-inf budget as an integer numerator over 255")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--iters", a.cfg.iters, "outer iterations T")->capture_default_str();
  cmd->add_option("--alpha", a.cfg.alpha, "step size (auto: eps/T)");
  cmd->add_option("--samples", a.cfg.samples, "neighborhood draws N per iteration")
      ->capture_default_str();
  cmd->add_option("--gamma", a.cfg.gamma, "exploration radius (auto: 2*eps)");
  cmd->add_option("--xi", a.cfg.xi, "neighborhood / inner radius (auto: 0.15*eps)");
  cmd->add_option("--mu-outer", a.cfg.mu_outer, "outer momentum")->capture_default_str();
  cmd->add_option("--mu-inner", a.cfg.mu_inner, "inner momentum")->capture_default_str();
  cmd->add_option("--lambda", a.cfg.lambda, "gradient-norm penalty weight")
      ->capture_default_str();
  cmd->add_option("--inner-steps", a.cfg.inner_steps, "inner descent steps")
      ->capture_default_str();
  cmd->add_option("--late-start", a.cfg.late_start, "first iteration with inner descent");
  cmd->add_option("--fd-step", a.cfg.fd_step, "finite-difference step (auto: 0.01*xi)");
  cmd->add_option("--variant", a.cfg.ncs_sign_variant, "as-algorithm|descent")
      ->capture_default_str();
  cmd->add_option("--seed", a.cfg.seed, "attack base seed")->capture_default_str();
}

AttackConfig finish_attack(const AttackArgs& a) {
  AttackConfig cfg = a.cfg;
  cfg.method = a.method;
  cfg.eps = static_cast<double>(a.eps255) / 255.0;
  return cfg;
}

std::vector<std::string> split_list(const std::string& csv_text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv_text) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Points to evaluate: a saved adversarial batch when given, otherwise a fresh
// attack with the shared flags. Returns the batch and the seed that made it.
std::pair<Tensor<float>, std::uint64_t> points_for(const std::string& advs_path,
                                                   const Model<float>& model,
                                                   const AttackArgs& aa,
                                                   const DatasetHandle<float>& ds) {
  if (!advs_path.empty()) {
    AdversarialBatch batch = load_adversarials(advs_path);
    require(batch.advs.dim(0) == ds.size(), "adversarial batch count does not match --count");
    return {batch.advs, batch.seed};
  }
  std::span<const int> labels(ds.labels.data(), ds.labels.size());
  AttackResult<float> res = run_attack(aa.method, model, ds.images, labels, finish_attack(aa));
  return {std::move(res.adversarial), res.seed};
}

// --- subcommands -------------------------------------------------------------

struct TrainArgs {
  std::string arch = "mlp";
  std::uint64_t init_seed = 7;
  TrainConfig tcfg;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 50;
  double noise_std = 0.05;
  std::uint64_t data_seed = 424242;
};

// [model] / [train] / [data] sections; unknown keys are errors, same policy
// as the experiment config.
TrainArgs train_args_from_toml(const std::string& path) {
  toml::Table t = toml::parse_file(path);
  TrainArgs a;
  if (t.has("model")) {
    const toml::Section& m = t.at("model");
    detail::check_keys(m, {"arch", "init_seed"}, "model");
    if (m.contains("arch")) a.arch = m.at("arch").as_string();
    if (m.contains("init_seed")) a.init_seed = detail::to_seed(m.at("init_seed"));
  }
  if (t.has("train")) {
    const toml::Section& s = t.at("train");
    detail::check_keys(s, {"lr", "epochs", "batch", "optimizer", "momentum", "seed"}, "train");
    if (s.contains("lr")) a.tcfg.lr = s.at("lr").as_float();
    if (s.contains("epochs")) a.tcfg.epochs = s.at("epochs").as_size();
    if (s.contains("batch")) a.tcfg.batch = s.at("batch").as_size();
    if (s.contains("optimizer")) a.tcfg.optimizer = s.at("optimizer").as_string();
    if (s.contains("momentum")) a.tcfg.momentum = s.at("momentum").as_float();
    if (s.contains("seed")) a.tcfg.seed = detail::to_seed(s.at("seed"));
  }
  if (t.has("data")) {
    const toml::Section& d = t.at("data");
    detail::check_keys(d, {"train_per_class", "test_per_class", "noise_std", "seed"}, "data");
    if (d.contains("train_per_class")) a.train_per_class = d.at("train_per_class").as_size();
    if (d.contains("test_per_class")) a.test_per_class = d.at("test_per_class").as_size();
    if (d.contains("noise_std")) a.noise_std = d.at("noise_std").as_float();
    if (d.contains("seed")) a.data_seed = detail::to_seed(d.at("seed"));
  }
  for (const auto& [name, section] : t.sections) {
    if (name.empty()) {
      require(section.empty(), "config: top-level keys are not allowed; use sections");
      continue;
    }
    require(name == "model" || name == "train" || name == "data",
            "config: unknown section [" + name + "]");
  }
  return a;
}

int run_train(const TrainArgs& a, const std::string& out_path, const std::string& idx_dir) {
  DatasetHandle<float> train_ds, test_ds;
  if (!idx_dir.empty()) {
    std::filesystem::path dir(idx_dir);
    train_ds = load_idx<float>((dir / "train-images.idx").string(),
                               (dir / "train-labels.idx").string());
    test_ds =
        load_idx<float>((dir / "test-images.idx").string(), (dir / "test-labels.idx").string());
  } else {
    train_ds = gen_shapes16<float>(a.train_per_class, a.noise_std, a.data_seed, "train");
    test_ds =
        gen_shapes16<float>(a.test_per_class, a.noise_std, rng::mix(a.data_seed, 1), "test");
  }
  Model<float> model = build<float>(ModelSpec::make(a.arch), a.init_seed);
  const TrainConfig& tcfg = a.tcfg;
  const std::string& arch = a.arch;
  auto [trained, history] = train(model, train_ds, test_ds, tcfg);
  for (const EpochStats& e : history)
    std::printf("epoch %zu  train_loss %.4f  train_acc %.4f  test_acc %.4f\n", e.epoch,
                e.train_loss, e.train_acc, e.test_acc);
  save(trained, out_path);
  std::printf("saved %s  (arch %s, test_acc %.4f)\n", out_path.c_str(), arch.c_str(),
              trained.meta.test_acc);
  return 0;
}

int run_attack_cmd(const std::string& model_path, const AttackArgs& aa, const DataArgs& da,
                   const std::string& advs_out, const std::string& telemetry_out) {
  Model<float> model = load(model_path);
  DatasetHandle<float> ds = make_batch(da);
  std::span<const int> labels(ds.labels.data(), ds.labels.size());
  std::vector<bool> mask = correct_mask(model, ds.images, labels);
  AttackConfig cfg = finish_attack(aa);
  AttackResult<float> res = run_attack(aa.method, model, ds.images, labels, cfg);
  double total_bp = 0;
  for (std::uint64_t b : res.bp_per_sample) total_bp += static_cast<double>(b);
  std::printf("method %s  eps %d/255  iters %zu  samples %zu\n", aa.method.c_str(), aa.eps255,
              res.config.iters, res.config.samples);
  std::printf("white-box asr %.4f  mean backprops %.1f\n",
              asr(model, res.adversarial, labels, mask),
              total_bp / static_cast<double>(res.bp_per_sample.size()));
  if (!advs_out.empty()) {
    save_adversarials(res, advs_out);
    std::printf("wrote %s\n", advs_out.c_str());
  }
  if (!telemetry_out.empty()) {
    write_telemetry_csv(res, telemetry_out);
    std::printf("wrote %s\n", telemetry_out.c_str());
  }
  return 0;
}

int run_transfer(const std::string& surrogate_path, const std::string& target_path,
                 const AttackArgs& aa, const DataArgs& da, double max_gap,
                 const std::string& advs_out) {
  Model<float> surrogate = load(surrogate_path);
  Model<float> target = load(target_path);
  check_alignment(surrogate, target, max_gap);
  DatasetHandle<float> ds = make_batch(da);
  std::span<const int> labels(ds.labels.data(), ds.labels.size());
  std::vector<bool> mask_s = correct_mask(surrogate, ds.images, labels);
  std::vector<bool> mask_t = correct_mask(target, ds.images, labels);
  AttackResult<float> res = run_attack(aa.method, surrogate, ds.images, labels, finish_attack(aa));
  std::printf("method %s  eps %d/255  iters %zu\n", aa.method.c_str(), aa.eps255,
              res.config.iters);
  std::printf("surrogate asr %.4f\n", asr(surrogate, res.adversarial, labels, mask_s));
  std::printf("target    asr %.4f\n", asr(target, res.adversarial, labels, mask_t));
  if (!advs_out.empty()) {
    save_adversarials(res, advs_out);
    std::printf("wrote %s\n", advs_out.c_str());
  }
  return 0;
}

int run_flatness(const std::string& model_path, const std::string& mode, int order, double xi,
                 double gamma, std::size_t mc, std::size_t centers, std::uint64_t seed,
                 const DataArgs& da, const std::string& advs_path, const std::string& out_csv) {
  Model<float> model = load(model_path);
  DatasetHandle<float> ds = make_batch(da);
  Tensor<float> points = ds.images;
  if (!advs_path.empty()) {
    AdversarialBatch batch = load_adversarials(advs_path);
    require(batch.advs.dim(0) == ds.size(), "adversarial batch count does not match --count");
    points = batch.advs;
  }
  std::vector<ResultRow> rows;
  std::vector<double> values;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    rng::Stream rs(rng::cell_seed(seed, i, "flatness/" + mode));
    Tensor<float> x = detail::sample_slice(points, i);
    FlatnessEstimate est;
    if (mode == "avg")
      est = avg_flatness(model, x, ds.labels[i], xi, order, mc, rs);
    else if (mode == "worst")
      est = worst_flatness(model, x, ds.labels[i], xi, order, mc, rs);
    else if (mode == "wna")
      est = wna_flatness(model, x, ds.labels[i], gamma, xi, centers, mc, rs);
    else
      fail("unknown flatness mode '" + mode + "' (use avg|worst|wna)");
    values.push_back(est.value);
    rows.push_back({"flatness", mode, seed, static_cast<std::int64_t>(i), -1,
                    "flatness_" + std::to_string(order), est.value,
                    order == 0 ? "loss" : "grad-l2"});
  }
  std::printf("mode %s  order %d  xi %.6f  samples %zu\n", mode.c_str(), order, xi, mc);
  std::printf("mean %.6g  min %.6g  max %.6g over %zu points\n", mean_of(values),
              *std::min_element(values.begin(), values.end()),
              *std::max_element(values.begin(), values.end()), values.size());
  if (!out_csv.empty()) {
    emit_csv(rows, out_csv);
    std::printf("wrote %s\n", out_csv.c_str());
  }
  return 0;
}

int run_atg(const std::string& surrogate_path, const std::string& target_path,
            const std::string& advs_path, const AttackArgs& aa, const DataArgs& da,
            const std::string& out_csv) {
  Model<float> surrogate = load(surrogate_path);
  Model<float> target = load(target_path);
  DatasetHandle<float> ds = make_batch(da);
  auto [points, used_seed] = points_for(advs_path, surrogate, aa, ds);
  std::vector<ResultRow> rows;
  std::vector<double> gaps;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Tensor<float> x = ds.sample(i);
    Tensor<float> adv = detail::sample_slice(points, i);
    Tensor<float> delta(x.shape);
    for (std::size_t j = 0; j < x.size(); ++j) delta[j] = adv[j] - x[j];
    AtgRecord rec = atg(surrogate, target, x, delta, ds.labels[i]);
    gaps.push_back(rec.atg);
    rows.push_back({"atg", aa.method, used_seed, static_cast<std::int64_t>(i), -1, "atg",
                    rec.atg, "loss"});
  }
  std::printf("method %s  mean atg %.6g  min %.6g  max %.6g\n", aa.method.c_str(), mean_of(gaps),
              *std::min_element(gaps.begin(), gaps.end()),
              *std::max_element(gaps.begin(), gaps.end()));
  if (!out_csv.empty()) {
    emit_csv(rows, out_csv);
    std::printf("wrote %s\n", out_csv.c_str());
  }
  return 0;
}

int run_landscape(const std::string& model_path, const std::string& advs_path,
                  const AttackArgs& aa, const DataArgs& da, double range_lo, double range_hi,
                  double step, std::size_t directions, const std::string& out_csv) {
  Model<float> model = load(model_path);
  DatasetHandle<float> ds = make_batch(da);
  auto [points, used_seed] = points_for(advs_path, model, aa, ds);
  require(step > 0 && range_hi >= range_lo, "need a positive step and an ordered range");
  std::vector<double> mags;
  for (double m = range_lo; m <= range_hi + 1e-12; m += step) mags.push_back(m);

  std::vector<ResultRow> rows;
  std::vector<double> mean_at_mag(mags.size(), 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    rng::Stream rs(rng::cell_seed(used_seed, i, "landscape"));
    Tensor<float> adv = detail::sample_slice(points, i);
    LandscapeProfile prof = landscape_profile(model, adv, ds.labels[i], mags, directions, rs);
    for (std::size_t mg = 0; mg < mags.size(); ++mg) {
      mean_at_mag[mg] += prof.mean_delta[mg] / static_cast<double>(ds.size());
      rows.push_back({"landscape", aa.method, used_seed, static_cast<std::int64_t>(i),
                      static_cast<std::int64_t>(mg), "landscape_delta", prof.mean_delta[mg],
                      "loss"});
    }
  }
  for (std::size_t mg = 0; mg < mags.size(); ++mg)
    std::printf("magnitude %.6f  mean loss delta %.6g\n", mags[mg], mean_at_mag[mg]);
  if (!out_csv.empty()) {
    emit_csv(rows, out_csv);
    std::printf("wrote %s\n", out_csv.c_str());
  }
  return 0;
}

int run_dynamics(const std::string& surrogate_path, const std::string& target_path,
                 const std::string& methods_text, std::size_t T, const AttackArgs& shared,
                 const DataArgs& da, std::uint64_t seed, const std::string& out_csv) {
  Model<float> surrogate = load(surrogate_path);
  Model<float> target = load(target_path);
  DatasetHandle<float> ds = make_batch(da);
  std::vector<MethodPlan> plans;
  for (const std::string& name : split_list(methods_text)) {
    MethodPlan p;
    p.name = name;
    p.cfg = finish_attack(shared);
    plans.push_back(std::move(p));
  }
  require(!plans.empty(), "need at least one method");
  std::vector<ResultRow> rows = dynamics_experiment(surrogate, target, plans, T, ds, seed);

  // Per method: mean similarity over the last third of the run plus final ASR.
  for (const MethodPlan& p : plans) {
    std::vector<double> tail;
    double final_asr = 0;
    const std::size_t from = T >= 3 ? T - T / 3 : 1;
    for (const ResultRow& r : rows) {
      if (r.method != p.name) continue;
      if (r.metric == "update_cos_sim_mean" && static_cast<std::size_t>(r.step) >= from)
        tail.push_back(r.value);
      if (r.metric == "asr_target_running" && static_cast<std::size_t>(r.step) == T - 1)
        final_asr = r.value;
    }
    std::printf("%-5s tail mean cos sim %+.4f  final target asr %.4f\n", p.name.c_str(),
                mean_of(tail), final_asr);
  }
  if (!out_csv.empty()) {
    emit_csv(rows, out_csv);
    std::printf("wrote %s\n", out_csv.c_str());
  }
  return 0;
}

int run_experiment_cmd(const std::string& config_path) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  auto [rows, manifest] = run_experiment(cfg);
  std::printf("experiment %s: %zu rows, %zu output files in %s\n", cfg.id.c_str(), rows.size(),
              manifest.output_digests.size(), cfg.out_dir.c_str());
  for (const auto& [file, digest] : manifest.output_digests)
    std::printf("  %-24s fnv1a %llu\n", file.c_str(), static_cast<unsigned long long>(digest));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(meflab::kLibraryName) + " " + meflab::kLibraryVersion +
               " - flatness-driven transferability lab"};
  app.require_subcommand(1);

  // train
  auto* tr = app.add_subcommand("train", "train a model on synthetic shapes or IDX data");
  std::string tr_config, tr_out = "model.mefw", tr_data_dir;
  TrainArgs targs;
  tr->add_option("--config", tr_config, "TOML with [model]/[train]/[data] sections");
  tr->add_option("--out", tr_out, "checkpoint path")->capture_default_str();
  tr->add_option("--data", tr_data_dir, "directory with train/test IDX files");
  tr->add_option("--arch", targs.arch, "mlp|cnn-a|cnn-b")->capture_default_str();
  tr->add_option("--init-seed", targs.init_seed, "weight init seed")->capture_default_str();
  tr->add_option("--epochs", targs.tcfg.epochs)->capture_default_str();
  tr->add_option("--lr", targs.tcfg.lr)->capture_default_str();
  tr->add_option("--batch", targs.tcfg.batch)->capture_default_str();
  tr->add_option("--optimizer", targs.tcfg.optimizer, "sgd|sgd-momentum")->capture_default_str();
  tr->add_option("--momentum", targs.tcfg.momentum)->capture_default_str();
  tr->add_option("--seed", targs.tcfg.seed, "epoch shuffle seed")->capture_default_str();
  tr->add_option("--train-per-class", targs.train_per_class)->capture_default_str();
  tr->add_option("--test-per-class", targs.test_per_class)->capture_default_str();
  tr->add_option("--noise-std", targs.noise_std)->capture_default_str();
  tr->add_option("--data-seed", targs.data_seed)->capture_default_str();

  // attack
  auto* at = app.add_subcommand("attack", "attack one model and report white-box success");
  std::string at_model, at_advs, at_telemetry;
  AttackArgs at_args;
  DataArgs at_data;
  at->add_option("--model", at_model, "checkpoint path")->required();
  add_attack_flags(at, at_args);
  add_data_flags(at, at_data);
  at->add_option("--out-advs", at_advs, "write the adversarial batch here");
  at->add_option("--telemetry", at_telemetry, "write per-iteration telemetry CSV here");

  // transfer
  auto* tf = app.add_subcommand("transfer", "attack a surrogate, evaluate on a target");
  std::string tf_surrogate, tf_target, tf_advs;
  double tf_gap = 0.15;
  AttackArgs tf_args;
  DataArgs tf_data;
  tf->add_option("--surrogate", tf_surrogate)->required();
  tf->add_option("--target", tf_target)->required();
  tf->add_option("--alignment-max-gap", tf_gap, "max allowed test accuracy gap")
      ->capture_default_str();
  add_attack_flags(tf, tf_args);
  add_data_flags(tf, tf_data);
  tf->add_option("--out-advs", tf_advs, "write the adversarial batch here");

  // flatness
  auto* fl = app.add_subcommand("flatness", "estimate loss-surface flatness at sample points");
  std::string fl_model, fl_mode = "avg", fl_advs, fl_out;
  int fl_order = 0;
  double fl_xi = 0.125, fl_gamma = 0.25;
  std::size_t fl_mc = 64, fl_centers = 8;
  std::uint64_t fl_seed = 0;
  DataArgs fl_data;
  fl->add_option("--model", fl_model)->required();
  fl->add_option("--mode", fl_mode, "avg|worst|wna")->capture_default_str();
  fl->add_option("--order", fl_order, "0 = loss deviation, 1 = gradient deviation")
      ->capture_default_str();
  fl->add_option("--xi", fl_xi, "deviation radius")->capture_default_str();
  fl->add_option("--gamma", fl_gamma, "center search radius (wna)")->capture_default_str();
  fl->add_option("--mc", fl_mc, "Monte Carlo draws")->capture_default_str();
  fl->add_option("--centers", fl_centers, "candidate centers (wna)")->capture_default_str();
  fl->add_option("--seed", fl_seed)->capture_default_str();
  fl->add_option("--advs", fl_advs, "evaluate at a saved adversarial batch instead");
  fl->add_option("--out", fl_out, "per-sample CSV");
  add_data_flags(fl, fl_data);

  // atg
  auto* ag = app.add_subcommand("atg", "adversarial transferability gap between two models");
  std::string ag_surrogate, ag_target, ag_advs, ag_out;
  AttackArgs ag_args;
  DataArgs ag_data;
  ag->add_option("--surrogate", ag_surrogate)->required();
  ag->add_option("--target", ag_target)->required();
  ag->add_option("--advs", ag_advs, "saved adversarial batch (else attack with the flags)");
  add_attack_flags(ag, ag_args);
  add_data_flags(ag, ag_data);
  ag->add_option("--out", ag_out, "per-sample CSV");

  // landscape
  auto* ls = app.add_subcommand("landscape", "loss deltas around adversarial points");
  std::string ls_model, ls_advs, ls_out;
  std::size_t ls_dirs = 20;
  double ls_lo = -2.0, ls_hi = 2.0, ls_step = 0.25;
  AttackArgs ls_args;
  DataArgs ls_data;
  ls->add_option("--model", ls_model)->required();
  ls->add_option("--advs", ls_advs, "saved adversarial batch (else attack with the flags)");
  ls->add_option("--dirs", ls_dirs, "random unit directions")->capture_default_str();
  ls->add_option("--range", [&ls_lo, &ls_hi](const std::vector<std::string>& v) {
      ls_lo = meflab::csv::parse_double(v.at(0));
      ls_hi = meflab::csv::parse_double(v.at(1));
      return true;
    }, "magnitude range, two values")->expected(2);
  ls->add_option("--step", ls_step, "magnitude spacing")->capture_default_str();
  add_attack_flags(ls, ls_args);
  add_data_flags(ls, ls_data);
  ls->add_option("--out", ls_out, "per-sample CSV");

  // dynamics
  auto* dy = app.add_subcommand("dynamics", "update-similarity and transfer trajectories");
  std::string dy_surrogate, dy_target, dy_methods = "rap,fem,pgn,tpa", dy_out;
  std::size_t dy_T = 100;
  std::uint64_t dy_seed = 0;
  AttackArgs dy_args;
  DataArgs dy_data;
  dy->add_option("--surrogate", dy_surrogate)->required();
  dy->add_option("--target", dy_target)->required();
  dy->add_option("--methods", dy_methods, "comma-separated method list")->capture_default_str();
  dy->add_option("--T", dy_T, "iterations per run")->capture_default_str();
  dy->add_option("--run-seed", dy_seed, "base seed for all runs")->capture_default_str();
  add_attack_flags(dy, dy_args);
  add_data_flags(dy, dy_data);
  dy->add_option("--out", dy_out, "full trajectory CSV");

  // experiment
  auto* ex = app.add_subcommand("experiment", "run a full experiment from a TOML config");
  std::string ex_config;
  ex->add_option("--config", ex_config, "TOML experiment description")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (tr->parsed()) {
      if (!tr_config.empty()) targs = train_args_from_toml(tr_config);
      return run_train(targs, tr_out, tr_data_dir);
    }
    if (at->parsed()) return run_attack_cmd(at_model, at_args, at_data, at_advs, at_telemetry);
    if (tf->parsed()) return run_transfer(tf_surrogate, tf_target, tf_args, tf_data, tf_gap, tf_advs);
    if (fl->parsed())
      return run_flatness(fl_model, fl_mode, fl_order, fl_xi, fl_gamma, fl_mc, fl_centers,
                          fl_seed, fl_data, fl_advs, fl_out);
    if (ag->parsed()) return run_atg(ag_surrogate, ag_target, ag_advs, ag_args, ag_data, ag_out);
    if (ls->parsed())
      return run_landscape(ls_model, ls_advs, ls_args, ls_data, ls_lo, ls_hi, ls_step, ls_dirs,
                           ls_out);
    if (dy->parsed())
      return run_dynamics(dy_surrogate, dy_target, dy_methods, dy_T, dy_args, dy_data, dy_seed,
                          dy_out);
    if (ex->parsed()) return run_experiment_cmd(ex_config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
