#include "prbench/experiment.hpp"

#include <bit>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "prbench/checkpoint.hpp"
#include "prbench/error.hpp"
#include "prbench/metrics.hpp"
#include "prbench/trainers.hpp"

namespace prb {

namespace fs = std::filesystem;

std::filesystem::path data_directory(const ExperimentConfig& cfg) {
  if (cfg.data.dir) return *cfg.data.dir;
  if (const char* env = std::getenv("PRBENCH_DATA"); env && *env) return env;
  throw DataError(DataError::Kind::missing_file, "MNIST location unknown: set PRBENCH_DATA or data.dir");
}

DataSplit load_data(const ExperimentConfig& cfg) {
  const DataConfig& d = cfg.data;
  DataSplit out;
  if (d.synthetic()) {
    const SyntheticSet s = synth_dataset(parse_synth_kind(d.name), d.train_size + d.test_size, d.noise, d.seed);
    std::vector<Index> test_rows;
    for (Index i = d.train_size; i < d.train_size + d.test_size; ++i) test_rows.push_back(i);
    out.train = s.data.head(d.train_size);
    out.test = s.data.select(test_rows);
    out.train.name = d.name + "-train";
    out.test.name = d.name + "-test";
  } else {
    MnistSplit m = load_mnist_dir(data_directory(cfg));
    if (d.train_size > m.train.size() || d.test_size > m.test.size()) {
      throw DataError(DataError::Kind::dim_mismatch, "requested more MNIST rows than the files hold");
    }
    out.train = m.train.head(d.train_size);
    out.test = m.test.head(d.test_size);
    if (cfg.train.model.arch == Architecture::mlp) {
      out.train = out.train.flattened();
      out.test = out.test.flattened();
    }
  }
  return out;
}

EvalReport evaluate(const ModelParams& params, const ExperimentConfig& cfg, const DataSplit& data) {
  const ModelSpec& spec = cfg.train.model;
  const EvalConfig& e = cfg.eval;
  const RngStream rng(cfg.train.seed, "eval");

  EvalReport r;
  r.method = std::string(to_string(cfg.train.method));
  r.model = std::string(to_string(spec.arch));
  r.dataset = cfg.data.name;
  r.seed = cfg.train.seed;
  r.config_hash = cfg.hash_hex();
  r.test_rows = data.test.size();
  r.train_rows = e.train_subset;
  r.pr_samples = e.pr_samples;
  r.score_attack = e.score_attack;
  r.score_gamma = e.score_gamma;

  r.clean_accuracy = clean_accuracy(params, spec, data.test);
  for (const auto& name : e.attacks) {
    const AttackSpec atk = eval_attack(cfg, name);
    const RngStream arng = rng.child("attack/" + name);
    const double acc = name == "auto" ? proxy_accuracy(params, spec, data.test, atk, arng)
                                      : adversarial_accuracy(params, spec, data.test, atk, arng);
    r.adversarial.push_back({name, acc});
  }

  auto pert_for = [&](NoiseFamily family, double gamma) {
    PerturbationSpec p;
    p.family = family;
    p.gamma = gamma;
    p.rule = cfg.train.perturbation.rule;
    p.bounds = cfg.train.attack.bounds;
    return p;
  };
  for (NoiseFamily family : e.distributions) {
    for (double gamma : e.pr_radii) {
      const std::string label = "pr/" + std::string(to_string(family));
      const PrProfile profile = pr_profile(params, spec, data.test, pert_for(family, gamma), e.pr_samples,
                                           rng.child(label, std::bit_cast<std::uint64_t>(gamma)));
      r.pr.push_back({family, gamma, pr_rate(profile), static_cast<long>(profile.correct_rows.size())});
      for (double rho : e.probacc_rhos) r.prob_acc.push_back({family, gamma, rho, prob_acc_rate(profile, rho)});
    }
  }

  if (e.train_subset > 0) {
    const Dataset train = data.train.head(e.train_subset);
    r.ge_clean = generalization_error(clean_accuracy(params, spec, train), r.clean_accuracy);
    r.ge_attack = e.score_attack;
    const AttackSpec atk = eval_attack(cfg, e.score_attack);
    const RngStream arng = rng.child("ge-attack/" + e.score_attack);
    const double train_ar = e.score_attack == "auto" ? proxy_accuracy(params, spec, train, atk, arng)
                                                     : adversarial_accuracy(params, spec, train, atk, arng);
    r.ge_ar = generalization_error(train_ar, find_attack(r, e.score_attack)->accuracy);
    for (double gamma : e.pr_radii) {
      const auto train_pr = pr_dataset(params, spec, train, pert_for(NoiseFamily::uniform, gamma), e.pr_samples,
                                       rng.child("ge-pr", std::bit_cast<std::uint64_t>(gamma)));
      const PrEntry* test_pr = find_pr(r, NoiseFamily::uniform, gamma);
      std::optional<double> ge;
      if (train_pr && test_pr && test_pr->value) ge = generalization_error(*train_pr, *test_pr->value);
      r.ge_pr.push_back({gamma, ge});
    }
  }

  if (e.nu_points > 0) {
    const PerturbationSpec pert = pert_for(NoiseFamily::uniform, e.score_gamma);
    double total = 0.0, worst = 0.0;
    for (Index i = 0; i < e.nu_points; ++i) {
      RngStream nrng = rng.child("nu", static_cast<std::uint64_t>(i));
      const Tensor x = slice_rows(data.test.inputs, i, 1).reshaped(data.test.input_shape());
      const double nu = estimate_nu(params, spec, x, pert, e.nu_samples, nrng);
      total += nu;
      worst = std::max(worst, nu);
    }
    r.nu = NuSummary{e.score_gamma, static_cast<long>(e.nu_points), e.nu_samples,
                     total / static_cast<double>(e.nu_points), worst};
  }
  return r;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(DataError::Kind::missing_file, "cannot write " + path.string());
  f << text;
}

}  // namespace

RunOutput run_experiment(const ExperimentConfig& cfg, const fs::path& out_root, const ProgressFn& progress) {
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  const DataSplit data = load_data(cfg);
  fs::create_directories(out_root);
  const fs::path final_dir = out_root / cfg.hash_hex();
  const fs::path tmp = out_root / ("." + cfg.hash_hex() + ".partial");
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  try {
    write_file(tmp / "config.txt", cfg.canonical);
    std::ofstream log(tmp / "train.jsonl", std::ios::binary | std::ios::trunc);
    say("training " + std::string(to_string(cfg.train.method)) + " on " + std::to_string(data.train.size()) +
        " rows");
    const TrainResult trained = train(cfg.train, data.train, [&](const EpochLog& e) {
      nlohmann::json j{{"epoch", e.epoch},
                       {"loss", e.loss},
                       {"train_accuracy", e.train_accuracy},
                       {"seconds", e.seconds},
                       {"lr", e.lr}};
      if (e.threshold_loss) j["threshold_loss"] = *e.threshold_loss;
      log << j.dump() << "\n" << std::flush;
      say("epoch " + std::to_string(e.epoch) + " loss " + std::to_string(e.loss) + " acc " +
          std::to_string(e.train_accuracy) + " (" + std::to_string(e.seconds) + " s)");
    });
    log.close();
    save_checkpoint(tmp / "checkpoint.bin", {cfg.train.model, trained.params, cfg.train.seed});
    say("evaluating");
    EvalReport report = evaluate(trained.params, cfg, data);
    report.seconds_per_epoch = trained.seconds_per_epoch;
    write_report(tmp, report);
    fs::remove_all(final_dir);
    fs::rename(tmp, final_dir);
    return {final_dir, report};
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

EvalReport run_eval(const fs::path& checkpoint, const ExperimentConfig& cfg, const fs::path& out_dir,
                    const ProgressFn& progress) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  if (spec_tag(ckpt.spec) != spec_tag(cfg.train.model)) {
    throw DataError(DataError::Kind::dim_mismatch, checkpoint.string() + ": model " + spec_tag(ckpt.spec) +
                                                       " does not match config model " + spec_tag(cfg.train.model));
  }
  const DataSplit data = load_data(cfg);
  if (progress) progress("evaluating " + checkpoint.string());
  EvalReport report = evaluate(ckpt.params, cfg, data);
  fs::create_directories(out_dir);
  write_report(out_dir, report);
  return report;
}

}  // namespace prb
