#include <charconv>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "prbench/config.hpp"
#include "prbench/error.hpp"
#include "prbench/experiment.hpp"
#include "prbench/leaderboard.hpp"

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void progress(const std::string& msg) { std::cerr << "prbench: " << msg << std::endl; }

std::array<double, 7> parse_weights(const std::string& csv) {
  std::array<double, 7> w{};
  std::size_t count = 0, pos = 0;
  while (true) {
    const std::size_t end = std::min(csv.find(',', pos), csv.size());
    const std::string field = csv.substr(pos, end - pos);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
      throw prb::ConfigError({"weights: '" + field + "' is not a number"});
    }
    if (count == w.size()) throw prb::ConfigError({"weights: expected 7 values"});
    w[count++] = v;
    if (end == csv.size()) break;
    pos = end + 1;
  }
  if (count != w.size()) throw prb::ConfigError({"weights: expected 7 values, got " + std::to_string(count)});
  return w;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic and adversarial robustness benchmark"};
  app.require_subcommand(1);

  std::string config, out, checkpoint, in_dir;
  std::string weights = "1,1,1,1,1,1,1";
  std::optional<std::uint64_t> seed;

  auto* train = app.add_subcommand("train", "Train, evaluate and write <out>/<config hash>/");
  train->add_option("--config", config, "Experiment config file")->required();
  train->add_option("--out", out, "Output root directory")->required();
  train->add_option("--seed", seed, "Overrides the config seed");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and write report.json");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--config", config, "Experiment config file")->required();
  eval->add_option("--out", out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Rank reports and write leaderboard.{csv,json,html}");
  report->add_option("--in", in_dir, "Directory searched recursively for report.json")->required();
  report->add_option("--weights", weights, "Seven comma-separated column weights");
  report->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      const prb::ExperimentConfig cfg = prb::load_config(config, seed);
      const prb::RunOutput run = prb::run_experiment(cfg, out, progress);
      std::cout << run.dir.string() << "\n";
    } else if (*eval) {
      const prb::ExperimentConfig cfg = prb::load_config(config);
      prb::run_eval(checkpoint, cfg, out, progress);
      std::cout << (std::filesystem::path(out) / "report.json").string() << "\n";
    } else if (*report) {
      const prb::Leaderboard board = prb::export_leaderboard(in_dir, parse_weights(weights), out);
      for (const auto& w : board.warnings) progress("warning: " + w);
      std::cout << board.rows.size() << " ranked rows written to " << out << "\n";
    }
    return 0;
  } catch (const prb::ConfigError& e) {
    std::cerr << "prbench: config error\n";
    for (const auto& issue : e.issues()) std::cerr << "  " << issue << "\n";
    return kExitConfig;
  } catch (const prb::DataError& e) {
    std::cerr << "prbench: data error: " << e.what() << "\n";
    return kExitData;
  } catch (const prb::NumericError& e) {
    std::cerr << "prbench: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "prbench: " << e.what() << "\n";
    return kExitOther;
  }
}
