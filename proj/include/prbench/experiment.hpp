#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "prbench/config.hpp"
#include "prbench/dataset.hpp"
#include "prbench/model.hpp"
#include "prbench/report.hpp"

namespace prb {

struct DataSplit {
  Dataset train;
  Dataset test;
};

/// Directory holding the MNIST files: data.dir, else $PRBENCH_DATA. Throws
/// DataError(missing_file) when neither is set.
std::filesystem::path data_directory(const ExperimentConfig& cfg);

/// Leading data.train_size / data.test_size rows of the configured data,
/// shaped for the configured model.
DataSplit load_data(const ExperimentConfig& cfg);

/// Runs every configured metric on a trained model. All randomness derives
/// from RngStream(seed, "eval").
EvalReport evaluate(const ModelParams& params, const ExperimentConfig& cfg, const DataSplit& data);

using ProgressFn = std::function<void(const std::string&)>;

struct RunOutput {
  std::filesystem::path dir;
  EvalReport report;
};

/// Trains, evaluates and writes `<out_root>/<config hash>/` holding
/// config.txt, checkpoint.bin, train.jsonl, report.json and timing.json.
/// Work happens in a temporary sibling directory that replaces the final one
/// only on success and is removed on failure.
RunOutput run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_root,
                         const ProgressFn& progress = {});

/// Evaluates a saved checkpoint and writes report.json into `out_dir`.
/// Throws DataError(dim_mismatch) when the checkpoint does not match the
/// configured model.
EvalReport run_eval(const std::filesystem::path& checkpoint, const ExperimentConfig& cfg,
                    const std::filesystem::path& out_dir, const ProgressFn& progress = {});

}  // namespace prb
