#include "prbench/report.hpp"

#include <fstream>

#include "prbench/error.hpp"

namespace prb {

namespace {

using nlohmann::json;

constexpr const char* kSchema = "prbench.eval_report/1";

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(DataError::Kind::missing_file, "cannot write " + path.string());
  f << text;
  if (!f) throw DataError(DataError::Kind::bad_format, "failed writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError(DataError::Kind::missing_file, "cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw DataError(DataError::Kind::bad_format, path.string() + ": " + e.what());
  }
}

}  // namespace

json to_json(const EvalReport& r) {
  json j;
  j["schema"] = kSchema;
  j["method"] = r.method;
  j["model"] = r.model;
  j["dataset"] = r.dataset;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["test_rows"] = r.test_rows;
  j["train_rows"] = r.train_rows;
  j["pr_samples"] = r.pr_samples;
  j["clean_accuracy"] = r.clean_accuracy;
  j["adversarial_accuracy"] = json::array();
  for (const auto& a : r.adversarial) j["adversarial_accuracy"].push_back({{"attack", a.attack}, {"accuracy", a.accuracy}});
  j["pr"] = json::array();
  for (const auto& p : r.pr) {
    j["pr"].push_back({{"family", std::string(to_string(p.family))},
                       {"gamma", p.gamma},
                       {"value", opt(p.value)},
                       {"correct_rows", p.correct_rows}});
  }
  j["prob_acc"] = json::array();
  for (const auto& p : r.prob_acc) {
    j["prob_acc"].push_back(
        {{"family", std::string(to_string(p.family))}, {"gamma", p.gamma}, {"rho", p.rho}, {"value", opt(p.value)}});
  }
  j["ge"] = {{"clean", opt(r.ge_clean)}, {"attack", r.ge_attack}, {"ar", opt(r.ge_ar)}, {"pr", json::array()}};
  for (const auto& g : r.ge_pr) j["ge"]["pr"].push_back({{"gamma", g.gamma}, {"value", opt(g.value)}});
  if (r.nu) {
    j["nu"] = {{"gamma", r.nu->gamma},
               {"points", r.nu->points},
               {"samples", r.nu->samples},
               {"mean", r.nu->mean},
               {"max", r.nu->max}};
  } else {
    j["nu"] = nullptr;
  }
  j["score"] = {{"attack", r.score_attack}, {"gamma", r.score_gamma}};
  return j;
}

EvalReport report_from_json(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != kSchema) {
      throw DataError(DataError::Kind::bad_format, "unsupported report schema " + j.at("schema").dump());
    }
    EvalReport r;
    r.method = j.at("method").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.test_rows = j.at("test_rows").get<long>();
    r.train_rows = j.at("train_rows").get<long>();
    r.pr_samples = j.at("pr_samples").get<long>();
    r.clean_accuracy = j.at("clean_accuracy").get<double>();
    for (const auto& a : j.at("adversarial_accuracy")) {
      r.adversarial.push_back({a.at("attack").get<std::string>(), a.at("accuracy").get<double>()});
    }
    for (const auto& p : j.at("pr")) {
      r.pr.push_back({parse_noise_family(p.at("family").get<std::string>()), p.at("gamma").get<double>(),
                      opt_from(p.at("value")), p.at("correct_rows").get<long>()});
    }
    for (const auto& p : j.at("prob_acc")) {
      r.prob_acc.push_back({parse_noise_family(p.at("family").get<std::string>()), p.at("gamma").get<double>(),
                            p.at("rho").get<double>(), opt_from(p.at("value"))});
    }
    const json& ge = j.at("ge");
    r.ge_clean = opt_from(ge.at("clean"));
    r.ge_attack = ge.at("attack").get<std::string>();
    r.ge_ar = opt_from(ge.at("ar"));
    for (const auto& g : ge.at("pr")) r.ge_pr.push_back({g.at("gamma").get<double>(), opt_from(g.at("value"))});
    if (!j.at("nu").is_null()) {
      const json& nu = j.at("nu");
      r.nu = NuSummary{nu.at("gamma").get<double>(), nu.at("points").get<long>(), nu.at("samples").get<long>(),
                       nu.at("mean").get<double>(), nu.at("max").get<double>()};
    }
    r.score_attack = j.at("score").at("attack").get<std::string>();
    r.score_gamma = j.at("score").at("gamma").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(DataError::Kind::bad_format, std::string("malformed report: ") + e.what());
  } catch (const ValueError& e) {
    throw DataError(DataError::Kind::bad_format, std::string("malformed report: ") + e.what());
  }
}

void write_report(const std::filesystem::path& dir, const EvalReport& report) {
  write_text(dir / "report.json", to_json(report).dump(2) + "\n");
  if (report.seconds_per_epoch) {
    write_text(dir / "timing.json", json{{"seconds_per_epoch", *report.seconds_per_epoch}}.dump(2) + "\n");
  }
}

EvalReport read_report(const std::filesystem::path& dir) {
  EvalReport r = report_from_json(read_json(dir / "report.json"));
  if (std::filesystem::exists(dir / "timing.json")) {
    const json t = read_json(dir / "timing.json");
    if (t.contains("seconds_per_epoch")) r.seconds_per_epoch = t["seconds_per_epoch"].get<double>();
  }
  return r;
}

const AttackAccuracy* find_attack(const EvalReport& report, const std::string& attack) {
  for (const auto& a : report.adversarial) {
    if (a.attack == attack) return &a;
  }
  return nullptr;
}

const PrEntry* find_pr(const EvalReport& report, NoiseFamily family, double gamma) {
  for (const auto& p : report.pr) {
    if (p.family == family && p.gamma == gamma) return &p;
  }
  return nullptr;
}

const ProbAccEntry* find_prob_acc(const EvalReport& report, NoiseFamily family, double gamma, double rho) {
  for (const auto& p : report.prob_acc) {
    if (p.family == family && p.gamma == gamma && p.rho == rho) return &p;
  }
  return nullptr;
}

const GePrEntry* find_ge_pr(const EvalReport& report, double gamma) {
  for (const auto& g : report.ge_pr) {
    if (g.gamma == gamma) return &g;
  }
  return nullptr;
}

}  // namespace prb
