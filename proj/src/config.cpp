#include "prbench/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "prbench/error.hpp"
#include "prbench/rng.hpp"

namespace prb {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_same_v<T, double>) {
      s += format_double(items[i]);
    } else if constexpr (std::is_same_v<T, std::string>) {
      s += items[i];
    } else {
      s += std::to_string(items[i]);
    }
  }
  return s;
}

// Reads typed values out of the raw map, recording every resolved value for
// the canonical form and every problem for one combined error.
class Resolver {
 public:
  explicit Resolver(std::map<std::string, std::string> raw) : raw_(std::move(raw)) {}

  bool has(const std::string& key) const { return raw_.count(key) != 0; }

  std::string text(const std::string& key, const std::string& fallback) {
    const std::string v = lookup(key).value_or(fallback);
    canonical_[key] = v;
    return v;
  }

  template <typename T>
  T integer(const std::string& key, T fallback) {
    T v = fallback;
    if (auto s = lookup(key)) v = parse_integer<T>(key, *s, fallback);
    canonical_[key] = std::to_string(v);
    return v;
  }

  double real(const std::string& key, double fallback) {
    double v = fallback;
    if (auto s = lookup(key)) v = parse_real(key, *s, fallback);
    canonical_[key] = format_double(v);
    return v;
  }

  std::optional<double> optional_real(const std::string& key) {
    auto s = lookup(key);
    if (!s) return std::nullopt;
    const double v = parse_real(key, *s, 0.0);
    canonical_[key] = format_double(v);
    return v;
  }

  bool boolean(const std::string& key, bool fallback) {
    bool v = fallback;
    if (auto s = lookup(key)) {
      if (*s == "true" || *s == "1") {
        v = true;
      } else if (*s == "false" || *s == "0") {
        v = false;
      } else {
        issue(key, "expected true or false, got '" + *s + "'");
      }
    }
    canonical_[key] = v ? "true" : "false";
    return v;
  }

  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) {
    std::vector<double> v = fallback;
    if (auto s = lookup(key)) {
      v.clear();
      for (const auto& item : split_list(*s)) v.push_back(parse_real(key, item, 0.0));
    }
    canonical_[key] = join(v);
    return v;
  }

  std::vector<std::string> words(const std::string& key, const std::vector<std::string>& fallback) {
    std::vector<std::string> v = fallback;
    if (auto s = lookup(key)) v = split_list(*s);
    canonical_[key] = join(v);
    return v;
  }

  /// Consumes a key without recording it in the canonical form.
  std::optional<std::string> uncanonical(const std::string& key) { return lookup(key); }

  /// Overrides the canonical text of a key after derived defaults are known.
  void set_canonical(const std::string& key, const std::string& value) { canonical_[key] = value; }

  void issue(const std::string& key, const std::string& what) { issues_.push_back(key + ": " + what); }

  std::vector<std::string>& issues() { return issues_; }

  void reject_unknown() {
    for (const auto& [key, value] : raw_) {
      if (!used_.count(key)) issue(key, "unknown key");
    }
  }

  std::string canonical() const {
    std::string out;
    for (const auto& [key, value] : canonical_) out += key + " = " + value + "\n";
    return out;
  }

 private:
  std::optional<std::string> lookup(const std::string& key) {
    used_.insert(key);
    auto it = raw_.find(key);
    if (it == raw_.end()) return std::nullopt;
    return it->second;
  }

  template <typename T>
  T parse_integer(const std::string& key, const std::string& s, T fallback) {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      issue(key, "expected an integer, got '" + s + "'");
      return fallback;
    }
    return v;
  }

  double parse_real(const std::string& key, const std::string& s, double fallback) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      issue(key, "expected a number, got '" + s + "'");
      return fallback;
    }
    return v;
  }

  std::map<std::string, std::string> raw_;
  std::set<std::string> used_;
  std::map<std::string, std::string> canonical_;
  std::vector<std::string> issues_;
};

struct Defaults {
  Index train_size, test_size;
  int epochs;
  int batch_size;
  double lr;
  std::string arch;
  std::vector<Index> hidden;
  double gamma, alpha;
  std::vector<double> radii;
  Index train_subset, nu_points;
};

Defaults defaults_for(const std::string& data, bool full) {
  if (data == "mnist") {
    return {full ? 60000 : 10000, full ? 10000 : 2000, full ? 100 : 20, 128, 0.01, "simplecnn", {}, 0.3, 0.1,
            {0.3, 0.35, 0.4, 0.45}, 1000, 100};
  }
  return {800, 200, 50, 32, 0.05, "mlp", {32, 32}, 0.1, 0.025, {0.05, 0.1}, 800, 50};
}

std::vector<Index> parse_hidden(Resolver& r, const std::vector<Index>& fallback) {
  std::vector<Index> out;
  for (double w : r.reals("model.hidden", std::vector<double>(fallback.begin(), fallback.end()))) {
    if (w < 1 || w != static_cast<double>(static_cast<Index>(w))) {
      r.issue("model.hidden", "widths must be positive integers");
      return fallback;
    }
    out.push_back(static_cast<Index>(w));
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::vector<std::string> issues;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      issues.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) {
      issues.push_back("line " + std::to_string(lineno) + ": empty key");
    } else if (!out.emplace(key, value).second) {
      issues.push_back(key + ": repeated on line " + std::to_string(lineno));
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return out;
}

std::string ExperimentConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

ExperimentConfig parse_config(std::string_view text, std::optional<std::uint64_t> seed) {
  Resolver r(parse_key_values(text));
  ExperimentConfig cfg;
  if (!r.has("method")) r.issue("method", "required key is missing");
  const std::string method = r.text("method", "erm");
  TrainConfig& t = cfg.train;
  try {
    t.method = parse_method(method);
  } catch (const ValueError&) {
    r.issue("method", "unknown method '" + method + "'");
  }
  t.seed = r.integer<std::uint64_t>("seed", 0);
  if (seed) {
    t.seed = *seed;
    r.set_canonical("seed", std::to_string(*seed));
  }
  cfg.scale = r.text("scale", "desk");
  if (cfg.scale != "desk" && cfg.scale != "full") r.issue("scale", "expected desk or full");

  DataConfig& d = cfg.data;
  d.name = r.text("data.name", "mnist");
  if (d.name != "mnist") {
    try {
      parse_synth_kind(d.name);
    } catch (const ValueError&) {
      r.issue("data.name", "unknown dataset '" + d.name + "'");
    }
  }
  const Defaults def = defaults_for(d.name, cfg.scale == "full");
  d.train_size = r.integer<Index>("data.train_size", def.train_size);
  d.test_size = r.integer<Index>("data.test_size", def.test_size);
  if (d.train_size < 1) r.issue("data.train_size", "must be >= 1");
  if (d.test_size < 1) r.issue("data.test_size", "must be >= 1");
  if (d.synthetic()) {
    d.noise = r.real("data.noise", 0.05);
    d.seed = r.integer<std::uint64_t>("data.seed", 0);
  }
  if (auto dir = r.uncanonical("data.dir")) d.dir = *dir;

  const std::string arch = r.text("model.arch", def.arch);
  std::vector<Index> hidden = parse_hidden(r, def.hidden);
  try {
    const Architecture a = parse_architecture(arch);
    if (d.name == "mnist") {
      t.model = a == Architecture::simplecnn ? ModelSpec::simple_cnn(1, 28, 28, 10) : ModelSpec::mlp(784, hidden, 10);
    } else {
      if (a != Architecture::mlp) r.issue("model.arch", "synthetic data needs the mlp architecture");
      t.model = ModelSpec::mlp(2, hidden, d.name == "gaussian-blobs" ? 3 : 2);
    }
  } catch (const ValueError& e) {
    r.issue("model.arch", e.what());
  }

  t.epochs = r.integer<int>("train.epochs", def.epochs);
  t.batch_size = r.integer<int>("train.batch_size", def.batch_size);
  t.lr = r.real("train.lr", def.lr);
  t.momentum = r.real("train.momentum", 0.9);
  t.weight_decay = r.real("train.weight_decay", 3.5e-3);
  t.lambda = r.optional_real("train.lambda");

  AttackSpec& atk = t.attack;
  atk.gamma = r.real("attack.gamma", def.gamma);
  atk.step_size = r.real("attack.alpha", def.alpha);
  atk.steps = r.integer<int>("attack.steps", 10);
  atk.restarts = r.integer<int>("attack.restarts", 1);
  atk.random_start = r.boolean("attack.random_start", true);

  PerturbationSpec& pert = t.perturbation;
  const std::string family = r.text("perturbation.family", "uniform");
  try {
    pert.family = parse_noise_family(family);
  } catch (const ValueError& e) {
    r.issue("perturbation.family", e.what());
  }
  pert.gamma = r.real("perturbation.gamma", atk.gamma);
  pert.sigma = r.optional_real("perturbation.sigma");
  const std::string rule = r.text("perturbation.bound_rule", "clamp");
  try {
    pert.rule = parse_bound_rule(rule);
  } catch (const ValueError& e) {
    r.issue("perturbation.bound_rule", e.what());
  }
  if (std::isfinite(pert.gamma)) r.set_canonical("perturbation.sigma", format_double(pert.scale()));

  t.rho = r.real("cvar.rho", 0.1);
  t.samples = r.integer<int>("cvar.samples", 20);
  t.alpha_steps = r.integer<int>("cvar.inner_steps", 10);
  t.alpha_step_size = r.real("cvar.alpha_step", 0.05);

  t.candidates = r.integer<int>("atpr.candidates", 5);
  t.walk_cap = r.integer<int>("atpr.walk_cap", 50);
  t.candidate_step_min = r.real("atpr.alpha_min", atk.gamma / 10.0);
  t.candidate_step_max = r.real("atpr.alpha_max", atk.gamma / 4.0);
  t.candidate_steps_min = r.integer<int>("atpr.steps_min", 5);
  t.candidate_steps_max = r.integer<int>("atpr.steps_max", 15);
  t.walk_step = r.optional_real("atpr.walk_step");
  t.complete_defaults();
  r.set_canonical("train.lambda", format_double(*t.lambda));

  EvalConfig& e = cfg.eval;
  e.attacks = r.words("eval.attacks", {"pgd20"});
  e.restarts = r.integer<int>("eval.restarts", 1);
  e.random_start = r.boolean("eval.random_start", true);
  e.pr_radii = r.reals("eval.pr_radii", def.radii);
  e.distributions.clear();
  for (const auto& name : r.words("eval.distributions", {"uniform"})) {
    try {
      e.distributions.push_back(parse_noise_family(name));
    } catch (const ValueError& err) {
      r.issue("eval.distributions", err.what());
    }
  }
  e.pr_samples = r.integer<long>("eval.pr_samples", 100);
  e.probacc_rhos = r.reals("eval.probacc_rho", {0.01, 0.05, 0.1});
  e.score_gamma = r.real("eval.score_gamma", def.radii.front());
  e.score_attack = r.text("eval.score_attack", "pgd20");
  e.train_subset = r.integer<Index>("eval.train_subset", std::min(def.train_subset, d.train_size));
  e.nu_points = r.integer<Index>("eval.nu_points", def.nu_points);
  e.nu_samples = r.integer<long>("eval.nu_samples", 1000);

  r.reject_unknown();

  for (const auto& name : e.attacks) {
    try {
      eval_attack(cfg, name);
    } catch (const ValueError& err) {
      r.issue("eval.attacks", err.what());
    }
  }
  if (std::find(e.attacks.begin(), e.attacks.end(), e.score_attack) == e.attacks.end()) {
    r.issue("eval.score_attack", "must be one of eval.attacks");
  }
  if (e.pr_radii.empty()) r.issue("eval.pr_radii", "at least one radius required");
  for (double g : e.pr_radii) {
    if (!(g >= 0.0)) r.issue("eval.pr_radii", "radii must be >= 0");
  }
  if (e.pr_samples < 1) r.issue("eval.pr_samples", "must be >= 1");
  for (double rho : e.probacc_rhos) {
    if (!(rho > 0.0 && rho < 1.0)) r.issue("eval.probacc_rho", "values must lie in (0, 1)");
  }
  if (e.restarts < 1) r.issue("eval.restarts", "must be >= 1");
  if (e.train_subset < 0 || e.train_subset > d.train_size) {
    r.issue("eval.train_subset", "must lie in [0, data.train_size]");
  }
  if (e.nu_points < 0 || e.nu_points > d.test_size) r.issue("eval.nu_points", "must lie in [0, data.test_size]");
  if (e.nu_samples < 1) r.issue("eval.nu_samples", "must be >= 1");
  if (std::find(e.pr_radii.begin(), e.pr_radii.end(), e.score_gamma) == e.pr_radii.end()) {
    r.issue("eval.score_gamma", "must be one of eval.pr_radii");
  }

  if (r.issues().empty()) {
    try {
      t.validate();
    } catch (const ConfigError& err) {
      for (const auto& i : err.issues()) r.issues().push_back(i);
    }
  }
  if (!r.issues().empty()) throw ConfigError(std::move(r.issues()));
  cfg.canonical = r.canonical();
  cfg.hash = fnv1a64(cfg.canonical);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed) {
  std::ifstream f(path);
  if (!f) throw ConfigError({path.string() + ": cannot read config file"});
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), seed);
}

AttackSpec eval_attack(const ExperimentConfig& cfg, const std::string& name) {
  AttackSpec atk = cfg.train.attack;
  atk.restarts = cfg.eval.restarts;
  atk.random_start = cfg.eval.random_start;
  auto steps_after = [&](std::string_view prefix) {
    const std::string digits = name.substr(prefix.size());
    int k = 0;
    const auto r = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (digits.empty() || r.ec != std::errc() || r.ptr != digits.data() + digits.size() || k < 1) {
      throw ValueError("unknown attack '" + name + "'");
    }
    return k;
  };
  if (name == "auto") {
    atk.steps = 20;
    return atk;
  }
  if (name.rfind("pgd-kl", 0) == 0) {
    atk.loss = AttackLoss::kl;
    atk.steps = steps_after("pgd-kl");
  } else if (name.rfind("pgd-cw", 0) == 0) {
    atk.loss = AttackLoss::cw_margin;
    atk.steps = steps_after("pgd-cw");
  } else if (name.rfind("cw", 0) == 0) {
    atk.loss = AttackLoss::cw_margin;
    atk.steps = steps_after("cw");
  } else if (name.rfind("pgd", 0) == 0) {
    atk.loss = AttackLoss::ce;
    atk.steps = steps_after("pgd");
  } else {
    throw ValueError("unknown attack '" + name + "'");
  }
  return atk;
}

}  // namespace prb
