#include "mmimo/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "mmimo/closedform.hpp"
#include "mmimo/deteq.hpp"
#include "mmimo/model.hpp"

#ifndef MMIMO_VERSION
#define MMIMO_VERSION "unknown"
#endif

namespace mmimo::expcli {

std::string_view version() { return MMIMO_VERSION; }

std::string_view to_string(Experiment experiment) {
  switch (experiment) {
    case Experiment::kRateVsN:
      return "rate-vs-n";
    case Experiment::kDofContour:
      return "dof-contour";
    case Experiment::kValidate:
      return "validate";
  }
  return "?";
}

Experiment parse_experiment(std::string_view name) {
  if (name == "rate-vs-n") return Experiment::kRateVsN;
  if (name == "dof-contour") return Experiment::kDofContour;
  if (name == "validate") return Experiment::kValidate;
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

namespace {

std::string strip(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  }
  return out;
}

int parse_positive_int(std::string_view text, std::string_view what) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value < 1) {
    throw ConfigError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

DofRule DofRule::parse(std::string_view text) {
  std::string s = strip(text);
  if (s.rfind("P=", 0) == 0 || s.rfind("p=", 0) == 0) s = s.substr(2);
  if (s == "N") return {Kind::kFull, 1};
  if (s.rfind("N/", 0) == 0) return {Kind::kDivided, parse_positive_int(std::string_view(s).substr(2), "P rule divisor")};
  if (s.empty()) throw ConfigError("empty P rule");
  return {Kind::kExplicit, parse_positive_int(s, "P rule")};
}

std::string DofRule::label() const {
  switch (kind) {
    case Kind::kFull:
      return "N";
    case Kind::kDivided:
      return "N/" + std::to_string(value);
    case Kind::kExplicit:
      return std::to_string(value);
  }
  return "?";
}

int DofRule::dof(int antennas) const {
  switch (kind) {
    case Kind::kFull:
      return antennas;
    case Kind::kDivided:
      return std::clamp(static_cast<int>(std::lround(static_cast<double>(antennas) / value)), 1, antennas);
    case Kind::kExplicit:
      if (value > antennas) {
        throw ConfigError("P=" + std::to_string(value) + " exceeds N=" + std::to_string(antennas));
      }
      return value;
  }
  return antennas;
}

double db_to_linear(double db) { return db == kInfinity ? kInfinity : std::pow(10.0, db / 10.0); }

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

void ExperimentConfig::validate() const {
  if (cells < 1) throw ConfigError("cells must be >= 1");
  if (users < 1) throw ConfigError("users must be >= 1");
  if (!std::isfinite(rho_db)) throw ConfigError("rho_db must be finite");
  if (std::isnan(rho_tau_db) || rho_tau_db == -kInfinity) throw ConfigError("rho_tau_db must be a number or infinite");
  if (alphas.empty()) throw ConfigError("alpha grid is empty");
  for (double a : alphas) {
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  }
  if (lambda < 0.0) throw ConfigError("lambda must be positive (or 0 for the default)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  switch (experiment) {
    case Experiment::kRateVsN:
      if (antennas.empty()) throw ConfigError("antenna grid is empty");
      if (dof_rules.empty()) throw ConfigError("P rule list is empty");
      for (int n : antennas) {
        if (n < 1) throw ConfigError("antenna counts must be >= 1");
        for (const DofRule& rule : dof_rules) rule.dof(n);
      }
      if (trials < 0) throw ConfigError("trials must be >= 0");
      for (int c : eval_cells) {
        if (c < 0 || c >= cells) throw ConfigError("evaluated cell out of range");
      }
      break;
    case Experiment::kDofContour:
      if (rho_n_db.empty()) throw ConfigError("effective SNR grid is empty");
      if (etas.empty()) throw ConfigError("eta grid is empty");
      for (double e : etas) {
        if (!(e > 0.0 && e < 1.0)) throw ConfigError("eta must lie in (0, 1)");
      }
      for (double v : rho_n_db) {
        if (!std::isfinite(v)) throw ConfigError("effective SNR values must be finite");
      }
      break;
    case Experiment::kValidate:
      if (trials < 1) throw ConfigError("validation needs at least one trial");
      break;
  }
}

namespace {

template <typename T, typename F>
std::string join(const std::vector<T>& values, F&& fmt, const char* sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += fmt(values[i]);
  }
  return out;
}

std::string format_rho_tau(double db) { return db == kInfinity ? "infinite" : format_number(db); }

std::string format_cells(const std::vector<int>& cells) {
  if (cells.empty()) return "all";
  return join(cells, [](int c) { return std::to_string(c); });
}

}  // namespace

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
  auto num = [](double v) { return format_number(v); };
  std::vector<std::pair<std::string, std::string>> out = {
      {"experiment", std::string(to_string(experiment))},
      {"version", std::string(version())},
      {"cells", std::to_string(cells)},
      {"users", std::to_string(users)},
      {"rho_db", format_number(rho_db)},
      {"rho_tau_db", format_rho_tau(rho_tau_db)},
      {"alpha", join(alphas, num)},
      {"lambda", lambda > 0.0 ? format_number(lambda) : "default"},
      {"seed", std::to_string(seed)},
      {"threads", std::to_string(threads)},
  };
  if (experiment == Experiment::kRateVsN) {
    out.emplace_back("antennas", join(antennas, [](int n) { return std::to_string(n); }));
    out.emplace_back("p_rules", join(dof_rules, [](const DofRule& r) { return "P=" + r.label(); }));
    out.emplace_back("trials", std::to_string(trials));
    out.emplace_back("eval_cells", format_cells(eval_cells));
  } else if (experiment == Experiment::kDofContour) {
    out.emplace_back("rho_n_db", join(rho_n_db, num));
    out.emplace_back("eta", join(etas, num));
  } else {
    out.emplace_back("trials", std::to_string(trials));
    out.emplace_back("checks", checks.empty() ? "all" : join(checks, [](const std::string& s) { return s; }));
    for (const auto& [name, value] : tolerances) out.emplace_back("tolerance " + name, format_number(value));
  }
  return out;
}

ExperimentConfig default_config(Experiment experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.cells = 4;
  c.users = 10;
  c.rho_db = 0.0;
  c.seed = 1;
  switch (experiment) {
    case Experiment::kRateVsN:
      c.alphas = {0.1};
      for (int n = 20; n <= 400; n += 20) c.antennas.push_back(n);
      c.dof_rules = {DofRule{DofRule::Kind::kFull, 1}, DofRule{DofRule::Kind::kDivided, 3}};
      c.trials = 500;
      c.eval_cells = {0};
      c.output = "rate_vs_n.csv";
      break;
    case Experiment::kDofContour:
      c.alphas = {0.3, 0.1};
      for (int db = -10; db <= 40; ++db) c.rho_n_db.push_back(db);
      c.etas = {0.5, 0.6, 0.7, 0.8, 0.9};
      c.output = "dof_contour.csv";
      break;
    case Experiment::kValidate:
      c.alphas = {0.1};
      c.trials = 500;
      c.output = "validation.csv";
      break;
  }
  return c;
}

namespace {

template <typename T>
std::vector<T> scalar_or_list(const YAML::Node& node) {
  std::vector<T> out;
  if (node.IsSequence()) {
    for (const auto& item : node) out.push_back(item.as<T>());
  } else {
    out.push_back(node.as<T>());
  }
  return out;
}

template <typename T>
std::vector<T> expand_range(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence() || node.size() != 3) throw ConfigError(key + " must be [start, stop, step]");
  const T start = node[0].as<T>();
  const T stop = node[1].as<T>();
  const T step = node[2].as<T>();
  if (!(step > T(0)) || stop < start) throw ConfigError(key + " needs start <= stop and a positive step");
  std::vector<T> out;
  const long count = static_cast<long>(std::floor(static_cast<double>(stop - start) / step + 1e-9)) + 1;
  for (long i = 0; i < count; ++i) out.push_back(static_cast<T>(start + static_cast<T>(i) * step));
  return out;
}

double parse_rho_tau(const YAML::Node& node) {
  const std::string text = node.as<std::string>();
  if (text == "infinite" || text == "inf" || text == "infinity") return kInfinity;
  return node.as<double>();
}

void apply_key(ExperimentConfig& c, const std::string& key, const YAML::Node& value) {
  if (key == "experiment") {
    if (parse_experiment(value.as<std::string>()) != c.experiment) {
      throw ConfigError("config is for experiment '" + value.as<std::string>() + "', not '" +
                        std::string(to_string(c.experiment)) + "'");
    }
  } else if (key == "cells" || key == "L") {
    c.cells = value.as<int>();
  } else if (key == "users" || key == "K") {
    c.users = value.as<int>();
  } else if (key == "rho_db") {
    c.rho_db = value.as<double>();
  } else if (key == "rho_tau_db") {
    c.rho_tau_db = parse_rho_tau(value);
  } else if (key == "alpha") {
    c.alphas = scalar_or_list<double>(value);
  } else if (key == "lambda") {
    c.lambda = value.as<double>();
  } else if (key == "seed") {
    c.seed = value.as<std::uint64_t>();
  } else if (key == "threads") {
    c.threads = value.as<int>();
  } else if (key == "output") {
    c.output = value.as<std::string>();
  } else if (key == "antennas" || key == "N") {
    c.antennas = scalar_or_list<int>(value);
  } else if (key == "antennas_range") {
    c.antennas = expand_range<int>(value, key);
  } else if (key == "p_rules") {
    c.dof_rules.clear();
    for (const auto& s : scalar_or_list<std::string>(value)) c.dof_rules.push_back(DofRule::parse(s));
  } else if (key == "trials") {
    c.trials = value.as<int>();
  } else if (key == "eval_cells") {
    if (value.IsScalar() && value.as<std::string>() == "all") {
      c.eval_cells.clear();
    } else {
      c.eval_cells = scalar_or_list<int>(value);
    }
  } else if (key == "rho_n_db") {
    c.rho_n_db = scalar_or_list<double>(value);
  } else if (key == "rho_n_db_range") {
    c.rho_n_db = expand_range<double>(value, key);
  } else if (key == "eta") {
    c.etas = scalar_or_list<double>(value);
  } else if (key == "checks") {
    c.checks = scalar_or_list<std::string>(value);
    if (c.checks.empty()) throw ConfigError("empty check selection");
  } else if (key == "tolerances") {
    if (!value.IsMap()) throw ConfigError("tolerances must be a mapping of name: value");
    for (const auto& kv : value) c.tolerances[kv.first.as<std::string>()] = kv.second.as<double>();
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, Experiment experiment) {
  ExperimentConfig c = default_config(experiment);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (root.IsNull()) return c;
  if (!root.IsMap()) throw ConfigError("config must be a key: value mapping");
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    try {
      apply_key(c, key, kv.second);
    } catch (const YAML::Exception& e) {
      throw ConfigError("bad value for '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path, Experiment experiment) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), experiment);
}

// ---------------------------------------------------------------------------
// Sweep points

std::vector<RatePoint> rate_points(const ExperimentConfig& config) {
  std::vector<RatePoint> out;
  for (double alpha : config.alphas)
    for (int n : config.antennas)
      for (const DofRule& rule : config.dof_rules) out.push_back({n, rule, alpha});
  return out;
}

namespace {

std::string sanitize(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return text;
}

model::SystemConfig system_for(const ExperimentConfig& config, int antennas) {
  model::SystemConfig s;
  s.cells = config.cells;
  s.users = config.users;
  s.antennas = antennas;
  s.rho = db_to_linear(config.rho_db);
  s.rho_tau = db_to_linear(config.rho_tau_db);
  s.seed = config.seed;
  return s;
}

}  // namespace

RateResult evaluate_rate_point(const ExperimentConfig& config, const RatePoint& point, int mc_threads,
                               bool keep_samples) {
  const double nan = std::nan("");
  RateResult out;
  out.point = point;
  out.mc_mf = out.se_mf = out.de_mf = out.mc_mmse = out.se_mmse = out.de_mmse = nan;
  out.cf_mf = out.cf_mmse = nan;
  try {
    const model::SystemConfig system = system_for(config, point.antennas);
    system.validate();
    out.dof = point.rule.dof(point.antennas);
    out.lambda = config.lambda > 0.0 ? config.lambda : detect::default_lambda(system);
    const auto profile = model::build_simple_profile(
        system, model::SimpleModelSpec::canonical(point.antennas, out.dof, point.alpha));

    std::vector<int> cells = config.eval_cells;
    if (cells.empty()) {
      for (int j = 0; j < system.cells; ++j) cells.push_back(j);
    }

    if (config.trials > 0) {
      detect::MonteCarloOptions mc;
      mc.trials = config.trials;
      mc.lambda = out.lambda;
      mc.cells = cells;
      mc.threads = mc_threads;
      detect::RateSamples samples = detect::simulate_rates(profile, system, mc);
      const auto mf = detect::summarize(samples.mf);
      const auto mmse = detect::summarize(samples.mmse);
      out.mc_mf = mf.network_mean;
      out.se_mf = mf.network_std_error;
      out.mc_mmse = mmse.network_mean;
      out.se_mmse = mmse.network_std_error;
      if (keep_samples) out.samples = std::move(samples);
    }

    double de_mf = 0.0, de_mmse = 0.0;
    int count = 0;
    for (int j : cells) {
      const auto stats = model::estimator_statistics(profile, system, j);
      const auto mf = deteq::de_sinr_mf(profile, stats, system);
      const auto mmse = deteq::de_sinr_mmse(profile, stats, system, out.lambda);
      for (int m = 0; m < system.users; ++m) {
        de_mf += deteq::de_rate(mf.users[m].gamma);
        de_mmse += deteq::de_rate(mmse.users[m].gamma);
        ++count;
      }
    }
    out.de_mf = de_mf / count;
    out.de_mmse = de_mmse / count;

    if (system.noiseless_training()) {
      closedform::SimpleSystemPoint p{system.rho * point.antennas,
                                      static_cast<double>(out.dof) / system.users, point.alpha, system.cells,
                                      out.lambda};
      out.cf_mf = closedform::rate_mf_simple(p);
      try {
        out.cf_mmse = closedform::rate_mmse_simple(p);
      } catch (const SingularityError&) {
      }
    }
  } catch (const std::exception& e) {
    out.status = sanitize(std::string("error: ") + e.what());
  }
  return out;
}

std::vector<DofPoint> dof_points(const ExperimentConfig& config) {
  std::vector<DofPoint> out;
  for (double alpha : config.alphas)
    for (double eta : config.etas)
      for (double snr : config.rho_n_db) out.push_back({alpha, snr, eta});
  return out;
}

DofResult evaluate_dof_point(const ExperimentConfig& config, const DofPoint& point) {
  DofResult out;
  out.point = point;
  const double snr = db_to_linear(point.rho_n_db);
  out.lambda = config.lambda > 0.0 ? config.lambda : 1.0 / snr;
  const auto limit = closedform::gamma_rate_infinity(point.alpha, config.cells);
  out.rate_inf = limit.rate_inf;
  out.target_rate = point.eta * limit.rate_inf;
  try {
    const auto mf = closedform::dof_required_mf(point.eta, snr, point.alpha, config.cells);
    out.dof_mf = mf.dof_per_user;
    out.status_mf = std::string(closedform::to_string(mf.status));
  } catch (const std::exception& e) {
    out.dof_mf = std::nan("");
    out.status_mf = sanitize(std::string("error: ") + e.what());
  }
  try {
    const auto mmse = closedform::dof_required_mmse(point.eta, snr, point.alpha, config.cells, out.lambda);
    out.dof_mmse = mmse.dof_per_user;
    out.status_mmse = std::string(closedform::to_string(mmse.status));
  } catch (const std::exception& e) {
    out.dof_mmse = std::nan("");
    out.status_mmse = sanitize(std::string("error: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV output

std::vector<std::string> rate_columns() {
  return {"experiment", "version",    "seed",        "L",        "K",           "N",
          "P_rule",     "P",          "rho_db",      "rho_tau_db", "alpha",     "lambda",
          "trials",     "eval_cells", "mc_rate_mf",  "se_mf",    "de_rate_mf",  "mc_rate_mmse",
          "se_mmse",    "de_rate_mmse", "cf_rate_mf", "cf_rate_mmse", "status"};
}

std::vector<std::string> dof_columns() {
  return {"experiment", "version", "seed",        "L",      "alpha",     "rho_n_db",    "rho_n",     "eta",
          "lambda",     "rate_inf", "target_rate", "dof_mf", "status_mf", "dof_mmse", "status_mmse"};
}

namespace {

using Row = std::vector<std::string>;

const std::vector<std::string> kRateKey = {"seed",   "L",      "K",      "N",          "P_rule",
                                           "rho_db", "rho_tau_db", "alpha", "trials", "eval_cells"};
const std::vector<std::string> kDofKey = {"seed", "L", "alpha", "rho_n_db", "eta", "lambda"};

Row rate_row(const ExperimentConfig& c, const RatePoint& p, const RateResult* r) {
  const std::string lambda = c.lambda > 0.0 ? format_number(c.lambda)
                                            : format_number(1.0 / (db_to_linear(c.rho_db) * p.antennas));
  Row row = {std::string(to_string(c.experiment)),
             std::string(version()),
             std::to_string(c.seed),
             std::to_string(c.cells),
             std::to_string(c.users),
             std::to_string(p.antennas),
             p.rule.label(),
             r ? std::to_string(r->dof) : "",
             format_number(c.rho_db),
             format_rho_tau(c.rho_tau_db),
             format_number(p.alpha),
             lambda,
             std::to_string(c.trials),
             format_cells(c.eval_cells)};
  if (r) {
    for (double v : {r->mc_mf, r->se_mf, r->de_mf, r->mc_mmse, r->se_mmse, r->de_mmse, r->cf_mf, r->cf_mmse})
      row.push_back(format_number(v));
    row.push_back(r->status);
  }
  return row;
}

Row dof_row(const ExperimentConfig& c, const DofPoint& p, const DofResult* r) {
  const double snr = db_to_linear(p.rho_n_db);
  Row row = {std::string(to_string(c.experiment)),
             std::string(version()),
             std::to_string(c.seed),
             std::to_string(c.cells),
             format_number(p.alpha),
             format_number(p.rho_n_db),
             format_number(snr),
             format_number(p.eta),
             format_number(c.lambda > 0.0 ? c.lambda : 1.0 / snr)};
  if (r) {
    row.push_back(format_number(r->rate_inf));
    row.push_back(format_number(r->target_rate));
    row.push_back(format_number(r->dof_mf));
    row.push_back(r->status_mf);
    row.push_back(format_number(r->dof_mmse));
    row.push_back(r->status_mmse);
  }
  return row;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string join_row(const Row& row) { return join(row, [](const std::string& s) { return s; }, ","); }

std::vector<std::size_t> key_indices(const std::vector<std::string>& columns, const std::vector<std::string>& key) {
  std::vector<std::size_t> out;
  for (const auto& name : key) {
    out.push_back(static_cast<std::size_t>(std::find(columns.begin(), columns.end(), name) - columns.begin()));
  }
  return out;
}

std::string row_key(const Row& row, const std::vector<std::size_t>& indices) {
  std::string key;
  for (std::size_t i : indices) {
    key += i < row.size() ? row[i] : "";
    key += '\x1f';
  }
  return key;
}

/// Reads the keys of an existing output file, trimming a partial last line.
/// Returns nullopt when the file is absent or empty.
std::optional<std::set<std::string>> existing_keys(const std::string& path, const std::vector<std::string>& columns,
                                                   const std::vector<std::size_t>& indices) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::exists(path, ec) || fs::file_size(path, ec) == 0) return std::nullopt;

  std::string content;
  {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    content = buffer.str();
  }
  if (content.back() != '\n') {
    const std::size_t cut = content.rfind('\n');
    content.resize(cut == std::string::npos ? 0 : cut + 1);
    fs::resize_file(path, content.size());
    if (content.empty()) return std::nullopt;
  }

  std::set<std::string> keys;
  bool header_seen = false;
  std::istringstream lines(content);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (split_csv(line) != columns) throw ConfigError("existing " + path + " has different columns; refusing to append");
      header_seen = true;
      continue;
    }
    const Row row = split_csv(line);
    if (row.size() != columns.size()) continue;
    keys.insert(row_key(row, indices));
  }
  if (!header_seen) return std::nullopt;
  return keys;
}

struct SweepSpec {
  std::vector<std::string> columns;
  std::vector<std::string> key;
  std::size_t count = 0;
  std::function<Row(std::size_t)> skeleton;               // key columns only
  std::function<Row(std::size_t, int mc_threads)> compute;  // full row
};

SweepSummary run_sweep(const ExperimentConfig& config, const SweepSpec& spec, bool dry_run) {
  const auto indices = key_indices(spec.columns, spec.key);
  const bool to_stdout = config.output == "-" || config.output.empty();

  std::optional<std::set<std::string>> done;
  if (!to_stdout) done = existing_keys(config.output, spec.columns, indices);

  std::ofstream file;
  if (!to_stdout) {
    file.open(config.output, done ? std::ios::app : std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open " + config.output + " for writing");
  }
  std::ostream& out = to_stdout ? std::cout : file;
  if (!done) {
    for (const auto& [key, value] : config.echo()) out << "# " << key << ": " << value << '\n';
    out << join_row(spec.columns) << '\n';
    out.flush();
  }

  SweepSummary summary;
  if (dry_run) return summary;

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < spec.count; ++i) {
    if (done && done->count(row_key(spec.skeleton(i), indices))) {
      ++summary.reused;
    } else {
      pending.push_back(i);
    }
  }
  if (pending.empty()) return summary;

  const int workers = std::max(1, std::min<int>(config.threads, static_cast<int>(pending.size())));
  const int mc_threads = std::max(1, config.threads / workers);

  std::mutex mutex;
  std::condition_variable ready;
  std::vector<std::optional<Row>> results(pending.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= pending.size()) return;
      Row row;
      try {
        row = spec.compute(pending[slot], mc_threads);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!failure) failure = std::current_exception();
        next = pending.size();
        ready.notify_all();
        return;
      }
      std::lock_guard<std::mutex> lock(mutex);
      results[slot] = std::move(row);
      ready.notify_all();
    }
  };

  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);

  // Single writer: rows leave in sweep order whatever the completion order.
  for (std::size_t slot = 0; slot < pending.size(); ++slot) {
    Row row;
    {
      std::unique_lock<std::mutex> lock(mutex);
      ready.wait(lock, [&] { return results[slot].has_value() || failure; });
      if (!results[slot]) break;
      row = std::move(*results[slot]);
      results[slot].reset();
    }
    out << join_row(row) << '\n';
    out.flush();
    ++summary.computed;
    if (std::any_of(row.begin(), row.end(), [](const std::string& cell) { return cell.rfind("error", 0) == 0; }))
      ++summary.failed;
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return summary;
}

}  // namespace

SweepSummary run_rate_vs_n(const ExperimentConfig& config) {
  if (config.experiment != Experiment::kRateVsN) throw ConfigError("config is not a rate-vs-n experiment");
  config.validate();
  const auto points = rate_points(config);
  SweepSpec spec;
  spec.columns = rate_columns();
  spec.key = kRateKey;
  spec.count = points.size();
  spec.skeleton = [&](std::size_t i) { return rate_row(config, points[i], nullptr); };
  spec.compute = [&](std::size_t i, int mc_threads) {
    const RateResult r = evaluate_rate_point(config, points[i], mc_threads);
    return rate_row(config, points[i], &r);
  };
  return run_sweep(config, spec, config.trials == 0);
}

SweepSummary run_dof_contour(const ExperimentConfig& config) {
  if (config.experiment != Experiment::kDofContour) throw ConfigError("config is not a dof-contour experiment");
  config.validate();
  const auto points = dof_points(config);
  SweepSpec spec;
  spec.columns = dof_columns();
  spec.key = kDofKey;
  spec.count = points.size();
  spec.skeleton = [&](std::size_t i) { return dof_row(config, points[i], nullptr); };
  spec.compute = [&](std::size_t i, int) {
    const DofResult r = evaluate_dof_point(config, points[i]);
    return dof_row(config, points[i], &r);
  };
  return run_sweep(config, spec, false);
}

}  // namespace mmimo::expcli
