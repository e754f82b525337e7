#pragma once

// Driver layer behind the frbm command-line tool: run configuration, presets,
// the per-subdomain pipeline and the CSV writers of every subcommand.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "frbm/certify.hpp"
#include "frbm/eim.hpp"
#include "frbm/error.hpp"
#include "frbm/greedy.hpp"
#include "frbm/model_io.hpp"
#include "frbm/oracle.hpp"
#include "frbm/rbm.hpp"
#include "frbm/rhs.hpp"
#include "frbm/truth.hpp"

namespace frbm {

// ------------------------------------------------------------ configuration

struct RunConfig {
  int n = 16;
  int M = 40;
  double gamma_d1 = 6.0;
  double gamma_d2 = 2.0;
  double y_plus = 2.233;
  double s_min = 0.03;
  double s_max = 0.97;

  std::size_t eim_s_points = 257;
  int eim_y_refine = 16;
  std::size_t eim_q_max_d1 = 25;
  std::size_t eim_q_max_d2 = 25;
  double eim_tol = 1e-12;

  std::size_t train_s_points = 257;
  std::size_t train2_s_points = 33;
  std::size_t train2_nu_points = 33;
  std::size_t test_s_points = 100;
  std::size_t test2_s_points = 12;
  std::size_t test2_nu_points = 12;

  std::size_t n_max = 15;
  std::string greedy_mode = "residual_free";
  double greedy_tol = 0.0;
  bool random_first = false;
  unsigned long seed = 1;

  std::size_t scm_constraints = 12;
  std::size_t certify_points = 64;
  int oracle_J = 20;
  std::size_t bench_queries = 312;

  std::string rhs = "example1";
  std::string rhs_modes;
  std::string subdomains = "D1,D2";

  std::string out_dir = ".";
  int threads = 0;

  double gamma(Subdomain d) const { return d == Subdomain::D1 ? gamma_d1 : gamma_d2; }
  std::size_t eim_q_max(Subdomain d) const { return d == Subdomain::D1 ? eim_q_max_d1 : eim_q_max_d2; }
  ParameterRange range() const { return {s_min, s_max}; }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + text + "'");
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ConfigKey {
  const char* name;
  bool hashed;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
ConfigKey number_key(const char* name, T RunConfig::*field, bool hashed = true) {
  return {name, hashed,
          [name, field](RunConfig& c, const std::string& v) { c.*field = parse_number<T>(name, v); },
          [field](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*field);
            } else {
              return std::to_string(c.*field);
            }
          }};
}

inline ConfigKey string_key(const char* name, std::string RunConfig::*field, bool hashed = true) {
  return {name, hashed, [field](RunConfig& c, const std::string& v) { c.*field = v; },
          [field](const RunConfig& c) { return c.*field; }};
}

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back(number_key("n", &RunConfig::n));
    k.push_back(number_key("M", &RunConfig::M));
    k.push_back(number_key("gamma_d1", &RunConfig::gamma_d1));
    k.push_back(number_key("gamma_d2", &RunConfig::gamma_d2));
    k.push_back(number_key("y_plus", &RunConfig::y_plus));
    k.push_back(number_key("s_min", &RunConfig::s_min));
    k.push_back(number_key("s_max", &RunConfig::s_max));
    k.push_back(number_key("eim_s_points", &RunConfig::eim_s_points));
    k.push_back(number_key("eim_y_refine", &RunConfig::eim_y_refine));
    k.push_back(number_key("eim_q_max_d1", &RunConfig::eim_q_max_d1));
    k.push_back(number_key("eim_q_max_d2", &RunConfig::eim_q_max_d2));
    k.push_back(number_key("eim_tol", &RunConfig::eim_tol));
    k.push_back(number_key("train_s_points", &RunConfig::train_s_points));
    k.push_back(number_key("train2_s_points", &RunConfig::train2_s_points));
    k.push_back(number_key("train2_nu_points", &RunConfig::train2_nu_points));
    k.push_back(number_key("test_s_points", &RunConfig::test_s_points));
    k.push_back(number_key("test2_s_points", &RunConfig::test2_s_points));
    k.push_back(number_key("test2_nu_points", &RunConfig::test2_nu_points));
    k.push_back(number_key("n_max", &RunConfig::n_max));
    k.push_back(string_key("greedy_mode", &RunConfig::greedy_mode));
    k.push_back(number_key("greedy_tol", &RunConfig::greedy_tol));
    k.push_back({"random_first", true,
                 [](RunConfig& c, const std::string& v) { c.random_first = parse_bool("random_first", v); },
                 [](const RunConfig& c) { return std::string(c.random_first ? "true" : "false"); }});
    k.push_back(number_key("seed", &RunConfig::seed));
    k.push_back(number_key("scm_constraints", &RunConfig::scm_constraints));
    k.push_back(number_key("certify_points", &RunConfig::certify_points));
    k.push_back(number_key("oracle_J", &RunConfig::oracle_J));
    k.push_back(number_key("bench_queries", &RunConfig::bench_queries));
    k.push_back(string_key("rhs", &RunConfig::rhs));
    k.push_back(string_key("rhs_modes", &RunConfig::rhs_modes));
    k.push_back(string_key("subdomains", &RunConfig::subdomains));
    k.push_back(string_key("out_dir", &RunConfig::out_dir, false));
    k.push_back(number_key("threads", &RunConfig::threads, false));
    std::sort(k.begin(), k.end(), [](const ConfigKey& a, const ConfigKey& b) { return std::string(a.name) < b.name; });
    return k;
  }();
  return keys;
}

}  // namespace detail

inline void config_set(RunConfig& c, const std::string& key, const std::string& value) {
  for (const auto& k : detail::config_keys()) {
    if (key == k.name) {
      k.set(c, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

inline std::string config_get(const RunConfig& c, const std::string& key) {
  for (const auto& k : detail::config_keys())
    if (key == k.name) return k.get(c);
  throw ConfigError("unknown config key '" + key + "'");
}

/// Applies one "key=value" assignment.
inline void config_assign(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  config_set(c, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

/// Key-value text: one "key = value" per line, '#' starts a comment.
inline void config_parse(RunConfig& c, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    try {
      config_assign(c, line);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void config_load(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  config_parse(c, ss.str());
}

inline RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.n = 50;
    c.M = 158;
    c.eim_s_points = 1025;
    c.eim_q_max_d1 = 17;
    c.eim_q_max_d2 = 22;
    c.eim_tol = 0.0;
    c.train_s_points = 1025;
    c.train2_s_points = 257;
    c.train2_nu_points = 257;
    c.test_s_points = 312;
    c.test2_s_points = 30;
    c.test2_nu_points = 30;
    c.n_max = 20;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

/// Sorted "key=value" lines of every key that affects results.
inline std::string config_canonical(const RunConfig& c) {
  std::string out;
  for (const auto& k : detail::config_keys()) {
    if (!k.hashed) continue;
    out += k.name;
    out += '=';
    out += k.get(c);
    out += '\n';
  }
  return out;
}

inline std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(config_canonical(c))));
  return buf;
}

inline RhsSpec config_rhs(const RunConfig& c) {
  RhsSpec spec;
  spec.kind = rhs_kind_from_string(c.rhs);
  if (spec.kind == RhsKind::Modal) spec.modes = parse_modal_terms(c.rhs_modes);
  return spec;
}

inline std::vector<Subdomain> config_subdomains(const RunConfig& c) {
  std::vector<Subdomain> out;
  std::size_t pos = 0;
  while (pos <= c.subdomains.size()) {
    const std::size_t end = std::min(c.subdomains.find(',', pos), c.subdomains.size());
    const std::string item = detail::trim(c.subdomains.substr(pos, end - pos));
    if (!item.empty()) {
      const Subdomain d = subdomain_from_string(item);
      if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
    }
    pos = end + 1;
  }
  if (out.empty()) throw ConfigError("no subdomains selected");
  return out;
}

inline void config_validate(const RunConfig& c) {
  if (c.n < 2) throw ConfigError("n must be >= 2");
  if (c.M < 1) throw ConfigError("M must be >= 1");
  if (!(c.gamma_d1 >= 1.0) || !(c.gamma_d2 >= 1.0)) throw ConfigError("gamma must be >= 1");
  if (!(c.y_plus > 0.0)) throw ConfigError("y_plus must be positive");
  if (!(c.s_min > 0.0 && c.s_min < 0.5 && c.s_max > 0.5 && c.s_max < 1.0)) {
    throw ConfigError("need 0 < s_min < 0.5 < s_max < 1");
  }
  if (c.eim_s_points < 2 || c.eim_y_refine < 1) throw ConfigError("EIM grids too small");
  if (c.eim_q_max_d1 == 0 || c.eim_q_max_d2 == 0) throw ConfigError("EIM Q_max must be >= 1");
  if (c.train_s_points < 2 || c.test_s_points < 1) throw ConfigError("training/test grids too small");
  if (c.train2_s_points < 2 || c.train2_nu_points < 2 || c.test2_s_points < 1 || c.test2_nu_points < 1) {
    throw ConfigError("two-parameter grids too small");
  }
  if (c.n_max == 0) throw ConfigError("n_max must be >= 1");
  if (c.scm_constraints == 0) throw ConfigError("scm_constraints must be >= 1");
  if (c.certify_points == 0) throw ConfigError("certify_points must be >= 1");
  if (c.oracle_J < 1) throw ConfigError("oracle_J must be >= 1");
  if (c.bench_queries == 0) throw ConfigError("bench_queries must be >= 1");
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  greedy_mode_from_string(c.greedy_mode);
  config_rhs(c);
  config_subdomains(c);
}

// ------------------------------------------------------------ CSV output

/// CSV table whose first line is "# config_hash=<hash>". Doubles are written
/// with 17 significant digits so reruns compare bit-exactly.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& hash, const std::vector<std::string>& columns) : path_(path) {
    out_.open(path, std::ios::binary);
    if (!out_) throw IoError("cannot write '" + path + "'");
    out_ << "# config_hash=" << hash << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
  }

  CsvWriter& cell(const std::string& v) {
    out_ << (first_ ? "" : ",") << v;
    first_ = false;
    return *this;
  }
  CsvWriter& cell(double v) { return cell(detail::format_double(v)); }
  CsvWriter& cell(std::size_t v) { return cell(std::to_string(v)); }
  CsvWriter& cell(int v) { return cell(std::to_string(v)); }

  void end_row() {
    out_ << '\n';
    first_ = true;
    if (!out_) throw IoError("write failed on '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream out_;
  bool first_ = true;
};

// ------------------------------------------------------------ pipeline

inline std::string output_path(const RunConfig& c, const std::string& file) {
  std::error_code ec;
  std::filesystem::create_directories(c.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + c.out_dir + "': " + ec.message());
  return (std::filesystem::path(c.out_dir) / file).string();
}

inline std::string model_file(Subdomain d) { return std::string("rb_") + to_string(d) + ".frbm"; }
inline std::string eim_file(Subdomain d) { return std::string("eim_") + to_string(d) + ".frbm"; }

inline std::vector<double> eim_s_grid(const RunConfig& c, Subdomain d) {
  const auto [lo, hi] = subdomain_range(d, c.range());
  return equispaced(lo, hi, c.eim_s_points);
}

inline EIMModel build_subdomain_eim(const RunConfig& c, Subdomain d, int M) {
  return eim_build(d, eim_y_grid(d, M, c.eim_y_refine, c.gamma(d), c.y_plus), eim_s_grid(c, d), c.eim_q_max(d),
                   c.eim_tol);
}

inline std::vector<Parameter> config_training(const RunConfig& c, Subdomain d) {
  if (rhs_depends_on_nu(config_rhs(c))) return training_grid(d, c.range(), c.train2_s_points, c.train2_nu_points);
  return training_grid(d, c.range(), c.train_s_points);
}

inline std::vector<Parameter> config_test(const RunConfig& c, Subdomain d, const std::vector<Parameter>& training) {
  if (rhs_depends_on_nu(config_rhs(c))) {
    return test_grid(d, c.range(), c.test2_s_points, c.test2_nu_points, training);
  }
  return test_grid(d, c.range(), c.test_s_points, 1, training);
}

inline std::vector<double> distinct_s(const std::vector<Parameter>& points) {
  std::vector<double> s;
  for (const auto& p : points) s.push_back(p.s);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

/// Everything the offline stage of one subdomain needs.
struct SubdomainProblem {
  Subdomain subdomain = Subdomain::D1;
  RhsSpec rhs;
  std::shared_ptr<const TruthDiscretization> truth;
  std::unique_ptr<AffineTruthOperator> op;
  std::vector<Vector> loads;
};

inline SubdomainProblem make_problem(const TruthSpec& spec, const EIMModel& eim, const RhsSpec& rhs) {
  SubdomainProblem p;
  p.subdomain = eim.subdomain;
  p.rhs = rhs;
  p.truth = make_truth(spec);
  p.op = std::make_unique<AffineTruthOperator>(p.truth, eim);
  p.loads = assemble_loads(*p.truth, rhs);
  return p;
}

inline TruthSpec config_truth_spec(const RunConfig& c, Subdomain d) { return {c.n, c.M, c.gamma(d), c.y_plus}; }

struct OfflineResult {
  SCMModel scm;
  GreedyResult greedy;
  double scm_seconds = 0.0;
  double greedy_seconds = 0.0;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline OfflineResult run_offline(const RunConfig& c, const SubdomainProblem& p, const std::vector<Parameter>& training) {
  OfflineResult r;
  auto t0 = std::chrono::steady_clock::now();
  r.scm = scm_build(*p.op, distinct_s(training), SCMOptions{c.scm_constraints}, c.threads);
  r.scm_seconds = seconds_since(t0);
  GreedyOptions go;
  go.n_max = c.n_max;
  go.tol = c.greedy_tol;
  go.mode = greedy_mode_from_string(c.greedy_mode);
  go.random_first = c.random_first;
  go.seed = c.seed;
  go.threads = c.threads;
  t0 = std::chrono::steady_clock::now();
  r.greedy = greedy_offline(*p.op, p.loads, p.rhs, training, go, &r.scm);
  r.greedy_seconds = seconds_since(t0);
  return r;
}

inline std::string timestamp_utc() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::vector<std::pair<std::string, std::string>> model_metadata(const RunConfig& c, Subdomain d) {
  return {{"config_hash", config_hash(c)},
          {"created", timestamp_utc()},
          {"truth.n", std::to_string(c.n)},
          {"truth.M", std::to_string(c.M)},
          {"truth.gamma", detail::format_double(c.gamma(d))},
          {"truth.y_plus", detail::format_double(c.y_plus)},
          {"range.s_min", detail::format_double(c.s_min)},
          {"range.s_max", detail::format_double(c.s_max)}};
}

inline TruthSpec bundle_truth_spec(const ModelBundle& b, const std::string& path) {
  auto need = [&](const std::string& key) {
    auto v = b.get(key);
    if (!v) throw IoError(path + ": missing metadata key '" + key + "'");
    return *v;
  };
  TruthSpec spec;
  spec.n = detail::parse_number<int>("truth.n", need("truth.n"));
  spec.M = detail::parse_number<int>("truth.M", need("truth.M"));
  spec.gamma = detail::parse_number<double>("truth.gamma", need("truth.gamma"));
  spec.y_plus = detail::parse_number<double>("truth.y_plus", need("truth.y_plus"));
  return spec;
}

inline ModelBundle load_reduced_bundle(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("model file '" + path + "' not found (run train first)");
  ModelBundle b = load_bundle(path);
  if (!b.reduced) throw IoError(path + ": file holds no reduced model");
  return b;
}

// ------------------------------------------------------------ commands

inline int cmd_build_eim(const RunConfig& c, std::ostream& log) {
  config_validate(c);
  const std::string hash = config_hash(c);
  CsvWriter csv(output_path(c, "eim_decay.csv"), hash, {"subdomain", "q", "sup_error"});
  for (Subdomain d : config_subdomains(c)) {
    const auto t0 = std::chrono::steady_clock::now();
    const EIMModel eim = build_subdomain_eim(c, d, c.M);
    for (std::size_t q = 0; q < eim.error_history.size(); ++q) {
      csv.cell(to_string(d)).cell(q).cell(eim.error_history[q]).end_row();
    }
    const EIMPositivity pos = eim_positivity(eim, eim.s_grid);
    ModelBundle b;
    b.metadata = model_metadata(c, d);
    b.eim = eim;
    save_bundle(b, output_path(c, eim_file(d)));
    log << to_string(d) << ": Q=" << eim.size() << " sup_error=" << eim.error_history.back()
        << " min_weight=" << pos.min_weight << " negative=" << pos.negative_count << " (" << seconds_since(t0)
        << " s)\n";
  }
  return 0;
}

inline int cmd_train(const RunConfig& c, std::ostream& log) {
  config_validate(c);
  const std::string hash = config_hash(c);
  const RhsSpec rhs = config_rhs(c);
  for (Subdomain d : config_subdomains(c)) {
    const auto t0 = std::chrono::steady_clock::now();
    const EIMModel eim = build_subdomain_eim(c, d, c.M);
    const SubdomainProblem p = make_problem(config_truth_spec(c, d), eim, rhs);
    const auto training = config_training(c, d);
    const auto test = config_test(c, d, training);
    const OfflineResult off = run_offline(c, p, training);
    const ReducedModel& model = off.greedy.model;
    log << to_string(d) << ": Q=" << eim.size() << " dofs=" << p.truth->free_dofs() << " N=" << model.size()
        << " train=" << training.size() << " test=" << test.size() << " scm " << off.scm_seconds << " s, greedy "
        << off.greedy_seconds << " s\n";

    ModelBundle b;
    b.metadata = model_metadata(c, d);
    b.reduced = model;
    b.scm = off.scm;
    save_bundle(b, output_path(c, model_file(d)));

    CsvWriter greedy_csv(output_path(c, std::string("greedy_") + to_string(d) + ".csv"), hash,
                         {"N", "s", "nu", "max_objective", "max_change"});
    for (const auto& step : off.greedy.history) {
      greedy_csv.cell(step.N).cell(step.mu.s).cell(step.mu.nu).cell(step.max_objective).cell(step.max_change).end_row();
    }

    const TruthTraces traces = compute_truth_traces(*p.op, p.loads, rhs, test, true, c.threads);
    CsvWriter conv(output_path(c, std::string("convergence_") + to_string(d) + ".csv"), hash,
                   {"N", "E_median", "E_max", "E_min", "F_median", "F_max", "F_min", "gap_median", "gap_max"});
    for (std::size_t N = 1; N <= model.size(); ++N) {
      const ErrorEnsemble e = error_ensembles(model.truncated(N), *p.truth, traces, c.threads);
      const EnsembleStats E = ensemble_stats(e.eim_errors);
      const EnsembleStats F = ensemble_stats(e.exact_errors);
      const EnsembleStats G = ensemble_stats(e.truth_gap);
      conv.cell(N).cell(E.median).cell(E.max).cell(E.min).cell(F.median).cell(F.max).cell(F.min);
      conv.cell(G.median).cell(G.max).end_row();
      if (N == model.size()) {
        log << to_string(d) << ": N=" << N << " median E=" << E.median << " max E=" << E.max
            << " median F=" << F.median << " (" << seconds_since(t0) << " s total)\n";
      }
    }
  }
  return 0;
}

struct EvalRequest {
  std::string model_path;
  double s = 0.5;
  double nu = 0.0;
  std::string dump_path;
};

inline int cmd_eval(const EvalRequest& req, std::ostream& out) {
  const ModelBundle b = load_reduced_bundle(req.model_path);
  const ReducedModel& model = *b.reduced;
  const Parameter mu{req.s, req.nu};
  const OnlineSolution sol = online_solve(model, mu);
  const Field2D trace = online_trace(model, sol.c);
  out << "subdomain " << to_string(model.subdomain) << "  N=" << model.size() << "  Q=" << model.eim.size()
      << "  rhs=" << to_string(model.rhs.kind) << '\n';
  char line[160];
  std::snprintf(line, sizeof line, "s=%.17g nu=%.17g\n", mu.s, mu.nu);
  out << line;
  std::snprintf(line, sizeof line, "||u_N||_L2=%.17g  max|u_N|=%.17g\n", trace_l2_norm(model, sol.c),
                trace.size() ? trace.cwiseAbs().maxCoeff() : 0.0);
  out << line;
  out << "coefficients:";
  for (Eigen::Index i = 0; i < sol.c.size(); ++i) {
    std::snprintf(line, sizeof line, " %.17g", sol.c[i]);
    out << line;
  }
  out << '\n';
  if (b.scm) {
    const ErrorCertificate cert = error_bound(model, *b.scm, mu);
    std::snprintf(line, sizeof line, "Delta_N=%.6e  residual=%.6e  beta_LB=%.6e  Lambda=%.6e\n", cert.delta_N,
                  cert.residual_dual_norm, cert.beta_lb, cert.continuity_ub);
    out << line;
  }
  if (!req.dump_path.empty()) {
    const TruthSpec spec = bundle_truth_spec(b, req.model_path);
    const Triangulation2D tri = build_unit_square_triangulation(spec.n);
    if (static_cast<Eigen::Index>(tri.num_vertices()) != trace.size()) {
      throw IoError(req.model_path + ": trace size does not match truth.n");
    }
    std::ofstream f(req.dump_path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + req.dump_path + "'");
    f << "x1,x2,u\n";
    for (std::size_t v = 0; v < tri.num_vertices(); ++v) {
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", tri.vertices[v][0], tri.vertices[v][1],
                    trace[static_cast<Eigen::Index>(v)]);
      f << line;
    }
    if (!f) throw IoError("write failed on '" + req.dump_path + "'");
  }
  return 0;
}

/// Validation points for certification: certify_points interior values of s
/// (an n×n tensor grid in (s, ν) with n² ≈ certify_points for ν-dependent loads).
inline std::vector<Parameter> certify_grid(const ReducedModel& model, std::size_t points, const ParameterRange& r) {
  const auto [lo, hi] = subdomain_range(model.subdomain, r);
  auto interior = [](double a, double b, std::size_t n) {
    std::vector<double> v = equispaced(a, b, n + 2);
    return std::vector<double>(v.begin() + 1, v.end() - 1);
  };
  std::vector<Parameter> out;
  if (rhs_depends_on_nu(model.rhs)) {
    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(double(points)))));
    for (double s : interior(lo, hi, k))
      for (double nu : interior(0.0, 1.0, k)) out.push_back({s, nu});
  } else {
    for (double s : interior(lo, hi, points)) out.push_back({s, 0.0});
  }
  return out;
}

struct CertifyRow {
  Parameter mu;
  ErrorCertificate cert;
  double beta_hat = 0.0;
  double true_error = 0.0;  // upper estimate of ‖tr(𝒰^𝒩 - 𝒰_N)‖_{ℍ^s}
  double xh_bound = 0.0;    // d_s^-½ ‖𝒰^𝒩 - 𝒰_N‖_{X_h}
  double effectivity() const { return true_error > 0.0 ? cert.delta_N / true_error : INFINITY; }
};

inline std::vector<CertifyRow> certify_sweep(const ReducedModel& model, const SCMModel& scm, const SubdomainProblem& p,
                                             const std::vector<Parameter>& points, int J, int threads) {
  std::vector<CertifyRow> rows(points.size());
  parallel_for(points.size(), threads, [&](std::size_t i) {
    CertifyRow& r = rows[i];
    r.mu = points[i];
    r.cert = error_bound(model, scm, r.mu);
    r.beta_hat = exact_coercivity(*p.op, scm, p.op->theta(r.mu)).lo;
    const Vector F = combine_loads(p.loads, rhs_coefficients(p.rhs, r.mu.nu));
    const TruthSolution truth = solve_truth(*p.op, r.mu, F);
    const OnlineSolution sol = online_solve(model, r.mu);
    const Vector err = truth.coeffs - model.basis * sol.c_orth;
    const auto [lhs, rhs] = trace_inequality_check(*p.truth, err, r.mu.s, J);
    r.true_error = lhs;
    r.xh_bound = rhs;
  });
  return rows;
}

struct CertifyRequest {
  std::string model_path;  // empty: every configured subdomain from out_dir
};

inline int cmd_certify(const RunConfig& c, const CertifyRequest& req, std::ostream& log) {
  config_validate(c);
  const std::string hash = config_hash(c);
  std::vector<std::string> paths;
  if (!req.model_path.empty()) {
    paths.push_back(req.model_path);
  } else {
    for (Subdomain d : config_subdomains(c)) paths.push_back(output_path(c, model_file(d)));
  }
  std::size_t violations = 0;
  for (const auto& path : paths) {
    const ModelBundle b = load_reduced_bundle(path);
    if (!b.scm) throw IoError(path + ": file holds no SCM model");
    const ReducedModel& model = *b.reduced;
    const SubdomainProblem p = make_problem(bundle_truth_spec(b, path), model.eim, model.rhs);
    ParameterRange r = c.range();
    if (auto v = b.get("range.s_min")) r.s_lo = detail::parse_number<double>("range.s_min", *v);
    if (auto v = b.get("range.s_max")) r.s_hi = detail::parse_number<double>("range.s_max", *v);
    const auto rows = certify_sweep(model, *b.scm, p, certify_grid(model, c.certify_points, r), c.oracle_J, c.threads);
    CsvWriter csv(output_path(c, std::string("certify_") + to_string(model.subdomain) + ".csv"), hash,
                  {"s", "nu", "beta_lb", "beta_hat", "continuity_ub", "residual", "delta", "true_error", "trace_rhs",
                   "effectivity"});
    std::size_t bound_viol = 0;
    std::size_t beta_viol = 0;
    std::size_t trace_viol = 0;
    double eff_min = INFINITY;
    double eff_max = 0.0;
    for (const auto& row : rows) {
      csv.cell(row.mu.s).cell(row.mu.nu).cell(row.cert.beta_lb).cell(row.beta_hat).cell(row.cert.continuity_ub);
      csv.cell(row.cert.residual_dual_norm).cell(row.cert.delta_N).cell(row.true_error).cell(row.xh_bound);
      csv.cell(row.effectivity()).end_row();
      if (row.cert.delta_N < row.true_error) ++bound_viol;
      if (row.cert.beta_lb > row.beta_hat) ++beta_viol;
      if (row.true_error > row.xh_bound) ++trace_viol;
      eff_min = std::min(eff_min, row.effectivity());
      eff_max = std::max(eff_max, row.effectivity());
    }
    violations += bound_viol + beta_viol + trace_viol;
    log << to_string(model.subdomain) << ": " << rows.size() << " points, bound violations " << bound_viol
        << ", beta_LB violations " << beta_viol << ", trace violations " << trace_viol << ", effectivity ["
        << eff_min << ", " << eff_max << "]\n";
  }
  return violations == 0 ? 0 : 3;
}

// ------------------------------------------------------------ bench

struct BenchResult {
  Subdomain subdomain = Subdomain::D1;
  Eigen::Index dofs = 0;
  std::size_t N = 0;
  double offline_seconds = 0.0;  // EIM + truth setup + SCM + greedy
  double truth_seconds = 0.0;    // per query: truth solve and trace
  double online_seconds = 0.0;   // per query: online solve and trace
  std::size_t crossover = 0;     // first query count where the RB total is cheaper (0: never within the run)
  double speedup() const { return truth_seconds / online_seconds; }
};

/// Times the offline stage once, truth queries on a seeded sample and online
/// queries on bench_queries random parameters.
inline BenchResult bench_subdomain(const RunConfig& c, Subdomain d, std::size_t truth_samples = 10) {
  BenchResult res;
  res.subdomain = d;
  const RhsSpec rhs = config_rhs(c);
  auto t0 = std::chrono::steady_clock::now();
  const EIMModel eim = build_subdomain_eim(c, d, c.M);
  const SubdomainProblem p = make_problem(config_truth_spec(c, d), eim, rhs);
  const auto training = config_training(c, d);
  const OfflineResult off = run_offline(c, p, training);
  res.offline_seconds = seconds_since(t0);
  const ReducedModel& model = off.greedy.model;
  res.N = model.size();
  res.dofs = p.truth->free_dofs();

  const auto [lo, hi] = subdomain_range(d, c.range());
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> us(lo, hi);
  std::uniform_real_distribution<double> un(0.0, 1.0);
  std::vector<Parameter> queries(c.bench_queries);
  for (auto& q : queries) q = {us(rng), rhs_depends_on_nu(rhs) ? un(rng) : 0.0};

  const std::size_t ns = std::min(truth_samples, queries.size());
  double sink = 0.0;
  t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < ns; ++i) {
    const Vector F = combine_loads(p.loads, rhs_coefficients(rhs, queries[i].nu));
    sink += p.truth->trace_bottom(solve_truth(*p.op, queries[i], F).coeffs).sum();
  }
  res.truth_seconds = seconds_since(t0) / static_cast<double>(ns);

  // Online queries are fast, so repeat the sweep until it takes measurable time.
  std::size_t reps = 0;
  t0 = std::chrono::steady_clock::now();
  do {
    for (const auto& q : queries) sink += online_trace(model, q).sum();
    ++reps;
  } while (seconds_since(t0) < 0.2);
  res.online_seconds = seconds_since(t0) / static_cast<double>(reps * queries.size());
  if (!std::isfinite(sink)) throw NumericalError("bench: non-finite output");

  const double margin = res.truth_seconds - res.online_seconds;
  if (margin > 0.0) res.crossover = static_cast<std::size_t>(std::floor(res.offline_seconds / margin)) + 1;
  return res;
}

inline int cmd_bench(const RunConfig& c, std::ostream& log) {
  config_validate(c);
  const std::string hash = config_hash(c);
  CsvWriter summary(output_path(c, "bench_summary.csv"), hash,
                    {"subdomain", "dofs", "N", "offline_s", "truth_query_s", "online_query_s", "speedup",
                     "crossover_queries"});
  for (Subdomain d : config_subdomains(c)) {
    const BenchResult r = bench_subdomain(c, d);
    summary.cell(to_string(d)).cell(static_cast<std::size_t>(r.dofs)).cell(r.N).cell(r.offline_seconds);
    summary.cell(r.truth_seconds).cell(r.online_seconds).cell(r.speedup()).cell(r.crossover).end_row();
    CsvWriter cum(output_path(c, std::string("bench_") + to_string(d) + ".csv"), hash,
                  {"queries", "truth_cumulative_s", "rb_cumulative_s"});
    for (std::size_t k = 1; k <= c.bench_queries; ++k) {
      cum.cell(k).cell(static_cast<double>(k) * r.truth_seconds);
      cum.cell(r.offline_seconds + static_cast<double>(k) * r.online_seconds).end_row();
    }
    log << to_string(d) << ": dofs=" << r.dofs << " N=" << r.N << " offline " << r.offline_seconds << " s, truth "
        << r.truth_seconds << " s/query, online " << r.online_seconds << " s/query, speedup " << r.speedup()
        << "x, crossover " << (r.crossover ? std::to_string(r.crossover) : std::string("none")) << '\n';
  }
  return 0;
}

// ------------------------------------------------------------ oracle validation

struct OracleRow {
  double s = 0.0;
  int n = 0;
  int M = 0;
  Eigen::Index dofs = 0;
  double rel_error = 0.0;
  double ratio = 0.0;  // error at the previous resolution / this one (0 on the first)
};

/// Relative L²(Ω) error of the truth trace for f = sin(2πx1)sin(2πx2)
/// against the exact solution (8π²)^-s f, at (n, M) and (2n, 2M).
inline double oracle_trace_error(const RunConfig& c, double s, int n, int M) {
  const Subdomain d = subdomain_of(s);
  RunConfig local = c;
  local.n = n;
  local.M = M;
  const EIMModel eim = build_subdomain_eim(local, d, M);
  RhsSpec rhs;
  rhs.kind = RhsKind::Example1;
  const SubdomainProblem p = make_problem(config_truth_spec(local, d), eim, rhs);
  const TruthSolution sol = solve_truth(*p.op, {s, 0.0}, p.loads.front());
  const Field2D tr = p.truth->trace_bottom(sol.coeffs);
  const double scale = std::pow(8.0 * std::numbers::pi * std::numbers::pi, -s);
  const ScalarFunction2D exact = [scale](double x1, double x2) {
    return scale * std::sin(2 * std::numbers::pi * x1) * std::sin(2 * std::numbers::pi * x2);
  };
  // ‖sin(2πx1) sin(2πx2)‖_{L²} = 1/2.
  return l2_error_vs_function(p.truth->mesh().triangulation(), tr, exact) / (0.5 * scale);
}

inline std::vector<OracleRow> validate_oracle(const RunConfig& c, const std::vector<double>& s_values = {0.2, 0.5, 0.8}) {
  std::vector<OracleRow> rows;
  for (double s : s_values) {
    double prev = 0.0;
    for (int level = 0; level < 2; ++level) {
      OracleRow r;
      r.s = s;
      r.n = c.n << level;
      r.M = c.M << level;
      r.dofs = static_cast<Eigen::Index>((r.n - 1) * (r.n - 1)) * r.M;
      r.rel_error = oracle_trace_error(c, s, r.n, r.M);
      r.ratio = level ? prev / r.rel_error : 0.0;
      prev = r.rel_error;
      rows.push_back(r);
    }
  }
  return rows;
}

inline int cmd_validate_oracle(const RunConfig& c, std::ostream& log) {
  config_validate(c);
  const auto rows = validate_oracle(c);
  CsvWriter csv(output_path(c, "oracle_validation.csv"), config_hash(c), {"s", "n", "M", "dofs", "rel_error", "ratio"});
  for (const auto& r : rows) {
    csv.cell(r.s).cell(r.n).cell(r.M).cell(static_cast<std::size_t>(r.dofs)).cell(r.rel_error).cell(r.ratio).end_row();
    log << "s=" << r.s << " n=" << r.n << " M=" << r.M << " rel_error=" << r.rel_error;
    if (r.ratio > 0.0) log << " ratio=" << r.ratio;
    log << '\n';
  }
  return 0;
}

}  // namespace frbm
