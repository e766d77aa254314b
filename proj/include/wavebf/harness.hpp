#pragma once

// Experiment orchestration: configuration parsing, phantoms, single runs,
// the `table1` comparison sweep over sensor layouts, noise and attenuation,
// and CSV artifacts.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wavebf/errors.hpp"
#include "wavebf/filters.hpp"
#include "wavebf/format.hpp"
#include "wavebf/observation.hpp"
#include "wavebf/reconstruction.hpp"
#include "wavebf/wave_core.hpp"

namespace wavebf {

enum class Method { tr, bfn, kf, bf_seek };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::tr: return "TR";
    case Method::bfn: return "BFN";
    case Method::kf: return "KF";
    case Method::bf_seek: return "BF-SEEK";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view text) {
  std::string up(text);
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  std::replace(up.begin(), up.end(), '_', '-');
  if (up == "TR") return Method::tr;
  if (up == "BFN") return Method::bfn;
  if (up == "KF") return Method::kf;
  if (up == "BF-SEEK" || up == "BFSEEK" || up == "SEEK") return Method::bf_seek;
  return std::nullopt;
}

inline constexpr Method kAllMethods[] = {Method::tr, Method::bfn, Method::bf_seek, Method::kf};

struct PhantomSpec {
  enum class Kind { gaussian_bumps, triangle, boxcar, from_file };

  Kind kind = Kind::gaussian_bumps;
  // gaussian-bumps: (center, width, amplitude) triples, a*exp(-((x-c)/w)^2)
  // triangle:       center, half-width, amplitude
  // boxcar:         left, right, amplitude
  std::vector<double> parameters{-0.15, 0.05, 1.0, 0.2, 0.08, 0.6};
  std::filesystem::path path;  // from-file
};

inline std::string phantom_kind_name(PhantomSpec::Kind k) {
  switch (k) {
    case PhantomSpec::Kind::gaussian_bumps: return "gaussian-bumps";
    case PhantomSpec::Kind::triangle: return "triangle";
    case PhantomSpec::Kind::boxcar: return "boxcar";
    case PhantomSpec::Kind::from_file: return "from-file";
  }
  return "?";
}

namespace detail {

inline std::vector<double> read_phantom_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open phantom file '" + path.string() + "'");
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    // Last comma-separated column; header lines are skipped.
    const auto pos = t.rfind(',');
    const std::string_view cell = trim(pos == std::string_view::npos ? t : t.substr(pos + 1));
    double v = 0.0;
    if (!parse_real(cell, v)) {
      if (values.empty()) continue;
      throw IoError("phantom file '" + path.string() + "': malformed value '" + std::string(cell) + "'");
    }
    values.push_back(v);
  }
  return values;
}

}  // namespace detail

/// Samples the phantom at the interior nodes; boundary values are implicit zeros.
inline Phantom generate_phantom(const PhantomSpec& spec, const GridSpec& grid) {
  grid.validate();
  const int n = grid.n_interior;
  Phantom out{Vector::Zero(n), phantom_kind_name(spec.kind)};
  const auto& p = spec.parameters;
  switch (spec.kind) {
    case PhantomSpec::Kind::gaussian_bumps: {
      if (p.empty() || p.size() % 3 != 0) {
        throw ParameterError("gaussian-bumps phantom needs (center, width, amplitude) triples");
      }
      for (std::size_t b = 0; b < p.size(); b += 3) {
        const double c = p[b], w = p[b + 1], a = p[b + 2];
        if (!(w > 0.0)) throw ParameterError("gaussian-bumps phantom: width must be positive");
        for (int i = 0; i < n; ++i) {
          const double z = (grid.node(i) - c) / w;
          out.values(i) += a * std::exp(-z * z);
        }
      }
      break;
    }
    case PhantomSpec::Kind::triangle: {
      if (p.size() != 3) throw ParameterError("triangle phantom needs center, half-width, amplitude");
      const double c = p[0], h = p[1], a = p[2];
      if (!(h > 0.0)) throw ParameterError("triangle phantom: half-width must be positive");
      for (int i = 0; i < n; ++i) {
        out.values(i) = a * std::max(0.0, 1.0 - std::abs(grid.node(i) - c) / h);
      }
      break;
    }
    case PhantomSpec::Kind::boxcar: {
      if (p.size() != 3) throw ParameterError("boxcar phantom needs left, right, amplitude");
      for (int i = 0; i < n; ++i) {
        const double x = grid.node(i);
        if (x >= p[0] && x <= p[1]) out.values(i) = p[2];
      }
      break;
    }
    case PhantomSpec::Kind::from_file: {
      const std::vector<double> v = detail::read_phantom_values(spec.path);
      if (static_cast<int>(v.size()) != n) {
        throw ParameterError("phantom file has " + std::to_string(v.size()) + " values, expected " +
                             std::to_string(n));
      }
      for (int i = 0; i < n; ++i) out.values(i) = v[static_cast<std::size_t>(i)];
      out.label = spec.path.filename().string();
      break;
    }
  }
  if (!out.values.allFinite()) throw ParameterError("phantom has non-finite values");
  return out;
}

struct ExperimentConfig {
  GridSpec grid;
  SchemeParams scheme;
  int delta_data = 10;
  double noise_level = 0.0;
  std::uint64_t seed = 1;
  Method method = Method::bfn;
  FilterParams filter;
  std::optional<double> nudging_gain;         // continuous k
  std::optional<double> nudging_step_weight;  // k * dt^2; default 0.9 dt
  bool derivative_feedback = true;
  IterationControl control;
  PhantomSpec phantom;
  std::filesystem::path output_dir;  // empty: no artifacts

  NudgingParams nudging() const {
    if (nudging_gain) return {*nudging_gain, derivative_feedback};
    const double w = nudging_step_weight.value_or(0.9 * scheme.delta_t);
    return NudgingParams::from_step_weight(w, scheme.delta_t, derivative_feedback);
  }

  void validate() const {
    try {
      scheme.validate(grid);
      if (delta_data < 1) throw ParameterError("delta_data must be >= 1");
      if (!(noise_level >= 0.0)) throw ParameterError("noise_level must be >= 0");
      filter.validate();
      if (filter.rank > 2 * grid.n_interior) throw ParameterError("rank must not exceed 2 n_interior");
      control.validate();
      nudging().validate();
      if (nudging_gain && nudging_step_weight) {
        throw ParameterError("set only one of nudging_gain and nudging_step_weight");
      }
    } catch (const ParameterError& e) {
      throw ValidationError(std::string("invalid configuration: ") + e.what());
    }
  }
};

/// Keys accepted in configuration files and as CLI flags.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "x_min",          "x_max",           "n_interior",          "delta_x",
      "delta_t",        "n_steps",         "final_time",          "theta",
      "alpha",          "delta_data",      "noise_level",         "seed",
      "method",         "r_scale",         "gamma",               "rank",
      "rank_tol",       "sigma0",          "filter_observation",  "nudging_gain",
      "nudging_step_weight", "derivative_feedback", "max_iterations", "rel_tol",
      "metric",         "phantom",         "phantom_params",      "phantom_file",
      "output_dir"};
  return keys;
}

namespace detail {

inline double real_value(const std::string& key, const std::string& text) {
  double v = 0.0;
  if (!parse_real(trim(text), v) || !std::isfinite(v)) throw ParseError(key, "expected a real number, got '" + text + "'");
  return v;
}

template <class Int>
Int int_value(const std::string& key, const std::string& text) {
  Int v{};
  if (!parse_integer(trim(text), v)) throw ParseError(key, "expected an integer, got '" + text + "'");
  return v;
}

inline bool bool_value(const std::string& key, const std::string& text) {
  std::string t(trim(text));
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ParseError(key, "expected a boolean, got '" + text + "'");
}

inline std::vector<double> real_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(real_value(key, cell));
  if (out.empty()) throw ParseError(key, "expected a comma-separated list of reals");
  return out;
}

}  // namespace detail

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// Builds a validated configuration from key/value entries; later entries
/// override earlier ones. Unknown keys are rejected.
inline ExperimentConfig parse_config_entries(const ConfigEntries& entries,
                                             ExperimentConfig base = {}) {
  std::map<std::string, std::string> kv;
  const auto& known = config_keys();
  for (const auto& [key, value] : entries) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParseError(key, "unknown key");
    }
    kv[key] = value;
  }
  ExperimentConfig cfg = std::move(base);
  const auto has = [&](const char* k) { return kv.count(k) > 0; };
  const auto get = [&](const char* k) -> const std::string& { return kv.at(k); };

  if (has("x_min")) cfg.grid.x_min = detail::real_value("x_min", get("x_min"));
  if (has("x_max")) cfg.grid.x_max = detail::real_value("x_max", get("x_max"));
  if (has("n_interior")) cfg.grid.n_interior = detail::int_value<int>("n_interior", get("n_interior"));
  if (has("delta_x")) {
    const double dx = detail::real_value("delta_x", get("delta_x"));
    if (!(dx > 0.0)) throw ValidationError("invalid configuration: delta_x must be positive");
    const int n = static_cast<int>(std::lround(cfg.grid.length() / dx)) - 1;
    if (has("n_interior") && n != cfg.grid.n_interior) {
      throw ValidationError("invalid configuration: delta_x and n_interior disagree");
    }
    cfg.grid.n_interior = n;
    if (std::abs(cfg.grid.delta_x() - dx) > 1e-9 * dx) {
      throw ValidationError("invalid configuration: delta_x does not divide the domain");
    }
  }
  if (has("delta_t")) cfg.scheme.delta_t = detail::real_value("delta_t", get("delta_t"));
  if (has("n_steps")) cfg.scheme.n_steps = detail::int_value<int>("n_steps", get("n_steps"));
  if (has("final_time")) {
    const double t = detail::real_value("final_time", get("final_time"));
    if (!(cfg.scheme.delta_t > 0.0)) throw ValidationError("invalid configuration: delta_t must be positive");
    const int steps = static_cast<int>(std::lround(t / cfg.scheme.delta_t));
    if (has("n_steps") && steps != cfg.scheme.n_steps) {
      throw ValidationError("invalid configuration: final_time and n_steps disagree");
    }
    cfg.scheme.n_steps = steps;
  }
  if (has("theta")) cfg.scheme.theta = detail::real_value("theta", get("theta"));
  if (has("alpha")) {
    const std::string a(trim(get("alpha")));
    if (a == "none" || a.empty()) {
      cfg.scheme.attenuation_alpha.reset();
    } else {
      cfg.scheme.attenuation_alpha = detail::real_value("alpha", a);
    }
  }
  if (has("delta_data")) cfg.delta_data = detail::int_value<int>("delta_data", get("delta_data"));
  if (has("noise_level")) cfg.noise_level = detail::real_value("noise_level", get("noise_level"));
  if (has("seed")) cfg.seed = detail::int_value<std::uint64_t>("seed", get("seed"));
  if (has("method")) {
    const auto m = parse_method(trim(get("method")));
    if (!m) throw ParseError("method", "expected one of TR, BFN, KF, BF-SEEK");
    cfg.method = *m;
  }
  if (has("r_scale")) cfg.filter.r_scale = detail::real_value("r_scale", get("r_scale"));
  if (has("gamma")) cfg.filter.gamma = detail::real_value("gamma", get("gamma"));
  if (has("rank")) cfg.filter.rank = detail::int_value<int>("rank", get("rank"));
  if (has("rank_tol")) cfg.filter.rank_tol = detail::real_value("rank_tol", get("rank_tol"));
  if (has("sigma0")) cfg.filter.sigma0 = detail::real_value("sigma0", get("sigma0"));
  if (has("filter_observation")) {
    const std::string v(trim(get("filter_observation")));
    if (v == "position") cfg.filter.observed = ObservedQuantity::position;
    else if (v == "velocity") cfg.filter.observed = ObservedQuantity::velocity;
    else throw ParseError("filter_observation", "expected 'position' or 'velocity'");
  }
  if (has("nudging_gain")) cfg.nudging_gain = detail::real_value("nudging_gain", get("nudging_gain"));
  if (has("nudging_step_weight")) {
    cfg.nudging_step_weight = detail::real_value("nudging_step_weight", get("nudging_step_weight"));
  }
  if (has("derivative_feedback")) {
    cfg.derivative_feedback = detail::bool_value("derivative_feedback", get("derivative_feedback"));
  }
  if (has("max_iterations")) {
    cfg.control.max_iterations = detail::int_value<int>("max_iterations", get("max_iterations"));
  }
  if (has("rel_tol")) cfg.control.rel_tol = detail::real_value("rel_tol", get("rel_tol"));
  if (has("metric")) cfg.control.metric = std::string(trim(get("metric")));
  if (has("phantom")) {
    const std::string k(trim(get("phantom")));
    if (k == "gaussian-bumps") cfg.phantom.kind = PhantomSpec::Kind::gaussian_bumps;
    else if (k == "triangle") cfg.phantom.kind = PhantomSpec::Kind::triangle;
    else if (k == "boxcar") cfg.phantom.kind = PhantomSpec::Kind::boxcar;
    else if (k == "from-file") cfg.phantom.kind = PhantomSpec::Kind::from_file;
    else throw ParseError("phantom", "expected gaussian-bumps, triangle, boxcar or from-file");
  }
  if (has("phantom_params")) cfg.phantom.parameters = detail::real_list("phantom_params", get("phantom_params"));
  if (has("phantom_file")) cfg.phantom.path = std::string(trim(get("phantom_file")));
  if (has("output_dir")) cfg.output_dir = std::string(trim(get("output_dir")));

  cfg.validate();
  return cfg;
}

/// `key = value` lines; blank lines and `#` comments are ignored.
inline ConfigEntries read_config_entries(std::istream& in) {
  ConfigEntries entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(std::string(t), "line " + std::to_string(lineno) + " is not 'key = value'");
    }
    entries.emplace_back(std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))));
  }
  return entries;
}

inline ExperimentConfig parse_config(std::istream& in) {
  return parse_config_entries(read_config_entries(in));
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  return parse_config(in);
}

/// Short description of the data setting, e.g. `delta_data=10;nu=0.3;alpha=none`.
inline std::string settings_label(const ExperimentConfig& cfg) {
  std::string s = "delta_data=" + std::to_string(cfg.delta_data) + ";nu=" + format_real(cfg.noise_level) +
                  ";alpha=" + (cfg.scheme.attenuation_alpha ? format_real(*cfg.scheme.attenuation_alpha) : "none");
  return s;
}

struct ExperimentOutcome {
  std::string settings;
  Method method = Method::bfn;
  Vector nodes;
  Vector truth;
  ReconstructionResult result;
};

/// Phantom, sensors and (noisy) record for a configuration. The record is
/// generated with the unattenuated model; `cfg.scheme` (with its
/// attenuation) is the reconstruction model.
inline Problem make_problem(const ExperimentConfig& cfg) {
  cfg.validate();
  const Phantom truth = generate_phantom(cfg.phantom, cfg.grid);
  Problem p;
  p.grid = cfg.grid;
  p.scheme = cfg.scheme;
  p.sensors = build_sensor_array(cfg.grid, cfg.delta_data);
  p.record = record_run(truth, cfg.grid, cfg.scheme, p.sensors, NoiseSpec{cfg.noise_level, cfg.seed});
  p.truth = truth.values;
  return p;
}

inline ReconstructionResult run_method(const Problem& problem, const ExperimentConfig& cfg, Method method) {
  const Phantom guess{Vector::Zero(problem.n()), "zero"};
  switch (method) {
    case Method::tr: return time_reversal(problem);
    case Method::bfn: return bfn_reconstruct(problem, cfg.nudging(), cfg.control, guess);
    case Method::kf: return kf_reconstruct(problem, cfg.filter, guess);
    case Method::bf_seek: return bf_seek_reconstruct(problem, cfg.filter, cfg.control, guess);
  }
  throw ParameterError("unknown method");
}

namespace detail {

inline std::string slug(const std::string& s) {
  std::string out;
  for (char ch : s) {
    out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-') ? ch : '_';
  }
  return out;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace detail

/// Writes summary.csv plus profile_<method>.csv and convergence_<method>.csv
/// for every outcome. Outcomes from several data settings get one
/// subdirectory per setting.
inline void emit_results(const std::vector<ExperimentOutcome>& results,
                         const std::filesystem::path& output_dir) {
  if (results.empty()) throw ParameterError("emit_results: no results");
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) throw IoError("cannot create '" + output_dir.string() + "': " + ec.message());

  bool single_setting = true;
  for (const auto& r : results) single_setting &= r.settings == results.front().settings;

  {
    auto out = detail::open_output(output_dir / "summary.csv");
    out << "settings,method,rms_percent,iterations\n";
    for (const auto& r : results) {
      out << r.settings << ',' << method_name(r.method) << ',' << format_real(r.result.rms_percent) << ','
          << r.result.iterations_used << '\n';
    }
    if (!out) throw IoError("failed writing summary.csv");
  }
  for (const auto& r : results) {
    const std::filesystem::path dir = single_setting ? output_dir : output_dir / detail::slug(r.settings);
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    const std::string name = method_name(r.method);
    {
      auto out = detail::open_output(dir / ("profile_" + name + ".csv"));
      out << "x,truth,estimate\n";
      for (Eigen::Index i = 0; i < r.result.estimate.size(); ++i) {
        out << format_real(r.nodes(i)) << ',' << format_real(r.truth(i)) << ','
            << format_real(r.result.estimate(i)) << '\n';
      }
      if (!out) throw IoError("failed writing profile for " + name);
    }
    {
      auto out = detail::open_output(dir / ("convergence_" + name + ".csv"));
      out << "iteration,rms_percent,change\n";
      for (std::size_t k = 0; k < r.result.per_iteration_rms.size(); ++k) {
        out << (k + 1) << ',' << format_real(r.result.per_iteration_rms[k]) << ','
            << format_real(r.result.per_iteration_change[k]) << '\n';
      }
      if (!out) throw IoError("failed writing convergence for " + name);
    }
  }
}

/// Runs the configured method; writes artifacts when cfg.output_dir is set.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  try {
    const Problem problem = make_problem(cfg);
    ExperimentOutcome out{settings_label(cfg), cfg.method, cfg.grid.nodes(), *problem.truth,
                          run_method(problem, cfg, cfg.method)};
    if (!cfg.output_dir.empty()) emit_results({out}, cfg.output_dir);
    return out;
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + " [method=" + method_name(cfg.method) + ";" + settings_label(cfg) +
                ";seed=" + std::to_string(cfg.seed) + "]");
  }
}

struct Table1Setting {
  int delta_data;
  double noise_level;
  std::optional<double> alpha;
};

/// Rows of the comparison: 10, 2 and 1 sensor(s) on the default grid,
/// noiseless or with 30% noise, with or without attenuation.
inline std::vector<Table1Setting> table1_settings() {
  return {{10, 0.0, std::nullopt},  {10, 0.3, std::nullopt}, {99, 0.0, std::nullopt},
          {99, 0.3, std::nullopt},  {99, 0.3, 2.0},          {150, 0.0, std::nullopt}};
}

/// Every setting x method cell. Setting i uses noise seed master_seed + i,
/// shared by the four methods so that they see the same data.
inline std::vector<ExperimentOutcome> run_table1(const ExperimentConfig& base, std::uint64_t master_seed) {
  std::vector<ExperimentOutcome> outcomes;
  const auto settings = table1_settings();
  for (std::size_t i = 0; i < settings.size(); ++i) {
    ExperimentConfig cfg = base;
    cfg.delta_data = settings[i].delta_data;
    cfg.noise_level = settings[i].noise_level;
    cfg.scheme.attenuation_alpha = settings[i].alpha;
    cfg.seed = master_seed + i;
    const Problem problem = make_problem(cfg);
    for (Method m : kAllMethods) {
      cfg.method = m;
      outcomes.push_back({settings_label(cfg), m, cfg.grid.nodes(), *problem.truth, run_method(problem, cfg, m)});
    }
  }
  return outcomes;
}

}  // namespace wavebf
