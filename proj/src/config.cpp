#include "ocorl/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ocorl {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected a number, got '" + value + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& value) {
  long long out = 0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected an integer, got '" + value + "'");
  return out;
}

int to_int(const std::string& key, const std::string& value) {
  const long long v = to_integer(key, value);
  if (v < -2147483647LL || v > 2147483647LL) throw ConfigError(key, "integer out of range");
  return static_cast<int>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(key, "expected true/false, got '" + value + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(bool v) { return v ? "true" : "false"; }

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
    map[key] = trim(line.substr(eq + 1));
  }
  return map;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_override(ConfigMap& map, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty())
    throw ConfigError("--set", "expected KEY=VALUE, got '" + assignment + "'");
  map[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

void apply_env_overrides(ConfigMap& map) {
  if (const char* seed = std::getenv("OCORL_SEED"); seed != nullptr && *seed != '\0')
    map["run.seed"] = seed;
}

ExperimentConfig config_from_map(const ConfigMap& map) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : map) {
    auto wrap = [&](auto&& parse) {
      try {
        parse();
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError(key, e.what());
      }
    };
    if (key == "env.name") cfg.env_name = value;
    else if (key == "env.T") cfg.horizon = to_double(key, value);
    else if (key == "env.T_mpc") cfg.mpc_horizon = to_double(key, value);
    else if (key == "mss.strategy") wrap([&] { cfg.strategy = parse_strategy(value); });
    else if (key == "mss.growing") cfg.growing_measurements = to_bool(key, value);
    else if (key == "mss.max_measurements") cfg.adaptive_max_measurements = to_int(key, value);
    else if (key == "gp.kernel") wrap([&] { cfg.kernel = parse_kernel_kind(value); });
    else if (key == "gp.lengthscale") cfg.lengthscale = to_double(key, value);
    else if (key == "gp.signal_variance") cfg.signal_variance = to_double(key, value);
    else if (key == "calibration.mode") {
      if (value == "constant") cfg.calibration.mode = CalibrationMode::constant;
      else if (value == "theoretical") cfg.calibration.mode = CalibrationMode::theoretical;
      else throw ConfigError(key, "expected constant or theoretical, got '" + value + "'");
    } else if (key == "calibration.beta") cfg.calibration.beta = to_double(key, value);
    else if (key == "calibration.B") cfg.calibration.rkhs_bound = to_double(key, value);
    else if (key == "calibration.delta") cfg.calibration.delta = to_double(key, value);
    else if (key == "noise.std") cfg.noise_std = to_double(key, value);
    else if (key == "run.episodes") {
      cfg.episodes = to_int(key, value);
      if (cfg.episodes < 0) throw ConfigError(key, "must be >= 0 (0 uses the env default)");
    } else if (key == "run.measurements") {
      cfg.measurements = to_int(key, value);
      if (cfg.measurements < 0) throw ConfigError(key, "must be >= 0 (0 uses the env default)");
    } else if (key == "run.seed") {
      const long long s = to_integer(key, value);
      if (s < 0) throw ConfigError(key, "must be >= 0");
      cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "planner.mode") wrap([&] { cfg.planner = parse_planner_mode(value); });
    else if (key == "planner.knots") cfg.knots = to_int(key, value);
    else if (key == "planner.max_iters") cfg.planner_max_iters = to_int(key, value);
    else if (key == "mpc.enabled") cfg.use_mpc = to_bool(key, value);
    else if (key == "mpc.max_iters") cfg.mpc_max_iters = to_int(key, value);
    else if (key == "sim.steps_per_unit") cfg.steps_per_unit = to_int(key, value);
    else if (key == "synthetic.seed") {
      const long long s = to_integer(key, value);
      if (s < 0) throw ConfigError(key, "must be >= 0");
      cfg.synthetic.seed = static_cast<std::uint64_t>(s);
    } else if (key == "synthetic.features") cfg.synthetic.features = to_int(key, value);
    else if (key == "synthetic.lengthscale") cfg.synthetic.lengthscale = to_double(key, value);
    else if (key == "synthetic.signal_variance") cfg.synthetic.signal_variance = to_double(key, value);
    else if (key == "synthetic.T") cfg.synthetic.T = to_double(key, value);
    else if (key == "check.deviation") cfg.check_deviation = to_bool(key, value);
    else throw ConfigError(key, "unknown key");
  }
  cfg.validate();
  return cfg;
}

ConfigMap config_to_map(const ExperimentConfig& cfg) {
  ConfigMap m;
  m["env.name"] = cfg.env_name;
  if (cfg.horizon) m["env.T"] = fmt(*cfg.horizon);
  if (cfg.mpc_horizon) m["env.T_mpc"] = fmt(*cfg.mpc_horizon);
  m["mss.strategy"] = to_string(cfg.strategy);
  m["mss.growing"] = fmt(cfg.growing_measurements);
  m["mss.max_measurements"] = std::to_string(cfg.adaptive_max_measurements);
  m["gp.kernel"] = to_string(cfg.kernel);
  m["gp.lengthscale"] = fmt(cfg.lengthscale);
  m["gp.signal_variance"] = fmt(cfg.signal_variance);
  m["calibration.mode"] = cfg.calibration.mode == CalibrationMode::constant ? "constant" : "theoretical";
  m["calibration.beta"] = fmt(cfg.calibration.beta);
  m["calibration.B"] = fmt(cfg.calibration.rkhs_bound);
  m["calibration.delta"] = fmt(cfg.calibration.delta);
  m["noise.std"] = fmt(cfg.noise_std);
  m["run.episodes"] = std::to_string(cfg.episodes);
  m["run.measurements"] = std::to_string(cfg.measurements);
  m["run.seed"] = std::to_string(cfg.seed);
  m["planner.mode"] = to_string(cfg.planner);
  m["planner.knots"] = std::to_string(cfg.knots);
  m["planner.max_iters"] = std::to_string(cfg.planner_max_iters);
  m["mpc.enabled"] = fmt(cfg.use_mpc);
  m["mpc.max_iters"] = std::to_string(cfg.mpc_max_iters);
  m["sim.steps_per_unit"] = std::to_string(cfg.steps_per_unit);
  if (cfg.env_name == "gp_prior") {
    m["synthetic.seed"] = std::to_string(cfg.synthetic.seed);
    m["synthetic.features"] = std::to_string(cfg.synthetic.features);
    m["synthetic.lengthscale"] = fmt(cfg.synthetic.lengthscale);
    m["synthetic.signal_variance"] = fmt(cfg.synthetic.signal_variance);
    m["synthetic.T"] = fmt(cfg.synthetic.T);
  }
  m["check.deviation"] = fmt(cfg.check_deviation);
  return m;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [key, value] : config_to_map(cfg)) {
    feed(key);
    feed("=");
    feed(value);
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ocorl
