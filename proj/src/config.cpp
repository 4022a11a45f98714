#include "kmtrack/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace kmtrack {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail(const std::string& name, int line, const std::string& msg) {
  throw std::runtime_error(name + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& name, int line, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    fail(name, line, "expected a number, got '" + v + "'");
  }
}

long parse_long(const std::string& name, int line, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    fail(name, line, "expected an integer, got '" + v + "'");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& name) {
  ExperimentConfig cfg;
  cfg.seeds.clear();
  cfg.sigma_levels.clear();
  cfg.error_levels.clear();

  static const std::set<std::string> known_sections = {
      "experiment", "grid", "oracle", "quadratic", "forward_backward", "network"};

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  bool saw_seeds = false, saw_sigma = false, saw_error = false;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(name, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (known_sections.find(section) == known_sections.end()) {
        fail(name, line_no, "unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(name, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(name, line_no, "empty key");
    if (value.empty()) fail(name, line_no, "empty value for '" + key + "'");
    if (section.empty()) fail(name, line_no, "key '" + key + "' outside any section");

    if (section == "experiment") {
      if (key == "scenario") {
        cfg.scenario = value;
      } else if (key == "horizon") {
        cfg.horizon = static_cast<int>(parse_long(name, line_no, value));
      } else if (key == "step") {
        cfg.step_size = parse_double(name, line_no, value);
      } else if (key == "seeds") {
        for (const auto& s : split_list(value)) {
          cfg.seeds.push_back(
              static_cast<std::uint64_t>(parse_long(name, line_no, s)));
        }
        saw_seeds = true;
      } else if (key == "out_dir") {
        cfg.out_dir = value;
      } else if (key == "grid_parallel") {
        cfg.grid_parallel = static_cast<int>(parse_long(name, line_no, value));
      } else {
        fail(name, line_no, "unknown key '" + key + "' in [experiment]");
      }
    } else if (section == "grid") {
      if (key == "sigma") {
        for (const auto& s : split_list(value)) {
          cfg.sigma_levels.push_back(parse_double(name, line_no, s));
        }
        saw_sigma = true;
      } else if (key == "error") {
        for (const auto& s : split_list(value)) {
          cfg.error_levels.push_back(parse_double(name, line_no, s));
        }
        saw_error = true;
      } else {
        fail(name, line_no, "unknown key '" + key + "' in [grid]");
      }
    } else if (section == "oracle") {
      if (key == "fixed_point_tol") {
        cfg.fixed_point_tol = parse_double(name, line_no, value);
      } else if (key == "fixed_point_max_iter") {
        cfg.fixed_point_max_iter = parse_long(name, line_no, value);
      } else {
        fail(name, line_no, "unknown key '" + key + "' in [oracle]");
      }
    } else if (section == "quadratic") {
      if (key == "dimension") {
        cfg.dimension = static_cast<int>(parse_long(name, line_no, value));
      } else if (key == "smoothness") {
        cfg.smoothness = parse_double(name, line_no, value);
      } else if (key == "strong_convexity") {
        cfg.strong_convexity = parse_double(name, line_no, value);
      } else {
        fail(name, line_no, "unknown key '" + key + "' in [quadratic]");
      }
    } else if (section == "forward_backward") {
      if (key == "l1_weight") {
        cfg.l1_weight = parse_double(name, line_no, value);
      } else {
        fail(name, line_no, "unknown key '" + key + "' in [forward_backward]");
      }
    } else if (section == "network") {
      if (key == "bandit_delta") {
        cfg.bandit_delta = parse_double(name, line_no, value);
      } else if (key == "calibration_window") {
        cfg.calibration_window = static_cast<int>(parse_long(name, line_no, value));
      } else {
        fail(name, line_no, "unknown key '" + key + "' in [network]");
      }
    }
  }

  if (!saw_seeds) cfg.seeds = {1};
  if (!saw_sigma) cfg.sigma_levels = {0.0};
  if (!saw_error) cfg.error_levels = {0.0};
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.scenario != "drifting_quadratic" && cfg.scenario != "forward_backward" &&
      cfg.scenario != "network") {
    throw std::runtime_error("config: unknown scenario '" + cfg.scenario + "'");
  }
  if (cfg.horizon < 1) throw std::runtime_error("config: horizon must be >= 1");
  if (!(cfg.step_size > 0.0)) throw std::runtime_error("config: step must be > 0");
  if (cfg.seeds.empty()) throw std::runtime_error("config: seed list is empty");
  if (cfg.sigma_levels.empty()) throw std::runtime_error("config: sigma grid is empty");
  if (cfg.error_levels.empty()) throw std::runtime_error("config: error grid is empty");
  if (!(cfg.fixed_point_tol > 0.0)) {
    throw std::runtime_error("config: fixed_point_tol must be > 0");
  }
  if (cfg.fixed_point_max_iter < 1) {
    throw std::runtime_error("config: fixed_point_max_iter must be >= 1");
  }
  if (cfg.dimension < 1) throw std::runtime_error("config: dimension must be >= 1");
  if (!(cfg.smoothness > 0.0)) throw std::runtime_error("config: smoothness must be > 0");
  if (cfg.strong_convexity < 0.0 || cfg.strong_convexity > cfg.smoothness) {
    throw std::runtime_error("config: need 0 <= strong_convexity <= smoothness");
  }
  if (cfg.l1_weight < 0.0) throw std::runtime_error("config: l1_weight must be >= 0");
  if (!(cfg.bandit_delta > 0.0)) {
    throw std::runtime_error("config: bandit_delta must be > 0");
  }
  if (cfg.calibration_window < 16) {
    throw std::runtime_error("config: calibration_window must be >= 16");
  }
  if (cfg.grid_parallel < 1) {
    throw std::runtime_error("config: grid_parallel must be >= 1");
  }
  for (double s : cfg.sigma_levels) {
    if (s < 0.0) throw std::runtime_error("config: sigma levels must be >= 0");
  }
  for (double e : cfg.error_levels) {
    if (e < 0.0) throw std::runtime_error("config: error levels must be >= 0");
    if (cfg.scenario == "network") {
      const double rounded = std::round(e);
      if (std::abs(e - rounded) > 1e-12 || (rounded != 0.0 && rounded < 2.0)) {
        throw std::runtime_error(
            "config: network error levels are bandit evaluation counts "
            "(0 = exact, otherwise an integer >= 2)");
      }
    }
  }
  if (cfg.scenario == "network") {
    for (double s : cfg.sigma_levels) {
      if (!(s > 0.0)) {
        throw std::runtime_error(
            "config: network sigma levels are drift targets and must be > 0");
      }
    }
  }
}

}  // namespace kmtrack
