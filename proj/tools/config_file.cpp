#include "config_file.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

namespace hetscan::cli {

namespace {

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = strip(item);
    if (item.empty()) throw ConfigError("empty list element in '" + s + "'");
    out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + value + "' is not a number");
  }
}

int to_int(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError("key '" + key + "': '" + value + "' is not an integer");
  return static_cast<int>(v);
}

std::string canonical_key(const std::string& key) {
  if (key == "D") return "n_predictors";
  if (key == "K") return "n_groupings";
  if (key == "L") return "n_levels";
  if (key == "N") return "n_obs";
  return key;
}

}  // namespace

std::vector<ConfigSection> parse_config(std::istream& in) {
  std::vector<ConfigSection> sections(1);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      sections.push_back({strip(line.substr(1, line.size() - 2)), {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
    if (!sections.back().values.emplace(key, value).second)
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }
  return sections;
}

std::vector<ConfigSection> load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse_config(in);
}

SimConfig sim_config_from_section(const ConfigSection& section) {
  std::map<std::string, std::string> values;
  for (const auto& [k, v] : section.values) values[canonical_key(k)] = v;

  SimConfig cfg;
  if (auto it = values.find("family"); it != values.end()) {
    try {
      cfg.family = parse_family(it->second);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  cfg.params = FamilyParams::defaults(cfg.family);

  const std::map<std::string, double*> reals = {
      {"sparsity", &cfg.sparsity},   {"snr", &cfg.snr},           {"mu_f", &cfg.params.mu_f},
      {"var_f", &cfg.params.var_f},  {"mu_bf", &cfg.params.mu_bf}, {"var_bf", &cfg.params.var_bf},
      {"mu_g", &cfg.params.mu_g},    {"var_g", &cfg.params.var_g}, {"mu_bg", &cfg.params.mu_bg},
      {"var_bg", &cfg.params.var_bg}};
  const std::map<std::string, int*> ints = {{"n_obs", &cfg.n_obs},
                                            {"n_predictors", &cfg.n_predictors},
                                            {"n_groupings", &cfg.n_groupings},
                                            {"n_levels", &cfg.n_levels}};
  for (const auto& [key, value] : values) {
    if (key == "family") continue;
    if (auto r = reals.find(key); r != reals.end()) {
      *r->second = to_double(key, value);
    } else if (auto i = ints.find(key); i != ints.end()) {
      *i->second = to_int(key, value);
    } else {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
  }
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

std::vector<SimConfig> grid_from_sections(const std::vector<ConfigSection>& sections) {
  std::vector<SimConfig> cells;
  std::set<std::string> seen;
  for (const auto& section : sections) {
    if (section.values.empty()) continue;
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    for (const auto& [k, v] : section.values) axes.emplace_back(k, split_list(v));
    std::vector<std::size_t> index(axes.size(), 0);
    while (true) {
      ConfigSection scalar;
      for (std::size_t a = 0; a < axes.size(); ++a) scalar.values[axes[a].first] = axes[a].second[index[a]];
      SimConfig cell = sim_config_from_section(scalar);
      if (seen.insert(cell_id(cell)).second) cells.push_back(cell);
      std::size_t a = 0;
      for (; a < axes.size(); ++a) {
        if (++index[a] < axes[a].second.size()) break;
        index[a] = 0;
      }
      if (a == axes.size()) break;
    }
  }
  if (cells.empty()) throw ConfigError("grid file defines no cells");
  return cells;
}

}  // namespace hetscan::cli
