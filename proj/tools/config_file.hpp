#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetscan/simulation.hpp"

namespace hetscan::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat "key = value" text. "[name]" starts a new section; keys before the
/// first header belong to the unnamed section "". '#' and ';' start comments.
struct ConfigSection {
  std::string name;
  std::map<std::string, std::string> values;
};

std::vector<ConfigSection> parse_config(std::istream& in);
std::vector<ConfigSection> load_config(const std::filesystem::path& path);

/// Applies simulation keys (family, n_obs, n_predictors, n_groupings,
/// n_levels, sparsity, snr, mu_f, var_f, mu_bf, var_bf, mu_g, var_g, mu_bg,
/// var_bg) on top of the defaults. Unknown keys are rejected.
SimConfig sim_config_from_section(const ConfigSection& section);

/// Every section with keys describes a set of cells; comma separated values
/// (family, D, K, L, N, sparsity, snr) are fully crossed.
std::vector<SimConfig> grid_from_sections(const std::vector<ConfigSection>& sections);

}  // namespace hetscan::cli
