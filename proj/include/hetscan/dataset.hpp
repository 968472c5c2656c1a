#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hetscan {

enum class Family { Gaussian, Bernoulli };

std::string to_string(Family family);
Family parse_family(std::string_view name);

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observations with numerical predictors, level-coded grouping columns and a
/// response. Grouping column k holds codes 1..L_k assigned in order of first
/// appearance; level_labels[k][c - 1] is the original label of code c.
struct Dataset {
  Eigen::MatrixXd x;
  std::vector<std::vector<int>> groups;
  std::vector<std::vector<std::string>> level_labels;
  Eigen::VectorXd y;
  Family family = Family::Gaussian;
  std::vector<std::string> predictor_names;
  std::vector<std::string> grouping_names;
  std::string response_name;

  int n_obs() const { return static_cast<int>(y.size()); }
  int n_predictors() const { return static_cast<int>(x.cols()); }
  int n_groupings() const { return static_cast<int>(groups.size()); }
  int n_levels(int k) const { return static_cast<int>(level_labels.at(k).size()); }

  /// Throws DataError if any structural invariant is violated.
  void validate() const;
};

bool operator==(const Dataset& a, const Dataset& b);

struct CsvSchema {
  std::string response_name;
  std::vector<std::string> grouping_names;
  Family family = Family::Gaussian;
};

/// Reads a header-first, comma separated file. Every column that is neither
/// the response nor a grouping and whose first data cell is numeric becomes a
/// predictor; columns with a non-numeric first cell are ignored.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
Dataset parse_csv(std::istream& in, const CsvSchema& schema);

/// Column order: predictors, groupings (as labels), response.
void write_csv(const Dataset& data, std::ostream& out);
void write_csv(const Dataset& data, const std::filesystem::path& path);

struct LevelEncoding {
  std::vector<int> codes;
  std::vector<std::string> labels;

  int n_levels() const { return static_cast<int>(labels.size()); }
  /// 1-based code for a label, or 0 if unknown.
  int code_of(std::string_view label) const;
};

LevelEncoding encode_groups(std::span<const std::string> raw_labels);
LevelEncoding encode_groups(std::span<const double> raw_labels);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

struct StandardizationParams {
  Eigen::VectorXd means;
  Eigen::VectorXd stds;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const;
};

enum class ColumnKind { Numerical, Dummy };

/// Standardized predictors followed by raw integer level codes.
struct EncodedDesign {
  Eigen::MatrixXd z;
  std::vector<ColumnKind> column_kinds;

  int n_numerical() const;
  int n_dummy() const;
  int dim() const { return static_cast<int>(z.cols()); }
};

std::pair<EncodedDesign, StandardizationParams> standardize(const Dataset& data);

/// Mean 0 / sample sd 1 scaling of a response vector. Returns (scaled, mean, sd).
struct ResponseScaling {
  Eigen::VectorXd scaled;
  double mean = 0.0;
  double sd = 1.0;
};
ResponseScaling standardize_response(const Eigen::VectorXd& y);

}  // namespace hetscan
