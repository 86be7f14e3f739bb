#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llmreg/registry.hpp"

namespace llmreg {

// Immutable region-by-feature matrix with optional indicator labels.
// Construction validates shapes; afterwards the table is safe for
// concurrent reads.
struct RegionTable {
  std::vector<std::string> region_ids;
  std::vector<std::string> feature_names;  // registry order
  Eigen::MatrixXd values;                  // rows = regions, cols = features
  std::optional<Eigen::VectorXd> labels;
  std::string indicator_name;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  // Column index for a feature name; throws InvalidArgument if absent.
  Eigen::Index column_index(std::string_view name) const;
  Eigen::VectorXd column(std::string_view name) const;

  void validate() const;
};

// CSV ingest: UTF-8, header row, first column `region_id`, optional indicator
// column, remaining columns must all be registry names. Columns are reordered
// to registry order; missing or non-numeric cells are rejected with their
// coordinates.
RegionTable load_table(const std::string& path, const Registry& registry,
                       const std::string& indicator_name = "");
RegionTable parse_table_csv(const std::string& csv_text, const Registry& registry,
                            const std::string& indicator_name, const std::string& origin);

// Round-trip CSV writer (shortest-representation floats).
std::string table_to_csv(const RegionTable& table);
void save_table(const RegionTable& table, const std::string& path);

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double value);

}  // namespace llmreg
