#include "llmreg/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "llmreg/errors.hpp"

namespace llmreg {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

double parse_cell(const std::string& raw, std::size_t row, const std::string& column,
                  const std::string& origin) {
  const std::string cell = trim(raw);
  double value = 0.0;
  const auto result = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (result.ec != std::errc{} || result.ptr != cell.data() + cell.size() ||
      !std::isfinite(value)) {
    std::ostringstream os;
    os << origin << ": non-numeric cell \"" << raw << "\" at data row " << row + 1
       << ", column \"" << column << "\"";
    throw ParseError(os.str());
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

Eigen::Index RegionTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < feature_names.size(); ++i) {
    if (feature_names[i] == name) return static_cast<Eigen::Index>(i);
  }
  throw InvalidArgument("table has no feature column named " + std::string(name));
}

Eigen::VectorXd RegionTable::column(std::string_view name) const {
  return values.col(column_index(name));
}

void RegionTable::validate() const {
  if (values.rows() != static_cast<Eigen::Index>(region_ids.size())) {
    throw InvalidArgument("table rows do not match region id count");
  }
  if (values.cols() != static_cast<Eigen::Index>(feature_names.size())) {
    throw InvalidArgument("table columns do not match feature name count");
  }
  if (labels) {
    if (labels->size() != values.rows()) {
      throw InvalidArgument("label count does not match region count");
    }
    if (!labels->allFinite()) throw InvalidArgument("labels contain non-finite values");
  }
  if (!values.allFinite()) throw InvalidArgument("feature matrix contains non-finite values");
}

RegionTable parse_table_csv(const std::string& csv_text, const Registry& registry,
                            const std::string& indicator_name, const std::string& origin) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(origin + ": empty file");

  const auto header = split_csv_line(line);
  if (header.empty() || trim(header[0]) != "region_id") {
    throw ParseError(origin + ": first header column must be region_id");
  }

  // Map header columns to registry features / the indicator column.
  constexpr std::size_t kIndicator = static_cast<std::size_t>(-1);
  std::vector<std::string> present_features;
  std::vector<std::size_t> column_role(header.size(), 0);  // feature index or kIndicator
  bool has_indicator = false;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    if (!indicator_name.empty() && name == indicator_name) {
      if (has_indicator) throw ParseError(origin + ": duplicate indicator column " + name);
      has_indicator = true;
      column_role[c] = kIndicator;
      continue;
    }
    if (find_module(registry, name) == nullptr) {
      throw ParseError(origin + ": unknown column \"" + name + "\" (not in registry" +
                       (indicator_name.empty() ? "" : ", not the indicator \"" + indicator_name + "\"") +
                       ")");
    }
    if (std::find(present_features.begin(), present_features.end(), name) !=
        present_features.end()) {
      throw ParseError(origin + ": duplicate feature column " + name);
    }
    column_role[c] = present_features.size();
    present_features.push_back(name);
  }

  // Reorder features to registry order.
  std::vector<std::string> ordered;
  for (const auto& meta : registry) {
    if (std::find(present_features.begin(), present_features.end(), meta.name) !=
        present_features.end()) {
      ordered.push_back(meta.name);
    }
  }
  std::vector<std::size_t> feature_slot(present_features.size());
  for (std::size_t i = 0; i < present_features.size(); ++i) {
    feature_slot[i] =
        std::find(ordered.begin(), ordered.end(), present_features[i]) - ordered.begin();
  }

  std::vector<std::string> region_ids;
  std::vector<std::vector<double>> rows;
  std::vector<double> label_values;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      std::ostringstream os;
      os << origin << ": data row " << data_row + 1 << " has " << fields.size()
         << " fields, expected " << header.size();
      throw ParseError(os.str());
    }
    region_ids.push_back(trim(fields[0]));
    std::vector<double> row(ordered.size(), 0.0);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const double value = parse_cell(fields[c], data_row, trim(header[c]), origin);
      if (column_role[c] == kIndicator) {
        label_values.push_back(value);
      } else {
        row[feature_slot[column_role[c]]] = value;
      }
    }
    rows.push_back(std::move(row));
    ++data_row;
  }
  if (rows.empty()) throw ParseError(origin + ": table contains no data rows");

  RegionTable table;
  table.region_ids = std::move(region_ids);
  table.feature_names = std::move(ordered);
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.feature_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  if (has_indicator) {
    table.labels = Eigen::Map<Eigen::VectorXd>(label_values.data(),
                                               static_cast<Eigen::Index>(label_values.size()));
    table.indicator_name = indicator_name;
  }
  table.validate();
  return table;
}

RegionTable load_table(const std::string& path, const Registry& registry,
                       const std::string& indicator_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open table file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_table_csv(buffer.str(), registry, indicator_name, path);
}

std::string table_to_csv(const RegionTable& table) {
  std::ostringstream out;
  out << "region_id";
  if (table.labels) out << "," << table.indicator_name;
  for (const auto& name : table.feature_names) out << "," << name;
  out << "\n";
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    out << table.region_ids[static_cast<std::size_t>(r)];
    if (table.labels) out << "," << format_double((*table.labels)(r));
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
      out << "," << format_double(table.values(r, c));
    }
    out << "\n";
  }
  return out.str();
}

void save_table(const RegionTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write table file: " + path);
  out << table_to_csv(table);
}

}  // namespace llmreg
