#include "llmreg/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "llmreg/errors.hpp"
#include "llmreg/table.hpp"

namespace llmreg {

using nlohmann::json;

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string win_matrix_to_csv(const WinMatrix& matrix) {
  std::ostringstream out;
  out << "metric:" << matrix.metric << ",cells:" << matrix.cell_count << "\n";
  out << "y\\x";
  for (const auto& model : matrix.models) out << "," << model;
  out << "\n";
  for (Eigen::Index r = 0; r < matrix.rates.rows(); ++r) {
    out << matrix.models[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < matrix.rates.cols(); ++c) {
      out << ",";
      if (r != c) out << format_double(matrix.rates(r, c));
    }
    out << "\n";
  }
  return out.str();
}

namespace {

// rate 0 -> red, 0.5 -> pale yellow, 1 -> green
std::string rate_color(double rate) {
  const auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  double red, green, blue;
  if (rate < 0.5) {
    const double t = rate / 0.5;
    red = lerp(0xd6, 0xf7, t);
    green = lerp(0x3a, 0xf0, t);
    blue = lerp(0x2f, 0xc4, t);
  } else {
    const double t = (rate - 0.5) / 0.5;
    red = lerp(0xf7, 0x2e, t);
    green = lerp(0xf0, 0x8b, t);
    blue = lerp(0xc4, 0x3a, t);
  }
  char buffer[8];
  std::snprintf(buffer, sizeof(buffer), "#%02x%02x%02x", static_cast<int>(red),
                static_cast<int>(green), static_cast<int>(blue));
  return buffer;
}

}  // namespace

std::string win_matrix_to_svg(const WinMatrix& matrix) {
  const int cell = 56;
  const int margin = 140;
  const int n = static_cast<int>(matrix.models.size());
  const int width = margin + n * cell + 20;
  const int height = margin + n * cell + 20;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<text x=\"10\" y=\"20\">winning rate (" << matrix.metric << ", "
      << matrix.cell_count << " cells)</text>\n";

  for (int i = 0; i < n; ++i) {
    // column labels (the model being scored), rotated
    const int cx = margin + i * cell + cell / 2;
    svg << "<text x=\"" << cx << "\" y=\"" << margin - 8 << "\" text-anchor=\"start\" "
        << "transform=\"rotate(-45 " << cx << " " << margin - 8 << ")\">"
        << matrix.models[static_cast<std::size_t>(i)] << "</text>\n";
    // row labels (the opponent)
    svg << "<text x=\"" << margin - 8 << "\" y=\"" << margin + i * cell + cell / 2 + 4
        << "\" text-anchor=\"end\">" << matrix.models[static_cast<std::size_t>(i)]
        << "</text>\n";
  }

  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const int x = margin + c * cell;
      const int y = margin + r * cell;
      if (r == c) {
        svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
            << "\" height=\"" << cell << "\" fill=\"#eeeeee\" stroke=\"#ffffff\"/>\n";
        continue;
      }
      const double rate = matrix.rates(r, c);
      svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"" << rate_color(rate)
          << "\" stroke=\"#ffffff\"/>\n";
      char label[16];
      std::snprintf(label, sizeof(label), "%.2f", rate);
      svg << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
          << "\" text-anchor=\"middle\">" << label << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void save_win_matrix(const WinMatrix& matrix, const std::string& csv_path,
                     const std::string& svg_path) {
  write_text_file(csv_path, win_matrix_to_csv(matrix));
  write_text_file(svg_path, win_matrix_to_svg(matrix));
}

std::string weights_report_text(const std::vector<WeightEntry>& entries) {
  std::size_t name_width = 6;
  for (const auto& entry : entries) name_width = std::max(name_width, entry.name.size());
  std::ostringstream out;
  out << "rank  " << std::string(name_width - 4, ' ') << "name"
      << "      weight  category\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    char weight[32];
    std::snprintf(weight, sizeof(weight), "%+12.6f", entries[i].weight);
    out << std::string(4 - std::to_string(i + 1).size(), ' ') << i + 1 << "  "
        << std::string(name_width - entries[i].name.size(), ' ') << entries[i].name << weight
        << "  " << to_string(entries[i].category) << "\n";
  }
  return out.str();
}

std::string eval_cells_to_csv(const std::vector<EvalCell>& cells) {
  std::ostringstream out;
  out << "dataset,indicator,setting,runs,model,pearson_mean,pearson_se,rmse_mean,rmse_se\n";
  for (const auto& cell : cells) {
    for (const auto& [model, score] : cell.models) {
      out << cell.dataset << "," << cell.indicator << "," << cell.setting << "," << cell.runs
          << "," << model << "," << format_double(score.pearson_mean) << ","
          << format_double(score.pearson_se) << "," << format_double(score.rmse_mean) << ","
          << format_double(score.rmse_se) << "\n";
    }
  }
  return out.str();
}

std::string eval_cells_to_json(const std::vector<EvalCell>& cells) {
  json arr = json::array();
  for (const auto& cell : cells) {
    json entry;
    entry["dataset"] = cell.dataset;
    entry["indicator"] = cell.indicator;
    entry["setting"] = cell.setting;
    entry["runs"] = cell.runs;
    json models;
    for (const auto& [model, score] : cell.models) {
      models[model] = {
          {"pearson_mean", score.pearson_mean},
          {"pearson_se", score.pearson_se},
          {"rmse_mean", score.rmse_mean},
          {"rmse_se", score.rmse_se},
      };
    }
    entry["models"] = std::move(models);
    arr.push_back(std::move(entry));
  }
  return arr.dump(2) + "\n";
}

}  // namespace llmreg
