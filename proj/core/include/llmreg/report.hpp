#pragma once

#include <string>
#include <vector>

#include "llmreg/metrics.hpp"
#include "llmreg/solver.hpp"

namespace llmreg {

// Win-matrix renderings: CSV grid and an SVG heatmap on a red (rate 0) to
// green (rate 1) scale, diagonal left blank.
std::string win_matrix_to_csv(const WinMatrix& matrix);
std::string win_matrix_to_svg(const WinMatrix& matrix);
void save_win_matrix(const WinMatrix& matrix, const std::string& csv_path,
                     const std::string& svg_path);

// Fixed-width text table of the top weights, category tag per row.
std::string weights_report_text(const std::vector<WeightEntry>& entries);

std::string eval_cells_to_csv(const std::vector<EvalCell>& cells);
std::string eval_cells_to_json(const std::vector<EvalCell>& cells);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace llmreg
