#pragma once

#include <Eigen/Core>

#include <map>
#include <string>
#include <vector>

#include "llmreg/categorize.hpp"
#include "llmreg/table.hpp"

namespace llmreg {

// Sample Pearson correlation. Throws InvalidArgument on length mismatch,
// fewer than two points, or a constant input.
double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

// Mean and standard error (population std / sqrt(n)) of a sample.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_and_se(const std::vector<double>& values);

struct ModelScore {
  double pearson_mean = 0.0;
  double pearson_se = 0.0;
  double rmse_mean = 0.0;
  double rmse_se = 0.0;
};

// One evaluation condition: (shot setting, indicator, dataset), holding the
// per-model metric means over runs.
struct EvalCell {
  std::string setting;  // "3-shot", "5-shot"
  std::string indicator;
  std::string dataset;
  int runs = 0;
  std::map<std::string, ModelScore> models;
};

// Pairwise winning rates over a cell collection. rate(A,B) is the fraction of
// cells where A strictly beats B on the metric (higher Pearson, lower RMSE);
// ties contribute 0.5 to both directions, so rate(A,B) + rate(B,A) == 1.
struct WinMatrix {
  std::vector<std::string> models;
  Eigen::MatrixXd rates;  // rates(row, col) = rate(models[col] over models[row])
  std::string metric;     // "pearson" or "rmse"
  int cell_count = 0;
};

WinMatrix win_matrix(const std::vector<EvalCell>& cells,
                     const std::vector<std::string>& models, const std::string& metric);

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Jaccard overlap between the given assignments and the threshold oracle,
// averaged over the tau values, per category (Positive/Negative/Mixed).
struct JaccardScores {
  double positive = 0.0;
  double negative = 0.0;
  double mixed = 0.0;
};
JaccardScores jaccard_reliability(const std::vector<CategoryAssignment>& assignments,
                                  const RegionTable& table, const std::vector<double>& taus);

extern const std::vector<double> kReliabilityTaus;  // {0.05, 0.10, 0.15, 0.20}

// Histogram plug-in mutual information in bits with equal-frequency (quantile)
// binning per variable. Tied values share a bin; a constant input yields 0.
// bins <= 0 selects the default min(4, floor(sqrt(n))).
double mutual_information(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int bins);

int default_mi_bins(Eigen::Index n);

// Percentage MI difference of each discovered column against the mean MI of
// the original columns, with mean and standard error over discovered columns.
struct MiDifference {
  double mean_percent = 0.0;
  double se_percent = 0.0;
  int count = 0;
};
MiDifference mi_difference_mean(const Eigen::MatrixXd& discovered,
                                const Eigen::MatrixXd& original,
                                const Eigen::VectorXd& labels, int bins);

}  // namespace llmreg
