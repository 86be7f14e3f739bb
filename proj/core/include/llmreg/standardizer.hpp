#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace llmreg {

// Per-column z-scoring fitted on a row subset (the few-shot training rows).
// Uses the population standard deviation; columns that are constant over the
// subset keep scale 1 and are flagged degenerate. Labels are standardized the
// same way so the ridge penalty is scale-free across indicators.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // strictly positive
  std::vector<bool> degenerate;
  double label_mean = 0.0;
  double label_scale = 1.0;
  bool label_degenerate = false;
  bool has_labels = false;

  static Standardizer identity(Eigen::Index cols);

  Eigen::Index cols() const { return mean.size(); }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& standardized) const;
  Eigen::VectorXd apply_labels(const Eigen::VectorXd& raw) const;
  Eigen::VectorXd invert_labels(const Eigen::VectorXd& standardized) const;
};

// Fit from the given rows of a raw design matrix (labels optional, may be
// nullptr). A single row yields means equal to that row and scales of 1.
Standardizer fit_standardizer(const Eigen::MatrixXd& values, const Eigen::VectorXd* labels,
                              std::span<const std::size_t> rows);

constexpr double kScaleEpsilon = 1e-9;

}  // namespace llmreg
