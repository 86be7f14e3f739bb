#include "llmreg/standardizer.hpp"

#include <cmath>

#include "llmreg/errors.hpp"

namespace llmreg {

Standardizer Standardizer::identity(Eigen::Index cols) {
  Standardizer s;
  s.mean = Eigen::VectorXd::Zero(cols);
  s.scale = Eigen::VectorXd::Ones(cols);
  s.degenerate.assign(static_cast<std::size_t>(cols), false);
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& raw) const {
  if (raw.cols() != cols()) {
    throw InvalidArgument("standardizer column count mismatch");
  }
  return (raw.rowwise() - mean.transpose()).array().rowwise() /
         scale.transpose().array();
}

Eigen::MatrixXd Standardizer::invert(const Eigen::MatrixXd& standardized) const {
  if (standardized.cols() != cols()) {
    throw InvalidArgument("standardizer column count mismatch");
  }
  return (standardized.array().rowwise() * scale.transpose().array()).rowwise() +
         mean.transpose().array();
}

Eigen::VectorXd Standardizer::apply_labels(const Eigen::VectorXd& raw) const {
  return (raw.array() - label_mean) / label_scale;
}

Eigen::VectorXd Standardizer::invert_labels(const Eigen::VectorXd& standardized) const {
  return standardized.array() * label_scale + label_mean;
}

namespace {

// Population standard deviation (ddof = 0); pinned so oracle tests are exact
// even at 3-shot sample sizes.
double population_std(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().mean());
}

double safe_scale(double std_dev, bool* degenerate) {
  if (!(std_dev >= kScaleEpsilon)) {
    *degenerate = true;
    return 1.0;
  }
  *degenerate = false;
  return std_dev;
}

}  // namespace

Standardizer fit_standardizer(const Eigen::MatrixXd& values, const Eigen::VectorXd* labels,
                              std::span<const std::size_t> rows) {
  if (rows.empty()) throw InvalidArgument("fit_standardizer: empty row subset");
  for (std::size_t r : rows) {
    if (r >= static_cast<std::size_t>(values.rows())) {
      throw InvalidArgument("fit_standardizer: row index out of range");
    }
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd subset(n, values.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    subset.row(i) = values.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
  }

  Standardizer s;
  s.mean = subset.colwise().mean();
  s.scale.resize(values.cols());
  s.degenerate.assign(static_cast<std::size_t>(values.cols()), false);
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    bool degenerate = false;
    if (n < 2) {
      s.scale(c) = 1.0;
      degenerate = true;
    } else {
      s.scale(c) = safe_scale(population_std(subset.col(c)), &degenerate);
    }
    s.degenerate[static_cast<std::size_t>(c)] = degenerate;
  }

  if (labels != nullptr) {
    s.has_labels = true;
    Eigen::VectorXd label_subset(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      label_subset(i) = (*labels)(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
    }
    s.label_mean = label_subset.mean();
    if (n < 2) {
      s.label_scale = 1.0;
      s.label_degenerate = true;
    } else {
      s.label_scale = safe_scale(population_std(label_subset), &s.label_degenerate);
    }
  }
  return s;
}

}  // namespace llmreg
