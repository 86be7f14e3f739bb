#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "llmreg/category.hpp"
#include "llmreg/standardizer.hpp"

namespace llmreg {

// Per-column weight constraint, derived from the column's category:
// Positive -> non_negative, Negative -> non_positive, Mixed -> unrestricted.
enum class SignConstraint { non_negative, non_positive, unrestricted };

std::string to_string(SignConstraint c);
SignConstraint sign_constraint_from_string(std::string_view s);
SignConstraint constraint_for_category(Category c);
SignConstraint flip(SignConstraint c);

struct ConstrainedFit {
  Eigen::VectorXd weights;                 // design-column order, standardized units
  double bias = 0.0;                       // standardized-space intercept (0 after centering)
  std::vector<SignConstraint> constraints;
  double lambda = 0.0;
  Standardizer standardizer;               // snapshot used to (de)standardize at predict time
  double objective = 0.0;                  // ||y - Xb||^2 + lambda*||b||^2, standardized units
  int iterations = 0;
};

struct FitOptions {
  double dual_tolerance = 1e-10;  // stop when no dual (negative gradient) entry exceeds it
  int max_iterations_per_column = 10;
};

// Sign-constrained L2-regularized least squares:
//
//   minimize ||y - X b||^2 + lambda ||b||^2   s.t. per-column sign constraints
//
// X and y are expected standardized and centered, so the intercept is zero in
// solution space and gets reconstructed on inverse transformation. Reduction
// to NNLS: non-positive columns are negated, unrestricted columns split into
// (x, -x) copies, and sqrt(lambda)*I rows with zero targets append the ridge
// term; a Lawson-Hanson style active-set iteration solves the NNLS core.
// Constrained weights are exactly zero at the boundary, never merely small.
ConstrainedFit fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                   const std::vector<SignConstraint>& constraints, double lambda,
                   const Standardizer& snapshot, const FitOptions& options = {});
ConstrainedFit fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                   const std::vector<SignConstraint>& constraints, double lambda);

// Exhaustive reference: enumerates every active set over the constrained
// columns (<= 12 columns), solves each equality-reduced ridge system, and
// returns the feasible solution with the smallest objective.
ConstrainedFit brute_force_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                               const std::vector<SignConstraint>& constraints, double lambda,
                               const Standardizer& snapshot);
ConstrainedFit brute_force_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                               const std::vector<SignConstraint>& constraints, double lambda);

// Standardizes rows with the fit's snapshot, applies the weights, and
// inverse-standardizes the output (label mean/scale reconstruct the bias).
Eigen::VectorXd predict(const ConstrainedFit& fit, const Eigen::MatrixXd& raw_rows);

// Maximum KKT violation of a fit on (standardized) design and y:
//   active constrained weight: gradient must point out of the feasible set,
//   inactive or unrestricted:  gradient must vanish.
// Gradient of the objective is 2 (X^T (X b - y) + lambda b).
double kkt_residual(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                    const ConstrainedFit& fit);

double objective_value(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& weights, double lambda);

// NNLS core: minimize ||A z - b||^2 subject to z >= 0 (active-set iteration).
struct NnlsResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  double max_dual = 0.0;  // largest dual entry at exit
};
NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tolerance,
                int max_iterations);

struct WeightEntry {
  std::string name;
  double weight = 0.0;
  Category category = Category::mixed;
};

// Top-N weights ranked by absolute magnitude (ties by name), in standardized
// units with the column category carried for presentation.
std::vector<WeightEntry> weights_report(const ConstrainedFit& fit,
                                        const std::vector<std::string>& names,
                                        const std::vector<Category>& categories, int top_n);

// Fit serialization: {weights: [{name, beta, constraint, category}], bias,
// lambda, standardizer, objective}.
std::string fit_to_json(const ConstrainedFit& fit, const std::vector<std::string>& names,
                        const std::vector<Category>& categories);

}  // namespace llmreg
