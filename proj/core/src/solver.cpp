#include "llmreg/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "llmreg/errors.hpp"
#include "llmreg/table.hpp"

namespace llmreg {

using nlohmann::json;

std::string to_string(SignConstraint c) {
  switch (c) {
    case SignConstraint::non_negative: return "non_negative";
    case SignConstraint::non_positive: return "non_positive";
    case SignConstraint::unrestricted: return "free";
  }
  return "free";
}

SignConstraint sign_constraint_from_string(std::string_view s) {
  if (s == "non_negative") return SignConstraint::non_negative;
  if (s == "non_positive") return SignConstraint::non_positive;
  if (s == "free") return SignConstraint::unrestricted;
  throw ParseError("unknown sign constraint: " + std::string(s));
}

SignConstraint constraint_for_category(Category c) {
  switch (c) {
    case Category::positive: return SignConstraint::non_negative;
    case Category::negative: return SignConstraint::non_positive;
    default: return SignConstraint::unrestricted;
  }
}

SignConstraint flip(SignConstraint c) {
  if (c == SignConstraint::non_negative) return SignConstraint::non_positive;
  if (c == SignConstraint::non_positive) return SignConstraint::non_negative;
  return c;
}

double objective_value(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& weights, double lambda) {
  const Eigen::VectorXd residual = y - design * weights;
  return residual.squaredNorm() + lambda * weights.squaredNorm();
}

namespace {

// Minimum-norm least-squares solve; tolerates rank deficiency (lambda = 0
// with duplicate or split columns).
Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  return cod.solve(b);
}

void check_inputs(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                  const std::vector<SignConstraint>& constraints, double lambda) {
  if (design.rows() != y.size()) {
    throw InvalidArgument("fit: design rows do not match target length");
  }
  if (y.size() < 1) throw InvalidArgument("fit: need at least one row");
  if (static_cast<Eigen::Index>(constraints.size()) != design.cols()) {
    throw InvalidArgument("fit: one constraint per design column required");
  }
  if (!(lambda >= 0.0)) throw InvalidArgument("fit: lambda must be non-negative");
  if (!design.allFinite() || !y.allFinite()) {
    throw InvalidArgument("fit: non-finite values in design or target");
  }
}

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tolerance,
                int max_iterations) {
  const Eigen::Index n = A.cols();
  NnlsResult result;
  result.x = Eigen::VectorXd::Zero(n);
  if (n == 0) {
    result.converged = true;
    return result;
  }

  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  std::vector<bool> rejected(static_cast<std::size_t>(n), false);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);

  auto solve_passive = [&](const std::vector<bool>& in_set) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (in_set[static_cast<std::size_t>(j)]) cols.push_back(j);
    }
    Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      Ap.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
    }
    const Eigen::VectorXd s = solve_least_squares(Ap, b);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      full(cols[k]) = s(static_cast<Eigen::Index>(k));
    }
    return full;
  };

  int iterations = 0;
  while (true) {
    const Eigen::VectorXd dual = A.transpose() * (b - A * x);

    Eigen::Index best = -1;
    double best_dual = tolerance;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)] || rejected[static_cast<std::size_t>(j)]) {
        continue;
      }
      if (dual(j) > best_dual) {
        best_dual = dual(j);
        best = j;
      }
    }
    if (best < 0) {
      result.converged = true;
      double max_dual = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!passive[static_cast<std::size_t>(j)]) max_dual = std::max(max_dual, dual(j));
      }
      result.max_dual = max_dual;
      break;
    }

    passive[static_cast<std::size_t>(best)] = true;
    Eigen::VectorXd trial = solve_passive(passive);

    // Degenerate pivot: the entering column solves to a non-positive weight
    // (possible only under near linear dependence). Reject it for this round,
    // as Lawson-Hanson does; rejections reset after any successful pivot.
    if (trial(best) <= tolerance) {
      passive[static_cast<std::size_t>(best)] = false;
      rejected[static_cast<std::size_t>(best)] = true;
      continue;
    }
    std::fill(rejected.begin(), rejected.end(), false);

    // Inner loop: walk toward the passive least-squares solution, dropping
    // variables that would cross zero.
    while (true) {
      ++iterations;
      if (iterations > max_iterations) {
        const Eigen::VectorXd final_dual = A.transpose() * (b - A * x);
        double gradient_norm = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (!passive[static_cast<std::size_t>(j)]) {
            gradient_norm = std::max(gradient_norm, std::max(0.0, final_dual(j)));
          } else {
            gradient_norm = std::max(gradient_norm, std::abs(final_dual(j)));
          }
        }
        result.x = x;
        result.iterations = iterations;
        result.max_dual = gradient_norm;
        result.converged = false;
        return result;
      }

      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && trial(j) <= 0.0) {
          feasible = false;
          break;
        }
      }
      if (feasible) {
        x = trial;
        break;
      }

      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!passive[static_cast<std::size_t>(j)] || trial(j) > 0.0) continue;
        const double denominator = x(j) - trial(j);
        const double step = denominator > 0.0 ? x(j) / denominator : 0.0;
        alpha = std::min(alpha, step);
      }
      if (!std::isfinite(alpha)) alpha = 0.0;

      x += alpha * (trial - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tolerance) {
          x(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
        }
      }
      trial = solve_passive(passive);
    }
  }

  // Exact zeros for every active coordinate.
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!passive[static_cast<std::size_t>(j)] || x(j) < 0.0) x(j) = std::max(x(j), 0.0);
  }
  result.x = x;
  result.iterations = iterations;
  return result;
}

ConstrainedFit fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                   const std::vector<SignConstraint>& constraints, double lambda,
                   const Standardizer& snapshot, const FitOptions& options) {
  check_inputs(design, y, constraints, lambda);
  const Eigen::Index p = design.cols();

  ConstrainedFit out;
  out.constraints = constraints;
  out.lambda = lambda;
  out.standardizer = snapshot;

  if (p == 0) {
    out.weights = Eigen::VectorXd::Zero(0);
    out.objective = y.squaredNorm();
    return out;
  }

  // Column map for the NNLS reduction. Unrestricted columns contribute two
  // entries (+x, -x); non-positive columns flip sign so every NNLS variable
  // is constrained non-negative.
  std::vector<Eigen::Index> source_column;
  std::vector<double> source_sign;
  for (Eigen::Index j = 0; j < p; ++j) {
    switch (constraints[static_cast<std::size_t>(j)]) {
      case SignConstraint::non_negative:
        source_column.push_back(j);
        source_sign.push_back(+1.0);
        break;
      case SignConstraint::non_positive:
        source_column.push_back(j);
        source_sign.push_back(-1.0);
        break;
      case SignConstraint::unrestricted:
        source_column.push_back(j);
        source_sign.push_back(+1.0);
        source_column.push_back(j);
        source_sign.push_back(-1.0);
        break;
    }
  }
  const Eigen::Index q = static_cast<Eigen::Index>(source_column.size());
  const Eigen::Index rows = design.rows();
  const bool ridge = lambda > 0.0;
  const Eigen::Index total_rows = rows + (ridge ? q : 0);

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(total_rows, q);
  for (Eigen::Index k = 0; k < q; ++k) {
    A.col(k).head(rows) =
        source_sign[static_cast<std::size_t>(k)] * design.col(source_column[static_cast<std::size_t>(k)]);
  }
  if (ridge) {
    const double root_lambda = std::sqrt(lambda);
    for (Eigen::Index k = 0; k < q; ++k) {
      A(rows + k, k) = root_lambda;
    }
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(total_rows);
  b.head(rows) = y;

  const int max_iterations = options.max_iterations_per_column * static_cast<int>(q);
  const NnlsResult nnls_result = nnls(A, b, options.dual_tolerance, std::max(max_iterations, 1));
  if (!nnls_result.converged) {
    throw ConvergenceError(
        "active-set iteration cap reached (residual gradient norm " +
            format_double(nnls_result.max_dual) + ")",
        nnls_result.max_dual);
  }

  out.weights = Eigen::VectorXd::Zero(p);
  for (Eigen::Index k = 0; k < q; ++k) {
    out.weights(source_column[static_cast<std::size_t>(k)]) +=
        source_sign[static_cast<std::size_t>(k)] * nnls_result.x(k);
  }
  // Clamp: a constrained weight sits exactly on its bound, never across it.
  for (Eigen::Index j = 0; j < p; ++j) {
    if (constraints[static_cast<std::size_t>(j)] == SignConstraint::non_negative &&
        out.weights(j) < 0.0) {
      out.weights(j) = 0.0;
    }
    if (constraints[static_cast<std::size_t>(j)] == SignConstraint::non_positive &&
        out.weights(j) > 0.0) {
      out.weights(j) = 0.0;
    }
  }
  out.iterations = nnls_result.iterations;
  out.objective = objective_value(design, y, out.weights, lambda);
  return out;
}

ConstrainedFit fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                   const std::vector<SignConstraint>& constraints, double lambda) {
  return fit(design, y, constraints, lambda, Standardizer::identity(design.cols()),
             FitOptions{});
}

ConstrainedFit brute_force_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                               const std::vector<SignConstraint>& constraints, double lambda,
                               const Standardizer& snapshot) {
  check_inputs(design, y, constraints, lambda);
  const Eigen::Index p = design.cols();
  if (p > 12) {
    throw InvalidArgument("brute_force_fit supports at most 12 columns");
  }

  ConstrainedFit out;
  out.constraints = constraints;
  out.lambda = lambda;
  out.standardizer = snapshot;

  if (p == 0) {
    out.weights = Eigen::VectorXd::Zero(0);
    out.objective = y.squaredNorm();
    return out;
  }

  std::vector<Eigen::Index> constrained;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (constraints[static_cast<std::size_t>(j)] != SignConstraint::unrestricted) {
      constrained.push_back(j);
    }
  }

  constexpr double kFeasibilityTolerance = 1e-9;
  const bool ridge = lambda > 0.0;
  const double root_lambda = std::sqrt(std::max(lambda, 0.0));

  double best_objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_weights = Eigen::VectorXd::Zero(p);

  const std::size_t subsets = std::size_t{1} << constrained.size();
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    // Bit set -> that constrained column is pinned at zero (active).
    std::vector<bool> active(static_cast<std::size_t>(p), false);
    for (std::size_t k = 0; k < constrained.size(); ++k) {
      if (mask & (std::size_t{1} << k)) {
        active[static_cast<std::size_t>(constrained[k])] = true;
      }
    }
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!active[static_cast<std::size_t>(j)]) cols.push_back(j);
    }

    Eigen::VectorXd weights = Eigen::VectorXd::Zero(p);
    if (!cols.empty()) {
      const Eigen::Index m = design.rows();
      const Eigen::Index k = static_cast<Eigen::Index>(cols.size());
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + (ridge ? k : 0), k);
      for (Eigen::Index c = 0; c < k; ++c) {
        A.col(c).head(m) = design.col(cols[static_cast<std::size_t>(c)]);
        if (ridge) A(m + c, c) = root_lambda;
      }
      Eigen::VectorXd b = Eigen::VectorXd::Zero(A.rows());
      b.head(m) = y;
      const Eigen::VectorXd solution = solve_least_squares(A, b);
      for (Eigen::Index c = 0; c < k; ++c) {
        weights(cols[static_cast<std::size_t>(c)]) = solution(c);
      }
    }

    bool feasible = true;
    for (Eigen::Index j = 0; j < p && feasible; ++j) {
      switch (constraints[static_cast<std::size_t>(j)]) {
        case SignConstraint::non_negative:
          feasible = weights(j) >= -kFeasibilityTolerance;
          break;
        case SignConstraint::non_positive:
          feasible = weights(j) <= kFeasibilityTolerance;
          break;
        case SignConstraint::unrestricted:
          break;
      }
    }
    if (!feasible) continue;

    for (Eigen::Index j = 0; j < p; ++j) {
      if (constraints[static_cast<std::size_t>(j)] == SignConstraint::non_negative) {
        weights(j) = std::max(weights(j), 0.0);
      } else if (constraints[static_cast<std::size_t>(j)] == SignConstraint::non_positive) {
        weights(j) = std::min(weights(j), 0.0);
      }
    }

    const double objective = objective_value(design, y, weights, lambda);
    if (objective < best_objective) {
      best_objective = objective;
      best_weights = weights;
    }
  }

  out.weights = best_weights;
  out.objective = best_objective;
  return out;
}

ConstrainedFit brute_force_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                               const std::vector<SignConstraint>& constraints, double lambda) {
  return brute_force_fit(design, y, constraints, lambda,
                         Standardizer::identity(design.cols()));
}

Eigen::VectorXd predict(const ConstrainedFit& fit, const Eigen::MatrixXd& raw_rows) {
  if (raw_rows.cols() != static_cast<Eigen::Index>(fit.constraints.size())) {
    throw InvalidArgument("predict: column count does not match the fit");
  }
  const Eigen::MatrixXd standardized = fit.standardizer.apply(raw_rows);
  const Eigen::VectorXd standardized_pred =
      (standardized * fit.weights).array() + fit.bias;
  return fit.standardizer.invert_labels(standardized_pred);
}

double kkt_residual(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                    const ConstrainedFit& fit) {
  const Eigen::VectorXd gradient =
      2.0 * (design.transpose() * (design * fit.weights - y) + fit.lambda * fit.weights);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    const double g = gradient(j);
    const double w = fit.weights(j);
    switch (fit.constraints[static_cast<std::size_t>(j)]) {
      case SignConstraint::non_negative:
        // active at 0: increasing the weight must not decrease the objective
        worst = std::max(worst, w == 0.0 ? std::max(0.0, -g) : std::abs(g));
        break;
      case SignConstraint::non_positive:
        worst = std::max(worst, w == 0.0 ? std::max(0.0, g) : std::abs(g));
        break;
      case SignConstraint::unrestricted:
        worst = std::max(worst, std::abs(g));
        break;
    }
  }
  return worst;
}

std::vector<WeightEntry> weights_report(const ConstrainedFit& fit,
                                        const std::vector<std::string>& names,
                                        const std::vector<Category>& categories, int top_n) {
  if (top_n < 1) throw InvalidArgument("weights_report: top_n must be at least 1");
  if (names.size() != static_cast<std::size_t>(fit.weights.size()) ||
      categories.size() != names.size()) {
    throw InvalidArgument("weights_report: names/categories do not match the fit");
  }
  std::vector<WeightEntry> entries;
  entries.reserve(names.size());
  for (std::size_t j = 0; j < names.size(); ++j) {
    entries.push_back({names[j], fit.weights(static_cast<Eigen::Index>(j)), categories[j]});
  }
  std::sort(entries.begin(), entries.end(), [](const WeightEntry& a, const WeightEntry& b) {
    const double ma = std::abs(a.weight);
    const double mb = std::abs(b.weight);
    if (ma != mb) return ma > mb;
    return a.name < b.name;
  });
  if (entries.size() > static_cast<std::size_t>(top_n)) {
    entries.resize(static_cast<std::size_t>(top_n));
  }
  return entries;
}

std::string fit_to_json(const ConstrainedFit& fit, const std::vector<std::string>& names,
                        const std::vector<Category>& categories) {
  if (names.size() != static_cast<std::size_t>(fit.weights.size()) ||
      categories.size() != names.size()) {
    throw InvalidArgument("fit_to_json: names/categories do not match the fit");
  }
  json doc;
  json weights = json::array();
  for (std::size_t j = 0; j < names.size(); ++j) {
    weights.push_back({
        {"name", names[j]},
        {"beta", fit.weights(static_cast<Eigen::Index>(j))},
        {"constraint", to_string(fit.constraints[j])},
        {"category", to_string(categories[j])},
    });
  }
  doc["weights"] = std::move(weights);
  doc["bias"] = fit.bias;
  doc["lambda"] = fit.lambda;
  doc["objective"] = fit.objective;
  json standardizer;
  standardizer["mean"] = std::vector<double>(fit.standardizer.mean.data(),
                                             fit.standardizer.mean.data() + fit.standardizer.mean.size());
  standardizer["scale"] = std::vector<double>(fit.standardizer.scale.data(),
                                              fit.standardizer.scale.data() + fit.standardizer.scale.size());
  standardizer["label_mean"] = fit.standardizer.label_mean;
  standardizer["label_scale"] = fit.standardizer.label_scale;
  doc["standardizer"] = std::move(standardizer);
  return doc.dump(2) + "\n";
}

}  // namespace llmreg
