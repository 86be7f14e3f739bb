#include "llmreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "llmreg/errors.hpp"

namespace llmreg {

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw InvalidArgument("pearson: length mismatch");
  if (x.size() < 2) throw InvalidArgument("pearson: need at least two points");
  const double mx = x.mean();
  const double my = y.mean();
  const Eigen::ArrayXd dx = x.array() - mx;
  const Eigen::ArrayXd dy = y.array() - my;
  const double sxx = (dx * dx).sum();
  const double syy = (dy * dy).sum();
  if (sxx <= 0.0 || syy <= 0.0) {
    throw InvalidArgument("pearson: undefined for a constant input");
  }
  return (dx * dy).sum() / std::sqrt(sxx * syy);
}

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size()) throw InvalidArgument("rmse: length mismatch");
  if (pred.size() == 0) throw InvalidArgument("rmse: empty vectors");
  return std::sqrt((pred - truth).array().square().mean());
}

MeanSe mean_and_se(const std::vector<double>& values) {
  MeanSe out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / n) / std::sqrt(n);
  return out;
}

WinMatrix win_matrix(const std::vector<EvalCell>& cells,
                     const std::vector<std::string>& models, const std::string& metric) {
  if (metric != "pearson" && metric != "rmse") {
    throw InvalidArgument("win_matrix metric must be pearson or rmse");
  }
  const bool higher_wins = metric == "pearson";

  for (const auto& cell : cells) {
    for (const auto& model : models) {
      if (cell.models.find(model) == cell.models.end()) {
        throw InvalidArgument("win_matrix: model \"" + model + "\" missing from cell " +
                              cell.dataset + "/" + cell.indicator + "/" + cell.setting);
      }
    }
  }

  WinMatrix matrix;
  matrix.models = models;
  matrix.metric = metric;
  matrix.cell_count = static_cast<int>(cells.size());
  const Eigen::Index m = static_cast<Eigen::Index>(models.size());
  matrix.rates = Eigen::MatrixXd::Constant(m, m, std::numeric_limits<double>::quiet_NaN());

  auto score_of = [&](const EvalCell& cell, const std::string& model) {
    const auto& s = cell.models.at(model);
    return higher_wins ? s.pearson_mean : s.rmse_mean;
  };

  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a + 1; b < m; ++b) {
      int wins_a = 0;
      int ties = 0;
      for (const auto& cell : cells) {
        const double sa = score_of(cell, models[static_cast<std::size_t>(a)]);
        const double sb = score_of(cell, models[static_cast<std::size_t>(b)]);
        if (sa == sb) {
          ++ties;
        } else if (higher_wins ? (sa > sb) : (sa < sb)) {
          ++wins_a;
        }
      }
      const double n = static_cast<double>(cells.size());
      const double rate_a = n == 0.0 ? 0.5 : (2.0 * wins_a + ties) / (2.0 * n);
      // The mirror entry is the exact complement so antisymmetry holds
      // bit-exactly even under tie splitting.
      matrix.rates(b, a) = rate_a;
      matrix.rates(a, b) = 1.0 - rate_a;
    }
  }
  return matrix;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::set<std::string> sa(a.begin(), a.end());
  const std::set<std::string> sb(b.begin(), b.end());
  std::size_t intersection = 0;
  for (const auto& item : sa) {
    if (sb.count(item)) ++intersection;
  }
  const std::size_t union_size = sa.size() + sb.size() - intersection;
  if (union_size == 0) return 1.0;  // both empty: perfect agreement
  return static_cast<double>(intersection) / static_cast<double>(union_size);
}

const std::vector<double> kReliabilityTaus = {0.05, 0.10, 0.15, 0.20};

JaccardScores jaccard_reliability(const std::vector<CategoryAssignment>& assignments,
                                  const RegionTable& table, const std::vector<double>& taus) {
  if (taus.empty()) throw InvalidArgument("jaccard_reliability: empty tau list");

  JaccardScores scores;
  for (double tau : taus) {
    const auto oracle = oracle_categorize(table, tau);
    for (Category c : {Category::positive, Category::negative, Category::mixed}) {
      const double j = jaccard(modules_in_category(assignments, c),
                               modules_in_category(oracle, c));
      if (c == Category::positive) scores.positive += j;
      else if (c == Category::negative) scores.negative += j;
      else scores.mixed += j;
    }
  }
  const double n = static_cast<double>(taus.size());
  scores.positive /= n;
  scores.negative /= n;
  scores.mixed /= n;
  return scores;
}

int default_mi_bins(Eigen::Index n) {
  const int root = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  return std::min(4, std::max(1, root));
}

namespace {

// Quantile bin assignment. Sorted positions map to floor(pos * bins / n);
// tied values inherit the bin of their first occurrence so identical inputs
// always share a bin (and a constant vector occupies a single bin).
std::vector<int> quantile_bins(const Eigen::VectorXd& v, int bins) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });

  std::vector<int> bin_of(static_cast<std::size_t>(n), 0);
  int previous_bin = 0;
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    const Eigen::Index idx = order[static_cast<std::size_t>(pos)];
    int bin = static_cast<int>((pos * bins) / n);
    if (pos > 0 && v(idx) == v(order[static_cast<std::size_t>(pos - 1)])) {
      bin = previous_bin;
    }
    bin_of[static_cast<std::size_t>(idx)] = bin;
    previous_bin = bin;
  }
  return bin_of;
}

}  // namespace

double mutual_information(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int bins) {
  if (x.size() != y.size()) throw InvalidArgument("mutual_information: length mismatch");
  const Eigen::Index n = x.size();
  if (bins <= 0) bins = default_mi_bins(n);
  if (bins < 2) bins = 2;
  if (n < bins) throw InvalidArgument("mutual_information: need at least `bins` samples");

  const auto bx = quantile_bins(x, bins);
  const auto by = quantile_bins(y, bins);

  std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
  std::vector<double> px(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> py(static_cast<std::size_t>(bins), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto xi = static_cast<std::size_t>(bx[static_cast<std::size_t>(i)]);
    const auto yi = static_cast<std::size_t>(by[static_cast<std::size_t>(i)]);
    joint[xi * static_cast<std::size_t>(bins) + yi] += 1.0;
    px[xi] += 1.0;
    py[yi] += 1.0;
  }

  const double dn = static_cast<double>(n);
  std::vector<double> terms;
  terms.reserve(joint.size());
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      const double c = joint[static_cast<std::size_t>(i) * bins + j];
      if (c <= 0.0) continue;
      const double pij = c / dn;
      const double pi = px[static_cast<std::size_t>(i)] / dn;
      const double pj = py[static_cast<std::size_t>(j)] / dn;
      terms.push_back(pij * std::log2(pij / (pi * pj)));
    }
  }
  // Summing in sorted order makes MI(x,y) == MI(y,x) bit-exact: the term
  // multiset is symmetric under the swap, only its iteration order is not.
  std::sort(terms.begin(), terms.end());
  double mi = std::accumulate(terms.begin(), terms.end(), 0.0);
  if (mi < 0.0 && mi > -1e-12) mi = 0.0;  // clamp floating-point dust
  return std::max(mi, 0.0);
}

MiDifference mi_difference_mean(const Eigen::MatrixXd& discovered,
                                const Eigen::MatrixXd& original,
                                const Eigen::VectorXd& labels, int bins) {
  if (discovered.cols() < 1) {
    throw InvalidArgument("mi_difference_mean: need at least one discovered column");
  }
  if (original.cols() < 1) {
    throw InvalidArgument("mi_difference_mean: need at least one original column");
  }

  double baseline = 0.0;
  for (Eigen::Index c = 0; c < original.cols(); ++c) {
    baseline += mutual_information(original.col(c), labels, bins);
  }
  baseline /= static_cast<double>(original.cols());
  if (baseline <= 0.0) {
    throw InvalidArgument("mi_difference_mean: baseline MI is zero, difference undefined");
  }

  std::vector<double> diffs;
  diffs.reserve(static_cast<std::size_t>(discovered.cols()));
  for (Eigen::Index c = 0; c < discovered.cols(); ++c) {
    const double mi = mutual_information(discovered.col(c), labels, bins);
    diffs.push_back(100.0 * (mi - baseline) / baseline);
  }

  const MeanSe stats = mean_and_se(diffs);
  return {stats.mean, stats.se, static_cast<int>(diffs.size())};
}

}  // namespace llmreg
