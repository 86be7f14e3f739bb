#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llmreg/categorize.hpp"
#include "llmreg/registry.hpp"
#include "llmreg/table.hpp"

namespace llmreg {

// One synthetic feature: the coefficient's sign is its declared correlation
// category (+ -> Positive, - -> Negative, 0 -> Mixed).
struct SyntheticFeature {
  std::string name;
  double coefficient = 0.0;
};

struct SyntheticSpec {
  std::vector<SyntheticFeature> features;
  std::size_t regions = 50;
  // Label noise standard deviation as a fraction of the noiseless label
  // standard deviation (0 = exact linear labels).
  double noise_level = 0.0;
  std::uint64_t seed = 0;
  std::string indicator_name = "indicator";

  static SyntheticSpec from_json(const std::string& json_text);
  static SyntheticSpec load(const std::string& path);
  std::string to_json() const;
};

struct SyntheticData {
  RegionTable table;
  Registry registry;  // one custom module per feature
  std::vector<CategoryAssignment> oracle;
  Eigen::VectorXd noiseless_labels;
};

// Deterministic under the spec seed: features are iid standard normals,
// labels = sum_j c_j x_j + noise. Requires at least 6 regions (5-shot plus
// holdout).
SyntheticData make_synthetic(const SyntheticSpec& spec);

}  // namespace llmreg
