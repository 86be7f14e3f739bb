#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "llmreg/category.hpp"
#include "llmreg/table.hpp"

namespace llmreg {

enum class Transform { none, log, sqrt, exp };

std::string to_string(Transform t);
Transform transform_from_string(std::string_view s);

// A derived design column: a base feature, a product of base features from
// one category subset (operands may repeat), or a unary transform of a base
// feature. The display name is canonical: operands sorted and joined by '*',
// transforms as a log()/sqrt()/exp() prefix.
struct FeatureExpr {
  enum class Kind { base, product, transform };

  Kind kind = Kind::base;
  std::vector<std::string> operands;  // >= 2 for products, exactly 1 otherwise
  Transform transform = Transform::none;
  Category category = Category::mixed;

  std::string display_name() const;

  static FeatureExpr base_feature(std::string name, Category category);
  static FeatureExpr product_of(std::vector<std::string> names, Category category);
  static FeatureExpr transform_of(Transform t, std::string name, Category category);
};

// Grammar per response line:
//   New column <int>: <expr> | <explanation>
// where <expr> is quoted-or-bare module names joined by '*' (a single name
// returns the module itself). Names match the subset case-insensitively with
// quote/underscore/space normalization; lines with unknown names or broken
// syntax are skipped with a warning. Duplicate canonical names deduplicate.
// Best-effort: never throws, whatever the input bytes.
struct DiscoveryParse {
  std::vector<FeatureExpr> expressions;
  std::vector<std::string> warnings;
};
DiscoveryParse parse_discovery_response(const std::string& response,
                                        const std::vector<std::string>& subset_names,
                                        Category subset_category);

// Column evaluation on raw (pre-standardization) features:
//   product: elementwise product of the operand columns
//   log:     sign(x) * log(1 + |x|)
//   sqrt:    sign(x) * sqrt(|x|)
//   exp:     exp(clip(z, -30, 30)) with z the column z-scored over the table
// Always finite on finite input.
Eigen::VectorXd evaluate_expr(const FeatureExpr& expr, const RegionTable& table);

}  // namespace llmreg
