#include "llmreg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "llmreg/errors.hpp"
#include "llmreg/metrics.hpp"
#include "llmreg/table.hpp"

namespace llmreg {

using nlohmann::json;

namespace {

void replace_all(std::string& text, const std::string& placeholder, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
}

std::string range_text(const FeatureModuleMeta& meta) {
  if (!meta.value_range) return "[min, max]";
  return "[" + format_double(meta.value_range->first) + ", " +
         format_double(meta.value_range->second) + "]";
}

}  // namespace

std::string build_discovery_prompt(const std::vector<FeatureModuleMeta>& subset,
                                   const IndicatorMeta& indicator, const std::string& country,
                                   const PromptTemplates& templates) {
  if (subset.empty()) {
    throw InvalidArgument("build_discovery_prompt: empty module subset");
  }
  if (indicator.description.empty()) {
    throw InvalidArgument("indicator \"" + indicator.name + "\" has an empty description");
  }
  std::ostringstream module_list;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (i > 0) module_list << "\n";
    module_list << "- \"" << subset[i].name << "\": " << subset[i].description
                << " (numerical variable within range " << range_text(subset[i]) << ")";
  }
  std::string prompt = templates.discover;
  replace_all(prompt, "<Indicator Definition>", indicator.description);
  replace_all(prompt, "<Indicator>", indicator.name);
  replace_all(prompt, "<Country>", country);
  replace_all(prompt, "<Module List>", module_list.str());
  return prompt;
}

namespace {

Category category_of_module(const std::vector<CategoryAssignment>& assignments,
                            const std::string& name) {
  for (const auto& assignment : assignments) {
    if (assignment.module == name) return assignment.category;
  }
  return Category::irrelevant;
}

// |Pearson| with constant columns scored 0 instead of undefined.
double abs_corr_or_zero(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  try {
    return std::abs(pearson(a, b));
  } catch (const InvalidArgument&) {
    return 0.0;
  }
}

}  // namespace

std::vector<DiscoveredFeature> filter_top_k(const std::vector<FeatureExpr>& candidates,
                                            const RegionTable& table,
                                            const std::vector<CategoryAssignment>& assignments,
                                            double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    throw InvalidArgument("filter_top_k: k_percent must lie in (0, 100]");
  }

  std::vector<DiscoveredFeature> scored;
  scored.reserve(candidates.size());
  std::map<Category, std::size_t> per_category_count;
  for (const auto& candidate : candidates) {
    DiscoveredFeature feature;
    feature.expr = candidate;
    const Eigen::VectorXd column = evaluate_expr(candidate, table);

    // Base columns of the candidate's own category subset, in table order.
    double total = 0.0;
    int count = 0;
    for (std::size_t c = 0; c < table.feature_names.size(); ++c) {
      if (category_of_module(assignments, table.feature_names[c]) != candidate.category) {
        continue;
      }
      total += abs_corr_or_zero(column, table.values.col(static_cast<Eigen::Index>(c)));
      ++count;
    }
    feature.mean_abs_corr = count > 0 ? total / count : 0.0;
    scored.push_back(std::move(feature));
    ++per_category_count[candidate.category];
  }

  // Rank within each category; keep ceil(k% of that category's candidates).
  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].mean_abs_corr != scored[b].mean_abs_corr) {
      return scored[a].mean_abs_corr > scored[b].mean_abs_corr;
    }
    return scored[a].expr.display_name() < scored[b].expr.display_name();
  });

  std::map<Category, std::size_t> kept_so_far;
  for (std::size_t idx : order) {
    const Category c = scored[idx].expr.category;
    const std::size_t quota = static_cast<std::size_t>(
        std::ceil(k_percent / 100.0 * static_cast<double>(per_category_count[c])));
    if (kept_so_far[c] < quota) {
      scored[idx].kept = true;
      ++kept_so_far[c];
    }
  }
  return scored;
}

AugmentedTable base_design(const RegionTable& table,
                           const std::vector<CategoryAssignment>& assignments,
                           bool include_irrelevant) {
  AugmentedTable design;
  std::vector<FeatureExpr> exprs;
  for (std::size_t c = 0; c < table.feature_names.size(); ++c) {
    const Category category = category_of_module(assignments, table.feature_names[c]);
    if (category == Category::irrelevant && !include_irrelevant) continue;
    exprs.push_back(FeatureExpr::base_feature(
        table.feature_names[c],
        category == Category::irrelevant ? Category::mixed : category));
  }
  design.values.resize(table.rows(), static_cast<Eigen::Index>(exprs.size()));
  for (std::size_t i = 0; i < exprs.size(); ++i) {
    design.values.col(static_cast<Eigen::Index>(i)) = evaluate_expr(exprs[i], table);
    design.names.push_back(exprs[i].display_name());
    design.categories.push_back(exprs[i].category);
  }
  design.columns = std::move(exprs);
  return design;
}

AugmentResult augment(const RegionTable& table, const Registry& registry,
                      const std::vector<CategoryAssignment>& assignments,
                      LlmProvider* provider, const AugmentOptions& options) {
  AugmentResult result;
  std::vector<FeatureExpr> columns;

  for (Category category : {Category::positive, Category::negative, Category::mixed}) {
    // Subset = modules of this category that exist as table columns.
    std::vector<FeatureModuleMeta> subset;
    for (const auto& name : table.feature_names) {
      if (category_of_module(assignments, name) != category) continue;
      const FeatureModuleMeta* meta = find_module(registry, name);
      if (meta != nullptr) subset.push_back(*meta);
    }
    if (subset.empty()) continue;

    // Primed set: the base features and, when enabled, their transforms.
    for (const auto& meta : subset) {
      columns.push_back(FeatureExpr::base_feature(meta.name, category));
    }
    if (options.transforms) {
      for (const auto& meta : subset) {
        for (Transform t : {Transform::log, Transform::sqrt, Transform::exp}) {
          columns.push_back(FeatureExpr::transform_of(t, meta.name, category));
        }
      }
    }

    // Tilde set: one discovery call for the subset, filtered to the top k%.
    if (!options.discovery) continue;
    if (provider == nullptr) {
      throw InvalidArgument("augment: discovery enabled but no provider given");
    }
    LlmRequest request;
    request.prompt =
        build_discovery_prompt(subset, options.indicator, options.country, options.templates);
    request.temperature = options.temperature;
    request.top_p = options.top_p;
    request.repetition_index = options.repetition_index;
    request.tag = PromptTag::discover;

    std::string response;
    try {
      response = provider->complete(request);
    } catch (const ReplayMissError&) {
      throw;
    } catch (const GatewayError& e) {
      result.warnings.push_back("discovery call failed for the " + to_string(category) +
                                " subset; proceeding with transforms only: " + e.what());
      continue;
    }

    std::vector<std::string> subset_names;
    for (const auto& meta : subset) subset_names.push_back(meta.name);
    DiscoveryParse parsed = parse_discovery_response(response, subset_names, category);
    result.warnings.insert(result.warnings.end(), parsed.warnings.begin(),
                           parsed.warnings.end());

    const auto scored =
        filter_top_k(parsed.expressions, table, assignments, options.k_percent);
    for (const auto& feature : scored) {
      if (feature.kept) columns.push_back(feature.expr);
      result.discovered.push_back(feature);
    }
  }

  result.table.values.resize(table.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) {
    result.table.values.col(static_cast<Eigen::Index>(i)) = evaluate_expr(columns[i], table);
    result.table.names.push_back(columns[i].display_name());
    result.table.categories.push_back(columns[i].category);
  }
  result.table.columns = std::move(columns);
  return result;
}

std::string discovered_to_json(const std::vector<DiscoveredFeature>& discovered) {
  json arr = json::array();
  for (const auto& feature : discovered) {
    json entry;
    entry["name"] = feature.expr.display_name();
    entry["kind"] = feature.expr.kind == FeatureExpr::Kind::base       ? "base"
                    : feature.expr.kind == FeatureExpr::Kind::product ? "product"
                                                                      : "transform";
    entry["operands"] = feature.expr.operands;
    entry["transform"] = to_string(feature.expr.transform);
    entry["category"] = to_string(feature.expr.category);
    entry["kept"] = feature.kept;
    entry["mean_abs_corr"] = feature.mean_abs_corr;
    arr.push_back(std::move(entry));
  }
  return arr.dump(2) + "\n";
}

std::vector<DiscoveredFeature> discovered_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("discovered-features file is not valid JSON: ") + e.what());
  }
  std::vector<DiscoveredFeature> out;
  for (const auto& entry : doc) {
    DiscoveredFeature feature;
    if (!entry.contains("kind") || !entry.contains("category") ||
        !entry.contains("operands")) {
      throw ParseError("discovered-features entry needs kind, category and operands");
    }
    const std::string kind = entry.at("kind").get<std::string>();
    const Category category = category_from_string(entry.at("category").get<std::string>());
    auto operands = entry.at("operands").get<std::vector<std::string>>();
    if (kind == "base") {
      feature.expr = FeatureExpr::base_feature(operands.at(0), category);
    } else if (kind == "product") {
      feature.expr = FeatureExpr::product_of(std::move(operands), category);
    } else {
      feature.expr = FeatureExpr::transform_of(
          transform_from_string(entry.at("transform").get<std::string>()), operands.at(0),
          category);
    }
    feature.kept = entry.value("kept", false);
    feature.mean_abs_corr = entry.value("mean_abs_corr", 0.0);
    out.push_back(std::move(feature));
  }
  return out;
}

}  // namespace llmreg
