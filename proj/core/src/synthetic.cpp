#include "llmreg/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "llmreg/errors.hpp"
#include "llmreg/rng.hpp"

namespace llmreg {

using nlohmann::json;

SyntheticSpec SyntheticSpec::from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("synthetic spec must be a JSON object");
  SyntheticSpec spec;
  try {
    for (const auto& entry : doc.at("features")) {
      spec.features.push_back({entry.at("name").get<std::string>(),
                               entry.at("coefficient").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("synthetic spec features: ") + e.what());
  }
  spec.regions = doc.value("regions", std::size_t{50});
  spec.noise_level = doc.value("noise_level", 0.0);
  spec.seed = doc.value("seed", std::uint64_t{0});
  spec.indicator_name = doc.value("indicator_name", std::string("indicator"));
  return spec;
}

SyntheticSpec SyntheticSpec::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open synthetic spec: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

std::string SyntheticSpec::to_json() const {
  json doc;
  json features = json::array();
  for (const auto& f : this->features) {
    features.push_back({{"name", f.name}, {"coefficient", f.coefficient}});
  }
  doc["features"] = std::move(features);
  doc["regions"] = regions;
  doc["noise_level"] = noise_level;
  doc["seed"] = seed;
  doc["indicator_name"] = indicator_name;
  return doc.dump(2) + "\n";
}

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  if (spec.features.empty()) {
    throw InvalidArgument("synthetic spec declares no features");
  }
  if (spec.regions < 6) {
    throw InvalidArgument("synthetic spec needs at least 6 regions (5-shot plus holdout)");
  }
  if (spec.noise_level < 0.0) {
    throw InvalidArgument("synthetic noise level must be non-negative");
  }

  const Eigen::Index n = static_cast<Eigen::Index>(spec.regions);
  const Eigen::Index p = static_cast<Eigen::Index>(spec.features.size());

  Rng rng(spec.seed);
  Eigen::MatrixXd values(n, p);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < p; ++c) {
      values(r, c) = rng.next_gaussian();
    }
  }

  Eigen::VectorXd coefficients(p);
  for (Eigen::Index c = 0; c < p; ++c) {
    coefficients(c) = spec.features[static_cast<std::size_t>(c)].coefficient;
  }
  const Eigen::VectorXd noiseless = values * coefficients;

  Eigen::VectorXd labels = noiseless;
  if (spec.noise_level > 0.0) {
    const double mean = noiseless.mean();
    const double label_std =
        std::sqrt((noiseless.array() - mean).square().mean());
    const double sigma = spec.noise_level * (label_std > 0.0 ? label_std : 1.0);
    for (Eigen::Index r = 0; r < n; ++r) {
      labels(r) += sigma * rng.next_gaussian();
    }
  }

  SyntheticData data;
  for (const auto& f : spec.features) {
    FeatureModuleMeta meta;
    meta.name = f.name;
    meta.description = "Synthetic feature \"" + f.name + "\" of a given region";
    meta.group = ModuleGroup::custom;
    data.registry.push_back(std::move(meta));
  }
  validate_registry(data.registry);

  data.table.feature_names.reserve(spec.features.size());
  for (const auto& f : spec.features) data.table.feature_names.push_back(f.name);
  data.table.region_ids.reserve(spec.regions);
  for (std::size_t r = 0; r < spec.regions; ++r) {
    char buffer[16];
    std::snprintf(buffer, sizeof(buffer), "R%04zu", r);
    data.table.region_ids.emplace_back(buffer);
  }
  data.table.values = std::move(values);
  data.table.labels = labels;
  data.table.indicator_name = spec.indicator_name;
  data.table.validate();
  data.noiseless_labels = noiseless;

  for (const auto& f : spec.features) {
    CategoryAssignment assignment;
    assignment.module = f.name;
    assignment.category = f.coefficient > 0.0   ? Category::positive
                          : f.coefficient < 0.0 ? Category::negative
                                                : Category::mixed;
    data.oracle.push_back(std::move(assignment));
  }
  return data;
}

}  // namespace llmreg
