#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace llmreg {

enum class ModuleGroup {
  area,
  nightlight,
  distance,
  landcover_ratio,
  neighbor_aggregate,
  custom,
};

std::string to_string(ModuleGroup g);
ModuleGroup module_group_from_string(std::string_view s);

// Metadata for one feature module: a named extractor producing one numeric
// attribute per region. The description feeds the prompts verbatim.
struct FeatureModuleMeta {
  std::string name;
  std::string description;
  std::optional<std::pair<double, double>> value_range;  // [min, max], feature units
  ModuleGroup group = ModuleGroup::custom;
};

struct IndicatorMeta {
  std::string name;
  std::string description;
};

using Registry = std::vector<FeatureModuleMeta>;

// The bundled 26-module registry: area, nightlight sum/average, distances to
// airport/port, eight land-cover ratios, and the neighbor aggregate of each.
Registry default_registry();

// Registry file format: JSON array of {name, description, min, max, group}.
Registry load_registry(const std::string& path);
Registry parse_registry_json(const std::string& json_text);
std::string registry_to_json(const Registry& registry);
void save_registry(const Registry& registry, const std::string& path);

// Throws on duplicate/empty names or min > max.
void validate_registry(const Registry& registry);

const FeatureModuleMeta* find_module(const Registry& registry, std::string_view name);

}  // namespace llmreg
