#include "llmreg/registry.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "llmreg/errors.hpp"

namespace llmreg {

using nlohmann::json;

std::string to_string(ModuleGroup g) {
  switch (g) {
    case ModuleGroup::area: return "area";
    case ModuleGroup::nightlight: return "nightlight";
    case ModuleGroup::distance: return "distance";
    case ModuleGroup::landcover_ratio: return "landcover_ratio";
    case ModuleGroup::neighbor_aggregate: return "neighbor_aggregate";
    case ModuleGroup::custom: return "custom";
  }
  return "custom";
}

ModuleGroup module_group_from_string(std::string_view s) {
  if (s == "area") return ModuleGroup::area;
  if (s == "nightlight") return ModuleGroup::nightlight;
  if (s == "distance") return ModuleGroup::distance;
  if (s == "landcover_ratio") return ModuleGroup::landcover_ratio;
  if (s == "neighbor_aggregate") return ModuleGroup::neighbor_aggregate;
  if (s == "custom") return ModuleGroup::custom;
  throw ParseError("unknown module group: " + std::string(s));
}

namespace {

const char* const kLandcoverClasses[] = {
    "bareland", "rangeland", "development", "road",
    "tree",     "water",     "building",    "agricultural",
};

FeatureModuleMeta make_meta(std::string name, std::string description, ModuleGroup group) {
  FeatureModuleMeta meta;
  meta.name = std::move(name);
  meta.description = std::move(description);
  meta.group = group;
  return meta;
}

}  // namespace

Registry default_registry() {
  Registry reg;
  reg.push_back(make_meta("area", "The area size of a given region", ModuleGroup::area));
  reg.push_back(make_meta("Nightlight_Sum",
                          "The sum of nightlight intensity detected from satellite imagery "
                          "within a given region",
                          ModuleGroup::nightlight));
  reg.push_back(make_meta("Nightlight_Average",
                          "The average nightlight intensity detected from satellite imagery "
                          "within a given region",
                          ModuleGroup::nightlight));
  reg.push_back(make_meta("distance_airport",
                          "The distance from a given region to the nearest airport",
                          ModuleGroup::distance));
  reg.push_back(make_meta("distance_port",
                          "The distance from a given region to the nearest port",
                          ModuleGroup::distance));
  for (const char* cls : kLandcoverClasses) {
    reg.push_back(make_meta(std::string("area_") + cls,
                            std::string("The ratio of ") + cls + " area of a given region",
                            ModuleGroup::landcover_ratio));
  }
  // Neighbor aggregates mirror every base module over adjacent regions.
  const std::size_t base_count = reg.size();
  for (std::size_t i = 0; i < base_count; ++i) {
    FeatureModuleMeta meta;
    meta.name = "neighbor_" + reg[i].name;
    std::string desc = reg[i].description;
    const std::string target = "a given region";
    const auto pos = desc.find(target);
    if (pos != std::string::npos) {
      desc.replace(pos, target.size(), "the neighboring regions of a given region");
    }
    meta.description = desc;
    meta.group = ModuleGroup::neighbor_aggregate;
    reg.push_back(std::move(meta));
  }
  validate_registry(reg);
  return reg;
}

void validate_registry(const Registry& registry) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < registry.size(); ++i) {
    const auto& meta = registry[i];
    if (meta.name.empty()) {
      throw ParseError("registry entry " + std::to_string(i) + " has an empty name");
    }
    if (!seen.insert(meta.name).second) {
      throw ParseError("duplicate module name in registry: " + meta.name);
    }
    if (meta.value_range && meta.value_range->first > meta.value_range->second) {
      std::ostringstream os;
      os << "registry entry " << i << " (" << meta.name << "): value range min "
         << meta.value_range->first << " exceeds max " << meta.value_range->second;
      throw ParseError(os.str());
    }
  }
}

const FeatureModuleMeta* find_module(const Registry& registry, std::string_view name) {
  for (const auto& meta : registry) {
    if (meta.name == name) return &meta;
  }
  return nullptr;
}

Registry parse_registry_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("registry file is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("registry file must be a JSON array");

  Registry reg;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& entry = doc[i];
    if (!entry.is_object() || !entry.contains("name")) {
      throw ParseError("registry entry " + std::to_string(i) + " is not an object with a name");
    }
    FeatureModuleMeta meta;
    meta.name = entry.at("name").get<std::string>();
    meta.description = entry.value("description", std::string{});
    if (entry.contains("group")) {
      meta.group = module_group_from_string(entry.at("group").get<std::string>());
    }
    const bool has_min = entry.contains("min") && !entry.at("min").is_null();
    const bool has_max = entry.contains("max") && !entry.at("max").is_null();
    if (has_min != has_max) {
      throw ParseError("registry entry " + std::to_string(i) + " (" + meta.name +
                       "): min and max must be given together");
    }
    if (has_min) {
      meta.value_range = {entry.at("min").get<double>(), entry.at("max").get<double>()};
    }
    reg.push_back(std::move(meta));
  }
  validate_registry(reg);
  return reg;
}

Registry load_registry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open registry file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_registry_json(buffer.str());
}

std::string registry_to_json(const Registry& registry) {
  json arr = json::array();
  for (const auto& meta : registry) {
    json entry;
    entry["name"] = meta.name;
    entry["description"] = meta.description;
    entry["group"] = to_string(meta.group);
    if (meta.value_range) {
      entry["min"] = meta.value_range->first;
      entry["max"] = meta.value_range->second;
    }
    arr.push_back(std::move(entry));
  }
  return arr.dump(2) + "\n";
}

void save_registry(const Registry& registry, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write registry file: " + path);
  out << registry_to_json(registry);
}

}  // namespace llmreg
