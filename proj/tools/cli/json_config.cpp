#include "cli/json_config.hpp"

namespace trajkit::cli {

namespace {

std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

void flatten(const nlohmann::json& node, std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
  for (const auto& [key, value] : node.items()) {
    if (value.is_object()) {
      parents.push_back(key);
      flatten(value, parents, out);
      parents.pop_back();
      continue;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    if (value.is_array()) {
      for (const auto& e : value) item.inputs.push_back(scalar_text(e));
    } else if (!value.is_null()) {
      item.inputs.push_back(scalar_text(value));
    }
    out.push_back(std::move(item));
  }
}

}  // namespace

std::string JsonConfig::to_config(const CLI::App* app, bool, bool, std::string) const {
  return resolved_options(*app).dump(2);
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(input);
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ConversionError("config is not valid JSON: " + std::string(e.what()));
  }
  if (!root.is_object()) throw CLI::ConversionError("config must be a JSON object");
  std::vector<CLI::ConfigItem> items;
  std::vector<std::string> parents;
  flatten(root, parents, items);
  return items;
}

nlohmann::ordered_json resolved_options(const CLI::App& app) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    // Unset list options are left out so replay falls back to their default.
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (opt->get_expected_max() > 1) {
        out[name] = res;
      } else if (opt->get_type_size() == 0) {
        out[name] = opt->as<bool>();
      } else {
        out[name] = res.empty() ? std::string() : res.back();
      }
    } else if (opt->get_expected_max() <= 1 && !opt->get_default_str().empty()) {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

}  // namespace trajkit::cli
