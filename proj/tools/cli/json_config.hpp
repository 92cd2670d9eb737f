#pragma once

#include <istream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace trajkit::cli {

/// Lets CLI11 read JSON config files. Objects become option sections named
/// after subcommands; scalars and arrays become option values.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

/// Resolved option values of one app (given or defaulted), keyed by long name.
nlohmann::ordered_json resolved_options(const CLI::App& app);

}  // namespace trajkit::cli
