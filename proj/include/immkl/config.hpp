#pragma once

// Experiment configuration files.
//
// INI-style sections with `key = value` lines; `#` or `;` start comments.
// Keys are addressed as `section.key` in overrides (`truth.r=20`). Lists are
// comma separated; several matrices are separated by `;`. Every key has a
// compiled-in default, so an empty file describes the full benchmark.

#include <string>
#include <utility>
#include <vector>

#include "immkl/harness.hpp"

namespace immkl {

// Ordered (key, value) pairs covering every known key.
using ConfigTable = std::vector<std::pair<std::string, std::string>>;

const ConfigTable& default_config_table();

// Defaults, then the file (skipped when path is empty), then overrides of the
// form `section.key=value`. Unknown keys raise ErrorKind::Config; an
// unreadable file raises ErrorKind::Io.
ConfigTable effective_config_table(const std::string& path, const std::vector<std::string>& overrides);

// Typed, validated experiment; errors name the offending key.
ExperimentConfig to_experiment(const ConfigTable& table);

ExperimentConfig parse_config(const std::string& path, const std::vector<std::string>& overrides);

// Text that effective_config_table parses back to the same table.
std::string render_config(const ConfigTable& table);

}  // namespace immkl
