#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "delight/crf.hpp"
#include "delight/decompose.hpp"
#include "delight/light_estimate.hpp"
#include "delight/penumbra.hpp"

namespace delight {

/// Stage names in execution order.
const std::vector<std::string>& pipeline_stages();

struct PipelineConfig {
  std::filesystem::path project_dir;
  std::filesystem::path output_dir;
  int workers = 1;
  std::vector<std::string> stages = pipeline_stages();
  CrfParams crf;
  PairParams pairs;
  RatioParams ratio;
  PenumbraParams penumbra;
  DecomposeParams decompose;

  /// Throws ConfigError on any out-of-range value or unknown stage.
  void validate() const;
  bool runs(const std::string& stage) const;
};

/// Parses a TOML document. Relative paths resolve against `base_dir`.
/// Unknown sections or keys are errors.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& file);

/// Full config as JSON (paths absolute); config_from_json inverts it.
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const nlohmann::json& doc);

/// JSON of one section ("crf", "pairs", ...), used for cache keys.
nlohmann::json config_section(const PipelineConfig& cfg, const std::string& section);

}  // namespace delight
