#include "delight/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "delight/error.hpp"

namespace delight {

namespace {

using Setter = std::function<void(const toml::node&, const std::string&)>;

double as_double(const toml::node& n, const std::string& key) {
  if (auto v = n.value<double>(); v && (n.is_floating_point() || n.is_integer())) return *v;
  throw ConfigError(key + ": expected a number");
}

int as_int(const toml::node& n, const std::string& key) {
  if (!n.is_integer()) throw ConfigError(key + ": expected an integer");
  const auto v = *n.value<std::int64_t>();
  if (v < INT32_MIN || v > INT32_MAX) throw ConfigError(key + ": out of range");
  return static_cast<int>(v);
}

std::string as_string(const toml::node& n, const std::string& key) {
  if (!n.is_string()) throw ConfigError(key + ": expected a string");
  return *n.value<std::string>();
}

Setter number(double& field) {
  return [&field](const toml::node& n, const std::string& key) { field = as_double(n, key); };
}
Setter integer(int& field) {
  return [&field](const toml::node& n, const std::string& key) { field = as_int(n, key); };
}

std::map<std::string, std::map<std::string, Setter>> schema(PipelineConfig& c,
                                                            const std::filesystem::path& base) {
  const auto path = [&base](std::filesystem::path& field) -> Setter {
    return [&field, &base](const toml::node& n, const std::string& key) {
      std::filesystem::path p = as_string(n, key);
      field = p.is_absolute() || base.empty() ? p : base / p;
    };
  };
  return {
      {"project",
       {{"dir", path(c.project_dir)},
        {"output", path(c.output_dir)},
        {"workers", integer(c.workers)},
        {"stages",
         [&c](const toml::node& n, const std::string& key) {
           const auto* arr = n.as_array();
           if (!arr) throw ConfigError(key + ": expected an array of strings");
           c.stages.clear();
           for (const auto& item : *arr) c.stages.push_back(as_string(item, key));
         }}}},
      {"crf",
       {{"sigma_xy", number(c.crf.sigma_xy)},
        {"sigma_rgb", number(c.crf.sigma_rgb)},
        {"w_appearance", number(c.crf.w_appearance)},
        {"sigma_s", number(c.crf.sigma_s)},
        {"w_smooth", number(c.crf.w_smooth)},
        {"iterations", integer(c.crf.iterations)},
        {"unary_confidence", number(c.crf.unary_confidence)},
        {"backend",
         [&c](const toml::node& n, const std::string& key) { c.crf.backend = as_string(n, key); }},
        {"explicit_max_pixels", integer(c.crf.explicit_max_pixels)}}},
      {"pairs",
       {{"offset", integer(c.pairs.offset)},
        {"stride", integer(c.pairs.stride)},
        {"max_normal_deg", number(c.pairs.max_normal_deg)},
        {"depth_tau", number(c.pairs.depth_tau)},
        {"k_ratio_lo", number(c.pairs.k_ratio_lo)},
        {"k_ratio_hi", number(c.pairs.k_ratio_hi)},
        {"exposure_lo", number(c.pairs.exposure_lo)},
        {"exposure_hi", number(c.pairs.exposure_hi)},
        {"white_percentile", number(c.pairs.white_percentile)}}},
      {"ratio",
       {{"min_major_weight", number(c.ratio.min_major_weight)},
        {"max_variance_ratio", number(c.ratio.max_variance_ratio)}}},
      {"penumbra",
       {{"half_length", integer(c.penumbra.half_length)},
        {"stride", integer(c.penumbra.stride)},
        {"lambda", number(c.penumbra.lambda)},
        {"transition_halfwidth", number(c.penumbra.transition_halfwidth)},
        {"low_weight", number(c.penumbra.low_weight)},
        {"max_normal_deg", number(c.penumbra.max_normal_deg)},
        {"exposure_floor", number(c.penumbra.exposure_floor)}}},
      {"decompose",
       {{"shading_floor", number(c.decompose.shading_floor)},
        {"saturation", number(c.decompose.saturation)}}},
  };
}

}  // namespace

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages{"sunpos",  "gbuffer",   "refine", "estimate",
                                               "soften", "decompose", "eval"};
  return stages;
}

void PipelineConfig::validate() const {
  if (project_dir.empty()) throw ConfigError("project.dir is required");
  if (output_dir.empty()) throw ConfigError("project.output is required");
  if (workers < 0 || workers > 1024) throw ConfigError("project.workers must be in [0, 1024]");
  const auto& all = pipeline_stages();
  std::size_t last = 0;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto it = std::find(all.begin(), all.end(), stages[i]);
    if (it == all.end()) throw ConfigError("unknown stage '" + stages[i] + "'");
    const auto pos = static_cast<std::size_t>(it - all.begin());
    if (i > 0 && pos <= last) throw ConfigError("project.stages must follow pipeline order");
    last = pos;
  }
  crf.validate();
  pairs.validate();
  ratio.validate();
  penumbra.validate();
  decompose.validate();
}

bool PipelineConfig::runs(const std::string& stage) const {
  return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config parse error: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(msg.str());
  }
  PipelineConfig cfg;
  const auto fields = schema(cfg, base_dir);
  for (const auto& [section_key, section_node] : doc) {
    const std::string section(section_key.str());
    const auto sec = fields.find(section);
    if (sec == fields.end()) throw ConfigError("unknown config section [" + section + "]");
    const auto* table = section_node.as_table();
    if (!table) throw ConfigError("[" + section + "] must be a table");
    for (const auto& [key, node] : *table) {
      const std::string name = section + "." + std::string(key.str());
      const auto field = sec->second.find(std::string(key.str()));
      if (field == sec->second.end()) throw ConfigError("unknown config key '" + name + "'");
      field->second(node, name);
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::absolute(file).parent_path());
}

nlohmann::json config_section(const PipelineConfig& c, const std::string& section) {
  using nlohmann::json;
  if (section == "crf") {
    return {{"sigma_xy", c.crf.sigma_xy},     {"sigma_rgb", c.crf.sigma_rgb},
            {"w_appearance", c.crf.w_appearance}, {"sigma_s", c.crf.sigma_s},
            {"w_smooth", c.crf.w_smooth},     {"iterations", c.crf.iterations},
            {"unary_confidence", c.crf.unary_confidence}, {"backend", c.crf.backend},
            {"explicit_max_pixels", c.crf.explicit_max_pixels}};
  }
  if (section == "pairs") {
    return {{"offset", c.pairs.offset},
            {"stride", c.pairs.stride},
            {"max_normal_deg", c.pairs.max_normal_deg},
            {"depth_tau", c.pairs.depth_tau},
            {"k_ratio_lo", c.pairs.k_ratio_lo},
            {"k_ratio_hi", c.pairs.k_ratio_hi},
            {"exposure_lo", c.pairs.exposure_lo},
            {"exposure_hi", c.pairs.exposure_hi},
            {"white_percentile", c.pairs.white_percentile}};
  }
  if (section == "ratio") {
    return {{"min_major_weight", c.ratio.min_major_weight},
            {"max_variance_ratio", c.ratio.max_variance_ratio}};
  }
  if (section == "penumbra") {
    return {{"half_length", c.penumbra.half_length},
            {"stride", c.penumbra.stride},
            {"lambda", c.penumbra.lambda},
            {"transition_halfwidth", c.penumbra.transition_halfwidth},
            {"low_weight", c.penumbra.low_weight},
            {"max_normal_deg", c.penumbra.max_normal_deg},
            {"exposure_floor", c.penumbra.exposure_floor}};
  }
  if (section == "decompose") {
    return {{"shading_floor", c.decompose.shading_floor}, {"saturation", c.decompose.saturation}};
  }
  throw InvalidArgument("unknown config section " + section);
}

nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json doc;
  doc["project"] = {{"dir", std::filesystem::absolute(c.project_dir).lexically_normal().string()},
                    {"output", std::filesystem::absolute(c.output_dir).lexically_normal().string()},
                    {"workers", c.workers},
                    {"stages", c.stages}};
  for (const char* s : {"crf", "pairs", "ratio", "penumbra", "decompose"}) {
    doc[s] = config_section(c, s);
  }
  return doc;
}

PipelineConfig config_from_json(const nlohmann::json& doc) {
  std::ostringstream toml_text;
  for (const auto& [section, table] : doc.items()) {
    if (!table.is_object()) throw ConfigError("config section " + section + " must be an object");
    toml_text << '[' << section << "]\n";
    for (const auto& [key, value] : table.items()) {
      if (value.is_null() || value.is_object()) {
        throw ConfigError("config key " + section + "." + key + " has an unsupported type");
      }
      // JSON scalars, strings and string arrays are valid TOML values.
      toml_text << key << " = " << value.dump() << '\n';
    }
  }
  return parse_config(toml_text.str());
}

}  // namespace delight
