#include "endgen/cli/run_config.hpp"

#include <charconv>
#include <fstream>

#include "endgen/errors.hpp"

namespace endgen::cli {

namespace {

using json = nlohmann::json;

struct PathKey {
  const char* key;
  std::string RunConfig::*member;
};

constexpr PathKey kPathKeys[] = {
    {"train_csv", &RunConfig::train_csv},           {"val_csv", &RunConfig::val_csv},
    {"test_csv", &RunConfig::test_csv},             {"vocab", &RunConfig::vocab},
    {"checkpoint_dir", &RunConfig::checkpoint_dir}, {"word_vectors", &RunConfig::word_vectors},
    {"init_checkpoint", &RunConfig::init_checkpoint},
};

void set_key(RunConfig& c, const std::string& key, const json& value) {
  for (const auto& p : kPathKeys) {
    if (key == p.key) {
      if (!value.is_string()) throw ConfigError("config key '" + key + "' must be a string");
      c.*p.member = value.get<std::string>();
      return;
    }
  }
  if (!train::set_field(c.train, key, value)) throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

json to_json(const RunConfig& c) {
  json j = train::to_json(c.train);
  for (const auto& p : kPathKeys) j[p.key] = c.*p.member;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) set_key(c, key, value);
  return c;
}

void apply_override(RunConfig& c, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_key(c, key, value);
}

RunConfig resolve_run_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides, const char* env_seed) {
  RunConfig c;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file " + file->string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file " + file->string() + " is not valid JSON");
    c = run_config_from_json(j);
  }
  for (const auto& o : overrides) apply_override(c, o);
  if (env_seed && *env_seed) {
    const std::string_view s(env_seed);
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("ENDGEN_SEED must be a non-negative integer, got '" + std::string(s) + "'");
    }
    c.train.seed = seed;
  }
  c.train.validate();
  return c;
}

}  // namespace endgen::cli
