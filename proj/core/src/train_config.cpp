#include "endgen/train_config.hpp"

#include <functional>
#include <map>
#include <nlohmann/json.hpp>

#include "endgen/errors.hpp"
#include "endgen/metrics.hpp"

namespace endgen::train {

namespace {

using json = nlohmann::json;

struct Field {
  std::function<json(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const json&)> set;
};

template <typename T>
T convert(std::string_view key, const json& v) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("");
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) throw ConfigError("");
    } else {
      if (!v.is_number()) throw ConfigError("");
    }
    return v.get<T>();
  } catch (const ConfigError&) {
    throw ConfigError("config key '" + std::string(key) + "' has the wrong type or sign: " + v.dump());
  }
}

template <typename T>
Field field(T TrainConfig::*member, std::string_view key) {
  return {[member](const TrainConfig& c) { return json(c.*member); },
          [member, key](TrainConfig& c, const json& v) { c.*member = convert<T>(key, v); }};
}

struct Table {
  std::vector<std::string> order;
  std::map<std::string, Field, std::less<>> fields;

  template <typename T>
  void add(std::string_view key, T TrainConfig::*member) {
    order.emplace_back(key);
    fields.emplace(std::string(key), field(member, key));
  }
};

const Table& table() {
  static const Table t = [] {
    Table t;
    t.add("hidden_dim", &TrainConfig::hidden_dim);
    t.add("embed_dim", &TrainConfig::embed_dim);
    t.add("batch_size", &TrainConfig::batch_size);
    t.add("dropout", &TrainConfig::dropout);
    t.add("beam", &TrainConfig::beam);
    t.add("pretrain_lr", &TrainConfig::pretrain_lr);
    t.add("rl_lr", &TrainConfig::rl_lr);
    t.add("beta", &TrainConfig::beta);
    t.add("mu", &TrainConfig::mu);
    t.add("vocab_cap", &TrainConfig::vocab_cap);
    t.add("coverage_start_epoch", &TrainConfig::coverage_start_epoch);
    t.add("eval_every", &TrainConfig::eval_every);
    t.add("patience", &TrainConfig::patience);
    t.add("seed", &TrainConfig::seed);
    t.add("grad_clip", &TrainConfig::grad_clip);
    t.add("max_epochs", &TrainConfig::max_epochs);
    t.add("rl_epochs", &TrainConfig::rl_epochs);
    t.add("max_plot_len", &TrainConfig::max_plot_len);
    t.add("max_end_len", &TrainConfig::max_end_len);
    t.add("coverage", &TrainConfig::coverage);
    t.add("semantic", &TrainConfig::semantic);
    t.add("reward", &TrainConfig::reward);
    t.add("suppress_unk", &TrainConfig::suppress_unk);
    t.add("length_normalize", &TrainConfig::length_normalize);
    return t;
  }();
  return t;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void TrainConfig::validate() const {
  require(hidden_dim > 0 && embed_dim > 0, "hidden_dim and embed_dim must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(beam > 0, "beam must be positive");
  require(dropout >= 0 && dropout < 1, "dropout must lie in [0, 1)");
  require(pretrain_lr > 0 && rl_lr > 0, "learning rates must be positive");
  require(beta >= 0, "beta must be >= 0");
  require(mu >= 0 && mu <= 1, "mu must lie in [0, 1]");
  require(vocab_cap > corpus::kNumSpecials, "vocab_cap must exceed the 4 special tokens");
  require(eval_every > 0, "eval_every must be positive");
  require(patience > 0, "patience must be positive");
  require(grad_clip > 0, "grad_clip must be positive");
  require(max_epochs > 0 && rl_epochs > 0, "epoch counts must be positive");
  require(max_plot_len > 0 && max_end_len > 0, "length limits must be positive");
  require(metrics::RewardRegistry::instance().contains(reward), "unknown reward '" + reward + "'");
}

model::ModelConfig TrainConfig::model_config(std::size_t vocab_size) const {
  return {vocab_size, embed_dim, hidden_dim, dropout};
}

decode::DecodeOptions TrainConfig::decode_options() const {
  decode::DecodeOptions o;
  o.max_len = max_end_len;
  o.suppress_unk = suppress_unk;
  o.length_normalize = length_normalize;
  return o;
}

loss::LossConfig TrainConfig::loss_config() const {
  return {static_cast<Real>(beta), static_cast<Real>(mu), coverage, semantic};
}

json to_json(const TrainConfig& config) {
  json j = json::object();
  const Table& t = table();
  for (const auto& key : t.order) j[key] = t.fields.at(key).get(config);
  return j;
}

bool set_field(TrainConfig& config, std::string_view key, const json& value) {
  const Table& t = table();
  auto it = t.fields.find(key);
  if (it == t.fields.end()) return false;
  it->second.set(config, value);
  return true;
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    if (!set_field(c, key, value)) throw ConfigError("unknown config key '" + key + "'");
  }
  return c;
}

const std::vector<std::string>& field_names() { return table().order; }

}  // namespace endgen::train
