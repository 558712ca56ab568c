#include "semihoc/config.hpp"

#include <nlohmann/json.hpp>

#include "semihoc/error.hpp"

namespace semihoc {

namespace {

using nlohmann::json;

constexpr std::pair<Method, std::string_view> kMethodNames[] = {
    {Method::kSemiHoc, "semihoc"},       {Method::kSemiHocNoGate, "semihoc-no-gate"},
    {Method::kSupervised, "supervised"}, {Method::kSslNode, "ssl-node"},
    {Method::kSslPerDepth, "ssl-per-depth"}, {Method::kSplOracle, "spl-oracle"},
};

std::string joined_keys() {
  std::string s;
  for (const auto& k : TrainConfig::keys()) s += (s.empty() ? "" : ", ") + k;
  return s;
}

void assign(TrainConfig& c, const std::string& key, const json& v) {
  try {
    if (key == "method") c.method = parse_method(v.get<std::string>());
    else if (key == "epochs") c.epochs = v.get<int>();
    else if (key == "labeled_batch_size") c.labeled_batch_size = v.get<int>();
    else if (key == "unlabeled_batch_ratio") c.unlabeled_batch_ratio = v.get<int>();
    else if (key == "learning_rate") c.learning_rate = v.get<double>();
    else if (key == "dropout") c.dropout = v.get<double>();
    else if (key == "weight_decay") c.weight_decay = v.get<double>();
    else if (key == "sgd_momentum") c.sgd_momentum = v.get<double>();
    else if (key == "ema_momentum") c.ema_momentum = v.get<double>();
    else if (key == "tau") c.tau = v.get<double>();
    else if (key == "gate_bin_width") c.gate_bin_width = v.get<int>();
    else if (key == "gate_drop_threshold") c.gate_drop_threshold = v.get<double>();
    else if (key == "age_gating") c.age_gating = v.get<bool>();
    else if (key == "hidden_width") c.hidden_width = v.get<int>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "eval_every") c.eval_every = v.get<int>();
    else if (key == "checkpoint_every") c.checkpoint_every = v.get<int>();
    else throw InputError("unknown config key '" + key + "'; valid keys: " + joined_keys());
  } catch (const json::exception& e) {
    throw InputError("config key '" + key + "': " + e.what());
  }
}

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& [method, name] : kMethodNames)
    if (method == m) return name;
  return "unknown";
}

Method parse_method(std::string_view name) {
  std::string valid;
  for (const auto& [method, n] : kMethodNames) {
    if (n == name) return method;
    valid += (valid.empty() ? "" : ", ") + std::string(n);
  }
  throw InputError("unknown method '" + std::string(name) + "'; valid methods: " + valid);
}

std::string TrainConfig::method_label() const {
  if (method == Method::kSemiHoc && !age_gating) return "semihoc-no-gate";
  return std::string(to_string(method));
}

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = {
      "method",       "epochs",        "labeled_batch_size", "unlabeled_batch_ratio", "learning_rate",
      "dropout",      "weight_decay",  "sgd_momentum",       "ema_momentum",          "tau",
      "gate_bin_width", "gate_drop_threshold", "age_gating", "hidden_width",          "seed",
      "eval_every",   "checkpoint_every"};
  return k;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw InputError(msg);
  };
  require(epochs >= 1, "epochs must be >= 1");
  require(labeled_batch_size >= 1, "labeled_batch_size must be >= 1");
  require(unlabeled_batch_ratio >= 1, "unlabeled_batch_ratio must be >= 1");
  require(learning_rate > 0, "learning_rate must be > 0");
  require(dropout >= 0 && dropout < 1, "dropout must lie in [0, 1)");
  require(weight_decay >= 0, "weight_decay must be >= 0");
  require(sgd_momentum >= 0 && sgd_momentum < 1, "sgd_momentum must lie in [0, 1)");
  require(ema_momentum >= 0 && ema_momentum <= 1, "ema_momentum must lie in [0, 1]");
  require(tau > 0 && tau <= 1, "tau must lie in (0, 1]");
  require(gate_bin_width >= 1, "gate_bin_width must be >= 1");
  require(gate_drop_threshold > 0 && gate_drop_threshold < 1, "gate_drop_threshold must lie in (0, 1)");
  require(hidden_width >= 1, "hidden_width must be >= 1");
  require(eval_every >= 0, "eval_every must be >= 0");
  require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
}

std::string TrainConfig::to_json() const {
  json j = json::object();
  j["method"] = std::string(to_string(method));
  j["epochs"] = epochs;
  j["labeled_batch_size"] = labeled_batch_size;
  j["unlabeled_batch_ratio"] = unlabeled_batch_ratio;
  j["learning_rate"] = learning_rate;
  j["dropout"] = dropout;
  j["weight_decay"] = weight_decay;
  j["sgd_momentum"] = sgd_momentum;
  j["ema_momentum"] = ema_momentum;
  j["tau"] = tau;
  j["gate_bin_width"] = gate_bin_width;
  j["gate_drop_threshold"] = gate_drop_threshold;
  j["age_gating"] = age_gating;
  j["hidden_width"] = hidden_width;
  j["seed"] = seed;
  j["eval_every"] = eval_every;
  j["checkpoint_every"] = checkpoint_every;
  return j.dump(2) + "\n";
}

TrainConfig TrainConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) assign(c, key, value);
  c.validate();
  return c;
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  json v = json::parse(value, nullptr, false);
  if (v.is_discarded()) v = std::string(value);
  assign(*this, std::string(key), v);
}

}  // namespace semihoc
