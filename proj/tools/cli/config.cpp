#include "cli/config.hpp"

#include <fstream>
#include <sstream>

namespace sleepalign::cli {

namespace {

std::string join(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

std::string type_name(const nlohmann::json& j) {
  if (j.is_number_integer()) return "integer";
  if (j.is_number()) return "number";
  return j.type_name();
}

bool compatible(const nlohmann::json& want, const nlohmann::json& got) {
  if (want.is_number_integer()) return got.is_number_integer();
  if (want.is_number()) return got.is_number();
  return want.type() == got.type();
}

template <typename F>
auto rethrow_as_config(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path, e.what());
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace

nlohmann::json load_config_file(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", "config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("", "config file '" + path + "' must hold a JSON object");
  return j;
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("", "override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  nlohmann::json* node = &config;
  std::stringstream parts(key);
  std::string part, walked;
  std::vector<std::string> keys;
  while (std::getline(parts, part, '.')) {
    if (part.empty()) throw ConfigError(key, "empty path component");
    keys.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    walked = join(walked, keys[i]);
    auto& next = (*node)[keys[i]];
    if (next.is_null()) next = nlohmann::json::object();
    if (!next.is_object()) throw ConfigError(walked, "is not an object");
    node = &next;
  }
  (*node)[keys.back()] = value;
}

void merge_into(nlohmann::json& base, const nlohmann::json& overlay) {
  if (!base.is_object() || !overlay.is_object()) {
    base = overlay;
    return;
  }
  for (const auto& [k, v] : overlay.items()) {
    if (base.contains(k) && base[k].is_object() && v.is_object()) {
      merge_into(base[k], v);
    } else {
      base[k] = v;
    }
  }
}

void validate_shape(const nlohmann::json& defaults, const nlohmann::json& config, const std::string& prefix) {
  if (!config.is_object()) throw ConfigError(prefix, "expected an object");
  for (const auto& [k, v] : config.items()) {
    if (!defaults.contains(k)) throw ConfigError(join(prefix, k), "unknown key");
  }
  for (const auto& [k, want] : defaults.items()) {
    const auto path = join(prefix, k);
    if (!config.contains(k) || config.at(k).is_null()) {
      if (want.is_null()) throw ConfigError(path, "required key is missing");
      continue;
    }
    const auto& got = config.at(k);
    if (want.is_null()) {
      if (!got.is_string()) throw ConfigError(path, "expected a string, got " + type_name(got));
      continue;
    }
    if (!compatible(want, got)) throw ConfigError(path, "expected " + type_name(want) + ", got " + type_name(got));
    if (want.is_object()) validate_shape(want, got, path);
  }
}

nlohmann::json default_train_json() {
  auto j = pipeline::TrainConfig{}.to_json();
  j.erase("seed");  // --seed
  return j;
}
nlohmann::json default_model_json() { return nn::MrcnnConfig::standard().to_json(); }
nlohmann::json default_solver_json() {
  auto j = aligner::SolverConfig{}.to_json();
  j.erase("seed");
  return j;
}
nlohmann::json default_policy_json() { return {{"mode", "top_quantile"}, {"tau", 0.0}, {"q", 0.5}}; }

pipeline::TrainConfig train_config(const nlohmann::json& section, const std::string& path) {
  return rethrow_as_config(path, [&] {
    pipeline::TrainConfig c;
    c.epochs = section.value("epochs", c.epochs);
    c.batch_size = section.value("batch_size", c.batch_size);
    c.learning_rate = section.value("learning_rate", c.learning_rate);
    c.weight_decay = section.value("weight_decay", c.weight_decay);
    c.patience = section.value("patience", c.patience);
    const int tap = section.value("feature_tap", static_cast<int>(c.feature_tap));
    if (tap < 0 || tap >= nn::kNumFeatureTaps) throw ConfigError(join(path, "feature_tap"), "must be in [0, 5]");
    c.feature_tap = static_cast<nn::FeatureTap>(tap);
    c.holdout_fraction = section.value("holdout_fraction", c.holdout_fraction);
    c.finetune_epochs = section.value("finetune_epochs", c.finetune_epochs);
    c.finetune_lr_scale = section.value("finetune_lr_scale", c.finetune_lr_scale);
    c.validate();
    return c;
  });
}

nn::MrcnnConfig model_config(const nlohmann::json& section, const std::string& path) {
  return rethrow_as_config(path, [&] {
    auto c = nn::MrcnnConfig::from_json(section);
    c.validate();
    return c;
  });
}

aligner::SolverConfig solver_config(const nlohmann::json& section, const std::string& path) {
  return rethrow_as_config(path, [&] {
    aligner::SolverConfig c;
    const auto choice = section.value("solver", std::string("auto"));
    if (choice == "auto") c.choice = aligner::SolverChoice::kAuto;
    else if (choice == "exact") c.choice = aligner::SolverChoice::kExact;
    else if (choice == "sinkhorn") c.choice = aligner::SolverChoice::kSinkhorn;
    else throw ConfigError(join(path, "solver"), "expected auto, exact or sinkhorn, got '" + choice + "'");
    c.metric = ot::metric_from_name(section.value("metric", std::string(ot::metric_name(c.metric))));
    c.exact_max_batch = section.value("exact_max_batch", c.exact_max_batch);
    c.exact_max_target = section.value("exact_max_target", c.exact_max_target);
    c.sinkhorn_epsilon_factor = section.value("sinkhorn_epsilon_factor", c.sinkhorn_epsilon_factor);
    c.sinkhorn_max_iter = section.value("sinkhorn_max_iter", c.sinkhorn_max_iter);
    c.sinkhorn_tol = section.value("sinkhorn_tol", c.sinkhorn_tol);
    c.target_subsample = section.value("target_subsample", c.target_subsample);
    if (!(c.sinkhorn_epsilon_factor > 0.0)) throw ConfigError(join(path, "sinkhorn_epsilon_factor"), "must be > 0");
    if (c.target_subsample == 0) throw ConfigError(join(path, "target_subsample"), "must be >= 1");
    return c;
  });
}

aligner::SelectionPolicy policy_config(const nlohmann::json& section, const std::string& path) {
  return rethrow_as_config(path, [&] {
    const auto mode = section.value("mode", std::string("top_quantile"));
    aligner::SelectionPolicy p;
    if (mode == "top_quantile") p = aligner::SelectionPolicy::top_quantile(section.value("q", 0.5));
    else if (mode == "absolute_threshold") p = aligner::SelectionPolicy::absolute(section.value("tau", 0.0));
    else if (mode == "all") p = aligner::SelectionPolicy::top_quantile(1.0);
    else throw ConfigError(join(path, "mode"), "expected top_quantile, absolute_threshold or all, got '" + mode + "'");
    p.validate();
    return p;
  });
}

}  // namespace sleepalign::cli
