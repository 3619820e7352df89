// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "augloop/error.hpp"
#include "augloop/orchestrator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace augloop {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::method1: return "method1";
    case Method::method2: return "method2";
    case Method::baseline: return "baseline";
  }
  return "method1";
}

namespace {

[[noreturn]] void bad(const std::string& msg) { throw ValidationError("BAD_CONFIG", msg); }

// Reads one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j.is_object()) bad(fmt::format("config field '{}' must be an object", prefix_.empty() ? "<root>" : prefix_));
  }

  std::string name(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& raw(const std::string& key) {
    if (!has(key)) bad(fmt::format("missing config field '{}'", name(key)));
    return j_.at(key);
  }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) bad(fmt::format("config field '{}' must be an integer", name(key)));
    return v.get<int>();
  }
  double real(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) bad(fmt::format("config field '{}' must be a number", name(key)));
    return v.get<double>();
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) bad(fmt::format("config field '{}' must be true or false", name(key)));
    return v.get<bool>();
  }
  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) bad(fmt::format("config field '{}' must be a string", name(key)));
    return v.get<std::string>();
  }
  std::string required_text(const std::string& key) {
    raw(key);
    return text(key, "");
  }
  std::vector<std::string> texts(const std::string& key) {
    std::vector<std::string> out;
    if (!has(key)) return out;
    const auto& v = j_.at(key);
    if (!v.is_array()) bad(fmt::format("config field '{}' must be a list of strings", name(key)));
    for (const auto& s : v) {
      if (!s.is_string()) bad(fmt::format("config field '{}' must be a list of strings", name(key)));
      out.push_back(s.get<std::string>());
    }
    return out;
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) bad(fmt::format("unknown config field '{}'", name(it.key())));
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string default_dataset_description(const RunConfig& cfg) {
  if (!cfg.synthetic) return {};
  const auto& s = *cfg.synthetic;
  return fmt::format(
      "Synthetic grayscale images, {}x{} pixels, 3 classes (cross, disk, square), {} training and {} validation "
      "images per class; shapes vary in position and size and carry pixel noise.",
      s.image_size, s.image_size, s.train_per_class, s.valid_per_class);
}

std::string default_model_description(const RunConfig& cfg) {
  if (cfg.trainer_kind != "reference") return "model trained by the external adapter";
  return fmt::format("Fully connected network on {}x{} grayscale input with one hidden layer of {} ReLU units, "
                     "trained with plain SGD.",
                     cfg.reference.input_size, cfg.reference.input_size, cfg.reference.hidden_units);
}

}  // namespace

RunConfig RunConfig::from_json(const json& doc, const fs::path& base_dir) {
  RunConfig cfg;
  Fields root(doc, "");
  const auto method = root.required_text("method");
  if (method == "method1") {
    cfg.method = Method::method1;
  } else if (method == "method2") {
    cfg.method = Method::method2;
  } else if (method == "baseline") {
    cfg.method = Method::baseline;
  } else {
    bad(fmt::format("config field 'method' must be method1, method2 or baseline (got '{}')", method));
  }

  if (root.has("seed")) {
    const auto& s = doc.at("seed");
    if (s.is_number_unsigned() || (s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      cfg.seed = s.get<std::uint64_t>();
    } else if (s.is_string()) {
      char* end = nullptr;
      const auto text = s.get<std::string>();
      cfg.seed = std::strtoull(text.c_str(), &end, 10);
      if (text.empty() || *end != '\0') bad("config field 'seed' must be a non-negative integer");
    } else {
      bad("config field 'seed' must be a non-negative integer");
    }
  }
  cfg.n_augmentations = root.integer("n_augmentations", cfg.n_augmentations);

  {
    Fields ds(root.raw("dataset"), "dataset");
    const bool synth = ds.has("synthetic");
    const bool dir = ds.has("directory");
    if (synth == dir) bad("config field 'dataset' needs exactly one of 'synthetic' or 'directory'");
    if (synth) {
      Fields sp(doc["dataset"]["synthetic"], "dataset.synthetic");
      SyntheticSpec spec;
      spec.image_size = sp.integer("image_size", spec.image_size);
      spec.train_per_class = sp.integer("train_per_class", spec.train_per_class);
      spec.valid_per_class = sp.integer("valid_per_class", spec.valid_per_class);
      spec.center_jitter = sp.real("center_jitter", spec.center_jitter);
      spec.size_jitter = sp.real("size_jitter", spec.size_jitter);
      spec.noise_sigma = sp.real("noise_sigma", spec.noise_sigma);
      sp.finish();
      cfg.synthetic = spec;
    } else {
      cfg.dataset_dir = resolve(base_dir, ds.text("directory", ""));
    }
    ds.finish();
  }

  if (root.has("trainer")) {
    Fields tr(doc["trainer"], "trainer");
    cfg.trainer_kind = tr.text("kind", cfg.trainer_kind);
    if (cfg.trainer_kind == "reference") {
      auto& r = cfg.reference;
      r.input_size = tr.integer("input_size", r.input_size);
      r.hidden_units = tr.integer("hidden_units", r.hidden_units);
      r.learning_rate = tr.real("learning_rate", r.learning_rate);
      r.batch_size = tr.integer("batch_size", r.batch_size);
      r.augment_threads = tr.integer("augment_threads", r.augment_threads);
    } else if (cfg.trainer_kind == "bridge") {
      cfg.bridge.command = tr.texts("command");
      if (!cfg.bridge.command.empty()) cfg.bridge.command[0] = resolve(base_dir, cfg.bridge.command[0]).string();
      if (!doc["trainer"].contains("command")) bad("missing config field 'trainer.command'");
      cfg.bridge.timeout_s = tr.real("timeout_s", cfg.bridge.timeout_s);
    } else {
      bad(fmt::format("config field 'trainer.kind' must be reference or bridge (got '{}')", cfg.trainer_kind));
    }
    cfg.stopping.max_epochs = tr.integer("max_epochs", cfg.stopping.max_epochs);
    cfg.stopping.patience = tr.integer("patience", cfg.stopping.patience);
    tr.finish();
  }
  cfg.reference.max_epochs = cfg.stopping.max_epochs;
  cfg.reference.patience = cfg.stopping.patience;

  const auto provider = root.text("provider", cfg.provider);
  if (provider.rfind("mock-scripted:", 0) == 0) {
    cfg.provider = "mock-scripted";
    cfg.script_path = resolve(base_dir, provider.substr(14));
  } else if (provider == "mock-oracle" || provider == "http") {
    cfg.provider = provider;
  } else {
    bad(fmt::format("config field 'provider' must be mock-oracle, mock-scripted:<path> or http (got '{}')", provider));
  }
  if (root.has("provider_config")) {
    Fields pc(doc["provider_config"], "provider_config");
    auto& p = cfg.provider_config;
    p.endpoint_url = pc.text("endpoint_url", p.endpoint_url);
    p.model_identifier = pc.text("model_identifier", p.model_identifier);
    p.temperature = pc.real("temperature", p.temperature);
    p.timeout_s = pc.real("timeout_s", p.timeout_s);
    p.max_repairs = pc.integer("max_repairs", p.max_repairs);
    p.api_key_env = pc.text("api_key_env", p.api_key_env);
    p.price_input_per_mtok = pc.real("price_input_per_mtok", p.price_input_per_mtok);
    p.price_output_per_mtok = pc.real("price_output_per_mtok", p.price_output_per_mtok);
    pc.finish();
  }
  if (root.has("oracle")) {
    Fields oc(doc["oracle"], "oracle");
    cfg.oracle.harden_factor = oc.real("harden_factor", cfg.oracle.harden_factor);
    cfg.oracle.soften_factor = oc.real("soften_factor", cfg.oracle.soften_factor);
    cfg.oracle.swap_on_decline = oc.boolean("swap_on_decline", cfg.oracle.swap_on_decline);
    oc.finish();
  }

  if (root.has("context")) {
    Fields cx(doc["context"], "context");
    cfg.context.dataset_description = cx.text("dataset_description", "");
    cfg.context.model_description = cx.text("model_description", "");
    cfg.context.performance_goal = cx.text("performance_goal", "");
    cfg.context.constraints = cx.texts("constraints");
    cx.finish();
  }
  if (cfg.context.dataset_description.empty()) cfg.context.dataset_description = default_dataset_description(cfg);
  if (cfg.context.model_description.empty()) cfg.context.model_description = default_model_description(cfg);
  if (cfg.context.performance_goal.empty()) cfg.context.performance_goal = "Maximize validation accuracy.";
  cfg.context.n_augmentations = cfg.n_augmentations;

  if (root.has("method1")) {
    Fields m1(doc["method1"], "method1");
    cfg.t_iterations = m1.integer("T_iterations", cfg.t_iterations);
    cfg.reinitialize_per_iteration = m1.boolean("reinitialize_per_iteration", cfg.reinitialize_per_iteration);
    m1.finish();
  }
  cfg.epochs = cfg.stopping.max_epochs;
  if (root.has("method2")) {
    Fields m2(doc["method2"], "method2");
    cfg.epochs = m2.integer("E", cfg.epochs);
    cfg.t_interval = m2.integer("T_interval", cfg.t_interval);
    m2.finish();
  }
  if (root.has("baseline")) {
    Fields bl(doc["baseline"], "baseline");
    auto& b = cfg.baseline;
    b.strategy = baseline_strategy_from_string(bl.required_text("strategy"));
    b.n = bl.integer("n", b.n);
    b.magnitude = bl.integer("magnitude", b.magnitude);
    b.chains = bl.integer("chains", b.chains);
    b.max_depth = bl.integer("max_depth", b.max_depth);
    b.alpha = bl.real("alpha", b.alpha);
    bl.finish();
  } else if (cfg.method == Method::baseline) {
    bad("missing config field 'baseline'");
  }
  if (root.has("output_dir")) cfg.output_dir = resolve(base_dir, root.text("output_dir", ""));
  root.finish();
  return cfg;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open config file " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) bad(path.string() + " is not valid JSON");
  return from_json(doc, path.parent_path());
}

json RunConfig::to_json() const {
  json j;
  j["method"] = std::string(to_string(method));
  j["seed"] = seed;
  j["n_augmentations"] = n_augmentations;
  if (synthetic) {
    const auto& s = *synthetic;
    j["dataset"]["synthetic"] = {{"image_size", s.image_size},         {"train_per_class", s.train_per_class},
                                 {"valid_per_class", s.valid_per_class}, {"center_jitter", s.center_jitter},
                                 {"size_jitter", s.size_jitter},       {"noise_sigma", s.noise_sigma}};
  } else {
    j["dataset"]["directory"] = dataset_dir.string();
  }
  json tr{{"kind", trainer_kind}, {"max_epochs", stopping.max_epochs}, {"patience", stopping.patience}};
  if (trainer_kind == "reference") {
    tr["input_size"] = reference.input_size;
    tr["hidden_units"] = reference.hidden_units;
    tr["learning_rate"] = reference.learning_rate;
    tr["batch_size"] = reference.batch_size;
    tr["augment_threads"] = reference.augment_threads;
  } else {
    tr["command"] = bridge.command;
    tr["timeout_s"] = bridge.timeout_s;
  }
  j["trainer"] = tr;
  j["provider"] = provider == "mock-scripted" ? "mock-scripted:" + script_path.string() : provider;
  const auto& p = provider_config;
  j["provider_config"] = {{"endpoint_url", p.endpoint_url},
                          {"model_identifier", p.model_identifier},
                          {"temperature", p.temperature},
                          {"timeout_s", p.timeout_s},
                          {"max_repairs", p.max_repairs},
                          {"api_key_env", p.api_key_env},
                          {"price_input_per_mtok", p.price_input_per_mtok},
                          {"price_output_per_mtok", p.price_output_per_mtok}};
  j["oracle"] = {{"harden_factor", oracle.harden_factor},
                 {"soften_factor", oracle.soften_factor},
                 {"swap_on_decline", oracle.swap_on_decline}};
  j["context"] = {{"dataset_description", context.dataset_description},
                  {"model_description", context.model_description},
                  {"performance_goal", context.performance_goal},
                  {"constraints", context.constraints}};
  j["method1"] = {{"T_iterations", t_iterations}, {"reinitialize_per_iteration", reinitialize_per_iteration}};
  j["method2"] = {{"E", epochs}, {"T_interval", t_interval}};
  j["baseline"] = {{"strategy", std::string(to_string(baseline.strategy))},
                   {"n", baseline.n},
                   {"magnitude", baseline.magnitude},
                   {"chains", baseline.chains},
                   {"max_depth", baseline.max_depth},
                   {"alpha", baseline.alpha}};
  return j;
}

void RunConfig::validate(bool check_provider) const {
  if (n_augmentations < 1) bad("config field 'n_augmentations' must be >= 1");
  if (synthetic) synthetic->validate();
  if (!synthetic && !fs::is_directory(dataset_dir)) {
    bad(fmt::format("config field 'dataset.directory': {} is not a directory", dataset_dir.string()));
  }
  if (stopping.max_epochs < 1 || stopping.patience < 1) bad("trainer max_epochs and patience must be >= 1");
  if (trainer_kind == "reference") reference.validate();
  if (trainer_kind == "bridge") bridge.validate();
  context.validate();
  provider_config.validate();
  baseline.validate();
  if (method == Method::method1 && t_iterations < 1) bad("config field 'method1.T_iterations' must be >= 1");
  if (method == Method::method2 && epochs < 1) bad("config field 'method2.E' must be >= 1");
  if (method == Method::method2 && (t_interval < 1 || t_interval > epochs)) {
    bad("config field 'method2.T_interval' must be in [1, E]");
  }
  if (method == Method::baseline || !check_provider) return;
  if (provider == "mock-scripted" && !fs::is_regular_file(script_path)) {
    bad(fmt::format("config field 'provider': scripted replies {} do not exist", script_path.string()));
  }
  if (provider == "http") {
    if (provider_config.endpoint_url.empty()) bad("missing config field 'provider_config.endpoint_url'");
    if (!provider_config.api_key_env.empty()) {
      const char* key = std::getenv(provider_config.api_key_env.c_str());
      if (key == nullptr || *key == '\0') {
        throw ValidationError("MISSING_API_KEY",
                              fmt::format("environment variable {} is not set", provider_config.api_key_env));
      }
    }
  }
}

RunSeeds RunSeeds::derive(std::uint64_t run_seed) {
  return {run_seed, derive_seed(run_seed, "trainer"), derive_seed(run_seed, "dataset"),
          derive_seed(run_seed, "augment")};
}

}  // namespace augloop
