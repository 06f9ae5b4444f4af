#include "tcl/config.hpp"

#include <charconv>
#include <fstream>

#include <json.hpp>

#include "tcl/rng.hpp"

namespace tcl {

using nlohmann::json;

namespace {

json to_json(const Config& c) {
  return json{
      {"version", 1},
      {"seed", c.seed},
      {"variant", c.variant},
      {"data",
       {{"classes", c.data.classes},
        {"frames", c.data.frames},
        {"height", c.data.height},
        {"width", c.data.width},
        {"speeds", c.data.speeds},
        {"noise_sigma", c.data.noise_sigma},
        {"blob_sigma", c.data.blob_sigma},
        {"trail_decay", c.data.trail_decay},
        {"trail_length", c.data.trail_length},
        {"brightness", c.data.brightness},
        {"train_videos", c.data.train_videos},
        {"test_per_class", c.data.test_per_class},
        {"shifted_videos", c.data.shifted_videos},
        {"data_seed", c.data.data_seed}}},
      {"split",
       {{"label_fraction", c.split.label_fraction},
        {"stratified", c.split.stratified}}},
      {"clips",
       {{"fast_frames", c.clips.fast_frames},
        {"slow_frames", c.clips.slow_frames}}},
      {"batch", {{"labeled", c.batch.labeled}, {"mu", c.batch.mu}}},
      {"loss",
       {{"tau", c.loss.tau},
        {"gamma", c.loss.gamma},
        {"beta", c.loss.beta},
        {"epsilon", c.loss.epsilon}}},
      {"encoder", {{"type", c.encoder.type}, {"hidden", c.encoder.hidden}}},
      {"schedule",
       {{"pretrain", c.schedule.pretrain},
        {"warmup", c.schedule.warmup},
        {"combined", c.schedule.combined},
        {"finetune", c.schedule.finetune}}},
      {"optimizer",
       {{"lr", c.optimizer.lr},
        {"finetune_lr", c.optimizer.finetune_lr},
        {"momentum", c.optimizer.momentum}}},
      {"finetune",
       {{"confidence_threshold", c.finetune.confidence_threshold}}},
      {"domain_mix",
       {{"enabled", c.domain_mix.enabled},
        {"rho", c.domain_mix.rho},
        {"unlabeled_total", c.domain_mix.unlabeled_total}}}};
}

Config from_json(const json& j);

// Every key present in the input must exist in the resolved schema; a typo'd
// key is reported rather than silently ignored.
void check_known_keys(const json& input, const json& schema,
                      const std::string& prefix) {
  for (const auto& [key, value] : input.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw ConfigError(path, "unknown key");
    if (value.is_object()) {
      if (!schema.at(key).is_object())
        throw ConfigError(path, "expected a scalar or array, got an object");
      check_known_keys(value, schema.at(key), path);
    }
  }
}

template <typename T>
void pull(const json& j, const std::string& section, const std::string& key,
          T& out) {
  if (!j.contains(section)) return;
  const json& s = j.at(section);
  if (!s.contains(key)) return;
  const std::string path = section + "." + key;
  try {
    s.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

template <typename T>
void pull_top(const json& j, const std::string& key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

Config from_json(const json& j) {
  Config c;  // defaults
  check_known_keys(j, to_json(c), "");
  pull_top(j, "seed", c.seed);
  pull_top(j, "variant", c.variant);
  pull(j, "data", "classes", c.data.classes);
  pull(j, "data", "frames", c.data.frames);
  pull(j, "data", "height", c.data.height);
  pull(j, "data", "width", c.data.width);
  pull(j, "data", "speeds", c.data.speeds);
  pull(j, "data", "noise_sigma", c.data.noise_sigma);
  pull(j, "data", "blob_sigma", c.data.blob_sigma);
  pull(j, "data", "trail_decay", c.data.trail_decay);
  pull(j, "data", "trail_length", c.data.trail_length);
  pull(j, "data", "brightness", c.data.brightness);
  pull(j, "data", "train_videos", c.data.train_videos);
  pull(j, "data", "test_per_class", c.data.test_per_class);
  pull(j, "data", "shifted_videos", c.data.shifted_videos);
  pull(j, "data", "data_seed", c.data.data_seed);
  pull(j, "split", "label_fraction", c.split.label_fraction);
  pull(j, "split", "stratified", c.split.stratified);
  pull(j, "clips", "fast_frames", c.clips.fast_frames);
  pull(j, "clips", "slow_frames", c.clips.slow_frames);
  pull(j, "batch", "labeled", c.batch.labeled);
  pull(j, "batch", "mu", c.batch.mu);
  pull(j, "loss", "tau", c.loss.tau);
  pull(j, "loss", "gamma", c.loss.gamma);
  pull(j, "loss", "beta", c.loss.beta);
  pull(j, "loss", "epsilon", c.loss.epsilon);
  pull(j, "encoder", "type", c.encoder.type);
  pull(j, "encoder", "hidden", c.encoder.hidden);
  pull(j, "schedule", "pretrain", c.schedule.pretrain);
  pull(j, "schedule", "warmup", c.schedule.warmup);
  pull(j, "schedule", "combined", c.schedule.combined);
  pull(j, "schedule", "finetune", c.schedule.finetune);
  pull(j, "optimizer", "lr", c.optimizer.lr);
  pull(j, "optimizer", "finetune_lr", c.optimizer.finetune_lr);
  pull(j, "optimizer", "momentum", c.optimizer.momentum);
  pull(j, "finetune", "confidence_threshold", c.finetune.confidence_threshold);
  pull(j, "domain_mix", "enabled", c.domain_mix.enabled);
  pull(j, "domain_mix", "rho", c.domain_mix.rho);
  pull(j, "domain_mix", "unlabeled_total", c.domain_mix.unlabeled_total);
  c.validate();
  return c;
}

}  // namespace

void Config::validate() const {
  if (data.classes < 2) throw ConfigError("data.classes", "must be >= 2");
  if (data.frames < 8) throw ConfigError("data.frames", "must be >= 8");
  if (data.height < 4 || data.width < 4)
    throw ConfigError("data.height", "frame size must be at least 4x4");
  if (data.speeds.empty()) throw ConfigError("data.speeds", "must be non-empty");
  for (double s : data.speeds)
    if (!(s > 0)) throw ConfigError("data.speeds", "speeds must be positive");
  if (!(data.noise_sigma >= 0)) throw ConfigError("data.noise_sigma", "must be >= 0");
  if (!(data.blob_sigma > 0)) throw ConfigError("data.blob_sigma", "must be > 0");
  if (data.train_videos < data.classes)
    throw ConfigError("data.train_videos", "need at least one video per class");
  if (!(split.label_fraction > 0.0) || split.label_fraction > 100.0)
    throw ConfigError("split.label_fraction", "must be in (0, 100]");
  if (clips.fast_frames < 2)
    throw ConfigError("clips.fast_frames", "must be >= 2");
  if (clips.slow_frames >= clips.fast_frames)
    throw ConfigError("clips.slow_frames", "must be < clips.fast_frames");
  if (clips.fast_frames > data.frames)
    throw ConfigError("clips.fast_frames", "must be <= data.frames");
  if (batch.labeled < 2) throw ConfigError("batch.labeled", "must be >= 2");
  if (!(loss.tau > 0)) throw ConfigError("loss.tau", "must be > 0");
  if (loss.gamma < 0) throw ConfigError("loss.gamma", "must be >= 0");
  if (loss.beta < 0) throw ConfigError("loss.beta", "must be >= 0");
  if (!(loss.epsilon > 0)) throw ConfigError("loss.epsilon", "must be > 0");
  if (encoder.type != "frame_mlp")
    throw ConfigError("encoder.type", "unknown encoder type '" + encoder.type + "'");
  for (std::size_t h : encoder.hidden)
    if (h == 0) throw ConfigError("encoder.hidden", "sizes must be positive");
  if (schedule.warmup == 0 && schedule.combined == 0)
    throw ConfigError("schedule.warmup", "warmup and combined cannot both be 0");
  if (!(optimizer.lr > 0)) throw ConfigError("optimizer.lr", "must be > 0");
  if (!(optimizer.finetune_lr > 0))
    throw ConfigError("optimizer.finetune_lr", "must be > 0");
  if (optimizer.momentum < 0 || optimizer.momentum >= 1)
    throw ConfigError("optimizer.momentum", "must be in [0, 1)");
  if (!(finetune.confidence_threshold > 0) || finetune.confidence_threshold > 1)
    throw ConfigError("finetune.confidence_threshold", "must be in (0, 1]");
  if (domain_mix.rho < 0 || domain_mix.rho > 1)
    throw ConfigError("domain_mix.rho", "must be in [0, 1]");
  if (domain_mix.enabled && data.shifted_videos == 0)
    throw ConfigError("data.shifted_videos",
                      "domain mixing needs a shifted pool");
}

Config config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  return from_json(j);
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

std::string config_to_json_text(const Config& cfg) {
  return to_json(cfg).dump(2) + "\n";
}

void save_config(const Config& cfg, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write config " + path.string());
  os << config_to_json_text(cfg);
}

void apply_override(Config& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError(assignment, "override must look like key.path=value");
  std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json j = to_json(cfg);
  std::string pointer = "/" + key;
  for (auto& ch : pointer)
    if (ch == '.') ch = '/';
  const json::json_pointer ptr(pointer);
  if (!j.contains(ptr)) throw ConfigError(key, "unknown key");

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // unquoted strings, e.g. variant=tcl
  }
  const json& current = j.at(ptr);
  if (current.is_string() && !parsed.is_string()) parsed = value;
  if ((current.is_number() && !parsed.is_number()) ||
      (current.is_boolean() && !parsed.is_boolean()) ||
      (current.is_array() && !parsed.is_array()))
    throw ConfigError(key, "value '" + value + "' has the wrong type");
  j[ptr] = parsed;
  cfg = from_json(j);
}

std::string config_fingerprint(const Config& cfg) {
  const std::uint64_t h = fnv1a64(to_json(cfg).dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace tcl
