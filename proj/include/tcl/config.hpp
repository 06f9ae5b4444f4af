#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcl {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what),
        key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Resolved run configuration. Defaults are the desk-scale setup: stage
// lengths keep the 4/1/6/1 ratio of the full-scale 200/50/300/50 recipe.
struct Config {
  std::uint64_t seed = 0;  // run seed; the CLI requires it explicitly
  std::string variant = "tcl";

  struct Data {
    std::uint32_t classes = 8;
    std::uint32_t frames = 32;  // L_raw
    std::uint32_t height = 16, width = 16;
    std::vector<double> speeds{1.0, 2.0, 3.0};
    double noise_sigma = 0.05;
    double blob_sigma = 1.5;
    double trail_decay = 0.55;
    std::uint32_t trail_length = 3;
    double brightness = 1.0;
    std::uint64_t train_videos = 2000;
    std::uint32_t test_per_class = 100;
    std::uint64_t shifted_videos = 0;  // extra shifted-domain pool
    std::uint64_t data_seed = 1234;    // decoupled from the run seed
  } data;

  struct Split {
    double label_fraction = 5.0;  // percent
    bool stratified = true;
  } split;

  struct Clips {
    std::uint32_t fast_frames = 8;  // M
    std::uint32_t slow_frames = 4;  // N
  } clips;

  struct BatchCfg {
    std::uint32_t labeled = 8;  // B_l
    std::uint32_t mu = 3;
  } batch;

  struct Loss {
    double tau = 0.5;
    double gamma = 9.0;
    double beta = 1.0;
    double epsilon = 1e-12;
  } loss;

  struct EncoderCfg {
    std::string type = "frame_mlp";
    std::vector<std::size_t> hidden{64};
  } encoder;

  struct Schedule {
    std::uint32_t pretrain = 20;
    std::uint32_t warmup = 5;
    std::uint32_t combined = 30;
    std::uint32_t finetune = 5;
  } schedule;

  struct Optimizer {
    double lr = 0.02;
    double finetune_lr = 0.002;
    double momentum = 0.9;
  } optimizer;

  struct Finetune {
    double confidence_threshold = 0.8;
  } finetune;

  struct DomainMix {
    bool enabled = false;
    double rho = 1.0;
    std::uint64_t unlabeled_total = 0;  // 0: use the full target unlabeled pool
  } domain_mix;

  void validate() const;  // throws ConfigError naming the first offending key
};

// JSON round-trip. load applies the file's keys over the defaults, rejects
// unknown keys and validates; save writes the fully resolved form.
Config load_config(const std::filesystem::path& path);
Config config_from_json_text(const std::string& text);
std::string config_to_json_text(const Config& cfg);
void save_config(const Config& cfg, const std::filesystem::path& path);

// Applies "dotted.key=value" overrides (CLI flags win over file keys).
void apply_override(Config& cfg, const std::string& assignment);

// FNV-1a of the canonical serialized form; stable across runs and builds.
std::string config_fingerprint(const Config& cfg);

// Shortest round-trip decimal form, for byte-stable CSV output.
std::string format_double(double v);

}  // namespace tcl
