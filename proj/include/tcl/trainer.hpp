#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tcl/config.hpp"
#include "tcl/dataset.hpp"
#include "tcl/encoder.hpp"
#include "tcl/eval.hpp"
#include "tcl/losses.hpp"

namespace tcl {

// lr = base * (1 + cos(pi * epoch / total)) / 2, applied per stage.
double cosine_lr(double base_lr, std::size_t epoch, std::size_t total_epochs);

// Classic momentum: buffer <- momentum * buffer + grad; param <- param - lr * buffer.
// Throws on non-finite gradients before touching anything.
void sgd_step(std::vector<Tensor>& params,
              std::vector<std::vector<double>>& buffers, double lr,
              double momentum);

enum class Stage : std::uint32_t {
  pretrain = 0,
  warmup = 1,
  combined = 2,
  finetune = 3,
  done = 4
};
const char* stage_name(Stage s);

struct MetricsRow {
  std::size_t epoch = 0;  // global, 1-based across stages
  Stage stage = Stage::warmup;
  double lr = 0.0;
  double l_sup = 0.0, l_ic = 0.0, l_gc = 0.0, total = 0.0;
  double val_top1 = 0.0;
};

// Pseudo-label accuracy measured at fractions of the combined stage.
struct PseudoLabelSnapshot {
  double stage_fraction = 0.0;  // 0.25, 0.5, 1.0
  double overall_accuracy = 0.0;
  double above_threshold_accuracy = 0.0;
  double admitted_fraction = 0.0;
};

// Shared immutable datasets (generation depends only on the data config, so
// grid cells reuse one bundle across seeds and variants).
struct DataBundle {
  Dataset train;                  // target domain; includes the test tail
  std::optional<Dataset> shifted; // extra pool for domain mixing
};

DataBundle build_data_bundle(const Config& cfg);

// Seed-dependent view: split plus the final unlabeled pool (after optional
// rho-mixing with the shifted pool).
struct RunData {
  DatasetSplit split;
  std::vector<VideoSample> unlabeled;  // the pool training actually uses
};

RunData prepare_run_data(const Config& cfg, const DataBundle& bundle);

// Drives the staged schedule pretrain -> warmup -> combined -> finetune.
// One instance is strictly sequential and deterministic in (config, seed);
// a snapshot taken mid-run continues bitwise identically to the
// uninterrupted run.
class Trainer {
 public:
  Trainer(const Config& cfg, const RunData& data);

  bool done() const { return stage_ == Stage::done; }
  Stage stage() const { return stage_; }
  std::size_t global_epoch() const { return global_epoch_; }

  // Runs one epoch of the current stage and advances the stage machinery.
  void run_epoch();
  void run_all();

  const Encoder& encoder() const { return encoder_; }
  Encoder& encoder() { return encoder_; }
  const std::vector<MetricsRow>& history() const { return history_; }
  const std::vector<PseudoLabelSnapshot>& pl_trend() const { return pl_trend_; }

  // Finetune diagnostics (valid once the finetune stage has started).
  std::size_t finetune_admitted() const { return finetune_pool_ids_.size(); }
  bool finetune_admitted_empty() const { return finetune_built_ && finetune_pool_ids_.empty(); }

  void save_state(const std::filesystem::path& path) const;
  static Trainer load_state(const std::filesystem::path& path,
                            const Config& cfg, const RunData& data);

 private:
  void advance_past_empty_stages();
  void enter_finetune();
  double epoch_lr(std::size_t stage_total) const;
  void train_batch(const Batch& batch, double lr, bool use_unlabeled,
                   double& sup_acc, double& ic_acc, double& gc_acc,
                   double& total_acc, std::size_t& batches);

  const Config* cfg_;
  const RunData* data_;
  Encoder encoder_;
  std::vector<std::vector<double>> buffers_;
  Stage stage_ = Stage::pretrain;
  std::size_t epoch_in_stage_ = 0;
  std::size_t global_epoch_ = 0;
  BatchRngs rngs_;
  std::vector<MetricsRow> history_;
  std::vector<PseudoLabelSnapshot> pl_trend_;
  // finetune pool, frozen when the stage starts
  bool finetune_built_ = false;
  std::vector<std::uint64_t> finetune_pool_ids_;
  std::vector<VideoSample> finetune_pool_;
  std::vector<VideoSample> pretrain_pool_;
};

struct RunResult {
  EvalReport report;
  std::vector<MetricsRow> history;
  std::vector<PseudoLabelSnapshot> pl_trend;
  PseudoLabelQuality final_pl;
  bool finetune_admitted_empty = false;
  std::size_t finetune_admitted = 0;
};

// Executes all enabled stages, writing into out_dir: resolved config.json,
// split.json, metrics.csv, report.json, summary.json and per-stage
// checkpoints. Pass a prebuilt bundle to share datasets across runs.
RunResult run_pipeline(const Config& cfg, const std::filesystem::path& out_dir,
                       const DataBundle* shared_bundle = nullptr);

void write_metrics_csv(const std::vector<MetricsRow>& history,
                       const std::filesystem::path& path);

}  // namespace tcl
