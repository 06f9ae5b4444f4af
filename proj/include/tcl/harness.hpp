#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tcl/config.hpp"
#include "tcl/trainer.hpp"

namespace tcl {

// The method variants of the study. Each is a mask over the shared config:
// the pseudo-label baseline, in particular, is the supervised recipe plus
// the same confidence-threshold machinery the finetune stage uses.
enum class Variant {
  supervised,             // warmup + combined with gamma = beta = 0
  pseudo_label,           // supervised + pseudo-label finetuning
  tcl_no_gc,              // beta = 0 ablation
  tcl,                    // warmup + combined with the full objective
  tcl_finetune,           // + pseudo-label finetuning
  tcl_pretrain_finetune,  // + self-supervised pretraining
};

const char* variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& name);
std::vector<Variant> all_variants();

// Rewrites weights/schedule for the variant; other keys are untouched.
void apply_variant(Config& cfg, Variant v);

struct GridSpec {
  std::vector<Variant> variants;
  std::vector<double> fractions;           // label percentages
  std::vector<std::optional<double>> rhos; // nullopt: no domain mixing
  std::vector<std::uint64_t> seeds;
  int jobs = 0;  // 0: one per hardware thread, capped at the cell count
};

struct GridCell {
  Variant variant = Variant::tcl;
  double fraction = 5.0;
  std::optional<double> rho;
  std::uint64_t seed = 0;
};

struct CellResult {
  GridCell cell;
  bool ok = false;
  std::string error;
  double top1 = 0.0;
  double pseudo_label_accuracy = 0.0;
  std::string out_dir;
};

struct GridAggregate {
  std::string variant;
  double fraction = 0.0;
  std::optional<double> rho;
  std::size_t trials = 0;
  double mean_top1 = 0.0;
  double std_top1 = 0.0;  // sample standard deviation over seeds
};

struct GridResult {
  std::vector<CellResult> cells;
  std::vector<GridAggregate> aggregates;
};

// Runs every (variant, fraction, rho, seed) cell into its own directory
// under out_root; cells are independent and run thread-parallel. A failing
// cell is recorded and the grid continues. Writes grid.csv (one row per
// cell) and grid_summary.json (mean/std per aggregate) when out_root is
// non-empty.
GridResult run_ablation_grid(const Config& base, const GridSpec& spec,
                             const std::filesystem::path& out_root);

std::vector<GridAggregate> aggregate_grid(const std::vector<CellResult>& cells);

void write_grid_csv(const std::vector<CellResult>& cells,
                    const std::filesystem::path& path);
void write_grid_summary(const GridResult& grid,
                        const std::filesystem::path& path);

}  // namespace tcl
