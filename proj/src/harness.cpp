#include "tcl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tcl/kernels.hpp"

namespace tcl {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::supervised: return "supervised";
    case Variant::pseudo_label: return "pseudo_label";
    case Variant::tcl_no_gc: return "tcl_no_gc";
    case Variant::tcl: return "tcl";
    case Variant::tcl_finetune: return "tcl_finetune";
    case Variant::tcl_pretrain_finetune: return "tcl_pretrain_finetune";
  }
  return "?";
}

std::optional<Variant> variant_from_name(const std::string& name) {
  for (Variant v : all_variants())
    if (name == variant_name(v)) return v;
  return std::nullopt;
}

std::vector<Variant> all_variants() {
  return {Variant::supervised,   Variant::pseudo_label,
          Variant::tcl_no_gc,    Variant::tcl,
          Variant::tcl_finetune, Variant::tcl_pretrain_finetune};
}

void apply_variant(Config& cfg, Variant v) {
  cfg.variant = variant_name(v);
  switch (v) {
    case Variant::supervised:
      cfg.loss.gamma = 0.0;
      cfg.loss.beta = 0.0;
      cfg.schedule.pretrain = 0;
      cfg.schedule.finetune = 0;
      break;
    case Variant::pseudo_label:
      cfg.loss.gamma = 0.0;
      cfg.loss.beta = 0.0;
      cfg.schedule.pretrain = 0;
      break;
    case Variant::tcl_no_gc:
      cfg.loss.beta = 0.0;
      cfg.schedule.pretrain = 0;
      cfg.schedule.finetune = 0;
      break;
    case Variant::tcl:
      cfg.schedule.pretrain = 0;
      cfg.schedule.finetune = 0;
      break;
    case Variant::tcl_finetune:
      cfg.schedule.pretrain = 0;
      break;
    case Variant::tcl_pretrain_finetune:
      break;
  }
}

// ---------------------------------------------------------------------------
// grid
// ---------------------------------------------------------------------------

namespace {

std::string cell_dir_name(const GridCell& cell) {
  std::ostringstream os;
  os << variant_name(cell.variant) << "_f" << format_double(cell.fraction);
  if (cell.rho) os << "_rho" << format_double(*cell.rho);
  os << "_s" << cell.seed;
  return os.str();
}

Config cell_config(const Config& base, const GridCell& cell) {
  Config cfg = base;
  apply_variant(cfg, cell.variant);
  cfg.split.label_fraction = cell.fraction;
  cfg.seed = cell.seed;
  if (cell.rho) {
    cfg.domain_mix.enabled = true;
    cfg.domain_mix.rho = *cell.rho;
  }
  return cfg;
}

}  // namespace

GridResult run_ablation_grid(const Config& base, const GridSpec& spec,
                             const std::filesystem::path& out_root) {
  if (spec.variants.empty() || spec.fractions.empty() || spec.seeds.empty())
    throw std::invalid_argument("run_ablation_grid: empty grid axis");

  std::vector<GridCell> cells;
  const std::vector<std::optional<double>> rhos =
      spec.rhos.empty() ? std::vector<std::optional<double>>{std::nullopt}
                        : spec.rhos;
  for (Variant v : spec.variants)
    for (double f : spec.fractions)
      for (const auto& rho : rhos)
        for (std::uint64_t seed : spec.seeds)
          cells.push_back({v, f, rho, seed});

  // shared, read-only across cells
  Config probe = base;
  bool need_shifted = false;
  for (const auto& rho : rhos) need_shifted |= rho.has_value();
  if (need_shifted && probe.data.shifted_videos == 0)
    probe.data.shifted_videos = probe.data.train_videos;
  const DataBundle bundle = build_data_bundle(probe);

  if (!out_root.empty()) std::filesystem::create_directories(out_root);

  std::vector<CellResult> results(cells.size());
  int jobs = spec.jobs > 0 ? spec.jobs : kernels::max_threads();
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
#endif
  for (std::size_t i = 0; i < cells.size(); ++i) {
    CellResult& res = results[i];
    res.cell = cells[i];
    try {
      Config cfg = cell_config(probe, cells[i]);
      cfg.validate();
      const auto dir =
          out_root.empty()
              ? std::filesystem::path()
              : out_root / cell_dir_name(cells[i]);
      if (!dir.empty()) {
        RunResult run = run_pipeline(cfg, dir, &bundle);
        res.top1 = run.report.top1;
        res.pseudo_label_accuracy = run.report.pseudo_label_accuracy;
        res.out_dir = dir.string();
      } else {
        // in-memory run for callers that only need the numbers
        RunData data = prepare_run_data(cfg, bundle);
        Trainer trainer(cfg, data);
        trainer.run_all();
        res.top1 = evaluate(trainer.encoder(), data.split.test,
                            cfg.clips.fast_frames).top1;
        res.pseudo_label_accuracy =
            pseudo_label_quality(trainer.encoder(), data.unlabeled,
                                 cfg.clips.fast_frames).overall;
      }
      res.ok = true;
    } catch (const std::exception& e) {
      res.ok = false;
      res.error = e.what();
    }
  }

  GridResult grid;
  grid.cells = std::move(results);
  grid.aggregates = aggregate_grid(grid.cells);
  if (!out_root.empty()) {
    write_grid_csv(grid.cells, out_root / "grid.csv");
    write_grid_summary(grid, out_root / "grid_summary.json");
  }
  return grid;
}

std::vector<GridAggregate> aggregate_grid(const std::vector<CellResult>& cells) {
  std::map<std::tuple<std::string, double, double, bool>,
           std::vector<double>> groups;
  for (const CellResult& c : cells) {
    if (!c.ok) continue;
    groups[{variant_name(c.cell.variant), c.cell.fraction,
            c.cell.rho.value_or(-1.0), c.cell.rho.has_value()}]
        .push_back(c.top1);
  }
  std::vector<GridAggregate> out;
  for (const auto& [key, values] : groups) {
    GridAggregate agg;
    agg.variant = std::get<0>(key);
    agg.fraction = std::get<1>(key);
    if (std::get<3>(key)) agg.rho = std::get<2>(key);
    agg.trials = values.size();
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    agg.mean_top1 = mean;
    agg.std_top1 = values.size() > 1
                       ? std::sqrt(var / static_cast<double>(values.size() - 1))
                       : 0.0;
    out.push_back(agg);
  }
  return out;
}

void write_grid_csv(const std::vector<CellResult>& cells,
                    const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "variant,fraction,rho,seed,status,top1,pseudo_label_accuracy,out_dir\n";
  for (const CellResult& c : cells) {
    os << variant_name(c.cell.variant) << ',' << format_double(c.cell.fraction)
       << ',' << (c.cell.rho ? format_double(*c.cell.rho) : "") << ','
       << c.cell.seed << ',' << (c.ok ? "ok" : "failed") << ','
       << format_double(c.top1) << ',' << format_double(c.pseudo_label_accuracy)
       << ',' << c.out_dir << '\n';
  }
}

void write_grid_summary(const GridResult& grid,
                        const std::filesystem::path& path) {
  nlohmann::json cells = nlohmann::json::array();
  for (const CellResult& c : grid.cells) {
    nlohmann::json cell{{"variant", variant_name(c.cell.variant)},
                        {"fraction", c.cell.fraction},
                        {"seed", c.cell.seed},
                        {"status", c.ok ? "ok" : "failed"},
                        {"top1", c.top1},
                        {"pseudo_label_accuracy", c.pseudo_label_accuracy},
                        {"out_dir", c.out_dir}};
    if (c.cell.rho) cell["rho"] = *c.cell.rho;
    if (!c.ok) cell["error"] = c.error;
    cells.push_back(cell);
  }
  nlohmann::json aggs = nlohmann::json::array();
  for (const GridAggregate& a : grid.aggregates) {
    nlohmann::json agg{{"variant", a.variant},
                       {"fraction", a.fraction},
                       {"trials", a.trials},
                       {"mean_top1", a.mean_top1},
                       {"std_top1", a.std_top1}};
    if (a.rho) agg["rho"] = *a.rho;
    aggs.push_back(agg);
  }
  nlohmann::json j{{"schema_version", 1}, {"cells", cells}, {"aggregates", aggs}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

}  // namespace tcl
