#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tcl/config.hpp"
#include "tcl/dataset.hpp"
#include "tcl/eval.hpp"
#include "tcl/gradsuite.hpp"
#include "tcl/harness.hpp"
#include "tcl/trainer.hpp"

namespace fs = std::filesystem;
using namespace tcl;

namespace {

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> out;
  std::string token;
  std::istringstream is(text);
  while (std::getline(is, token, ',')) out.push_back(std::stod(token));
  return out;
}

Config resolve_config(const std::string& config_path,
                      const std::vector<std::string>& overrides,
                      std::optional<std::uint64_t> seed,
                      const std::string& variant) {
  Config cfg = config_path.empty() ? Config{} : load_config(config_path);
  for (const std::string& assignment : overrides) apply_override(cfg, assignment);
  if (seed) cfg.seed = *seed;
  if (!variant.empty()) cfg.variant = variant;
  if (auto v = variant_from_name(cfg.variant)) {
    apply_variant(cfg, *v);
  } else {
    throw ConfigError("variant", "unknown variant '" + cfg.variant + "'");
  }
  cfg.validate();
  return cfg;
}

int cmd_gen_data(const std::string& config_path,
                 const std::vector<std::string>& overrides,
                 const std::string& out_dir) {
  Config cfg = config_path.empty() ? Config{} : load_config(config_path);
  for (const std::string& assignment : overrides) apply_override(cfg, assignment);
  cfg.validate();

  fs::create_directories(out_dir);
  DataBundle bundle = build_data_bundle(cfg);

  nlohmann::json manifest{{"schema_version", 1}, {"files", nlohmann::json::array()}};
  auto describe = [&](const Dataset& ds, const std::string& name) {
    save_dataset(ds, fs::path(out_dir) / name);
    nlohmann::json videos = nlohmann::json::array();
    for (const VideoSample& v : ds.videos)
      videos.push_back({{"id", v.id}, {"label", v.label}});
    manifest["files"].push_back({{"path", name},
                                 {"domain", domain_name(ds.header.domain)},
                                 {"count", ds.videos.size()},
                                 {"classes", ds.header.classes},
                                 {"frames", ds.header.frames},
                                 {"height", ds.header.height},
                                 {"width", ds.header.width},
                                 {"seed", ds.header.seed},
                                 {"videos", videos}});
  };
  describe(bundle.train, "train.bin");
  if (bundle.shifted) describe(*bundle.shifted, "shifted.bin");

  std::ofstream os(fs::path(out_dir) / "manifest.json");
  os << manifest.dump(2) << "\n";
  save_config(cfg, fs::path(out_dir) / "config.json");
  std::printf("wrote %s (%zu videos%s)\n", out_dir.c_str(),
              bundle.train.videos.size(),
              bundle.shifted ? " + shifted pool" : "");
  return 0;
}

int cmd_train(const Config& cfg, const std::string& out_dir) {
  RunResult result = run_pipeline(cfg, out_dir);
  std::printf("variant %s seed %llu: top1 %.4f, pseudo-label acc %.4f\n",
              cfg.variant.c_str(),
              static_cast<unsigned long long>(cfg.seed), result.report.top1,
              result.report.pseudo_label_accuracy);
  std::printf("outputs in %s\n", out_dir.c_str());
  return 0;
}

int cmd_grid(const Config& base, const GridSpec& spec,
             const std::string& out_dir) {
  GridResult grid = run_ablation_grid(base, spec, out_dir);
  int failed = 0;
  for (const CellResult& c : grid.cells)
    if (!c.ok) {
      ++failed;
      std::fprintf(stderr, "cell %s f=%g seed=%llu failed: %s\n",
                   variant_name(c.cell.variant), c.cell.fraction,
                   static_cast<unsigned long long>(c.cell.seed),
                   c.error.c_str());
    }
  for (const GridAggregate& a : grid.aggregates) {
    std::printf("%-22s f=%-5g", a.variant.c_str(), a.fraction);
    if (a.rho) std::printf(" rho=%-4g", *a.rho);
    std::printf(" top1 %.4f +/- %.4f (%zu trials)\n", a.mean_top1, a.std_top1,
                a.trials);
  }
  std::printf("grid outputs in %s\n", out_dir.c_str());
  return failed == 0 ? 0 : 1;
}

int cmd_eval(const Config& cfg, const std::string& checkpoint,
             const std::string& out_path) {
  Encoder enc = load_checkpoint(checkpoint);
  DataBundle bundle = build_data_bundle(cfg);
  RunData data = prepare_run_data(cfg, bundle);
  EvalReport report = evaluate(enc, data.split.test, cfg.clips.fast_frames);
  report.config_fingerprint = config_fingerprint(cfg);
  report.seed = cfg.seed;
  report.pseudo_label_accuracy =
      pseudo_label_quality(enc, data.unlabeled, cfg.clips.fast_frames).overall;
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot write " + out_path);
  os << eval_report_to_json_text(report);
  save_config(cfg, fs::path(out_path).parent_path() / "config.json");
  std::printf("top1 %.4f, pseudo-label acc %.4f -> %s\n", report.top1,
              report.pseudo_label_accuracy, out_path.c_str());
  return 0;
}

int cmd_gradcheck(std::size_t instances, std::uint64_t seed, double tolerance) {
  GradSuiteResult res = run_gradient_suite(instances, seed);
  for (const GradSuiteEntry& e : res.entries)
    std::printf("%-22s max relative error %.3e over %zu instances\n",
                e.name.c_str(), e.max_rel_error, e.instances);
  const bool ok = res.all_passed(tolerance);
  std::printf("gradcheck: %s (tolerance %g)\n", ok ? "PASS" : "FAIL", tolerance);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal contrastive learning on synthetic speed-invariant sequences"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, variant;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<double> label_fraction, rho;

  auto add_common = [&](CLI::App* cmd, bool need_seed) {
    cmd->add_option("--config", config_path, "config JSON; defaults when omitted");
    cmd->add_option("--set", overrides,
                    "override a config key, e.g. --set loss.gamma=3");
    auto* seed_opt = cmd->add_option_function<std::uint64_t>(
        "--seed", [&seed](std::uint64_t s) { seed = s; }, "run seed");
    if (need_seed) seed_opt->required();
  };

  auto* gen = app.add_subcommand("gen-data", "generate dataset files");
  add_common(gen, false);
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "run one training pipeline");
  add_common(train, true);
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--variant", variant,
                    "supervised|pseudo_label|tcl_no_gc|tcl|tcl_finetune|"
                    "tcl_pretrain_finetune");
  train->add_option_function<double>(
      "--label-fraction", [&](double f) { label_fraction = f; },
      "labeled percentage");
  train->add_option_function<double>(
      "--rho", [&](double r) { rho = r; }, "target proportion in the unlabeled pool");

  auto* grid = app.add_subcommand("grid", "run the ablation grid");
  add_common(grid, true);
  grid->add_option("--out", out_dir, "output directory")->required();
  std::string variants_csv = "supervised,pseudo_label,tcl_no_gc,tcl,"
                             "tcl_finetune,tcl_pretrain_finetune";
  std::string fractions_csv, rhos_csv;
  unsigned trials = 3;
  int jobs = 0;
  grid->add_option("--variants", variants_csv, "comma-separated variant list");
  grid->add_option("--fractions", fractions_csv,
                   "comma-separated label percentages (default: config value)");
  grid->add_option("--rho", rhos_csv, "comma-separated rho values, e.g. 1,0.5,0");
  grid->add_option("--trials", trials, "seeds per cell (seed, seed+1, ...)");
  grid->add_option("--jobs", jobs, "parallel cells (default: hardware threads)");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", checkpoint, "TCLC checkpoint")->required();
  std::string report_path = "report.json";
  eval_cmd->add_option("--out", report_path, "report path");

  auto* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of every training objective");
  std::size_t gc_instances = 100;
  std::uint64_t gc_seed = 20240817ULL;
  double gc_tolerance = 1e-4;
  gradcheck->add_option("--instances", gc_instances, "random instances");
  gradcheck->add_option("--seed", gc_seed, "suite seed");
  gradcheck->add_option("--tolerance", gc_tolerance, "max relative error");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, overrides, out_dir);
    if (train->parsed()) {
      Config cfg = resolve_config(config_path, overrides, seed, variant);
      if (label_fraction) cfg.split.label_fraction = *label_fraction;
      if (rho) {
        cfg.domain_mix.enabled = true;
        cfg.domain_mix.rho = *rho;
        if (cfg.data.shifted_videos == 0)
          cfg.data.shifted_videos = cfg.data.train_videos;
      }
      cfg.validate();
      return cmd_train(cfg, out_dir);
    }
    if (grid->parsed()) {
      Config base = config_path.empty() ? Config{} : load_config(config_path);
      for (const std::string& assignment : overrides)
        apply_override(base, assignment);
      base.seed = *seed;
      GridSpec spec;
      std::string token;
      std::istringstream vs(variants_csv);
      while (std::getline(vs, token, ',')) {
        auto v = variant_from_name(token);
        if (!v) throw ConfigError("variants", "unknown variant '" + token + "'");
        spec.variants.push_back(*v);
      }
      spec.fractions = fractions_csv.empty()
                           ? std::vector<double>{base.split.label_fraction}
                           : parse_csv_doubles(fractions_csv);
      if (!rhos_csv.empty())
        for (double r : parse_csv_doubles(rhos_csv)) spec.rhos.push_back(r);
      for (unsigned t = 0; t < trials; ++t) spec.seeds.push_back(*seed + t);
      spec.jobs = jobs;
      return cmd_grid(base, spec, out_dir);
    }
    if (eval_cmd->parsed()) {
      Config cfg = resolve_config(config_path, overrides, seed, variant);
      return cmd_eval(cfg, checkpoint, report_path);
    }
    if (gradcheck->parsed())
      return cmd_gradcheck(gc_instances, gc_seed, gc_tolerance);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
