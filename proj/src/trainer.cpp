#include "tcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace tcl {

double cosine_lr(double base_lr, std::size_t epoch, std::size_t total_epochs) {
  if (total_epochs == 0)
    throw std::invalid_argument("cosine_lr: total_epochs must be > 0");
  if (epoch >= total_epochs)
    throw std::invalid_argument("cosine_lr: epoch out of range");
  const double phase = std::numbers::pi * static_cast<double>(epoch) /
                       static_cast<double>(total_epochs);
  return base_lr * 0.5 * (1.0 + std::cos(phase));
}

void sgd_step(std::vector<Tensor>& params,
              std::vector<std::vector<double>>& buffers, double lr,
              double momentum) {
  if (params.size() != buffers.size())
    throw std::invalid_argument("sgd_step: buffer count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i].grad();
    if (buffers[i].size() != g.size())
      throw std::invalid_argument("sgd_step: buffer shape mismatch");
    for (double x : g)
      if (!std::isfinite(x))
        throw NonFiniteError("sgd_step: non-finite gradient, step aborted");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i].grad();
    auto& buf = buffers[i];
    auto& val = params[i].values();
    for (std::size_t j = 0; j < g.size(); ++j) {
      buf[j] = momentum * buf[j] + g[j];
      val[j] -= lr * buf[j];
    }
  }
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::pretrain: return "pretrain";
    case Stage::warmup: return "warmup";
    case Stage::combined: return "combined";
    case Stage::finetune: return "finetune";
    case Stage::done: return "done";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// data plumbing
// ---------------------------------------------------------------------------

namespace {

GeneratorConfig generator_config(const Config& cfg) {
  GeneratorConfig g;
  g.classes = cfg.data.classes;
  g.frames = cfg.data.frames;
  g.height = cfg.data.height;
  g.width = cfg.data.width;
  g.speeds = cfg.data.speeds;
  g.noise_sigma = cfg.data.noise_sigma;
  g.blob_sigma = cfg.data.blob_sigma;
  g.trail_decay = cfg.data.trail_decay;
  g.trail_length = cfg.data.trail_length;
  g.brightness = cfg.data.brightness;
  return g;
}

}  // namespace

DataBundle build_data_bundle(const Config& cfg) {
  const GeneratorConfig g = generator_config(cfg);
  const std::size_t total =
      cfg.data.train_videos +
      std::size_t(cfg.data.test_per_class) * cfg.data.classes;
  DataBundle bundle;
  bundle.train = generate_dataset(total, g, Domain::target, cfg.data.data_seed);
  if (cfg.data.shifted_videos > 0)
    bundle.shifted = generate_dataset(cfg.data.shifted_videos, g,
                                      Domain::shifted, cfg.data.data_seed,
                                      /*id_offset=*/total);
  return bundle;
}

RunData prepare_run_data(const Config& cfg, const DataBundle& bundle) {
  RunData rd;
  rd.split = split_labeled(bundle.train, cfg.split.label_fraction,
                           cfg.data.test_per_class, cfg.seed,
                           cfg.split.stratified);
  if (cfg.domain_mix.enabled) {
    if (!bundle.shifted)
      throw std::invalid_argument("domain mixing requested without a shifted pool");
    Rng mix_rng(cfg.seed, "mix");
    DomainMixSpec spec;
    spec.rho = cfg.domain_mix.rho;
    spec.total_unlabeled =
        cfg.domain_mix.unlabeled_total > 0
            ? cfg.domain_mix.unlabeled_total
            : std::min(rd.split.unlabeled.size(), bundle.shifted->videos.size());
    rd.unlabeled = mix_domains(rd.split.unlabeled, bundle.shifted->videos,
                               spec, mix_rng);
  } else {
    rd.unlabeled = rd.split.unlabeled;
  }
  return rd;
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

namespace {

BatchRngs make_rngs(std::uint64_t seed) {
  return BatchRngs{Rng(seed, "batch/labeled_shuffle"),
                   Rng(seed, "batch/labeled_clip"),
                   Rng(seed, "batch/unlabeled_pick"),
                   Rng(seed, "batch/unlabeled_clip")};
}

}  // namespace

Trainer::Trainer(const Config& cfg, const RunData& data)
    : cfg_(&cfg), data_(&data), rngs_(make_rngs(cfg.seed)) {
  EncoderConfig ec;
  ec.input_dim = std::size_t(cfg.data.height) * cfg.data.width;
  ec.hidden = cfg.encoder.hidden;
  ec.classes = cfg.data.classes;
  encoder_ = Encoder::init(ec, cfg.seed);
  for (const Tensor& p : encoder_.parameters())
    buffers_.emplace_back(p.size(), 0.0);
  if (cfg.schedule.pretrain > 0) {
    pretrain_pool_ = data_->split.labeled;  // D_l u D_u, labels unused
    pretrain_pool_.insert(pretrain_pool_.end(), data_->unlabeled.begin(),
                          data_->unlabeled.end());
  }
  stage_ = Stage::pretrain;
  advance_past_empty_stages();
}

void Trainer::advance_past_empty_stages() {
  auto stage_total = [&](Stage s) -> std::size_t {
    switch (s) {
      case Stage::pretrain: return cfg_->schedule.pretrain;
      case Stage::warmup: return cfg_->schedule.warmup;
      case Stage::combined: return cfg_->schedule.combined;
      case Stage::finetune: return cfg_->schedule.finetune;
      default: return 0;
    }
  };
  while (stage_ != Stage::done && epoch_in_stage_ >= stage_total(stage_)) {
    stage_ = static_cast<Stage>(static_cast<std::uint32_t>(stage_) + 1);
    epoch_in_stage_ = 0;
    if (stage_ == Stage::finetune && cfg_->schedule.finetune > 0)
      enter_finetune();
  }
}

void Trainer::enter_finetune() {
  if (finetune_built_) return;
  finetune_built_ = true;
  finetune_pool_ = data_->split.labeled;
  // pseudo-labels generated once, with the base (fast) pathway
  for (const VideoSample& v : data_->unlabeled) {
    const Prediction pred = predict(
        encode_video_deterministic(encoder_, v, cfg_->clips.fast_frames));
    if (pred.confidence > cfg_->finetune.confidence_threshold) {
      VideoSample admitted = v;
      admitted.label = pred.label;
      admitted.label_visible = true;
      finetune_pool_.push_back(std::move(admitted));
      finetune_pool_ids_.push_back(v.id);
    }
  }
}


void Trainer::train_batch(const Batch& batch, double lr, bool use_unlabeled,
                          double& sup_acc, double& ic_acc, double& gc_acc,
                          double& total_acc, std::size_t& batches) {
  const bool want_gc = use_unlabeled && cfg_->loss.beta > 0.0;
  const bool is_pretrain = stage_ == Stage::pretrain;
  if (is_pretrain && batch.unlabeled.size() < 2) return;  // no negatives

  encoder_.zero_grad();
  GradientTape tape;
  SimilarityConfig sim{cfg_->loss.tau, cfg_->loss.epsilon};

  // one stacked forward pass over every clip in the batch
  const bool contrastive =
      (use_unlabeled || is_pretrain) && batch.unlabeled.size() >= 2;
  std::vector<Tensor> clips;
  std::vector<int> labels;
  for (const LabeledClip& lc : batch.labeled) {
    clips.push_back(clip_to_tensor(lc.clip));
    labels.push_back(lc.label);
  }
  if (contrastive) {
    for (const ClipPair& pair : batch.unlabeled)
      clips.push_back(clip_to_tensor(pair.fast));
    for (const ClipPair& pair : batch.unlabeled)
      clips.push_back(clip_to_tensor(pair.slow));
  }
  if (clips.empty()) return;
  const std::vector<Tensor> reps = encoder_.encode_clips(clips);

  Tensor sup = Tensor::scalar(0.0);
  if (!batch.labeled.empty()) {
    std::span<const Tensor> logits(reps.data(), batch.labeled.size());
    sup = supervised_loss(logits, labels);
  }

  Tensor ic = Tensor::scalar(0.0);
  Tensor gc = Tensor::scalar(0.0);
  if (contrastive) {
    const std::size_t B = batch.unlabeled.size();
    std::span<const Tensor> fast_reps(reps.data() + batch.labeled.size(), B);
    std::span<const Tensor> slow_reps(reps.data() + batch.labeled.size() + B, B);
    ic = instance_contrastive_loss(fast_reps, slow_reps, sim);
    if (want_gc) {
      const auto fast_labels = assign_pseudo_labels(fast_reps);
      const auto slow_labels = assign_pseudo_labels(slow_reps);
      GroupSet groups =
          form_groups(fast_reps, slow_reps, fast_labels, slow_labels);
      gc = group_contrastive_loss(groups, sim).loss;
    }
  }

  Tensor objective;
  if (is_pretrain) {
    objective = ic;  // instance-contrastive loss alone
  } else if (stage_ == Stage::combined) {
    objective = total_loss(sup, ic, gc, {cfg_->loss.gamma, cfg_->loss.beta});
  } else {
    objective = sup;  // warmup and finetune are purely supervised
  }

  tape.backward(objective);
  sgd_step(encoder_.parameters(), buffers_, lr, cfg_->optimizer.momentum);

  sup_acc += sup.item();
  ic_acc += ic.item();
  gc_acc += gc.item();
  total_acc += objective.item();
  ++batches;
}

double Trainer::epoch_lr(std::size_t stage_total) const {
  const double base = stage_ == Stage::finetune ? cfg_->optimizer.finetune_lr
                                                : cfg_->optimizer.lr;
  return cosine_lr(base, epoch_in_stage_, stage_total);
}

void Trainer::run_epoch() {
  if (done()) throw std::logic_error("Trainer::run_epoch: schedule finished");

  std::size_t stage_total = 0;
  double sup = 0, ic = 0, gc = 0, total = 0;
  std::size_t batches = 0;

  BatchConfig bc;
  bc.batch_labeled = cfg_->batch.labeled;
  bc.fast_frames = cfg_->clips.fast_frames;
  bc.slow_frames = cfg_->clips.slow_frames;

  switch (stage_) {
    case Stage::pretrain: {
      stage_total = cfg_->schedule.pretrain;
      const double lr = epoch_lr(stage_total);
      const std::size_t pairs =
          std::max<std::size_t>(2, std::size_t(cfg_->batch.labeled) *
                                       std::max<std::uint32_t>(cfg_->batch.mu, 1));
      UnlabeledEpochBatches epoch(pretrain_pool_, pairs, bc, rngs_);
      while (auto batch = epoch.next())
        train_batch(*batch, lr, /*use_unlabeled=*/false, sup, ic, gc, total,
                    batches);
      break;
    }
    case Stage::warmup:
    case Stage::finetune: {
      stage_total = stage_ == Stage::warmup ? cfg_->schedule.warmup
                                            : cfg_->schedule.finetune;
      const double lr = epoch_lr(stage_total);
      bc.mu = 0;
      const auto& pool =
          stage_ == Stage::finetune ? finetune_pool_ : data_->split.labeled;
      EpochBatches epoch(pool, data_->unlabeled, bc, rngs_);
      while (auto batch = epoch.next())
        train_batch(*batch, lr, /*use_unlabeled=*/false, sup, ic, gc, total,
                    batches);
      break;
    }
    case Stage::combined: {
      stage_total = cfg_->schedule.combined;
      const double lr = epoch_lr(stage_total);
      const bool use_unlabeled =
          cfg_->batch.mu > 0 &&
          (cfg_->loss.gamma > 0.0 || cfg_->loss.beta > 0.0);
      bc.mu = use_unlabeled ? cfg_->batch.mu : 0;
      EpochBatches epoch(data_->split.labeled, data_->unlabeled, bc, rngs_);
      while (auto batch = epoch.next())
        train_batch(*batch, lr, use_unlabeled, sup, ic, gc, total, batches);
      break;
    }
    default:
      throw std::logic_error("Trainer::run_epoch: bad stage");
  }

  const double inv = batches > 0 ? 1.0 / static_cast<double>(batches) : 0.0;
  MetricsRow row;
  row.epoch = ++global_epoch_;
  row.stage = stage_;
  row.lr = epoch_lr(stage_total);
  row.l_sup = sup * inv;
  row.l_ic = ic * inv;
  row.l_gc = gc * inv;
  row.total = total * inv;
  row.val_top1 =
      evaluate(encoder_, data_->split.test, cfg_->clips.fast_frames).top1;
  history_.push_back(row);

  ++epoch_in_stage_;

  if (stage_ == Stage::combined) {
    const std::size_t e = epoch_in_stage_;  // completed epochs, 1-based
    const std::size_t total_epochs = cfg_->schedule.combined;
    const auto mark = [&](double fraction) {
      const auto at = std::max<std::size_t>(
          1, static_cast<std::size_t>(
                 std::lround(fraction * static_cast<double>(total_epochs))));
      if (e != at || data_->unlabeled.empty()) return;
      PseudoLabelQuality q = pseudo_label_quality(encoder_, data_->unlabeled,
                                                  cfg_->clips.fast_frames);
      PseudoLabelSnapshot snap;
      snap.stage_fraction = fraction;
      snap.overall_accuracy = q.overall;
      for (const ThresholdPoint& p : q.sweep) {
        if (p.threshold == 0.8) {
          snap.above_threshold_accuracy = p.accuracy;
          snap.admitted_fraction = p.admitted_fraction;
        }
      }
      pl_trend_.push_back(snap);
    };
    mark(0.25);
    mark(0.5);
    mark(1.0);
  }

  advance_past_empty_stages();
}

void Trainer::run_all() {
  while (!done()) run_epoch();
}

// ---------------------------------------------------------------------------
// state serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kStateMagic[4] = {'T', 'C', 'L', 'S'};
constexpr std::uint32_t kStateVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("trainer state truncated");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put(os, static_cast<std::uint64_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("trainer state truncated");
  return s;
}

}  // namespace

void Trainer::save_state(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kStateMagic, 4);
  put(os, kStateVersion);
  put_string(os, config_fingerprint(*cfg_));
  put(os, static_cast<std::uint32_t>(stage_));
  put(os, static_cast<std::uint64_t>(epoch_in_stage_));
  put(os, static_cast<std::uint64_t>(global_epoch_));

  write_named_tensors(os, encoder_.parameter_names(), encoder_.parameters());
  put(os, static_cast<std::uint64_t>(buffers_.size()));
  for (const auto& buf : buffers_) {
    put(os, static_cast<std::uint64_t>(buf.size()));
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(double)));
  }

  put_string(os, rngs_.labeled_shuffle.save_state());
  put_string(os, rngs_.labeled_clip.save_state());
  put_string(os, rngs_.unlabeled_pick.save_state());
  put_string(os, rngs_.unlabeled_clip.save_state());

  put(os, static_cast<std::uint64_t>(history_.size()));
  for (const MetricsRow& r : history_) {
    put(os, static_cast<std::uint64_t>(r.epoch));
    put(os, static_cast<std::uint32_t>(r.stage));
    put(os, r.lr);
    put(os, r.l_sup);
    put(os, r.l_ic);
    put(os, r.l_gc);
    put(os, r.total);
    put(os, r.val_top1);
  }

  put(os, static_cast<std::uint64_t>(pl_trend_.size()));
  for (const PseudoLabelSnapshot& s : pl_trend_) {
    put(os, s.stage_fraction);
    put(os, s.overall_accuracy);
    put(os, s.above_threshold_accuracy);
    put(os, s.admitted_fraction);
  }

  put(os, static_cast<std::uint8_t>(finetune_built_));
  put(os, static_cast<std::uint64_t>(finetune_pool_ids_.size()));
  // the admitted set is stored as (id, pseudo-label); the pool itself is
  // rebuilt from the run data on load
  std::map<std::uint64_t, int> admitted_labels;
  for (std::size_t i = data_->split.labeled.size(); i < finetune_pool_.size(); ++i)
    admitted_labels[finetune_pool_[i].id] = finetune_pool_[i].label;
  for (std::uint64_t id : finetune_pool_ids_) {
    put(os, id);
    put(os, static_cast<std::int32_t>(admitted_labels.at(id)));
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Trainer Trainer::load_state(const std::filesystem::path& path,
                            const Config& cfg, const RunData& data) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kStateMagic, 4) != 0)
    throw std::runtime_error(path.string() + ": not a TCLS state file");
  if (get<std::uint32_t>(is) != kStateVersion)
    throw std::runtime_error(path.string() + ": unsupported state version");
  const std::string fp = get_string(is);
  if (fp != config_fingerprint(cfg))
    throw std::runtime_error(path.string() +
                             ": state was produced by a different config");

  Trainer t(cfg, data);
  t.stage_ = static_cast<Stage>(get<std::uint32_t>(is));
  t.epoch_in_stage_ = get<std::uint64_t>(is);
  t.global_epoch_ = get<std::uint64_t>(is);

  std::vector<std::string> names;
  std::vector<Tensor> tensors;
  read_named_tensors(is, names, tensors);
  if (names != t.encoder_.parameter_names())
    throw std::runtime_error(path.string() + ": parameter names do not match");
  for (std::size_t i = 0; i < tensors.size(); ++i)
    t.encoder_.parameters()[i].values() = tensors[i].values();

  const auto nbuf = get<std::uint64_t>(is);
  if (nbuf != t.buffers_.size())
    throw std::runtime_error(path.string() + ": momentum buffer count mismatch");
  for (auto& buf : t.buffers_) {
    const auto n = get<std::uint64_t>(is);
    if (n != buf.size())
      throw std::runtime_error(path.string() + ": momentum buffer shape mismatch");
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("trainer state truncated");
  }

  t.rngs_.labeled_shuffle.restore_state(get_string(is));
  t.rngs_.labeled_clip.restore_state(get_string(is));
  t.rngs_.unlabeled_pick.restore_state(get_string(is));
  t.rngs_.unlabeled_clip.restore_state(get_string(is));

  t.history_.clear();
  const auto nrows = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < nrows; ++i) {
    MetricsRow r;
    r.epoch = get<std::uint64_t>(is);
    r.stage = static_cast<Stage>(get<std::uint32_t>(is));
    r.lr = get<double>(is);
    r.l_sup = get<double>(is);
    r.l_ic = get<double>(is);
    r.l_gc = get<double>(is);
    r.total = get<double>(is);
    r.val_top1 = get<double>(is);
    t.history_.push_back(r);
  }

  t.pl_trend_.clear();
  const auto nsnap = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < nsnap; ++i) {
    PseudoLabelSnapshot s;
    s.stage_fraction = get<double>(is);
    s.overall_accuracy = get<double>(is);
    s.above_threshold_accuracy = get<double>(is);
    s.admitted_fraction = get<double>(is);
    t.pl_trend_.push_back(s);
  }

  t.finetune_built_ = get<std::uint8_t>(is) != 0;
  const auto nadmitted = get<std::uint64_t>(is);
  t.finetune_pool_ids_.clear();
  t.finetune_pool_.clear();
  if (t.finetune_built_) t.finetune_pool_ = data.split.labeled;
  std::map<std::uint64_t, const VideoSample*> by_id;
  for (const VideoSample& v : data.unlabeled) by_id[v.id] = &v;
  for (std::uint64_t i = 0; i < nadmitted; ++i) {
    const auto id = get<std::uint64_t>(is);
    const auto label = get<std::int32_t>(is);
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw std::runtime_error(path.string() + ": admitted id not in pool");
    VideoSample admitted = *it->second;
    admitted.label = label;
    admitted.label_visible = true;
    t.finetune_pool_.push_back(std::move(admitted));
    t.finetune_pool_ids_.push_back(id);
  }
  return t;
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

void write_metrics_csv(const std::vector<MetricsRow>& history,
                       const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "epoch,stage,lr,l_sup,l_ic,l_gc,total,val_top1\n";
  for (const MetricsRow& r : history) {
    os << r.epoch << ',' << stage_name(r.stage) << ',' << format_double(r.lr)
       << ',' << format_double(r.l_sup) << ',' << format_double(r.l_ic) << ','
       << format_double(r.l_gc) << ',' << format_double(r.total) << ','
       << format_double(r.val_top1) << '\n';
  }
}

RunResult run_pipeline(const Config& cfg, const std::filesystem::path& out_dir,
                       const DataBundle* shared_bundle) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  std::optional<DataBundle> own;
  if (!shared_bundle) {
    own = build_data_bundle(cfg);
    shared_bundle = &*own;
  }
  RunData data = prepare_run_data(cfg, *shared_bundle);

  save_config(cfg, out_dir / "config.json");
  {
    auto ids = [](const std::vector<VideoSample>& vs) {
      std::vector<std::uint64_t> out;
      out.reserve(vs.size());
      for (const auto& v : vs) out.push_back(v.id);
      return out;
    };
    nlohmann::json manifest{{"schema_version", 1},
                            {"labeled", ids(data.split.labeled)},
                            {"unlabeled", ids(data.unlabeled)},
                            {"test", ids(data.split.test)}};
    std::ofstream os(out_dir / "split.json");
    os << manifest.dump(2) << "\n";
  }

  Trainer trainer(cfg, data);
  Stage last_stage = trainer.stage();
  while (!trainer.done()) {
    trainer.run_epoch();
    if (trainer.stage() != last_stage) {
      save_checkpoint(trainer.encoder(),
                      out_dir / (std::string("ckpt_") + stage_name(last_stage) +
                                 ".bin"));
      last_stage = trainer.stage();
    }
  }
  save_checkpoint(trainer.encoder(), out_dir / "ckpt_final.bin");
  write_metrics_csv(trainer.history(), out_dir / "metrics.csv");

  RunResult result;
  result.history = trainer.history();
  result.pl_trend = trainer.pl_trend();
  result.finetune_admitted = trainer.finetune_admitted();
  result.finetune_admitted_empty = trainer.finetune_admitted_empty();
  result.report = evaluate(trainer.encoder(), data.split.test,
                           cfg.clips.fast_frames);
  result.report.config_fingerprint = config_fingerprint(cfg);
  result.report.seed = cfg.seed;
  if (!data.unlabeled.empty()) {
    result.final_pl = pseudo_label_quality(trainer.encoder(), data.unlabeled,
                                           cfg.clips.fast_frames);
    result.report.pseudo_label_accuracy = result.final_pl.overall;
  }

  {
    std::ofstream os(out_dir / "report.json");
    os << eval_report_to_json_text(result.report);
  }
  {
    nlohmann::json trend = nlohmann::json::array();
    for (const auto& s : result.pl_trend)
      trend.push_back({{"stage_fraction", s.stage_fraction},
                       {"overall_accuracy", s.overall_accuracy},
                       {"above_threshold_accuracy", s.above_threshold_accuracy},
                       {"admitted_fraction", s.admitted_fraction}});
    nlohmann::json sweep = nlohmann::json::array();
    for (const auto& p : result.final_pl.sweep)
      sweep.push_back({{"threshold", p.threshold},
                       {"accuracy", p.accuracy},
                       {"admitted_fraction", p.admitted_fraction}});
    double combined_first = 0.0, combined_last = 0.0;
    bool saw_combined = false;
    for (const auto& r : result.history) {
      if (r.stage == Stage::combined) {
        if (!saw_combined) combined_first = r.total;
        saw_combined = true;
        combined_last = r.total;
      }
    }
    nlohmann::json summary{
        {"schema_version", 1},
        {"variant", cfg.variant},
        {"seed", cfg.seed},
        {"config_fingerprint", result.report.config_fingerprint},
        {"top1", result.report.top1},
        {"pseudo_label", {{"overall", result.final_pl.overall}, {"sweep", sweep}}},
        {"pl_trend", trend},
        {"finetune",
         {{"admitted", result.finetune_admitted},
          {"admitted_empty", result.finetune_admitted_empty}}},
        {"combined_first_epoch_total", combined_first},
        {"combined_final_epoch_total", combined_last},
        {"epochs_run", result.history.size()}};
    std::ofstream os(out_dir / "summary.json");
    os << summary.dump(2) << "\n";
  }
  return result;
}

}  // namespace tcl
