#include "tcl/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "dataset container assumes a little-endian host");

namespace tcl {

const char* domain_name(Domain d) {
  return d == Domain::target ? "target" : "shifted";
}

// ---------------------------------------------------------------------------
// generation
// ---------------------------------------------------------------------------

namespace {

double torus_delta(double a, double b, double period) {
  double d = a - b;
  while (d > period / 2) d -= period;
  while (d < -period / 2) d += period;
  return d;
}

}  // namespace

Dataset generate_dataset(std::size_t num_videos, const GeneratorConfig& cfg,
                         Domain domain, std::uint64_t seed,
                         std::uint64_t id_offset) {
  if (cfg.classes < 2) throw std::invalid_argument("generate_dataset: classes must be >= 2");
  if (cfg.frames < 8) throw std::invalid_argument("generate_dataset: need at least 8 frames");
  for (double s : cfg.speeds)
    if (!(s > 0)) throw std::invalid_argument("generate_dataset: speeds must be positive");
  if (cfg.speeds.empty()) throw std::invalid_argument("generate_dataset: empty speed set");
  const double extent = 6.0 * cfg.blob_sigma;
  if (extent > std::min(cfg.height, cfg.width))
    throw std::invalid_argument("generate_dataset: blob larger than frame");

  const double W = cfg.width, H = cfg.height;
  const double noise = domain == Domain::shifted ? 2.0 * cfg.noise_sigma
                                                 : cfg.noise_sigma;
  const double inv_two_sigma2 = 1.0 / (2.0 * cfg.blob_sigma * cfg.blob_sigma);
  const double cutoff2 = 16.0 * cfg.blob_sigma * cfg.blob_sigma;  // 4 sigma

  Rng rng(seed, domain == Domain::target ? "gen/target" : "gen/shifted");

  Dataset ds;
  ds.header = {cfg.classes, cfg.frames, cfg.height, cfg.width,
               num_videos,  domain,     seed};
  ds.videos.reserve(num_videos);

  for (std::size_t v = 0; v < num_videos; ++v) {
    const int label = static_cast<int>(rng.uniform_int(cfg.classes));
    const double speed = cfg.speeds[rng.uniform_int(cfg.speeds.size())];
    const double theta =
        2.0 * std::numbers::pi * label / static_cast<double>(cfg.classes);
    const double vx = speed * std::cos(theta);
    const double vy = speed * std::sin(theta);
    const double x0 = rng.uniform(0.0, W);
    const double y0 = rng.uniform(0.0, H);

    VideoSample sample;
    sample.id = id_offset + v;
    sample.label = label;
    sample.domain = domain;
    sample.frames = cfg.frames;
    sample.height = cfg.height;
    sample.width = cfg.width;
    sample.pixels.resize(std::size_t(cfg.frames) * cfg.height * cfg.width);

    for (std::uint32_t t = 0; t < cfg.frames; ++t) {
      float* frame = sample.pixels.data() + std::size_t(t) * cfg.height * cfg.width;
      for (std::uint32_t row = 0; row < cfg.height; ++row) {
        for (std::uint32_t col = 0; col < cfg.width; ++col) {
          double intensity = 0.0;
          double gain = cfg.brightness;
          // head plus trail of ghosts at earlier positions; positions before
          // frame 0 extrapolate backwards so the shape is constant over time
          for (std::uint32_t k = 0; k <= cfg.trail_length; ++k) {
            const double tt = static_cast<double>(t) - static_cast<double>(k);
            const double px = x0 + vx * tt;
            const double py = y0 + vy * tt;
            const double dx = torus_delta(col, std::fmod(std::fmod(px, W) + W, W), W);
            const double dy = torus_delta(row, std::fmod(std::fmod(py, H) + H, H), H);
            const double d2 = dx * dx + dy * dy;
            if (d2 <= cutoff2) intensity += gain * std::exp(-d2 * inv_two_sigma2);
            gain *= cfg.trail_decay;
          }
          double value = domain == Domain::shifted ? 1.0 - intensity : intensity;
          value += noise * rng.normal();
          value = std::clamp(value, 0.0, 1.0);
          frame[std::size_t(row) * cfg.width + col] = static_cast<float>(value);
        }
      }
    }
    ds.videos.push_back(std::move(sample));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// container
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'C', 'L', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("dataset file truncated");
  return v;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, ds.header.classes);
  write_pod(os, ds.header.frames);
  write_pod(os, ds.header.height);
  write_pod(os, ds.header.width);
  write_pod(os, std::uint64_t{ds.videos.size()});
  write_pod(os, static_cast<std::uint8_t>(ds.header.domain));
  write_pod(os, ds.header.seed);
  for (const VideoSample& v : ds.videos) {
    write_pod(os, v.id);
    write_pod(os, std::int32_t{v.label});
    write_pod(os, static_cast<std::uint8_t>(v.label_visible));
    write_pod(os, static_cast<std::uint8_t>(v.domain));
    os.write(reinterpret_cast<const char*>(v.pixels.data()),
             static_cast<std::streamsize>(v.pixels.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path.string() + ": not a TCLD dataset file");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion)
    throw std::runtime_error(path.string() + ": unsupported dataset version " +
                             std::to_string(version));
  Dataset ds;
  ds.header.classes = read_pod<std::uint32_t>(is);
  ds.header.frames = read_pod<std::uint32_t>(is);
  ds.header.height = read_pod<std::uint32_t>(is);
  ds.header.width = read_pod<std::uint32_t>(is);
  ds.header.count = read_pod<std::uint64_t>(is);
  ds.header.domain = static_cast<Domain>(read_pod<std::uint8_t>(is));
  ds.header.seed = read_pod<std::uint64_t>(is);
  ds.videos.resize(ds.header.count);
  const std::size_t frame_bytes = std::size_t(ds.header.frames) *
                                  ds.header.height * ds.header.width;
  for (VideoSample& v : ds.videos) {
    v.id = read_pod<std::uint64_t>(is);
    v.label = read_pod<std::int32_t>(is);
    v.label_visible = read_pod<std::uint8_t>(is) != 0;
    v.domain = static_cast<Domain>(read_pod<std::uint8_t>(is));
    v.frames = ds.header.frames;
    v.height = ds.header.height;
    v.width = ds.header.width;
    v.pixels.resize(frame_bytes);
    is.read(reinterpret_cast<char*>(v.pixels.data()),
            static_cast<std::streamsize>(frame_bytes * sizeof(float)));
    if (!is) throw std::runtime_error(path.string() + ": truncated payload");
  }
  return ds;
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

DatasetSplit split_labeled(const Dataset& ds, double label_fraction_pct,
                           std::size_t test_per_class, std::uint64_t seed,
                           bool stratified) {
  if (!(label_fraction_pct > 0.0) || label_fraction_pct > 100.0)
    throw std::invalid_argument("split_labeled: fraction must be in (0, 100]");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.videos.size(); ++i)
    by_class[ds.videos[i].label].push_back(i);

  DatasetSplit split;
  std::vector<std::size_t> train_pool;  // indices left after the test tail

  for (auto& [label, indices] : by_class) {
    Rng rng(seed, "split/class" + std::to_string(label));
    rng.shuffle(indices);
    if (indices.size() <= test_per_class)
      throw std::invalid_argument("split_labeled: class " +
                                  std::to_string(label) +
                                  " too small for the test tail");
    // fixed tail -> the test set does not depend on the labeled fraction
    for (std::size_t i = indices.size() - test_per_class; i < indices.size(); ++i)
      split.test.push_back(ds.videos[indices[i]]);
    indices.resize(indices.size() - test_per_class);

    if (stratified) {
      const auto want = static_cast<std::size_t>(
          std::lround(static_cast<double>(indices.size()) *
                      label_fraction_pct / 100.0));
      if (want == 0)
        throw std::invalid_argument(
            "split_labeled: fraction yields zero labeled samples for class " +
            std::to_string(label));
      for (std::size_t i = 0; i < indices.size(); ++i) {
        if (i < want)
          split.labeled.push_back(ds.videos[indices[i]]);
        else {
          split.unlabeled.push_back(ds.videos[indices[i]]);
          split.unlabeled.back().label_visible = false;
        }
      }
    } else {
      train_pool.insert(train_pool.end(), indices.begin(), indices.end());
    }
  }

  if (!stratified) {
    Rng rng(seed, "split/flat");
    rng.shuffle(train_pool);
    const auto want = static_cast<std::size_t>(std::lround(
        static_cast<double>(train_pool.size()) * label_fraction_pct / 100.0));
    if (want == 0)
      throw std::invalid_argument("split_labeled: fraction yields zero labeled samples");
    for (std::size_t i = 0; i < train_pool.size(); ++i) {
      if (i < want)
        split.labeled.push_back(ds.videos[train_pool[i]]);
      else {
        split.unlabeled.push_back(ds.videos[train_pool[i]]);
        split.unlabeled.back().label_visible = false;
      }
    }
  }
  return split;
}

// ---------------------------------------------------------------------------
// clip sampling
// ---------------------------------------------------------------------------

std::vector<std::size_t> tsn_sample_indices(std::size_t total_frames,
                                            std::size_t segments, Rng& rng) {
  if (segments == 0 || segments > total_frames)
    throw std::invalid_argument("tsn_sample_indices: need 1 <= K <= frames");
  std::vector<std::size_t> out(segments);
  for (std::size_t i = 0; i < segments; ++i) {
    const std::size_t lo = i * total_frames / segments;
    const std::size_t hi = (i + 1) * total_frames / segments;
    out[i] = lo + rng.uniform_int(hi - lo);
  }
  return out;
}

std::vector<std::size_t> tsn_center_indices(std::size_t total_frames,
                                            std::size_t segments) {
  if (segments == 0 || segments > total_frames)
    throw std::invalid_argument("tsn_center_indices: need 1 <= K <= frames");
  std::vector<std::size_t> out(segments);
  for (std::size_t i = 0; i < segments; ++i) {
    const std::size_t lo = i * total_frames / segments;
    const std::size_t hi = (i + 1) * total_frames / segments;
    out[i] = (lo + hi) / 2;
  }
  return out;
}

Clip make_clip(const VideoSample& v, std::size_t segments, Rng& rng) {
  return Clip{&v, tsn_sample_indices(v.frames, segments, rng)};
}

Clip make_center_clip(const VideoSample& v, std::size_t segments) {
  return Clip{&v, tsn_center_indices(v.frames, segments)};
}

ClipPair make_clip_pair(const VideoSample& v, std::size_t fast_frames,
                        std::size_t slow_frames, Rng& rng) {
  if (slow_frames >= fast_frames)
    throw std::invalid_argument("make_clip_pair: need N < M");
  ClipPair pair;
  pair.fast = make_clip(v, fast_frames, rng);
  pair.slow = make_clip(v, slow_frames, rng);
  pair.source_id = v.id;
  return pair;
}

Tensor clip_to_tensor(const Clip& clip) {
  const VideoSample& v = *clip.video;
  const std::size_t px = v.frame_size();
  Tensor t = Tensor::zeros({clip.frame_indices.size(), px});
  double* out = t.values().data();
  for (std::size_t f = 0; f < clip.frame_indices.size(); ++f) {
    const float* frame = v.frame(clip.frame_indices[f]);
    for (std::size_t i = 0; i < px; ++i) out[f * px + i] = frame[i];
  }
  return t;
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

EpochBatches::EpochBatches(std::span<const VideoSample> labeled,
                           std::span<const VideoSample> unlabeled,
                           const BatchConfig& cfg, BatchRngs& rngs)
    : labeled_(labeled), unlabeled_(unlabeled), cfg_(cfg), rngs_(&rngs) {
  if (labeled_.empty()) throw std::invalid_argument("EpochBatches: no labeled data");
  if (cfg_.mu > 0 && unlabeled_.size() < cfg_.mu * cfg_.batch_labeled)
    throw std::invalid_argument(
        "EpochBatches: unlabeled pool smaller than mu * B_l");
  order_.resize(labeled_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  rngs_->labeled_shuffle.shuffle(order_);
}

std::optional<Batch> EpochBatches::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t take = std::min(cfg_.batch_labeled, order_.size() - cursor_);
  Batch batch;
  batch.labeled.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const VideoSample& v = labeled_[order_[cursor_ + i]];
    batch.labeled.push_back(
        {make_clip(v, cfg_.fast_frames, rngs_->labeled_clip), v.label});
  }
  cursor_ += take;

  if (cfg_.mu > 0) {
    const std::size_t want = cfg_.mu * take;
    // without replacement within the batch
    std::vector<std::size_t> pick(unlabeled_.size());
    for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
    for (std::size_t i = 0; i < want; ++i) {
      const std::size_t j =
          i + rngs_->unlabeled_pick.uniform_int(pick.size() - i);
      std::swap(pick[i], pick[j]);
      batch.unlabeled.push_back(make_clip_pair(unlabeled_[pick[i]],
                                               cfg_.fast_frames,
                                               cfg_.slow_frames,
                                               rngs_->unlabeled_clip));
    }
  }
  return batch;
}

UnlabeledEpochBatches::UnlabeledEpochBatches(std::span<const VideoSample> pool,
                                             std::size_t pairs_per_batch,
                                             const BatchConfig& cfg,
                                             BatchRngs& rngs)
    : pool_(pool), pairs_per_batch_(pairs_per_batch), cfg_(cfg), rngs_(&rngs) {
  if (pool_.empty()) throw std::invalid_argument("UnlabeledEpochBatches: empty pool");
  if (pairs_per_batch_ < 2)
    throw std::invalid_argument("UnlabeledEpochBatches: need at least 2 pairs per batch");
  order_.resize(pool_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  rngs_->unlabeled_pick.shuffle(order_);
}

std::optional<Batch> UnlabeledEpochBatches::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  std::size_t take = std::min(pairs_per_batch_, order_.size() - cursor_);
  Batch batch;
  for (std::size_t i = 0; i < take; ++i) {
    const VideoSample& v = pool_[order_[cursor_ + i]];
    batch.unlabeled.push_back(make_clip_pair(
        v, cfg_.fast_frames, cfg_.slow_frames, rngs_->unlabeled_clip));
  }
  cursor_ += take;
  return batch;
}

// ---------------------------------------------------------------------------
// domain mixing
// ---------------------------------------------------------------------------

std::vector<VideoSample> mix_domains(std::span<const VideoSample> target_pool,
                                     std::span<const VideoSample> shifted_pool,
                                     const DomainMixSpec& spec, Rng& rng) {
  if (spec.rho < 0.0 || spec.rho > 1.0)
    throw std::invalid_argument("mix_domains: rho must be in [0, 1]");
  const auto n = spec.total_unlabeled;
  const auto from_target = static_cast<std::size_t>(
      std::lround(spec.rho * static_cast<double>(n)));
  const auto from_shifted = n - from_target;
  if (from_target > target_pool.size() || from_shifted > shifted_pool.size())
    throw std::invalid_argument("mix_domains: pool too small for requested mix");

  auto sample_from = [&rng](std::span<const VideoSample> pool, std::size_t k,
                            std::vector<VideoSample>& out) {
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.uniform_int(idx.size() - i);
      std::swap(idx[i], idx[j]);
      out.push_back(pool[idx[i]]);
      out.back().label_visible = false;
    }
  };

  std::vector<VideoSample> mixed;
  mixed.reserve(n);
  sample_from(target_pool, from_target, mixed);
  sample_from(shifted_pool, from_shifted, mixed);
  return mixed;
}

}  // namespace tcl
