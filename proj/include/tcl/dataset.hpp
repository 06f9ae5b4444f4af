#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "tcl/rng.hpp"
#include "tcl/tensor.hpp"

namespace tcl {

enum class Domain : std::uint8_t { target = 0, shifted = 1 };

const char* domain_name(Domain d);

// One synthetic speed-invariant sequence. The ground-truth label is always
// stored; label_visible marks whether the training code may look at it
// (hidden for the unlabeled pool, where it is kept only so evaluation can
// score pseudo-labels).
struct VideoSample {
  std::uint64_t id = 0;
  int label = -1;
  bool label_visible = true;
  Domain domain = Domain::target;
  std::uint32_t frames = 0, height = 0, width = 0;
  std::vector<float> pixels;  // frames*height*width, row-major, in [0,1]

  std::size_t frame_size() const { return std::size_t(height) * width; }
  const float* frame(std::size_t t) const { return pixels.data() + t * frame_size(); }
};

struct DatasetHeader {
  std::uint32_t classes = 0;
  std::uint32_t frames = 0, height = 0, width = 0;
  std::uint64_t count = 0;
  Domain domain = Domain::target;
  std::uint64_t seed = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<VideoSample> videos;
};

// Shape of the moving-dot videos. The dot carries a short decaying trail
// behind it; a lone symmetric dot would make directions theta and theta+180
// indistinguishable to any frame-order-blind encoder (opposite sweeps cover
// the same positions), so the trail is what makes the class readable from a
// single frame.
struct GeneratorConfig {
  std::uint32_t classes = 8;
  std::uint32_t frames = 32;
  std::uint32_t height = 16, width = 16;
  std::vector<double> speeds{1.0, 2.0, 3.0};  // pixels per frame
  double noise_sigma = 0.05;  // doubled in the shifted domain
  double blob_sigma = 1.5;
  double trail_decay = 0.55;
  std::uint32_t trail_length = 3;
  double brightness = 1.0;
};

// Deterministic in (config, domain, seed): same inputs, same bytes. Classes
// are the C canonical travel directions; speed is drawn per video and is the
// nuisance factor. The shifted domain inverts contrast and doubles noise.
Dataset generate_dataset(std::size_t num_videos, const GeneratorConfig& cfg,
                         Domain domain, std::uint64_t seed,
                         std::uint64_t id_offset = 0);

// Binary container: fixed header (classes, frames, H, W, count, domain,
// seed) followed by per-video records with float32 frame payloads. Format
// documented in the README; version-checked on load.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

struct DatasetSplit {
  std::vector<VideoSample> labeled;
  std::vector<VideoSample> unlabeled;  // labels hidden
  std::vector<VideoSample> test;
};

// Stratified split. Per class the videos are shuffled once by the seed; the
// test set is the fixed tail (independent of the fraction) and the labeled
// set is a prefix of the rest, so smaller fractions nest inside larger ones.
DatasetSplit split_labeled(const Dataset& ds, double label_fraction_pct,
                           std::size_t test_per_class, std::uint64_t seed,
                           bool stratified = true);

// One index drawn uniformly from each of K consecutive non-overlapping
// segments of [0, total); strictly increasing by construction.
std::vector<std::size_t> tsn_sample_indices(std::size_t total_frames,
                                            std::size_t segments, Rng& rng);
// Deterministic segment centers, for evaluation.
std::vector<std::size_t> tsn_center_indices(std::size_t total_frames,
                                            std::size_t segments);

struct Clip {
  const VideoSample* video = nullptr;
  std::vector<std::size_t> frame_indices;
};

struct ClipPair {
  Clip fast, slow;
  std::uint64_t source_id = 0;
};

Clip make_clip(const VideoSample& v, std::size_t segments, Rng& rng);
Clip make_center_clip(const VideoSample& v, std::size_t segments);
// Fast and slow views of one video; the two draws are independent.
ClipPair make_clip_pair(const VideoSample& v, std::size_t fast_frames,
                        std::size_t slow_frames, Rng& rng);

// frames x (H*W) matrix for the encoder.
Tensor clip_to_tensor(const Clip& clip);

struct LabeledClip {
  Clip clip;
  int label = -1;
};

struct Batch {
  std::vector<LabeledClip> labeled;
  std::vector<ClipPair> unlabeled;
};

struct BatchConfig {
  std::size_t batch_labeled = 8;  // B_l
  std::size_t mu = 3;             // unlabeled pairs per labeled clip
  std::size_t fast_frames = 8;    // M
  std::size_t slow_frames = 4;    // N
};

// Separate streams per purpose, so e.g. skipping all unlabeled work (mu or
// the contrastive weights at zero) leaves the labeled-side draws untouched.
struct BatchRngs {
  Rng labeled_shuffle;
  Rng labeled_clip;
  Rng unlabeled_pick;
  Rng unlabeled_clip;
};

// One epoch = one pass through the labeled data, in epoch-shuffled order,
// chunked into B_l-sized batches (the final chunk may be short). Each batch
// carries exactly mu * |chunk| unlabeled pairs, sampled uniformly without
// replacement within the batch.
class EpochBatches {
 public:
  EpochBatches(std::span<const VideoSample> labeled,
               std::span<const VideoSample> unlabeled, const BatchConfig& cfg,
               BatchRngs& rngs);
  std::optional<Batch> next();

 private:
  std::span<const VideoSample> labeled_;
  std::span<const VideoSample> unlabeled_;
  BatchConfig cfg_;
  BatchRngs* rngs_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// Pretraining pass: the pool is treated as unlabeled only, chunked into
// pairs_per_batch clip pairs per batch, one full pass per epoch.
class UnlabeledEpochBatches {
 public:
  UnlabeledEpochBatches(std::span<const VideoSample> pool,
                        std::size_t pairs_per_batch, const BatchConfig& cfg,
                        BatchRngs& rngs);
  std::optional<Batch> next();

 private:
  std::span<const VideoSample> pool_;
  std::size_t pairs_per_batch_;
  BatchConfig cfg_;
  BatchRngs* rngs_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct DomainMixSpec {
  double rho = 1.0;               // proportion taken from the target pool
  std::size_t total_unlabeled = 0;
};

// round(rho*n) target videos plus n - round(rho*n) shifted ones, sampled
// without replacement, labels hidden.
std::vector<VideoSample> mix_domains(std::span<const VideoSample> target_pool,
                                     std::span<const VideoSample> shifted_pool,
                                     const DomainMixSpec& spec, Rng& rng);

}  // namespace tcl
