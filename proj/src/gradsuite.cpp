#include "tcl/gradsuite.hpp"

#include <algorithm>

#include "tcl/encoder.hpp"
#include "tcl/gradcheck.hpp"
#include "tcl/losses.hpp"
#include "tcl/rng.hpp"

namespace tcl {

namespace {

struct Instance {
  Encoder encoder;
  std::vector<Tensor> labeled_clips;
  std::vector<int> labels;
  std::vector<Tensor> fast_clips, slow_clips;
  SimilarityConfig sim;
  LossWeights weights{9.0, 1.0};
};

Tensor random_clip(Rng& rng, std::size_t frames, std::size_t dim) {
  Tensor t = Tensor::zeros({frames, dim});
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

Instance make_instance(Rng& rng) {
  Instance inst;
  const std::size_t B = 2 + rng.uniform_int(3);        // {2, 3, 4}
  const std::size_t C = rng.uniform_int(2) ? 3 : 8;    // {3, 8}

  EncoderConfig ec;
  ec.input_dim = 16;
  ec.hidden = {6};
  ec.classes = C;
  inst.encoder = Encoder::init(ec, rng.next_u64());

  for (std::size_t i = 0; i < B; ++i) {
    inst.labeled_clips.push_back(random_clip(rng, 3, ec.input_dim));
    inst.labels.push_back(static_cast<int>(rng.uniform_int(C)));
    inst.fast_clips.push_back(random_clip(rng, 3, ec.input_dim));
    inst.slow_clips.push_back(random_clip(rng, 2, ec.input_dim));
  }
  return inst;
}

Tensor forward_sup(const Instance& inst) {
  std::vector<Tensor> logits;
  for (const Tensor& clip : inst.labeled_clips)
    logits.push_back(inst.encoder.encode_clip(clip));
  return supervised_loss(logits, inst.labels);
}

void encode_pairs(const Instance& inst, std::vector<Tensor>& fast,
                  std::vector<Tensor>& slow) {
  for (const Tensor& clip : inst.fast_clips)
    fast.push_back(inst.encoder.encode_clip(clip));
  for (const Tensor& clip : inst.slow_clips)
    slow.push_back(inst.encoder.encode_clip(clip));
}

Tensor forward_ic(const Instance& inst) {
  std::vector<Tensor> fast, slow;
  encode_pairs(inst, fast, slow);
  return instance_contrastive_loss(fast, slow, inst.sim);
}

Tensor forward_gc(const Instance& inst) {
  std::vector<Tensor> fast, slow;
  encode_pairs(inst, fast, slow);
  GroupSet groups = form_groups(fast, slow, assign_pseudo_labels(fast),
                                assign_pseudo_labels(slow));
  return group_contrastive_loss(groups, inst.sim).loss;
}

Tensor forward_total(const Instance& inst) {
  std::vector<Tensor> fast, slow;
  encode_pairs(inst, fast, slow);
  GroupSet groups = form_groups(fast, slow, assign_pseudo_labels(fast),
                                assign_pseudo_labels(slow));
  return total_loss(forward_sup(inst),
                    instance_contrastive_loss(fast, slow, inst.sim),
                    group_contrastive_loss(groups, inst.sim).loss,
                    inst.weights);
}

}  // namespace

bool GradSuiteResult::all_passed(double tolerance) const {
  return std::all_of(entries.begin(), entries.end(), [=](const auto& e) {
    return e.max_rel_error < tolerance;
  });
}

GradSuiteResult run_gradient_suite(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed, "gradsuite");

  using Forward = Tensor (*)(const Instance&);
  const std::pair<const char*, Forward> objectives[] = {
      {"supervised", &forward_sup},
      {"instance_contrastive", &forward_ic},
      {"group_contrastive", &forward_gc},
      {"total", &forward_total},
  };

  GradSuiteResult result;
  for (const auto& [name, forward] : objectives)
    result.entries.push_back({name, 0.0, instances});

  for (std::size_t i = 0; i < instances; ++i) {
    Instance inst = make_instance(rng);
    for (std::size_t o = 0; o < std::size(objectives); ++o) {
      auto fn = objectives[o].second;
      // a flipped pseudo-label between probes would measure across a jump of
      // the piecewise-smooth group loss; the gc path stays away from such
      // ties at generic random points
      for (const Tensor& param : inst.encoder.parameters()) {
        const double err = parameter_gradient_check(
            [&]() { return fn(inst); }, param);
        result.entries[o].max_rel_error =
            std::max(result.entries[o].max_rel_error, err);
      }
    }
  }
  return result;
}

}  // namespace tcl
