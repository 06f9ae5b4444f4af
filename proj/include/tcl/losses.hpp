#pragma once

#include <map>
#include <span>
#include <vector>

#include "tcl/tensor.hpp"

namespace tcl {

struct SimilarityConfig {
  double tau = 0.5;        // temperature
  double epsilon = 1e-12;  // lower clamp on vector norms
};

// Cosine of u and v with norms clamped below by epsilon, so a zero vector
// yields similarity 0 instead of NaN.
Tensor cosine_similarity(const Tensor& u, const Tensor& v,
                         const SimilarityConfig& cfg);

// h(u, v) = exp(cos(u, v) / tau); always in [e^(-1/tau), e^(1/tau)].
Tensor similarity(const Tensor& u, const Tensor& v,
                  const SimilarityConfig& cfg);

// Cross-entropy -log softmax(logits)[label].
Tensor supervised_loss(const Tensor& logits, int label);
// Mean over a labeled minibatch.
Tensor supervised_loss(std::span<const Tensor> logits,
                       std::span<const int> labels);

// Symmetric NT-Xent over the fast/slow representations of B videos: anchor i
// in one pathway pairs with i in the other, and every representation of a
// different video in either pathway is a negative (2(B-1) of them). Terms
// are computed in log space via log-sum-exp and averaged over all 2B
// anchors. Throws when B < 2 (no negatives exist).
Tensor instance_contrastive_loss(std::span<const Tensor> fast_reps,
                                 std::span<const Tensor> slow_reps,
                                 const SimilarityConfig& cfg);

// Argmax class per representation, ties to the lowest index. Plain ints:
// the labels never carry gradient.
std::vector<int> assign_pseudo_labels(std::span<const Tensor> reps);

struct Group {
  std::size_t count = 0;  // T, members in this pathway with this pseudo-label
  Tensor mean;            // gradient flows through the member average
};

struct GroupSet {
  std::map<int, Group> fast, slow;
};

GroupSet form_groups(std::span<const Tensor> fast_reps,
                     std::span<const Tensor> slow_reps,
                     std::span<const int> fast_labels,
                     std::span<const int> slow_labels);

struct GroupLossResult {
  Tensor loss;
  bool degenerate = false;  // no positive pair had a negative; loss is 0
};

// Same contrastive form over group means: labels present in both pathways
// are positives, groups with any other label in either pathway are the
// negatives. Degenerate batches return exactly 0 with the flag set.
GroupLossResult group_contrastive_loss(const GroupSet& groups,
                                       const SimilarityConfig& cfg);

struct LossWeights {
  double gamma = 9.0;  // instance-contrastive weight
  double beta = 1.0;   // group-contrastive weight
};

// sup + gamma * ic + beta * gc.
Tensor total_loss(const Tensor& sup, const Tensor& ic, const Tensor& gc,
                  const LossWeights& w);

}  // namespace tcl
