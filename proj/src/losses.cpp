#include "tcl/losses.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>

namespace tcl {

namespace {

void check_config(const SimilarityConfig& cfg) {
  if (!(cfg.tau > 0.0))
    throw std::invalid_argument("SimilarityConfig: tau must be > 0");
  if (!(cfg.epsilon > 0.0))
    throw std::invalid_argument("SimilarityConfig: epsilon must be > 0");
}

Tensor normalize(const Tensor& v, const SimilarityConfig& cfg) {
  return div_by_scalar(v, clamp_min(l2_norm(v), cfg.epsilon));
}

// Shared core of both contrastive losses. Entries are (id, representation);
// the positive for an anchor is the same id in the other list, negatives are
// every entry with a different id in either list. All pairwise cosines come
// from one matmul of the row-normalized representations, and each anchor
// term is -log(pos / (pos + sum(neg))) = lse(row minus self) - pos, with the
// log-sum-exp over the anchor's row excluding only its own diagonal entry.
struct NtXentResult {
  Tensor loss;
  std::size_t anchors = 0;
  bool degenerate = false;
};

NtXentResult nt_xent_bidirectional(
    const std::vector<std::pair<int, Tensor>>& fast,
    const std::vector<std::pair<int, Tensor>>& slow,
    const SimilarityConfig& cfg) {
  check_config(cfg);
  const std::size_t nf = fast.size(), ns = slow.size(), n = nf + ns;

  // anchor -> positive index pairs, both directions
  std::vector<std::pair<std::size_t, std::size_t>> anchors;
  for (std::size_t i = 0; i < nf; ++i) {
    for (std::size_t j = 0; j < ns; ++j) {
      if (fast[i].first == slow[j].first) {
        anchors.emplace_back(i, nf + j);
        anchors.emplace_back(nf + j, i);
      }
    }
  }
  if (anchors.empty() || n < 3)
    return {Tensor::scalar(0.0), 0, true};  // no positives or no negatives

  std::vector<Tensor> rows;
  rows.reserve(n);
  for (const auto& [id, rep] : fast)
    rows.push_back(reshape(normalize(rep, cfg), {1, rep.size()}));
  for (const auto& [id, rep] : slow)
    rows.push_back(reshape(normalize(rep, cfg), {1, rep.size()}));
  Tensor stacked = concat(rows);
  Tensor logits = scale(matmul(stacked, transpose(stacked)), 1.0 / cfg.tau);

  std::vector<Tensor> terms;
  terms.reserve(anchors.size());
  for (auto [a, p] : anchors) {
    Tensor row = reshape(slice(logits, a, a + 1), {n});
    std::vector<Tensor> denom_parts;
    if (a > 0) denom_parts.push_back(slice(row, 0, a));
    if (a + 1 < n) denom_parts.push_back(slice(row, a + 1, n));
    Tensor denom = log_sum_exp(concat(denom_parts));
    terms.push_back(sub(denom, slice(row, p, p + 1)));
  }
  Tensor loss = mean_axis(concat(terms), 0);
  return {loss, anchors.size(), false};
}

}  // namespace

Tensor cosine_similarity(const Tensor& u, const Tensor& v,
                         const SimilarityConfig& cfg) {
  check_config(cfg);
  if (u.shape() != v.shape() || u.shape().size() != 1)
    throw ShapeError("cosine_similarity: 1-d tensors of equal length required");
  Tensor nu = clamp_min(l2_norm(u), cfg.epsilon);
  Tensor nv = clamp_min(l2_norm(v), cfg.epsilon);
  return div_by_scalar(div_by_scalar(dot(u, v), nu), nv);
}

Tensor similarity(const Tensor& u, const Tensor& v,
                  const SimilarityConfig& cfg) {
  return exp(scale(cosine_similarity(u, v, cfg), 1.0 / cfg.tau));
}

Tensor supervised_loss(const Tensor& logits, int label) {
  if (logits.shape().size() != 1)
    throw ShapeError("supervised_loss: logits must be 1-d");
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw std::out_of_range("supervised_loss: label " + std::to_string(label) +
                            " out of range for " + std::to_string(logits.size()) +
                            " classes");
  const auto l = static_cast<std::size_t>(label);
  return sub(log_sum_exp(logits), slice(logits, l, l + 1));
}

Tensor supervised_loss(std::span<const Tensor> logits,
                       std::span<const int> labels) {
  if (logits.empty() || logits.size() != labels.size())
    throw std::invalid_argument("supervised_loss: batch size mismatch");
  std::vector<Tensor> terms;
  terms.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i)
    terms.push_back(supervised_loss(logits[i], labels[i]));
  return mean_axis(concat(terms), 0);
}

Tensor instance_contrastive_loss(std::span<const Tensor> fast_reps,
                                 std::span<const Tensor> slow_reps,
                                 const SimilarityConfig& cfg) {
  if (fast_reps.size() != slow_reps.size())
    throw std::invalid_argument(
        "instance_contrastive_loss: pathway batch sizes differ");
  const std::size_t B = fast_reps.size();
  if (B < 2)
    throw std::invalid_argument(
        "instance_contrastive_loss: need B >= 2, no negatives exist");
  std::vector<std::pair<int, Tensor>> fast, slow;
  fast.reserve(B);
  slow.reserve(B);
  for (std::size_t i = 0; i < B; ++i) {
    fast.emplace_back(static_cast<int>(i), fast_reps[i]);
    slow.emplace_back(static_cast<int>(i), slow_reps[i]);
  }
  return nt_xent_bidirectional(fast, slow, cfg).loss;
}

std::vector<int> assign_pseudo_labels(std::span<const Tensor> reps) {
  std::vector<int> labels;
  labels.reserve(reps.size());
  for (const Tensor& r : reps) {
    const auto& v = r.values();
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] > v[best]) best = i;
    labels.push_back(static_cast<int>(best));
  }
  return labels;
}

GroupSet form_groups(std::span<const Tensor> fast_reps,
                     std::span<const Tensor> slow_reps,
                     std::span<const int> fast_labels,
                     std::span<const int> slow_labels) {
  if (fast_reps.size() != fast_labels.size() ||
      slow_reps.size() != slow_labels.size())
    throw std::invalid_argument("form_groups: label/representation mismatch");

  auto build = [](std::span<const Tensor> reps, std::span<const int> labels) {
    std::map<int, std::vector<Tensor>> members;
    for (std::size_t i = 0; i < reps.size(); ++i)
      members[labels[i]].push_back(reps[i]);
    std::map<int, Group> groups;
    for (auto& [label, reps_l] : members) {
      const std::size_t dim = reps_l.front().size();
      Tensor mean = reps_l.size() == 1
                        ? reps_l.front()
                        : mean_axis(reshape(concat(reps_l),
                                            {reps_l.size(), dim}),
                                    0);
      groups.emplace(label, Group{reps_l.size(), mean});
    }
    return groups;
  };

  GroupSet out;
  out.fast = build(fast_reps, fast_labels);
  out.slow = build(slow_reps, slow_labels);
  return out;
}

GroupLossResult group_contrastive_loss(const GroupSet& groups,
                                       const SimilarityConfig& cfg) {
  std::vector<std::pair<int, Tensor>> fast, slow;
  for (const auto& [label, group] : groups.fast)
    fast.emplace_back(label, group.mean);
  for (const auto& [label, group] : groups.slow)
    slow.emplace_back(label, group.mean);
  NtXentResult res = nt_xent_bidirectional(fast, slow, cfg);
  return {res.loss, res.degenerate};
}

Tensor total_loss(const Tensor& sup, const Tensor& ic, const Tensor& gc,
                  const LossWeights& w) {
  if (w.gamma < 0.0 || w.beta < 0.0)
    throw std::invalid_argument("total_loss: weights must be non-negative");
  for (const Tensor* t : {&sup, &ic, &gc})
    if (t->size() != 1)
      throw ShapeError("total_loss: components must be scalars");
  return add(sup, add(scale(ic, w.gamma), scale(gc, w.beta)));
}

}  // namespace tcl
