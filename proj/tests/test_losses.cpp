#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "tcl/losses.hpp"
#include "tcl/rng.hpp"
#include "tcl/tensor.hpp"

using namespace tcl;

// ---------------------------------------------------------------------------
// Brute-force oracle: literal ratio-of-exponentials evaluation of the
// similarity kernel and both contrastive objectives, independent of the
// tensor ops and of the log-sum-exp path used by the implementation.
// ---------------------------------------------------------------------------
namespace oracle {

double h(const std::vector<double>& u, const std::vector<double>& v,
         double tau) {
  double uv = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  const double cos = uv / (std::sqrt(uu) * std::sqrt(vv));
  return std::exp(cos / tau);
}

using Reps = std::vector<std::vector<double>>;

double instance_loss(const Reps& fast, const Reps& slow, double tau) {
  const std::size_t B = fast.size();
  double total = 0;
  for (std::size_t i = 0; i < B; ++i) {
    // anchor in the fast pathway
    double pos = h(fast[i], slow[i], tau);
    double denom = pos;
    for (std::size_t k = 0; k < B; ++k) {
      if (k == i) continue;
      denom += h(fast[i], slow[k], tau) + h(fast[i], fast[k], tau);
    }
    total += -std::log(pos / denom);
    // mirrored anchor in the slow pathway
    pos = h(slow[i], fast[i], tau);
    denom = pos;
    for (std::size_t k = 0; k < B; ++k) {
      if (k == i) continue;
      denom += h(slow[i], fast[k], tau) + h(slow[i], slow[k], tau);
    }
    total += -std::log(pos / denom);
  }
  return total / static_cast<double>(2 * B);
}

double group_loss(const Reps& fast, const Reps& slow,
                  const std::vector<int>& fast_labels,
                  const std::vector<int>& slow_labels, double tau) {
  auto means = [](const Reps& reps, const std::vector<int>& labels) {
    std::map<int, std::vector<double>> sum;
    std::map<int, int> count;
    for (std::size_t i = 0; i < reps.size(); ++i) {
      auto& acc = sum[labels[i]];
      if (acc.empty()) acc.assign(reps[i].size(), 0.0);
      for (std::size_t d = 0; d < reps[i].size(); ++d) acc[d] += reps[i][d];
      count[labels[i]]++;
    }
    std::map<int, std::vector<double>> mean;
    for (auto& [l, acc] : sum) {
      for (double& x : acc) x /= count[l];
      mean[l] = acc;
    }
    return mean;
  };
  auto mf = means(fast, fast_labels);
  auto ms = means(slow, slow_labels);

  auto term = [&](const std::vector<double>& anchor, int l,
                  const std::vector<double>& positive) {
    double pos = h(anchor, positive, tau);
    double denom = pos;
    for (auto& [m, rep] : mf)
      if (m != l) denom += h(anchor, rep, tau);
    for (auto& [m, rep] : ms)
      if (m != l) denom += h(anchor, rep, tau);
    return -std::log(pos / denom);
  };

  double total = 0;
  int anchors = 0;
  bool any_negative = false;
  for (auto& [l, rf] : mf) {
    auto it = ms.find(l);
    if (it == ms.end()) continue;
    total += term(rf, l, it->second) + term(it->second, l, rf);
    anchors += 2;
    if (mf.size() + ms.size() > 2) any_negative = true;
  }
  if (anchors == 0 || !any_negative) return 0.0;
  return total / anchors;
}

}  // namespace oracle

namespace {

std::vector<Tensor> random_reps(Rng& rng, std::size_t count, std::size_t dim) {
  std::vector<Tensor> reps;
  for (std::size_t i = 0; i < count; ++i) {
    Tensor t = Tensor::zeros({dim});
    for (double& v : t.values()) v = rng.normal();
    reps.push_back(t);
  }
  return reps;
}

oracle::Reps to_raw(const std::vector<Tensor>& reps) {
  oracle::Reps out;
  for (const Tensor& t : reps) out.push_back(t.values());
  return out;
}

}  // namespace

TEST_CASE("similarity kernel closed forms at tau = 0.5") {
  SimilarityConfig cfg;  // tau 0.5
  Tensor u = Tensor::from({3}, {0.3, -1.2, 0.7});
  CHECK(std::abs(similarity(u, u, cfg).item() - std::exp(2.0)) < 1e-12);
  Tensor neg = scale(u, -1.0);
  CHECK(std::abs(similarity(u, neg, cfg).item() - std::exp(-2.0)) < 1e-12);
  Tensor a = Tensor::from({2}, {1.0, 0.0});
  Tensor b = Tensor::from({2}, {0.0, -2.5});
  CHECK(std::abs(similarity(a, b, cfg).item() - 1.0) < 1e-12);
  CHECK_THROWS_AS(similarity(u, a, cfg), ShapeError);
}

TEST_CASE("zero vectors give cosine 0, not NaN") {
  SimilarityConfig cfg;
  Tensor z = Tensor::zeros({4});
  Tensor v = Tensor::from({4}, {1, 2, 3, 4});
  CHECK(cosine_similarity(z, v, cfg).item() == 0.0);
  CHECK(similarity(z, v, cfg).item() == 1.0);
}

TEST_CASE("supervised loss") {
  SUBCASE("uniform logits give ln C") {
    Tensor logits = Tensor::full({5}, 0.37);
    CHECK(supervised_loss(logits, 2).item() ==
          doctest::Approx(std::log(5.0)).epsilon(1e-12));
  }
  SUBCASE("confident correct logits drive the loss to zero") {
    Tensor logits = Tensor::from({3}, {40.0, 0.0, 0.0});
    CHECK(supervised_loss(logits, 0).item() < 1e-12);
  }
  SUBCASE("worked example") {
    Tensor logits = Tensor::from({3}, {1, 2, 3});
    const double expect =
        std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 1.0;
    CHECK(supervised_loss(logits, 0).item() ==
          doctest::Approx(expect).epsilon(1e-12));
    CHECK(expect == doctest::Approx(2.4076).epsilon(1e-4));
  }
  SUBCASE("label out of range") {
    Tensor logits = Tensor::from({3}, {1, 2, 3});
    CHECK_THROWS_AS(supervised_loss(logits, 3), std::out_of_range);
    CHECK_THROWS_AS(supervised_loss(logits, -1), std::out_of_range);
  }
  SUBCASE("batch form averages") {
    std::vector<Tensor> logits{Tensor::from({3}, {1, 2, 3}),
                               Tensor::full({3}, 0.0)};
    std::vector<int> labels{0, 1};
    const double expect =
        (std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 1.0 +
         std::log(3.0)) /
        2.0;
    CHECK(supervised_loss(logits, labels).item() ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("instance loss: orthonormal B=2 case has the closed-form value") {
  SimilarityConfig cfg;  // tau = 0.5
  std::vector<Tensor> fast{Tensor::from({2}, {1, 0}), Tensor::from({2}, {0, 1})};
  std::vector<Tensor> slow{Tensor::from({2}, {1, 0}), Tensor::from({2}, {0, 1})};
  // every anchor: -log(e^2 / (e^2 + 1 + 1)) = log(1 + 2 e^-2)
  const double expect = std::log(1.0 + 2.0 * std::exp(-2.0));
  CHECK(instance_contrastive_loss(fast, slow, cfg).item() ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("instance loss matches the brute-force ratio evaluation") {
  Rng rng(314);
  SimilarityConfig cfg;
  for (std::size_t B : {2u, 3u, 4u, 7u}) {
    for (int rep = 0; rep < 10; ++rep) {
      auto fast = random_reps(rng, B, 5);
      auto slow = random_reps(rng, B, 5);
      const double got = instance_contrastive_loss(fast, slow, cfg).item();
      const double want = oracle::instance_loss(to_raw(fast), to_raw(slow), cfg.tau);
      // ratio route vs log-sum-exp route
      CHECK(std::abs(got - want) < 1e-9);
    }
  }
}

TEST_CASE("instance loss rejects B < 2") {
  SimilarityConfig cfg;
  std::vector<Tensor> one{Tensor::from({2}, {1, 0})};
  CHECK_THROWS_AS(instance_contrastive_loss(one, one, cfg),
                  std::invalid_argument);
}

TEST_CASE("instance loss invariances and positivity") {
  Rng rng(2718);
  SimilarityConfig cfg;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t B = 2 + rng.uniform_int(4);
    auto fast = random_reps(rng, B, 6);
    auto slow = random_reps(rng, B, 6);
    const double base = instance_contrastive_loss(fast, slow, cfg).item();

    CHECK(base > 0.0);
    const double bound =
        std::log(1.0 + 2.0 * static_cast<double>(B - 1) * std::exp(2.0 / cfg.tau));
    CHECK(base <= bound);

    // positive uniform scaling
    const double c = 3.7;
    std::vector<Tensor> fs, ss;
    for (auto& t : fast) fs.push_back(scale(t, c));
    for (auto& t : slow) ss.push_back(scale(t, c));
    CHECK(std::abs(instance_contrastive_loss(fs, ss, cfg).item() - base) < 1e-10);

    // batch permutation (applied to both pathways together)
    std::vector<std::size_t> perm(B);
    for (std::size_t i = 0; i < B; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<Tensor> fp, sp;
    for (std::size_t i : perm) {
      fp.push_back(fast[i]);
      sp.push_back(slow[i]);
    }
    CHECK(std::abs(instance_contrastive_loss(fp, sp, cfg).item() - base) < 1e-12);
  }
}

TEST_CASE("pseudo-label assignment") {
  std::vector<Tensor> reps{Tensor::from({3}, {0.1, 0.9, 0.3}),
                           Tensor::full({3}, 0.5),
                           Tensor::from({3}, {2.0, 2.0, 1.0})};
  auto labels = assign_pseudo_labels(reps);
  CHECK(labels == std::vector<int>{1, 0, 0});

  // argmax invariant under positive scaling
  Rng rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    auto r = random_reps(rng, 4, 5);
    auto a = assign_pseudo_labels(r);
    std::vector<Tensor> scaled;
    for (auto& t : r) scaled.push_back(scale(t, 0.1 + rng.uniform() * 10));
    CHECK(assign_pseudo_labels(scaled) == a);
  }
}

TEST_CASE("group formation follows the member average") {
  Tensor a = Tensor::from({2}, {1.0, 3.0});
  Tensor b = Tensor::from({2}, {5.0, 7.0});
  Tensor c = Tensor::from({2}, {-2.0, 0.5});
  std::vector<Tensor> fast{a, b, c};
  std::vector<int> fast_labels{2, 2, 0};
  std::vector<Tensor> slow{c};
  std::vector<int> slow_labels{1};
  GroupSet g = form_groups(fast, slow, fast_labels, slow_labels);

  REQUIRE(g.fast.size() == 2);
  CHECK(g.fast.at(2).count == 2);
  CHECK(g.fast.at(2).mean.values() == std::vector<double>{3.0, 5.0});
  CHECK(g.fast.at(0).count == 1);
  CHECK(g.fast.at(0).mean.values() == c.values());  // singleton == member
  REQUIRE(g.slow.size() == 1);
  CHECK(g.slow.at(1).count == 1);

  // all members one label -> exactly one group in that pathway
  std::vector<int> same{1, 1, 1};
  GroupSet g2 = form_groups(fast, slow, same, slow_labels);
  CHECK(g2.fast.size() == 1);
  CHECK(g2.fast.at(1).count == 3);
}

TEST_CASE("group loss equals instance loss for singleton consistent groups") {
  Rng rng(99);
  SimilarityConfig cfg;
  for (std::size_t B : {2u, 3u, 4u}) {
    for (int rep = 0; rep < 20; ++rep) {
      auto fast = random_reps(rng, B, 4);
      auto slow = random_reps(rng, B, 4);
      std::vector<int> labels(B);
      for (std::size_t i = 0; i < B; ++i) labels[i] = static_cast<int>(i);

      GroupSet g = form_groups(fast, slow, labels, labels);
      auto res = group_contrastive_loss(g, cfg);
      REQUIRE_FALSE(res.degenerate);
      const double ic = instance_contrastive_loss(fast, slow, cfg).item();
      CHECK(std::abs(res.loss.item() - ic) < 1e-12);

      // and both agree with the independent brute-force route
      const double want = oracle::group_loss(to_raw(fast), to_raw(slow),
                                             labels, labels, cfg.tau);
      CHECK(std::abs(res.loss.item() - want) < 1e-9);
    }
  }
}

TEST_CASE("group loss matches brute force on random pseudo-labels") {
  Rng rng(4242);
  SimilarityConfig cfg;
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t B = 3 + rng.uniform_int(5);
    const int classes = 3;
    auto fast = random_reps(rng, B, 6);
    auto slow = random_reps(rng, B, 6);
    std::vector<int> fl(B), sl(B);
    for (auto& l : fl) l = static_cast<int>(rng.uniform_int(classes));
    for (auto& l : sl) l = static_cast<int>(rng.uniform_int(classes));
    GroupSet g = form_groups(fast, slow, fl, sl);
    auto res = group_contrastive_loss(g, cfg);
    const double want =
        oracle::group_loss(to_raw(fast), to_raw(slow), fl, sl, cfg.tau);
    CHECK(std::abs(res.loss.item() - want) < 1e-9);
  }
}

TEST_CASE("group loss degenerate cases return exactly zero") {
  SimilarityConfig cfg;
  Rng rng(7);

  // one label, present in both pathways: positives but no negatives
  auto fast = random_reps(rng, 3, 4);
  auto slow = random_reps(rng, 3, 4);
  std::vector<int> ones(3, 1);
  auto res = group_contrastive_loss(form_groups(fast, slow, ones, ones), cfg);
  CHECK(res.degenerate);
  CHECK(res.loss.item() == 0.0);

  // disjoint label sets: no positive pair at all
  std::vector<int> fl{0, 0, 0}, sl{1, 1, 1};
  res = group_contrastive_loss(form_groups(fast, slow, fl, sl), cfg);
  CHECK(res.degenerate);
  CHECK(res.loss.item() == 0.0);
}

TEST_CASE("group loss is scale and permutation invariant") {
  Rng rng(55);
  SimilarityConfig cfg;
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t B = 4 + rng.uniform_int(3);
    auto fast = random_reps(rng, B, 5);
    auto slow = random_reps(rng, B, 5);
    std::vector<int> fl(B), sl(B);
    for (auto& l : fl) l = static_cast<int>(rng.uniform_int(3));
    for (auto& l : sl) l = static_cast<int>(rng.uniform_int(3));
    const double base =
        group_contrastive_loss(form_groups(fast, slow, fl, sl), cfg).loss.item();

    std::vector<Tensor> fs, ss;
    const double c = 0.25 + rng.uniform() * 5.0;
    for (auto& t : fast) fs.push_back(scale(t, c));
    for (auto& t : slow) ss.push_back(scale(t, c));
    const double scaled =
        group_contrastive_loss(form_groups(fs, ss, fl, sl), cfg).loss.item();
    CHECK(std::abs(scaled - base) < 1e-10);

    std::vector<std::size_t> perm(B);
    for (std::size_t i = 0; i < B; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<Tensor> fp, sp;
    std::vector<int> flp, slp;
    for (std::size_t i : perm) {
      fp.push_back(fast[i]);
      sp.push_back(slow[i]);
      flp.push_back(fl[i]);
      slp.push_back(sl[i]);
    }
    const double permuted =
        group_contrastive_loss(form_groups(fp, sp, flp, slp), cfg).loss.item();
    CHECK(std::abs(permuted - base) < 1e-12);
  }
}

TEST_CASE("total loss is the weighted sum") {
  Tensor sup = Tensor::scalar(0.5);
  Tensor ic = Tensor::scalar(0.2);
  Tensor gc = Tensor::scalar(0.1);
  CHECK(total_loss(sup, ic, gc, {9.0, 1.0}).item() ==
        doctest::Approx(2.4).epsilon(1e-12));
  CHECK(total_loss(sup, ic, gc, {0.0, 0.0}).item() == 0.5);
  CHECK_THROWS_AS(total_loss(sup, ic, gc, {-1.0, 0.0}), std::invalid_argument);
}
