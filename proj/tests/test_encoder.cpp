#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "tcl/dataset.hpp"
#include "tcl/encoder.hpp"
#include "tcl/gradcheck.hpp"
#include "tcl/rng.hpp"

using namespace tcl;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.input_dim = 12;
  cfg.hidden = {5};
  cfg.classes = 3;
  return cfg;
}

Tensor random_clip(Rng& rng, std::size_t frames, std::size_t dim) {
  Tensor t = Tensor::zeros({frames, dim});
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

}  // namespace

TEST_CASE("init is deterministic per seed, biases start at zero") {
  auto cfg = tiny_config();
  Encoder a = Encoder::init(cfg, 5);
  Encoder b = Encoder::init(cfg, 5);
  REQUIRE(a.parameters().size() == b.parameters().size());
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    CHECK(a.parameters()[i].values() == b.parameters()[i].values());
  Encoder c = Encoder::init(cfg, 6);
  CHECK(a.parameters()[0].values() != c.parameters()[0].values());

  for (std::size_t i = 0; i < a.parameter_names().size(); ++i) {
    if (a.parameter_names()[i][0] == 'b')
      for (double v : a.parameters()[i].values()) CHECK(v == 0.0);
  }
}

TEST_CASE("initial logits have zero mean over random frames and init draws") {
  // A single draw leaves a seed-dependent offset (relu hiddens have positive
  // mean), so the Monte-Carlo averages over init seeds as well.
  auto cfg = tiny_config();
  Rng rng(3);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Encoder enc = Encoder::init(cfg, seed);
    for (int i = 0; i < 10; ++i) {
      Tensor rep = enc.encode_clip(random_clip(rng, 1, cfg.input_dim));
      for (double v : rep.values()) acc += v, ++n;
    }
  }
  CHECK(n == 1000 * cfg.classes / 1);
  CHECK(std::abs(acc / static_cast<double>(n)) < 0.05);
}

TEST_CASE("clip of identical frames equals the single-frame logits") {
  auto cfg = tiny_config();
  Encoder enc = Encoder::init(cfg, 9);
  Rng rng(4);
  Tensor frame = random_clip(rng, 1, cfg.input_dim);
  std::vector<double> tiled;
  for (int r = 0; r < 4; ++r)
    tiled.insert(tiled.end(), frame.values().begin(), frame.values().end());
  Tensor clip = Tensor::from({4, cfg.input_dim}, tiled);
  Tensor one = enc.encode_clip(frame);
  Tensor four = enc.encode_clip(clip);
  for (std::size_t i = 0; i < one.size(); ++i)
    CHECK(four.values()[i] == doctest::Approx(one.values()[i]).epsilon(1e-12));
}

TEST_CASE("frame order does not change the representation") {
  auto cfg = tiny_config();
  Encoder enc = Encoder::init(cfg, 9);
  Rng rng(8);
  Tensor clip = random_clip(rng, 6, cfg.input_dim);
  // reverse frame order
  std::vector<double> rev(clip.size());
  for (std::size_t f = 0; f < 6; ++f)
    std::copy(clip.values().begin() + f * cfg.input_dim,
              clip.values().begin() + (f + 1) * cfg.input_dim,
              rev.begin() + (5 - f) * cfg.input_dim);
  Tensor reversed = Tensor::from({6, cfg.input_dim}, rev);
  Tensor a = enc.encode_clip(clip);
  Tensor b = enc.encode_clip(reversed);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a.values()[i] == doctest::Approx(b.values()[i]).epsilon(1e-13));
}

TEST_CASE("weight sharing: re-encoding is bitwise identical") {
  auto cfg = tiny_config();
  Encoder enc = Encoder::init(cfg, 11);
  Rng rng(2);
  Tensor clip = random_clip(rng, 8, cfg.input_dim);
  // base and auxiliary pathway evaluations are the same code and parameters
  CHECK(enc.encode_clip(clip).values() == enc.encode_clip(clip).values());
}

TEST_CASE("fast clip and its subsample differ in general") {
  auto cfg = tiny_config();
  Encoder enc = Encoder::init(cfg, 13);
  Rng rng(21);
  Tensor fast = random_clip(rng, 8, cfg.input_dim);
  Tensor slow = slice(fast, 0, 4);
  Tensor a = enc.encode_clip(fast);
  Tensor b = enc.encode_clip(slow);
  double diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    diff = std::max(diff, std::abs(a.values()[i] - b.values()[i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("predict: argmax with lowest-index ties and softmax confidence") {
  Prediction p = predict(std::vector<double>{0.0, 0.0, 5.0});
  CHECK(p.label == 2);
  CHECK(p.confidence ==
        doctest::Approx(std::exp(5.0) / (2.0 + std::exp(5.0))).epsilon(1e-12));

  Prediction tie = predict(std::vector<double>{1.0, 1.0, 1.0, 1.0});
  CHECK(tie.label == 0);
  CHECK(tie.confidence == doctest::Approx(0.25).epsilon(1e-12));

  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> logits(6);
    for (double& v : logits) v = rng.normal();
    Prediction base = predict(logits);
    const double c = 1.0 + rng.uniform() * 4.0;   // c > 1 raises confidence
    const double shift = rng.normal();            // additive shift: class fixed
    std::vector<double> scaled(6), shifted(6);
    for (std::size_t i = 0; i < 6; ++i) {
      scaled[i] = logits[i] * c;
      shifted[i] = logits[i] + shift;
    }
    Prediction ps = predict(scaled);
    CHECK(ps.label == base.label);
    CHECK(ps.confidence >= base.confidence);
    CHECK(predict(shifted).label == base.label);
  }
}

TEST_CASE("encode_clip gradients pass the finite-difference check") {
  auto cfg = tiny_config();
  Encoder enc = Encoder::init(cfg, 23);
  Rng rng(31);
  Tensor clip = random_clip(rng, 3, cfg.input_dim);

  auto forward = [&]() { return log_sum_exp(enc.encode_clip(clip)); };
  for (const Tensor& param : enc.parameters()) {
    const double err = parameter_gradient_check(forward, param);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("checkpoints round-trip bitwise") {
  auto cfg = tiny_config();
  Encoder enc = Encoder::init(cfg, 29);
  const auto path = std::filesystem::temp_directory_path() / "tcl_ckpt_test.bin";
  save_checkpoint(enc, path);
  Encoder back = load_checkpoint(path);
  CHECK(back.config().hidden == cfg.hidden);
  CHECK(back.config().classes == cfg.classes);
  REQUIRE(back.parameters().size() == enc.parameters().size());
  for (std::size_t i = 0; i < enc.parameters().size(); ++i)
    CHECK(back.parameters()[i].values() == enc.parameters()[i].values());
  std::filesystem::remove(path);
}
