#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcl/tensor.hpp"

namespace tcl {

struct EncoderConfig {
  std::size_t input_dim = 256;          // H*W, frames are flattened
  std::vector<std::size_t> hidden{64};  // relu layers
  std::size_t classes = 8;              // output dimension C
};

// Shared-weight per-frame MLP. Both pathways evaluate the same parameter
// set; a clip representation is the mean of its per-frame logits, so the
// contrastive similarity operates directly on the C-dimensional logits.
class Encoder {
 public:
  Encoder() = default;

  // Glorot-uniform weights, zero biases, deterministic per seed.
  static Encoder init(const EncoderConfig& cfg, std::uint64_t seed);

  const EncoderConfig& config() const { return cfg_; }

  // clip: frames x input_dim. Returns the C-dimensional representation.
  Tensor encode_clip(const Tensor& clip) const;

  // Batched form: all clips run through one stacked forward pass (the frame
  // rows are independent, so this is bitwise identical to encoding each clip
  // alone, and it is where the parallel gemm earns its keep).
  std::vector<Tensor> encode_clips(std::span<const Tensor> clips) const;

  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }

  void zero_grad() const;

 private:
  EncoderConfig cfg_;
  std::vector<Tensor> params_;       // w0, b0, w1, b1, ...
  std::vector<std::string> names_;
};

struct Prediction {
  int label = 0;        // argmax, ties resolved to the lowest index
  double confidence = 0.0;  // max of softmax(logits)
};

Prediction predict(const Tensor& rep);
Prediction predict(const std::vector<double>& logits);

std::vector<double> softmax(const std::vector<double>& logits);

// Versioned checkpoint container of named tensors. Also used as a building
// block for full trainer-state snapshots.
void save_checkpoint(const Encoder& enc, const std::filesystem::path& path);
Encoder load_checkpoint(const std::filesystem::path& path);

// Lower-level named-tensor IO on an open stream (shapes + float64 payload).
void write_named_tensors(std::ostream& os,
                         const std::vector<std::string>& names,
                         const std::vector<Tensor>& tensors);
void read_named_tensors(std::istream& is, std::vector<std::string>& names,
                        std::vector<Tensor>& tensors);

}  // namespace tcl
