#include "tcl/encoder.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tcl/rng.hpp"

namespace tcl {

Encoder Encoder::init(const EncoderConfig& cfg, std::uint64_t seed) {
  if (cfg.classes < 2)
    throw std::invalid_argument("Encoder::init: need at least 2 classes");
  for (std::size_t h : cfg.hidden)
    if (h == 0) throw std::invalid_argument("Encoder::init: zero hidden size");

  Encoder enc;
  enc.cfg_ = cfg;
  Rng rng(seed, "encoder/init");

  std::vector<std::size_t> dims;
  dims.push_back(cfg.input_dim);
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(cfg.classes);

  for (std::size_t layer = 0; layer + 1 < dims.size(); ++layer) {
    const std::size_t fan_in = dims[layer], fan_out = dims[layer + 1];
    // Glorot uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out))
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w = Tensor::zeros({fan_in, fan_out}, true);
    for (double& x : w.values()) x = rng.uniform(-a, a);
    Tensor b = Tensor::zeros({fan_out}, true);
    enc.params_.push_back(w);
    enc.params_.push_back(b);
    enc.names_.push_back("w" + std::to_string(layer));
    enc.names_.push_back("b" + std::to_string(layer));
  }
  return enc;
}

Tensor Encoder::encode_clip(const Tensor& clip) const {
  return encode_clips(std::span<const Tensor>(&clip, 1)).front();
}

std::vector<Tensor> Encoder::encode_clips(std::span<const Tensor> clips) const {
  if (clips.empty()) throw ShapeError("encode_clips: no clips");
  for (const Tensor& clip : clips) {
    if (clip.shape().size() != 2)
      throw ShapeError("encode_clips: clips must be frames x pixels");
    if (clip.cols() != cfg_.input_dim)
      throw ShapeError("encode_clips: expected " +
                       std::to_string(cfg_.input_dim) +
                       " pixels per frame, got " + std::to_string(clip.cols()));
  }
  Tensor x = clips.size() == 1 ? clips.front() : concat(clips);
  const std::size_t total_rows = x.rows();
  // ones * b broadcasts the bias over frames through plain matmul
  Tensor ones = Tensor::ones({total_rows, 1});
  const std::size_t layers = params_.size() / 2;
  for (std::size_t layer = 0; layer < layers; ++layer) {
    const Tensor& w = params_[2 * layer];
    const Tensor& b = params_[2 * layer + 1];
    x = add(matmul(x, w), matmul(ones, reshape(b, {1, b.size()})));
    if (layer + 1 < layers) x = relu(x);
  }
  // mean of the per-frame logits, per clip
  std::vector<Tensor> reps;
  reps.reserve(clips.size());
  std::size_t offset = 0;
  for (const Tensor& clip : clips) {
    const std::size_t rows = clip.rows();
    reps.push_back(mean_axis(slice(x, offset, offset + rows), 0));
    offset += rows;
  }
  return reps;
}

void Encoder::zero_grad() const {
  for (const Tensor& p : params_) p.zero_grad();
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double m = logits[0];
  for (double x : logits) m = std::max(m, x);
  double z = 0.0;
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (double& x : out) x /= z;
  return out;
}

Prediction predict(const std::vector<double>& logits) {
  if (logits.size() < 2)
    throw std::invalid_argument("predict: need at least 2 classes");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;  // strict: ties keep lowest index
  const auto probs = softmax(logits);
  return {static_cast<int>(best), probs[best]};
}

Prediction predict(const Tensor& rep) { return predict(rep.values()); }

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'C', 'L', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint stream truncated");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const auto len = read_pod<std::uint32_t>(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw std::runtime_error("checkpoint stream truncated");
  return s;
}

}  // namespace

void write_named_tensors(std::ostream& os,
                         const std::vector<std::string>& names,
                         const std::vector<Tensor>& tensors) {
  write_pod(os, static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    write_string(os, names[i]);
    const Tensor& t = tensors[i];
    write_pod(os, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t d : t.shape()) write_pod(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(t.values().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
}

void read_named_tensors(std::istream& is, std::vector<std::string>& names,
                        std::vector<Tensor>& tensors) {
  const auto count = read_pod<std::uint32_t>(is);
  names.clear();
  tensors.clear();
  for (std::uint32_t i = 0; i < count; ++i) {
    names.push_back(read_string(is));
    const auto ndim = read_pod<std::uint32_t>(is);
    Shape shape;
    for (std::uint32_t d = 0; d < ndim; ++d)
      shape.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(is)));
    Tensor t = Tensor::zeros(shape);
    is.read(reinterpret_cast<char*>(t.values().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint stream truncated");
    tensors.push_back(t);
  }
}

void save_checkpoint(const Encoder& enc, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::uint64_t>(enc.config().input_dim));
  write_pod(os, static_cast<std::uint64_t>(enc.config().classes));
  write_pod(os, static_cast<std::uint32_t>(enc.config().hidden.size()));
  for (std::size_t h : enc.config().hidden)
    write_pod(os, static_cast<std::uint64_t>(h));
  write_named_tensors(os, enc.parameter_names(), enc.parameters());
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Encoder load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path.string() + ": not a TCLC checkpoint");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion)
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " +
                             std::to_string(version));
  EncoderConfig cfg;
  cfg.input_dim = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
  cfg.classes = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
  cfg.hidden.clear();
  const auto nh = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nh; ++i)
    cfg.hidden.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(is)));

  Encoder enc = Encoder::init(cfg, 0);
  std::vector<std::string> names;
  std::vector<Tensor> tensors;
  read_named_tensors(is, names, tensors);
  if (names != enc.parameter_names())
    throw std::runtime_error(path.string() + ": parameter names do not match");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].shape() != enc.parameters()[i].shape())
      throw std::runtime_error(path.string() + ": shape mismatch for " + names[i]);
    enc.parameters()[i].values() = tensors[i].values();
  }
  return enc;
}

}  // namespace tcl
