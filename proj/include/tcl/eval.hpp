#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tcl/dataset.hpp"
#include "tcl/encoder.hpp"

namespace tcl {

// Evaluation-time encoding: one deterministic fast clip per video, frames
// taken from segment centers.
Tensor encode_video_deterministic(const Encoder& enc, const VideoSample& v,
                                  std::size_t fast_frames);

struct EvalReport {
  double top1 = 0.0;
  std::vector<double> per_class;            // accuracy per class, in [0,1]
  std::vector<std::vector<int>> confusion;  // [true][predicted]
  // pseudo-label accuracy on the unlabeled pool; negative when not measured
  double pseudo_label_accuracy = -1.0;
  std::string config_fingerprint;
  std::uint64_t seed = 0;
};

// Deterministic given (model, test set). top1 == trace(confusion) / total.
EvalReport evaluate(const Encoder& enc, std::span<const VideoSample> test_set,
                    std::size_t fast_frames);

struct ThresholdPoint {
  double threshold = 0.0;
  double accuracy = 0.0;  // among samples with confidence > threshold
  double admitted_fraction = 0.0;
};

struct PseudoLabelQuality {
  double overall = 0.0;
  std::vector<ThresholdPoint> sweep;  // thresholds 0.0, 0.5, 0.8, 0.9
};

// Scores argmax pseudo-labels against the hidden ground truth the synthetic
// data keeps around.
PseudoLabelQuality pseudo_label_quality(const Encoder& enc,
                                        std::span<const VideoSample> unlabeled,
                                        std::size_t fast_frames);

std::string eval_report_to_json_text(const EvalReport& report);

}  // namespace tcl
