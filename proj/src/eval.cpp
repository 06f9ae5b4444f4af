#include "tcl/eval.hpp"

#include <stdexcept>

#include <json.hpp>

namespace tcl {

Tensor encode_video_deterministic(const Encoder& enc, const VideoSample& v,
                                  std::size_t fast_frames) {
  return enc.encode_clip(clip_to_tensor(make_center_clip(v, fast_frames)));
}

namespace {

// Chunked batched inference over center clips.
std::vector<Prediction> predict_all(const Encoder& enc,
                                    std::span<const VideoSample> videos,
                                    std::size_t fast_frames) {
  std::vector<Prediction> preds;
  preds.reserve(videos.size());
  constexpr std::size_t kChunk = 128;
  for (std::size_t begin = 0; begin < videos.size(); begin += kChunk) {
    const std::size_t end = std::min(begin + kChunk, videos.size());
    std::vector<Tensor> clips;
    clips.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i)
      clips.push_back(clip_to_tensor(make_center_clip(videos[i], fast_frames)));
    for (const Tensor& rep : enc.encode_clips(clips))
      preds.push_back(predict(rep));
  }
  return preds;
}

}  // namespace

EvalReport evaluate(const Encoder& enc, std::span<const VideoSample> test_set,
                    std::size_t fast_frames) {
  if (test_set.empty()) throw std::invalid_argument("evaluate: empty test set");
  const std::size_t classes = enc.config().classes;
  EvalReport report;
  report.confusion.assign(classes, std::vector<int>(classes, 0));

  const std::vector<Prediction> preds = predict_all(enc, test_set, fast_frames);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const VideoSample& v = test_set[i];
    if (v.label < 0 || static_cast<std::size_t>(v.label) >= classes)
      throw std::invalid_argument("evaluate: test label out of range");
    report.confusion[static_cast<std::size_t>(v.label)]
                    [static_cast<std::size_t>(preds[i].label)]++;
    if (preds[i].label == v.label) ++correct;
  }
  report.top1 = static_cast<double>(correct) /
                static_cast<double>(test_set.size());

  report.per_class.assign(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    int support = 0;
    for (int n : report.confusion[c]) support += n;
    if (support > 0)
      report.per_class[c] =
          static_cast<double>(report.confusion[c][c]) / support;
  }
  return report;
}

PseudoLabelQuality pseudo_label_quality(const Encoder& enc,
                                        std::span<const VideoSample> unlabeled,
                                        std::size_t fast_frames) {
  if (unlabeled.empty())
    throw std::invalid_argument("pseudo_label_quality: empty pool");
  const std::vector<Prediction> preds =
      predict_all(enc, unlabeled, fast_frames);

  PseudoLabelQuality q;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < unlabeled.size(); ++i)
    if (preds[i].label == unlabeled[i].label) ++correct;
  q.overall = static_cast<double>(correct) /
              static_cast<double>(unlabeled.size());

  for (double thr : {0.0, 0.5, 0.8, 0.9}) {
    std::size_t admitted = 0, admitted_correct = 0;
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
      if (preds[i].confidence > thr) {
        ++admitted;
        if (preds[i].label == unlabeled[i].label) ++admitted_correct;
      }
    }
    ThresholdPoint point;
    point.threshold = thr;
    point.admitted_fraction = static_cast<double>(admitted) /
                              static_cast<double>(unlabeled.size());
    point.accuracy = admitted == 0 ? 0.0
                                   : static_cast<double>(admitted_correct) /
                                         static_cast<double>(admitted);
    q.sweep.push_back(point);
  }
  return q;
}

std::string eval_report_to_json_text(const EvalReport& report) {
  nlohmann::json j{{"schema_version", 1},
                   {"top1", report.top1},
                   {"per_class", report.per_class},
                   {"confusion", report.confusion},
                   {"pseudo_label_accuracy", report.pseudo_label_accuracy},
                   {"config_fingerprint", report.config_fingerprint},
                   {"seed", report.seed}};
  return j.dump(2) + "\n";
}

}  // namespace tcl
