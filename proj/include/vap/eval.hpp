#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vap/codec.hpp"
#include "vap/events.hpp"
#include "vap/ingest.hpp"
#include "vap/model.hpp"

namespace vap {

// ---------------------------------------------------------------------------
// Balanced accuracy
// ---------------------------------------------------------------------------

struct ConfusionCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  void add(bool predicted, bool actual) {
    if (actual)
      predicted ? ++tp : ++fn;
    else
      predicted ? ++fp : ++tn;
  }

  double balanced_accuracy() const {
    require<MetricError>(tp + fn > 0 && tn + fp > 0,
                         "balanced accuracy undefined: labels contain a single class");
    double tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
    double tnr = static_cast<double>(tn) / static_cast<double>(tn + fp);
    return 0.5 * (tpr + tnr);
  }

  double f1() const {
    long denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
};

// Mean of per-class recalls; requires both classes present in the labels.
inline double balanced_accuracy(const std::vector<std::uint8_t>& predictions,
                                const std::vector<std::uint8_t>& labels) {
  require<DimensionError>(predictions.size() == labels.size() && !labels.empty(),
                          "predictions and labels must have equal non-zero length");
  ConfusionCounts counts;
  for (std::size_t i = 0; i < labels.size(); ++i)
    counts.add(predictions[i] != 0, labels[i] != 0);
  return counts.balanced_accuracy();
}

// ---------------------------------------------------------------------------
// Dense causal scoring
// ---------------------------------------------------------------------------

// Per-frame codec projections of a scorer's state distributions.
struct FrameProjections {
  std::vector<std::array<double, 2>> p_now;
  std::vector<std::array<double, 2>> p_future;
  std::vector<std::array<double, 2>> bc_prob;  // indexed by listener

  int frames() const { return static_cast<int>(p_now.size()); }

  void push(const VapDistribution& dist) {
    SpeakerProjection proj = project_speaker_probs(dist);
    p_now.push_back(proj.p_now);
    p_future.push_back(proj.p_future);
    bc_prob.push_back({backchannel_pattern_prob(dist, 0), backchannel_pattern_prob(dist, 1)});
  }
};

class FrameScorer {
 public:
  virtual ~FrameScorer() = default;
  virtual FrameProjections run(const LoadedDialogue& dialogue) = 0;
};

// Zero-padded causal window ending at end_frame (inclusive); matches the
// warmup behavior of the streaming engine.
class ZeroPaddedFaceSequence : public FaceSequence {
 public:
  ZeroPaddedFaceSequence(std::shared_ptr<FaceSequence> parent, int first_frame, int length)
      : parent_(std::move(parent)), first_(first_frame), length_(length) {}
  int frames() const override { return length_; }
  void copy_frame(int frame, float* dst) const override {
    int src = first_ + frame;
    if (src < 0)
      std::fill(dst, dst + kFacePixels, 0.0f);
    else
      parent_->copy_frame(src, dst);
  }

 private:
  std::shared_ptr<FaceSequence> parent_;
  int first_ = 0, length_ = 0;
};

template <typename S>
WindowInput<S> padded_window_ending_at(const LoadedDialogue& dialogue, int end_frame,
                                       int window_frames,
                                       std::array<std::shared_ptr<FaceSequence>, 2>* keep_alive) {
  const int spf = dialogue.sample_rate_hz / static_cast<int>(std::llround(dialogue.frame_rate_hz));
  const int first = end_frame - window_frames + 1;
  WindowInput<S> input;
  input.frames = window_frames;
  for (int p = 0; p < 2; ++p) {
    PersonInput<S>& person = input.persons[static_cast<std::size_t>(p)];
    person.audio.assign(static_cast<std::size_t>(window_frames) * spf, S(0));
    const auto& pcm = dialogue.audio_pcm[static_cast<std::size_t>(p)];
    for (int t = 0; t < window_frames; ++t) {
      int src = first + t;
      if (src < 0) continue;
      for (int i = 0; i < spf; ++i)
        person.audio[static_cast<std::size_t>(t) * spf + i] =
            static_cast<S>(pcm16_to_float(pcm[static_cast<std::size_t>(src) * spf + i]));
    }
    if (dialogue.has_faces()) {
      (*keep_alive)[static_cast<std::size_t>(p)] = std::make_shared<ZeroPaddedFaceSequence>(
          dialogue.faces[static_cast<std::size_t>(p)], first, window_frames);
      person.faces = (*keep_alive)[static_cast<std::size_t>(p)].get();
    }
    if (dialogue.has_aux()) {
      const AuxStreams& aux = dialogue.aux[static_cast<std::size_t>(p)];
      auto pad_slice = [&](const Tensor<float>& src) {
        Tensor<S> out({window_frames, src.cols()});
        for (int t = 0; t < window_frames; ++t) {
          int row = first + t;
          if (row < 0) continue;
          for (int c = 0; c < src.cols(); ++c) out.at(t, c) = static_cast<S>(src.at(row, c));
        }
        return out;
      };
      person.au = pad_slice(aux.au);
      person.gaze = pad_slice(aux.gaze);
      person.head = pad_slice(aux.head);
      person.body = pad_slice(aux.body);
    }
  }
  return input;
}

// Runs the model over dense causal windows. Window ends advance on the hop
// grid; each window contributes the frames since the previous end, read at
// their in-window positions, so every frame is scored with the most context
// available on the grid. hop_frames == 1 reproduces streaming exactly.
template <typename S>
class ModelScorer : public FrameScorer {
 public:
  ModelScorer(const VapModel<S>& model, int hop_frames = 25,
              int window_frames = kWindowSeconds * 25)
      : model_(&model), hop_(hop_frames), window_frames_(window_frames) {}

  FrameProjections run(const LoadedDialogue& dialogue) override {
    NoGradGuard guard;
    FrameProjections proj;
    const int total = dialogue.frames();
    int prev_end = -1;
    for (int end = 0; end < total + hop_ - 1; end += hop_) {
      int e = std::min(end, total - 1);
      if (e <= prev_end) break;
      std::array<std::shared_ptr<FaceSequence>, 2> keep_alive{};
      WindowInput<S> input =
          padded_window_ending_at<S>(dialogue, e, window_frames_, &keep_alive);
      ModelOutput<S> out = model_->predict(input);
      Tensor<S> probs = softmax_rows(out.vap_logits->value);
      const int first = e - window_frames_ + 1;
      for (int f = prev_end + 1; f <= e; ++f)
        proj.push(distribution_at(probs, f - first));
      prev_end = e;
      if (e == total - 1) break;
    }
    return proj;
  }

 private:
  const VapModel<S>* model_;
  int hop_ = 25;
  int window_frames_ = 500;
};

// Upper-bound harness: emits a one-hot distribution on the VAP state encoded
// from the true future activity (missing lookahead reads as silence).
class GroundTruthScorer : public FrameScorer {
 public:
  explicit GroundTruthScorer(BinLayout layout = BinLayout::standard(),
                             double activity_threshold = kDefaultActivityThreshold)
      : layout_(layout), threshold_(activity_threshold) {}

  FrameProjections run(const LoadedDialogue& dialogue) override {
    FrameProjections proj;
    const int total = dialogue.frames();
    std::array<std::vector<std::uint8_t>, 2> future;
    future[0].resize(static_cast<std::size_t>(layout_.total_frames));
    future[1].resize(static_cast<std::size_t>(layout_.total_frames));
    for (int t = 0; t < total; ++t) {
      for (int s = 0; s < 2; ++s)
        for (int k = 0; k < layout_.total_frames; ++k) {
          int src = t + 1 + k;
          future[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)] =
              src < total && dialogue.vad.active(s, src) ? 1 : 0;
        }
      int state = encode_window(future[0], future[1], layout_, threshold_);
      VapDistribution dist;
      dist.probs[static_cast<std::size_t>(state)] = 1.0;
      proj.push(dist);
    }
    return proj;
  }

 private:
  BinLayout layout_;
  double threshold_;
};

// ---------------------------------------------------------------------------
// Event scoring
// ---------------------------------------------------------------------------

struct Thresholds {
  double sl = 0.5;
  double sp = 0.5;
  double bc = 0.5;
};

enum class Metric { kShiftHold, kShortLong, kShiftPred, kBackchannel };

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kShiftHold: return "SH";
    case Metric::kShortLong: return "SL";
    case Metric::kShiftPred: return "SP";
    case Metric::kBackchannel: return "BC";
  }
  return "?";
}

inline std::optional<Metric> event_metric(EventKind kind) {
  switch (kind) {
    case EventKind::kShift:
    case EventKind::kHold: return Metric::kShiftHold;
    case EventKind::kShort:
    case EventKind::kLong: return Metric::kShortLong;
    case EventKind::kShiftPredPos:
    case EventKind::kShiftPredNeg: return Metric::kShiftPred;
    case EventKind::kBackchannelPos:
    case EventKind::kBackchannelNeg: return Metric::kBackchannel;
  }
  return std::nullopt;
}

// The scalar score an event's anchor region produces (mean of frame-level
// projections; SH is handled separately since it is argmax-based).
inline double event_score(const FrameProjections& proj, const TurnEvent& event,
                          double frame_rate_hz) {
  require<ValidationError>(event.start_frame >= 0 && event.end_frame <= proj.frames() &&
                               event.start_frame < event.end_frame,
                           "event region outside scored range");
  Metric metric = *event_metric(event.kind);
  int begin = event.start_frame;
  int end = event.end_frame;
  if (metric == Metric::kShortLong) {
    // first 0.2 s of the utterance
    end = std::min(end, begin + std::max(1, static_cast<int>(std::llround(0.2 * frame_rate_hz))));
  }
  double sum = 0.0;
  for (int f = begin; f < end; ++f) {
    switch (metric) {
      case Metric::kShortLong:
        sum += proj.p_future[static_cast<std::size_t>(f)][static_cast<std::size_t>(*event.prev_speaker)];
        break;
      case Metric::kShiftPred:
        sum += proj.p_future[static_cast<std::size_t>(f)][static_cast<std::size_t>(1 - *event.prev_speaker)];
        break;
      case Metric::kBackchannel:
        sum += proj.bc_prob[static_cast<std::size_t>(f)][static_cast<std::size_t>(*event.next_speaker)];
        break;
      case Metric::kShiftHold:
        break;
    }
  }
  return sum / (end - begin);
}

// Binary decision for one event. Positive classes: SHIFT, LONG, upcoming
// shift, upcoming backchannel.
inline bool score_event(const FrameProjections& proj, const TurnEvent& event,
                        const Thresholds& thresholds, double frame_rate_hz) {
  Metric metric = *event_metric(event.kind);
  if (metric == Metric::kShiftHold) {
    require<ValidationError>(event.end_frame <= proj.frames(), "event region outside scored range");
    std::array<double, 2> mean{};
    for (int f = event.start_frame; f < event.end_frame; ++f)
      for (int s = 0; s < 2; ++s) mean[static_cast<std::size_t>(s)] += proj.p_future[static_cast<std::size_t>(f)][static_cast<std::size_t>(s)];
    int winner = mean[1] > mean[0] ? 1 : 0;
    return winner != *event.prev_speaker;  // predicted SHIFT
  }
  double score = event_score(proj, event, frame_rate_hz);
  switch (metric) {
    case Metric::kShortLong: return score >= thresholds.sl;
    case Metric::kShiftPred: return score >= thresholds.sp;
    case Metric::kBackchannel: return score >= thresholds.bc;
    default: return false;
  }
}

inline bool event_label(const TurnEvent& event) {
  switch (event.kind) {
    case EventKind::kShift:
    case EventKind::kLong:
    case EventKind::kShiftPredPos:
    case EventKind::kBackchannelPos: return true;
    default: return false;
  }
}

// ---------------------------------------------------------------------------
// Threshold tuning (validation side)
// ---------------------------------------------------------------------------

struct ScoredEvent {
  double score = 0.0;
  bool label = false;
};

// Grid search over {0.01, ..., 0.99}; maximizes balanced accuracy, ties going
// to the smallest threshold.
inline double tune_threshold(const std::vector<ScoredEvent>& events) {
  bool has_pos = false, has_neg = false;
  for (const auto& e : events) (e.label ? has_pos : has_neg) = true;
  require<MetricError>(has_pos && has_neg, "threshold tuning needs both classes");
  double best_theta = 0.01;
  double best_ba = -1.0;
  for (int grid = 1; grid <= 99; ++grid) {
    double theta = grid / 100.0;
    ConfusionCounts counts;
    for (const auto& e : events) counts.add(e.score >= theta, e.label);
    double ba = counts.balanced_accuracy();
    if (ba > best_ba + 1e-12) {
      best_ba = ba;
      best_theta = theta;
    }
  }
  return best_theta;
}

// ---------------------------------------------------------------------------
// Full evaluation
// ---------------------------------------------------------------------------

struct MetricResult {
  Metric metric = Metric::kShiftHold;
  bool defined = false;  // false when no events or a single class
  double balanced_accuracy = 0.0;
  double f1 = 0.0;
  ConfusionCounts counts;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  long n_events = 0;
};

struct EvaluationReport {
  std::string variant;
  std::array<MetricResult, 4> metrics;  // SH, SL, SP, BC
  Thresholds thresholds;
};

inline std::vector<TurnEvent> events_for_dialogue(const LoadedDialogue& dialogue,
                                                  std::uint64_t seed, int index) {
  return extract_all_events(dialogue.vad, mix_seed(seed ^ static_cast<std::uint64_t>(index)));
}

// Scores every event of every dialogue with the given scorer. Used both for
// threshold tuning (validation dialogues) and final evaluation (test
// dialogues).
inline std::map<Metric, std::vector<ScoredEvent>> collect_scores(
    FrameScorer& scorer, const std::vector<LoadedDialogue>& dialogues, std::uint64_t seed) {
  std::map<Metric, std::vector<ScoredEvent>> scores;
  for (std::size_t d = 0; d < dialogues.size(); ++d) {
    FrameProjections proj = scorer.run(dialogues[d]);
    for (const TurnEvent& event : events_for_dialogue(dialogues[d], seed, static_cast<int>(d))) {
      Metric metric = *event_metric(event.kind);
      if (metric == Metric::kShiftHold) continue;  // threshold-free
      scores[metric].push_back({event_score(proj, event, dialogues[d].vad.frame_rate_hz),
                                event_label(event)});
    }
  }
  return scores;
}

inline Thresholds tune_thresholds(FrameScorer& scorer,
                                  const std::vector<LoadedDialogue>& validation_dialogues,
                                  std::uint64_t seed) {
  auto scores = collect_scores(scorer, validation_dialogues, seed);
  Thresholds thresholds;
  if (scores.count(Metric::kShortLong)) thresholds.sl = tune_threshold(scores[Metric::kShortLong]);
  if (scores.count(Metric::kShiftPred)) thresholds.sp = tune_threshold(scores[Metric::kShiftPred]);
  if (scores.count(Metric::kBackchannel)) thresholds.bc = tune_threshold(scores[Metric::kBackchannel]);
  return thresholds;
}

inline EvaluationReport evaluate(FrameScorer& scorer,
                                 const std::vector<LoadedDialogue>& test_dialogues,
                                 const Thresholds& thresholds, const std::string& variant_name,
                                 std::uint64_t seed) {
  EvaluationReport report;
  report.variant = variant_name;
  report.thresholds = thresholds;
  std::map<Metric, ConfusionCounts> counts;
  std::map<Metric, long> totals;
  for (std::size_t d = 0; d < test_dialogues.size(); ++d) {
    FrameProjections proj = scorer.run(test_dialogues[d]);
    for (const TurnEvent& event :
         events_for_dialogue(test_dialogues[d], seed, static_cast<int>(d))) {
      Metric metric = *event_metric(event.kind);
      bool predicted = score_event(proj, event, thresholds, test_dialogues[d].vad.frame_rate_hz);
      counts[metric].add(predicted, event_label(event));
      ++totals[metric];
    }
  }
  const std::array<Metric, 4> order = {Metric::kShiftHold, Metric::kShortLong, Metric::kShiftPred,
                                       Metric::kBackchannel};
  for (std::size_t i = 0; i < order.size(); ++i) {
    MetricResult& r = report.metrics[i];
    r.metric = order[i];
    r.n_events = totals.count(order[i]) ? totals[order[i]] : 0;
    if (order[i] == Metric::kShortLong) r.threshold = thresholds.sl;
    if (order[i] == Metric::kShiftPred) r.threshold = thresholds.sp;
    if (order[i] == Metric::kBackchannel) r.threshold = thresholds.bc;
    if (r.n_events == 0) continue;
    const ConfusionCounts& c = counts[order[i]];
    if (c.tp + c.fn == 0 || c.tn + c.fp == 0) continue;  // single class -> absent
    r.defined = true;
    r.counts = c;
    r.balanced_accuracy = c.balanced_accuracy();
    r.f1 = c.f1();
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

// Balanced accuracies published for the original NoXi-trained models. They
// require the NoXi corpus and pretrained audio/face encoders, are not
// reproducible on synthetic data, and are informational only: nothing asserts
// them.
struct NoxiReferenceRow {
  const char* variant;
  double sh, sl, sp, bc;
};

inline constexpr std::array<NoxiReferenceRow, 6> kNoxiReferenceAccuracies = {{
    {"Baseline1", 0.712, 0.684, 0.726, 0.434},
    {"Baseline2_1", 0.758, 0.634, 0.788, 0.442},
    {"Baseline2_2", 0.735, 0.716, 0.768, 0.428},
    {"Proposed1", 0.703, 0.625, 0.709, 0.506},
    {"Proposed2", 0.687, 0.703, 0.730, 0.446},
    {"Proposed3", 0.737, 0.628, 0.794, 0.503},
}};

inline void write_report_csv(std::ostream& out, const EvaluationReport& report) {
  out << "# turn-taking evaluation report\n";
  out << "# scoring: SH argmax of mean p_future over the gap; SL mean p_future(owner) over the"
         " first 0.2 s; SP mean p_future(other) over the 0.5 s region; BC mean listener-pattern"
         " mass over the 0.5 s region\n";
  out << "# region aggregation is an arithmetic mean; thresholds tuned on validation only\n";
  out << "# thresholds: sl=" << report.thresholds.sl << " sp=" << report.thresholds.sp
      << " bc=" << report.thresholds.bc << "\n";
  out << "# reference (NoXi corpus, pretrained encoders; not reproducible here, never"
         " asserted):\n";
  for (const auto& row : kNoxiReferenceAccuracies)
    out << "#   " << row.variant << " SH=" << row.sh << " SL=" << row.sl << " SP=" << row.sp
        << " BC=" << row.bc << "\n";
  out << "variant,SH,SL,SP,BC,metric_type\n";
  auto cell = [](const MetricResult& r, bool f1) {
    return r.defined ? std::to_string(f1 ? r.f1 : r.balanced_accuracy) : std::string("NA");
  };
  out << report.variant;
  for (const auto& m : report.metrics) out << ',' << cell(m, false);
  out << ",balanced_acc\n";
  out << report.variant;
  for (const auto& m : report.metrics) out << ',' << cell(m, true);
  out << ",f1\n";
}

}  // namespace vap
