#pragma once

#include <chrono>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "vap/eval.hpp"
#include "vap/model.hpp"

namespace vap {

// ---------------------------------------------------------------------------
// Decision gating (shared by streaming and offline replay)
// ---------------------------------------------------------------------------

struct StreamDecision {
  int frame = 0;
  enum class Kind { kShift, kBackchannel } kind = Kind::kShift;

  bool operator==(const StreamDecision&) const = default;
};

inline const char* decision_name(StreamDecision::Kind kind) {
  return kind == StreamDecision::Kind::kShift ? "SHIFT" : "BC";
}

struct GateConfig {
  double theta_sp = 0.5;
  double theta_bc = 0.5;
  int region_frames = 13;    // trailing window, about 0.5 s
  int debounce_frames = 25;  // no duplicate decision kind within 1 s
  int speaker_window = 25;   // VAD lookback for the current-speaker estimate
};

// Fires SHIFT when the trailing mean of p_future(non-current) crosses the
// shift threshold and BC when the trailing mean of the listener's pattern
// mass crosses the backchannel threshold, with per-kind debounce. Pure over
// the projection stream, so online and offline paths share it.
class DecisionGate {
 public:
  explicit DecisionGate(const GateConfig& config = {}) : config_(config) {}

  std::vector<StreamDecision> update(int frame, std::array<std::uint8_t, 2> vad,
                                     const std::array<double, 2>& p_future,
                                     const std::array<double, 2>& bc_prob) {
    vad_history_.push_back(vad);
    if (static_cast<int>(vad_history_.size()) > config_.speaker_window) vad_history_.pop_front();
    int counts[2] = {0, 0};
    for (const auto& v : vad_history_) {
      counts[0] += v[0];
      counts[1] += v[1];
    }
    if (counts[0] > counts[1])
      current_speaker_ = 0;
    else if (counts[1] > counts[0])
      current_speaker_ = 1;
    const int listener = 1 - current_speaker_;

    sp_history_.push_back(p_future[static_cast<std::size_t>(listener)]);
    bc_history_.push_back(bc_prob[static_cast<std::size_t>(listener)]);
    if (static_cast<int>(sp_history_.size()) > config_.region_frames) {
      sp_history_.pop_front();
      bc_history_.pop_front();
    }
    auto mean = [](const std::deque<double>& d) {
      double s = 0;
      for (double v : d) s += v;
      return s / static_cast<double>(d.size());
    };

    std::vector<StreamDecision> fired;
    if (static_cast<int>(sp_history_.size()) == config_.region_frames) {
      if (mean(sp_history_) >= config_.theta_sp &&
          (last_shift_ < 0 || frame - last_shift_ >= config_.debounce_frames)) {
        fired.push_back({frame, StreamDecision::Kind::kShift});
        last_shift_ = frame;
      }
      if (mean(bc_history_) >= config_.theta_bc &&
          (last_bc_ < 0 || frame - last_bc_ >= config_.debounce_frames)) {
        fired.push_back({frame, StreamDecision::Kind::kBackchannel});
        last_bc_ = frame;
      }
    }
    return fired;
  }

  int current_speaker() const { return current_speaker_; }

 private:
  GateConfig config_;
  std::deque<std::array<std::uint8_t, 2>> vad_history_;
  std::deque<double> sp_history_, bc_history_;
  int current_speaker_ = 0;
  int last_shift_ = -1;
  int last_bc_ = -1;
};

// Offline replay of the gate over a dense projection run; the batch-side
// reference for the online/offline equivalence contract. Frames before
// warmup_frames update the gate but their decisions are discarded, mirroring
// the engine's warmup suppression.
inline std::vector<StreamDecision> decisions_from_projections(const FrameProjections& proj,
                                                              const VadTrack& vad,
                                                              const GateConfig& config,
                                                              int warmup_frames = 0) {
  DecisionGate gate(config);
  std::vector<StreamDecision> decisions;
  for (int f = 0; f < proj.frames(); ++f) {
    auto fired = gate.update(
        f, {vad.rows[0][static_cast<std::size_t>(f)], vad.rows[1][static_cast<std::size_t>(f)]},
        proj.p_future[static_cast<std::size_t>(f)], proj.bc_prob[static_cast<std::size_t>(f)]);
    if (f + 1 < warmup_frames) continue;
    decisions.insert(decisions.end(), fired.begin(), fired.end());
  }
  return decisions;
}

// ---------------------------------------------------------------------------
// Streaming engine
// ---------------------------------------------------------------------------

template <typename S>
struct StepInput {
  int frame = -1;
  std::array<std::vector<S>, 2> audio;       // samples-per-frame each
  std::array<std::vector<float>, 2> face;    // kFacePixels each, or empty
  std::array<std::vector<float>, 2> au, gaze, head, body;  // per-frame rows, or empty
  std::array<std::uint8_t, 2> vad{};
};

template <typename S>
struct StepOutput {
  int frame = 0;
  bool warmup = true;
  std::array<double, 2> p_now{};
  std::array<double, 2> p_future{};
  double bc_prob = 0.0;  // for the current listener
  std::vector<StreamDecision> fired;
  double step_ms = 0.0;
};

// Simulated real-time inference: a ring buffer of the last window_frames
// frame bundles (zero-padded during warmup) is run through the model at every
// step and the newest frame's projection drives the decision gate.
template <typename S>
class StreamEngine {
 public:
  StreamEngine(const VapModel<S>& model, const GateConfig& gate_config = {},
               int window_frames = kWindowSeconds * 25,
               int samples_per_frame = kSamplesPerFrame)
      : model_(&model), gate_(gate_config), window_frames_(window_frames), spf_(samples_per_frame) {
    const VariantConfig& variant = model.variant();
    needs_face_ = variant.has(Modality::kFace);
    needs_aux_ = variant.has(Modality::kAu) || variant.has(Modality::kGaze) ||
                 variant.has(Modality::kHead) || variant.has(Modality::kBody);
  }

  int frames_seen() const { return frames_seen_; }

  StepOutput<S> step(const StepInput<S>& input) {
    auto wall_start = std::chrono::steady_clock::now();
    require<ProtocolError>(input.frame == frames_seen_,
                           "out-of-order frame: expected " + std::to_string(frames_seen_) +
                               ", got " + std::to_string(input.frame));
    for (int p = 0; p < 2; ++p) {
      require<DimensionError>(static_cast<int>(input.audio[static_cast<std::size_t>(p)].size()) == spf_,
                              "audio bundle must carry one frame of samples");
      if (needs_face_)
        require<ConfigError>(static_cast<int>(input.face[static_cast<std::size_t>(p)].size()) == kFacePixels,
                             "variant needs face frames in the bundle");
    }
    ring_.push_back(input);
    if (static_cast<int>(ring_.size()) > window_frames_) ring_.pop_front();
    ++frames_seen_;

    WindowInput<S> window = assemble_window();
    std::array<std::array<double, 2>, 2> projections{};  // p_now, p_future
    std::array<double, 2> bc{};
    {
      NoGradGuard guard;
      ModelOutput<S> out = model_->predict(window);
      Tensor<S> probs = softmax_rows(out.vap_logits->value);
      VapDistribution dist = distribution_at(probs, window_frames_ - 1);
      SpeakerProjection proj = project_speaker_probs(dist);
      projections[0] = proj.p_now;
      projections[1] = proj.p_future;
      bc = {backchannel_pattern_prob(dist, 0), backchannel_pattern_prob(dist, 1)};
    }

    StepOutput<S> out;
    out.frame = input.frame;
    out.warmup = frames_seen_ < window_frames_;
    out.p_now = projections[0];
    out.p_future = projections[1];
    out.fired = gate_.update(input.frame, input.vad, projections[1], bc);
    out.bc_prob = bc[static_cast<std::size_t>(1 - gate_.current_speaker())];
    if (out.warmup) out.fired.clear();
    auto wall_end = std::chrono::steady_clock::now();
    out.step_ms = std::chrono::duration<double, std::milli>(wall_end - wall_start).count();
    step_times_ms_.push_back(out.step_ms);
    return out;
  }

  const std::vector<double>& step_times_ms() const { return step_times_ms_; }

  double percentile_ms(double q) const {
    require<ValidationError>(!step_times_ms_.empty(), "no steps recorded");
    std::vector<double> sorted = step_times_ms_;
    std::sort(sorted.begin(), sorted.end());
    double idx = q * (sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(idx);
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double w = idx - lo;
    return sorted[lo] * (1 - w) + sorted[hi] * w;
  }

 private:
  // Ring-buffer face view; indices before the buffered range are zero images.
  class RingFaceSequence : public FaceSequence {
   public:
    RingFaceSequence(const std::deque<StepInput<S>>* ring, int person, int window_frames)
        : ring_(ring), person_(person), window_frames_(window_frames) {}
    int frames() const override { return window_frames_; }
    void copy_frame(int frame, float* dst) const override {
      int pad = window_frames_ - static_cast<int>(ring_->size());
      int src = frame - pad;
      if (src < 0) {
        std::fill(dst, dst + kFacePixels, 0.0f);
        return;
      }
      const auto& face = (*ring_)[static_cast<std::size_t>(src)].face[static_cast<std::size_t>(person_)];
      std::copy(face.begin(), face.end(), dst);
    }

   private:
    const std::deque<StepInput<S>>* ring_;
    int person_ = 0;
    int window_frames_ = 0;
  };

  WindowInput<S> assemble_window() {
    WindowInput<S> window;
    window.frames = window_frames_;
    const int pad = window_frames_ - static_cast<int>(ring_.size());
    for (int p = 0; p < 2; ++p) {
      PersonInput<S>& person = window.persons[static_cast<std::size_t>(p)];
      person.audio.assign(static_cast<std::size_t>(window_frames_) * spf_, S(0));
      for (std::size_t r = 0; r < ring_.size(); ++r) {
        const auto& frame_audio = ring_[r].audio[static_cast<std::size_t>(p)];
        std::copy(frame_audio.begin(), frame_audio.end(),
                  person.audio.begin() + (static_cast<std::size_t>(pad) + r) * spf_);
      }
      if (needs_face_) {
        face_views_[static_cast<std::size_t>(p)] =
            std::make_shared<RingFaceSequence>(&ring_, p, window_frames_);
        person.faces = face_views_[static_cast<std::size_t>(p)].get();
      }
      if (needs_aux_) {
        auto fill = [&](Tensor<S>& dst, int dim, auto accessor) {
          dst = Tensor<S>({window_frames_, dim});
          for (std::size_t r = 0; r < ring_.size(); ++r) {
            const std::vector<float>& row = accessor(ring_[r]);
            require<ConfigError>(static_cast<int>(row.size()) == dim,
                                 "variant needs aux features in the bundle");
            for (int c = 0; c < dim; ++c)
              dst.at(pad + static_cast<int>(r), c) = static_cast<S>(row[static_cast<std::size_t>(c)]);
          }
        };
        fill(person.au, kAuDim, [p](const StepInput<S>& s) -> const std::vector<float>& {
          return s.au[static_cast<std::size_t>(p)];
        });
        fill(person.gaze, kGazeDim, [p](const StepInput<S>& s) -> const std::vector<float>& {
          return s.gaze[static_cast<std::size_t>(p)];
        });
        fill(person.head, kHeadDim, [p](const StepInput<S>& s) -> const std::vector<float>& {
          return s.head[static_cast<std::size_t>(p)];
        });
        fill(person.body, kBodyDim, [p](const StepInput<S>& s) -> const std::vector<float>& {
          return s.body[static_cast<std::size_t>(p)];
        });
      }
    }
    return window;
  }

  const VapModel<S>* model_;
  DecisionGate gate_;
  int window_frames_;
  int spf_;
  bool needs_face_ = false;
  bool needs_aux_ = false;
  int frames_seen_ = 0;
  std::deque<StepInput<S>> ring_;
  std::array<std::shared_ptr<FaceSequence>, 2> face_views_{};
  std::vector<double> step_times_ms_;
};

// Builds the per-frame bundle a dialogue replay feeds into the engine.
template <typename S>
StepInput<S> bundle_for_frame(const LoadedDialogue& dialogue, int frame) {
  const int spf = dialogue.sample_rate_hz / static_cast<int>(std::llround(dialogue.frame_rate_hz));
  StepInput<S> input;
  input.frame = frame;
  for (int p = 0; p < 2; ++p) {
    input.audio[static_cast<std::size_t>(p)].resize(static_cast<std::size_t>(spf));
    for (int i = 0; i < spf; ++i)
      input.audio[static_cast<std::size_t>(p)][static_cast<std::size_t>(i)] = static_cast<S>(
          pcm16_to_float(dialogue.audio_pcm[static_cast<std::size_t>(p)]
                                           [static_cast<std::size_t>(frame) * spf + i]));
    if (dialogue.has_faces()) {
      input.face[static_cast<std::size_t>(p)].resize(static_cast<std::size_t>(kFacePixels));
      dialogue.faces[static_cast<std::size_t>(p)]->copy_frame(
          frame, input.face[static_cast<std::size_t>(p)].data());
    }
    if (dialogue.has_aux()) {
      const AuxStreams& aux = dialogue.aux[static_cast<std::size_t>(p)];
      auto copy_row = [&](const Tensor<float>& src, std::vector<float>& dst) {
        dst.resize(static_cast<std::size_t>(src.cols()));
        for (int c = 0; c < src.cols(); ++c) dst[static_cast<std::size_t>(c)] = src.at(frame, c);
      };
      copy_row(aux.au, input.au[static_cast<std::size_t>(p)]);
      copy_row(aux.gaze, input.gaze[static_cast<std::size_t>(p)]);
      copy_row(aux.head, input.head[static_cast<std::size_t>(p)]);
      copy_row(aux.body, input.body[static_cast<std::size_t>(p)]);
    }
    input.vad[static_cast<std::size_t>(p)] =
        dialogue.vad.rows[static_cast<std::size_t>(p)][static_cast<std::size_t>(frame)];
  }
  return input;
}

}  // namespace vap
