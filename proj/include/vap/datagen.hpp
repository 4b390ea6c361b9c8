#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vap/common.hpp"
#include "vap/events.hpp"
#include "vap/modality.hpp"
#include "vap/rng.hpp"
#include "vap/tensor.hpp"
#include "vap/vad_track.hpp"

namespace vap {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

enum class CueType { kPreShift, kPreBackchannel, kHoldMarker };
enum class CueCarrier { kAudio, kFace, kBoth, kNone };

inline const char* cue_type_name(CueType t) {
  switch (t) {
    case CueType::kPreShift: return "pre_shift";
    case CueType::kPreBackchannel: return "pre_bc";
    case CueType::kHoldMarker: return "hold_marker";
  }
  return "?";
}

inline const char* cue_carrier_name(CueCarrier c) {
  switch (c) {
    case CueCarrier::kAudio: return "audio";
    case CueCarrier::kFace: return "face";
    case CueCarrier::kBoth: return "both";
    case CueCarrier::kNone: return "none";
  }
  return "?";
}

inline CueCarrier cue_carrier_from_name(const std::string& name) {
  for (CueCarrier c :
       {CueCarrier::kAudio, CueCarrier::kFace, CueCarrier::kBoth, CueCarrier::kNone})
    if (name == cue_carrier_name(c)) return c;
  throw ConfigError("unknown cue carrier: " + name);
}

inline bool carried_by_audio(CueCarrier c) {
  return c == CueCarrier::kAudio || c == CueCarrier::kBoth;
}
inline bool carried_by_face(CueCarrier c) {
  return c == CueCarrier::kFace || c == CueCarrier::kBoth;
}

struct CueSetting {
  CueCarrier carrier = CueCarrier::kNone;
  double strength = 0.0;
};

// Planted audio cue template constants, shared with detection oracles.
inline constexpr double kChirpStartHz = 2000.0;
inline constexpr double kChirpEndHz = 300.0;
inline constexpr double kChirpAmplitude = 0.35;
inline constexpr double kHoldToneHz = 1200.0;
inline constexpr double kHoldToneAmplitude = 0.3;
inline constexpr double kInbreathAmplitude = 0.1;
inline constexpr double kVoiceAmplitude = 0.25;

struct DialogueConfig {
  double duration_s = 120.0;
  // utterance lengths: log-normal by default, exponential gives memoryless turns
  double utterance_mu = std::log(3.5);
  double utterance_sigma = 0.55;
  bool exponential_utterances = false;
  double utterance_mean_s = 4.0;  // exponential option only
  double min_utterance_s = 1.2;   // floor keeps plain speech out of the backchannel rule
  double max_utterance_s = 14.0;
  // inter-turn gaps and intra-turn pauses
  double gap_mu = std::log(0.4);
  double gap_sigma = 0.45;
  double max_gap_s = 1.5;
  double pause_mu = std::log(0.35);
  double pause_sigma = 0.35;
  double max_pause_s = 0.9;
  double continue_probability = 0.35;  // same speaker continues after a pause
  double overlap_probability = 0.1;
  double backchannel_rate_per_min = 2.0;
  std::map<CueType, CueSetting> cue_spec;
  double cue_duration_s = 0.5;
  std::uint64_t seed = 0;
  double frame_rate_hz = kDefaultFrameRateHz;
  int sample_rate_hz = kDefaultSampleRateHz;
  bool with_faces = true;
  bool with_aux = true;

  CueSetting cue(CueType t) const {
    auto it = cue_spec.find(t);
    return it == cue_spec.end() ? CueSetting{} : it->second;
  }

  void validate() const {
    require<ConfigError>(duration_s >= 30.0, "dialogue duration must be at least 30 s");
    require<ConfigError>(backchannel_rate_per_min >= 0.0, "backchannel rate must be >= 0");
    require<ConfigError>(overlap_probability >= 0.0 && overlap_probability <= 1.0,
                         "overlap probability must lie in [0,1]");
    require<ConfigError>(continue_probability >= 0.0 && continue_probability < 1.0,
                         "continue probability must lie in [0,1)");
    require<ConfigError>(cue_duration_s > 0.0, "cue duration must be positive");
    for (const auto& [type, setting] : cue_spec)
      require<ConfigError>(setting.strength >= 0.0 && setting.strength <= 1.0,
                           std::string("cue strength out of [0,1] for ") + cue_type_name(type));
    require<ConfigError>(min_utterance_s > 1.0,
                         "utterances of 1 s or less would collide with the backchannel rule");
    require<ConfigError>(std::llround(frame_rate_hz) > 0, "frame rate must be positive");
    require<ConfigError>(sample_rate_hz % static_cast<int>(std::llround(frame_rate_hz)) == 0,
                         "sample rate must be divisible by frame rate");
  }
};

// ---------------------------------------------------------------------------
// VAD sampling
// ---------------------------------------------------------------------------

// Alternating-turn semi-Markov process. A turn is one or more utterances
// separated by short pauses (those yield HOLD events); turns alternate across
// speakers with sampled gaps and occasional overlaps. Listener backchannel
// chunks are carved into the speaker's turn, so chunks never overlap speech
// and the only overlap source is turn transitions.
inline VadTrack sample_vad(const DialogueConfig& config) {
  config.validate();
  Rng rng = Rng(config.seed).child(1);
  const double fps = config.frame_rate_hz;
  const int fps_i = static_cast<int>(std::llround(fps));
  const int n = static_cast<int>(std::llround(config.duration_s * fps));
  auto frames_of = [&](double seconds) {
    return std::max(1, static_cast<int>(std::llround(seconds * fps)));
  };

  const int min_utt = frames_of(config.min_utterance_s);
  const int max_utt = frames_of(config.max_utterance_s);
  const int max_gap = frames_of(config.max_gap_s);
  const int max_pause = frames_of(config.max_pause_s);

  VadTrack track;
  track.frame_rate_hz = fps;
  track.rows[0].assign(static_cast<std::size_t>(n), 0);
  track.rows[1].assign(static_cast<std::size_t>(n), 0);
  std::array<std::vector<Segment>, 2> segments;

  auto draw_utterance = [&]() {
    double len = config.exponential_utterances
                     ? rng.exponential(config.utterance_mean_s)
                     : rng.lognormal(config.utterance_mu, config.utterance_sigma);
    return std::clamp(frames_of(len), min_utt, max_utt);
  };

  int speaker = rng.bernoulli(0.5) ? 1 : 0;
  int cursor = rng.uniform_int(3, 20);
  bool room = true;
  while (room) {
    // one turn: an utterance chain with intra-turn pauses
    while (true) {
      int len = draw_utterance();
      if (cursor + len + 1 > n) {
        room = false;
        break;
      }
      segments[static_cast<std::size_t>(speaker)].push_back({speaker, cursor, cursor + len});
      cursor += len;
      if (!rng.bernoulli(config.continue_probability)) break;
      int pause = std::clamp(frames_of(rng.lognormal(config.pause_mu, config.pause_sigma)), 2,
                             max_pause);
      if (cursor + pause + min_utt + 1 > n) break;
      cursor += pause;
    }
    if (!room) break;
    int gap = std::clamp(frames_of(rng.lognormal(config.gap_mu, config.gap_sigma)), 1, max_gap);
    if (rng.bernoulli(config.overlap_probability)) {
      const Segment& last = segments[static_cast<std::size_t>(speaker)].back();
      int overlap = frames_of(rng.uniform(0.1, 0.4));
      gap = -std::min(overlap, last.length() / 2);
    }
    int next_start = cursor + gap;
    if (next_start < 0 || next_start + min_utt + 1 > n) break;
    cursor = next_start;
    speaker = 1 - speaker;
  }

  for (int s = 0; s < 2; ++s)
    for (const Segment& seg : segments[static_cast<std::size_t>(s)])
      for (int f = seg.start_frame; f < seg.end_frame; ++f)
        track.rows[static_cast<std::size_t>(s)][static_cast<std::size_t>(f)] = 1;

  // listener backchannel chunks, carved out of the speaker's activity
  const int target = static_cast<int>(std::llround(config.backchannel_rate_per_min *
                                                   config.duration_s / 60.0));
  if (target > 0) {
    std::vector<Segment> all;
    for (int s = 0; s < 2; ++s)
      all.insert(all.end(), segments[static_cast<std::size_t>(s)].begin(),
                 segments[static_cast<std::size_t>(s)].end());
    require<GenerationError>(!all.empty(), "no utterances to host backchannels");
    const int edge = frames_of(1.1);       // distance from utterance edges
    const int hole_guard = frames_of(1.05) + 1;  // min spacing between carved holes
    int placed = 0;
    int attempts = 0;
    const int max_attempts = 200 * target + 200;
    while (placed < target && attempts < max_attempts) {
      ++attempts;
      const Segment& seg = all[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(all.size()) - 1))];
      int chunk = std::clamp(frames_of(rng.uniform(0.3, 1.0)), 5, fps_i);
      if (seg.length() < 2 * edge + chunk + 2) continue;
      int onset = seg.start_frame + edge +
                  rng.uniform_int(0, seg.length() - 2 * edge - chunk);
      int end = onset + chunk;
      int holder = seg.speaker;
      int listener = 1 - holder;
      // the listener must own 2 s of silence on both sides (track edges count
      // as unusable) so this chunk and previously placed ones stay valid
      if (onset - 2 * fps_i < 0 || end + 2 * fps_i > n) continue;
      bool ok = true;
      for (int f = onset - 2 * fps_i; f < end + 2 * fps_i && ok; ++f)
        if (track.active(listener, f)) ok = false;
      // the holder must be continuously active around the hole so carved
      // pieces stay longer than 1 s
      for (int f = onset - hole_guard; f < end + hole_guard && ok; ++f)
        if (!track.active(holder, f)) ok = false;
      if (!ok) continue;
      for (int f = onset; f < end; ++f) {
        track.rows[static_cast<std::size_t>(holder)][static_cast<std::size_t>(f)] = 0;
        track.rows[static_cast<std::size_t>(listener)][static_cast<std::size_t>(f)] = 1;
      }
      ++placed;
    }
    require<GenerationError>(placed >= target,
                             "could not place " + std::to_string(target) +
                                 " backchannels (placed " + std::to_string(placed) +
                                 ") within bounded retries; lower the rate or extend the dialogue");
  }
  return track;
}

// ---------------------------------------------------------------------------
// Audio rendering
// ---------------------------------------------------------------------------

// Harmonic voice with a little noise per speaker; planted cues are added on
// top: a downward chirp before shift gaps, a level tone before hold gaps, and
// an inbreath-like burst on the listener channel before backchannel chunks.
// Silent samples outside cue margins are exactly zero.
inline std::array<std::vector<float>, 2> render_audio(
    const VadTrack& track, const std::map<CueType, CueSetting>& cue_spec, std::uint64_t seed,
    double cue_duration_s = 0.5, int sample_rate_hz = kDefaultSampleRateHz) {
  track.validate();
  const int fps_i = static_cast<int>(std::llround(track.frame_rate_hz));
  require<ConfigError>(sample_rate_hz % fps_i == 0, "sample rate must divide by frame rate");
  const int spf = sample_rate_hz / fps_i;
  const long total = static_cast<long>(track.duration_frames()) * spf;
  std::array<std::vector<float>, 2> out;
  out[0].assign(static_cast<std::size_t>(total), 0.0f);
  out[1].assign(static_cast<std::size_t>(total), 0.0f);

  Rng rng = Rng(seed).child(2);
  const double sr = sample_rate_hz;
  for (int s = 0; s < 2; ++s) {
    double f0 = s == 0 ? rng.uniform(105.0, 140.0) : rng.uniform(175.0, 220.0);
    std::array<double, 5> harmonics = {1.0, 0.6, 0.45, 0.3, 0.2};
    std::array<double, 5> phase;
    for (auto& p : phase) p = rng.uniform(0.0, 2.0 * M_PI);
    double vibrato_phase = rng.uniform(0.0, 2.0 * M_PI);
    double norm = 0.0;
    for (double h : harmonics) norm += h;
    Rng noise = rng.child(10 + static_cast<std::uint64_t>(s));

    auto& row = track.rows[static_cast<std::size_t>(s)];
    int f = 0;
    while (f < track.duration_frames()) {
      if (!row[static_cast<std::size_t>(f)]) {
        ++f;
        continue;
      }
      int run_start = f;
      while (f < track.duration_frames() && row[static_cast<std::size_t>(f)]) ++f;
      long s0 = static_cast<long>(run_start) * spf;
      long s1 = static_cast<long>(f) * spf;
      long ramp = std::min<long>(sample_rate_hz / 100, (s1 - s0) / 4);  // 10 ms fades
      for (long i = s0; i < s1; ++i) {
        double t = static_cast<double>(i) / sr;
        double wobble = 1.0 + 0.02 * std::sin(2.0 * M_PI * 1.3 * t + vibrato_phase);
        double v = 0.0;
        for (std::size_t k = 0; k < harmonics.size(); ++k)
          v += harmonics[k] * std::sin(2.0 * M_PI * f0 * wobble * (k + 1) * t + phase[k]);
        v /= norm;
        double env = 1.0;
        if (ramp > 0) {
          env = std::min(env, static_cast<double>(i - s0) / ramp);
          env = std::min(env, static_cast<double>(s1 - i) / ramp);
          env = std::max(env, 0.0);
        }
        out[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] = static_cast<float>(
            kVoiceAmplitude * env * (0.92 * v + 0.08 * noise.uniform(-1.0, 1.0)));
      }
    }
  }

  // planted cues, anchored on extracted events so they mark exactly the
  // instances the evaluation will score
  const int cue_frames = std::max(1, static_cast<int>(std::llround(cue_duration_s * track.frame_rate_hz)));
  auto cue_of = [&cue_spec](CueType t) {
    auto it = cue_spec.find(t);
    return it == cue_spec.end() ? CueSetting{} : it->second;
  };
  CueSetting pre_shift = cue_of(CueType::kPreShift);
  CueSetting hold_marker = cue_of(CueType::kHoldMarker);
  CueSetting pre_bc = cue_of(CueType::kPreBackchannel);

  auto add_sweep = [&](int channel, long c0, long c1, double start_hz, double end_hz,
                       double amplitude) {
    const double dur = static_cast<double>(c1 - c0) / sr;
    long ramp = std::min<long>(sample_rate_hz / 200, (c1 - c0) / 4);
    for (long i = c0; i < c1; ++i) {
      double tau = static_cast<double>(i - c0) / sr;
      double ph = 2.0 * M_PI * (start_hz * tau + 0.5 * (end_hz - start_hz) * tau * tau / dur);
      double env = 1.0;
      if (ramp > 0) {
        env = std::min({1.0, static_cast<double>(i - c0) / ramp,
                        static_cast<double>(c1 - i) / ramp});
        env = std::max(env, 0.0);
      }
      out[static_cast<std::size_t>(channel)][static_cast<std::size_t>(i)] +=
          static_cast<float>(amplitude * env * std::sin(ph));
    }
  };

  if (carried_by_audio(pre_shift.carrier) || carried_by_audio(hold_marker.carrier)) {
    for (const TurnEvent& e : extract_shift_hold(track)) {
      int w0 = e.start_frame - cue_frames;
      if (w0 < 0) continue;
      long c0 = static_cast<long>(w0) * spf;
      long c1 = static_cast<long>(e.start_frame) * spf;
      if (e.kind == EventKind::kShift && carried_by_audio(pre_shift.carrier) &&
          pre_shift.strength > 0.0)
        add_sweep(*e.prev_speaker, c0, c1, kChirpStartHz, kChirpEndHz,
                  kChirpAmplitude * pre_shift.strength);
      if (e.kind == EventKind::kHold && carried_by_audio(hold_marker.carrier) &&
          hold_marker.strength > 0.0)
        add_sweep(*e.prev_speaker, c0, c1, kHoldToneHz, kHoldToneHz,
                  kHoldToneAmplitude * hold_marker.strength);
    }
  }
  if (carried_by_audio(pre_bc.carrier) && pre_bc.strength > 0.0) {
    for (const TurnEvent& e : extract_backchannel(track, 0)) {
      if (e.kind != EventKind::kBackchannelPos) continue;
      int onset = e.end_frame;
      int w0 = onset - cue_frames;
      if (w0 < 0) continue;
      long c0 = static_cast<long>(w0) * spf;
      long c1 = static_cast<long>(onset) * spf;
      Rng breath = Rng(seed).child(0xb2ea7ull + static_cast<std::uint64_t>(onset));
      for (long i = c0; i < c1; ++i) {
        double tau = static_cast<double>(i - c0) / static_cast<double>(c1 - c0);
        double env = std::sin(M_PI * tau);  // hann-like
        out[static_cast<std::size_t>(*e.next_speaker)][static_cast<std::size_t>(i)] +=
            static_cast<float>(kInbreathAmplitude * pre_bc.strength * env *
                               breath.uniform(-1.0, 1.0));
      }
    }
  }

  for (auto& channel : out)
    for (auto& v : channel) v = std::clamp(v, -0.999f, 0.999f);
  return out;
}

inline std::int16_t float_to_pcm16(float v) {
  float clamped = std::clamp(v, -1.0f, 1.0f);
  return static_cast<std::int16_t>(std::lround(clamped * 32767.0f));
}

inline float pcm16_to_float(std::int16_t v) { return static_cast<float>(v) / 32767.0f; }

// ---------------------------------------------------------------------------
// Face rendering
// ---------------------------------------------------------------------------

struct FaceGeometry {
  double cx = 0, cy = 0, rx = 0, ry = 0;  // ellipse center and radii in pixels
};

struct FaceState {
  double mouth_open = 0.0;   // [0,1]
  double brow_raise = 0.0;   // [-1,1]
};

// Ellipse head, eye squares, brow bars whose height tracks brow_raise, and a
// mouth bar whose height tracks mouth_open. Channel-major float image.
inline void paint_synthetic_face(float* img, int height, int width, const FaceGeometry& g,
                                 const FaceState& st) {
  const std::array<float, 3> tint = {1.0f, 0.95f, 0.9f};
  auto fill_rect = [&](double x0, double x1, double y0, double y1, float value) {
    int ix0 = std::max(0, static_cast<int>(std::lround(x0)));
    int ix1 = std::min(width, static_cast<int>(std::lround(x1)));
    int iy0 = std::max(0, static_cast<int>(std::lround(y0)));
    int iy1 = std::min(height, static_cast<int>(std::lround(y1)));
    for (int c = 0; c < 3; ++c)
      for (int y = iy0; y < iy1; ++y)
        for (int x = ix0; x < ix1; ++x)
          img[(static_cast<std::size_t>(c) * height + y) * width + x] = value * tint[static_cast<std::size_t>(c)];
  };
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        double dx = (x - g.cx) / g.rx;
        double dy = (y - g.cy) / g.ry;
        float v = dx * dx + dy * dy <= 1.0 ? 0.75f : 0.08f;
        img[(static_cast<std::size_t>(c) * height + y) * width + x] = v * tint[static_cast<std::size_t>(c)];
      }
  // eyes
  for (int side : {-1, 1}) {
    double ex = g.cx + side * 0.45 * g.rx;
    double ey = g.cy - 0.25 * g.ry;
    fill_rect(ex - 0.08 * g.rx, ex + 0.08 * g.rx, ey - 0.05 * g.ry, ey + 0.05 * g.ry, 0.15f);
    // brow above the eye, lifted by brow_raise
    double by = g.cy - 0.45 * g.ry - 0.30 * g.ry * st.brow_raise;
    fill_rect(ex - 0.14 * g.rx, ex + 0.14 * g.rx, by - 0.05 * g.ry, by + 0.05 * g.ry, 0.2f);
  }
  // mouth; raised brows narrow it
  double mh = (0.05 + 0.3 * std::clamp(st.mouth_open, 0.0, 1.0)) * g.ry;
  double mw = 0.35 * (1.0 - 0.25 * std::clamp(st.brow_raise, 0.0, 1.0)) * g.rx;
  double my = g.cy + 0.45 * g.ry;
  fill_rect(g.cx - mw, g.cx + mw, my - mh / 2, my + mh / 2, 0.12f);
}

// Renders frames on demand from precomputed per-frame expression states, so a
// dialogue's face stream never has to be materialized.
class ProceduralFaceSequence : public FaceSequence {
 public:
  ProceduralFaceSequence(const VadTrack& track, int person,
                         const std::map<CueType, CueSetting>& cue_spec, double cue_duration_s,
                         std::uint64_t seed)
      : frames_(track.duration_frames()) {
    Rng rng = Rng(seed).child(3 + static_cast<std::uint64_t>(person));
    geom_.cx = kFaceSize * rng.uniform(0.47, 0.53);
    geom_.cy = kFaceSize * rng.uniform(0.47, 0.53);
    geom_.rx = kFaceSize * rng.uniform(0.30, 0.40);
    geom_.ry = kFaceSize * rng.uniform(0.38, 0.46);
    mouth_.assign(static_cast<std::size_t>(frames_), 0.05f);
    brow_.assign(static_cast<std::size_t>(frames_), 0.0f);
    for (int f = 0; f < frames_; ++f)
      if (track.active(person, f)) mouth_[static_cast<std::size_t>(f)] = 0.9f;

    auto cue_of = [&cue_spec](CueType t) {
      auto it = cue_spec.find(t);
      return it == cue_spec.end() ? CueSetting{} : it->second;
    };
    CueSetting pre_shift = cue_of(CueType::kPreShift);
    CueSetting hold_marker = cue_of(CueType::kHoldMarker);
    CueSetting pre_bc = cue_of(CueType::kPreBackchannel);
    const int cue_frames = std::max(1, static_cast<int>(std::llround(cue_duration_s * track.frame_rate_hz)));

    // ramp with a floor so the deformation is visible over the whole window
    auto ramp_into = [&](int end_frame, double scale) {
      int w0 = end_frame - cue_frames;
      if (w0 < 0) return;
      for (int f = w0; f < end_frame; ++f) {
        double r = 0.4 + 0.6 * static_cast<double>(f - w0 + 1) / cue_frames;
        float v = static_cast<float>(scale * r);
        auto& cell = brow_[static_cast<std::size_t>(f)];
        cell = std::abs(v) > std::abs(cell) ? v : cell;
      }
    };

    if (carried_by_face(pre_shift.carrier) || carried_by_face(hold_marker.carrier)) {
      for (const TurnEvent& e : extract_shift_hold(track)) {
        if (e.prev_speaker != person) continue;
        if (e.kind == EventKind::kShift && carried_by_face(pre_shift.carrier))
          ramp_into(e.start_frame, pre_shift.strength);
        if (e.kind == EventKind::kHold && carried_by_face(hold_marker.carrier))
          ramp_into(e.start_frame, -hold_marker.strength);
      }
    }
    if (carried_by_face(pre_bc.carrier) && pre_bc.strength > 0.0) {
      for (const TurnEvent& e : extract_backchannel(track, 0)) {
        if (e.kind != EventKind::kBackchannelPos || e.next_speaker != person) continue;
        int onset = e.end_frame;
        int w0 = onset - cue_frames;
        if (w0 < 0) continue;
        for (int f = w0; f < onset; ++f) {
          double r = static_cast<double>(f - w0 + 1) / cue_frames;
          brow_[static_cast<std::size_t>(f)] =
              std::max(brow_[static_cast<std::size_t>(f)], static_cast<float>(0.8 * pre_bc.strength * r));
          mouth_[static_cast<std::size_t>(f)] =
              std::max(mouth_[static_cast<std::size_t>(f)], static_cast<float>(0.3 * pre_bc.strength * r));
        }
      }
    }
  }

  int frames() const override { return frames_; }

  void copy_frame(int frame, float* dst) const override {
    FaceState st;
    st.mouth_open = mouth_[static_cast<std::size_t>(frame)];
    st.brow_raise = brow_[static_cast<std::size_t>(frame)];
    paint_synthetic_face(dst, kFaceSize, kFaceSize, geom_, st);
  }

  const FaceGeometry& geometry() const { return geom_; }
  float brow_at(int frame) const { return brow_[static_cast<std::size_t>(frame)]; }

 private:
  int frames_ = 0;
  FaceGeometry geom_;
  std::vector<float> mouth_, brow_;
};

inline std::array<std::shared_ptr<FaceSequence>, 2> render_faces(
    const VadTrack& track, const std::map<CueType, CueSetting>& cue_spec, std::uint64_t seed,
    double cue_duration_s = 0.5) {
  return {std::make_shared<ProceduralFaceSequence>(track, 0, cue_spec, cue_duration_s, seed),
          std::make_shared<ProceduralFaceSequence>(track, 1, cue_spec, cue_duration_s, seed)};
}

// ---------------------------------------------------------------------------
// Aux feature streams
// ---------------------------------------------------------------------------

struct AuxStreams {
  Tensor<float> au, gaze, head, body;  // [frames, dim] each
};

// Smooth seeded oscillations plus a VAD-coupled component in the jaw-related
// AU channels and a small head component, mimicking extracted features.
inline std::array<AuxStreams, 2> generate_aux(const VadTrack& track, std::uint64_t seed) {
  const int n = track.duration_frames();
  const double fps = track.frame_rate_hz;
  std::array<AuxStreams, 2> out;
  for (int p = 0; p < 2; ++p) {
    Rng rng = Rng(seed).child(5 + static_cast<std::uint64_t>(p));
    auto make_stream = [&](int dim) {
      Tensor<float> t({n, dim});
      for (int d = 0; d < dim; ++d) {
        double freq = rng.uniform(0.05, 0.6);
        double ph = rng.uniform(0.0, 2.0 * M_PI);
        double amp = rng.uniform(0.1, 0.35);
        double walk = 0.0;
        for (int f = 0; f < n; ++f) {
          walk = std::clamp(walk + 0.03 * rng.normal(), -0.5, 0.5);
          t.data[static_cast<std::size_t>(f) * dim + d] =
              static_cast<float>(amp * std::sin(2.0 * M_PI * freq * f / fps + ph) + 0.2 * walk);
        }
      }
      return t;
    };
    AuxStreams& streams = out[static_cast<std::size_t>(p)];
    streams.au = make_stream(kAuDim);
    streams.gaze = make_stream(kGazeDim);
    streams.head = make_stream(kHeadDim);
    streams.body = make_stream(kBodyDim);
    // jaw/lip action units track own voice activity (3-frame smoothing)
    for (int f = 0; f < n; ++f) {
      double v = 0.0;
      for (int d = -1; d <= 1; ++d) {
        int g = std::clamp(f + d, 0, n - 1);
        v += track.active(p, g) ? 1.0 : 0.0;
      }
      v /= 3.0;
      streams.au.data[static_cast<std::size_t>(f) * kAuDim + 0] += static_cast<float>(0.7 * v);
      streams.au.data[static_cast<std::size_t>(f) * kAuDim + 1] += static_cast<float>(0.5 * v);
      streams.head.data[static_cast<std::size_t>(f) * kHeadDim + 0] += static_cast<float>(0.15 * v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dialogue assembly
// ---------------------------------------------------------------------------

struct DialogueSample {
  std::string id;
  VadTrack vad;
  std::array<std::vector<std::int16_t>, 2> audio_pcm;  // frames * 640 samples each
  std::array<std::shared_ptr<FaceSequence>, 2> faces{};  // null when disabled
  std::array<AuxStreams, 2> aux{};                       // empty when disabled
  int sample_rate_hz = kDefaultSampleRateHz;

  int frames() const { return vad.duration_frames(); }
  bool has_faces() const { return faces[0] != nullptr && faces[1] != nullptr; }
  bool has_aux() const { return !aux[0].au.empty(); }

  void validate() const {
    vad.validate();
    const int spf = sample_rate_hz / static_cast<int>(std::llround(vad.frame_rate_hz));
    for (int s = 0; s < 2; ++s)
      require<DimensionError>(static_cast<long>(audio_pcm[static_cast<std::size_t>(s)].size()) ==
                                  static_cast<long>(frames()) * spf,
                              "audio sample count must equal frames * samples-per-frame");
    if (has_faces())
      for (int s = 0; s < 2; ++s)
        require<DimensionError>(faces[static_cast<std::size_t>(s)]->frames() == frames(),
                                "face stream length mismatch");
    if (has_aux())
      for (int s = 0; s < 2; ++s)
        require<DimensionError>(aux[static_cast<std::size_t>(s)].au.rows() == frames(),
                                "aux stream length mismatch");
  }
};

inline std::uint64_t dialogue_seed(std::uint64_t master_seed, int index) {
  return mix_seed(master_seed ^ mix_seed(0xd1a70600ull + static_cast<std::uint64_t>(index)));
}

inline std::string dialogue_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "dlg_%04d", index);
  return buf;
}

inline DialogueSample generate_dialogue(const DialogueConfig& config, int index) {
  DialogueConfig local = config;
  local.seed = dialogue_seed(config.seed, index);
  DialogueSample sample;
  sample.id = dialogue_id(index);
  sample.sample_rate_hz = local.sample_rate_hz;
  sample.vad = sample_vad(local);
  auto audio = render_audio(sample.vad, local.cue_spec, local.seed, local.cue_duration_s,
                            local.sample_rate_hz);
  for (int s = 0; s < 2; ++s) {
    sample.audio_pcm[static_cast<std::size_t>(s)].resize(audio[static_cast<std::size_t>(s)].size());
    for (std::size_t i = 0; i < audio[static_cast<std::size_t>(s)].size(); ++i)
      sample.audio_pcm[static_cast<std::size_t>(s)][i] = float_to_pcm16(audio[static_cast<std::size_t>(s)][i]);
  }
  if (local.with_faces)
    sample.faces = render_faces(sample.vad, local.cue_spec, local.seed, local.cue_duration_s);
  if (local.with_aux) sample.aux = generate_aux(sample.vad, local.seed);
  sample.validate();
  return sample;
}

inline std::vector<DialogueSample> generate_dataset(const DialogueConfig& config, int count) {
  std::vector<DialogueSample> samples;
  samples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) samples.push_back(generate_dialogue(config, i));
  return samples;
}

}  // namespace vap
