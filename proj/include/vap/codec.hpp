#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vap/common.hpp"

namespace vap {

inline constexpr int kNumSpeakers = 2;
inline constexpr int kNumBins = 4;
inline constexpr int kNumVapStates = 256;

// Default majority vote: a bin counts as active when at least half of its
// frames are active.
inline constexpr double kDefaultActivityThreshold = 0.5;

using BinMatrix = std::array<std::array<std::uint8_t, kNumBins>, kNumSpeakers>;

// Future window split into per-speaker bins of increasing duration.
// The canonical layout is 0.2/0.4/0.6/0.8 s at 25 Hz -> 5/10/15/20 frames.
struct BinLayout {
  std::array<double, kNumBins> bin_durations_s;
  double frame_rate_hz = kDefaultFrameRateHz;
  std::array<int, kNumBins> bin_frame_counts{};
  int total_frames = 0;

  static BinLayout make(const std::array<double, kNumBins>& durations_s,
                        double frame_rate_hz) {
    require<ValidationError>(frame_rate_hz > 0.0, "frame rate must be positive");
    BinLayout layout;
    layout.bin_durations_s = durations_s;
    layout.frame_rate_hz = frame_rate_hz;
    layout.total_frames = 0;
    for (int b = 0; b < kNumBins; ++b) {
      double frames = durations_s[b] * frame_rate_hz;
      double rounded = std::round(frames);
      require<ValidationError>(
          durations_s[b] > 0.0 && std::abs(frames - rounded) < 1e-9,
          "bin duration " + std::to_string(durations_s[b]) +
              " s is not an integral number of frames at " +
              std::to_string(frame_rate_hz) + " Hz");
      layout.bin_frame_counts[b] = static_cast<int>(rounded);
      layout.total_frames += layout.bin_frame_counts[b];
    }
    return layout;
  }

  static BinLayout standard() { return make({0.2, 0.4, 0.6, 0.8}, kDefaultFrameRateHz); }
};

// Bit order: speaker 0 occupies bits 7..4, speaker 1 bits 3..0; within a
// speaker the nearest-future bin is most significant.
inline int vap_bit_weight(int speaker, int bin) {
  return 1 << (7 - (kNumBins * speaker + bin));
}

inline bool vap_state_bit(int index, int speaker, int bin) {
  return (index & vap_bit_weight(speaker, bin)) != 0;
}

inline int encode_bits(const BinMatrix& bits) {
  int index = 0;
  for (int s = 0; s < kNumSpeakers; ++s)
    for (int b = 0; b < kNumBins; ++b) {
      require<ValidationError>(bits[s][b] <= 1, "bin matrix entries must be 0 or 1");
      if (bits[s][b]) index += vap_bit_weight(s, b);
    }
  return index;
}

inline BinMatrix decode_state(int index) {
  require<ValidationError>(index >= 0 && index < kNumVapStates,
                           "VAP state index out of range: " + std::to_string(index));
  BinMatrix bits{};
  for (int s = 0; s < kNumSpeakers; ++s)
    for (int b = 0; b < kNumBins; ++b)
      bits[s][b] = vap_state_bit(index, s, b) ? 1 : 0;
  return bits;
}

// Collapse a 2 x total_frames future-activity matrix into a VAP state.
// A bin is active when the fraction of active frames reaches the threshold.
inline int encode_window(std::span<const std::uint8_t> speaker0,
                         std::span<const std::uint8_t> speaker1,
                         const BinLayout& layout,
                         double activity_threshold = kDefaultActivityThreshold) {
  require<ValidationError>(activity_threshold > 0.0 && activity_threshold <= 1.0,
                           "activity threshold must lie in (0, 1]");
  const std::size_t want = static_cast<std::size_t>(layout.total_frames);
  if (speaker0.size() != want || speaker1.size() != want)
    throw DimensionError("future VAD window must have exactly " +
                         std::to_string(layout.total_frames) + " frames per speaker");
  const std::array<std::span<const std::uint8_t>, 2> rows{speaker0, speaker1};
  BinMatrix bits{};
  for (int s = 0; s < kNumSpeakers; ++s) {
    std::size_t offset = 0;
    for (int b = 0; b < kNumBins; ++b) {
      int active = 0;
      for (int f = 0; f < layout.bin_frame_counts[b]; ++f) {
        std::uint8_t v = rows[s][offset + f];
        require<ValidationError>(v <= 1, "future VAD must be binary");
        active += v;
      }
      double fraction = static_cast<double>(active) / layout.bin_frame_counts[b];
      bits[s][b] = fraction >= activity_threshold ? 1 : 0;
      offset += layout.bin_frame_counts[b];
    }
  }
  return encode_bits(bits);
}

// Per-frame probability over the 256 VAP states.
struct VapDistribution {
  std::array<double, kNumVapStates> probs{};

  void validate() const {
    double sum = 0.0;
    for (double p : probs) {
      require<ValidationError>(p >= 0.0, "VAP distribution entries must be non-negative");
      sum += p;
    }
    require<ValidationError>(std::abs(sum - 1.0) <= 1e-6,
                             "VAP distribution must sum to 1, got " + std::to_string(sum));
  }
};

struct SpeakerProjection {
  std::array<double, kNumSpeakers> p_now{};
  std::array<double, kNumSpeakers> p_future{};
};

// Marginal activity probability per (speaker, bin): mass of states where that
// bin is set.
inline std::array<std::array<double, kNumBins>, kNumSpeakers> bin_marginals(
    const VapDistribution& dist) {
  std::array<std::array<double, kNumBins>, kNumSpeakers> q{};
  for (int k = 0; k < kNumVapStates; ++k) {
    if (dist.probs[k] == 0.0) continue;
    for (int s = 0; s < kNumSpeakers; ++s)
      for (int b = 0; b < kNumBins; ++b)
        if (vap_state_bit(k, s, b)) q[s][b] += dist.probs[k];
  }
  return q;
}

// p_now averages the two nearer bins, p_future the two farther bins.
inline SpeakerProjection project_speaker_probs(const VapDistribution& dist) {
  dist.validate();
  auto q = bin_marginals(dist);
  SpeakerProjection proj;
  for (int s = 0; s < kNumSpeakers; ++s) {
    proj.p_now[s] = 0.5 * (q[s][0] + q[s][1]);
    proj.p_future[s] = 0.5 * (q[s][2] + q[s][3]);
  }
  return proj;
}

// Mass of states that look like a listener interjection: the listener is
// active in the two nearest bins while the other speaker is active in the two
// farthest bins (turn retained).
inline double backchannel_pattern_prob(const VapDistribution& dist, int listener) {
  dist.validate();
  require<ValidationError>(listener == 0 || listener == 1, "listener must be 0 or 1");
  const int other = 1 - listener;
  double mass = 0.0;
  for (int k = 0; k < kNumVapStates; ++k) {
    if (vap_state_bit(k, listener, 0) && vap_state_bit(k, listener, 1) &&
        vap_state_bit(k, other, 2) && vap_state_bit(k, other, 3))
      mass += dist.probs[k];
  }
  return mass;
}

// Tab-separated state table (index, speaker-0 bits, speaker-1 bits), one row
// per state; used for golden-file checks.
inline void codec_dump(std::ostream& out) {
  for (int k = 0; k < kNumVapStates; ++k) {
    BinMatrix bits = decode_state(k);
    out << k;
    for (int s = 0; s < kNumSpeakers; ++s) {
      out << '\t';
      for (int b = 0; b < kNumBins; ++b) out << static_cast<int>(bits[s][b]);
    }
    out << '\n';
  }
}

}  // namespace vap
