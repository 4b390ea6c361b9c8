#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace vap {

// Stream clock shared by every module: frames at 25 Hz, audio at 16 kHz,
// so one frame spans exactly 640 samples.
inline constexpr double kDefaultFrameRateHz = 25.0;
inline constexpr int kDefaultSampleRateHz = 16000;
inline constexpr int kSamplesPerFrame = 640;
inline constexpr int kWindowSeconds = 20;
inline constexpr int kHorizonSeconds = 2;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/length mismatch between streams or tensors.
struct DimensionError : Error {
  using Error::Error;
};

// Value-level contract violation (non-binary VAD, unnormalized distribution, ...).
struct ValidationError : Error {
  using Error::Error;
};

// Inconsistent configuration (variant/stream mismatch, bad ratios, ...).
struct ConfigError : Error {
  using Error::Error;
};

// File-level failures; message carries the offending path.
struct IoError : Error {
  using Error::Error;
};

// Synthetic generation could not satisfy the config within bounded retries.
struct GenerationError : Error {
  using Error::Error;
};

// Streaming contract violations (out-of-order frames).
struct ProtocolError : Error {
  using Error::Error;
};

// Loss went non-finite; message names the batch index and seed.
struct TrainingError : Error {
  using Error::Error;
};

// Metric undefined on the given labels (single class present).
struct MetricError : Error {
  using Error::Error;
};

template <typename E = ValidationError>
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw E(msg);
}

inline long frames_from_seconds(double seconds, double frame_rate_hz) {
  return std::llround(seconds * frame_rate_hz);
}

}  // namespace vap
