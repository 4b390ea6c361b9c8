#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vap/common.hpp"

namespace vap {

enum class Modality { kAudio, kFace, kAu, kGaze, kHead, kBody };

inline constexpr std::array<Modality, 6> kAllModalities = {
    Modality::kAudio, Modality::kFace, Modality::kAu,
    Modality::kGaze,  Modality::kHead, Modality::kBody};

inline const char* modality_name(Modality m) {
  switch (m) {
    case Modality::kAudio: return "audio";
    case Modality::kFace: return "face";
    case Modality::kAu: return "au";
    case Modality::kGaze: return "gaze";
    case Modality::kHead: return "head";
    case Modality::kBody: return "body";
  }
  return "?";
}

inline Modality modality_from_name(const std::string& name) {
  for (Modality m : kAllModalities)
    if (name == modality_name(m)) return m;
  throw ConfigError("unknown modality: " + name);
}

// Hand-crafted feature widths: 17 action units, 2 gaze angles, 3 head angles,
// 13 upper-body joints as normalized 2-D coordinates.
inline constexpr int kAuDim = 17;
inline constexpr int kGazeDim = 2;
inline constexpr int kHeadDim = 3;
inline constexpr int kBodyDim = 26;

inline int aux_dim(Modality m) {
  switch (m) {
    case Modality::kAu: return kAuDim;
    case Modality::kGaze: return kGazeDim;
    case Modality::kHead: return kHeadDim;
    case Modality::kBody: return kBodyDim;
    default: throw ConfigError("not an aux modality");
  }
}

inline constexpr int kFaceChannels = 3;
inline constexpr int kFaceSize = 112;
inline constexpr int kFacePixels = kFaceChannels * kFaceSize * kFaceSize;

// Frame-addressable face stream. Implementations render procedurally, read
// from packed files, or wrap in-memory buffers; consumers only ever touch one
// frame at a time so a full dialogue never has to live in RAM.
class FaceSequence {
 public:
  virtual ~FaceSequence() = default;
  virtual int frames() const = 0;
  // dst receives kFacePixels floats in [0,1], channel-major.
  virtual void copy_frame(int frame, float* dst) const = 0;
};

class InMemoryFaceSequence : public FaceSequence {
 public:
  InMemoryFaceSequence() = default;
  explicit InMemoryFaceSequence(int frames)
      : data_(static_cast<std::size_t>(frames) * kFacePixels, 0.0f) {}

  int frames() const override {
    return static_cast<int>(data_.size() / kFacePixels);
  }

  void copy_frame(int frame, float* dst) const override {
    const float* src = &data_[static_cast<std::size_t>(frame) * kFacePixels];
    std::copy(src, src + kFacePixels, dst);
  }

  float* frame_data(int frame) { return &data_[static_cast<std::size_t>(frame) * kFacePixels]; }

 private:
  std::vector<float> data_;
};

}  // namespace vap
