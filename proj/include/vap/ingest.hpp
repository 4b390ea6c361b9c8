#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vap/codec.hpp"
#include "vap/dataset_io.hpp"
#include "vap/model.hpp"

namespace vap {

// ---------------------------------------------------------------------------
// Manifest loading
// ---------------------------------------------------------------------------

struct LoadedDialogue {
  std::string id;
  double frame_rate_hz = kDefaultFrameRateHz;
  int sample_rate_hz = kDefaultSampleRateHz;
  VadTrack vad;
  std::array<std::vector<std::int16_t>, 2> audio_pcm;
  std::array<std::shared_ptr<FaceSequence>, 2> faces{};
  std::array<AuxStreams, 2> aux{};

  int frames() const { return vad.duration_frames(); }
  bool has_faces() const { return faces[0] != nullptr; }
  bool has_aux() const { return !aux[0].au.empty(); }
};

// Validated handle on a dataset directory; dialogues load lazily with
// stream-length cross-checks that name the offending dialogue.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& manifest_path) : manifest_path_(manifest_path) {
    std::ifstream in(manifest_path);
    require<IoError>(in.good(), "cannot open manifest: " + manifest_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed manifest " + manifest_path + ": " + e.what());
    }
    manifest_ = manifest_from_json(j, manifest_path);
    root_ = std::filesystem::path(manifest_path).parent_path().string();
  }

  const Manifest& manifest() const { return manifest_; }
  int size() const { return static_cast<int>(manifest_.dialogues.size()); }

  LoadedDialogue load(int index) const {
    require<ValidationError>(index >= 0 && index < size(), "dialogue index out of range");
    const DialogueEntry& entry = manifest_.dialogues[static_cast<std::size_t>(index)];
    const int spf =
        manifest_.sample_rate_hz / static_cast<int>(std::llround(manifest_.frame_rate_hz));
    LoadedDialogue d;
    d.id = entry.id;
    d.frame_rate_hz = manifest_.frame_rate_hz;
    d.sample_rate_hz = manifest_.sample_rate_hz;

    int rate = 0;
    read_wav_pcm16_stereo(resolve(entry.audio), d.audio_pcm[0], d.audio_pcm[1], rate);
    require<ValidationError>(rate == manifest_.sample_rate_hz,
                             entry.id + ": wav sample rate disagrees with manifest");
    require<DimensionError>(
        static_cast<long>(d.audio_pcm[0].size()) == static_cast<long>(entry.frames) * spf,
        entry.id + ": audio length mismatch (expected " +
            std::to_string(static_cast<long>(entry.frames) * spf) + " samples, got " +
            std::to_string(d.audio_pcm[0].size()) + ")");

    std::array<std::vector<Segment>, 2> segments;
    for (int s = 0; s < 2; ++s)
      segments[static_cast<std::size_t>(s)] =
          read_vad_annotation(resolve(entry.vad[static_cast<std::size_t>(s)]), s,
                              manifest_.frame_rate_hz);
    d.vad = track_from_segments(segments, entry.frames, manifest_.frame_rate_hz);

    if (!entry.faces[0].empty()) {
      for (int s = 0; s < 2; ++s) {
        auto seq = std::make_shared<PackedFaceSequence>(resolve(entry.faces[static_cast<std::size_t>(s)]));
        require<DimensionError>(seq->frames() == entry.frames,
                                entry.id + ": face stream length mismatch");
        d.faces[static_cast<std::size_t>(s)] = seq;
      }
    }
    if (!entry.aux[0].empty()) {
      for (int s = 0; s < 2; ++s) {
        d.aux[static_cast<std::size_t>(s)] = read_aux_csv(resolve(entry.aux[static_cast<std::size_t>(s)]));
        require<DimensionError>(d.aux[static_cast<std::size_t>(s)].au.rows() == entry.frames,
                                entry.id + ": aux stream length mismatch");
      }
    }
    return d;
  }

  std::vector<LoadedDialogue> load_all() const {
    std::vector<LoadedDialogue> out;
    for (int i = 0; i < size(); ++i) out.push_back(load(i));
    return out;
  }

 private:
  std::string resolve(const std::string& relative) const {
    return (std::filesystem::path(root_) / relative).string();
  }

  std::string manifest_path_;
  std::string root_;
  Manifest manifest_;
};

// In-memory dialogues (generator output) presented through the same interface
// as disk datasets.
inline LoadedDialogue to_loaded(const DialogueSample& sample) {
  LoadedDialogue d;
  d.id = sample.id;
  d.frame_rate_hz = sample.vad.frame_rate_hz;
  d.sample_rate_hz = sample.sample_rate_hz;
  d.vad = sample.vad;
  d.audio_pcm = sample.audio_pcm;
  d.faces = sample.faces;
  d.aux = sample.aux;
  return d;
}

// ---------------------------------------------------------------------------
// Face detection and cropping
// ---------------------------------------------------------------------------

struct PixelRect {
  int x = 0, y = 0, w = 0, h = 0;
};

// Detector contract: channel-major 3*h*w image in, rectangle out when a face
// is found. Any callable with this shape plugs in.
using FaceDetector = std::function<std::optional<PixelRect>(const float* image, int height, int width)>;

// Bounding box of bright pixels; works on the synthetic faces and any input
// where the face is lighter than the background.
inline std::optional<PixelRect> intensity_detector(const float* image, int height, int width) {
  int x0 = width, y0 = height, x1 = -1, y1 = -1;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (image[y * width + x] > 0.4f) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return std::nullopt;
  return PixelRect{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

struct FaceCrop {
  std::vector<float> image;  // 3 * 112 * 112
  PixelRect source_rect;
  bool fallback = false;
};

// Detector plus deterministic fallback chain: detected rectangle, else the
// previous frame's rectangle, else a centered square (marker set in both
// fallback cases). Bilinear resize to 112x112; an identity rectangle on a
// 112x112 input copies pixels exactly.
class FaceCropper {
 public:
  explicit FaceCropper(FaceDetector detector = nullptr) : detector_(std::move(detector)) {}

  void reset() { last_rect_.reset(); }

  FaceCrop crop(const float* image, int height, int width) {
    require<ValidationError>(height > 0 && width > 0, "empty image");
    std::optional<PixelRect> rect;
    bool fallback = false;
    if (detector_) rect = detector_(image, height, width);
    if (!rect) {
      fallback = true;
      if (last_rect_)
        rect = last_rect_;
      else {
        int side = std::min(height, width);
        rect = PixelRect{(width - side) / 2, (height - side) / 2, side, side};
      }
    }
    last_rect_ = rect;
    FaceCrop crop;
    crop.source_rect = *rect;
    crop.fallback = fallback;
    crop.image.resize(static_cast<std::size_t>(kFacePixels));
    resize_bilinear(image, height, width, *rect, crop.image.data());
    return crop;
  }

 private:
  static void resize_bilinear(const float* image, int height, int width, const PixelRect& rect,
                              float* dst) {
    const double sx = static_cast<double>(rect.w) / kFaceSize;
    const double sy = static_cast<double>(rect.h) / kFaceSize;
    for (int c = 0; c < kFaceChannels; ++c) {
      const float* src = image + static_cast<std::size_t>(c) * height * width;
      float* out = dst + static_cast<std::size_t>(c) * kFaceSize * kFaceSize;
      for (int y = 0; y < kFaceSize; ++y) {
        double fy = rect.y + (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int ya = std::clamp(y0, 0, height - 1);
        int yb = std::clamp(y0 + 1, 0, height - 1);
        for (int x = 0; x < kFaceSize; ++x) {
          double fx = rect.x + (x + 0.5) * sx - 0.5;
          int x0 = static_cast<int>(std::floor(fx));
          double wx = fx - x0;
          int xa = std::clamp(x0, 0, width - 1);
          int xb = std::clamp(x0 + 1, 0, width - 1);
          double v = (1 - wy) * ((1 - wx) * src[ya * width + xa] + wx * src[ya * width + xb]) +
                     wy * ((1 - wx) * src[yb * width + xa] + wx * src[yb * width + xb]);
          out[y * kFaceSize + x] = static_cast<float>(v);
        }
      }
    }
  }

  FaceDetector detector_;
  std::optional<PixelRect> last_rect_;
};

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

// View of a contiguous frame range of another face sequence.
class SubFaceSequence : public FaceSequence {
 public:
  SubFaceSequence(std::shared_ptr<FaceSequence> parent, int start, int length)
      : parent_(std::move(parent)), start_(start), length_(length) {
    require<DimensionError>(start >= 0 && start + length <= parent_->frames(),
                            "face window out of range");
  }
  int frames() const override { return length_; }
  void copy_frame(int frame, float* dst) const override {
    parent_->copy_frame(start_ + frame, dst);
  }

 private:
  std::shared_ptr<FaceSequence> parent_;
  int start_ = 0, length_ = 0;
};

template <typename S>
struct DialogueWindow {
  WindowInput<S> input;
  std::vector<int> target_vap;       // per frame, from the 2 s lookahead
  Tensor<S> target_future;           // [frames, 2]: activity exactly 2 s ahead
  std::vector<std::uint8_t> mask;    // frames whose lookahead stays inside the dialogue
  std::string dialogue_id;
  int start_frame = 0;
  std::array<std::shared_ptr<FaceSequence>, 2> face_views{};  // keeps views alive
};

template <typename S>
Tensor<S> slice_rows_to(const Tensor<float>& src, int start, int count) {
  Tensor<S> out({count, src.cols()});
  for (int r = 0; r < count; ++r)
    for (int c = 0; c < src.cols(); ++c)
      out.at(r, c) = static_cast<S>(src.at(start + r, c));
  return out;
}

// Valid placements have a full 2 s lookahead inside the dialogue; shorter
// dialogues yield no windows.
inline std::vector<int> window_starts(int total_frames, double frame_rate_hz,
                                      double window_s = kWindowSeconds,
                                      double hop_s = kWindowSeconds,
                                      int horizon_frames = 50) {
  const int window_frames = static_cast<int>(std::llround(window_s * frame_rate_hz));
  const int hop_frames = std::max(1, static_cast<int>(std::llround(hop_s * frame_rate_hz)));
  std::vector<int> starts;
  for (int start = 0; start + window_frames + horizon_frames <= total_frames; start += hop_frames)
    starts.push_back(start);
  return starts;
}

// Builds one training window: model inputs plus per-frame VAP targets from
// the (t, t+horizon] lookahead, the 2-s-ahead future-VAD bit, and a validity
// mask (all-valid for placements produced by window_starts).
template <typename S>
DialogueWindow<S> build_window(const LoadedDialogue& dialogue, int start,
                               double window_s = kWindowSeconds,
                               const BinLayout& layout = BinLayout::standard(),
                               double activity_threshold = kDefaultActivityThreshold) {
  const double fps = dialogue.frame_rate_hz;
  const int window_frames = static_cast<int>(std::llround(window_s * fps));
  const int horizon_frames = layout.total_frames;
  const int total = dialogue.frames();
  const int spf = dialogue.sample_rate_hz / static_cast<int>(std::llround(fps));
  require<DimensionError>(start >= 0 && start + window_frames + horizon_frames <= total,
                          "window placement outside dialogue");

  DialogueWindow<S> win;
  win.dialogue_id = dialogue.id;
  win.start_frame = start;
  win.input.frames = window_frames;
  win.target_vap.resize(static_cast<std::size_t>(window_frames));
  win.target_future = Tensor<S>({window_frames, 2});
  win.mask.assign(static_cast<std::size_t>(window_frames), 1);
  for (int t = 0; t < window_frames; ++t) {
    const int g = start + t;
    std::array<std::span<const std::uint8_t>, 2> future;
    for (int s = 0; s < 2; ++s)
      future[static_cast<std::size_t>(s)] = std::span<const std::uint8_t>(
          dialogue.vad.rows[static_cast<std::size_t>(s)].data() + g + 1,
          static_cast<std::size_t>(horizon_frames));
    win.target_vap[static_cast<std::size_t>(t)] =
        encode_window(future[0], future[1], layout, activity_threshold);
    for (int s = 0; s < 2; ++s)
      win.target_future.at(t, s) =
          static_cast<S>(dialogue.vad.active(s, g + horizon_frames) ? 1 : 0);
  }
  for (int p = 0; p < 2; ++p) {
    PersonInput<S>& person = win.input.persons[static_cast<std::size_t>(p)];
    const auto& pcm = dialogue.audio_pcm[static_cast<std::size_t>(p)];
    person.audio.resize(static_cast<std::size_t>(window_frames) * spf);
    const long s0 = static_cast<long>(start) * spf;
    for (std::size_t i = 0; i < person.audio.size(); ++i)
      person.audio[i] = static_cast<S>(pcm16_to_float(pcm[static_cast<std::size_t>(s0) + i]));
    if (dialogue.has_faces()) {
      win.face_views[static_cast<std::size_t>(p)] = std::make_shared<SubFaceSequence>(
          dialogue.faces[static_cast<std::size_t>(p)], start, window_frames);
      person.faces = win.face_views[static_cast<std::size_t>(p)].get();
    }
    if (dialogue.has_aux()) {
      const AuxStreams& aux = dialogue.aux[static_cast<std::size_t>(p)];
      person.au = slice_rows_to<S>(aux.au, start, window_frames);
      person.gaze = slice_rows_to<S>(aux.gaze, start, window_frames);
      person.head = slice_rows_to<S>(aux.head, start, window_frames);
      person.body = slice_rows_to<S>(aux.body, start, window_frames);
    }
  }
  return win;
}

template <typename S>
std::vector<DialogueWindow<S>> window_dialogue(const LoadedDialogue& dialogue,
                                               double window_s = kWindowSeconds,
                                               double hop_s = kWindowSeconds,
                                               const BinLayout& layout = BinLayout::standard(),
                                               double activity_threshold = kDefaultActivityThreshold) {
  std::vector<DialogueWindow<S>> windows;
  for (int start : window_starts(dialogue.frames(), dialogue.frame_rate_hz, window_s, hop_s,
                                 layout.total_frames))
    windows.push_back(build_window<S>(dialogue, start, window_s, layout, activity_threshold));
  return windows;
}

}  // namespace vap
