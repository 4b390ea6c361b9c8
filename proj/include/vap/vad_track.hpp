#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vap/common.hpp"

namespace vap {

// Per-speaker binary voice activity on the shared frame clock.
struct VadTrack {
  std::array<std::vector<std::uint8_t>, 2> rows;
  double frame_rate_hz = kDefaultFrameRateHz;

  int duration_frames() const { return static_cast<int>(rows[0].size()); }

  void validate() const {
    require<DimensionError>(rows[0].size() == rows[1].size(),
                            "VAD rows must have equal length");
    require<ValidationError>(frame_rate_hz > 0.0, "frame rate must be positive");
    for (const auto& row : rows)
      for (std::uint8_t v : row)
        require<ValidationError>(v <= 1, "VAD values must be 0 or 1");
  }

  bool active(int speaker, int frame) const {
    return rows[static_cast<std::size_t>(speaker)][static_cast<std::size_t>(frame)] != 0;
  }
};

// Half-open frame interval of continuous speech by one speaker.
struct Segment {
  int speaker = 0;
  int start_frame = 0;
  int end_frame = 0;  // exclusive

  int length() const { return end_frame - start_frame; }
  bool operator==(const Segment&) const = default;
};

// Maximal runs of 1s per speaker. Runs separated by gaps shorter than
// min_gap_frames are merged first; merged runs shorter than
// min_segment_frames are then dropped. Defaults apply no smoothing.
inline std::array<std::vector<Segment>, 2> segments_from_vad(
    const VadTrack& track, int min_gap_frames = 1, int min_segment_frames = 1) {
  track.validate();
  require<ValidationError>(min_gap_frames >= 1 && min_segment_frames >= 1,
                           "smoothing parameters must be >= 1");
  std::array<std::vector<Segment>, 2> out;
  const int n = track.duration_frames();
  for (int s = 0; s < 2; ++s) {
    std::vector<Segment> runs;
    int f = 0;
    while (f < n) {
      if (!track.active(s, f)) {
        ++f;
        continue;
      }
      int start = f;
      while (f < n && track.active(s, f)) ++f;
      runs.push_back({s, start, f});
    }
    std::vector<Segment> merged;
    for (const Segment& run : runs) {
      if (!merged.empty() && run.start_frame - merged.back().end_frame < min_gap_frames)
        merged.back().end_frame = run.end_frame;
      else
        merged.push_back(run);
    }
    for (const Segment& seg : merged)
      if (seg.length() >= min_segment_frames) out[static_cast<std::size_t>(s)].push_back(seg);
  }
  return out;
}

inline VadTrack track_from_segments(const std::array<std::vector<Segment>, 2>& segments,
                                    int duration_frames, double frame_rate_hz) {
  VadTrack track;
  track.frame_rate_hz = frame_rate_hz;
  track.rows[0].assign(static_cast<std::size_t>(duration_frames), 0);
  track.rows[1].assign(static_cast<std::size_t>(duration_frames), 0);
  for (int s = 0; s < 2; ++s)
    for (const Segment& seg : segments[static_cast<std::size_t>(s)]) {
      require<ValidationError>(seg.start_frame >= 0 && seg.end_frame <= duration_frames &&
                                   seg.start_frame < seg.end_frame,
                               "segment outside track bounds");
      for (int f = seg.start_frame; f < seg.end_frame; ++f)
        track.rows[static_cast<std::size_t>(s)][static_cast<std::size_t>(f)] = 1;
    }
  return track;
}

// Annotation format: one "start_s<TAB>end_s" pair per line, one file per
// speaker.
inline void write_vad_annotation(const std::string& path, const std::vector<Segment>& segments,
                                 double frame_rate_hz) {
  std::ofstream out(path);
  require<IoError>(out.good(), "cannot open VAD annotation for writing: " + path);
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const Segment& seg : segments)
    out << seg.start_frame / frame_rate_hz << '\t' << seg.end_frame / frame_rate_hz << '\n';
  require<IoError>(out.good(), "failed writing VAD annotation: " + path);
}

inline std::vector<Segment> read_vad_annotation(const std::string& path, int speaker,
                                                double frame_rate_hz) {
  std::ifstream in(path);
  require<IoError>(in.good(), "cannot open VAD annotation: " + path);
  std::vector<Segment> segments;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    double start_s = 0.0, end_s = 0.0;
    if (!(row >> start_s >> end_s))
      throw IoError(path + ":" + std::to_string(line_no) + ": expected 'start_s end_s'");
    Segment seg;
    seg.speaker = speaker;
    seg.start_frame = static_cast<int>(std::llround(start_s * frame_rate_hz));
    seg.end_frame = static_cast<int>(std::llround(end_s * frame_rate_hz));
    require<ValidationError>(seg.start_frame < seg.end_frame,
                             path + ":" + std::to_string(line_no) + ": empty segment");
    segments.push_back(seg);
  }
  return segments;
}

}  // namespace vap
