#pragma once

#include <algorithm>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "vap/common.hpp"
#include "vap/rng.hpp"
#include "vap/vad_track.hpp"

namespace vap {

enum class EventKind {
  kShift,
  kHold,
  kShort,
  kLong,
  kShiftPredPos,
  kShiftPredNeg,
  kBackchannelPos,
  kBackchannelNeg,
};

inline const char* event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::kShift: return "SHIFT";
    case EventKind::kHold: return "HOLD";
    case EventKind::kShort: return "SHORT";
    case EventKind::kLong: return "LONG";
    case EventKind::kShiftPredPos: return "SHIFT_PRED_POS";
    case EventKind::kShiftPredNeg: return "SHIFT_PRED_NEG";
    case EventKind::kBackchannelPos: return "BC_POS";
    case EventKind::kBackchannelNeg: return "BC_NEG";
  }
  return "?";
}

// One labeled evaluation instance anchored to a frame region.
//
// Anchor and speaker conventions per kind:
//   SHIFT/HOLD      anchor = the mutual-silence gap; prev/next = speakers
//                   before and after the gap.
//   SHORT/LONG      anchor = the utterance segment (scoring reads its onset);
//                   prev = utterance owner.
//   SHIFT_PRED_*    anchor = the prediction region; prev = current speaker;
//                   next = shift target (positives only).
//   BC_*            anchor = the region right before the (potential) chunk;
//                   next = listener/backchanneler; prev = the other speaker.
struct TurnEvent {
  EventKind kind;
  int start_frame = 0;
  int end_frame = 0;
  std::optional<int> prev_speaker;
  std::optional<int> next_speaker;

  bool operator==(const TurnEvent&) const = default;
};

inline bool event_less(const TurnEvent& a, const TurnEvent& b) {
  return std::tie(a.start_frame, a.end_frame, a.kind, a.prev_speaker, a.next_speaker) <
         std::tie(b.start_frame, b.end_frame, b.kind, b.prev_speaker, b.next_speaker);
}

inline void write_events_tsv(std::ostream& out, const std::vector<TurnEvent>& events) {
  auto field = [](const std::optional<int>& v) {
    return v ? std::to_string(*v) : std::string("-");
  };
  for (const TurnEvent& e : events)
    out << event_kind_name(e.kind) << '\t' << e.start_frame << '\t' << e.end_frame << '\t'
        << field(e.prev_speaker) << '\t' << field(e.next_speaker) << '\n';
}

namespace detail {

struct WindowSpeakers {
  bool any[2] = {false, false};
  int single_speaker() const {  // -1 when zero or both speakers are active
    if (any[0] && !any[1]) return 0;
    if (any[1] && !any[0]) return 1;
    return -1;
  }
};

inline WindowSpeakers active_speakers_in(const VadTrack& track, int begin, int end) {
  WindowSpeakers w;
  for (int f = begin; f < end; ++f) {
    if (track.active(0, f)) w.any[0] = true;
    if (track.active(1, f)) w.any[1] = true;
  }
  return w;
}

// A chunk qualifies as a backchannel when it lasts at most 1 s and its owner
// is silent for at least 1 s before and 2 s after it. Both silences must lie
// fully inside the track.
inline bool is_backchannel_chunk(const Segment& seg,
                                 const std::vector<Segment>& owner_segments,
                                 int duration_frames, int fps) {
  if (seg.length() > fps) return false;
  if (seg.start_frame < fps) return false;
  if (seg.end_frame + 2 * fps > duration_frames) return false;
  for (const Segment& other : owner_segments) {
    if (other == seg) continue;
    // owner silence breaks when another own segment intersects the margins
    if (other.end_frame > seg.start_frame - fps && other.start_frame < seg.start_frame)
      return false;
    if (other.start_frame < seg.end_frame + 2 * fps && other.end_frame > seg.end_frame)
      return false;
  }
  return true;
}

// Deterministic cap: sort candidates, shuffle with the salted seed, keep the
// first `cap`, restore frame order.
inline std::vector<TurnEvent> sample_negatives(std::vector<TurnEvent> candidates,
                                               std::size_t cap, std::uint64_t seed,
                                               std::uint64_t salt) {
  std::sort(candidates.begin(), candidates.end(), event_less);
  if (candidates.size() > cap) {
    Rng rng(seed ^ salt);
    rng.shuffle(candidates);
    candidates.resize(cap);
    std::sort(candidates.begin(), candidates.end(), event_less);
  }
  return candidates;
}

inline constexpr std::uint64_t kShiftPredSalt = 0x5350;
inline constexpr std::uint64_t kBackchannelSalt = 0x4243;

}  // namespace detail

// Shift/hold instances at mutual-silence gaps. A gap is a maximal run of
// frames where neither speaker is active. The 1 s windows before and after
// the gap must lie inside the track and contain exactly one active speaker
// each; matching speakers yield HOLD, different speakers yield SHIFT. A
// would-be SHIFT whose post-window speech comes entirely from
// backchannel-qualifying chunks is dropped so that no chunk is both a
// backchannel and shift evidence.
inline std::vector<TurnEvent> extract_shift_hold(const VadTrack& track,
                                                 int min_gap_frames = 1,
                                                 int min_segment_frames = 1) {
  track.validate();
  const int n = track.duration_frames();
  const int fps = static_cast<int>(std::llround(track.frame_rate_hz));
  require<ValidationError>(n >= 2 * fps, "track must cover at least 2 s");
  auto segments = segments_from_vad(track, min_gap_frames, min_segment_frames);

  std::vector<TurnEvent> events;
  int f = 0;
  while (f < n) {
    if (track.active(0, f) || track.active(1, f)) {
      ++f;
      continue;
    }
    int gap_start = f;
    while (f < n && !track.active(0, f) && !track.active(1, f)) ++f;
    int gap_end = f;
    if (gap_start < fps || gap_end + fps > n) continue;
    auto pre = detail::active_speakers_in(track, gap_start - fps, gap_start);
    auto post = detail::active_speakers_in(track, gap_end, gap_end + fps);
    int prev = pre.single_speaker();
    int next = post.single_speaker();
    if (prev < 0 || next < 0) continue;
    if (prev != next) {
      const auto& next_segs = segments[static_cast<std::size_t>(next)];
      bool all_backchannel = true;
      for (const Segment& seg : next_segs) {
        if (seg.end_frame <= gap_end || seg.start_frame >= gap_end + fps) continue;
        if (!detail::is_backchannel_chunk(seg, next_segs, n, fps)) {
          all_backchannel = false;
          break;
        }
      }
      if (all_backchannel) continue;
    }
    TurnEvent e;
    e.kind = prev == next ? EventKind::kHold : EventKind::kShift;
    e.start_frame = gap_start;
    e.end_frame = gap_end;
    e.prev_speaker = prev;
    e.next_speaker = next;
    events.push_back(e);
  }
  std::sort(events.begin(), events.end(), event_less);
  return events;
}

// One SHORT/LONG instance per utterance segment, anchored at the segment;
// LONG when the utterance lasts at least 1 s (inclusive).
inline std::vector<TurnEvent> extract_short_long(const VadTrack& track,
                                                 int min_gap_frames = 1,
                                                 int min_segment_frames = 1) {
  track.validate();
  const int fps = static_cast<int>(std::llround(track.frame_rate_hz));
  auto segments = segments_from_vad(track, min_gap_frames, min_segment_frames);
  std::vector<TurnEvent> events;
  for (int s = 0; s < 2; ++s)
    for (const Segment& seg : segments[static_cast<std::size_t>(s)]) {
      TurnEvent e;
      e.kind = seg.length() >= fps ? EventKind::kLong : EventKind::kShort;
      e.start_frame = seg.start_frame;
      e.end_frame = seg.end_frame;
      e.prev_speaker = s;
      events.push_back(e);
    }
  std::sort(events.begin(), events.end(), event_less);
  return events;
}

// Shift-prediction instances on a fixed region grid. Candidate regions of
// region_s seconds are placed inside each utterance at multiples of the
// region length from the utterance onset. A region is positive when a SHIFT
// gap that ends this speaker's turn starts within horizon_s after the region,
// negative when no SHIFT gap at all starts within the horizon. Negatives are
// subsampled to at most the number of positives.
inline std::vector<TurnEvent> extract_shift_prediction(const VadTrack& track,
                                                       std::uint64_t seed = 0,
                                                       double region_s = 0.5,
                                                       double horizon_s = 2.0,
                                                       int min_gap_frames = 1,
                                                       int min_segment_frames = 1) {
  track.validate();
  const int fps = static_cast<int>(std::llround(track.frame_rate_hz));
  const int region = static_cast<int>(std::llround(region_s * track.frame_rate_hz));
  const int horizon = static_cast<int>(std::llround(horizon_s * track.frame_rate_hz));
  require<ValidationError>(region >= 1 && horizon >= 1, "region/horizon too small");
  require<ValidationError>(track.duration_frames() >= region + horizon,
                           "track too short for one region plus horizon");

  auto shift_hold = extract_shift_hold(track, min_gap_frames, min_segment_frames);
  std::vector<TurnEvent> shifts;
  for (const TurnEvent& e : shift_hold)
    if (e.kind == EventKind::kShift) shifts.push_back(e);

  auto segments = segments_from_vad(track, min_gap_frames, min_segment_frames);
  std::vector<TurnEvent> positives;
  std::vector<TurnEvent> negative_candidates;
  for (int s = 0; s < 2; ++s) {
    for (const Segment& seg : segments[static_cast<std::size_t>(s)]) {
      for (int r = seg.start_frame; r + region <= seg.end_frame; r += region) {
        const int region_end = r + region;
        bool own_shift = false;
        bool any_shift = false;
        for (const TurnEvent& shift : shifts) {
          if (shift.start_frame < region_end || shift.start_frame > region_end + horizon)
            continue;
          any_shift = true;
          if (shift.prev_speaker == s) {
            own_shift = true;
            TurnEvent e;
            e.kind = EventKind::kShiftPredPos;
            e.start_frame = r;
            e.end_frame = region_end;
            e.prev_speaker = s;
            e.next_speaker = shift.next_speaker;
            positives.push_back(e);
            break;
          }
        }
        if (!own_shift && !any_shift) {
          TurnEvent e;
          e.kind = EventKind::kShiftPredNeg;
          e.start_frame = r;
          e.end_frame = region_end;
          e.prev_speaker = s;
          negative_candidates.push_back(e);
        }
      }
    }
  }
  auto negatives = detail::sample_negatives(std::move(negative_candidates), positives.size(),
                                            seed, detail::kShiftPredSalt);
  positives.insert(positives.end(), negatives.begin(), negatives.end());
  std::sort(positives.begin(), positives.end(), event_less);
  return positives;
}

// Backchannel instances. Positives anchor the region_s window right before
// each qualifying chunk onset. Negative candidates sit on the same region
// grid inside a speaker's utterance, with the listener silent over the region
// and no qualifying chunk by the listener starting within the next second;
// they are subsampled to at most the number of positives.
inline std::vector<TurnEvent> extract_backchannel(const VadTrack& track,
                                                  std::uint64_t seed = 0,
                                                  double region_s = 0.5,
                                                  int min_gap_frames = 1,
                                                  int min_segment_frames = 1) {
  track.validate();
  const int n = track.duration_frames();
  const int fps = static_cast<int>(std::llround(track.frame_rate_hz));
  const int region = static_cast<int>(std::llround(region_s * track.frame_rate_hz));
  auto segments = segments_from_vad(track, min_gap_frames, min_segment_frames);

  std::array<std::vector<Segment>, 2> chunks;  // qualifying chunks per owner
  std::vector<TurnEvent> positives;
  for (int s = 0; s < 2; ++s) {
    for (const Segment& seg : segments[static_cast<std::size_t>(s)]) {
      if (!detail::is_backchannel_chunk(seg, segments[static_cast<std::size_t>(s)], n, fps))
        continue;
      chunks[static_cast<std::size_t>(s)].push_back(seg);
      if (seg.start_frame < region) continue;
      TurnEvent e;
      e.kind = EventKind::kBackchannelPos;
      e.start_frame = seg.start_frame - region;
      e.end_frame = seg.start_frame;
      e.prev_speaker = 1 - s;
      e.next_speaker = s;
      positives.push_back(e);
    }
  }

  std::vector<TurnEvent> negative_candidates;
  for (int s = 0; s < 2; ++s) {
    const int listener = 1 - s;
    for (const Segment& seg : segments[static_cast<std::size_t>(s)]) {
      for (int r = seg.start_frame; r + region <= seg.end_frame; r += region) {
        const int region_end = r + region;
        bool listener_quiet = true;
        for (int f = r; f < region_end && listener_quiet; ++f)
          if (track.active(listener, f)) listener_quiet = false;
        if (!listener_quiet) continue;
        bool chunk_ahead = false;
        for (const Segment& chunk : chunks[static_cast<std::size_t>(listener)])
          if (chunk.start_frame >= region_end && chunk.start_frame < region_end + fps) {
            chunk_ahead = true;
            break;
          }
        if (chunk_ahead) continue;
        TurnEvent e;
        e.kind = EventKind::kBackchannelNeg;
        e.start_frame = r;
        e.end_frame = region_end;
        e.prev_speaker = s;
        e.next_speaker = listener;
        negative_candidates.push_back(e);
      }
    }
  }
  auto negatives = detail::sample_negatives(std::move(negative_candidates), positives.size(),
                                            seed, detail::kBackchannelSalt);
  positives.insert(positives.end(), negatives.begin(), negatives.end());
  std::sort(positives.begin(), positives.end(), event_less);
  return positives;
}

inline std::vector<TurnEvent> extract_all_events(const VadTrack& track, std::uint64_t seed = 0) {
  std::vector<TurnEvent> all = extract_shift_hold(track);
  auto append = [&all](std::vector<TurnEvent> more) {
    all.insert(all.end(), more.begin(), more.end());
  };
  append(extract_short_long(track));
  append(extract_shift_prediction(track, seed));
  append(extract_backchannel(track, seed));
  std::sort(all.begin(), all.end(), event_less);
  return all;
}

}  // namespace vap
