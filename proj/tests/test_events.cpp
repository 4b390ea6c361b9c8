#include "vap/events.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "events_oracle.hpp"

using namespace vap;

namespace {

VadTrack empty_track(int frames) {
  VadTrack t;
  t.rows[0].assign(static_cast<std::size_t>(frames), 0);
  t.rows[1].assign(static_cast<std::size_t>(frames), 0);
  return t;
}

void mark(VadTrack& t, int speaker, int start, int end) {
  for (int f = start; f < end; ++f)
    t.rows[static_cast<std::size_t>(speaker)][static_cast<std::size_t>(f)] = 1;
}

std::vector<TurnEvent> of_kind(const std::vector<TurnEvent>& events, EventKind kind) {
  std::vector<TurnEvent> out;
  for (const TurnEvent& e : events)
    if (e.kind == kind) out.push_back(e);
  return out;
}

}  // namespace

TEST_CASE("segments_from_vad basic runs") {
  VadTrack t = empty_track(100);
  auto segs = segments_from_vad(t);
  REQUIRE(segs[0].empty());
  REQUIRE(segs[1].empty());

  mark(t, 0, 10, 30);
  segs = segments_from_vad(t);
  REQUIRE(segs[0] == std::vector<Segment>{{0, 10, 30}});
  REQUIRE(segs[1].empty());
}

TEST_CASE("segments_from_vad merges small gaps and drops short runs") {
  VadTrack t = empty_track(100);
  mark(t, 0, 10, 20);
  mark(t, 0, 22, 30);
  auto segs = segments_from_vad(t, 5, 1);
  REQUIRE(segs[0] == std::vector<Segment>{{0, 10, 30}});

  // gap of exactly min_gap frames is not merged
  segs = segments_from_vad(t, 2, 1);
  REQUIRE(segs[0].size() == 2);

  VadTrack u = empty_track(100);
  mark(u, 1, 40, 42);
  REQUIRE(segments_from_vad(u, 1, 3)[1].empty());
  REQUIRE(segments_from_vad(u, 1, 2)[1].size() == 1);
}

TEST_CASE("shift and hold extraction on simple gaps") {
  // A speaks 0-2 s, silence 2-2.48 s, A resumes -> HOLD anchored at the gap
  VadTrack t = empty_track(150);
  mark(t, 0, 0, 50);
  mark(t, 0, 62, 112);
  auto events = extract_shift_hold(t);
  REQUIRE(events.size() == 1);
  CHECK(events[0].kind == EventKind::kHold);
  CHECK(events[0].start_frame == 50);
  CHECK(events[0].end_frame == 62);
  CHECK(events[0].prev_speaker == 0);
  CHECK(events[0].next_speaker == 0);

  // same geometry but B resumes -> SHIFT
  VadTrack u = empty_track(150);
  mark(u, 0, 0, 50);
  mark(u, 1, 62, 112);
  events = extract_shift_hold(u);
  REQUIRE(events.size() == 1);
  CHECK(events[0].kind == EventKind::kShift);
  CHECK(events[0].prev_speaker == 0);
  CHECK(events[0].next_speaker == 1);
}

TEST_CASE("gaps with overlap in a context window emit nothing") {
  VadTrack t = empty_track(150);
  mark(t, 0, 0, 50);
  mark(t, 1, 40, 50);  // both active inside the pre-window
  mark(t, 0, 62, 112);
  REQUIRE(extract_shift_hold(t).empty());
}

TEST_CASE("gaps touching the track edges emit nothing") {
  VadTrack t = empty_track(100);
  mark(t, 0, 20, 50);  // both surrounding silences touch a track edge
  REQUIRE(extract_shift_hold(t).empty());
}

TEST_CASE("a shift whose reply is only a backchannel chunk is dropped") {
  VadTrack t = empty_track(250);
  mark(t, 0, 0, 100);
  mark(t, 1, 130, 150);  // 0.8 s chunk, B otherwise silent
  REQUIRE(extract_shift_hold(t).empty());

  // B speaking again 1.2 s later breaks the chunk's 2 s post-silence
  VadTrack u = empty_track(250);
  mark(u, 0, 0, 100);
  mark(u, 1, 130, 150);
  mark(u, 1, 180, 230);
  auto shifts = of_kind(extract_shift_hold(u), EventKind::kShift);
  REQUIRE(shifts.size() == 1);
  CHECK(shifts[0].start_frame == 100);
  CHECK(shifts[0].end_frame == 130);
}

TEST_CASE("short/long classification is inclusive at 1 s") {
  VadTrack t = empty_track(300);
  mark(t, 0, 10, 35);   // exactly 25 frames = 1 s -> LONG
  mark(t, 0, 60, 65);   // 0.2 s -> SHORT
  mark(t, 1, 100, 160); // 2.4 s -> LONG
  auto events = extract_short_long(t);
  REQUIRE(events.size() == 3);
  CHECK(events[0].kind == EventKind::kLong);
  CHECK(events[0].start_frame == 10);
  CHECK(events[1].kind == EventKind::kShort);
  CHECK(events[2].kind == EventKind::kLong);
  CHECK(events[2].prev_speaker == 1);
}

TEST_CASE("shift prediction labels regions by upcoming shifts") {
  // A speaks 0-133, gap, B replies with a full turn -> SHIFT at 133
  VadTrack t = empty_track(400);
  mark(t, 0, 0, 133);
  mark(t, 1, 145, 260);
  auto events = extract_shift_prediction(t, 7);
  auto pos = of_kind(events, EventKind::kShiftPredPos);
  REQUIRE(!pos.empty());
  // the latest region [117,130) ends 3 frames before the gap
  CHECK(pos.back().end_frame == 130);
  CHECK(pos.back().prev_speaker == 0);
  CHECK(pos.back().next_speaker == 1);
  // every positive precedes the shift by at most the horizon
  for (const TurnEvent& e : pos) {
    CHECK(e.end_frame <= 133);
    CHECK(133 - e.end_frame <= 50);
  }
}

TEST_CASE("regions inside a monologue or before a hold are negative") {
  VadTrack t = empty_track(600);
  mark(t, 0, 0, 250);   // 10 s monologue
  mark(t, 0, 270, 500); // hold after a 0.8 s pause
  auto events = extract_shift_prediction(t, 3);
  REQUIRE(of_kind(events, EventKind::kShiftPredPos).empty());
  // no positives -> negatives capped at zero
  REQUIRE(events.empty());

  // uncapped candidate set must exist: verify via the oracle helper path
  auto sh = extract_shift_hold(t);
  REQUIRE(sh.size() == 1);
  REQUIRE(sh[0].kind == EventKind::kHold);
}

TEST_CASE("backchannel extraction follows the duration and silence rules") {
  // B silent 3 s, speaks 0.6 s, silent 2.5 s afterwards while A talks through
  VadTrack t = empty_track(300);
  mark(t, 0, 0, 290);
  mark(t, 1, 75, 90);
  auto events = extract_backchannel(t, 1);
  auto pos = of_kind(events, EventKind::kBackchannelPos);
  REQUIRE(pos.size() == 1);
  CHECK(pos[0].start_frame == 75 - 13);  // 0.5 s region right before the onset
  CHECK(pos[0].end_frame == 75);
  CHECK(pos[0].next_speaker == 1);
  CHECK(pos[0].prev_speaker == 0);

  // 1.5 s chunk is not a backchannel
  VadTrack u = empty_track(300);
  mark(u, 0, 0, 290);
  mark(u, 1, 75, 113);
  REQUIRE(of_kind(extract_backchannel(u, 1), EventKind::kBackchannelPos).empty());

  // only 0.4 s of pre-silence
  VadTrack v = empty_track(300);
  mark(v, 0, 0, 290);
  mark(v, 1, 40, 65);
  mark(v, 1, 75, 90);
  REQUIRE(of_kind(extract_backchannel(v, 1), EventKind::kBackchannelPos).empty());
}

TEST_CASE("backchannel boundary: exactly 1 s chunk with minimum silences") {
  VadTrack t = empty_track(250);
  mark(t, 0, 0, 240);
  mark(t, 1, 25, 50);  // exactly 1 s pre-silence, 1 s chunk, 2 s post available at 50..100
  // B silent on [0,25) and [50,100): onset 25 has exactly 1 s of own silence
  auto pos = of_kind(extract_backchannel(t, 1), EventKind::kBackchannelPos);
  REQUIRE(pos.size() == 1);
  CHECK(pos[0].end_frame == 25);
}

TEST_CASE("extractors match the brute-force oracle on random tracks") {
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    VadTrack track = vap_oracle::make_random_track(seed);
    INFO("seed " << seed);
    REQUIRE(extract_shift_hold(track) == vap_oracle::oracle_shift_hold(track));
    REQUIRE(extract_short_long(track) == vap_oracle::oracle_short_long(track));
    REQUIRE(extract_shift_prediction(track, seed) ==
            vap_oracle::oracle_shift_prediction(track, seed));
    REQUIRE(extract_backchannel(track, seed) == vap_oracle::oracle_backchannel(track, seed));
  }
}

TEST_CASE("extraction is deterministic for a fixed seed") {
  VadTrack track = vap_oracle::make_random_track(42);
  REQUIRE(extract_all_events(track, 5) == extract_all_events(track, 5));
  // different seed may change sampled negatives but never positives
  auto a = of_kind(extract_shift_prediction(track, 5), EventKind::kShiftPredPos);
  auto b = of_kind(extract_shift_prediction(track, 6), EventKind::kShiftPredPos);
  REQUIRE(a == b);
}

TEST_CASE("no region is both a positive and a negative instance") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    VadTrack track = vap_oracle::make_random_track(seed);
    auto events = extract_shift_prediction(track, seed);
    for (std::size_t i = 0; i < events.size(); ++i)
      for (std::size_t j = i + 1; j < events.size(); ++j)
        if (events[i].start_frame == events[j].start_frame &&
            events[i].prev_speaker == events[j].prev_speaker)
          REQUIRE(events[i].kind == events[j].kind);
  }
}

TEST_CASE("no chunk is both a backchannel and shift post-window evidence") {
  const int fps = 25;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    VadTrack track = vap_oracle::make_random_track(seed);
    for (const TurnEvent& e : extract_shift_hold(track)) {
      if (e.kind != EventKind::kShift) continue;
      bool has_non_bc_frame = false;
      for (int f = e.end_frame; f < e.end_frame + fps; ++f)
        if (track.active(*e.next_speaker, f) &&
            !vap_oracle::frame_in_backchannel_chunk(track, *e.next_speaker, f))
          has_non_bc_frame = true;
      REQUIRE(has_non_bc_frame);
    }
  }
}

TEST_CASE("negative sampling caps at the number of positives") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    VadTrack track = vap_oracle::make_random_track(seed);
    auto sp = extract_shift_prediction(track, seed);
    auto bc = extract_backchannel(track, seed);
    REQUIRE(of_kind(sp, EventKind::kShiftPredNeg).size() <=
            of_kind(sp, EventKind::kShiftPredPos).size());
    REQUIRE(of_kind(bc, EventKind::kBackchannelNeg).size() <=
            of_kind(bc, EventKind::kBackchannelPos).size());
  }
}

TEST_CASE("events serialize as tab-separated rows") {
  TurnEvent e;
  e.kind = EventKind::kShift;
  e.start_frame = 50;
  e.end_frame = 62;
  e.prev_speaker = 0;
  e.next_speaker = 1;
  TurnEvent f;
  f.kind = EventKind::kShiftPredNeg;
  f.start_frame = 10;
  f.end_frame = 23;
  f.prev_speaker = 1;
  std::ostringstream out;
  write_events_tsv(out, {e, f});
  REQUIRE(out.str() == "SHIFT\t50\t62\t0\t1\nSHIFT_PRED_NEG\t10\t23\t1\t-\n");
}

TEST_CASE("VAD annotation files round-trip exactly") {
  VadTrack track = vap_oracle::make_random_track(11);
  auto segs = segments_from_vad(track);
  write_vad_annotation("/tmp/vap_test_vad_a.txt", segs[0], track.frame_rate_hz);
  auto loaded = read_vad_annotation("/tmp/vap_test_vad_a.txt", 0, track.frame_rate_hz);
  REQUIRE(loaded == segs[0]);
}
