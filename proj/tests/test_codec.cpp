#include "vap/codec.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "vap/rng.hpp"

using namespace vap;

namespace {

// Independent bit formula: index = sum over set bits of 2^(7 - (4s + b)).
// Kept separate from the codec implementation on purpose.
int reference_index(const BinMatrix& bits) {
  int idx = 0;
  for (int s = 0; s < 2; ++s)
    for (int b = 0; b < 4; ++b)
      if (bits[s][b]) idx += 1 << (7 - (4 * s + b));
  return idx;
}

std::vector<std::uint8_t> constant_row(int n, std::uint8_t v) {
  return std::vector<std::uint8_t>(static_cast<std::size_t>(n), v);
}

}  // namespace

TEST_CASE("standard bin layout has 5/10/15/20 frame bins at 25 Hz") {
  BinLayout layout = BinLayout::standard();
  REQUIRE(layout.bin_frame_counts == std::array<int, 4>{5, 10, 15, 20});
  REQUIRE(layout.total_frames == 50);
  double sum = 0.0;
  for (double d : layout.bin_durations_s) sum += d;
  REQUIRE(sum == Catch::Approx(2.0));
}

TEST_CASE("bin layout rejects non-integral duration/frame-rate combinations") {
  REQUIRE_THROWS_AS(BinLayout::make({0.2, 0.4, 0.6, 0.8}, 24.0), ValidationError);
  REQUIRE_THROWS_AS(BinLayout::make({0.25, 0.4, 0.6, 0.8}, 25.0), ValidationError);
  REQUIRE_NOTHROW(BinLayout::make({0.2, 0.4, 0.6, 0.8}, 50.0));
}

TEST_CASE("encode/decode bijection over all 256 states") {
  for (int k = 0; k < kNumVapStates; ++k) {
    BinMatrix bits = decode_state(k);
    REQUIRE(encode_bits(bits) == k);
    REQUIRE(reference_index(bits) == k);
  }
}

TEST_CASE("decode rejects out-of-range indices") {
  REQUIRE_THROWS_AS(decode_state(-1), ValidationError);
  REQUIRE_THROWS_AS(decode_state(256), ValidationError);
}

TEST_CASE("encode_window on constant matrices") {
  BinLayout layout = BinLayout::standard();
  auto zeros = constant_row(50, 0);
  auto ones = constant_row(50, 1);
  REQUIRE(encode_window(zeros, zeros, layout) == 0);
  REQUIRE(encode_window(ones, ones, layout) == 255);
  // speaker 0 fully active, speaker 1 silent -> 0b11110000
  REQUIRE(encode_window(ones, zeros, layout) == 240);
  REQUIRE(decode_state(240)[0] == std::array<std::uint8_t, 4>{1, 1, 1, 1});
  REQUIRE(decode_state(240)[1] == std::array<std::uint8_t, 4>{0, 0, 0, 0});
}

TEST_CASE("encode_window validates shape and values") {
  BinLayout layout = BinLayout::standard();
  auto short_row = constant_row(49, 0);
  auto row = constant_row(50, 0);
  REQUIRE_THROWS_AS(encode_window(short_row, row, layout), DimensionError);
  auto bad = constant_row(50, 0);
  bad[3] = 2;
  REQUIRE_THROWS_AS(encode_window(bad, row, layout), ValidationError);
  REQUIRE_THROWS_AS(encode_window(row, row, layout, 0.0), ValidationError);
  REQUIRE_THROWS_AS(encode_window(row, row, layout, 1.5), ValidationError);
}

TEST_CASE("majority threshold boundary") {
  BinLayout layout = BinLayout::standard();
  auto zeros = constant_row(50, 0);
  // bin 1 covers frames [5, 15): set exactly half of its 10 frames
  auto row = constant_row(50, 0);
  for (int f = 5; f < 10; ++f) row[static_cast<std::size_t>(f)] = 1;
  int idx = encode_window(row, zeros, layout, 0.5);
  REQUIRE(decode_state(idx)[0] == std::array<std::uint8_t, 4>{0, 1, 0, 0});
  // one frame short of half stays inactive
  row[9] = 0;
  idx = encode_window(row, zeros, layout, 0.5);
  REQUIRE(decode_state(idx)[0] == std::array<std::uint8_t, 4>{0, 0, 0, 0});
}

TEST_CASE("adding active frames never clears a bin") {
  BinLayout layout = BinLayout::standard();
  Rng rng(20250809);
  auto zeros = constant_row(50, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> row(50);
    for (auto& v : row) v = rng.bernoulli(0.4) ? 1 : 0;
    int before = encode_window(row, zeros, layout);
    std::vector<int> inactive;
    for (int f = 0; f < 50; ++f)
      if (!row[static_cast<std::size_t>(f)]) inactive.push_back(f);
    if (inactive.empty()) continue;
    int flip = inactive[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(inactive.size()) - 1))];
    row[static_cast<std::size_t>(flip)] = 1;
    int after = encode_window(row, zeros, layout);
    for (int b = 0; b < 4; ++b) {
      bool was = vap_state_bit(before, 0, b);
      bool now = vap_state_bit(after, 0, b);
      REQUIRE((!was || now));  // 1 -> 0 never happens
    }
  }
}

TEST_CASE("projection of point masses and the uniform distribution") {
  VapDistribution dist;
  dist.probs[0] = 1.0;
  SpeakerProjection proj = project_speaker_probs(dist);
  REQUIRE(proj.p_now == std::array<double, 2>{0.0, 0.0});
  REQUIRE(proj.p_future == std::array<double, 2>{0.0, 0.0});

  dist = VapDistribution{};
  dist.probs[255] = 1.0;
  proj = project_speaker_probs(dist);
  REQUIRE(proj.p_now == std::array<double, 2>{1.0, 1.0});
  REQUIRE(proj.p_future == std::array<double, 2>{1.0, 1.0});

  // every bit is set in exactly half of all states
  for (auto& p : dist.probs) p = 1.0 / 256.0;
  proj = project_speaker_probs(dist);
  REQUIRE(proj.p_now == std::array<double, 2>{0.5, 0.5});
  REQUIRE(proj.p_future == std::array<double, 2>{0.5, 0.5});
}

TEST_CASE("projection rejects unnormalized distributions") {
  VapDistribution dist;
  dist.probs[0] = 0.5;
  REQUIRE_THROWS_AS(project_speaker_probs(dist), ValidationError);
  dist.probs[0] = 1.5;
  dist.probs[1] = -0.5;
  REQUIRE_THROWS_AS(project_speaker_probs(dist), ValidationError);
}

TEST_CASE("bin marginals match brute-force summation and stay in [0,1]") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    VapDistribution dist;
    double sum = 0.0;
    for (auto& p : dist.probs) {
      p = rng.uniform();
      sum += p;
    }
    for (auto& p : dist.probs) p /= sum;
    auto q = bin_marginals(dist);
    for (int s = 0; s < 2; ++s)
      for (int b = 0; b < 4; ++b) {
        double brute = 0.0;
        for (int k = 0; k < 256; ++k)
          if ((k >> (7 - (4 * s + b))) & 1) brute += dist.probs[k];
        REQUIRE(q[s][b] == Catch::Approx(brute).margin(1e-12));
        REQUIRE(q[s][b] >= 0.0);
        REQUIRE(q[s][b] <= 1.0 + 1e-12);
      }
  }
}

TEST_CASE("projection is linear under convex mixtures") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    VapDistribution a, b;
    double sa = 0.0, sb = 0.0;
    for (int k = 0; k < 256; ++k) {
      a.probs[k] = rng.uniform();
      b.probs[k] = rng.uniform();
      sa += a.probs[k];
      sb += b.probs[k];
    }
    for (int k = 0; k < 256; ++k) {
      a.probs[k] /= sa;
      b.probs[k] /= sb;
    }
    double lam = rng.uniform();
    VapDistribution mix;
    for (int k = 0; k < 256; ++k) mix.probs[k] = lam * a.probs[k] + (1 - lam) * b.probs[k];
    auto pa = project_speaker_probs(a);
    auto pb = project_speaker_probs(b);
    auto pm = project_speaker_probs(mix);
    for (int s = 0; s < 2; ++s) {
      REQUIRE(pm.p_now[s] ==
              Catch::Approx(lam * pa.p_now[s] + (1 - lam) * pb.p_now[s]).margin(1e-12));
      REQUIRE(pm.p_future[s] ==
              Catch::Approx(lam * pa.p_future[s] + (1 - lam) * pb.p_future[s]).margin(1e-12));
    }
  }
}

TEST_CASE("backchannel pattern probability") {
  // listener 1 active in bins 0-1, speaker 0 active in bins 2-3
  BinMatrix bits{};
  bits[1][0] = bits[1][1] = 1;
  bits[0][2] = bits[0][3] = 1;
  VapDistribution dist;
  dist.probs[static_cast<std::size_t>(encode_bits(bits))] = 1.0;
  REQUIRE(backchannel_pattern_prob(dist, 1) == 1.0);
  REQUIRE(backchannel_pattern_prob(dist, 0) == 0.0);

  VapDistribution zero_state;
  zero_state.probs[0] = 1.0;
  REQUIRE(backchannel_pattern_prob(zero_state, 0) == 0.0);
  REQUIRE(backchannel_pattern_prob(zero_state, 1) == 0.0);

  VapDistribution uniform;
  for (auto& p : uniform.probs) p = 1.0 / 256.0;
  REQUIRE(backchannel_pattern_prob(uniform, 0) == 1.0 / 16.0);
  REQUIRE(backchannel_pattern_prob(uniform, 1) == 1.0 / 16.0);

  REQUIRE_THROWS_AS(backchannel_pattern_prob(uniform, 2), ValidationError);
}

TEST_CASE("codec dump emits 256 tab-separated rows") {
  std::ostringstream out;
  codec_dump(out);
  std::istringstream in(out.str());
  std::string line;
  int rows = 0;
  std::string line240;
  while (std::getline(in, line)) {
    if (rows == 240) line240 = line;
    ++rows;
  }
  REQUIRE(rows == 256);
  REQUIRE(line240 == "240\t1111\t0000");
}
