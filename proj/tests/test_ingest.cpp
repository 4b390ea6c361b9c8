#include "vap/ingest.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "vap/datagen.hpp"

using namespace vap;

namespace {

const char* kDir = "/tmp/vap_test_ingest";

DialogueConfig quick_config(double duration, std::uint64_t seed, bool faces = false,
                            bool aux = false) {
  DialogueConfig config;
  config.duration_s = duration;
  config.seed = seed;
  config.with_faces = faces;
  config.with_aux = aux;
  return config;
}

}  // namespace

TEST_CASE("generator output loads back with full cross-checks") {
  namespace fs = std::filesystem;
  fs::remove_all(kDir);
  DialogueConfig config = quick_config(40.0, 3, true, true);
  auto samples = generate_dataset(config, 2);
  write_dataset(samples, kDir);

  DatasetReader reader(std::string(kDir) + "/manifest.json");
  REQUIRE(reader.size() == 2);
  LoadedDialogue d = reader.load(0);
  REQUIRE(d.id == "dlg_0000");
  REQUIRE(d.frames() == samples[0].frames());
  REQUIRE(d.vad.rows == samples[0].vad.rows);
  REQUIRE(d.audio_pcm == samples[0].audio_pcm);
  REQUIRE(d.has_faces());
  REQUIRE(d.has_aux());
  fs::remove_all(kDir);
}

TEST_CASE("empty manifest is an empty collection, not an error") {
  namespace fs = std::filesystem;
  fs::remove_all(kDir);
  fs::create_directories(kDir);
  std::ofstream out(std::string(kDir) + "/manifest.json");
  out << R"({"schema_version":1,"frame_rate_hz":25.0,"sample_rate_hz":16000,"dialogues":[]})";
  out.close();
  DatasetReader reader(std::string(kDir) + "/manifest.json");
  REQUIRE(reader.size() == 0);
  fs::remove_all(kDir);
}

TEST_CASE("unknown schema version and truncated audio produce descriptive errors") {
  namespace fs = std::filesystem;
  fs::remove_all(kDir);
  auto samples = generate_dataset(quick_config(35.0, 5), 1);
  write_dataset(samples, kDir);

  SECTION("schema version") {
    std::string path = std::string(kDir) + "/manifest.json";
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    in.close();
    j["schema_version"] = 99;
    std::ofstream out(path);
    out << j.dump();
    out.close();
    REQUIRE_THROWS_AS(DatasetReader(path), IoError);
  }

  SECTION("truncated wav names the dialogue") {
    std::string wav = std::string(kDir) + "/dlg_0000/audio.wav";
    fs::resize_file(wav, fs::file_size(wav) / 2);
    DatasetReader reader(std::string(kDir) + "/manifest.json");
    try {
      reader.load(0);
      FAIL("expected a length mismatch");
    } catch (const DimensionError& e) {
      REQUIRE(std::string(e.what()).find("dlg_0000") != std::string::npos);
    }
  }
  fs::remove_all(kDir);
}

TEST_CASE("intensity detector finds the synthetic face and the crop covers it") {
  const int h = 160, w = 200;
  std::vector<float> image(static_cast<std::size_t>(3) * h * w, 0.05f);
  FaceGeometry geom;
  geom.cx = 120;
  geom.cy = 70;
  geom.rx = 40;
  geom.ry = 55;
  paint_synthetic_face(image.data(), h, w, geom, {0.5, 0.0});
  auto rect = intensity_detector(image.data(), h, w);
  REQUIRE(rect.has_value());
  REQUIRE(rect->x <= geom.cx - geom.rx + 2);
  REQUIRE(rect->x + rect->w >= geom.cx + geom.rx - 2);
  REQUIRE(rect->y <= geom.cy - geom.ry + 2);
  REQUIRE(rect->y + rect->h >= geom.cy + geom.ry - 2);

  FaceCropper cropper{FaceDetector(intensity_detector)};
  FaceCrop crop = cropper.crop(image.data(), h, w);
  REQUIRE_FALSE(crop.fallback);
  REQUIRE(crop.image.size() == static_cast<std::size_t>(kFacePixels));
  // the crop is dominated by face pixels, not background
  int bright = 0;
  for (int i = 0; i < kFaceSize * kFaceSize; ++i)
    if (crop.image[static_cast<std::size_t>(i)] > 0.4f) ++bright;
  REQUIRE(bright > kFaceSize * kFaceSize / 2);
}

TEST_CASE("cropper falls back to previous rectangle, then centered square") {
  const int h = 100, w = 140;
  std::vector<float> blank(static_cast<std::size_t>(3) * h * w, 0.0f);
  FaceCropper cropper{FaceDetector(intensity_detector)};
  FaceCrop first = cropper.crop(blank.data(), h, w);
  REQUIRE(first.fallback);
  REQUIRE(first.source_rect.w == 100);  // centered square on the short side
  REQUIRE(first.source_rect.x == 20);

  // a detection updates the memory; a later miss reuses it
  std::vector<float> image(static_cast<std::size_t>(3) * h * w, 0.0f);
  FaceGeometry geom{60, 50, 25, 30};
  paint_synthetic_face(image.data(), h, w, geom, {0.0, 0.0});
  FaceCrop detected = cropper.crop(image.data(), h, w);
  REQUIRE_FALSE(detected.fallback);
  FaceCrop reused = cropper.crop(blank.data(), h, w);
  REQUIRE(reused.fallback);
  REQUIRE(reused.source_rect.x == detected.source_rect.x);
  REQUIRE(reused.source_rect.w == detected.source_rect.w);
}

TEST_CASE("identity crop of a 112x112 image copies pixels exactly") {
  std::vector<float> image(static_cast<std::size_t>(kFacePixels));
  Rng rng(9);
  for (auto& v : image) v = static_cast<float>(rng.uniform());
  FaceCropper cropper{[](const float*, int, int) {
    return std::optional<PixelRect>(PixelRect{0, 0, kFaceSize, kFaceSize});
  }};
  FaceCrop crop = cropper.crop(image.data(), kFaceSize, kFaceSize);
  REQUIRE(crop.image == image);
}

TEST_CASE("window counts follow the window + horizon rule") {
  auto samples_42 = generate_dataset(quick_config(42.0, 7), 1);
  auto windows = window_dialogue<double>(to_loaded(samples_42[0]), 20.0, 20.0);
  REQUIRE(windows.size() == 2);
  REQUIRE(windows[0].start_frame == 0);
  REQUIRE(windows[1].start_frame == 500);

  // 21 s has no room for a 20 s window plus the 2 s horizon
  DialogueConfig short_config = quick_config(30.0, 8);
  auto short_sample = generate_dialogue(short_config, 0);
  LoadedDialogue d = to_loaded(short_sample);
  d.vad.rows[0].resize(21 * 25);
  d.vad.rows[1].resize(21 * 25);
  d.audio_pcm[0].resize(21 * 25 * kSamplesPerFrame);
  d.audio_pcm[1].resize(21 * 25 * kSamplesPerFrame);
  REQUIRE(window_dialogue<double>(d, 20.0, 20.0).empty());
}

TEST_CASE("window targets match a direct reading of the future VAD") {
  auto samples = generate_dataset(quick_config(44.0, 9), 1);
  LoadedDialogue d = to_loaded(samples[0]);
  auto windows = window_dialogue<double>(d, 20.0, 10.0);
  REQUIRE(!windows.empty());
  BinLayout layout = BinLayout::standard();
  const std::array<int, 4> bins = layout.bin_frame_counts;
  for (const auto& win : windows) {
    for (int t = 0; t < win.input.frames; t += 37) {
      const int g = win.start_frame + t;
      // independent re-derivation: majority vote per bin over (g, g+50]
      int expect = 0;
      for (int s = 0; s < 2; ++s) {
        int offset = g + 1;
        for (int b = 0; b < 4; ++b) {
          int active = 0;
          for (int f = 0; f < bins[static_cast<std::size_t>(b)]; ++f)
            active += d.vad.active(s, offset + f) ? 1 : 0;
          if (2 * active >= bins[static_cast<std::size_t>(b)]) expect |= 1 << (7 - (4 * s + b));
          offset += bins[static_cast<std::size_t>(b)];
        }
      }
      REQUIRE(win.target_vap[static_cast<std::size_t>(t)] == expect);
      for (int s = 0; s < 2; ++s)
        REQUIRE(win.target_future.at(t, s) == (d.vad.active(s, g + 50) ? 1.0 : 0.0));
      REQUIRE(win.mask[static_cast<std::size_t>(t)] == 1);
    }
  }
}

TEST_CASE("window audio aligns with the frame clock") {
  auto samples = generate_dataset(quick_config(40.0, 10), 1);
  LoadedDialogue d = to_loaded(samples[0]);
  auto windows = window_dialogue<double>(d, 20.0, 20.0);
  REQUIRE(!windows.empty());
  const auto& win = windows[0];
  for (int p = 0; p < 2; ++p) {
    REQUIRE(win.input.persons[static_cast<std::size_t>(p)].audio.size() ==
            static_cast<std::size_t>(win.input.frames) * kSamplesPerFrame);
    for (int t = 0; t < win.input.frames; ++t) {
      if (d.vad.active(p, win.start_frame + t)) continue;
      // silent frames are exactly zero outside cue margins (no cues here)
      for (int i = 0; i < kSamplesPerFrame; ++i)
        REQUIRE(win.input.persons[static_cast<std::size_t>(p)]
                    .audio[static_cast<std::size_t>(t * kSamplesPerFrame + i)] == 0.0);
    }
  }
}
