#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "vap/datagen.hpp"
#include "vap/modality.hpp"

namespace vap {

// ---------------------------------------------------------------------------
// WAV (16-bit PCM stereo)
// ---------------------------------------------------------------------------

inline void write_wav_pcm16_stereo(const std::string& path,
                                   const std::vector<std::int16_t>& left,
                                   const std::vector<std::int16_t>& right, int sample_rate_hz) {
  require<DimensionError>(left.size() == right.size(), "wav channels must have equal length");
  std::ofstream out(path, std::ios::binary);
  require<IoError>(out.good(), "cannot open wav for writing: " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(left.size());
  const std::uint32_t data_bytes = n * 2 * 2;
  auto u32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&out](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  out.write("RIFF", 4);
  u32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  u32(16);
  u16(1);  // PCM
  u16(2);  // stereo
  u32(static_cast<std::uint32_t>(sample_rate_hz));
  u32(static_cast<std::uint32_t>(sample_rate_hz) * 4);
  u16(4);
  u16(16);
  out.write("data", 4);
  u32(data_bytes);
  std::vector<std::int16_t> interleaved(static_cast<std::size_t>(n) * 2);
  for (std::uint32_t i = 0; i < n; ++i) {
    interleaved[static_cast<std::size_t>(i) * 2] = left[i];
    interleaved[static_cast<std::size_t>(i) * 2 + 1] = right[i];
  }
  out.write(reinterpret_cast<const char*>(interleaved.data()), data_bytes);
  require<IoError>(out.good(), "failed writing wav: " + path);
}

inline void read_wav_pcm16_stereo(const std::string& path, std::vector<std::int16_t>& left,
                                  std::vector<std::int16_t>& right, int& sample_rate_hz) {
  std::ifstream in(path, std::ios::binary);
  require<IoError>(in.good(), "cannot open wav: " + path);
  char tag[4];
  std::uint32_t riff_size = 0;
  in.read(tag, 4);
  require<IoError>(in.good() && std::memcmp(tag, "RIFF", 4) == 0, "not a RIFF file: " + path);
  in.read(reinterpret_cast<char*>(&riff_size), 4);
  in.read(tag, 4);
  require<IoError>(in.good() && std::memcmp(tag, "WAVE", 4) == 0, "not a WAVE file: " + path);
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  while (in.read(tag, 4)) {
    std::uint32_t chunk_size = 0;
    in.read(reinterpret_cast<char*>(&chunk_size), 4);
    if (!in.good()) break;
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      std::vector<char> chunk(chunk_size);
      in.read(chunk.data(), chunk_size);
      require<IoError>(chunk_size >= 16, "malformed fmt chunk: " + path);
      std::memcpy(&format, chunk.data(), 2);
      std::memcpy(&channels, chunk.data() + 2, 2);
      std::memcpy(&rate, chunk.data() + 4, 4);
      std::memcpy(&bits, chunk.data() + 14, 2);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      require<IoError>(have_fmt, "data chunk before fmt chunk: " + path);
      require<ValidationError>(format == 1 && channels == 2 && bits == 16,
                               "expected stereo 16-bit PCM: " + path);
      std::vector<std::int16_t> interleaved(chunk_size / 2);
      in.read(reinterpret_cast<char*>(interleaved.data()),
              static_cast<std::streamsize>(chunk_size));
      // a truncated file yields fewer samples; the caller cross-checks counts
      std::size_t got = static_cast<std::size_t>(in.gcount()) / 2;
      interleaved.resize(got);
      const std::size_t n = got / 2;
      left.resize(n);
      right.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        left[i] = interleaved[i * 2];
        right[i] = interleaved[i * 2 + 1];
      }
      sample_rate_hz = static_cast<int>(rate);
      return;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw IoError("no data chunk found: " + path);
}

// ---------------------------------------------------------------------------
// Packed face tensors (uint8, channel-major frames)
// ---------------------------------------------------------------------------

inline constexpr char kFacePackMagic[8] = {'V', 'A', 'P', 'F', 'A', 'C', 'E', '1'};

inline void write_face_pack(const std::string& path, const FaceSequence& faces) {
  std::ofstream out(path, std::ios::binary);
  require<IoError>(out.good(), "cannot open face pack for writing: " + path);
  out.write(kFacePackMagic, 8);
  std::uint32_t header[4] = {static_cast<std::uint32_t>(faces.frames()), kFaceChannels,
                             kFaceSize, kFaceSize};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  std::vector<float> frame(static_cast<std::size_t>(kFacePixels));
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(kFacePixels));
  for (int t = 0; t < faces.frames(); ++t) {
    faces.copy_frame(t, frame.data());
    for (int i = 0; i < kFacePixels; ++i) {
      float v = std::clamp(frame[static_cast<std::size_t>(i)], 0.0f, 1.0f);
      bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), kFacePixels);
  }
  require<IoError>(out.good(), "failed writing face pack: " + path);
}

// Lazy frame reads; one open handle per sequence, frames decoded on demand.
class PackedFaceSequence : public FaceSequence {
 public:
  explicit PackedFaceSequence(const std::string& path)
      : path_(path), in_(std::make_unique<std::ifstream>(path, std::ios::binary)) {
    require<IoError>(in_->good(), "cannot open face pack: " + path);
    char magic[8];
    in_->read(magic, 8);
    require<IoError>(in_->good() && std::memcmp(magic, kFacePackMagic, 8) == 0,
                     "not a face pack: " + path);
    std::uint32_t header[4];
    in_->read(reinterpret_cast<char*>(header), sizeof(header));
    require<IoError>(in_->good(), "truncated face pack header: " + path);
    require<ValidationError>(header[1] == kFaceChannels && header[2] == kFaceSize &&
                                 header[3] == kFaceSize,
                             "unexpected face tensor shape: " + path);
    frames_ = static_cast<int>(header[0]);
    in_->seekg(0, std::ios::end);
    auto actual = static_cast<long>(in_->tellg()) - 8 - static_cast<long>(sizeof(header));
    require<IoError>(actual == static_cast<long>(frames_) * kFacePixels,
                     "face pack length mismatch: " + path);
  }

  int frames() const override { return frames_; }

  void copy_frame(int frame, float* dst) const override {
    require<DimensionError>(frame >= 0 && frame < frames_, "face frame out of range");
    in_->seekg(8 + 16 + static_cast<std::streamoff>(frame) * kFacePixels, std::ios::beg);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(kFacePixels));
    in_->read(reinterpret_cast<char*>(bytes.data()), kFacePixels);
    require<IoError>(in_->good(), "failed reading face pack frame: " + path_);
    for (int i = 0; i < kFacePixels; ++i)
      dst[i] = static_cast<float>(bytes[static_cast<std::size_t>(i)]) / 255.0f;
  }

 private:
  std::string path_;
  std::unique_ptr<std::ifstream> in_;
  int frames_ = 0;
};

// ---------------------------------------------------------------------------
// Aux feature CSV (one row per frame, all feature families concatenated)
// ---------------------------------------------------------------------------

inline void write_aux_csv(const std::string& path, const AuxStreams& aux) {
  std::ofstream out(path);
  require<IoError>(out.good(), "cannot open aux csv for writing: " + path);
  for (int d = 0; d < kAuDim; ++d) out << "au" << d << ',';
  for (int d = 0; d < kGazeDim; ++d) out << "gaze" << d << ',';
  for (int d = 0; d < kHeadDim; ++d) out << "head" << d << ',';
  for (int d = 0; d < kBodyDim; ++d) out << "body" << d << (d + 1 == kBodyDim ? '\n' : ',');
  out.setf(std::ios::fixed);
  out.precision(6);
  const int n = aux.au.rows();
  for (int f = 0; f < n; ++f) {
    for (int d = 0; d < kAuDim; ++d) out << aux.au.at(f, d) << ',';
    for (int d = 0; d < kGazeDim; ++d) out << aux.gaze.at(f, d) << ',';
    for (int d = 0; d < kHeadDim; ++d) out << aux.head.at(f, d) << ',';
    for (int d = 0; d < kBodyDim; ++d) out << aux.body.at(f, d) << (d + 1 == kBodyDim ? '\n' : ',');
  }
  require<IoError>(out.good(), "failed writing aux csv: " + path);
}

inline AuxStreams read_aux_csv(const std::string& path) {
  std::ifstream in(path);
  require<IoError>(in.good(), "cannot open aux csv: " + path);
  std::string line;
  require<IoError>(static_cast<bool>(std::getline(in, line)), "empty aux csv: " + path);
  std::vector<std::array<float, kAuDim + kGazeDim + kHeadDim + kBodyDim>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<float, kAuDim + kGazeDim + kHeadDim + kBodyDim> row{};
    std::size_t pos = 0;
    for (std::size_t d = 0; d < row.size(); ++d) {
      std::size_t next = line.find(',', pos);
      row[d] = std::stof(line.substr(pos, next - pos));
      pos = next == std::string::npos ? line.size() : next + 1;
    }
    rows.push_back(row);
  }
  const int n = static_cast<int>(rows.size());
  AuxStreams aux;
  aux.au = Tensor<float>({n, kAuDim});
  aux.gaze = Tensor<float>({n, kGazeDim});
  aux.head = Tensor<float>({n, kHeadDim});
  aux.body = Tensor<float>({n, kBodyDim});
  for (int f = 0; f < n; ++f) {
    int c = 0;
    for (int d = 0; d < kAuDim; ++d) aux.au.at(f, d) = rows[static_cast<std::size_t>(f)][static_cast<std::size_t>(c++)];
    for (int d = 0; d < kGazeDim; ++d) aux.gaze.at(f, d) = rows[static_cast<std::size_t>(f)][static_cast<std::size_t>(c++)];
    for (int d = 0; d < kHeadDim; ++d) aux.head.at(f, d) = rows[static_cast<std::size_t>(f)][static_cast<std::size_t>(c++)];
    for (int d = 0; d < kBodyDim; ++d) aux.body.at(f, d) = rows[static_cast<std::size_t>(f)][static_cast<std::size_t>(c++)];
  }
  return aux;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

inline constexpr int kManifestSchemaVersion = 1;

struct DialogueEntry {
  std::string id;
  int frames = 0;
  std::string audio;
  std::array<std::string, 2> vad;
  std::array<std::string, 2> faces;  // empty when the stream is absent
  std::array<std::string, 2> aux;
};

struct Manifest {
  int schema_version = kManifestSchemaVersion;
  double frame_rate_hz = kDefaultFrameRateHz;
  int sample_rate_hz = kDefaultSampleRateHz;
  std::vector<DialogueEntry> dialogues;
};

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json j;
  j["schema_version"] = m.schema_version;
  j["frame_rate_hz"] = m.frame_rate_hz;
  j["sample_rate_hz"] = m.sample_rate_hz;
  j["dialogues"] = nlohmann::json::array();
  for (const auto& d : m.dialogues) {
    nlohmann::json e;
    e["id"] = d.id;
    e["frames"] = d.frames;
    e["audio"] = d.audio;
    e["vad"] = d.vad;
    if (!d.faces[0].empty()) e["faces"] = d.faces;
    if (!d.aux[0].empty()) e["aux"] = d.aux;
    j["dialogues"].push_back(e);
  }
  return j;
}

inline Manifest manifest_from_json(const nlohmann::json& j, const std::string& path) {
  require<IoError>(j.contains("schema_version"), "manifest missing schema_version: " + path);
  require<IoError>(j["schema_version"].get<int>() == kManifestSchemaVersion,
                   "unknown manifest schema version in " + path);
  Manifest m;
  m.schema_version = j["schema_version"];
  m.frame_rate_hz = j.at("frame_rate_hz");
  m.sample_rate_hz = j.at("sample_rate_hz");
  for (const auto& e : j.at("dialogues")) {
    DialogueEntry d;
    d.id = e.at("id");
    d.frames = e.at("frames");
    d.audio = e.at("audio");
    d.vad = e.at("vad").get<std::array<std::string, 2>>();
    if (e.contains("faces")) d.faces = e["faces"].get<std::array<std::string, 2>>();
    if (e.contains("aux")) d.aux = e["aux"].get<std::array<std::string, 2>>();
    m.dialogues.push_back(d);
  }
  return m;
}

// Writes one directory per dialogue plus manifest.json; returns the manifest.
inline Manifest write_dataset(const std::vector<DialogueSample>& samples,
                              const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  require<IoError>(!ec, "cannot create dataset directory: " + directory);
  Manifest manifest;
  if (!samples.empty()) {
    manifest.frame_rate_hz = samples.front().vad.frame_rate_hz;
    manifest.sample_rate_hz = samples.front().sample_rate_hz;
  }
  for (const DialogueSample& sample : samples) {
    sample.validate();
    const std::string sub = sample.id;
    fs::create_directories(fs::path(directory) / sub, ec);
    require<IoError>(!ec, "cannot create dialogue directory: " + sub);
    DialogueEntry entry;
    entry.id = sample.id;
    entry.frames = sample.frames();
    entry.audio = sub + "/audio.wav";
    write_wav_pcm16_stereo((fs::path(directory) / entry.audio).string(), sample.audio_pcm[0],
                           sample.audio_pcm[1], sample.sample_rate_hz);
    auto segments = segments_from_vad(sample.vad);
    for (int s = 0; s < 2; ++s) {
      entry.vad[static_cast<std::size_t>(s)] = sub + (s == 0 ? "/vad_a.txt" : "/vad_b.txt");
      write_vad_annotation((fs::path(directory) / entry.vad[static_cast<std::size_t>(s)]).string(),
                           segments[static_cast<std::size_t>(s)], sample.vad.frame_rate_hz);
    }
    if (sample.has_faces())
      for (int s = 0; s < 2; ++s) {
        entry.faces[static_cast<std::size_t>(s)] = sub + (s == 0 ? "/faces_a.bin" : "/faces_b.bin");
        write_face_pack((fs::path(directory) / entry.faces[static_cast<std::size_t>(s)]).string(),
                        *sample.faces[static_cast<std::size_t>(s)]);
      }
    if (sample.has_aux())
      for (int s = 0; s < 2; ++s) {
        entry.aux[static_cast<std::size_t>(s)] = sub + (s == 0 ? "/aux_a.csv" : "/aux_b.csv");
        write_aux_csv((fs::path(directory) / entry.aux[static_cast<std::size_t>(s)]).string(),
                      sample.aux[static_cast<std::size_t>(s)]);
      }
    manifest.dialogues.push_back(entry);
  }
  std::ofstream out(fs::path(directory) / "manifest.json");
  require<IoError>(out.good(), "cannot write manifest in " + directory);
  out << manifest_to_json(manifest).dump(2) << '\n';
  require<IoError>(out.good(), "failed writing manifest in " + directory);
  return manifest;
}

}  // namespace vap
