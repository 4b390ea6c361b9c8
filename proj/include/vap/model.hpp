#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "vap/codec.hpp"
#include "vap/modality.hpp"
#include "vap/nn.hpp"

namespace vap {

// ---------------------------------------------------------------------------
// Variants
// ---------------------------------------------------------------------------

// Enabled-modality sets for the six standard conditions; anything else is a
// custom set.
struct VariantConfig {
  std::string name = "custom";
  std::set<Modality> modalities;

  bool has(Modality m) const { return modalities.count(m) != 0; }

  static VariantConfig preset(const std::string& name) {
    VariantConfig v;
    v.name = name;
    using M = Modality;
    if (name == "Baseline1")
      v.modalities = {M::kAudio};
    else if (name == "Baseline2_1")
      v.modalities = {M::kAudio, M::kAu};
    else if (name == "Baseline2_2")
      v.modalities = {M::kAudio, M::kAu, M::kHead, M::kGaze, M::kBody};
    else if (name == "Proposed1")
      v.modalities = {M::kAudio, M::kFace};
    else if (name == "Proposed2")
      v.modalities = {M::kAudio, M::kFace, M::kHead, M::kGaze, M::kBody};
    else if (name == "Proposed3")
      v.modalities = {M::kAudio, M::kAu, M::kFace, M::kHead, M::kGaze, M::kBody};
    else
      throw ConfigError("unknown variant preset: " + name);
    return v;
  }

  static VariantConfig custom(std::set<Modality> mods) {
    VariantConfig v;
    v.modalities = std::move(mods);
    return v;
  }
};

struct EncoderSpec {
  Modality modality;
  int output_dim = 0;
  bool causal = true;
  double frame_rate_hz = kDefaultFrameRateHz;
};

struct ModelDims {
  int modality_dim = 64;  // per-modality embedding width
  int fused_dim = 64;     // per-person stream width
  int person_layers = 2;
  int cross_layers = 1;
  int heads = 4;
  int context_kernel = 9;  // temporal context conv width in frames
  std::vector<int> audio_channels = {12, 24, 24, 32};
  int face_channels1 = 12;
  int face_channels2 = 24;
};

inline nlohmann::json dims_to_json(const ModelDims& d) {
  return {{"modality_dim", d.modality_dim}, {"fused_dim", d.fused_dim},
          {"person_layers", d.person_layers}, {"cross_layers", d.cross_layers},
          {"heads", d.heads}, {"context_kernel", d.context_kernel},
          {"audio_channels", d.audio_channels}, {"face_channels1", d.face_channels1},
          {"face_channels2", d.face_channels2}};
}

inline ModelDims dims_from_json(const nlohmann::json& j) {
  ModelDims d;
  d.modality_dim = j.at("modality_dim");
  d.fused_dim = j.at("fused_dim");
  d.person_layers = j.at("person_layers");
  d.cross_layers = j.at("cross_layers");
  d.heads = j.at("heads");
  d.context_kernel = j.at("context_kernel");
  d.audio_channels = j.at("audio_channels").get<std::vector<int>>();
  d.face_channels1 = j.at("face_channels1");
  d.face_channels2 = j.at("face_channels2");
  return d;
}

// ---------------------------------------------------------------------------
// Inputs / outputs
// ---------------------------------------------------------------------------

template <typename S>
struct PersonInput {
  std::vector<S> audio;                  // frames * 640 samples, one channel
  const FaceSequence* faces = nullptr;   // frames images
  Tensor<S> au, gaze, head, body;        // [frames, dim] or empty
};

template <typename S>
struct WindowInput {
  int frames = 0;
  std::array<PersonInput<S>, 2> persons;
};

template <typename S>
struct ModelOutput {
  Var<S> vap_logits;     // [frames, 256]
  Var<S> future_logits;  // [frames, 2]
};

// Row softmax over plain tensors (inference-side helper).
template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& logits) {
  Tensor<S> out(logits.shape);
  const int t = logits.rows();
  const int c = logits.cols();
  for (int i = 0; i < t; ++i) {
    const S* row = &logits.data[static_cast<std::size_t>(i) * c];
    S* orow = &out.data[static_cast<std::size_t>(i) * c];
    S max_v = row[0];
    for (int j = 1; j < c; ++j) max_v = std::max(max_v, row[j]);
    S denom = S(0);
    for (int j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - max_v);
      denom += orow[j];
    }
    for (int j = 0; j < c; ++j) orow[j] /= denom;
  }
  return out;
}

template <typename S>
VapDistribution distribution_at(const Tensor<S>& vap_probs, int frame) {
  VapDistribution dist;
  double sum = 0.0;
  for (int k = 0; k < kNumVapStates; ++k) {
    dist.probs[static_cast<std::size_t>(k)] =
        static_cast<double>(vap_probs.data[static_cast<std::size_t>(frame) * kNumVapStates + k]);
    sum += dist.probs[static_cast<std::size_t>(k)];
  }
  for (auto& p : dist.probs) p /= sum;  // exact-normalize away scalar rounding
  return dist;
}

// ---------------------------------------------------------------------------
// Encoders
// ---------------------------------------------------------------------------

template <typename S>
struct Conv1dLayer {
  Var<S> w, b;
  int kernel = 1, stride = 1;

  Conv1dLayer() = default;
  Conv1dLayer(int in, int out, int k, int s, Rng& rng)
      : w(init_param<S>({k * in, out}, k * in, rng)), b(make_parameter(Tensor<S>({out}))),
        kernel(k), stride(s) {}

  Var<S> forward(const Var<S>& x) const { return conv1d_causal(x, w, b, kernel, stride); }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
  }
};

// Waveform to frame embeddings: strided causal conv stack with total stride
// 640 (16 kHz in, 25 Hz out) plus a causal temporal context conv. External
// weights with matching shapes can be loaded through the named-tensor hook.
template <typename S>
class AudioEncoder {
 public:
  AudioEncoder() = default;
  AudioEncoder(const ModelDims& dims, Rng& rng) {
    const auto& ch = dims.audio_channels;
    require<ConfigError>(ch.size() == 4, "audio_channels must have 4 entries");
    const int d = dims.modality_dim;
    layers_.emplace_back(1, ch[0], 10, 5, rng);
    layers_.emplace_back(ch[0], ch[1], 8, 4, rng);
    layers_.emplace_back(ch[1], ch[2], 8, 4, rng);
    layers_.emplace_back(ch[2], ch[3], 8, 4, rng);
    layers_.emplace_back(ch[3], d, 4, 2, rng);
    context_ = Conv1dLayer<S>(d, d, dims.context_kernel, 1, rng);
  }

  Var<S> forward(const std::vector<S>& samples, int frames) const {
    require<DimensionError>(static_cast<long>(samples.size()) ==
                                static_cast<long>(frames) * kSamplesPerFrame,
                            "audio length must be frames * 640 samples");
    Tensor<S> wave({static_cast<int>(samples.size()), 1});
    wave.data = samples;
    Var<S> x = make_constant(std::move(wave));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i].forward(x);
      x = relu(x);
    }
    return context_.forward(x);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i].collect(prefix + ".conv" + std::to_string(i), out);
    context_.collect(prefix + ".ctx", out);
  }

 private:
  std::vector<Conv1dLayer<S>> layers_;
  Conv1dLayer<S> context_;
};

// Face images to frame embeddings: fixed 4x4 average pooling, two small
// conv layers per frame, a linear bottleneck, then a causal temporal conv.
// With a constant image sequence the embeddings are constant once the
// temporal kernel is filled.
template <typename S>
class FaceEncoder {
 public:
  static constexpr int kPool = 4;
  static constexpr int kPooledSize = kFaceSize / kPool;  // 28

  FaceEncoder() = default;
  FaceEncoder(const ModelDims& dims, Rng& rng) {
    const int d = dims.modality_dim;
    c1_out_ = dims.face_channels1;
    c2_out_ = dims.face_channels2;
    conv1_w_ = init_param<S>({3 * 3 * kFaceChannels, c1_out_}, 3.0 * 3 * kFaceChannels, rng);
    conv1_b_ = make_parameter(Tensor<S>({c1_out_}));
    conv2_w_ = init_param<S>({3 * 3 * c1_out_, c2_out_}, 3.0 * 3 * c1_out_, rng);
    conv2_b_ = make_parameter(Tensor<S>({c2_out_}));
    // 28 -> conv k3 s2 -> 13 -> conv k3 s2 -> 6
    proj_ = Linear<S>(c2_out_ * 6 * 6, d, rng);
    context_ = Conv1dLayer<S>(d, d, dims.context_kernel, 1, rng);
  }

  Var<S> forward(const FaceSequence& faces) const {
    const int t = faces.frames();
    Tensor<S> pooled({t, kFaceChannels * kPooledSize * kPooledSize});
    std::vector<float> frame(static_cast<std::size_t>(kFacePixels));
    for (int i = 0; i < t; ++i) {
      faces.copy_frame(i, frame.data());
      S* dst = &pooled.data[static_cast<std::size_t>(i) * kFaceChannels * kPooledSize * kPooledSize];
      for (int c = 0; c < kFaceChannels; ++c) {
        const float* src = &frame[static_cast<std::size_t>(c) * kFaceSize * kFaceSize];
        for (int y = 0; y < kPooledSize; ++y)
          for (int x = 0; x < kPooledSize; ++x) {
            float acc = 0.0f;
            for (int dy = 0; dy < kPool; ++dy)
              for (int dx = 0; dx < kPool; ++dx)
                acc += src[(y * kPool + dy) * kFaceSize + x * kPool + dx];
            dst[(static_cast<std::size_t>(c) * kPooledSize + y) * kPooledSize + x] =
                static_cast<S>(acc / (kPool * kPool));
          }
      }
    }
    Var<S> x = make_constant(std::move(pooled));
    x = relu(conv2d(x, conv1_w_, conv1_b_, kFaceChannels, kPooledSize, kPooledSize, 3, 2));
    x = relu(conv2d(x, conv2_w_, conv2_b_, c1_out_, 13, 13, 3, 2));
    x = proj_.forward(x);
    return context_.forward(x);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".conv1.w", conv1_w_});
    out.push_back({prefix + ".conv1.b", conv1_b_});
    out.push_back({prefix + ".conv2.w", conv2_w_});
    out.push_back({prefix + ".conv2.b", conv2_b_});
    proj_.collect(prefix + ".proj", out);
    context_.collect(prefix + ".ctx", out);
  }

 private:
  int c1_out_ = 0, c2_out_ = 0;
  Var<S> conv1_w_, conv1_b_, conv2_w_, conv2_b_;
  Linear<S> proj_;
  Conv1dLayer<S> context_;
};

// Per-frame MLP for hand-crafted feature streams.
template <typename S>
class AuxEncoder {
 public:
  AuxEncoder() = default;
  AuxEncoder(int in_dim, const ModelDims& dims, Rng& rng)
      : in_(in_dim, dims.modality_dim, rng), out_(dims.modality_dim, dims.modality_dim, rng) {}

  Var<S> forward(const Tensor<S>& features) const {
    return out_.forward(relu(in_.forward(make_constant(features))));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    in_.collect(prefix + ".in", out);
    out_.collect(prefix + ".out", out);
  }

 private:
  Linear<S> in_, out_;
};

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

// Merges one person's modality streams: project each to the fused width, add
// a learned modality embedding, sum (commutative), substitute a learned null
// token for disabled modalities, then run causal self-attention blocks.
template <typename S>
class PersonFusion {
 public:
  PersonFusion() = default;
  PersonFusion(const VariantConfig& variant, const ModelDims& dims, Rng& rng) {
    const int h = dims.fused_dim;
    for (Modality m : kAllModalities) {
      null_tokens_[m] = make_parameter(uniform_tensor<S>({h}, S(-0.1), S(0.1), rng));
      if (variant.has(m)) {
        projections_[m] = Linear<S>(dims.modality_dim, h, rng);
        embeddings_[m] = make_parameter(uniform_tensor<S>({h}, S(-0.1), S(0.1), rng));
      }
    }
    for (int i = 0; i < dims.person_layers; ++i) blocks_.emplace_back(h, dims.heads, rng);
  }

  Var<S> forward(const std::map<Modality, Var<S>>& streams, int frames) const {
    const int h = static_cast<int>(null_tokens_.begin()->second->value.numel());
    Var<S> acc = make_constant(Tensor<S>({frames, h}));
    for (Modality m : kAllModalities) {
      auto it = streams.find(m);
      if (it != streams.end()) {
        require<ConfigError>(projections_.count(m) != 0,
                             std::string("stream for disabled modality: ") + modality_name(m));
        Var<S> proj = projections_.at(m).forward(it->second);
        acc = add(acc, add_row(proj, embeddings_.at(m)));
      } else {
        acc = add_row(acc, null_tokens_.at(m));
      }
    }
    Var<S> x = add_positions(acc);
    for (const auto& block : blocks_) x = block.forward(x);
    return x;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    for (Modality m : kAllModalities) {
      std::string name = modality_name(m);
      out.push_back({prefix + ".null." + name, null_tokens_.at(m)});
      if (projections_.count(m)) {
        projections_.at(m).collect(prefix + ".proj." + name, out);
        out.push_back({prefix + ".embed." + name, embeddings_.at(m)});
      }
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
  }

 private:
  std::map<Modality, Linear<S>> projections_;
  std::map<Modality, Var<S>> embeddings_;
  std::map<Modality, Var<S>> null_tokens_;
  std::vector<TransformerBlock<S>> blocks_;
};

// Causal cross-attention between the two person streams; one weight set is
// applied in both directions so swapping persons swaps the output halves.
template <typename S>
class CrossPersonFusion {
 public:
  CrossPersonFusion() = default;
  CrossPersonFusion(const ModelDims& dims, Rng& rng) {
    for (int i = 0; i < dims.cross_layers; ++i)
      blocks_.emplace_back(dims.fused_dim, dims.heads, rng);
  }

  // returns the joint stream [frames, 2H]
  Var<S> forward(Var<S> a, Var<S> b) const {
    for (const auto& block : blocks_) {
      Var<S> na = block.forward(a, b);
      Var<S> nb = block.forward(b, a);
      a = na;
      b = nb;
    }
    return concat_cols<S>({a, b});
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
  }

 private:
  std::vector<CrossAttentionBlock<S>> blocks_;
};

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

template <typename S>
class VapModel {
 public:
  VapModel(const VariantConfig& variant, const ModelDims& dims, std::uint64_t seed)
      : variant_(variant), dims_(dims), seed_(seed) {
    Rng rng(mix_seed(seed ^ 0x6d6f64656cull));
    if (variant.has(Modality::kAudio)) audio_ = std::make_unique<AudioEncoder<S>>(dims, rng);
    if (variant.has(Modality::kFace)) face_ = std::make_unique<FaceEncoder<S>>(dims, rng);
    if (variant.has(Modality::kAu))
      au_ = std::make_unique<AuxEncoder<S>>(kAuDim, dims, rng);
    if (variant.has(Modality::kGaze))
      gaze_ = std::make_unique<AuxEncoder<S>>(kGazeDim, dims, rng);
    if (variant.has(Modality::kHead))
      head_ = std::make_unique<AuxEncoder<S>>(kHeadDim, dims, rng);
    if (variant.has(Modality::kBody))
      body_ = std::make_unique<AuxEncoder<S>>(kBodyDim, dims, rng);
    person_ = PersonFusion<S>(variant, dims, rng);
    cross_ = CrossPersonFusion<S>(dims, rng);
    vap_head_ = Linear<S>(2 * dims.fused_dim, kNumVapStates, rng);
    future_head_ = Linear<S>(2 * dims.fused_dim, 2, rng);
    collect_params();
  }

  const VariantConfig& variant() const { return variant_; }
  const ModelDims& dims() const { return dims_; }
  std::uint64_t seed() const { return seed_; }

  ModelOutput<S> predict(const WindowInput<S>& input) const {
    const int t = input.frames;
    require<ConfigError>(t > 0, "empty window");
    std::array<Var<S>, 2> person_streams;
    for (int p = 0; p < 2; ++p) {
      const PersonInput<S>& in = input.persons[static_cast<std::size_t>(p)];
      std::map<Modality, Var<S>> streams;
      if (variant_.has(Modality::kAudio)) {
        require<ConfigError>(!in.audio.empty(), "variant needs audio but none provided");
        streams[Modality::kAudio] = audio_->forward(in.audio, t);
      }
      if (variant_.has(Modality::kFace)) {
        require<ConfigError>(in.faces != nullptr, "variant needs faces but none provided");
        require<DimensionError>(in.faces->frames() == t, "face stream length mismatch");
        streams[Modality::kFace] = face_->forward(*in.faces);
      }
      auto need_aux = [&](Modality m, const Tensor<S>& feat, const AuxEncoder<S>& enc) {
        require<ConfigError>(!feat.empty(),
                             std::string("variant needs ") + modality_name(m) + " features");
        require<DimensionError>(feat.rows() == t && feat.cols() == aux_dim(m),
                                std::string(modality_name(m)) + " feature shape mismatch");
        streams[m] = enc.forward(feat);
      };
      if (variant_.has(Modality::kAu)) need_aux(Modality::kAu, in.au, *au_);
      if (variant_.has(Modality::kGaze)) need_aux(Modality::kGaze, in.gaze, *gaze_);
      if (variant_.has(Modality::kHead)) need_aux(Modality::kHead, in.head, *head_);
      if (variant_.has(Modality::kBody)) need_aux(Modality::kBody, in.body, *body_);
      person_streams[static_cast<std::size_t>(p)] = person_.forward(streams, t);
    }
    Var<S> joint = cross_.forward(person_streams[0], person_streams[1]);
    ModelOutput<S> out;
    out.vap_logits = vap_head_.forward(joint);
    out.future_logits = future_head_.forward(joint);
    return out;
  }

  std::vector<ParamRef<S>>& params() { return params_; }
  const std::vector<ParamRef<S>>& params() const { return params_; }

  long parameter_count() const {
    long n = 0;
    for (const auto& p : params_) n += p.var->value.numel();
    return n;
  }

  std::vector<EncoderSpec> encoder_specs() const {
    std::vector<EncoderSpec> specs;
    for (Modality m : kAllModalities)
      if (variant_.has(m))
        specs.push_back({m, dims_.modality_dim, true, kDefaultFrameRateHz});
    return specs;
  }

  // Pretrained-weight hook: assigns tensors by name with shape checks.
  void load_named(const std::map<std::string, Tensor<double>>& tensors) {
    std::map<std::string, ParamRef<S>*> by_name;
    for (auto& p : params_) by_name[p.name] = &p;
    for (const auto& [name, tensor] : tensors) {
      auto it = by_name.find(name);
      require<ConfigError>(it != by_name.end(), "no parameter named " + name);
      require<DimensionError>(it->second->var->value.numel() == tensor.numel(),
                              "shape mismatch for parameter " + name);
      for (std::size_t i = 0; i < tensor.data.size(); ++i)
        it->second->var->value.data[i] = static_cast<S>(tensor.data[i]);
    }
  }

  void zero_grads() {
    for (auto& p : params_) p.var->grad = Tensor<S>();
  }

  // ---- checkpoint io: magic, LE u64 header length, JSON header, f64 blob ----

  static constexpr const char* kMagic = "VAPCKPT1";

  void save(const std::string& path, const nlohmann::json& extra = {}) const {
    nlohmann::json header;
    header["format_version"] = 1;
    header["variant"] = {{"name", variant_.name}, {"modalities", nlohmann::json::array()}};
    for (Modality m : kAllModalities)
      if (variant_.has(m)) header["variant"]["modalities"].push_back(modality_name(m));
    header["dims"] = dims_to_json(dims_);
    header["seed"] = seed_;
    header["tensors"] = nlohmann::json::array();
    for (const auto& p : params_)
      header["tensors"].push_back({{"name", p.name}, {"shape", p.var->value.shape}});
    if (!extra.is_null() && !extra.empty()) header["extra"] = extra;
    std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    require<IoError>(out.good(), "cannot open checkpoint for writing: " + path);
    out.write(kMagic, 8);
    std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : params_) {
      std::vector<double> buf(p.var->value.data.begin(), p.var->value.data.end());
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(double)));
    }
    require<IoError>(out.good(), "failed writing checkpoint: " + path);
  }

  static nlohmann::json read_header(const std::string& path, std::ifstream& in) {
    require<IoError>(in.good(), "cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    require<IoError>(in.good() && std::string(magic, 8) == kMagic,
                     "not a checkpoint file: " + path);
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    require<IoError>(in.good(), "truncated checkpoint header: " + path);
    nlohmann::json header = nlohmann::json::parse(text);
    require<IoError>(header.contains("format_version"),
                     "checkpoint missing version field: " + path);
    require<IoError>(header["format_version"] == 1,
                     "unsupported checkpoint version in " + path);
    return header;
  }

  static VapModel load(const std::string& path, nlohmann::json* extra_out = nullptr) {
    std::ifstream in(path, std::ios::binary);
    nlohmann::json header = read_header(path, in);
    VariantConfig variant;
    variant.name = header["variant"]["name"];
    for (const auto& m : header["variant"]["modalities"])
      variant.modalities.insert(modality_from_name(m.get<std::string>()));
    VapModel model(variant, dims_from_json(header["dims"]), header["seed"].get<std::uint64_t>());
    const auto& tensors = header["tensors"];
    require<IoError>(tensors.size() == model.params_.size(),
                     "checkpoint tensor count mismatch: " + path);
    for (std::size_t i = 0; i < model.params_.size(); ++i) {
      auto& p = model.params_[i];
      require<IoError>(tensors[i]["name"] == p.name, "checkpoint tensor order mismatch: " + path);
      std::vector<int> shape = tensors[i]["shape"].get<std::vector<int>>();
      require<IoError>(shape == p.var->value.shape, "checkpoint shape mismatch for " + p.name);
      std::vector<double> buf(static_cast<std::size_t>(p.var->value.numel()));
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(double)));
      require<IoError>(in.good(), "truncated checkpoint blob: " + path);
      for (std::size_t k = 0; k < buf.size(); ++k)
        p.var->value.data[k] = static_cast<S>(buf[k]);
    }
    if (extra_out != nullptr)
      *extra_out = header.contains("extra") ? header["extra"] : nlohmann::json::object();
    return model;
  }

 private:
  void collect_params() {
    params_.clear();
    if (audio_) audio_->collect("audio", params_);
    if (face_) face_->collect("face", params_);
    if (au_) au_->collect("au", params_);
    if (gaze_) gaze_->collect("gaze", params_);
    if (head_) head_->collect("head", params_);
    if (body_) body_->collect("body", params_);
    person_.collect("person", params_);
    cross_.collect("cross", params_);
    vap_head_.collect("head.vap", params_);
    future_head_.collect("head.future", params_);
  }

  VariantConfig variant_;
  ModelDims dims_;
  std::uint64_t seed_ = 0;
  std::unique_ptr<AudioEncoder<S>> audio_;
  std::unique_ptr<FaceEncoder<S>> face_;
  std::unique_ptr<AuxEncoder<S>> au_, gaze_, head_, body_;
  PersonFusion<S> person_;
  CrossPersonFusion<S> cross_;
  Linear<S> vap_head_;
  Linear<S> future_head_;
  std::vector<ParamRef<S>> params_;
};

}  // namespace vap
