// vap: synthetic dyadic turn-taking stack. Subcommands: synth, prepare,
// train, eval, stream, events extract, codec-dump. Exit codes: 0 success,
// 1 usage error, 2 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "vap/codec.hpp"
#include "vap/datagen.hpp"
#include "vap/dataset_io.hpp"
#include "vap/eval.hpp"
#include "vap/events.hpp"
#include "vap/ingest.hpp"
#include "vap/model.hpp"
#include "vap/stream.hpp"
#include "vap/train.hpp"

namespace {

using real = float;  // training/inference scalar for the CLI

using namespace vap;

struct SynthOptions {
  std::string out_dir;
  int dialogues = 8;
  DialogueConfig config;
  std::string pre_shift = "none", pre_bc = "none", hold_marker = "none";
  double pre_shift_strength = 1.0, pre_bc_strength = 1.0, hold_marker_strength = 1.0;
};

void add_synth(CLI::App& app, SynthOptions& opt) {
  CLI::App* cmd = app.add_subcommand("synth", "generate a synthetic dialogue dataset");
  cmd->add_option("--out", opt.out_dir, "output dataset directory")->required();
  cmd->add_option("--dialogues", opt.dialogues, "number of dialogues");
  cmd->add_option("--duration", opt.config.duration_s, "dialogue duration in seconds");
  cmd->add_option("--seed", opt.config.seed, "master seed");
  cmd->add_option("--utterance-mu", opt.config.utterance_mu, "log-normal mu of utterance length");
  cmd->add_option("--utterance-sigma", opt.config.utterance_sigma, "log-normal sigma");
  cmd->add_flag("--exponential-utterances", opt.config.exponential_utterances,
                "memoryless utterance lengths");
  cmd->add_option("--utterance-mean", opt.config.utterance_mean_s,
                  "mean utterance length for the exponential option");
  cmd->add_option("--min-utterance", opt.config.min_utterance_s, "utterance floor in seconds");
  cmd->add_option("--max-utterance", opt.config.max_utterance_s, "utterance cap in seconds");
  cmd->add_option("--gap-mu", opt.config.gap_mu, "log-normal mu of inter-turn gaps");
  cmd->add_option("--gap-sigma", opt.config.gap_sigma, "log-normal sigma of gaps");
  cmd->add_option("--max-gap", opt.config.max_gap_s, "gap cap in seconds");
  cmd->add_option("--pause-mu", opt.config.pause_mu, "log-normal mu of intra-turn pauses");
  cmd->add_option("--pause-sigma", opt.config.pause_sigma, "log-normal sigma of pauses");
  cmd->add_option("--max-pause", opt.config.max_pause_s, "pause cap in seconds");
  cmd->add_option("--continue-probability", opt.config.continue_probability,
                  "chance a turn continues after a pause");
  cmd->add_option("--overlap-probability", opt.config.overlap_probability,
                  "chance a turn transition overlaps");
  cmd->add_option("--backchannel-rate", opt.config.backchannel_rate_per_min,
                  "backchannels per minute");
  cmd->add_option("--cue-duration", opt.config.cue_duration_s, "cue window in seconds");
  cmd->add_option("--pre-shift", opt.pre_shift, "pre-shift cue carrier: audio|face|both|none");
  cmd->add_option("--pre-shift-strength", opt.pre_shift_strength, "pre-shift cue strength");
  cmd->add_option("--pre-bc", opt.pre_bc, "pre-backchannel cue carrier");
  cmd->add_option("--pre-bc-strength", opt.pre_bc_strength, "pre-backchannel cue strength");
  cmd->add_option("--hold-marker", opt.hold_marker, "hold marker cue carrier");
  cmd->add_option("--hold-marker-strength", opt.hold_marker_strength, "hold marker strength");
  cmd->add_option("--frame-rate", opt.config.frame_rate_hz, "frame rate in Hz");
  cmd->add_option("--sample-rate", opt.config.sample_rate_hz, "audio sample rate in Hz");
  cmd->add_flag("!--no-faces", opt.config.with_faces, "skip face streams");
  cmd->add_flag("!--no-aux", opt.config.with_aux, "skip aux feature streams");
}

int run_synth(SynthOptions& opt) {
  auto cue = [](const std::string& carrier, double strength) {
    return CueSetting{cue_carrier_from_name(carrier), strength};
  };
  if (opt.pre_shift != "none")
    opt.config.cue_spec[CueType::kPreShift] = cue(opt.pre_shift, opt.pre_shift_strength);
  if (opt.pre_bc != "none")
    opt.config.cue_spec[CueType::kPreBackchannel] = cue(opt.pre_bc, opt.pre_bc_strength);
  if (opt.hold_marker != "none")
    opt.config.cue_spec[CueType::kHoldMarker] = cue(opt.hold_marker, opt.hold_marker_strength);
  opt.config.validate();
  auto samples = generate_dataset(opt.config, opt.dialogues);
  Manifest manifest = write_dataset(samples, opt.out_dir);
  std::cout << "wrote " << manifest.dialogues.size() << " dialogues to " << opt.out_dir << "\n";
  return 0;
}

struct EventsOptions {
  std::string vad_a, vad_b, out;
  double frame_rate = kDefaultFrameRateHz;
  double duration_s = 0.0;  // 0: derived from the last segment end
  std::uint64_t seed = 0;
};

void add_events(CLI::App& app, EventsOptions& opt) {
  CLI::App* cmd = app.add_subcommand("events", "turn-taking event utilities");
  CLI::App* extract = cmd->add_subcommand("extract", "extract events from VAD annotations");
  extract->add_option("--vad-a", opt.vad_a, "speaker A annotation file")->required();
  extract->add_option("--vad-b", opt.vad_b, "speaker B annotation file")->required();
  extract->add_option("--frame-rate", opt.frame_rate, "frame rate in Hz");
  extract->add_option("--duration", opt.duration_s, "track duration in seconds");
  extract->add_option("--seed", opt.seed, "negative-sampling seed");
  extract->add_option("--out", opt.out, "output TSV (default stdout)");
  cmd->require_subcommand(1);
}

int run_events(const EventsOptions& opt) {
  std::array<std::vector<Segment>, 2> segments;
  segments[0] = read_vad_annotation(opt.vad_a, 0, opt.frame_rate);
  segments[1] = read_vad_annotation(opt.vad_b, 1, opt.frame_rate);
  int frames = static_cast<int>(std::llround(opt.duration_s * opt.frame_rate));
  if (frames <= 0)
    for (const auto& side : segments)
      for (const Segment& seg : side) frames = std::max(frames, seg.end_frame);
  VadTrack track = track_from_segments(segments, frames, opt.frame_rate);
  auto events = extract_all_events(track, opt.seed);
  if (opt.out.empty()) {
    write_events_tsv(std::cout, events);
  } else {
    std::ofstream out(opt.out);
    require<IoError>(out.good(), "cannot open " + opt.out);
    write_events_tsv(out, events);
  }
  return 0;
}

struct PrepareOptions {
  std::string manifest;
  double window_s = kWindowSeconds;
  double hop_s = kWindowSeconds;
  std::uint64_t seed = 0;
  std::string report;
};

void add_prepare(CLI::App& app, PrepareOptions& opt) {
  CLI::App* cmd = app.add_subcommand("prepare", "validate a dataset and summarize windows/events");
  cmd->add_option("--manifest", opt.manifest, "dataset manifest path")->required();
  cmd->add_option("--window", opt.window_s, "window length in seconds");
  cmd->add_option("--hop", opt.hop_s, "hop in seconds");
  cmd->add_option("--seed", opt.seed, "event sampling seed");
  cmd->add_option("--report", opt.report, "write the summary to a file");
}

int run_prepare(const PrepareOptions& opt) {
  DatasetReader reader(opt.manifest);
  std::ostringstream out;
  out << "id\tframes\twindows\tfaces\taux\tevents\n";
  for (int i = 0; i < reader.size(); ++i) {
    LoadedDialogue d = reader.load(i);  // performs all stream cross-checks
    auto starts = window_starts(d.frames(), d.frame_rate_hz, opt.window_s, opt.hop_s);
    auto events = events_for_dialogue(d, opt.seed, i);
    if (starts.empty())
      std::cerr << "warning: " << d.id << " is too short for a " << opt.window_s
                << " s window plus lookahead; skipped\n";
    out << d.id << '\t' << d.frames() << '\t' << starts.size() << '\t'
        << (d.has_faces() ? "yes" : "no") << '\t' << (d.has_aux() ? "yes" : "no") << '\t'
        << events.size() << '\n';
  }
  if (opt.report.empty()) {
    std::cout << out.str();
  } else {
    std::ofstream file(opt.report);
    require<IoError>(file.good(), "cannot open " + opt.report);
    file << out.str();
  }
  std::cout << "validated " << reader.size() << " dialogues\n";
  return 0;
}

struct TrainOptions {
  std::string manifest, checkpoint = "checkpoint.bin", metrics = "metrics.csv";
  std::string variant = "Baseline1";
  TrainConfig config;
  ModelDims dims;
  double train_ratio = 0.7, val_ratio = 0.15, test_ratio = 0.15;
  std::uint64_t split_seed = 0;
};

void add_train_options(CLI::App* cmd, TrainOptions& opt) {
  cmd->add_option("--manifest", opt.manifest, "dataset manifest")->required();
  cmd->add_option("--checkpoint", opt.checkpoint, "output checkpoint path");
  cmd->add_option("--metrics", opt.metrics, "metrics CSV path");
  cmd->add_option("--variant", opt.variant,
                  "Baseline1|Baseline2_1|Baseline2_2|Proposed1|Proposed2|Proposed3");
  cmd->add_option("--lr", opt.config.learning_rate, "learning rate");
  cmd->add_option("--weight-decay", opt.config.weight_decay, "decoupled weight decay");
  cmd->add_option("--plateau-factor", opt.config.plateau_factor, "LR reduction factor");
  cmd->add_option("--plateau-patience", opt.config.plateau_patience, "plateau patience");
  cmd->add_option("--effective-batch", opt.config.effective_batch, "windows per update");
  cmd->add_option("--accumulation-steps", opt.config.accumulation_steps, "gradient accumulation");
  cmd->add_option("--early-stopping", opt.config.early_stopping_epochs, "early stopping epochs");
  cmd->add_option("--lambda", opt.config.loss_lambda, "future-VAD loss weight");
  cmd->add_option("--max-epochs", opt.config.max_epochs, "epoch cap");
  cmd->add_option("--seed", opt.config.seed, "training seed");
  cmd->add_option("--window", opt.config.window_s, "window seconds");
  cmd->add_option("--train-hop", opt.config.train_hop_s, "training hop seconds");
  cmd->add_option("--dim", opt.dims.modality_dim, "modality embedding width");
  cmd->add_option("--fused-dim", opt.dims.fused_dim, "person stream width");
  cmd->add_option("--person-layers", opt.dims.person_layers, "per-person attention blocks");
  cmd->add_option("--cross-layers", opt.dims.cross_layers, "cross-person blocks");
  cmd->add_option("--heads", opt.dims.heads, "attention heads");
  cmd->add_option("--context-kernel", opt.dims.context_kernel, "encoder context kernel");
  cmd->add_option("--train-ratio", opt.train_ratio, "train split ratio");
  cmd->add_option("--val-ratio", opt.val_ratio, "validation split ratio");
  cmd->add_option("--test-ratio", opt.test_ratio, "test split ratio");
  cmd->add_option("--split-seed", opt.split_seed, "dialogue split seed");
}

int run_train(const TrainOptions& opt) {
  DatasetReader reader(opt.manifest);
  DatasetSplit split = split_dataset(reader.size(),
                                     {opt.train_ratio, opt.val_ratio, opt.test_ratio},
                                     opt.split_seed);
  std::vector<LoadedDialogue> train_dialogues, val_dialogues;
  for (int i : split.train) train_dialogues.push_back(reader.load(i));
  for (int i : split.val) val_dialogues.push_back(reader.load(i));
  WindowDataset<real> train_set(std::move(train_dialogues), opt.config.window_s,
                                opt.config.train_hop_s);
  WindowDataset<real> val_set(std::move(val_dialogues), opt.config.window_s,
                              opt.config.train_hop_s);
  VapModel<real> model(VariantConfig::preset(opt.variant), opt.dims, opt.config.seed);
  std::cout << "variant " << opt.variant << ": " << model.parameter_count() << " parameters\n";
  std::ofstream metrics(opt.metrics, std::ios::app);
  require<IoError>(metrics.good(), "cannot open " + opt.metrics);
  TrainOutcome outcome =
      train_loop(model, opt.config, train_set, val_set, &metrics, opt.checkpoint);
  std::cout << "best val loss " << outcome.best_val_loss << " at epoch " << outcome.best_epoch
            << " after " << outcome.updates << " updates ("
            << (outcome.stopped_early ? "early stop" : "epoch cap") << ")\n"
            << "checkpoint written to " << opt.checkpoint << "\n";
  return 0;
}

struct EvalOptions {
  std::string checkpoint, manifest, out = "report.csv", thresholds_out;
  double eval_hop_s = 1.0;
  double train_ratio = 0.7, val_ratio = 0.15, test_ratio = 0.15;
  std::uint64_t split_seed = 0, seed = 0;
};

void add_eval(CLI::App& app, EvalOptions& opt) {
  CLI::App* cmd =
      app.add_subcommand("eval", "tune thresholds on validation and score the test split");
  cmd->add_option("--checkpoint", opt.checkpoint, "trained checkpoint")->required();
  cmd->add_option("--manifest", opt.manifest, "dataset manifest")->required();
  cmd->add_option("--out", opt.out, "report CSV path");
  cmd->add_option("--save-thresholds", opt.thresholds_out, "write tuned thresholds JSON");
  cmd->add_option("--eval-hop", opt.eval_hop_s, "dense scoring hop in seconds");
  cmd->add_option("--train-ratio", opt.train_ratio, "train split ratio");
  cmd->add_option("--val-ratio", opt.val_ratio, "validation split ratio");
  cmd->add_option("--test-ratio", opt.test_ratio, "test split ratio");
  cmd->add_option("--split-seed", opt.split_seed, "dialogue split seed");
  cmd->add_option("--seed", opt.seed, "event sampling seed");
}

int run_eval(const EvalOptions& opt) {
  nlohmann::json extra;
  VapModel<real> model = VapModel<real>::load(opt.checkpoint, &extra);
  DatasetReader reader(opt.manifest);
  DatasetSplit split = split_dataset(reader.size(),
                                     {opt.train_ratio, opt.val_ratio, opt.test_ratio},
                                     opt.split_seed);
  std::vector<LoadedDialogue> val_dialogues, test_dialogues;
  for (int i : split.val) val_dialogues.push_back(reader.load(i));
  for (int i : split.test) test_dialogues.push_back(reader.load(i));
  require<ConfigError>(!val_dialogues.empty() && !test_dialogues.empty(),
                       "validation and test splits must be non-empty");
  const int hop_frames =
      std::max(1, static_cast<int>(std::llround(opt.eval_hop_s * kDefaultFrameRateHz)));
  ModelScorer<real> scorer(model, hop_frames);
  Thresholds thresholds = tune_thresholds(scorer, val_dialogues, opt.seed);
  EvaluationReport report =
      evaluate(scorer, test_dialogues, thresholds, model.variant().name, opt.seed);
  std::ofstream out(opt.out);
  require<IoError>(out.good(), "cannot open " + opt.out);
  write_report_csv(out, report);
  write_report_csv(std::cout, report);
  if (!opt.thresholds_out.empty()) {
    std::ofstream tout(opt.thresholds_out);
    require<IoError>(tout.good(), "cannot open " + opt.thresholds_out);
    tout << nlohmann::json({{"sl", thresholds.sl}, {"sp", thresholds.sp}, {"bc", thresholds.bc}})
                .dump(2)
         << "\n";
  }
  std::cout << "report written to " << opt.out << "\n";
  return 0;
}

struct StreamOptions {
  std::string checkpoint, manifest, dialogue, out, thresholds_file;
  double theta_sp = 0.5, theta_bc = 0.5;
  std::uint64_t seed = 0;
};

void add_stream(CLI::App& app, StreamOptions& opt) {
  CLI::App* cmd = app.add_subcommand("stream", "replay a dialogue through the streaming engine");
  cmd->add_option("--checkpoint", opt.checkpoint, "trained checkpoint")->required();
  cmd->add_option("--manifest", opt.manifest, "dataset manifest")->required();
  cmd->add_option("--dialogue", opt.dialogue, "dialogue id (default: first)");
  cmd->add_option("--out", opt.out, "output records file (default stdout)");
  cmd->add_option("--thresholds", opt.thresholds_file, "thresholds JSON from eval");
  cmd->add_option("--theta-sp", opt.theta_sp, "shift decision threshold");
  cmd->add_option("--theta-bc", opt.theta_bc, "backchannel decision threshold");
  cmd->add_option("--seed", opt.seed, "accepted for interface uniformity");
}

int run_stream(const StreamOptions& opt) {
  VapModel<real> model = VapModel<real>::load(opt.checkpoint);
  DatasetReader reader(opt.manifest);
  require<ConfigError>(reader.size() > 0, "empty dataset");
  int index = 0;
  if (!opt.dialogue.empty()) {
    index = -1;
    for (int i = 0; i < reader.size(); ++i)
      if (reader.manifest().dialogues[static_cast<std::size_t>(i)].id == opt.dialogue) index = i;
    require<ConfigError>(index >= 0, "no dialogue named " + opt.dialogue);
  }
  LoadedDialogue dialogue = reader.load(index);
  GateConfig gate;
  gate.theta_sp = opt.theta_sp;
  gate.theta_bc = opt.theta_bc;
  if (!opt.thresholds_file.empty()) {
    std::ifstream in(opt.thresholds_file);
    require<IoError>(in.good(), "cannot open " + opt.thresholds_file);
    nlohmann::json j;
    in >> j;
    gate.theta_sp = j.at("sp");
    gate.theta_bc = j.at("bc");
  }
  StreamEngine<real> engine(model, gate);
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!opt.out.empty()) {
    file.open(opt.out);
    require<IoError>(file.good(), "cannot open " + opt.out);
    out = &file;
  }
  *out << "frame\tp_now_a\tp_now_b\tp_future_a\tp_future_b\tbc_prob\tfired\tstep_ms\n";
  for (int f = 0; f < dialogue.frames(); ++f) {
    StepOutput<real> step = engine.step(bundle_for_frame<real>(dialogue, f));
    std::string fired = "-";
    for (const auto& d : step.fired) fired = decision_name(d.kind);
    *out << step.frame << '\t' << step.p_now[0] << '\t' << step.p_now[1] << '\t'
         << step.p_future[0] << '\t' << step.p_future[1] << '\t' << step.bc_prob << '\t' << fired
         << '\t' << step.step_ms << '\n';
  }
  *out << "# step_ms p50=" << engine.percentile_ms(0.5) << " p95=" << engine.percentile_ms(0.95)
       << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voice activity projection turn-taking stack"};
  app.set_config("--config", "", "flat key=value config file; explicit flags take precedence");
  app.require_subcommand(1);

  SynthOptions synth_opt;
  EventsOptions events_opt;
  PrepareOptions prepare_opt;
  TrainOptions train_opt;
  EvalOptions eval_opt;
  StreamOptions stream_opt;

  add_synth(app, synth_opt);
  add_events(app, events_opt);
  add_prepare(app, prepare_opt);
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  add_train_options(train_cmd, train_opt);
  add_eval(app, eval_opt);
  add_stream(app, stream_opt);
  CLI::App* codec_cmd = app.add_subcommand("codec-dump", "print the 256-row VAP state table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand("synth")) return run_synth(synth_opt);
    if (app.got_subcommand("events")) return run_events(events_opt);
    if (app.got_subcommand("prepare")) return run_prepare(prepare_opt);
    if (app.got_subcommand(train_cmd)) return run_train(train_opt);
    if (app.got_subcommand("eval")) return run_eval(eval_opt);
    if (app.got_subcommand("stream")) return run_stream(stream_opt);
    if (app.got_subcommand(codec_cmd)) {
      codec_dump(std::cout);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << app.help();
  return 1;
}
