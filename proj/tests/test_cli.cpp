#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifndef VAP_CLI_PATH
#error "VAP_CLI_PATH must point at the vap binary"
#endif

namespace {

namespace fs = std::filesystem;

const std::string kWork = "/tmp/vap_cli_test";

int run(const std::string& args, const std::string& redirect = "") {
  std::string cmd = std::string(VAP_CLI_PATH) + " " + args;
  if (!redirect.empty()) cmd += " > " + redirect + " 2>/dev/null";
  else cmd += " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("codec-dump prints the full state table") {
  fs::create_directories(kWork);
  const std::string out = kWork + "/codec.tsv";
  REQUIRE(run("codec-dump", out) == 0);
  std::string table = slurp(out);
  REQUIRE(count_lines(table) == 256);
  REQUIRE(table.find("240\t1111\t0000\n") != std::string::npos);
  REQUIRE(table.rfind("0\t0000\t0000\n", 0) == 0);
}

TEST_CASE("usage errors exit with 1, runtime errors with 2") {
  REQUIRE(run("definitely-not-a-subcommand") == 1);
  REQUIRE(run("synth") == 1);  // missing required --out
  REQUIRE(run("eval --checkpoint /tmp/missing_ckpt.bin --manifest /tmp/missing.json") == 2);
  REQUIRE(run("--help") == 0);
}

TEST_CASE("synth is deterministic for a fixed seed") {
  fs::remove_all(kWork + "/ds_a");
  fs::remove_all(kWork + "/ds_b");
  const std::string flags = " --dialogues 2 --duration 35 --seed 9 --no-aux --pre-shift both";
  REQUIRE(run("synth --out " + kWork + "/ds_a" + flags) == 0);
  REQUIRE(run("synth --out " + kWork + "/ds_b" + flags) == 0);
  for (const char* file :
       {"/manifest.json", "/dlg_0000/audio.wav", "/dlg_0000/vad_a.txt", "/dlg_0000/faces_a.bin"}) {
    INFO(file);
    REQUIRE(slurp(kWork + "/ds_a" + file) == slurp(kWork + "/ds_b" + file));
  }
}

TEST_CASE("events extract emits the TSV schema") {
  fs::create_directories(kWork);
  std::ofstream a(kWork + "/vad_a.txt");
  a << "0.0\t2.0\n2.48\t4.0\n";
  a.close();
  std::ofstream b(kWork + "/vad_b.txt");
  b << "4.52\t7.0\n";
  b.close();
  const std::string out = kWork + "/events.tsv";
  REQUIRE(run("events extract --vad-a " + kWork + "/vad_a.txt --vad-b " + kWork +
                  "/vad_b.txt --duration 10 --seed 1",
              out) == 0);
  std::string tsv = slurp(out);
  REQUIRE(tsv.find("HOLD\t50\t62\t0\t0") != std::string::npos);
  REQUIRE(tsv.find("SHIFT\t100\t113\t0\t1") != std::string::npos);
  REQUIRE(tsv.find("LONG") != std::string::npos);
}

TEST_CASE("config file values apply and explicit flags override them") {
  fs::create_directories(kWork);
  std::ofstream cfg(kWork + "/synth.cfg");
  cfg << "[synth]\n"
         "dialogues=2\n"
         "duration=35\n"
         "seed=4\n"
         "no-aux=true\n"
         "no-faces=true\n";
  cfg.close();
  fs::remove_all(kWork + "/ds_cfg");
  REQUIRE(run("--config " + kWork + "/synth.cfg synth --out " + kWork + "/ds_cfg") == 0);
  std::string manifest = slurp(kWork + "/ds_cfg/manifest.json");
  REQUIRE(manifest.find("dlg_0001") != std::string::npos);   // 2 dialogues from the file
  REQUIRE(manifest.find("dlg_0002") == std::string::npos);
  REQUIRE(manifest.find("faces") == std::string::npos);

  fs::remove_all(kWork + "/ds_cfg2");
  REQUIRE(run("--config " + kWork + "/synth.cfg synth --out " + kWork +
              "/ds_cfg2 --dialogues 3") == 0);
  std::string overridden = slurp(kWork + "/ds_cfg2/manifest.json");
  REQUIRE(overridden.find("dlg_0002") != std::string::npos);  // flag beats file
}

TEST_CASE("pipeline: synth -> train -> eval -> stream") {
  const std::string dir = kWork + "/pipeline";
  fs::remove_all(dir);
  fs::create_directories(dir);
  REQUIRE(run("synth --out " + dir + "/ds --dialogues 6 --duration 40 --seed 2 --no-faces"
              " --no-aux --pre-shift audio") == 0);
  const std::string model_flags =
      " --dim 12 --fused-dim 12 --heads 2 --person-layers 1 --context-kernel 5";
  const std::string split_flags = " --train-ratio 0.5 --val-ratio 0.25 --test-ratio 0.25";
  REQUIRE(run("train --manifest " + dir + "/ds/manifest.json --checkpoint " + dir +
              "/ck.bin --metrics " + dir + "/metrics.csv --max-epochs 2 --effective-batch 4"
              " --accumulation-steps 2 --seed 5" + model_flags + split_flags) == 0);
  REQUIRE(fs::exists(dir + "/ck.bin"));
  std::string metrics = slurp(dir + "/metrics.csv");
  REQUIRE(metrics.find("epoch,step,split,loss_total,loss_vap_ce,loss_future_bce,lr") == 0);

  REQUIRE(run("eval --checkpoint " + dir + "/ck.bin --manifest " + dir +
              "/ds/manifest.json --out " + dir + "/report.csv --save-thresholds " + dir +
              "/th.json --eval-hop 2" + split_flags) == 0);
  std::string report = slurp(dir + "/report.csv");
  REQUIRE(report.find("variant,SH,SL,SP,BC,metric_type") != std::string::npos);
  REQUIRE(report.find("Baseline1,") != std::string::npos);
  REQUIRE(count_lines(report.substr(report.find("variant,SH"))) == 3);  // header + 2 data rows
  REQUIRE(fs::exists(dir + "/th.json"));

  REQUIRE(run("stream --checkpoint " + dir + "/ck.bin --manifest " + dir +
              "/ds/manifest.json --dialogue dlg_0001 --thresholds " + dir + "/th.json --out " +
              dir + "/records.tsv") == 0);
  std::string records = slurp(dir + "/records.tsv");
  REQUIRE(records.find("frame\tp_now_a\tp_now_b\tp_future_a\tp_future_b\tbc_prob\tfired\tstep_ms") == 0);
  REQUIRE(records.find("# step_ms p50=") != std::string::npos);
  REQUIRE(count_lines(records) >= 1000);
}
