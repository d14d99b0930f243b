// tests/test_cli.cpp

// Copyright 2026  The ufem authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Drives the installed `ufem` binary end to end. The binary path comes from
// the UFEM_BIN environment variable (set by CTest).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string bin() {
  const char* path = std::getenv("UFEM_BIN");
  REQUIRE_MESSAGE(path != nullptr, "UFEM_BIN must point at the ufem binary");
  return path;
}

struct RunResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

RunResult run(const std::string& args, const fs::path& cwd) {
  const std::string log = (cwd / "cmd_output.txt").string();
  const std::string cmd =
      "cd '" + cwd.string() + "' && '" + bin() + "' " + args + " > '" + log + "' 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream f(log);
  std::string output((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return {status == 0 ? 0 : 1, output};
}

// Byte-compare every regular file under two trees.
bool trees_identical(const fs::path& a, const fs::path& b) {
  std::map<std::string, std::string> fa, fb;
  auto collect = [](const fs::path& root, std::map<std::string, std::string>& out) {
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file()) continue;
      std::ifstream f(e.path(), std::ios::binary);
      out[fs::relative(e.path(), root).generic_string()] =
          std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    }
  };
  collect(a, fa);
  collect(b, fb);
  return fa == fb;
}

struct Workspace {
  Workspace() {
    dir = fs::temp_directory_path() / ("ufem_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  fs::path dir;
};

}  // namespace

TEST_CASE("degrade runs are byte-identical and manifests are deterministic") {
  Workspace ws;
  REQUIRE(run("synth-data --out clean --per-class 3 --seed 5", ws.dir).exit_code == 0);
  REQUIRE(run("degrade --kind fog --severity 3 --in clean --out fog_a --seed 1", ws.dir).exit_code ==
          0);
  REQUIRE(run("degrade --kind fog --severity 3 --in clean --out fog_b --seed 1", ws.dir).exit_code ==
          0);
  CHECK(trees_identical(ws.dir / "fog_a", ws.dir / "fog_b"));

  REQUIRE(run("manifest --root clean --domain clear --out m1.tsv", ws.dir).exit_code == 0);
  REQUIRE(run("manifest --root clean --domain clear --out m2.tsv", ws.dir).exit_code == 0);
  std::ifstream f1(ws.dir / "m1.tsv", std::ios::binary), f2(ws.dir / "m2.tsv", std::ios::binary);
  const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(!s1.empty());
}

TEST_CASE("train-stage2 without a stage-1 checkpoint is an explicit dependency error") {
  Workspace ws;
  {
    std::ofstream cfg(ws.dir / "cfg.json");
    cfg << R"({"backbone": {"architecture": "tinyvgg", "input_resolution": 32}})";
  }
  const RunResult r = run("train-stage2 --config cfg.json --out s2", ws.dir);
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("error:") != std::string::npos);
  CHECK(r.output.find("stage1") != std::string::npos);
}

TEST_CASE("config schema violations name the offending key") {
  Workspace ws;
  REQUIRE(run("synth-data --out clean --per-class 2 --seed 5", ws.dir).exit_code == 0);
  REQUIRE(run("manifest --root clean --domain clear --out m.tsv", ws.dir).exit_code == 0);
  {
    std::ofstream cfg(ws.dir / "bad.json");
    cfg << R"({"backbone": {"architecture": "tinyvgg", "input_resolution": 32}, "stage1": {"epoch": 1}})";
  }
  const RunResult r = run("eval --config bad.json --manifest m.tsv --out e", ws.dir);
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("error:") != std::string::npos);
  CHECK(r.output.find("stage1.epoch") != std::string::npos);
}

TEST_CASE("full micro recipe: manifest -> degrade -> stages -> compose -> eval") {
  Workspace ws;
  REQUIRE(run("synth-data --out clean --per-class 4 --seed 6", ws.dir).exit_code == 0);
  REQUIRE(run("degrade --kind fog --severity 3 --in clean --out fog --seed 2", ws.dir).exit_code ==
          0);
  REQUIRE(run("manifest --root clean --domain clear --out clear.tsv", ws.dir).exit_code == 0);
  REQUIRE(run("manifest --root fog --domain degraded --kind fog --severity 3 --seed 2 "
              "--out fog.tsv",
              ws.dir)
              .exit_code == 0);
  {
    std::ofstream cfg(ws.dir / "cfg.json");
    cfg << R"({
      "backbone": {"architecture": "tinyvgg", "input_resolution": 32, "tap": "block1"},
      "data": {"clear_manifest": "clear.tsv", "degraded_manifest": "fog.tsv"},
      "stage1": {"epochs": 1, "batch": 4, "seed": 3,
                 "generator": {"architecture": "flat_residual", "in_channels": 0, "base_width": 8,
                                "residual_blocks": 1, "down_levels": 2, "init": "near_identity",
                                "input_height": 0, "input_width": 0},
                 "disc_base_width": 8},
      "stage2": {"epochs": 1, "batch": 4, "seed": 4,
                 "generator": {"architecture": "flat_residual", "in_channels": 0, "base_width": 8,
                                "residual_blocks": 1, "down_levels": 2, "init": "near_identity",
                                "input_height": 0, "input_width": 0},
                 "disc_base_width": 8},
      "eval": {"manifest": "clear.tsv", "batch": 16, "threads": 1}
    })";
  }
  REQUIRE(run("train-stage1 --config cfg.json --out s1", ws.dir).exit_code == 0);
  CHECK(fs::exists(ws.dir / "s1" / "stage1.ntc"));
  CHECK(fs::exists(ws.dir / "s1" / "loss_log.jsonl"));
  CHECK(fs::exists(ws.dir / "s1" / "config.json"));

  REQUIRE(run("train-stage2 --config cfg.json --stage1-ckpt s1/stage1.ntc --out s2", ws.dir)
              .exit_code == 0);
  CHECK(fs::exists(ws.dir / "s2" / "stage2.ntc"));

  REQUIRE(run("compose --stage1-ckpt s1/stage1.ntc --stage2-ckpt s2/stage2.ntc --out ufem.ntc",
              ws.dir)
              .exit_code == 0);
  CHECK(fs::exists(ws.dir / "ufem.ntc"));

  const RunResult base =
      run("eval --config cfg.json --manifest fog.tsv --out eval_base", ws.dir);
  REQUIRE(base.exit_code == 0);
  const RunResult enhanced =
      run("eval --config cfg.json --ufem ufem.ntc --manifest fog.tsv --out eval_ufem", ws.dir);
  REQUIRE(enhanced.exit_code == 0);
  CHECK(fs::exists(ws.dir / "eval_ufem" / "eval.json"));

  const RunResult abl = run(
      "ablate --config cfg.json --stage1-ckpt s1/stage1.ntc --stage2-ckpt s2/stage2.ntc "
      "--manifest fog.tsv --out abl",
      ws.dir);
  REQUIRE(abl.exit_code == 0);
  CHECK(abl.output.find("baseline") != std::string::npos);
  CHECK(fs::exists(ws.dir / "abl" / "ablation.tsv"));

  const RunResult dcp = run(
      "dcp-report --config cfg.json --set clear=clear.tsv --set fog=fog.tsv --tap block1 "
      "--out dcp --seed 1 --plots",
      ws.dir);
  REQUIRE(dcp.exit_code == 0);
  CHECK(fs::exists(ws.dir / "dcp" / "dcp_report.json"));
  CHECK(fs::exists(ws.dir / "dcp" / "embedding_corr.ppm"));
}
