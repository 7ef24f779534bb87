// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "movox/data/synthetic.hpp"
#include "movox/fields/model.hpp"
#include "movox/train/config.hpp"

using namespace movox;
namespace fs = std::filesystem;

namespace {

const fs::path& root() {
  static const fs::path p = [] {
    const fs::path d = fs::temp_directory_path() / "movox_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + MOVOX_CLI_PATH + "\" " + args + " >> \"" +
                          (root() / "cli.log").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

data::SceneSpec tiny_scene(std::size_t n) {
  data::SceneSpec s = data::default_scene_spec(3);
  s.expression_dims = n;
  s.motion.resize(n, s.motion.front());
  s.train_frames = 2;
  s.test_frames = 1;
  s.width = s.height = 12;
  s.focal = 16.0;
  s.oracle_samples = 48;
  return s;
}

// Synthesizes a tiny scene with the CLI once per expression dimension.
std::string scene(std::size_t n) {
  const fs::path dir = root() / ("scene_n" + std::to_string(n));
  if (!fs::exists(dir / "manifest.json")) {
    write_json(root() / ("spec_n" + std::to_string(n) + ".json"), data::to_json(tiny_scene(n)));
    REQUIRE(cli("synth --config \"" + (root() / ("spec_n" + std::to_string(n) + ".json")).string() +
                "\" --out \"" + dir.string() + "\"") == 0);
  }
  return (dir / "manifest.json").string();
}

std::string run_config() {
  const fs::path p = root() / "run.json";
  if (!fs::exists(p)) {
    train::RunConfig rc;
    rc.model.scales = 2;
    rc.model.appearance = {4, 8};
    rc.model.motion = {2, 8};
    rc.model.no_decouple = {4, 8};
    rc.model.hidden = 16;
    rc.model.deform_hidden = 16;
    rc.model.deform_layers = 2;
    rc.train.rays_per_batch = 32;
    rc.train.samples_per_ray = 8;
    rc.train.total_iters = 4;
    rc.train.coarse_res = rc.train.fine_res = 0;
    rc.train.coarse_iters = 0;
    rc.train.chunk_rays = 32;
    rc.train.preview_iters = {};
    rc.train.log_every = 1;
    write_json(p, train::to_json(rc));
  }
  return p.string();
}

// Trains a variant on the N = 4 scene and returns the output directory.
fs::path trained(const std::string& variant) {
  const fs::path out = root() / ("train_" + variant);
  if (!fs::exists(out / "checkpoint.bin")) {
    REQUIRE(cli("train --manifest \"" + scene(4) + "\" --config \"" + run_config() + "\" --variant " + variant +
                " --out \"" + out.string() + "\"") == 0);
  }
  return out;
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("help and unknown commands") {
  CHECK(cli("--help") == 0);
  CHECK(cli("") == 2);
  CHECK(cli("frobnicate") == 2);
}

TEST_CASE("synth rejects an invalid scene spec with a usage error") {
  nlohmann::json j = data::to_json(tiny_scene(4));
  j["blobs"][0]["radius"] = -0.5;
  write_json(root() / "bad_spec.json", j);
  CHECK(cli("synth --config \"" + (root() / "bad_spec.json").string() + "\" --out \"" +
            (root() / "bad_scene").string() + "\"") == 2);
  CHECK(cli("synth") == 2);
}

TEST_CASE("synth writes a manifest, sidecar and frames") {
  const fs::path m = scene(4);
  CHECK(fs::exists(m));
  CHECK(fs::exists(m.parent_path() / "sidecar.json"));
  CHECK(fs::exists(m.parent_path() / "images" / "frame_002.png"));
}

TEST_CASE("gradcheck exit codes") {
  CHECK(cli("gradcheck") == 2);
  CHECK(cli("gradcheck --scope nonsense") == 2);
  CHECK(cli("gradcheck --scope ops") == 0);
  CHECK(cli("gradcheck --scope ops --corrupt linear") != 0);
}

TEST_CASE("render with a missing checkpoint is a usage error") {
  CHECK(cli("render --checkpoint \"" + (root() / "nope.bin").string() + "\" --manifest \"" + scene(4) +
            "\" --out \"" + (root() / "r").string() + "\"") == 2);
}

TEST_CASE("bench rejects zero iterations") {
  CHECK(cli("bench --iters 0") == 2);
}

TEST_CASE("train writes a log and checkpoint; no-decouple logs a zero regularizer") {
  const fs::path full = trained("full");
  const auto rows = read_csv(full / "train_log.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows.back()[0] == 4.0);

  const fs::path nd = trained("no-decouple");
  const auto nd_rows = read_csv(nd / "train_log.csv");
  REQUIRE(nd_rows.size() == 4);
  for (const auto& r : nd_rows) CHECK(r[3] == 0.0);
}

TEST_CASE("render and reenact over the same frames produce identical images") {
  const fs::path ck = trained("full") / "checkpoint.bin";
  const fs::path r = root() / "render_out", e = root() / "reenact_out";
  REQUIRE(cli("render --checkpoint \"" + ck.string() + "\" --manifest \"" + scene(4) + "\" --split all --out \"" +
              r.string() + "\"") == 0);
  REQUIRE(cli("reenact --checkpoint \"" + ck.string() + "\" --manifest \"" + scene(4) + "\" --out \"" +
              e.string() + "\"") == 0);
  for (int i = 0; i < 3; ++i) {
    const std::string k = "_00" + std::to_string(i);
    REQUIRE(fs::exists(r / ("frame" + k + ".png")));
    CHECK(slurp(r / ("frame" + k + ".png")) == slurp(e / ("reenact" + k + ".png")));
    CHECK(slurp(r / ("frame" + k + "_alpha.png")) == slurp(e / ("reenact" + k + "_alpha.png")));
  }
}

TEST_CASE("expression dimension mismatch between checkpoint and manifest is a usage error") {
  const fs::path ck = trained("full") / "checkpoint.bin";
  CHECK(cli("reenact --checkpoint \"" + ck.string() + "\" --manifest \"" + scene(2) + "\" --out \"" +
            (root() / "mismatch").string() + "\"") == 2);
  CHECK(cli("train --checkpoint \"" + ck.string() + "\" --manifest \"" + scene(2) + "\" --out \"" +
            (root() / "mismatch_train").string() + "\"") == 2);
}

TEST_CASE("eval writes per-frame metrics") {
  const fs::path ck = trained("full") / "checkpoint.bin";
  const fs::path out = root() / "eval";
  REQUIRE(cli("eval --checkpoint \"" + ck.string() + "\" --manifest \"" + scene(4) + "\" --split test --out \"" +
              out.string() + "\"") == 0);
  CHECK(fs::exists(out / "metrics.csv"));
}
