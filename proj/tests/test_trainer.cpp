/* Copyright 2026 The SemiSeg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "semiseg/ablation.hpp"
#include "semiseg/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace semiseg;

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream out;
  out << f.rdbuf();
  return out.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

fs::path fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("semiseg_test_run_" + tag);
  fs::remove_all(p);
  return p;
}

// Small-but-complete run: 16x16 scenes, narrow nets, a handful of
// iterations. Every knob that matters for speed is turned down.
RunConfig tiny_run(const std::string& tag) {
  RunConfig cfg;
  cfg.hp.max_iter = 10;
  cfg.hp.batch_size = 2;
  cfg.hp.lr_seg = 0.01;
  cfg.hp.lr_disc = 1e-3;
  cfg.hp.seed = 5;
  cfg.scene.height = 16;
  cfg.scene.width = 16;
  cfg.scene.num_classes = 3;
  cfg.scene.shapes_min = 1;
  cfg.scene.shapes_max = 2;
  cfg.scene.seed = 11;
  cfg.n_train = 12;
  cfg.n_val = 4;
  cfg.labeled_ratio = 0.5;
  cfg.gen.num_classes = 3;
  cfg.gen.width = 4;
  cfg.gen.depth = 2;
  cfg.disc.widths = {4, 4, 8, 8};
  cfg.clf.num_classes = 3;
  cfg.clf.width = 4;
  cfg.clf.depth = 2;
  cfg.mlmt_enabled = false;
  cfg.val_interval = 5;
  cfg.out_dir = fresh_dir(tag).string();
  return cfg;
}

constexpr const char* kHeader =
    "iter, lr, loss_ce, loss_fm, loss_st, loss_d, loss_cce, loss_cons, d_real_mean, "
    "d_fake_mean, miou_val";

TEST_SUITE_BEGIN("cli");

TEST_CASE("run_train writes one metrics row per iteration under the exact header") {
  RunConfig cfg = tiny_run("rows");
  TrainSummary sum = run_train(cfg);
  CHECK(sum.s4_iters == 10);
  CHECK(sum.losses.size() == 10);

  auto rows = lines_of(slurp(sum.metrics_csv));
  REQUIRE(rows.size() == 11);  // header + 10 iterations
  CHECK(rows[0] == kHeader);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].rfind(std::to_string(i - 1) + ", ", 0) == 0);
    // Exactly 10 separators -> 11 fields.
    std::size_t seps = 0, pos = 0;
    while ((pos = rows[i].find(", ", pos)) != std::string::npos) {
      ++seps;
      pos += 2;
    }
    CHECK(seps == 10);
  }
  // The validation column is populated only on validation iterations (5, 10).
  CHECK(rows[5].back() != ' ');
  auto cell_of = [](const std::string& row) {
    return row.substr(row.rfind(", ") + 2);
  };
  CHECK(cell_of(rows[1]).empty());
  CHECK(!cell_of(rows[5]).empty());
  CHECK(!cell_of(rows[10]).empty());
  CHECK(sum.final_miou_unfused >= 0.0);
  CHECK(fs::exists(fs::path(sum.checkpoint_dir) / "header.json"));
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("fully labeled data degenerates to supervised training") {
  RunConfig cfg = tiny_run("sup");
  cfg.labeled_ratio = 1.0;
  cfg.hp.max_iter = 4;
  cfg.val_interval = 0;
  TrainSummary sum = run_train(cfg);
  for (const auto& l : sum.losses) {
    CHECK(l.fm == 0.0);
    CHECK(l.st == 0.0);
    CHECK(l.total == l.ce);
    CHECK(l.d_loss == 0.0);
  }
  CHECK(sum.trace.rows().empty());
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("identical configurations produce byte-identical metrics files") {
  RunConfig a = tiny_run("det_a");
  a.hp.max_iter = 6;
  RunConfig b = tiny_run("det_b");
  b.hp.max_iter = 6;
  TrainSummary sa = run_train(a);
  TrainSummary sb = run_train(b);
  CHECK(slurp(sa.metrics_csv) == slurp(sb.metrics_csv));

  // A different seed must change the log.
  RunConfig c = tiny_run("det_c");
  c.hp.max_iter = 6;
  c.hp.seed = 6;
  TrainSummary sc = run_train(c);
  CHECK(slurp(sa.metrics_csv) != slurp(sc.metrics_csv));
  fs::remove_all(a.out_dir);
  fs::remove_all(b.out_dir);
  fs::remove_all(c.out_dir);
}

TEST_CASE("interrupt and resume reproduces the uninterrupted run bit for bit") {
  RunConfig whole = tiny_run("res_whole");
  whole.hp.max_iter = 8;
  whole.mlmt_enabled = true;
  whole.val_interval = 4;
  TrainSummary sw = run_train(whole);

  RunConfig part = tiny_run("res_part");
  part.hp.max_iter = 8;
  part.mlmt_enabled = true;
  part.val_interval = 4;
  part.stop_after = 3;
  TrainSummary sp1 = run_train(part);
  CHECK(sp1.s4_iters == 3);

  RunConfig cont = part;
  cont.stop_after = -1;
  cont.resume = sp1.checkpoint_dir;
  TrainSummary sp2 = run_train(cont);
  CHECK(sp2.s4_iters == 8);

  // Final network blobs must match the uninterrupted run byte for byte.
  for (const char* blob : {"generator.bin", "discriminator.bin", "clf_student.bin",
                           "clf_teacher.bin"}) {
    fs::path pw = fs::path(sw.checkpoint_dir) / blob;
    fs::path pp = fs::path(sp2.checkpoint_dir) / blob;
    REQUIRE(fs::exists(pw));
    REQUIRE(fs::exists(pp));
    CHECK(slurp(pw.string()) == slurp(pp.string()));
  }
  // And the stitched CSV must equal the uninterrupted one.
  CHECK(slurp(sw.metrics_csv) == slurp(sp2.metrics_csv));
  fs::remove_all(whole.out_dir);
  fs::remove_all(part.out_dir);
}

TEST_CASE("resume rejects a mismatched configuration") {
  RunConfig base = tiny_run("res_bad");
  base.hp.max_iter = 4;
  base.stop_after = 2;
  TrainSummary s = run_train(base);

  RunConfig wrong = base;
  wrong.stop_after = -1;
  wrong.resume = s.checkpoint_dir;
  wrong.hp.lambda_fm = 0.5;  // config text changes
  CHECK_THROWS(run_train(wrong));

  RunConfig wrong_data = base;
  wrong_data.stop_after = -1;
  wrong_data.resume = s.checkpoint_dir;
  wrong_data.n_train = 13;  // data signature changes
  CHECK_THROWS(run_train(wrong_data));
  fs::remove_all(base.out_dir);
}

TEST_CASE("an all-background dataset evaluates to a perfect mIoU") {
  RunConfig cfg = tiny_run("bg");
  cfg.scene.shapes_min = 0;
  cfg.scene.shapes_max = 0;
  cfg.hp.max_iter = 30;
  cfg.hp.lr_seg = 0.05;
  cfg.val_interval = 0;
  TrainSummary sum = run_train(cfg);
  CHECK(sum.final_miou_unfused == 1.0);

  EvalReport rep = run_eval(sum.checkpoint_dir, cfg, FusionMode::kNone, 0.2);
  CHECK(rep.miou == 1.0);
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("pixel-threshold evaluation sweeps twelve rescaled thresholds") {
  auto sweep = pixel_threshold_sweep(321, 321);
  REQUIRE(sweep.size() == 12);
  for (int k = 1; k <= 12; ++k) CHECK(sweep[k - 1] == 1000 * k);

  auto small = pixel_threshold_sweep(16, 16);
  REQUIRE(small.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    long long expect = std::llround(1000.0 * (i + 1) * 16.0 * 16.0 / (321.0 * 321.0));
    if (expect < 1) expect = 1;
    CHECK(small[i] == expect);
  }
  CHECK(small[0] >= 1);  // floor keeps thresholds meaningful at desk scale

  RunConfig cfg = tiny_run("sweep");
  cfg.hp.max_iter = 4;
  cfg.val_interval = 0;
  TrainSummary sum = run_train(cfg);
  EvalReport rep = run_eval(sum.checkpoint_dir, cfg, FusionMode::kPixelThreshold, 0.2);
  REQUIRE(rep.rows.size() == 12);
  double best = 0.0;
  for (const auto& row : rep.rows) {
    CHECK(row.label.rfind("threshold=", 0) == 0);
    best = std::max(best, row.miou);
  }
  CHECK(rep.miou == doctest::Approx(best));
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("evaluation rejects a checkpoint whose class count differs from the dataset") {
  RunConfig cfg = tiny_run("classes");
  cfg.hp.max_iter = 3;
  cfg.val_interval = 0;
  TrainSummary sum = run_train(cfg);

  RunConfig wrong = cfg;
  wrong.scene.num_classes = 4;
  wrong.gen.num_classes = 4;
  CHECK_THROWS(run_eval(sum.checkpoint_dir, wrong, FusionMode::kNone, 0.2));
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("classifier-gated evaluation needs a classifier in the checkpoint") {
  RunConfig cfg = tiny_run("nomlmt");
  cfg.hp.max_iter = 3;
  cfg.val_interval = 0;
  cfg.mlmt_enabled = false;
  TrainSummary sum = run_train(cfg);
  CHECK_THROWS(run_eval(sum.checkpoint_dir, cfg, FusionMode::kMlmt, 0.2));
  CHECK_THROWS(run_eval(sum.checkpoint_dir, cfg, FusionMode::kCnn, 0.2));  // no aux checkpoint
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("fusion mode names round-trip through the parser") {
  for (FusionMode m : {FusionMode::kNone, FusionMode::kMlmt, FusionMode::kCnn,
                       FusionMode::kPixelThreshold, FusionMode::kClasswisePixelThreshold}) {
    CHECK(parse_fusion_mode(to_string(m)) == m);
  }
  CHECK_THROWS(parse_fusion_mode("bogus"));
}

TEST_CASE("ablation presets are discoverable and the loss-terms preset writes its table") {
  auto presets = ablation_presets();
  REQUIRE(presets.size() == 3);
  CHECK(std::find(presets.begin(), presets.end(), "loss_terms") != presets.end());
  CHECK(std::find(presets.begin(), presets.end(), "fusion_modes") != presets.end());
  CHECK(std::find(presets.begin(), presets.end(), "st_dynamics") != presets.end());

  RunConfig base = tiny_run("abl");
  base.hp.max_iter = 3;
  base.val_interval = 0;
  AblationResult res = run_ablation("loss_terms", base);
  CHECK(res.preset == "loss_terms");
  REQUIRE(res.rows.size() == 4);
  auto table = lines_of(slurp(res.csv_path));
  REQUIRE(table.size() == 5);
  CHECK(table[0] == "variant, miou_val");
  // Rows are sorted by value, best first.
  for (std::size_t i = 2; i < res.rows.size(); ++i)
    CHECK(res.rows[i - 1].second >= res.rows[i].second);

  CHECK_THROWS(run_ablation("not_a_preset", base));
  fs::remove_all(base.out_dir);
}

TEST_CASE("parallel branch stepping matches the sequential result exactly") {
  RunConfig seq = tiny_run("par_seq");
  seq.hp.max_iter = 5;
  seq.mlmt_enabled = true;
  seq.val_interval = 5;
  TrainSummary ss = run_train(seq);

  RunConfig par = tiny_run("par_par");
  par.hp.max_iter = 5;
  par.mlmt_enabled = true;
  par.val_interval = 5;
  par.parallel_branches = true;
  TrainSummary sp = run_train(par);

  CHECK(slurp(ss.metrics_csv) == slurp(sp.metrics_csv));
  for (const char* blob : {"generator.bin", "clf_teacher.bin"}) {
    CHECK(slurp((fs::path(ss.checkpoint_dir) / blob).string()) ==
          slurp((fs::path(sp.checkpoint_dir) / blob).string()));
  }
  fs::remove_all(seq.out_dir);
  fs::remove_all(par.out_dir);
}

TEST_SUITE_END();

}  // namespace
