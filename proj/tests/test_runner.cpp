// Copyright 2026 The gibench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>

#include "gib/runner.hpp"
#include "test_util.hpp"

namespace gib {
namespace {

using testing_util::slurp;
using testing_util::TempDir;

InfoTrajectory traj_of(std::initializer_list<double> cplx, std::initializer_list<double> pred = {}) {
  InfoTrajectory t;
  int epoch = 10;
  auto p = pred.begin();
  for (double c : cplx) {
    t.points.push_back({epoch, p != pred.end() ? *p++ : 0.0, c, 1.0, 2.0});
    epoch += 10;
  }
  return t;
}

// A short simple-functions run that still exercises every stage.
ExperimentConfig quick_simple(const std::string& f = "add") {
  auto c = preset_simple_functions(parse_simple_function(f));
  c.train.epochs = 60;
  c.seeds = {0, 1};
  return c;
}

json without_timing(json m) {
  m.erase("timing");
  return m;
}

TEST(Normalize, MinMaxExamples) {
  const auto t = normalize_trajectory(traj_of({2, 4, 6}, {5, 5, 5}));
  ASSERT_EQ(t.normalized.size(), 3u);
  EXPECT_EQ(t.normalized[0].second, 0.0);
  EXPECT_EQ(t.normalized[1].second, 0.5);
  EXPECT_EQ(t.normalized[2].second, 1.0);
  for (const auto& n : t.normalized) EXPECT_EQ(n.first, 0.0);
  const auto single = normalize_trajectory(traj_of({3}));
  EXPECT_EQ(single.normalized[0], (std::pair{0.0, 0.0}));
  EXPECT_THROW(normalize_trajectory(InfoTrajectory{}), InvalidArgument);
}

TEST(Normalize, InverseRecoversRawValues) {
  Rng rng(1);
  InfoTrajectory t;
  for (int e = 1; e <= 50; ++e) t.points.push_back({e, rng.uniform(0, 7), rng.uniform(1, 3), 0, 0});
  const auto n = normalize_trajectory(t);
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    EXPECT_GE(n.normalized[i].first, 0.0);
    EXPECT_LE(n.normalized[i].second, 1.0);
    EXPECT_NEAR(denormalize(n.normalized[i].first, n.pred_range), t.points[i].pred, 1e-9);
    EXPECT_NEAR(denormalize(n.normalized[i].second, n.cplx_range), t.points[i].cplx, 1e-9);
  }
}

TEST(Compression, ScoreExamples) {
  EXPECT_EQ(compression_score(traj_of({1, 2, 3, 4})), 0.0);
  EXPECT_EQ(compression_score(traj_of({1, 3, 2})), 1.0);
  EXPECT_EQ(compression_score(traj_of({2, 2, 2})), 0.0);
  EXPECT_THROW(compression_score(traj_of({1})), InvalidArgument);
  EXPECT_TRUE(shows_compression(traj_of({1, 3, 2})));
  EXPECT_FALSE(shows_compression(traj_of({2, 2, 2})));
  // 0.05 of a 1.0 range is below the 10% threshold.
  EXPECT_FALSE(shows_compression(traj_of({0, 1, 0.95})));
}

TEST(Trajectory, ValidateEpochOrder) {
  auto t = traj_of({1, 2});
  t.points[1].epoch = t.points[0].epoch;
  EXPECT_THROW(t.validate(), InvalidArgument);
}

TEST(Trajectory, CsvRoundTripAtNineDigits) {
  TempDir tmp;
  Rng rng(2);
  InfoTrajectory t;
  t.kind = ObjectiveKind::kIB;
  t.seed = 3;
  for (int e = 10; e <= 100; e += 10) t.points.push_back({e, rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(), rng.uniform()});
  t = normalize_trajectory(t);
  EXPECT_EQ(trajectory_file_name(t), "IB_seed3.csv");
  const std::string path = tmp.file(trajectory_file_name(t));
  write_text(path, trajectory_csv(t));
  const std::string text = slurp(path);
  EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,pred_term,cplx_term,pred_norm,cplx_norm,train_loss,test_loss");
  EXPECT_EQ(text.find('\r'), std::string::npos);
  const auto back = read_trajectory(path, ObjectiveKind::kIB, 3);
  ASSERT_EQ(back.points.size(), t.points.size());
  auto nine = [](double v) { return std::strtod(format_number(v).c_str(), nullptr); };
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    EXPECT_EQ(back.points[i].epoch, t.points[i].epoch);
    EXPECT_EQ(back.points[i].pred, nine(t.points[i].pred));
    EXPECT_EQ(back.points[i].cplx, nine(t.points[i].cplx));
    EXPECT_EQ(back.points[i].test_loss, nine(t.points[i].test_loss));
    EXPECT_EQ(back.normalized[i].second, nine(t.normalized[i].second));
  }
  // Writing the parsed trajectory again reproduces the same bytes.
  EXPECT_EQ(trajectory_csv(back), text);
}

TEST(Config, JsonRoundTrip) {
  for (const auto& c : {preset_simple_functions(SimpleFunction::kSp3), preset_activation_plane(Activation::kSwish),
                        preset_adversarial_mnist(1.0), preset_synthetic_synergy()}) {
    const json j = to_json(c);
    EXPECT_EQ(to_json(config_from_json(j)), j);
    EXPECT_EQ(config_hash(config_from_json(j)), config_hash(c));
  }
}

TEST(Config, HashChangesIffConfigChanges) {
  const auto base = preset_simple_functions(SimpleFunction::kAdd);
  const std::string h = config_hash(base);
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(config_hash(preset_simple_functions(SimpleFunction::kAdd)), h);
  std::vector<std::function<void(ExperimentConfig&)>> edits{
      [](auto& c) { c.n_bins = 41; },
      [](auto& c) { c.probe_every = 20; },
      [](auto& c) { c.train.lr = 0.02; },
      [](auto& c) { c.train.epochs = 999; },
      [](auto& c) { c.seeds = {0, 1, 2, 3}; },
      [](auto& c) { c.beta = 2.0; },
      [](auto& c) { c.net.hidden = {5}; },
      [](auto& c) { c.dataset.normalize = "none"; },
      [](auto& c) { c.objectives = {ObjectiveKind::kGIB}; },
      [](auto& c) { c.ib_layer = kOutputLayer; },
      [](auto& c) { c.dataset.function = "mul"; },
      [](auto& c) { c.attack = AttackSpec{0.0, true}; },
  };
  for (std::size_t i = 0; i < edits.size(); ++i) {
    auto c = base;
    edits[i](c);
    EXPECT_NE(config_hash(c), h) << "edit " << i;
  }
  auto moved = base;
  moved.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(moved), h);
}

TEST(Config, ValidationNamesField) {
  auto expect_field = [](json j, const std::string& field) {
    try {
      config_from_json(j);
      ADD_FAILURE() << "accepted " << j.dump();
    } catch (const InvalidArgument& e) {
      EXPECT_EQ(std::string(e.what()).rfind(field, 0), 0u) << e.what();
    }
  };
  const json base = to_json(preset_simple_functions(SimpleFunction::kAdd));
  auto with = [&](const json::json_pointer& p, json v) {
    json j = base;
    j[p] = std::move(v);
    return j;
  };
  expect_field(with(json::json_pointer("/n_bins"), 1), "n_bins");
  expect_field(with(json::json_pointer("/probe_every"), 0), "probe_every");
  expect_field(with(json::json_pointer("/seeds"), json::array()), "seeds");
  expect_field(with(json::json_pointer("/train/lr"), -1), "train.lr");
  expect_field(with(json::json_pointer("/train/batch"), "half"), "train.batch");
  expect_field(with(json::json_pointer("/net/activation"), "gelu"), "net.activation");
  expect_field(with(json::json_pointer("/beta"), "big"), "beta");
  expect_field(with(json::json_pointer("/ib_layer"), -3), "ib_layer");
  expect_field(with(json::json_pointer("/objectives"), json::array({"MINE"})), "objectives");
  expect_field(with(json::json_pointer("/dataset/bogus"), 1), "dataset.bogus");
  expect_field(with(json::json_pointer("/typo"), 1), "typo");
  expect_field(with(json::json_pointer("/n_bins"), "forty"), "n_bins");
}

TEST(Config, SpecialValues) {
  json j = to_json(preset_simple_functions(SimpleFunction::kAdd));
  j["beta"] = "inf";
  j["ib_layer"] = 0;
  j["train"]["batch"] = 32;
  const auto c = config_from_json(j);
  EXPECT_TRUE(std::isinf(c.beta));
  EXPECT_EQ(c.ib_layer, 0);
  EXPECT_EQ(c.train.batch_size, 32u);
  j["ib_layer"] = "output";
  EXPECT_EQ(config_from_json(j).ib_layer, kOutputLayer);
  // Missing fields keep defaults.
  const auto minimal = config_from_json(json{{"experiment", "simple_functions"}});
  EXPECT_EQ(minimal.n_bins, 30);
}

TEST(Config, LoadErrors) {
  TempDir tmp;
  EXPECT_THROW(load_config(tmp.file("nope.json")), IoError);
  write_text(tmp.file("bad.json"), "{ not json");
  EXPECT_THROW(load_config(tmp.file("bad.json")), InvalidArgument);
}

TEST(Config, ShippedPresetsMatchCode) {
  const std::string dir = std::string(GIB_SOURCE_DIR) + "/configs/";
  std::vector<std::pair<std::string, ExperimentConfig>> want;
  for (auto f : {SimpleFunction::kAdd, SimpleFunction::kMul, SimpleFunction::kSp1, SimpleFunction::kSp2,
                 SimpleFunction::kSp3})
    want.emplace_back("simple_functions_" + to_string(f) + ".json", preset_simple_functions(f));
  for (auto a : {Activation::kTanh, Activation::kRelu, Activation::kSoftplus, Activation::kSwish,
                 Activation::kLeakyRelu})
    want.emplace_back("activation_plane_" + to_string(a) + ".json", preset_activation_plane(a));
  want.emplace_back("adversarial_mnist_eps0.01.json", preset_adversarial_mnist(0.01));
  want.emplace_back("adversarial_mnist_eps1.0.json", preset_adversarial_mnist(1.0));
  want.emplace_back("synthetic_synergy.json", preset_synthetic_synergy());
  for (const auto& [file, cfg] : want) EXPECT_EQ(to_json(load_config(dir + file)), to_json(cfg)) << file;
}

TEST(RunExperiment, AdditionPresetHasHundredProbes) {
  auto c = preset_simple_functions(SimpleFunction::kAdd);
  c.seeds = {0};
  const auto res = run_experiment(c);
  ASSERT_TRUE(res.ok());
  ASSERT_EQ(res.runs[0].trajectories.size(), 2u);
  for (const auto& t : res.runs[0].trajectories) {
    EXPECT_EQ(t.points.size(), 100u);
    EXPECT_EQ(t.points.front().epoch, 10);
    EXPECT_EQ(t.points.back().epoch, 1000);
    EXPECT_NO_THROW(t.validate());
    for (const auto& [p, q] : t.normalized) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(q, 1.0);
    }
  }
  EXPECT_LT(res.runs[0].final_train_loss, 1e-3);
}

TEST(RunExperiment, GibProbeUsesTwoNPlusOneEvaluations) {
  auto c = quick_simple("sp3");
  const auto data = detail::prepare_data(c, 0);
  ASSERT_EQ(data.x_features.cols(), 4);
  const DenseNet net = make_dense_net(detail::net_spec_for(c, data), 0);
  ProbeSnapshot snap;
  const auto fr = forward(net, data.train.x);
  snap.logits = fr.logits;
  snap.hidden = fr.hidden.back();
  const auto reports = detail::probe_reports(c, data, snap);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(reports[1].kind, ObjectiveKind::kGIB);
  EXPECT_EQ(reports[1].mi_evaluations, 9);
}

TEST(RunExperiment, DeterministicBytes) {
  TempDir tmp;
  const auto c = quick_simple("mul");
  const auto a = run_experiment(c);
  const auto b = run_experiment(c, RunOptions{2, {}});
  emit(a, tmp.file("a"));
  emit(b, tmp.file("b"));
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(tmp.file("a"))) {
    const auto name = e.path().filename().string();
    if (name == "manifest.json") continue;
    EXPECT_EQ(slurp(e.path().string()), slurp(tmp.file("b/" + name))) << name;
    ++files;
  }
  EXPECT_EQ(files, 4u);
  const auto ma = json::parse(slurp(tmp.file("a/manifest.json")));
  const auto mb = json::parse(slurp(tmp.file("b/manifest.json")));
  EXPECT_EQ(without_timing(ma), without_timing(mb));
  EXPECT_EQ(ma["config_hash"], config_hash(c));
  EXPECT_TRUE(ma["timing"].contains("wall_seconds"));
}

TEST(RunExperiment, ManifestContents) {
  const auto res = run_experiment(quick_simple());
  const json m = manifest_json(res);
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["seeds"], json::array({0, 1}));
  EXPECT_EQ(m["runs"].size(), 2u);
  const auto& t = m["runs"][0]["trajectories"][1];
  EXPECT_EQ(t["objective"], "GIB");
  EXPECT_EQ(t["file"], "GIB_seed0.csv");
  EXPECT_EQ(t["points"], 6);
  EXPECT_TRUE(t.contains("compression_score"));
  EXPECT_TRUE(m["data"]["0"].contains("input_rms"));
}

TEST(RunExperiment, EmptyResultWritesManifestOnly) {
  TempDir tmp;
  ExperimentResult res;
  res.config = quick_simple();
  emit(res, tmp.file("out"));
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(tmp.file("out"))) names.push_back(e.path().filename());
  EXPECT_EQ(names, std::vector<std::string>{"manifest.json"});
}

TEST(RunExperiment, EmitFailureNamesPath) {
  TempDir tmp;
  write_text(tmp.file("file"), "x");
  ExperimentResult res;
  res.config = quick_simple();
  try {
    emit(res, tmp.file("file/sub"));
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("file/sub"), std::string::npos);
  }
}

TEST(RunExperiment, PerfectMemorizerReachesLabelEntropy) {
  TempDir tmp;
  // Eight separated points, four classes.
  std::string csv = "u,v,label\n";
  for (int i = 0; i < 8; ++i) csv += std::to_string(i % 4) + "," + std::to_string(i / 4 * 3) + "," + std::to_string(i % 4) + "\n";
  write_text(tmp.file("pts.csv"), csv);
  ExperimentConfig c;
  c.experiment = ExperimentKind::kCustom;
  c.dataset.csv = tmp.file("pts.csv");
  c.dataset.x = {"u", "v"};
  c.dataset.y = "label";
  c.dataset.n_classes = 4;
  c.net.hidden = {16};
  c.net.output_head = OutputHead::kSoftmax;
  c.net.bias = true;
  c.train = TrainSpec{OptimizerKind::kAdam, 0.05, 400, 0, LossKind::kCrossEntropy, 0, 0, 1e-4};
  c.probe_every = 100;
  c.objectives = {ObjectiveKind::kIB};
  c.ib_layer = kOutputLayer;
  const auto res = run_experiment(c);
  ASSERT_TRUE(res.ok());
  const auto& last = res.runs[0].trajectories[0].points.back();
  EXPECT_DOUBLE_EQ(last.pred, 2.0);
}

TEST(RunExperiment, ZeroEpsilonAdversarialMatchesClean) {
  TempDir tmp;
  Rng rng(5);
  std::vector<std::vector<unsigned char>> images(60, std::vector<unsigned char>(16));
  std::vector<unsigned char> labels(60);
  for (std::size_t i = 0; i < 60; ++i) {
    labels[i] = static_cast<unsigned char>(i % 3);
    for (auto& p : images[i]) p = static_cast<unsigned char>(rng.below(256));
  }
  write_idx(tmp.file("train-images-idx3-ubyte"), tmp.file("train-labels-idx1-ubyte"), images, labels, 4, 4);
  auto c = preset_adversarial_mnist(0.0, tmp.path().string());
  c.net.hidden = {8, 4};
  c.train.epochs = 20;
  c.probe_every = 5;
  c.seeds = {1};
  c.dataset.subset = 40;
  const auto adv = run_experiment(c);
  auto clean_cfg = c;
  clean_cfg.attack.reset();
  const auto clean = run_experiment(clean_cfg);
  ASSERT_EQ(adv.runs[0].trajectories.size(), clean.runs[0].trajectories.size());
  for (std::size_t k = 0; k < adv.runs[0].trajectories.size(); ++k)
    EXPECT_EQ(trajectory_csv(adv.runs[0].trajectories[k]), trajectory_csv(clean.runs[0].trajectories[k]));
  EXPECT_EQ(manifest_json(adv)["data"]["1"]["mnist_subset"], 40);
}

TEST(RunExperiment, MissingMnistIsAnError) {
  auto c = preset_adversarial_mnist(0.01, "/nonexistent/mnist");
  c.train.epochs = 1;
  EXPECT_THROW(run_experiment(c), IoError);
}

TEST(RunExperiment, SyntheticSynergyTableOrdering) {
  auto c = preset_synthetic_synergy();
  c.dataset.n_values = {3, 4};
  c.dataset.n_samples = 200000;
  const auto res = run_experiment(c);
  ASSERT_EQ(res.tables.size(), 1u);
  const auto& t = res.tables[0];
  ASSERT_EQ(t.values.rows(), 6);
  for (Eigen::Index r = 0; r < 6; r += 3) {
    EXPECT_LE(t.values(r + 2, 3), t.values(r + 1, 3));
    EXPECT_LE(t.values(r + 1, 3), t.values(r, 3));
    EXPECT_LE(t.values(r + 2, 5), t.values(r + 1, 5));
    EXPECT_LE(t.values(r + 1, 5), t.values(r, 5));
    for (Eigen::Index k = 0; k < 3; ++k) {
      EXPECT_NEAR(t.values(r + k, 3), t.values(r + k, 4), 0.01);
      EXPECT_NEAR(t.values(r + k, 5), t.values(r + k, 6), 0.01);
    }
  }
}

TEST(RunExperiment, IbLayerOutOfRange) {
  auto c = quick_simple();
  c.ib_layer = 3;
  EXPECT_THROW(run_experiment(c), InvalidArgument);
}

TEST(RunExperiment, FullProtocolOverrides) {
  auto c = preset_adversarial_mnist(1.0);
  c.full_protocol = true;
  const auto e = effective_config(c);
  EXPECT_EQ(e.train.epochs, 10000);
  EXPECT_EQ(e.dataset.subset, 0u);
}

}  // namespace
}  // namespace gib
