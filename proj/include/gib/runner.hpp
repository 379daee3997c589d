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

// Experiment orchestration: configs, probing, information-plane
// trajectories, normalization and on-disk emission.

#ifndef GIB_RUNNER_HPP_
#define GIB_RUNNER_HPP_

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gib/common.hpp"
#include "gib/csv.hpp"
#include "gib/datagen.hpp"
#include "gib/estimators.hpp"
#include "gib/nets.hpp"
#include "gib/objectives.hpp"

namespace gib {

using nlohmann::json;

enum class ExperimentKind { kSyntheticSynergy, kSimpleFunctions, kActivationPlane, kAdversarialMnist, kCustom };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kSyntheticSynergy: return "synthetic_synergy";
    case ExperimentKind::kSimpleFunctions: return "simple_functions";
    case ExperimentKind::kActivationPlane: return "activation_plane";
    case ExperimentKind::kAdversarialMnist: return "adversarial_mnist";
    case ExperimentKind::kCustom: return "custom";
  }
  return "?";
}

inline ExperimentKind parse_experiment(const std::string& s) {
  for (auto k : {ExperimentKind::kSyntheticSynergy, ExperimentKind::kSimpleFunctions, ExperimentKind::kActivationPlane,
                 ExperimentKind::kAdversarialMnist, ExperimentKind::kCustom})
    if (to_string(k) == s) return k;
  throw InvalidArgument("experiment: unknown kind '" + s +
                        "' (expected synthetic_synergy, simple_functions, activation_plane, adversarial_mnist, custom)");
}

// ib_layer sentinels; non-negative values index hidden layers.
inline constexpr int kLastHiddenLayer = -1;
inline constexpr int kOutputLayer = -2;

struct DatasetConfig {
  // simple_functions
  std::string function = "add";
  std::size_t n_train = kSimpleFunctionSamples;
  std::size_t n_test = kSimpleFunctionSamples;
  std::optional<Interval> train_range;  // default per function
  std::optional<Interval> test_range;
  std::string normalize = "none";       // "none" or "rms"
  // activation_plane, adversarial_mnist
  std::uint64_t data_seed = 0;
  // adversarial_mnist
  std::string mnist_dir;
  std::size_t subset = 10000;           // 0 = every available sample
  // custom
  std::string csv;
  std::vector<std::string> x;
  std::string y;
  int n_classes = 0;                    // 0 = real-valued target
  // synthetic_synergy
  std::vector<int> n_values{3, 4, 5, 6, 7, 8};
  double p_flip = 1.0 / 3.0;
  std::size_t n_samples = 1000000;
};

struct NetConfig {
  std::vector<int> hidden;
  ActivationKind activation{Activation::kTanh};
  OutputHead output_head = OutputHead::kLinear;
  bool bias = false;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::kCustom;
  DatasetConfig dataset;
  NetConfig net;
  TrainSpec train;
  int probe_every = 10;
  int n_bins = 30;
  std::vector<ObjectiveKind> objectives{ObjectiveKind::kIB, ObjectiveKind::kGIB};
  double beta = 1.0;
  std::vector<std::uint64_t> seeds{0};
  int ib_layer = kLastHiddenLayer;
  std::string output_dir = "out";
  std::optional<AttackSpec> attack;
  int feature_subsample = 1;                       // keep every k-th input feature for GIB/SVW
  std::optional<std::pair<double, double>> hidden_range;  // fixed binning range for the IB layer
  bool full_protocol = false;

  /// Throws InvalidArgument whose message starts with the offending field.
  void validate() const {
    if (probe_every < 1) throw InvalidArgument("probe_every: must be >= 1, got " + std::to_string(probe_every));
    if (n_bins < 2) throw InvalidArgument("n_bins: must be >= 2, got " + std::to_string(n_bins));
    if (seeds.empty()) throw InvalidArgument("seeds: must be non-empty");
    if (objectives.empty()) throw InvalidArgument("objectives: must be non-empty");
    if (!(beta > 0.0)) throw InvalidArgument("beta: must be positive");
    if (feature_subsample < 1) throw InvalidArgument("feature_subsample: must be >= 1");
    if (ib_layer < kOutputLayer) throw InvalidArgument("ib_layer: must be 'final', 'output' or a hidden-layer index");
    if (hidden_range && !(hidden_range->first < hidden_range->second))
      throw InvalidArgument("hidden_range: lo must be < hi");
    if (!(train.lr > 0.0)) throw InvalidArgument("train.lr: must be positive");
    if (train.epochs < 1) throw InvalidArgument("train.epochs: must be >= 1");
    if (attack && !(attack->epsilon >= 0.0)) throw InvalidArgument("attack.epsilon: must be non-negative");
    try {
      net.activation.validate();
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(std::string("net.leaky_slope: ") + e.what());
    }
    for (int h : net.hidden)
      if (h < 1) throw InvalidArgument("net.hidden: widths must be positive");
    if (dataset.normalize != "none" && dataset.normalize != "rms")
      throw InvalidArgument("dataset.normalize: expected 'none' or 'rms', got '" + dataset.normalize + "'");
    switch (experiment) {
      case ExperimentKind::kSyntheticSynergy:
        if (dataset.n_values.empty()) throw InvalidArgument("dataset.n_values: must be non-empty");
        for (int n : dataset.n_values)
          if (n < 2 || n > kMaxEnumerationBits)
            throw InvalidArgument("dataset.n_values: each n must lie in [2, " + std::to_string(kMaxEnumerationBits) + "]");
        if (!(dataset.p_flip >= 0.0 && dataset.p_flip <= 1.0)) throw InvalidArgument("dataset.p_flip: must lie in [0, 1]");
        if (dataset.n_samples < 1) throw InvalidArgument("dataset.n_samples: must be >= 1");
        break;
      case ExperimentKind::kSimpleFunctions:
        parse_simple_function(dataset.function);
        if (dataset.n_train < 1) throw InvalidArgument("dataset.n_train: must be >= 1");
        for (const auto* r : {&dataset.train_range, &dataset.test_range})
          if (*r && !((*r)->lo < (*r)->hi)) throw InvalidArgument("dataset range: lo must be < hi");
        break;
      case ExperimentKind::kAdversarialMnist:
        if (dataset.mnist_dir.empty()) throw InvalidArgument("dataset.mnist_dir: required for adversarial_mnist");
        break;
      case ExperimentKind::kCustom:
        if (dataset.csv.empty()) throw InvalidArgument("dataset.csv: required for custom experiments");
        if (dataset.x.empty()) throw InvalidArgument("dataset.x: must name at least one column");
        if (dataset.y.empty()) throw InvalidArgument("dataset.y: required for custom experiments");
        if (dataset.n_classes < 0) throw InvalidArgument("dataset.n_classes: must be >= 0");
        break;
      case ExperimentKind::kActivationPlane: break;
    }
  }
};

// ---------------------------------------------------------------------------
// JSON mapping

namespace detail {

/// Reads fields from one JSON object and rejects any key it was not asked about.
class FieldReader {
 public:
  FieldReader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw InvalidArgument(where("") + "expected a JSON object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidArgument(where(key) + "wrong type (" + e.what() + ")");
    }
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const std::string& key) const {
    const std::string path = prefix_.empty() ? key : (key.empty() ? prefix_ : prefix_ + "." + key);
    return path.empty() ? "" : path + ": ";
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw InvalidArgument(where(k) + "unknown field");
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

inline json interval_json(const std::optional<Interval>& r) {
  return r ? json::array({r->lo, r->hi}) : json(nullptr);
}

inline std::optional<Interval> interval_from(const json* j, const std::string& field) {
  if (!j || j->is_null()) return std::nullopt;
  if (!j->is_array() || j->size() != 2 || !(*j)[0].is_number() || !(*j)[1].is_number())
    throw InvalidArgument(field + ": expected [lo, hi]");
  return Interval{(*j)[0].get<double>(), (*j)[1].get<double>()};
}

inline std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

inline std::string head_name(OutputHead h) { return h == OutputHead::kLinear ? "linear" : "softmax"; }

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  json objectives = json::array();
  for (auto k : c.objectives) objectives.push_back(to_string(k));
  json ib_layer;
  if (c.ib_layer == kLastHiddenLayer) ib_layer = "final";
  else if (c.ib_layer == kOutputLayer) ib_layer = "output";
  else ib_layer = c.ib_layer;
  return {
      {"experiment", to_string(c.experiment)},
      {"dataset",
       {{"function", d.function},
        {"n_train", d.n_train},
        {"n_test", d.n_test},
        {"train_range", detail::interval_json(d.train_range)},
        {"test_range", detail::interval_json(d.test_range)},
        {"normalize", d.normalize},
        {"data_seed", d.data_seed},
        {"mnist_dir", d.mnist_dir},
        {"subset", d.subset},
        {"csv", d.csv},
        {"x", d.x},
        {"y", d.y},
        {"n_classes", d.n_classes},
        {"n_values", d.n_values},
        {"p_flip", d.p_flip},
        {"n_samples", d.n_samples}}},
      {"net",
       {{"hidden", c.net.hidden},
        {"activation", to_string(c.net.activation.kind)},
        {"leaky_slope", c.net.activation.slope},
        {"output_head", detail::head_name(c.net.output_head)},
        {"bias", c.net.bias}}},
      {"train",
       {{"optimizer", detail::optimizer_name(c.train.optimizer)},
        {"lr", c.train.lr},
        {"epochs", c.train.epochs},
        {"batch", c.train.batch_size == 0 ? json("full") : json(c.train.batch_size)},
        {"loss", to_string(c.train.loss)}}},
      {"probe_every", c.probe_every},
      {"n_bins", c.n_bins},
      {"objectives", objectives},
      {"beta", std::isinf(c.beta) ? json("inf") : json(c.beta)},
      {"seeds", c.seeds},
      {"ib_layer", ib_layer},
      {"output_dir", c.output_dir},
      {"attack", c.attack ? json{{"epsilon", c.attack->epsilon}, {"clip", c.attack->clip}} : json(nullptr)},
      {"feature_subsample", c.feature_subsample},
      {"hidden_range", c.hidden_range ? json::array({c.hidden_range->first, c.hidden_range->second}) : json(nullptr)},
      {"full_protocol", c.full_protocol},
  };
}

/// Parses and validates a config document. Missing fields keep their
/// defaults; unknown fields are rejected.
inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  detail::FieldReader top(j, "");
  std::string s;
  s = to_string(c.experiment);
  top.get("experiment", s);
  c.experiment = parse_experiment(s);

  if (const json* dj = top.raw("dataset")) {
    detail::FieldReader r(*dj, "dataset");
    auto& d = c.dataset;
    r.get("function", d.function);
    r.get("n_train", d.n_train);
    r.get("n_test", d.n_test);
    d.train_range = detail::interval_from(r.raw("train_range"), "dataset.train_range");
    d.test_range = detail::interval_from(r.raw("test_range"), "dataset.test_range");
    r.get("normalize", d.normalize);
    r.get("data_seed", d.data_seed);
    r.get("mnist_dir", d.mnist_dir);
    r.get("subset", d.subset);
    r.get("csv", d.csv);
    r.get("x", d.x);
    r.get("y", d.y);
    r.get("n_classes", d.n_classes);
    r.get("n_values", d.n_values);
    r.get("p_flip", d.p_flip);
    r.get("n_samples", d.n_samples);
    r.finish();
  }
  if (const json* nj = top.raw("net")) {
    detail::FieldReader r(*nj, "net");
    r.get("hidden", c.net.hidden);
    s = to_string(c.net.activation.kind);
    r.get("activation", s);
    try {
      c.net.activation.kind = parse_activation(s);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(std::string("net.activation: ") + e.what());
    }
    r.get("leaky_slope", c.net.activation.slope);
    s = detail::head_name(c.net.output_head);
    r.get("output_head", s);
    if (s == "linear") c.net.output_head = OutputHead::kLinear;
    else if (s == "softmax") c.net.output_head = OutputHead::kSoftmax;
    else throw InvalidArgument("net.output_head: expected 'linear' or 'softmax', got '" + s + "'");
    r.get("bias", c.net.bias);
    r.finish();
  }
  if (const json* tj = top.raw("train")) {
    detail::FieldReader r(*tj, "train");
    s = detail::optimizer_name(c.train.optimizer);
    r.get("optimizer", s);
    if (s == "sgd") c.train.optimizer = OptimizerKind::kSgd;
    else if (s == "adam") c.train.optimizer = OptimizerKind::kAdam;
    else throw InvalidArgument("train.optimizer: expected 'sgd' or 'adam', got '" + s + "'");
    r.get("lr", c.train.lr);
    r.get("epochs", c.train.epochs);
    if (const json* b = r.raw("batch")) {
      if (b->is_string() && b->get<std::string>() == "full") c.train.batch_size = 0;
      else if (b->is_number_integer() && b->get<std::int64_t>() > 0) c.train.batch_size = b->get<std::size_t>();
      else throw InvalidArgument("train.batch: expected \"full\" or a positive integer");
    }
    s = to_string(c.train.loss);
    r.get("loss", s);
    try {
      c.train.loss = parse_loss(s);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(std::string("train.loss: ") + e.what());
    }
    r.finish();
  }
  top.get("probe_every", c.probe_every);
  top.get("n_bins", c.n_bins);
  if (const json* oj = top.raw("objectives")) {
    if (!oj->is_array()) throw InvalidArgument("objectives: expected a list");
    c.objectives.clear();
    for (const auto& o : *oj) {
      if (!o.is_string()) throw InvalidArgument("objectives: entries must be strings");
      try {
        c.objectives.push_back(parse_objective(o.get<std::string>()));
      } catch (const InvalidArgument& e) {
        throw InvalidArgument(std::string("objectives: ") + e.what());
      }
    }
  }
  if (const json* bj = top.raw("beta")) {
    if (bj->is_string() && (bj->get<std::string>() == "inf" || bj->get<std::string>() == "infinity")) c.beta = kInfinity;
    else if (bj->is_number()) c.beta = bj->get<double>();
    else throw InvalidArgument("beta: expected a positive number or \"inf\"");
  }
  top.get("seeds", c.seeds);
  if (const json* lj = top.raw("ib_layer")) {
    if (lj->is_string() && lj->get<std::string>() == "final") c.ib_layer = kLastHiddenLayer;
    else if (lj->is_string() && lj->get<std::string>() == "output") c.ib_layer = kOutputLayer;
    else if (lj->is_number_integer() && lj->get<int>() >= 0) c.ib_layer = lj->get<int>();
    else throw InvalidArgument("ib_layer: expected \"final\", \"output\" or a hidden-layer index");
  }
  top.get("output_dir", c.output_dir);
  if (const json* aj = top.raw("attack"); aj && !aj->is_null()) {
    detail::FieldReader r(*aj, "attack");
    AttackSpec a;
    r.get("epsilon", a.epsilon);
    r.get("clip", a.clip);
    r.finish();
    c.attack = a;
  }
  top.get("feature_subsample", c.feature_subsample);
  if (const json* hj = top.raw("hidden_range"); hj && !hj->is_null()) {
    const auto iv = detail::interval_from(hj, "hidden_range");
    c.hidden_range = std::pair{iv->lo, iv->hi};
  }
  top.get("full_protocol", c.full_protocol);
  top.finish();
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

/// FNV-1a over the canonical (key-sorted) config, output_dir excluded since
/// it names where results go rather than what is computed.
inline std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryPoint {
  int epoch = 0;
  double pred = 0.0;
  double cplx = 0.0;
  double train_loss = 0.0;
  double test_loss = std::numeric_limits<double>::quiet_NaN();
};

struct Range {
  double min = 0.0;
  double max = 0.0;
};

struct InfoTrajectory {
  ObjectiveKind kind = ObjectiveKind::kGIB;
  std::uint64_t seed = 0;
  std::vector<TrajectoryPoint> points;
  std::vector<std::pair<double, double>> normalized;  // (pred_norm, cplx_norm)
  Range pred_range, cplx_range;

  void validate() const {
    for (std::size_t i = 1; i < points.size(); ++i)
      if (points[i].epoch <= points[i - 1].epoch) throw InvalidArgument("InfoTrajectory: epochs must strictly increase");
    if (!normalized.empty() && normalized.size() != points.size())
      throw InvalidArgument("InfoTrajectory: normalized length mismatch");
  }
};

namespace detail {

inline std::vector<double> min_max_scale(const std::vector<double>& v, Range& range) {
  range = {*std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())};
  std::vector<double> out(v.size(), 0.0);
  const double span = range.max - range.min;
  if (span > 0)
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp((v[i] - range.min) / span, 0.0, 1.0);
  return out;
}

}  // namespace detail

/// Per-term min-max scaling to [0, 1]; a constant series maps to zeros.
inline InfoTrajectory normalize_trajectory(InfoTrajectory t) {
  if (t.points.empty()) throw InvalidArgument("normalize_trajectory: needs at least one point");
  std::vector<double> pred, cplx;
  for (const auto& p : t.points) {
    pred.push_back(p.pred);
    cplx.push_back(p.cplx);
  }
  const auto pn = detail::min_max_scale(pred, t.pred_range);
  const auto cn = detail::min_max_scale(cplx, t.cplx_range);
  t.normalized.resize(t.points.size());
  for (std::size_t i = 0; i < t.points.size(); ++i) t.normalized[i] = {pn[i], cn[i]};
  return t;
}

inline double denormalize(double v, const Range& r) { return r.min + v * (r.max - r.min); }

/// Peak complexity minus final complexity, in bits.
inline double compression_score(const InfoTrajectory& t) {
  if (t.points.size() < 2) throw InvalidArgument("compression_score: needs at least two points");
  double peak = t.points.front().cplx;
  for (const auto& p : t.points) peak = std::max(peak, p.cplx);
  return peak - t.points.back().cplx;
}

inline constexpr double kCompressionFraction = 0.1;

inline bool shows_compression(const InfoTrajectory& t) {
  double lo = t.points.front().cplx, hi = lo;
  for (const auto& p : t.points) {
    lo = std::min(lo, p.cplx);
    hi = std::max(hi, p.cplx);
  }
  return compression_score(t) > kCompressionFraction * (hi - lo);
}

inline std::string trajectory_file_name(const InfoTrajectory& t) {
  return to_string(t.kind) + "_seed" + std::to_string(t.seed) + ".csv";
}

inline const std::vector<std::string>& trajectory_header() {
  static const std::vector<std::string> h{"epoch", "pred_term", "cplx_term", "pred_norm", "cplx_norm", "train_loss",
                                          "test_loss"};
  return h;
}

inline std::string trajectory_csv(const InfoTrajectory& t) {
  const InfoTrajectory n = t.normalized.empty() ? normalize_trajectory(t) : t;
  Matrix m(static_cast<Eigen::Index>(n.points.size()), 7);
  for (std::size_t i = 0; i < n.points.size(); ++i) {
    const auto& p = n.points[i];
    m.row(static_cast<Eigen::Index>(i)) << p.epoch, p.pred, p.cplx, n.normalized[i].first, n.normalized[i].second,
        p.train_loss, p.test_loss;
  }
  return to_csv(trajectory_header(), m);
}

/// Parses a trajectory CSV back (normalized fields included).
inline InfoTrajectory read_trajectory(const std::string& path, ObjectiveKind kind = ObjectiveKind::kGIB,
                                      std::uint64_t seed = 0) {
  const CsvTable t = read_csv(path);
  if (t.header != trajectory_header()) throw InvalidArgument("'" + path + "': not a trajectory CSV");
  InfoTrajectory out;
  out.kind = kind;
  out.seed = seed;
  for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
    out.points.push_back({static_cast<int>(t.values(r, 0)), t.values(r, 1), t.values(r, 2), t.values(r, 5), t.values(r, 6)});
    out.normalized.emplace_back(t.values(r, 3), t.values(r, 4));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Results

struct RunRecord {
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | diverged | failed
  std::string message;
  int epochs_completed = 0;
  double final_train_loss = std::numeric_limits<double>::quiet_NaN();
  double final_test_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<InfoTrajectory> trajectories;
};

struct ResultTable {
  std::string file;
  std::vector<std::string> header;
  Matrix values;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunRecord> runs;
  std::vector<ResultTable> tables;
  json data_provenance = json::object();
  double wall_seconds = 0.0;

  bool ok() const {
    return std::all_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.status == "ok"; });
  }
};

struct RunOptions {
  int jobs = 1;
  std::function<void(const std::string&)> progress;  // called under a lock
};

// ---------------------------------------------------------------------------
// Data preparation

struct PreparedData {
  TrainData train;
  std::optional<TrainData> test;
  DiscreteView y;          // labels or binned targets
  IntMatrix x_features;    // binned input features used by GIB / SVW
  DiscreteView x_joint;    // binned input as one symbol stream (IB)
  int n_classes = 0;
  json provenance = json::object();
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, const std::string& salt) { return seed ^ fnv1a64(salt); }

inline Vector column_rms(const Matrix& m) {
  Vector rms(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double v = std::sqrt(m.col(c).squaredNorm() / static_cast<double>(m.rows()));
    rms(c) = v > 0 ? v : 1.0;
  }
  return rms;
}

inline Matrix scale_columns(const Matrix& m, const Vector& s) {
  Matrix out = m;
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.col(c) /= s(c);
  return out;
}

inline Matrix column_matrix(const std::vector<double>& v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

inline void finish_prepared(PreparedData& p, const ExperimentConfig& cfg) {
  SampleMatrix xs = make_samples(p.train.x);
  const IntMatrix bins = bin_equal_width(xs, BinningSpec::observed(cfg.n_bins)).bins;
  p.x_joint = joint_view(bins);
  std::vector<int> keep;
  for (Eigen::Index c = 0; c < bins.cols(); c += cfg.feature_subsample) keep.push_back(static_cast<int>(c));
  p.x_features.resize(bins.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) p.x_features.col(static_cast<Eigen::Index>(k)) = bins.col(keep[k]);
  if (p.n_classes > 0) {
    std::vector<int> labels(static_cast<std::size_t>(p.train.targets.rows()));
    for (Eigen::Index r = 0; r < p.train.targets.rows(); ++r) {
      Eigen::Index arg;
      p.train.targets.row(r).maxCoeff(&arg);
      labels[static_cast<std::size_t>(r)] = static_cast<int>(arg);
    }
    p.y = view_of(labels);
  } else {
    const IntMatrix yb = bin_equal_width(make_samples(p.train.targets), BinningSpec::observed(cfg.n_bins)).bins;
    p.y = joint_view(yb);
  }
  p.provenance["gib_features"] = keep.size();
  p.provenance["input_features"] = bins.cols();
  p.provenance["train_samples"] = bins.rows();
}

inline PreparedData prepare_labeled(const LabeledDataset& d, const ExperimentConfig& cfg) {
  PreparedData p;
  p.n_classes = d.n_classes;
  p.train.x = d.x.values;
  p.train.targets = d.classification() ? one_hot(d.y_class, d.n_classes) : column_matrix(d.y_real);
  p.provenance["dataset"] = d.meta.to_json();
  finish_prepared(p, cfg);
  return p;
}

inline PreparedData prepare_simple(const ExperimentConfig& cfg, std::uint64_t seed) {
  const SimpleFunction f = parse_simple_function(cfg.dataset.function);
  const Interval tr = cfg.dataset.train_range.value_or(default_train_range(f));
  const Interval te = cfg.dataset.test_range.value_or(default_test_range(f));
  const LabeledDataset train = gen_simple_function(f, cfg.dataset.n_train, tr, mix_seed(seed, "train"));
  PreparedData p;
  p.train.x = train.x.values;
  p.train.targets = column_matrix(train.y_real);
  std::optional<LabeledDataset> test;
  if (cfg.dataset.n_test > 0) test = gen_simple_function(f, cfg.dataset.n_test, te, mix_seed(seed, "test"));
  if (test) p.test = TrainData{test->x.values, column_matrix(test->y_real)};
  if (cfg.dataset.normalize == "rms") {
    const Vector xs = column_rms(p.train.x);
    const Vector ts = column_rms(p.train.targets);
    p.train.x = scale_columns(p.train.x, xs);
    p.train.targets = scale_columns(p.train.targets, ts);
    if (p.test) {
      p.test->x = scale_columns(p.test->x, xs);
      p.test->targets = scale_columns(p.test->targets, ts);
    }
    p.provenance["input_rms"] = std::vector<double>(xs.data(), xs.data() + xs.size());
    p.provenance["target_rms"] = ts(0);
  }
  p.provenance["dataset"] = train.meta.to_json();
  if (test) p.provenance["test_dataset"] = test->meta.to_json();
  finish_prepared(p, cfg);
  return p;
}

inline std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

inline LabeledDataset take_rows(const LabeledDataset& d, const std::vector<std::size_t>& rows) {
  LabeledDataset out;
  out.n_classes = d.n_classes;
  out.meta = d.meta;
  Matrix x(static_cast<Eigen::Index>(rows.size()), d.x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = d.x.values.row(static_cast<Eigen::Index>(rows[i]));
    out.y_class.push_back(d.y_class[rows[i]]);
  }
  out.x = SampleMatrix{std::move(x), d.x.column_names};
  return out;
}

inline PreparedData prepare_mnist(const ExperimentConfig& cfg) {
  const auto& dir = cfg.dataset.mnist_dir;
  const LabeledDataset full =
      load_idx(join_path(dir, "train-images-idx3-ubyte"), join_path(dir, "train-labels-idx1-ubyte"));
  std::vector<std::size_t> order(full.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.dataset.data_seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const std::size_t want = cfg.full_protocol || cfg.dataset.subset == 0 ? order.size()
                                                                         : std::min(cfg.dataset.subset, order.size());
  order.resize(want);
  std::sort(order.begin(), order.end());
  PreparedData p = prepare_labeled(take_rows(full, order), cfg);
  p.provenance["mnist_available"] = full.size();
  p.provenance["mnist_subset"] = want;
  const std::string ti = join_path(dir, "t10k-images-idx3-ubyte"), tl = join_path(dir, "t10k-labels-idx1-ubyte");
  if (std::filesystem::exists(ti) && std::filesystem::exists(tl)) {
    const LabeledDataset test = load_idx(ti, tl);
    p.test = TrainData{test.x.values, one_hot(test.y_class, 10)};
    p.provenance["mnist_test"] = test.size();
  }
  return p;
}

inline PreparedData prepare_custom(const ExperimentConfig& cfg) {
  const CsvTable t = read_csv(cfg.dataset.csv);
  auto col = [&](const std::string& name) {
    const int i = t.column_index(name);
    if (i < 0) throw InvalidArgument("dataset: column '" + name + "' not found in '" + cfg.dataset.csv + "'");
    return i;
  };
  LabeledDataset d;
  Matrix x(t.values.rows(), static_cast<Eigen::Index>(cfg.dataset.x.size()));
  for (std::size_t k = 0; k < cfg.dataset.x.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = t.values.col(col(cfg.dataset.x[k]));
  d.x = make_samples(std::move(x), cfg.dataset.x);
  const int yc = col(cfg.dataset.y);
  d.n_classes = cfg.dataset.n_classes;
  for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
    const double v = t.values(r, yc);
    if (d.n_classes > 0) {
      if (v != std::floor(v) || v < 0 || v >= d.n_classes)
        throw InvalidArgument("dataset.y: row " + std::to_string(r + 1) + " is not a label in [0, n_classes)");
      d.y_class.push_back(static_cast<int>(v));
    } else {
      d.y_real.push_back(v);
    }
  }
  d.meta = {"csv", {{"path", cfg.dataset.csv}}, 0};
  return prepare_labeled(d, cfg);
}

inline PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  switch (cfg.experiment) {
    case ExperimentKind::kSimpleFunctions: return prepare_simple(cfg, seed);
    case ExperimentKind::kActivationPlane: return prepare_labeled(gen_binary_classification(cfg.dataset.data_seed), cfg);
    case ExperimentKind::kAdversarialMnist: return prepare_mnist(cfg);
    case ExperimentKind::kCustom: return prepare_custom(cfg);
    case ExperimentKind::kSyntheticSynergy: break;
  }
  throw InvalidArgument("experiment: no training data for " + to_string(cfg.experiment));
}

// ---------------------------------------------------------------------------
// Probing

inline DiscreteView binned_view(const Matrix& m, int n_bins, const std::optional<std::pair<double, double>>& range) {
  const SampleMatrix s = make_samples(m);
  const BinningSpec spec = range ? BinningSpec::fixed(n_bins, range->first, range->second, static_cast<std::size_t>(m.cols()))
                                 : BinningSpec::observed(n_bins);
  return joint_view(bin_equal_width(s, spec).bins);
}

inline std::vector<ObjectiveReport> probe_reports(const ExperimentConfig& cfg, const PreparedData& data,
                                                  const ProbeSnapshot& snap) {
  std::vector<ObjectiveReport> out;
  const DiscreteView z = binned_view(snap.logits, cfg.n_bins, std::nullopt);
  for (ObjectiveKind k : cfg.objectives) {
    switch (k) {
      case ObjectiveKind::kIB: {
        const Matrix& layer = cfg.ib_layer == kOutputLayer || snap.hidden.size() == 0 ? snap.logits : snap.hidden;
        const auto range = cfg.ib_layer == kOutputLayer ? std::nullopt : cfg.hidden_range;
        out.push_back(ib_terms(data.x_joint, binned_view(layer, cfg.n_bins, range), data.y, cfg.beta));
        break;
      }
      case ObjectiveKind::kGIB: {
        out.push_back(gib_terms(data.x_features, z, data.y, cfg.beta));
        const int expected = 2 * static_cast<int>(data.x_features.cols()) + 1;
        if (out.back().mi_evaluations != expected)
          throw NumericalFailure("GIB probe used " + std::to_string(out.back().mi_evaluations) +
                                 " MI evaluations, expected " + std::to_string(expected));
        break;
      }
      case ObjectiveKind::kSVW: out.push_back(svw_terms(data.x_features, z, data.y, cfg.beta)); break;
    }
  }
  return out;
}

inline NetSpec net_spec_for(const ExperimentConfig& cfg, const PreparedData& data) {
  NetSpec ns;
  ns.input_dim = static_cast<int>(data.train.x.cols());
  ns.hidden = cfg.net.hidden;
  ns.output_dim = static_cast<int>(data.train.targets.cols());
  ns.hidden_activation = cfg.net.activation;
  ns.output_head = cfg.net.output_head;
  ns.bias = cfg.net.bias;
  return ns;
}

inline RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed, json* provenance) {
  RunRecord rec;
  rec.seed = seed;
  const PreparedData data = prepare_data(cfg, seed);
  if (provenance) *provenance = data.provenance;
  if (cfg.ib_layer >= 0 && cfg.ib_layer >= static_cast<int>(cfg.net.hidden.size()))
    throw InvalidArgument("ib_layer: index " + std::to_string(cfg.ib_layer) + " but the net has " +
                          std::to_string(cfg.net.hidden.size()) + " hidden layers");
  TrainSpec spec = cfg.train;
  spec.seed = seed;
  const DenseNet net = make_dense_net(net_spec_for(cfg, data), seed);
  const ProbeSchedule probes =
      ProbeSchedule::every(cfg.probe_every, spec.epochs, cfg.ib_layer >= 0 ? cfg.ib_layer : kLastHiddenLayer);
  const TrainData* test = data.test ? &*data.test : nullptr;
  const TrainResult tr = cfg.attack ? adversarial_train(net, data.train, spec, *cfg.attack, probes, test)
                                    : train(net, data.train, spec, probes, test);
  rec.epochs_completed = static_cast<int>(tr.loss_history.size());
  if (tr.diverged) {
    rec.status = "diverged";
    rec.message = tr.failure;
  }
  std::vector<InfoTrajectory> traj(cfg.objectives.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    traj[k].kind = cfg.objectives[k];
    traj[k].seed = seed;
  }
  for (const auto& snap : tr.snapshots) {
    std::vector<ObjectiveReport> reports;
    try {
      reports = probe_reports(cfg, data, snap);
    } catch (const std::exception& e) {
      throw NumericalFailure("seed " + std::to_string(seed) + ", epoch " + std::to_string(snap.epoch) + ": " + e.what());
    }
    for (std::size_t k = 0; k < reports.size(); ++k)
      traj[k].points.push_back({snap.epoch, reports[k].prediction_term, reports[k].complexity_term, snap.train_loss,
                                snap.test_loss});
  }
  if (!tr.snapshots.empty()) {
    rec.final_train_loss = tr.snapshots.back().train_loss;
    rec.final_test_loss = tr.snapshots.back().test_loss;
  }
  for (auto& t : traj)
    if (!t.points.empty()) rec.trajectories.push_back(normalize_trajectory(std::move(t)));
  return rec;
}

// ---------------------------------------------------------------------------
// Synthetic synergy (no training)

inline ResultTable synergy_table(const ExperimentConfig& cfg) {
  ResultTable t;
  t.file = "synergy_table.csv";
  t.header = {"seed", "n", "function", "exact_noise_mi", "sampled_noise_mi", "exact_input_mi", "sampled_input_mi"};
  std::vector<std::array<double, 7>> rows;
  for (std::uint64_t seed : cfg.seeds) {
    for (int n : cfg.dataset.n_values) {
      const NoiseSpec noise{cfg.dataset.p_flip, n};
      const ExactPmf pmf = enumerate_force_to_one(noise);
      const ForceToOneLayout layout{n};
      IntMatrix noisy(pmf.support.rows(), n);
      for (int c = 0; c < n; ++c) noisy.col(c) = pmf.support.col(n + c);
      const ForceToOneSample s = gen_force_to_one(noise, cfg.dataset.n_samples, seed);
      const DiscreteView eps_view = view_of(s.eps);
      const DiscreteView clean_view = joint_view(s.x_clean);
      int which_index = 1;
      for (auto which : {SynergyFunction::kF1, SynergyFunction::kF2, SynergyFunction::kF3}) {
        const std::vector<int> f = apply_synergy_function(noisy, which);
        const ExactPmf with_f = append_column(pmf, f);
        const int fcol = 2 * n + 1;
        const std::vector<int> fc{fcol}, eps{layout.eps()};
        const double exact_noise = exact_mi(with_f, fc, eps);
        const double exact_input = exact_mi(with_f, fc, layout.clean());
        const DiscreteView fs = view_of(apply_synergy_function(s.x_noisy, which));
        rows.push_back({static_cast<double>(seed), static_cast<double>(n), static_cast<double>(which_index++),
                        exact_noise, mutual_information(fs, eps_view), exact_input,
                        mutual_information(fs, clean_view)});
      }
    }
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), 7);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < 7; ++c) t.values(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  return t;
}

}  // namespace detail

/// Applies full-protocol overrides (currently only the adversarial epoch budget).
inline ExperimentConfig effective_config(ExperimentConfig cfg) {
  if (cfg.full_protocol && cfg.experiment == ExperimentKind::kAdversarialMnist) {
    cfg.train.epochs = 10000;
    cfg.dataset.subset = 0;
  }
  return cfg;
}

/// Runs every seed of the experiment. Divergence is recorded per run; other
/// errors abort with context.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.config = effective_config(config);
  res.config.validate();
  const ExperimentConfig& cfg = res.config;
  std::mutex mu;
  auto say = [&](const std::string& s) {
    if (!opts.progress) return;
    std::lock_guard lock(mu);
    opts.progress(s);
  };

  if (cfg.experiment == ExperimentKind::kSyntheticSynergy) {
    res.tables.push_back(detail::synergy_table(cfg));
    for (auto s : cfg.seeds) {
      res.runs.push_back({s, "ok", "", 0, std::numeric_limits<double>::quiet_NaN(),
                          std::numeric_limits<double>::quiet_NaN(), {}});
      say("seed " + std::to_string(s) + ": synergy table done");
    }
  } else {
    res.runs.resize(cfg.seeds.size());
    std::vector<json> prov(cfg.seeds.size());
    std::vector<std::exception_ptr> errors(cfg.seeds.size());
    std::size_t next = 0;
    auto worker = [&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lock(mu);
          if (next >= cfg.seeds.size()) return;
          i = next++;
        }
        try {
          res.runs[i] = detail::run_seed(cfg, cfg.seeds[i], &prov[i]);
          say("seed " + std::to_string(cfg.seeds[i]) + ": " + res.runs[i].status + " after " +
              std::to_string(res.runs[i].epochs_completed) + " epochs");
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const int jobs = std::clamp(opts.jobs, 1, static_cast<int>(cfg.seeds.size()));
    if (jobs == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (std::size_t i = 0; i < prov.size(); ++i) res.data_provenance[std::to_string(cfg.seeds[i])] = prov[i];
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

// ---------------------------------------------------------------------------
// Emission

inline json manifest_json(const ExperimentResult& res) {
  json runs = json::array();
  for (const auto& r : res.runs) {
    json trajs = json::array();
    for (const auto& t : r.trajectories) {
      json tj = {{"objective", to_string(t.kind)},
                 {"file", trajectory_file_name(t)},
                 {"points", t.points.size()},
                 {"pred_min", t.pred_range.min},
                 {"pred_max", t.pred_range.max},
                 {"cplx_min", t.cplx_range.min},
                 {"cplx_max", t.cplx_range.max}};
      if (t.points.size() >= 2) {
        tj["compression_score"] = compression_score(t);
        tj["shows_compression"] = shows_compression(t);
      }
      trajs.push_back(std::move(tj));
    }
    json rj = {{"seed", r.seed}, {"status", r.status}, {"epochs_completed", r.epochs_completed}, {"trajectories", trajs}};
    if (!r.message.empty()) rj["message"] = r.message;
    if (std::isfinite(r.final_train_loss)) rj["final_train_loss"] = r.final_train_loss;
    if (std::isfinite(r.final_test_loss)) rj["final_test_loss"] = r.final_test_loss;
    runs.push_back(std::move(rj));
  }
  json tables = json::array();
  for (const auto& t : res.tables) tables.push_back(t.file);
  return {{"version", kVersion},
          {"config", to_json(res.config)},
          {"config_hash", config_hash(res.config)},
          {"seeds", res.config.seeds},
          {"status", res.ok() ? "ok" : "partial"},
          {"runs", runs},
          {"tables", tables},
          {"data", res.data_provenance},
          {"timing", {{"wall_seconds", res.wall_seconds}}}};
}

/// Writes one CSV per (objective, seed), any result tables, and manifest.json.
inline void emit(const ExperimentResult& res, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  for (const auto& r : res.runs)
    for (const auto& t : r.trajectories) write_text(detail::join_path(dir, trajectory_file_name(t)), trajectory_csv(t));
  for (const auto& t : res.tables) write_csv(detail::join_path(dir, t.file), t.header, t.values);
  write_text(detail::join_path(dir, "manifest.json"), manifest_json(res).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Presets

inline ExperimentConfig preset_simple_functions(SimpleFunction f) {
  ExperimentConfig c;
  c.experiment = ExperimentKind::kSimpleFunctions;
  c.dataset.function = to_string(f);
  c.dataset.normalize = "rms";
  static const std::map<SimpleFunction, std::pair<int, Activation>> arch{
      {SimpleFunction::kAdd, {4, Activation::kIdentity}}, {SimpleFunction::kMul, {3, Activation::kSquare}},
      {SimpleFunction::kSp1, {16, Activation::kSquare}},  {SimpleFunction::kSp2, {8, Activation::kSquare}},
      {SimpleFunction::kSp3, {16, Activation::kSquare}}};
  c.net.hidden = {arch.at(f).first};
  c.net.activation = ActivationKind{arch.at(f).second};
  c.net.output_head = OutputHead::kLinear;
  c.net.bias = false;
  c.train = TrainSpec{OptimizerKind::kSgd, 0.01, 1000, 0, LossKind::kMse, 0, 0, 1e-4};
  c.probe_every = 10;
  c.n_bins = 40;
  c.objectives = {ObjectiveKind::kIB, ObjectiveKind::kGIB};
  c.seeds = {0, 1, 2, 3, 4};
  c.output_dir = "out/simple_functions/" + to_string(f);
  return c;
}

inline ExperimentConfig preset_activation_plane(Activation a) {
  ExperimentConfig c;
  c.experiment = ExperimentKind::kActivationPlane;
  c.net.hidden = {10, 7, 5, 4, 3};
  c.net.activation = ActivationKind{a};
  c.net.output_head = OutputHead::kSoftmax;
  c.net.bias = true;
  c.train = TrainSpec{OptimizerKind::kAdam, 1e-3, 3000, 0, LossKind::kCrossEntropy, 0, 0, 1e-4};
  c.probe_every = 50;
  c.n_bins = 30;
  c.objectives = {ObjectiveKind::kIB, ObjectiveKind::kGIB};
  c.seeds = {0, 1, 2};
  c.output_dir = "out/activation_plane/" + to_string(a);
  return c;
}

inline ExperimentConfig preset_adversarial_mnist(double epsilon, const std::string& mnist_dir = "data/mnist") {
  ExperimentConfig c;
  c.experiment = ExperimentKind::kAdversarialMnist;
  c.dataset.mnist_dir = mnist_dir;
  c.dataset.subset = 10000;
  c.net.hidden = {1024, 20, 20, 20};
  c.net.activation = ActivationKind{Activation::kTanh};
  c.net.output_head = OutputHead::kSoftmax;
  c.net.bias = true;
  c.train = TrainSpec{OptimizerKind::kAdam, 1e-3, 2000, 0, LossKind::kCrossEntropy, 0, 0, 1e-4};
  c.probe_every = 250;
  c.n_bins = 30;
  c.objectives = {ObjectiveKind::kIB, ObjectiveKind::kGIB};
  c.seeds = {0, 1};
  c.attack = AttackSpec{epsilon, true};
  c.hidden_range = std::pair{-1.0, 1.0};
  c.output_dir = "out/adversarial_mnist/eps_" + format_number(epsilon);
  return c;
}

inline ExperimentConfig preset_synthetic_synergy() {
  ExperimentConfig c;
  c.experiment = ExperimentKind::kSyntheticSynergy;
  c.objectives = {ObjectiveKind::kGIB};
  c.seeds = {0};
  c.output_dir = "out/synthetic_synergy";
  return c;
}

}  // namespace gib

#endif  // GIB_RUNNER_HPP_
