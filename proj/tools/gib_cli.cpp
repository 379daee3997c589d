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

// gib_cli: run experiments and estimate information quantities from CSV.
// Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gib/gib.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct Columns {
  gib::CsvTable table;

  int index(const std::string& name) const {
    const int i = table.column_index(name);
    if (i < 0) throw gib::InvalidArgument("column '" + name + "' not found in input CSV");
    return i;
  }

  gib::IntMatrix binned(const std::vector<std::string>& names, int bins) const {
    if (names.empty()) throw gib::InvalidArgument("no columns selected");
    gib::Matrix m(table.values.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = table.values.col(index(names[k]));
    return gib::bin_equal_width(gib::make_samples(std::move(m), names), gib::BinningSpec::observed(bins)).bins;
  }
};

Columns load(const std::string& path) {
  Columns c{gib::read_csv(path)};
  if (c.table.values.rows() == 0) throw gib::InvalidArgument("'" + path + "' has no data rows");
  return c;
}

// --- mi ---------------------------------------------------------------------

struct MiArgs {
  std::string input, x, y, weights;
  int bins = 30;
};

int cmd_mi(const MiArgs& a) {
  const Columns c = load(a.input);
  gib::DiscreteView xv = gib::joint_view(c.binned(split_list(a.x), a.bins));
  gib::DiscreteView yv = gib::joint_view(c.binned({a.y}, a.bins));
  if (!a.weights.empty()) {
    const int wi = c.index(a.weights);
    std::vector<double> w(static_cast<std::size_t>(c.table.values.rows()));
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = c.table.values(static_cast<Eigen::Index>(i), wi);
      if (!(w[i] >= 0.0)) throw gib::InvalidArgument("weights must be non-negative");
      total += w[i];
    }
    if (!(total > 0.0)) throw gib::InvalidArgument("weights must have a positive sum");
    for (auto& v : w) v /= total;
    const gib::Weights shared = gib::make_weights(std::move(w));
    xv = gib::with_weights(std::move(xv), shared);
    yv = gib::with_weights(std::move(yv), shared);
  }
  std::cout << fixed6(gib::mutual_information(xv, yv)) << "\n";
  return kExitOk;
}

// --- synergy ----------------------------------------------------------------

struct SynergyArgs {
  std::string input, x, z, y, kind = "gib", beta = "1";
  int bins = 30;
};

double parse_beta(const std::string& s) {
  if (s == "inf" || s == "infinity") return gib::kInfinity;
  try {
    std::size_t used = 0;
    const double b = std::stod(s, &used);
    if (used == s.size() && b > 0) return b;
  } catch (const std::exception&) {
  }
  throw gib::InvalidArgument("--beta must be a positive number or 'inf', got '" + s + "'");
}

int cmd_synergy(const SynergyArgs& a) {
  const double beta = parse_beta(a.beta);
  if (a.kind != "gib" && a.kind != "svw" && a.kind != "syn")
    throw gib::InvalidArgument("--kind must be gib, svw or syn, got '" + a.kind + "'");
  const auto names = split_list(a.x);
  if (a.kind != "svw" && names.size() < 2)
    throw gib::InvalidArgument("--kind " + a.kind + " needs at least 2 --x columns");
  if (a.kind != "syn" && a.z.empty()) throw gib::InvalidArgument("--z is required for --kind " + a.kind);
  const Columns c = load(a.input);
  const gib::IntMatrix x = c.binned(names, a.bins);
  const gib::DiscreteView y = gib::joint_view(c.binned({a.y}, a.bins));

  double prediction = 0.0, complexity = 0.0, objective = 0.0;
  std::vector<gib::FeatureTerms> terms;
  if (a.kind == "syn") {
    const gib::SynergyReport r = gib::feature_synergy(x, y);
    prediction = r.whole;
    complexity = r.whole - r.synergy;
    objective = r.synergy;
    terms = r.per_feature_terms;
  } else {
    const gib::DiscreteView z = gib::joint_view(c.binned({a.z}, a.bins));
    const gib::ObjectiveReport r = a.kind == "gib" ? gib::gib_terms(x, z, y, beta) : gib::svw_terms(x, z, y, beta);
    prediction = r.prediction_term;
    complexity = r.complexity_term;
    objective = r.objective_value;
    terms = r.per_feature_terms;
  }
  std::size_t width = 7;
  for (const auto& n : names) width = std::max(width, n.size());
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  std::cout << pad("kind", 12) << a.kind << "\n"
            << pad("prediction", 12) << fixed6(prediction) << "\n"
            << pad("complexity", 12) << fixed6(complexity) << "\n"
            << pad("objective", 12) << fixed6(objective) << "\n"
            << pad("feature", width + 2) << pad("leave_one_out", 15) << "single\n";
  for (std::size_t i = 0; i < terms.size(); ++i)
    std::cout << pad(names[i], width + 2) << pad(fixed6(terms[i].leave_one_out), 15) << fixed6(terms[i].single) << "\n";
  return kExitOk;
}

// --- datagen ----------------------------------------------------------------

struct DatagenArgs {
  std::string gen, out;
  std::vector<std::string> params;
  std::uint64_t seed = 0;
};

const std::vector<std::string> kGenerators{"force_to_one", "simple_function", "binary_classification"};

class Params {
 public:
  explicit Params(const std::vector<std::string>& kv) {
    for (const auto& item : kv) {
      const auto eq = item.find('=');
      if (eq == std::string::npos || eq == 0) throw gib::InvalidArgument("--params expects key=value, got '" + item + "'");
      values_[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }

  std::string str(const std::string& key, const std::string& def) {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }

  double num(const std::string& key, double def) {
    const std::string s = str(key, "");
    if (s.empty()) return def;
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw gib::InvalidArgument("parameter '" + key + "' is not a number: '" + s + "'");
  }

  void finish(const std::string& gen) const {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) throw gib::InvalidArgument("unknown parameter '" + k + "' for generator " + gen);
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

int cmd_datagen(const DatagenArgs& a) {
  Params p(a.params);
  if (a.gen == "force_to_one") {
    const gib::NoiseSpec noise{p.num("p_flip", 1.0 / 3.0), static_cast<int>(p.num("n", 3))};
    const auto samples = static_cast<std::size_t>(p.num("n_samples", 1000));
    p.finish(a.gen);
    const auto s = gib::gen_force_to_one(noise, samples, a.seed);
    const int n = noise.n;
    std::vector<std::string> header;
    for (int i = 1; i <= n; ++i) header.push_back("x" + std::to_string(i));
    for (int i = 1; i <= n; ++i) header.push_back("x" + std::to_string(i) + "'");
    header.push_back("eps");
    gib::Matrix m(static_cast<Eigen::Index>(samples), 2 * n + 1);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < n; ++c) {
        m(r, c) = s.x_clean(r, c);
        m(r, n + c) = s.x_noisy(r, c);
      }
      m(r, 2 * n) = s.eps[static_cast<std::size_t>(r)];
    }
    gib::write_csv(a.out, header, m);
    const gib::Provenance meta{"force_to_one", {{"n", n}, {"p_flip", noise.p_flip}, {"n_samples", samples}}, a.seed};
    gib::write_text(a.out + ".json", meta.to_json().dump(2) + "\n");
  } else if (a.gen == "simple_function") {
    const auto f = gib::parse_simple_function(p.str("function", "add"));
    const auto samples = static_cast<std::size_t>(p.num("n_samples", gib::kSimpleFunctionSamples));
    const gib::Interval def = gib::default_train_range(f);
    const gib::Interval range{p.num("lo", def.lo), p.num("hi", def.hi)};
    p.finish(a.gen);
    gib::export_dataset_csv(gib::gen_simple_function(f, samples, range, a.seed), a.out);
  } else if (a.gen == "binary_classification") {
    p.finish(a.gen);
    gib::export_dataset_csv(gib::gen_binary_classification(a.seed), a.out, "label");
  } else {
    std::string valid;
    for (const auto& g : kGenerators) valid += (valid.empty() ? "" : ", ") + g;
    throw gib::InvalidArgument("unknown generator '" + a.gen + "' (valid: " + valid + ")");
  }
  std::cout << "wrote " << a.out << "\n";
  return kExitOk;
}

// --- run --------------------------------------------------------------------

struct RunArgs {
  std::string config, out, seeds;
  int jobs = 1;
};

int cmd_run(const RunArgs& a) {
  gib::ExperimentConfig cfg = gib::load_config(a.config);
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (!a.seeds.empty()) {
    cfg.seeds.clear();
    for (const auto& s : split_list(a.seeds)) {
      try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        cfg.seeds.push_back(v);
      } catch (const std::exception&) {
        throw gib::InvalidArgument("--seeds: '" + s + "' is not an unsigned integer");
      }
    }
  }
  if (a.jobs < 1) throw gib::InvalidArgument("--jobs must be >= 1");
  cfg.validate();
  gib::RunOptions opts;
  opts.jobs = a.jobs;
  opts.progress = [](const std::string& line) { std::cout << line << "\n" << std::flush; };
  const gib::ExperimentResult res = gib::run_experiment(cfg, opts);
  gib::emit(res, cfg.output_dir);
  for (const auto& r : res.runs) {
    for (const auto& t : r.trajectories) {
      const std::string score = t.points.size() >= 2 ? fixed6(gib::compression_score(t)) : "n/a";
      std::cout << gib::to_string(t.kind) << " seed " << t.seed << " compression_score " << score << "\n";
    }
  }
  for (const auto& t : res.tables) std::cout << "table " << t.file << " rows " << t.values.rows() << "\n";
  std::cout << "wrote " << cfg.output_dir << "/manifest.json\n";
  return res.ok() ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information-plane laboratory: IB, GIB and SVW objectives over trained networks"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("--config", run_args.config, "Experiment config (JSON)")->required();
  run->add_option("--out", run_args.out, "Output directory (overrides output_dir)");
  run->add_option("--seeds", run_args.seeds, "Comma-separated seed list (overrides seeds)");
  run->add_option("--jobs", run_args.jobs, "Seeds trained in parallel");

  MiArgs mi_args;
  auto* mi = app.add_subcommand("mi", "Plug-in mutual information between CSV columns (bits)");
  mi->add_option("--input", mi_args.input, "CSV with header row")->required();
  mi->add_option("--x", mi_args.x, "Comma-separated X columns")->required();
  mi->add_option("--y", mi_args.y, "Y column")->required();
  mi->add_option("--bins", mi_args.bins, "Equal-width bins per column");
  mi->add_option("--weights", mi_args.weights, "Column of non-negative sample weights");

  SynergyArgs syn_args;
  auto* syn = app.add_subcommand("synergy", "GIB, SVW or feature-wise synergy terms from CSV columns");
  syn->add_option("--input", syn_args.input, "CSV with header row")->required();
  syn->add_option("--x", syn_args.x, "Comma-separated feature columns")->required();
  syn->add_option("--z", syn_args.z, "Prediction column (gib, svw)");
  syn->add_option("--y", syn_args.y, "Target column")->required();
  syn->add_option("--bins", syn_args.bins, "Equal-width bins per column");
  syn->add_option("--kind", syn_args.kind, "gib, svw or syn");
  syn->add_option("--beta", syn_args.beta, "Trade-off parameter (positive or inf)");

  DatagenArgs gen_args;
  auto* gen = app.add_subcommand("datagen", "Generate a dataset CSV with a provenance sidecar");
  gen->add_option("--gen", gen_args.gen, "force_to_one, simple_function or binary_classification")->required();
  gen->add_option("--params", gen_args.params, "key=value generator parameters");
  gen->add_option("--seed", gen_args.seed, "Generator seed");
  gen->add_option("--out", gen_args.out, "Output CSV path")->required();

  auto* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*mi) return cmd_mi(mi_args);
    if (*syn) return cmd_synergy(syn_args);
    if (*gen) return cmd_datagen(gen_args);
    if (*version) {
      std::cout << "gibench " << gib::kVersion << "\n";
      return kExitOk;
    }
  } catch (const gib::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitInvalid;
}
