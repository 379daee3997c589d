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

// Information-plane functionals.
//
// The synergy-based objectives measure input features against Q, the stream
// of (prediction, label) pairs reweighted per sample by the pointwise mutual
// information ratio p(z,y) / (p(z) p(y)). Every MI against Q is the weighted
// plug-in estimate with Q's weights attached to both sides.

#ifndef GIB_OBJECTIVES_HPP_
#define GIB_OBJECTIVES_HPP_

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gib/estimators.hpp"

namespace gib {

enum class ObjectiveKind { kIB, kGIB, kSVW };

inline std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::kIB: return "IB";
    case ObjectiveKind::kGIB: return "GIB";
    case ObjectiveKind::kSVW: return "SVW";
  }
  return "?";
}

inline ObjectiveKind parse_objective(const std::string& s) {
  if (s == "IB") return ObjectiveKind::kIB;
  if (s == "GIB") return ObjectiveKind::kGIB;
  if (s == "SVW") return ObjectiveKind::kSVW;
  throw InvalidArgument("unknown objective '" + s + "' (expected IB, GIB or SVW)");
}

/// (I(X^{-i}; target), I(X^i; target)) for one feature.
struct FeatureTerms {
  double leave_one_out = 0.0;
  double single = 0.0;

  friend bool operator==(const FeatureTerms&, const FeatureTerms&) = default;
};

struct ObjectiveReport {
  ObjectiveKind kind = ObjectiveKind::kIB;
  double prediction_term = 0.0;
  double complexity_term = 0.0;  // without the 1/beta factor
  double beta = 1.0;
  double objective_value = 0.0;
  std::vector<FeatureTerms> per_feature_terms;  // empty for IB
  int mi_evaluations = 0;
};

/// prediction - complexity / beta; the complexity contribution vanishes at beta = inf.
inline double objective_value(double prediction, double complexity, double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (std::isinf(beta)) return prediction;
  return prediction - complexity / beta;
}

struct PmiWeightedJoint {
  DiscreteView pair_view;  // carries `weights`
  Weights weights;
  std::vector<double> raw_ratios;
};

/// Q(Z, Y): pair symbols of (z, y) with per-sample weights proportional to
/// the empirical ratio p(z,y) / (p(z) p(y)).
inline PmiWeightedJoint pmi_reweight(const DiscreteView& z, const DiscreteView& y) {
  if (z.size() != y.size()) throw InvalidArgument("pmi_reweight: length mismatch");
  if (z.weighted() || y.weighted()) throw InvalidArgument("pmi_reweight: inputs must be unweighted");
  if (z.size() == 0) throw InvalidArgument("pmi_reweight: empty input");
  PmiWeightedJoint q;
  q.pair_view = joint_of(z, y);
  std::vector<std::uint64_t> cz(z.alphabet_size, 0), cy(y.alphabet_size, 0), cp(q.pair_view.alphabet_size, 0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    ++cz[z.symbols[i]];
    ++cy[y.symbols[i]];
    ++cp[q.pair_view.symbols[i]];
  }
  const double n = static_cast<double>(z.size());
  q.raw_ratios.resize(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double joint = static_cast<double>(cp[q.pair_view.symbols[i]]) * n;
    const double prod = static_cast<double>(cz[z.symbols[i]]) * static_cast<double>(cy[y.symbols[i]]);
    q.raw_ratios[i] = joint / prod;
    total += q.raw_ratios[i];
  }
  std::vector<double> w(z.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = q.raw_ratios[i] / total;
  q.weights = make_weights(std::move(w));
  q.pair_view = with_weights(std::move(q.pair_view), q.weights);
  return q;
}

namespace detail {

struct SynergyParts {
  double whole = 0.0;
  std::vector<FeatureTerms> features;
  int evaluations = 0;
};

/// I(X; target) plus per-feature leave-one-out and single-feature terms,
/// every view carrying the target's weights.
inline SynergyParts synergy_parts(const IntMatrix& x_columns, const DiscreteView& target, bool leave_one_out) {
  if (static_cast<std::size_t>(x_columns.rows()) != target.size())
    throw InvalidArgument("feature matrix has " + std::to_string(x_columns.rows()) + " rows but target has " +
                          std::to_string(target.size()) + " samples");
  SynergyParts parts;
  auto weighted = [&](DiscreteView v) {
    v.weights = target.weights;
    return v;
  };
  parts.whole = mutual_information(weighted(joint_view(x_columns)), target);
  ++parts.evaluations;
  const auto n = static_cast<std::size_t>(x_columns.cols());
  parts.features.resize(n);
  std::vector<DiscreteView> loo;
  if (leave_one_out) loo = leave_one_out_views(x_columns);
  for (std::size_t i = 0; i < n; ++i) {
    if (leave_one_out) {
      parts.features[i].leave_one_out = mutual_information(weighted(std::move(loo[i])), target);
      ++parts.evaluations;
    }
    const int col = static_cast<int>(i);
    parts.features[i].single = mutual_information(weighted(joint_view(x_columns, std::span<const int>(&col, 1))), target);
    ++parts.evaluations;
  }
  return parts;
}

}  // namespace detail

struct SynergyReport {
  double synergy = 0.0;
  double whole = 0.0;  // I(X; T)
  std::vector<FeatureTerms> per_feature_terms;
  int mi_evaluations = 0;
};

/// Syn(X -> T) = I(X;T) - (1/N) sum_i [I(X^{-i};T) + I(X^i;T)].
inline SynergyReport feature_synergy(const IntMatrix& x_columns, const DiscreteView& target) {
  if (x_columns.cols() < 2) throw InvalidArgument("feature_synergy: needs at least 2 features");
  auto parts = detail::synergy_parts(x_columns, target, true);
  double sum = 0.0;
  for (const auto& f : parts.features) sum += f.leave_one_out + f.single;
  SynergyReport r;
  r.whole = parts.whole;
  r.synergy = parts.whole - sum / static_cast<double>(x_columns.cols());
  r.per_feature_terms = std::move(parts.features);
  r.mi_evaluations = parts.evaluations;
  return r;
}

/// Generalized IB terms. Prediction is I(X; Q); complexity is
/// (1/2N) sum_i [I(X^{-i}; Q) + I(X^i; Q)]. Costs exactly 2N + 1 MI estimates.
inline ObjectiveReport gib_terms(const IntMatrix& x_columns, const DiscreteView& z, const DiscreteView& y,
                                 double beta = 1.0) {
  if (x_columns.cols() < 2) throw InvalidArgument("gib_terms: needs at least 2 input features");
  const PmiWeightedJoint q = pmi_reweight(z, y);
  auto parts = detail::synergy_parts(x_columns, q.pair_view, true);
  double sum = 0.0;
  for (const auto& f : parts.features) sum += f.leave_one_out + f.single;
  ObjectiveReport r;
  r.kind = ObjectiveKind::kGIB;
  r.prediction_term = parts.whole;
  r.complexity_term = sum / (2.0 * static_cast<double>(x_columns.cols()));
  r.beta = beta;
  r.objective_value = objective_value(r.prediction_term, r.complexity_term, beta);
  r.per_feature_terms = std::move(parts.features);
  r.mi_evaluations = parts.evaluations;
  return r;
}

/// Sum-versus-whole terms: complexity is the plain sum of I(X^i; Q).
inline ObjectiveReport svw_terms(const IntMatrix& x_columns, const DiscreteView& z, const DiscreteView& y,
                                 double beta = 1.0) {
  if (x_columns.cols() < 1) throw InvalidArgument("svw_terms: needs at least 1 input feature");
  const PmiWeightedJoint q = pmi_reweight(z, y);
  auto parts = detail::synergy_parts(x_columns, q.pair_view, false);
  double sum = 0.0;
  for (const auto& f : parts.features) sum += f.single;
  ObjectiveReport r;
  r.kind = ObjectiveKind::kSVW;
  r.prediction_term = parts.whole;
  r.complexity_term = sum;
  r.beta = beta;
  r.objective_value = objective_value(r.prediction_term, r.complexity_term, beta);
  r.per_feature_terms = std::move(parts.features);
  r.mi_evaluations = parts.evaluations;
  return r;
}

/// Standard IB terms: prediction I(T;Y), complexity I(X;T).
inline ObjectiveReport ib_terms(const DiscreteView& x, const DiscreteView& t, const DiscreteView& y, double beta = 1.0) {
  if (x.size() != t.size() || t.size() != y.size()) throw InvalidArgument("ib_terms: length mismatch");
  ObjectiveReport r;
  r.kind = ObjectiveKind::kIB;
  r.prediction_term = mutual_information(t, y);
  r.complexity_term = mutual_information(x, t);
  r.beta = beta;
  r.objective_value = objective_value(r.prediction_term, r.complexity_term, beta);
  r.mi_evaluations = 2;
  return r;
}

// ---------------------------------------------------------------------------
// IB <= GIB under perfect, deterministic prediction

struct Theorem1Check {
  double lhs = 0.0;  // I(T;Y) - I(X;T)/beta with T = Z
  double rhs = 0.0;  // GIB objective
  bool holds = false;
  ObjectiveReport ib;
  ObjectiveReport gib;
};

inline constexpr double kTheorem1Tolerance = 1e-9;

namespace detail {

inline void require_perfect_deterministic(const IntMatrix& x_columns, std::span<const int> z, std::span<const int> y) {
  const auto n = static_cast<std::size_t>(x_columns.rows());
  if (z.size() != n || y.size() != n) throw InvalidArgument("theorem check: length mismatch");
  for (std::size_t i = 0; i < n; ++i)
    if (z[i] != y[i])
      throw InvalidArgument("theorem check: hypothesis violated, prediction differs from label at sample " +
                            std::to_string(i));
  const DiscreteView xv = joint_view(x_columns);
  std::vector<int> seen(xv.alphabet_size, 0);
  std::vector<bool> set(xv.alphabet_size, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = xv.symbols[i];
    if (!set[s]) {
      set[s] = true;
      seen[s] = z[i];
    } else if (seen[s] != z[i]) {
      throw InvalidArgument("theorem check: hypothesis violated, prediction is not a function of the input at sample " +
                            std::to_string(i));
    }
  }
}

}  // namespace detail

/// Evaluates both sides of IB <= GIB on a finite instance where the
/// predictor is deterministic and perfectly accurate (z = y).
inline Theorem1Check check_theorem1(const IntMatrix& x_columns, std::span<const int> z, std::span<const int> y,
                                    double beta) {
  detail::require_perfect_deterministic(x_columns, z, y);
  const DiscreteView xv = joint_view(x_columns);
  const DiscreteView zv = view_of(z);
  const DiscreteView yv = view_of(y);
  Theorem1Check c;
  c.ib = ib_terms(xv, zv, yv, beta);
  c.gib = gib_terms(x_columns, zv, yv, beta);
  c.lhs = c.ib.objective_value;
  c.rhs = c.gib.objective_value;
  c.holds = c.lhs <= c.rhs + kTheorem1Tolerance;
  return c;
}

struct SufficiencyCheck {
  double i_x_q = 0.0;  // I(X; Q), the beta = inf GIB objective
  double i_x_y = 0.0;  // I(X; Y) measured under Q's weights
  bool holds = false;
};

/// beta = inf bound I(X;Q) <= I(X;Y). Both sides use Q's sample weights so
/// they are estimates under one measure.
inline SufficiencyCheck check_sufficiency(const IntMatrix& x_columns, const DiscreteView& z, const DiscreteView& y) {
  const PmiWeightedJoint q = pmi_reweight(z, y);
  DiscreteView xv = joint_view(x_columns);
  xv.weights = q.weights;
  DiscreteView yw = y;
  yw.weights = q.weights;
  SufficiencyCheck s;
  s.i_x_q = mutual_information(xv, q.pair_view);
  s.i_x_y = mutual_information(xv, yw);
  s.holds = s.i_x_q <= s.i_x_y + kTheorem1Tolerance;
  return s;
}

}  // namespace gib

#endif  // GIB_OBJECTIVES_HPP_
