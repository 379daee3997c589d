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

#ifndef GIB_LOSS_COMPARISON_HPP_
#define GIB_LOSS_COMPARISON_HPP_

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gib/estimators.hpp"
#include "gib/nets.hpp"

namespace gib {

/// Recipe for the auxiliary classifier. The epoch budget comes from `train`;
/// training also stops once the loss plateaus.
struct LossComparisonConfig {
  std::vector<int> hidden;  // empty = softmax regression
  ActivationKind activation{Activation::kTanh};
  bool bias = true;
  TrainSpec train{OptimizerKind::kAdam, 0.05, 3000, 0, LossKind::kCrossEntropy, 0, 50, 1e-4};
  std::uint64_t init_seed = 0;
};

struct LossComparisonResult {
  std::optional<double> mi_bits;  // empty when the auxiliary model diverged
  double label_entropy = 0.0;
  double cross_entropy_bits = 0.0;
  int epochs_run = 0;
  std::string failure;
};

/// I(X;Y) ~ H(Y) - CE, where CE is the converged mean cross-entropy (bits) of
/// a classifier predicting y from x. Clamped to [0, H(Y)].
inline LossComparisonResult loss_comparison_mi(const SampleMatrix& x, std::span<const int> y, int n_classes,
                                               const LossComparisonConfig& cfg = {}) {
  x.validate();
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw InvalidArgument("loss_comparison_mi: length mismatch");
  for (int label : y)
    if (label < 0 || label >= n_classes) throw InvalidArgument("loss_comparison_mi: label out of range");
  LossComparisonResult r;
  r.label_entropy = entropy(view_of(y));
  if (r.label_entropy == 0.0) {
    r.mi_bits = 0.0;
    return r;
  }
  NetSpec ns;
  ns.input_dim = static_cast<int>(x.cols());
  ns.hidden = cfg.hidden;
  ns.output_dim = n_classes;
  ns.hidden_activation = cfg.activation;
  ns.output_head = OutputHead::kSoftmax;
  ns.bias = cfg.bias;
  TrainSpec spec = cfg.train;
  spec.loss = LossKind::kCrossEntropy;
  const TrainData data{x.values, one_hot(y, n_classes)};
  const TrainResult tr = train(make_dense_net(ns, cfg.init_seed), data, spec);
  r.epochs_run = static_cast<int>(tr.loss_history.size());
  if (tr.diverged) {
    r.failure = tr.failure;
    return r;
  }
  const double ce_nats = evaluate_loss(tr.net, data.x, data.targets, LossKind::kCrossEntropy);
  if (!std::isfinite(ce_nats)) {
    r.failure = "auxiliary model produced a non-finite loss";
    return r;
  }
  r.cross_entropy_bits = ce_nats / std::numbers::ln2;
  r.mi_bits = std::clamp(r.label_entropy - r.cross_entropy_bits, 0.0, r.label_entropy);
  return r;
}

/// One-hot encodes each column of a discrete matrix (values relabeled per column).
inline SampleMatrix one_hot_columns(const IntMatrix& discrete) {
  std::vector<DiscreteView> views;
  Eigen::Index width = 0;
  for (Eigen::Index c = 0; c < discrete.cols(); ++c) {
    const auto col = detail::column(discrete, c);
    views.push_back(view_of(col));
    width += views.back().alphabet_size;
  }
  Matrix m = Matrix::Zero(discrete.rows(), width);
  std::vector<std::string> names;
  Eigen::Index offset = 0;
  for (std::size_t c = 0; c < views.size(); ++c) {
    for (std::uint32_t k = 0; k < views[c].alphabet_size; ++k)
      names.push_back("x" + std::to_string(c) + "_" + std::to_string(k));
    for (Eigen::Index r = 0; r < discrete.rows(); ++r) m(r, offset + views[c].symbols[static_cast<std::size_t>(r)]) = 1.0;
    offset += views[c].alphabet_size;
  }
  return make_samples(std::move(m), std::move(names));
}

}  // namespace gib

#endif  // GIB_LOSS_COMPARISON_HPP_
