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

// A small fully-connected network engine in double precision: forward and
// reverse-mode passes, SGD/Adam, MSE and cross-entropy, FGSM perturbation and
// FGSM adversarial training. Samples are rows.

#ifndef GIB_NETS_HPP_
#define GIB_NETS_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gib/common.hpp"

namespace gib {

enum class Activation { kIdentity, kSquare, kTanh, kRelu, kLeakyRelu, kSoftplus, kSwish };

struct ActivationKind {
  Activation kind = Activation::kIdentity;
  double slope = 0.01;  // leaky_relu only

  void validate() const {
    if (kind == Activation::kLeakyRelu && !(slope > 0.0 && slope < 1.0))
      throw InvalidArgument("leaky_relu slope must lie in (0, 1)");
  }
  friend bool operator==(const ActivationKind&, const ActivationKind&) = default;
};

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kSquare: return "square";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kSoftplus: return "softplus";
    case Activation::kSwish: return "swish";
  }
  return "?";
}

inline Activation parse_activation(const std::string& s) {
  for (auto a : {Activation::kIdentity, Activation::kSquare, Activation::kTanh, Activation::kRelu,
                 Activation::kLeakyRelu, Activation::kSoftplus, Activation::kSwish})
    if (to_string(a) == s) return a;
  throw InvalidArgument("unknown activation '" + s + "'");
}

namespace detail {

inline double sigmoid(double a) {
  if (a >= 0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

inline double activate(const ActivationKind& k, double a) {
  switch (k.kind) {
    case Activation::kIdentity: return a;
    case Activation::kSquare: return a * a;
    case Activation::kTanh: return std::tanh(a);
    case Activation::kRelu: return a > 0 ? a : 0.0;
    case Activation::kLeakyRelu: return a > 0 ? a : k.slope * a;
    case Activation::kSoftplus: return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a)));
    case Activation::kSwish: return a * sigmoid(a);
  }
  return a;
}

inline double activate_grad(const ActivationKind& k, double a) {
  switch (k.kind) {
    case Activation::kIdentity: return 1.0;
    case Activation::kSquare: return 2.0 * a;
    case Activation::kTanh: {
      const double t = std::tanh(a);
      return 1.0 - t * t;
    }
    case Activation::kRelu: return a > 0 ? 1.0 : 0.0;
    case Activation::kLeakyRelu: return a > 0 ? 1.0 : k.slope;
    case Activation::kSoftplus: return sigmoid(a);
    case Activation::kSwish: {
      const double s = sigmoid(a);
      return s + a * s * (1.0 - s);
    }
  }
  return 1.0;
}

}  // namespace detail

inline Matrix apply_activation(const ActivationKind& k, const Matrix& pre) {
  if (k.kind == Activation::kIdentity) return pre;
  if (k.kind == Activation::kTanh) return pre.array().tanh().matrix();
  return pre.unaryExpr([&k](double a) { return detail::activate(k, a); });
}

inline Matrix activation_grad(const ActivationKind& k, const Matrix& pre) {
  return pre.unaryExpr([&k](double a) { return detail::activate_grad(k, a); });
}

/// Row-wise softmax with max subtraction.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double m = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

enum class OutputHead { kLinear, kSoftmax };

struct DenseLayer {
  Matrix weight;  // fan_in x fan_out
  std::optional<RowVector> bias;
  ActivationKind activation;
};

struct DenseNet {
  std::vector<DenseLayer> layers;
  OutputHead output_head = OutputHead::kLinear;

  Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
  Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.cols(); }
  std::size_t hidden_count() const { return layers.empty() ? 0 : layers.size() - 1; }

  void validate() const {
    if (layers.empty()) throw InvalidArgument("DenseNet: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      L.activation.validate();
      if (l > 0 && layers[l - 1].weight.cols() != L.weight.rows())
        throw InvalidArgument("DenseNet: layer " + std::to_string(l) + " input width does not match previous output");
      if (L.bias && L.bias->size() != L.weight.cols())
        throw InvalidArgument("DenseNet: bias width mismatch in layer " + std::to_string(l));
      if (!L.weight.allFinite() || (L.bias && !L.bias->allFinite()))
        throw InvalidArgument("DenseNet: non-finite parameter in layer " + std::to_string(l));
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& L : layers) n += static_cast<std::size_t>(L.weight.size() + (L.bias ? L.bias->size() : 0));
    return n;
  }
};

struct NetSpec {
  int input_dim = 1;
  std::vector<int> hidden;
  int output_dim = 1;
  ActivationKind hidden_activation;
  OutputHead output_head = OutputHead::kLinear;
  bool bias = false;
};

/// Fan-in uniform initialization as in common deep-learning defaults: hidden
/// weights on +-sqrt(6 / ((1 + a^2) fan_in)) with negative slope a = sqrt(5),
/// the output layer on +-sqrt(1 / fan_in), biases on +-sqrt(1 / fan_in).
inline DenseNet make_dense_net(const NetSpec& spec, std::uint64_t seed) {
  if (spec.input_dim < 1 || spec.output_dim < 1) throw InvalidArgument("NetSpec: dimensions must be positive");
  for (int h : spec.hidden)
    if (h < 1) throw InvalidArgument("NetSpec: hidden widths must be positive");
  spec.hidden_activation.validate();
  Rng rng(seed);
  DenseNet net;
  net.output_head = spec.output_head;
  std::vector<int> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  dims.push_back(spec.output_dim);
  const double a2 = 5.0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const bool output = l + 2 == dims.size();
    const double fan_in = dims[l];
    const double bound = output ? std::sqrt(1.0 / fan_in) : std::sqrt(6.0 / ((1.0 + a2) * fan_in));
    DenseLayer L;
    L.weight.resize(dims[l], dims[l + 1]);
    for (Eigen::Index r = 0; r < L.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < L.weight.cols(); ++c) L.weight(r, c) = rng.uniform(-bound, bound);
    if (spec.bias) {
      RowVector b(dims[l + 1]);
      const double bb = std::sqrt(1.0 / fan_in);
      for (Eigen::Index c = 0; c < b.size(); ++c) b(c) = rng.uniform(-bb, bb);
      L.bias = std::move(b);
    }
    L.activation = output ? ActivationKind{} : spec.hidden_activation;
    net.layers.push_back(std::move(L));
  }
  return net;
}

// ---------------------------------------------------------------------------
// Forward pass

struct ForwardResult {
  Matrix logits;                // final layer output before the head
  Matrix outputs;               // after the head (softmax or identity)
  std::vector<Matrix> hidden;   // post-activation of every hidden layer
};

namespace detail {

struct Trace {
  std::vector<Matrix> inputs;  // input of layer l
  std::vector<Matrix> pre;     // pre-activation of layer l
  Matrix logits;
};

inline Trace run_forward(const DenseNet& net, const Matrix& x) {
  if (x.cols() != net.input_dim())
    throw InvalidArgument("forward: input width " + std::to_string(x.cols()) + " does not match network input " +
                          std::to_string(net.input_dim()));
  Trace t;
  t.inputs.reserve(net.layers.size());
  t.pre.reserve(net.layers.size());
  Matrix h = x;
  for (const auto& L : net.layers) {
    Matrix a = h * L.weight;
    if (L.bias) a.rowwise() += *L.bias;
    t.inputs.push_back(std::move(h));
    h = apply_activation(L.activation, a);
    t.pre.push_back(std::move(a));
  }
  t.logits = std::move(h);
  return t;
}

}  // namespace detail

inline ForwardResult forward(const DenseNet& net, const Matrix& x) {
  auto t = detail::run_forward(net, x);
  ForwardResult r;
  for (std::size_t l = 1; l < t.inputs.size(); ++l) r.hidden.push_back(std::move(t.inputs[l]));
  r.outputs = net.output_head == OutputHead::kSoftmax ? softmax_rows(t.logits) : t.logits;
  r.logits = std::move(t.logits);
  return r;
}

// ---------------------------------------------------------------------------
// Losses and gradients

enum class LossKind { kMse, kCrossEntropy };

inline std::string to_string(LossKind k) { return k == LossKind::kMse ? "mse" : "cross_entropy"; }
inline LossKind parse_loss(const std::string& s) {
  if (s == "mse") return LossKind::kMse;
  if (s == "cross_entropy") return LossKind::kCrossEntropy;
  throw InvalidArgument("unknown loss '" + s + "'");
}

/// One-hot rows for class labels in [0, n_classes).
inline Matrix one_hot(std::span<const int> labels, int n_classes) {
  Matrix t = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) throw InvalidArgument("label out of range");
    t(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return t;
}

namespace detail {

inline Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    const double lse = m + std::log((out.row(r).array() - m).exp().sum());
    out.row(r).array() -= lse;
  }
  return out;
}

}  // namespace detail

/// MSE is the mean over all output entries; cross-entropy (nats) treats the
/// final layer output as logits and averages over samples.
inline double loss_value(const DenseNet& net, const Matrix& logits, const Matrix& targets, LossKind loss) {
  const double n = static_cast<double>(logits.rows());
  if (loss == LossKind::kCrossEntropy) return -(targets.array() * detail::log_softmax_rows(logits).array()).sum() / n;
  const Matrix out = net.output_head == OutputHead::kSoftmax ? softmax_rows(logits) : logits;
  return (out - targets).squaredNorm() / static_cast<double>(out.size());
}

inline double evaluate_loss(const DenseNet& net, const Matrix& x, const Matrix& targets, LossKind loss) {
  return loss_value(net, detail::run_forward(net, x).logits, targets, loss);
}

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<RowVector> bias;  // size-0 entries for bias-free layers
  Matrix input;                 // filled only on request
  double loss = 0.0;
};

/// Reverse-mode gradients of the mean loss. Throws NumericalFailure when the
/// loss or any gradient is non-finite.
inline Gradients gradients(const DenseNet& net, const Matrix& x, const Matrix& targets, LossKind loss,
                           bool want_input_grad = false) {
  auto t = detail::run_forward(net, x);
  if (targets.rows() != t.logits.rows() || targets.cols() != t.logits.cols())
    throw InvalidArgument("gradients: target shape does not match network output");
  const double n = static_cast<double>(t.logits.rows());
  Gradients g;
  Matrix delta;  // dL/dlogits
  if (loss == LossKind::kCrossEntropy) {
    const Matrix logp = detail::log_softmax_rows(t.logits);
    g.loss = -(targets.array() * logp.array()).sum() / n;
    // Targets are rows of a distribution (one-hot or soft), so d/dlogits = (p * rowsum(t) - t) / n.
    const Matrix p = logp.array().exp().matrix();
    delta = (p.array().colwise() * targets.rowwise().sum().array() - targets.array()).matrix() / n;
  } else {
    const double m = static_cast<double>(t.logits.size());
    if (net.output_head == OutputHead::kSoftmax) {
      const Matrix p = softmax_rows(t.logits);
      g.loss = (p - targets).squaredNorm() / m;
      const Matrix dp = 2.0 * (p - targets) / m;
      const Eigen::VectorXd inner = (dp.array() * p.array()).rowwise().sum();
      delta = (p.array() * (dp.array().colwise() - inner.array())).matrix();
    } else {
      g.loss = (t.logits - targets).squaredNorm() / m;
      delta = 2.0 * (t.logits - targets) / m;
    }
  }
  if (!std::isfinite(g.loss)) throw NumericalFailure("non-finite loss");

  const std::size_t L = net.layers.size();
  g.weight.resize(L);
  g.bias.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    const auto& layer = net.layers[l];
    if (layer.activation.kind != Activation::kIdentity)
      delta.array() *= activation_grad(layer.activation, t.pre[l]).array();
    g.weight[l].noalias() = t.inputs[l].transpose() * delta;
    if (layer.bias) g.bias[l] = delta.colwise().sum();
    if (l > 0 || want_input_grad) delta = delta * layer.weight.transpose();
  }
  if (want_input_grad) g.input = std::move(delta);
  for (std::size_t l = 0; l < L; ++l)
    if (!g.weight[l].allFinite() || !g.bias[l].allFinite()) throw NumericalFailure("non-finite gradient");
  return g;
}

/// Smallest |pre-activation| over all non-smooth (relu, leaky_relu) layers;
/// infinity when the net has none. Finite differences are only meaningful
/// when this stays well above the step size.
inline double min_abs_kink_distance(const DenseNet& net, const Matrix& x) {
  const auto t = detail::run_forward(net, x);
  double m = kInfinity;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto k = net.layers[l].activation.kind;
    if (k == Activation::kRelu || k == Activation::kLeakyRelu) m = std::min(m, t.pre[l].cwiseAbs().minCoeff());
  }
  return m;
}

struct GradientCheckResult {
  double max_rel_error = 0.0;
  int coordinates = 0;
};

/// Compares analytic parameter gradients with central differences at
/// `n_coords` randomly chosen parameter coordinates. Relative error is
/// |a - n| / max(|a|, |n|, floor) so coordinates with vanishing gradient
/// fall back to an absolute comparison. The default step trades truncation
/// error against cancellation on gradients near 1e-7; keep test points at
/// least 1e-2 from any kink.
inline GradientCheckResult gradient_check(const DenseNet& net, const Matrix& x, const Matrix& targets, LossKind loss,
                                          int n_coords, std::uint64_t seed, double step = 1e-4,
                                          double floor = 1e-7) {
  const Gradients g = gradients(net, x, targets, loss);
  Rng rng(seed);
  GradientCheckResult r;
  const std::size_t total = net.parameter_count();
  for (int k = 0; k < n_coords; ++k) {
    std::size_t idx = rng.below(total);
    std::size_t l = 0;
    for (;; ++l) {
      const auto& L = net.layers[l];
      const auto size = static_cast<std::size_t>(L.weight.size() + (L.bias ? L.bias->size() : 0));
      if (idx < size) break;
      idx -= size;
    }
    DenseNet probe = net;
    auto& L = probe.layers[l];
    const bool is_weight = idx < static_cast<std::size_t>(L.weight.size());
    double* param = is_weight ? L.weight.data() + idx : L.bias->data() + (idx - static_cast<std::size_t>(L.weight.size()));
    const double analytic = is_weight ? g.weight[l].data()[idx]
                                      : g.bias[l].data()[idx - static_cast<std::size_t>(L.weight.size())];
    const double orig = *param;
    *param = orig + step;
    const double up = evaluate_loss(probe, x, targets, loss);
    *param = orig - step;
    const double down = evaluate_loss(probe, x, targets, loss);
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / denom);
    ++r.coordinates;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Training

enum class OptimizerKind { kSgd, kAdam };

struct TrainSpec {
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double lr = 0.01;
  int epochs = 1;
  std::size_t batch_size = 0;  // 0 = full batch
  LossKind loss = LossKind::kMse;
  std::uint64_t seed = 0;
  /// Early stop when the relative loss change over `plateau_window` epochs is
  /// below `plateau_rel_tol`. Disabled when the window is 0.
  int plateau_window = 0;
  double plateau_rel_tol = 1e-4;

  void validate() const {
    if (!(lr > 0.0)) throw InvalidArgument("TrainSpec: lr must be positive");
    if (epochs < 1) throw InvalidArgument("TrainSpec: epochs must be >= 1");
  }
};

struct AttackSpec {
  double epsilon = 0.0;
  bool clip = true;  // clip to [0, 1]

  void validate() const {
    if (!(epsilon >= 0.0)) throw InvalidArgument("AttackSpec: epsilon must be non-negative");
  }
};

struct ProbeSchedule {
  std::vector<int> epochs;  // sorted, each in [0, spec.epochs]
  int hidden_layer = -1;    // -1 selects the last hidden layer

  static ProbeSchedule every(int k, int total_epochs, int hidden_layer = -1) {
    if (k < 1) throw InvalidArgument("probe interval must be >= 1");
    ProbeSchedule p;
    p.hidden_layer = hidden_layer;
    for (int e = k; e <= total_epochs; e += k) p.epochs.push_back(e);
    return p;
  }
};

struct ProbeSnapshot {
  int epoch = 0;
  Matrix logits;  // on the training inputs
  Matrix hidden;  // designated hidden layer on the training inputs
  double train_loss = 0.0;
  double test_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainData {
  Matrix x;
  Matrix targets;
};

struct TrainResult {
  DenseNet net;
  std::vector<ProbeSnapshot> snapshots;
  std::vector<double> loss_history;  // one entry per completed epoch
  bool diverged = false;
  std::string failure;
};

/// x + epsilon * sign(dL/dx), clipped to [0, 1] when requested.
inline Matrix fgsm_from_gradient(const Matrix& x, const Matrix& input_grad, const AttackSpec& attack) {
  attack.validate();
  Matrix adv = x;
  if (attack.epsilon == 0.0) return adv;
  for (Eigen::Index i = 0; i < adv.size(); ++i) {
    const double g = input_grad.data()[i];
    const double s = g > 0 ? 1.0 : (g < 0 ? -1.0 : 0.0);
    double v = adv.data()[i] + attack.epsilon * s;
    if (attack.clip) v = std::clamp(v, 0.0, 1.0);
    adv.data()[i] = v;
  }
  return adv;
}

inline Matrix fgsm_perturb(const DenseNet& net, const Matrix& x, const Matrix& targets, LossKind loss,
                           const AttackSpec& attack) {
  const Gradients g = gradients(net, x, targets, loss, true);
  return fgsm_from_gradient(x, g.input, attack);
}

namespace detail {

struct AdamState {
  std::vector<Matrix> mw, vw;
  std::vector<RowVector> mb, vb;
  long step = 0;
};

/// Loss and parameter gradients of one batch; with an attack, the mean of
/// clean and FGSM-perturbed losses.
inline Gradients batch_gradients(const DenseNet& net, const Matrix& x, const Matrix& t, LossKind loss,
                                 const AttackSpec* attack) {
  if (!attack) return gradients(net, x, t, loss, false);
  Gradients clean = gradients(net, x, t, loss, true);
  const Matrix adv = fgsm_from_gradient(x, clean.input, *attack);
  const Gradients advg = gradients(net, adv, t, loss, false);
  Gradients out;
  out.loss = (clean.loss + advg.loss) / 2.0;
  out.weight.resize(clean.weight.size());
  out.bias.resize(clean.bias.size());
  for (std::size_t l = 0; l < clean.weight.size(); ++l) {
    out.weight[l] = (clean.weight[l] + advg.weight[l]) / 2.0;
    out.bias[l] = (clean.bias[l] + advg.bias[l]) / 2.0;
  }
  return out;
}

inline double objective_loss(const DenseNet& net, const Matrix& x, const Matrix& t, LossKind loss,
                             const AttackSpec* attack) {
  if (!attack) return evaluate_loss(net, x, t, loss);
  return batch_gradients(net, x, t, loss, attack).loss;
}

inline void apply_update(DenseNet& net, const Gradients& g, const TrainSpec& spec, AdamState& adam) {
  if (spec.optimizer == OptimizerKind::kSgd) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      net.layers[l].weight -= spec.lr * g.weight[l];
      if (net.layers[l].bias) *net.layers[l].bias -= spec.lr * g.bias[l];
    }
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (adam.mw.empty()) {
    for (const auto& L : net.layers) {
      adam.mw.push_back(Matrix::Zero(L.weight.rows(), L.weight.cols()));
      adam.vw.push_back(Matrix::Zero(L.weight.rows(), L.weight.cols()));
      const Eigen::Index nb = L.bias ? L.bias->size() : 0;
      adam.mb.push_back(RowVector::Zero(nb));
      adam.vb.push_back(RowVector::Zero(nb));
    }
  }
  ++adam.step;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.step));
  auto step = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    param.array() -= spec.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    step(net.layers[l].weight, adam.mw[l], adam.vw[l], g.weight[l]);
    if (net.layers[l].bias) step(*net.layers[l].bias, adam.mb[l], adam.vb[l], g.bias[l]);
  }
}

inline Matrix rows_of(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline ProbeSnapshot take_snapshot(const DenseNet& net, int epoch, const TrainData& data, const TrainData* test,
                                   const TrainSpec& spec, const AttackSpec* attack, int hidden_layer) {
  ProbeSnapshot s;
  s.epoch = epoch;
  auto fr = forward(net, data.x);
  s.logits = std::move(fr.logits);
  if (!fr.hidden.empty()) {
    const int idx = hidden_layer < 0 ? static_cast<int>(fr.hidden.size()) - 1 : hidden_layer;
    if (idx >= static_cast<int>(fr.hidden.size())) throw InvalidArgument("probe hidden layer index out of range");
    s.hidden = std::move(fr.hidden[static_cast<std::size_t>(idx)]);
  }
  s.train_loss = objective_loss(net, data.x, data.targets, spec.loss, attack);
  if (test) s.test_loss = evaluate_loss(net, test->x, test->targets, spec.loss);
  return s;
}

inline TrainResult train_impl(DenseNet net, const TrainData& data, const TrainSpec& spec, const ProbeSchedule& probes,
                              const TrainData* test, const AttackSpec* attack) {
  spec.validate();
  net.validate();
  if (attack) attack->validate();
  if (data.x.rows() != data.targets.rows()) throw InvalidArgument("train: inputs and targets differ in length");
  if (!std::is_sorted(probes.epochs.begin(), probes.epochs.end()))
    throw InvalidArgument("train: probe epochs must be sorted");

  TrainResult result;
  AdamState adam;
  Rng shuffle_rng(spec.seed ^ 0x5bd1e995ULL);
  const auto n = static_cast<std::size_t>(data.x.rows());
  const std::size_t batch = spec.batch_size == 0 || spec.batch_size > n ? n : spec.batch_size;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto probe_it = probes.epochs.begin();

  try {
    while (probe_it != probes.epochs.end() && *probe_it == 0) {
      result.snapshots.push_back(take_snapshot(net, 0, data, test, spec, attack, probes.hidden_layer));
      ++probe_it;
    }
    for (int epoch = 1; epoch <= spec.epochs; ++epoch) {
      double epoch_loss = 0.0;
      if (batch == n) {
        const Gradients g = batch_gradients(net, data.x, data.targets, spec.loss, attack);
        epoch_loss = g.loss;
        apply_update(net, g, spec, adam);
      } else {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        for (std::size_t start = 0; start < n; start += batch) {
          const std::size_t len = std::min(batch, n - start);
          const std::span<const std::size_t> idx(order.data() + start, len);
          const Gradients g =
              batch_gradients(net, rows_of(data.x, idx), rows_of(data.targets, idx), spec.loss, attack);
          epoch_loss += g.loss * static_cast<double>(len) / static_cast<double>(n);
          apply_update(net, g, spec, adam);
        }
      }
      result.loss_history.push_back(epoch_loss);
      for (const auto& L : net.layers)
        if (!L.weight.allFinite() || (L.bias && !L.bias->allFinite())) throw NumericalFailure("non-finite parameters");
      while (probe_it != probes.epochs.end() && *probe_it == epoch) {
        result.snapshots.push_back(take_snapshot(net, epoch, data, test, spec, attack, probes.hidden_layer));
        if (!std::isfinite(result.snapshots.back().train_loss)) throw NumericalFailure("non-finite loss");
        ++probe_it;
      }
      if (spec.plateau_window > 0 && epoch > spec.plateau_window) {
        const double then = result.loss_history[static_cast<std::size_t>(epoch - 1 - spec.plateau_window)];
        if (std::abs(then - epoch_loss) <= spec.plateau_rel_tol * std::abs(then)) break;
      }
    }
  } catch (const NumericalFailure& e) {
    result.diverged = true;
    result.failure = std::string("training diverged at epoch ") + std::to_string(result.loss_history.size() + 1) +
                     ": " + e.what();
  }
  result.net = std::move(net);
  return result;
}

}  // namespace detail

/// Trains a copy of `net`. Divergence does not throw: the result is flagged
/// and keeps the loss history and snapshots gathered so far.
inline TrainResult train(DenseNet net, const TrainData& data, const TrainSpec& spec, const ProbeSchedule& probes = {},
                         const TrainData* test = nullptr) {
  return detail::train_impl(std::move(net), data, spec, probes, test, nullptr);
}

/// Training on (clean loss + FGSM loss) / 2, perturbing every example of each batch.
inline TrainResult adversarial_train(DenseNet net, const TrainData& data, const TrainSpec& spec,
                                     const AttackSpec& attack, const ProbeSchedule& probes = {},
                                     const TrainData* test = nullptr) {
  return detail::train_impl(std::move(net), data, spec, probes, test, &attack);
}

}  // namespace gib

#endif  // GIB_NETS_HPP_
