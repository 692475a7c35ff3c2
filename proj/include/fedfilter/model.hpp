// Copyright 2026 The fedfilter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDFILTER_MODEL_HPP_
#define FEDFILTER_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedfilter/rng.hpp"

namespace fedfilter {

// Raised when training runs into non-finite numbers.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LabeledExample {
  std::vector<double> features;
  int label = 0;
};

struct ArchMeta {
  int input_dim = 0;
  int class_count = 0;
  int hidden_dim = 0;  // 0 means the plain linear softmax model
  bool operator==(const ArchMeta&) const = default;
};

// Flat parameter vector with a designated contiguous head segment (the
// shareable last layer). For the linear model the head covers all parameters.
struct ModelState {
  ArchMeta arch;
  std::vector<double> params;
  std::size_t head_begin = 0;
  std::size_t head_end = 0;  // exclusive

  std::size_t head_size() const { return head_end - head_begin; }
  std::span<const double> head() const {
    return {params.data() + head_begin, head_size()};
  }
  std::span<double> head() { return {params.data() + head_begin, head_size()}; }
};

struct TrainConfig {
  int local_epochs = 1;
  double learning_rate = 0.1;
  bool freeze_body = false;
};

namespace detail {

inline void check_model(const ModelState& m) {
  if (m.arch.input_dim < 1 || m.arch.class_count < 2) {
    throw std::invalid_argument("model: need input_dim >= 1, class_count >= 2");
  }
  if (m.head_begin >= m.head_end || m.head_end > m.params.size()) {
    throw std::invalid_argument("model: head range empty or out of bounds");
  }
}

inline void check_example(const ModelState& m, const LabeledExample& z) {
  if (static_cast<int>(z.features.size()) != m.arch.input_dim) {
    throw std::invalid_argument("example: feature dimension mismatch");
  }
  if (z.label < 0 || z.label >= m.arch.class_count) {
    throw std::invalid_argument("example: label out of range");
  }
}

inline void check_train_config(const TrainConfig& cfg) {
  if (cfg.local_epochs < 1) {
    throw std::invalid_argument("train: local_epochs must be >= 1");
  }
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw std::invalid_argument("train: learning_rate must be finite and >= 0");
  }
}

// Numerically stable softmax, in place over logits.
inline void softmax(std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : logits) v /= sum;
}

}  // namespace detail

// Multinomial logistic regression over raw features, one weight row per
// class (no intercepts). The head covers the whole parameter vector.
inline ModelState make_linear_model(int input_dim, int class_count) {
  if (input_dim < 1 || class_count < 2) {
    throw std::invalid_argument("make_linear_model: invalid dimensions");
  }
  ModelState m;
  m.arch = {input_dim, class_count, 0};
  m.params.assign(static_cast<std::size_t>(class_count) * input_dim, 0.0);
  m.head_begin = 0;
  m.head_end = m.params.size();
  return m;
}

// Two-layer perceptron (tanh hidden layer). The head is the output layer;
// the hidden layer is randomly initialized and is what freeze_body freezes.
inline ModelState make_mlp_model(int input_dim, int class_count, int hidden_dim,
                                 Rng& rng) {
  if (input_dim < 1 || class_count < 2 || hidden_dim < 1) {
    throw std::invalid_argument("make_mlp_model: invalid dimensions");
  }
  ModelState m;
  m.arch = {input_dim, class_count, hidden_dim};
  const std::size_t body =
      static_cast<std::size_t>(hidden_dim) * input_dim;
  const std::size_t head =
      static_cast<std::size_t>(class_count) * hidden_dim;
  m.params.assign(body + head, 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (std::size_t i = 0; i < body; ++i) m.params[i] = scale * rng.normal();
  m.head_begin = body;
  m.head_end = body + head;
  return m;
}

namespace detail {

// Writes class logits into out (resized to class_count). For the MLP the
// hidden activations are also returned when `hidden` is non-null.
inline void forward(const ModelState& m, const std::vector<double>& x,
                    std::vector<double>& out, std::vector<double>* hidden) {
  const int d = m.arch.input_dim;
  const int c_count = m.arch.class_count;
  out.resize(static_cast<std::size_t>(c_count));
  if (m.arch.hidden_dim == 0) {
    for (int c = 0; c < c_count; ++c) {
      const double* w = m.params.data() + static_cast<std::size_t>(c) * d;
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += w[j] * x[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(c)] = acc;
    }
    return;
  }
  const int h = m.arch.hidden_dim;
  static thread_local std::vector<double> act;
  std::vector<double>& a = hidden ? *hidden : act;
  a.resize(static_cast<std::size_t>(h));
  for (int i = 0; i < h; ++i) {
    const double* w = m.params.data() + static_cast<std::size_t>(i) * d;
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += w[j] * x[static_cast<std::size_t>(j)];
    a[static_cast<std::size_t>(i)] = std::tanh(acc);
  }
  const double* head = m.params.data() + m.head_begin;
  for (int c = 0; c < c_count; ++c) {
    const double* w = head + static_cast<std::size_t>(c) * h;
    double acc = 0.0;
    for (int i = 0; i < h; ++i) acc += w[i] * a[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(c)] = acc;
  }
}

inline constexpr double kProbFloor = 1e-12;

}  // namespace detail

// Cross-entropy loss. Probabilities are clamped at 1e-12, so the result is
// always finite and non-negative.
inline double loss(const ModelState& m, const LabeledExample& z) {
  detail::check_model(m);
  detail::check_example(m, z);
  static thread_local std::vector<double> logits;
  detail::forward(m, z.features, logits, nullptr);
  detail::softmax(logits);
  const double p = std::max(logits[static_cast<std::size_t>(z.label)],
                            detail::kProbFloor);
  return -std::log(p);
}

inline double empirical_risk(const ModelState& m,
                             std::span<const LabeledExample> data) {
  if (data.empty()) {
    throw std::invalid_argument("empirical_risk: data must be non-empty");
  }
  double sum = 0.0;
  for (const auto& z : data) sum += loss(m, z);
  return sum / static_cast<double>(data.size());
}

// Mean gradient of the empirical risk over `data`, same layout as params.
inline std::vector<double> risk_gradient(const ModelState& m,
                                         std::span<const LabeledExample> data) {
  detail::check_model(m);
  if (data.empty()) {
    throw std::invalid_argument("risk_gradient: data must be non-empty");
  }
  const int d = m.arch.input_dim;
  const int c_count = m.arch.class_count;
  const int h = m.arch.hidden_dim;
  std::vector<double> grad(m.params.size(), 0.0);
  std::vector<double> probs;
  std::vector<double> hidden;
  for (const auto& z : data) {
    detail::check_example(m, z);
    detail::forward(m, z.features, probs, &hidden);
    detail::softmax(probs);
    if (h == 0) {
      for (int c = 0; c < c_count; ++c) {
        const double g =
            probs[static_cast<std::size_t>(c)] - (c == z.label ? 1.0 : 0.0);
        double* gw = grad.data() + static_cast<std::size_t>(c) * d;
        for (int j = 0; j < d; ++j)
          gw[j] += g * z.features[static_cast<std::size_t>(j)];
      }
    } else {
      // Output layer, then backprop through tanh.
      const double* head = m.params.data() + m.head_begin;
      double* ghead = grad.data() + m.head_begin;
      std::vector<double> dhidden(static_cast<std::size_t>(h), 0.0);
      for (int c = 0; c < c_count; ++c) {
        const double g =
            probs[static_cast<std::size_t>(c)] - (c == z.label ? 1.0 : 0.0);
        const double* w = head + static_cast<std::size_t>(c) * h;
        double* gw = ghead + static_cast<std::size_t>(c) * h;
        for (int i = 0; i < h; ++i) {
          gw[i] += g * hidden[static_cast<std::size_t>(i)];
          dhidden[static_cast<std::size_t>(i)] += g * w[i];
        }
      }
      for (int i = 0; i < h; ++i) {
        const double a = hidden[static_cast<std::size_t>(i)];
        const double g = dhidden[static_cast<std::size_t>(i)] * (1.0 - a * a);
        double* gw = grad.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j)
          gw[j] += g * z.features[static_cast<std::size_t>(j)];
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (auto& g : grad) g *= inv_n;
  return grad;
}

// Full-batch gradient descent for cfg.local_epochs passes. With freeze_body
// set, coordinates outside the head range stay bit-identical to the input.
// The rng stream is part of the interface for shuffled regimes; full-batch
// descent does not consume it.
inline ModelState train(const ModelState& m,
                        std::span<const LabeledExample> data,
                        const TrainConfig& cfg, Rng& rng) {
  (void)rng;
  detail::check_model(m);
  detail::check_train_config(cfg);
  if (data.empty()) {
    throw std::invalid_argument("train: data must be non-empty");
  }
  ModelState out = m;
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    const std::vector<double> grad = risk_gradient(out, data);
    for (double g : grad) {
      if (!std::isfinite(g)) {
        throw NumericError("train: non-finite gradient at epoch " +
                           std::to_string(epoch));
      }
    }
    const std::size_t begin = cfg.freeze_body ? out.head_begin : 0;
    const std::size_t end = cfg.freeze_body ? out.head_end : out.params.size();
    for (std::size_t i = begin; i < end; ++i) {
      out.params[i] -= cfg.learning_rate * grad[i];
    }
  }
  return out;
}

struct FitResult {
  ModelState model;
  bool converged = false;
  int epochs = 0;
};

// Full-model descent until the gradient norm drops below grad_tol or
// max_epochs passes are exhausted.
inline FitResult fit_until(const ModelState& m,
                           std::span<const LabeledExample> data,
                           double learning_rate, int max_epochs,
                           double grad_tol) {
  detail::check_model(m);
  if (data.empty()) {
    throw std::invalid_argument("fit_until: data must be non-empty");
  }
  FitResult res{m, false, 0};
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    const std::vector<double> grad = risk_gradient(res.model, data);
    double norm_sq = 0.0;
    for (double g : grad) {
      if (!std::isfinite(g)) {
        throw NumericError("fit_until: non-finite gradient");
      }
      norm_sq += g * g;
    }
    if (std::sqrt(norm_sq) < grad_tol) {
      res.converged = true;
      return res;
    }
    for (std::size_t i = 0; i < res.model.params.size(); ++i) {
      res.model.params[i] -= learning_rate * grad[i];
    }
    res.epochs = epoch + 1;
  }
  return res;
}

// after.head - before.head.
inline std::vector<double> head_delta(const ModelState& before,
                                      const ModelState& after) {
  if (before.arch != after.arch || before.head_begin != after.head_begin ||
      before.head_end != after.head_end) {
    throw std::invalid_argument("head_delta: mismatched architectures");
  }
  std::vector<double> delta(before.head_size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = after.params[after.head_begin + i] -
               before.params[before.head_begin + i];
  }
  return delta;
}

inline ModelState apply_head_delta(const ModelState& m,
                                   std::span<const double> delta) {
  if (delta.size() != m.head_size()) {
    throw std::invalid_argument("apply_head_delta: payload length mismatch");
  }
  ModelState out = m;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    out.params[out.head_begin + i] += delta[i];
  }
  return out;
}

}  // namespace fedfilter

#endif  // FEDFILTER_MODEL_HPP_
