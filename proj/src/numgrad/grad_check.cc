// Copyright 2026 The FDPP Authors
//
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

#include "fdpp/numgrad/grad_check.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace fdpp::numgrad {
namespace {

// With a 1e-5 step, evaluating f(x + h) and f(x - h) separately in f64 leaves
// noise of ~1e-11 |f| in the difference quotient, above the 1e-8 floor of the
// relative error for wide nets. Instead the change of every downstream
// quantity is propagated directly: activation changes come from a Taylor
// series around the unperturbed pre-activation, so no difference is formed by
// cancellation and f64 suffices for the propagation itself.

using LongVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

long double activate_long(Activation activation, long double z) {
  switch (activation) {
    case Activation::kTanh: return std::tanh(z);
    case Activation::kRelu: return z > 0 ? z : 0.0L;
    case Activation::kGelu: return 0.5L * z * (1 + std::erf(z * 0.70710678118654752440L));
  }
  return 0;
}

constexpr int kTaylorOrder = 6;
// Beyond this shift the series is not used; below it the truncation error is
// under 1e-24 for tanh and gelu.
constexpr double kTaylorRadius = 1e-3;

// f^(k)(z) / k!, k = 1..kTaylorOrder.
std::array<double, kTaylorOrder> taylor_coefficients(Activation activation, long double z) {
  std::array<long double, kTaylorOrder> d{};
  switch (activation) {
    case Activation::kTanh: {
      const long double u = std::tanh(z);
      const long double u2 = u * u;
      const long double g = 1 - u2;
      d = {g,
           -2 * u * g,
           (-2 + 6 * u2) * g,
           (16 * u - 24 * u * u2) * g,
           (16 - 120 * u2 + 120 * u2 * u2) * g,
           (-272 * u + 960 * u * u2 - 720 * u * u2 * u2) * g};
      break;
    }
    case Activation::kGelu: {
      // gelu = z Phi(z); higher derivatives are the normal pdf times a
      // polynomial.
      const long double phi = std::exp(-z * z / 2) * 0.39894228040143267794L;
      const long double z2 = z * z;
      d = {0.5L * (1 + std::erf(z * 0.70710678118654752440L)) + z * phi,
           phi * (2 - z2),
           phi * z * (z2 - 4),
           phi * (-z2 * z2 + 7 * z2 - 4),
           phi * z * (z2 * z2 - 11 * z2 + 18),
           phi * (-z2 * z2 * z2 + 16 * z2 * z2 - 51 * z2 + 18)};
      break;
    }
    case Activation::kRelu:
      break;  // relu changes are evaluated directly
  }
  std::array<double, kTaylorOrder> out{};
  long double factorial = 1;
  for (int k = 0; k < kTaylorOrder; ++k) {
    factorial *= k + 1;
    out[k] = static_cast<double>(d[k] / factorial);
  }
  return out;
}

struct Linearization {
  Activation activation = Activation::kTanh;
  std::vector<RowMajorMatrix> weights;
  std::vector<Eigen::VectorXd> inputs;       // per layer
  std::vector<LongVec> preactivations;       // per layer, extended precision
  std::vector<std::vector<std::array<double, kTaylorOrder>>> taylor;  // per hidden unit
  Eigen::RowVectorXd output_weight_sums;
};

// act(z + d) - act(z) for hidden unit `unit` of `layer`.
double activation_change(const Linearization& net, int layer, int unit, double d) {
  if (net.activation == Activation::kRelu || std::abs(d) >= kTaylorRadius) {
    const long double z = net.preactivations[layer](unit);
    return static_cast<double>(activate_long(net.activation, z + d) -
                               activate_long(net.activation, z));
  }
  const auto& c = net.taylor[layer][unit];
  double acc = c[kTaylorOrder - 1];
  for (int k = kTaylorOrder - 2; k >= 0; --k) acc = acc * d + c[k];
  return acc * d;
}

Linearization linearize(const MlpSpec& spec, const ParamStore& params,
                        std::span<const double> input) {
  Linearization net;
  net.activation = spec.activation;
  LongVec cur = Eigen::Map<const Eigen::VectorXd>(input.data(), input.size()).cast<long double>();
  for (int l = 0; l < spec.num_layers(); ++l) {
    const auto& w = params.at(weight_name(l));
    const auto& b = params.at(bias_name(l));
    net.weights.emplace_back(
        Eigen::Map<const RowMajorMatrix>(w.data.data(), w.shape[0], w.shape[1]));
    net.inputs.push_back(cur.cast<double>());
    const LongVec z =
        net.weights.back().cast<long double>() * cur +
        Eigen::Map<const Eigen::VectorXd>(b.data.data(), b.shape[0]).cast<long double>();
    net.preactivations.push_back(z);
    if (l + 1 < spec.num_layers()) {
      cur = z.unaryExpr([&](long double v) { return activate_long(spec.activation, v); });
      auto& coeffs = net.taylor.emplace_back();
      for (Eigen::Index r = 0; r < z.size(); ++r) {
        coeffs.push_back(taylor_coefficients(spec.activation, z(r)));
      }
    }
  }
  net.output_weight_sums = net.weights.back().colwise().sum();
  return net;
}

// Change of the objective sum(output) for each entry of `shifts` added to
// pre-activation `unit` of `layer`, all other parameters fixed.
Eigen::RowVectorXd objective_change(const Linearization& net, int layer, int unit,
                                    const Eigen::VectorXd& shifts) {
  const int last = static_cast<int>(net.weights.size()) - 1;
  if (layer == last) return shifts.transpose();
  const Eigen::Index cols = shifts.size();
  Eigen::RowVectorXd act(cols);
  for (Eigen::Index c = 0; c < cols; ++c) act(c) = activation_change(net, layer, unit, shifts(c));
  if (layer + 1 == last) return net.output_weight_sums(unit) * act;
  // One input of the next layer moved, so its pre-activations change by a
  // rank-one term.
  Eigen::MatrixXd pre = net.weights[layer + 1].col(unit) * act;
  for (int l = layer + 1;; ++l) {
    Eigen::MatrixXd post(pre.rows(), cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < pre.rows(); ++r) {
        post(r, c) = activation_change(net, l, static_cast<int>(r), pre(r, c));
      }
    }
    if (l + 1 == last) return net.output_weight_sums * post;
    pre = net.weights[l + 1] * post;
  }
}

}  // namespace

GradCheckResult grad_check(const MlpSpec& spec, const ParamStore& params,
                           std::span<const double> input, double tolerance,
                           const GradientHook& hook) {
  const std::vector<double> ones(spec.output_dim, 1.0);
  MlpGradients analytic = mlp_backward(spec, params, input, ones);
  if (hook) hook(analytic.params);
  const Linearization net = linearize(spec, params, input);

  const double h = kFiniteDifferenceStep;
  GradCheckResult result;
  auto consider = [&](const std::string& name, std::size_t index, double a, double n) {
    const double rel = std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n));
    if (rel > result.max_relative_error || result.worst_param.empty()) {
      result.max_relative_error = rel;
      result.worst_param = name;
      result.worst_index = index;
      result.analytic = a;
      result.numeric = n;
    }
  };

  for (int l = 0; l < spec.num_layers(); ++l) {
    const Eigen::VectorXd& a = net.inputs[l];
    const int in = static_cast<int>(a.size());
    const int out = static_cast<int>(net.preactivations[l].size());
    const auto& gw = analytic.params.at(weight_name(l)).data;
    const auto& gb = analytic.params.at(bias_name(l)).data;
    // Entries [0, in] shift by +h * a_j for W(i, j) (j == in is the bias),
    // the next in + 1 entries by the negated amount.
    Eigen::VectorXd shifts(2 * (in + 1));
    for (int j = 0; j <= in; ++j) {
      shifts(j) = j < in ? h * a(j) : h;
      shifts(in + 1 + j) = -shifts(j);
    }
    for (int i = 0; i < out; ++i) {
      const Eigen::RowVectorXd f = objective_change(net, l, i, shifts);
      for (int j = 0; j <= in; ++j) {
        const double numeric = (f(j) - f(in + 1 + j)) / (2.0 * h);
        if (j < in) {
          const std::size_t idx = static_cast<std::size_t>(i) * in + j;
          consider(weight_name(l), idx, gw[idx], numeric);
        } else {
          consider(bias_name(l), i, gb[i], numeric);
        }
      }
    }
  }
  result.passed = result.max_relative_error <= tolerance;
  return result;
}

}  // namespace fdpp::numgrad
