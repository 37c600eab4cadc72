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

#include "fdpp/numgrad/mlp.h"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace fdpp::numgrad {
namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;
using MutRowMajorMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>;

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void apply_activation(Activation act, const Eigen::MatrixXd& z,
                      Eigen::MatrixXd& out) {
  switch (act) {
    case Activation::kTanh:
      out = z.array().tanh().matrix();
      return;
    case Activation::kRelu:
      out = z.cwiseMax(0.0);
      return;
    case Activation::kGelu:
      out = z.unaryExpr([](double v) { return activate(Activation::kGelu, v); });
      return;
  }
}

}  // namespace

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kGelu: return "gelu";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "gelu") return Activation::kGelu;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

int MlpSpec::layer_input_dim(int layer) const {
  return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

int MlpSpec::layer_output_dim(int layer) const {
  return layer == num_layers() - 1 ? output_dim : hidden_dims[layer];
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < num_layers(); ++l) {
    n += static_cast<std::size_t>(layer_output_dim(l)) *
         (static_cast<std::size_t>(layer_input_dim(l)) + 1);
  }
  return n;
}

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw std::invalid_argument("MLP input/output dims must be >= 1");
  }
  for (int h : hidden_dims) {
    if (h < 1) throw std::invalid_argument("MLP hidden dims must be >= 1");
  }
}

nlohmann::ordered_json to_json(const MlpSpec& spec) {
  return {{"input_dim", spec.input_dim},
          {"hidden_dims", spec.hidden_dims},
          {"output_dim", spec.output_dim},
          {"activation", to_string(spec.activation)}};
}

MlpSpec mlp_spec_from_json(const nlohmann::ordered_json& j) {
  MlpSpec spec;
  spec.input_dim = j.at("input_dim").get<int>();
  spec.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
  spec.output_dim = j.at("output_dim").get<int>();
  spec.activation = activation_from_string(j.at("activation").get<std::string>());
  spec.validate();
  return spec;
}

std::string weight_name(int layer) { return "l" + std::to_string(layer) + ".weight"; }
std::string bias_name(int layer) { return "l" + std::to_string(layer) + ".bias"; }

void validate_params(const MlpSpec& spec, const ParamStore& params) {
  spec.validate();
  if (params.size() != static_cast<std::size_t>(2 * spec.num_layers())) {
    std::ostringstream msg;
    msg << "MLP expects " << 2 * spec.num_layers() << " tensors, got "
        << params.size();
    throw std::invalid_argument(msg.str());
  }
  for (int l = 0; l < spec.num_layers(); ++l) {
    const std::vector<int> w_shape{spec.layer_output_dim(l), spec.layer_input_dim(l)};
    const std::vector<int> b_shape{spec.layer_output_dim(l)};
    for (const auto& [name, shape] :
         {std::pair{weight_name(l), w_shape}, std::pair{bias_name(l), b_shape}}) {
      if (!params.contains(name)) {
        throw std::invalid_argument("missing tensor '" + name + "'");
      }
      if (params.at(name).shape != shape) {
        std::ostringstream msg;
        msg << "tensor '" << name << "' has shape [";
        for (int d : params.at(name).shape) msg << d << ",";
        msg << "] but the spec requires [" << shape[0]
            << (shape.size() > 1 ? "," + std::to_string(shape[1]) : "") << "]";
        throw std::invalid_argument(msg.str());
      }
    }
  }
}

ParamStore init_params(const MlpSpec& spec, std::mt19937_64& rng,
                       bool zero_final_layer) {
  spec.validate();
  ParamStore params;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int out = spec.layer_output_dim(l);
    const int in = spec.layer_input_dim(l);
    auto& w = params.add(weight_name(l), {out, in});
    params.add(bias_name(l), {out});
    if (zero_final_layer && l == spec.num_layers() - 1) continue;
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : w.data) v = dist(rng);
  }
  return params;
}

double activate(Activation activation, double z) {
  switch (activation) {
    case Activation::kTanh: return std::tanh(z);
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kGelu: return 0.5 * z * (1.0 + std::erf(z * kInvSqrt2));
  }
  return 0.0;
}

double activate_derivative(Activation activation, double z) {
  switch (activation) {
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::kGelu:
      return 0.5 * (1.0 + std::erf(z * kInvSqrt2)) +
             z * kInvSqrt2Pi * std::exp(-0.5 * z * z);
  }
  return 0.0;
}

Eigen::MatrixXd forward_batch(const MlpSpec& spec, const ParamStore& params,
                              const Eigen::MatrixXd& x, MlpTape* tape) {
  validate_params(spec, params);
  if (x.rows() != spec.input_dim) {
    std::ostringstream msg;
    msg << "MLP input has " << x.rows() << " rows, expected " << spec.input_dim;
    throw std::invalid_argument(msg.str());
  }
  if (tape) {
    tape->inputs.resize(spec.num_layers());
    tape->preactivations.resize(spec.num_layers());
  }
  Eigen::MatrixXd a = x;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const auto& w = params.at(weight_name(l));
    const auto& b = params.at(bias_name(l));
    RowMajorMap wm(w.data.data(), w.shape[0], w.shape[1]);
    Eigen::Map<const Eigen::VectorXd> bv(b.data.data(), b.shape[0]);
    Eigen::MatrixXd z = wm * a;
    z.colwise() += bv;
    const bool last = l == spec.num_layers() - 1;
    if (tape) tape->inputs[l] = a;
    if (last) {
      if (tape) tape->preactivations[l] = z;
      return z;
    }
    apply_activation(spec.activation, z, a);
    if (tape) tape->preactivations[l] = std::move(z);
  }
  return a;  // unreachable: num_layers() >= 1
}

void backward_batch(const MlpSpec& spec, const ParamStore& params,
                    const MlpTape& tape, const Eigen::MatrixXd& output_grad,
                    ParamStore& grads, Eigen::MatrixXd* input_grad) {
  if (!grads.same_layout(params)) {
    throw std::invalid_argument("gradient store does not match parameters");
  }
  if (output_grad.rows() != spec.output_dim ||
      static_cast<int>(tape.inputs.size()) != spec.num_layers() ||
      output_grad.cols() != tape.inputs.back().cols()) {
    throw std::invalid_argument("output cotangent shape does not match tape");
  }
  Eigen::MatrixXd delta = output_grad;  // d loss / d preactivation of layer l
  for (int l = spec.num_layers() - 1; l >= 0; --l) {
    if (l != spec.num_layers() - 1) {
      const Eigen::MatrixXd& z = tape.preactivations[l];
      const Activation act = spec.activation;
      delta.array() *= z.unaryExpr([act](double v) {
                          return activate_derivative(act, v);
                        }).array();
    }
    auto& gw = grads.at(weight_name(l));
    auto& gb = grads.at(bias_name(l));
    MutRowMajorMap gwm(gw.data.data(), gw.shape[0], gw.shape[1]);
    Eigen::Map<Eigen::VectorXd> gbv(gb.data.data(), gb.shape[0]);
    gwm.noalias() += delta * tape.inputs[l].transpose();
    gbv.noalias() += delta.rowwise().sum();
    if (l > 0 || input_grad) {
      const auto& w = params.at(weight_name(l));
      RowMajorMap wm(w.data.data(), w.shape[0], w.shape[1]);
      Eigen::MatrixXd next = wm.transpose() * delta;
      if (l == 0) {
        *input_grad = std::move(next);
      } else {
        delta = std::move(next);
      }
    }
  }
}

std::vector<double> mlp_forward(const MlpSpec& spec, const ParamStore& params,
                                std::span<const double> input) {
  if (static_cast<int>(input.size()) != spec.input_dim) {
    std::ostringstream msg;
    msg << "input has length " << input.size() << ", spec expects "
        << spec.input_dim;
    throw std::invalid_argument(msg.str());
  }
  Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(input.data(), input.size());
  Eigen::MatrixXd y = forward_batch(spec, params, x);
  return {y.data(), y.data() + y.size()};
}

MlpGradients mlp_backward(const MlpSpec& spec, const ParamStore& params,
                          std::span<const double> input,
                          std::span<const double> output_cotangent) {
  if (static_cast<int>(input.size()) != spec.input_dim ||
      static_cast<int>(output_cotangent.size()) != spec.output_dim) {
    std::ostringstream msg;
    msg << "mlp_backward: input length " << input.size() << " (expected "
        << spec.input_dim << "), cotangent length " << output_cotangent.size()
        << " (expected " << spec.output_dim << ")";
    throw std::invalid_argument(msg.str());
  }
  Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(input.data(), input.size());
  MlpTape tape;
  forward_batch(spec, params, x, &tape);
  MlpGradients out{params.zeros_like(), {}};
  Eigen::MatrixXd dy =
      Eigen::Map<const Eigen::VectorXd>(output_cotangent.data(), output_cotangent.size());
  Eigen::MatrixXd dx;
  backward_batch(spec, params, tape, dy, out.params, &dx);
  out.input.assign(dx.data(), dx.data() + dx.size());
  return out;
}

}  // namespace fdpp::numgrad
