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

#ifndef FDPP_NUMGRAD_MLP_H_
#define FDPP_NUMGRAD_MLP_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdpp/numgrad/param_store.h"
#include "json.hpp"

namespace fdpp::numgrad {

enum class Activation { kTanh, kRelu, kGelu };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& name);

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 1;
  Activation activation = Activation::kTanh;

  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
  int layer_input_dim(int layer) const;
  int layer_output_dim(int layer) const;
  std::size_t parameter_count() const;
  // Throws std::invalid_argument when any dimension is < 1.
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

nlohmann::ordered_json to_json(const MlpSpec& spec);
MlpSpec mlp_spec_from_json(const nlohmann::ordered_json& j);

std::string weight_name(int layer);
std::string bias_name(int layer);

// Throws std::invalid_argument naming the first tensor whose shape differs
// from what `spec` requires.
void validate_params(const MlpSpec& spec, const ParamStore& params);

// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases. With
// `zero_final_layer` the output layer starts at exactly zero.
ParamStore init_params(const MlpSpec& spec, std::mt19937_64& rng,
                       bool zero_final_layer = false);

double activate(Activation activation, double z);
double activate_derivative(Activation activation, double z);

// Intermediate values of a batched forward pass, one column per sample.
struct MlpTape {
  std::vector<Eigen::MatrixXd> inputs;       // input to each layer
  std::vector<Eigen::MatrixXd> preactivations;
};

// Batched evaluation: `x` is input_dim x batch, result output_dim x batch.
// Parameters are validated once per call.
Eigen::MatrixXd forward_batch(const MlpSpec& spec, const ParamStore& params,
                              const Eigen::MatrixXd& x,
                              MlpTape* tape = nullptr);

// Reverse pass for a batch. Parameter gradients are summed over the batch
// and ADDED to `grads` (which must share the layout of `params`). Returns
// the input cotangent (input_dim x batch) when `input_grad` is requested.
void backward_batch(const MlpSpec& spec, const ParamStore& params,
                    const MlpTape& tape, const Eigen::MatrixXd& output_grad,
                    ParamStore& grads, Eigen::MatrixXd* input_grad = nullptr);

std::vector<double> mlp_forward(const MlpSpec& spec, const ParamStore& params,
                                std::span<const double> input);

struct MlpGradients {
  ParamStore params;
  std::vector<double> input;
};

MlpGradients mlp_backward(const MlpSpec& spec, const ParamStore& params,
                          std::span<const double> input,
                          std::span<const double> output_cotangent);

}  // namespace fdpp::numgrad

#endif  // FDPP_NUMGRAD_MLP_H_
