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

#ifndef FDPP_NUMGRAD_GRAD_CHECK_H_
#define FDPP_NUMGRAD_GRAD_CHECK_H_

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "fdpp/numgrad/mlp.h"
#include "fdpp/numgrad/param_store.h"

namespace fdpp::numgrad {

inline constexpr double kFiniteDifferenceStep = 1e-5;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;  // tensor name of the worst entry
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool passed = true;  // max_relative_error <= tolerance
};

// Lets tests tamper with the analytic gradient before comparison.
using GradientHook = std::function<void(ParamStore&)>;

// Compares reverse-mode gradients of L = sum(mlp(input)) against central
// differences with step kFiniteDifferenceStep for every parameter.
// Relative error per entry is |a - n| / max(1e-8, |a| + |n|).
//
// The perturbed objectives are evaluated in long double. Perturbing one weight
// only changes one pre-activation of its layer, so the perturbed networks are
// evaluated as batches through the remaining layers.
GradCheckResult grad_check(const MlpSpec& spec, const ParamStore& params,
                           std::span<const double> input, double tolerance,
                           const GradientHook& hook = {});

}  // namespace fdpp::numgrad

#endif  // FDPP_NUMGRAD_GRAD_CHECK_H_
