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

#ifndef FDPP_NUMGRAD_ADAM_H_
#define FDPP_NUMGRAD_ADAM_H_

#include <cstdint>

#include "fdpp/numgrad/param_store.h"

namespace fdpp::numgrad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  ParamStore first_moment;
  ParamStore second_moment;
  std::int64_t step = 0;
};

AdamState make_adam_state(const ParamStore& params, AdamConfig config = {});

// One bias-corrected Adam update, in place. Throws std::runtime_error naming
// the offending tensor and index if any gradient entry is non-finite; in that
// case neither `params` nor `state` is modified.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state);

}  // namespace fdpp::numgrad

#endif  // FDPP_NUMGRAD_ADAM_H_
