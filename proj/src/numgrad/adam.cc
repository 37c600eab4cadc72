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

#include "fdpp/numgrad/adam.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fdpp::numgrad {

AdamState make_adam_state(const ParamStore& params, AdamConfig config) {
  return AdamState{config, params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state) {
  if (!params.same_layout(grads) || !params.same_layout(state.first_moment) ||
      !params.same_layout(state.second_moment)) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment layouts differ");
  }
  for (const auto& [name, g] : grads) {
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      if (!std::isfinite(g.data[i])) {
        std::ostringstream msg;
        msg << "non-finite gradient in '" << name << "'[" << i << "] = " << g.data[i];
        throw std::runtime_error(msg.str());
      }
    }
  }

  const auto& cfg = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  auto p_it = params.begin();
  auto m_it = state.first_moment.begin();
  auto v_it = state.second_moment.begin();
  for (auto g_it = grads.begin(); g_it != grads.end(); ++g_it, ++p_it, ++m_it, ++v_it) {
    auto& p = p_it->second.data;
    auto& m = m_it->second.data;
    auto& v = v_it->second.data;
    const auto& g = g_it->second.data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace fdpp::numgrad
