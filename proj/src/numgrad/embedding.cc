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

#include "fdpp/numgrad/embedding.h"

#include <cmath>
#include <stdexcept>

namespace fdpp::numgrad {

std::vector<double> timestep_embedding(int k, int dim) {
  if (dim <= 0 || dim % 2 != 0) {
    throw std::invalid_argument("timestep embedding dim must be even and positive, got " +
                                std::to_string(dim));
  }
  if (k < 0) throw std::invalid_argument("timestep must be >= 0");
  const int half = dim / 2;
  std::vector<double> out(dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(kEmbeddingBase, -static_cast<double>(i) / half);
    out[i] = std::sin(k * freq);
    out[half + i] = std::cos(k * freq);
  }
  return out;
}

}  // namespace fdpp::numgrad
