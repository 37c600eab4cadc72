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

#ifndef FDPP_NUMGRAD_EMBEDDING_H_
#define FDPP_NUMGRAD_EMBEDDING_H_

#include <vector>

namespace fdpp::numgrad {

inline constexpr double kEmbeddingBase = 100.0;

// Sinusoidal embedding of a denoising step: the first dim/2 entries are
// sin(k * f_i), the rest cos(k * f_i), with f_i = base^(-i / (dim/2)).
// Throws std::invalid_argument for odd or non-positive dim, or k < 0.
std::vector<double> timestep_embedding(int k, int dim);

}  // namespace fdpp::numgrad

#endif  // FDPP_NUMGRAD_EMBEDDING_H_
