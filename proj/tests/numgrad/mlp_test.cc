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
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"

namespace fdpp::numgrad {
namespace {

// Straight-line re-implementation in extended precision; shares no code with
// the Eigen path under test.
std::vector<long double> reference_forward(const MlpSpec& spec, const ParamStore& params,
                                           const std::vector<double>& input) {
  std::vector<long double> a(input.begin(), input.end());
  for (int l = 0; l < spec.num_layers(); ++l) {
    const auto& w = params.at(weight_name(l));
    const auto& b = params.at(bias_name(l));
    const int out = w.shape[0], in = w.shape[1];
    std::vector<long double> z(out);
    for (int i = 0; i < out; ++i) {
      long double acc = b.data[i];
      for (int j = 0; j < in; ++j) acc += static_cast<long double>(w.data[i * in + j]) * a[j];
      z[i] = acc;
    }
    if (l + 1 < spec.num_layers()) {
      for (auto& v : z) {
        switch (spec.activation) {
          case Activation::kTanh: v = std::tanh(v); break;
          case Activation::kRelu: v = v > 0 ? v : 0; break;
          case Activation::kGelu: v = 0.5L * v * (1.0L + std::erf(v / std::sqrt(2.0L))); break;
        }
      }
    }
    a = std::move(z);
  }
  return a;
}

std::vector<double> random_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> dist;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

ParamStore random_params(const MlpSpec& spec, std::mt19937_64& rng) {
  ParamStore p = init_params(spec, rng);
  std::normal_distribution<double> dist(0.0, 0.3);
  for (auto& [name, t] : p) {
    if (name.ends_with(".bias")) {
      for (auto& v : t.data) v = dist(rng);
    }
  }
  return p;
}

TEST_CASE("zero network maps any input to zero") {
  MlpSpec spec{3, {5, 4}, 2, Activation::kGelu};
  std::mt19937_64 rng(1);
  ParamStore p = init_params(spec, rng);
  p.fill(0.0);
  auto y = mlp_forward(spec, p, std::vector<double>{0.3, -2.0, 7.0});
  CHECK(y == std::vector<double>{0.0, 0.0});
}

TEST_CASE("identity linear layer") {
  MlpSpec spec{3, {}, 3, Activation::kTanh};
  std::mt19937_64 rng(1);
  ParamStore p = init_params(spec, rng);
  p.at(weight_name(0)).data = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  const std::vector<double> x{0.25, -1.5, 3.0};
  CHECK(mlp_forward(spec, p, x) == x);
}

TEST_CASE("forward matches extended-precision reference on random nets") {
  for (auto act : {Activation::kTanh, Activation::kRelu, Activation::kGelu}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      MlpSpec spec{6, {16, 12}, 3, act};
      std::mt19937_64 rng(seed);
      ParamStore p = random_params(spec, rng);
      auto x = random_vector(rng, 6);
      auto y = mlp_forward(spec, p, x);
      auto ref = reference_forward(spec, p, x);
      for (int i = 0; i < 3; ++i) CHECK(std::abs(y[i] - static_cast<double>(ref[i])) < 1e-12);
    }
  }
}

TEST_CASE("batched forward equals per-sample forward") {
  MlpSpec spec{4, {8}, 2, Activation::kGelu};
  std::mt19937_64 rng(3);
  ParamStore p = random_params(spec, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 7);
  Eigen::MatrixXd y = forward_batch(spec, p, x);
  for (int c = 0; c < 7; ++c) {
    std::vector<double> col(x.col(c).data(), x.col(c).data() + 4);
    auto yc = mlp_forward(spec, p, col);
    CHECK(std::abs(yc[0] - y(0, c)) < 1e-14);
    CHECK(std::abs(yc[1] - y(1, c)) < 1e-14);
  }
}

TEST_CASE("dimension mismatches are rejected with a diagnostic") {
  MlpSpec spec{3, {4}, 2, Activation::kTanh};
  std::mt19937_64 rng(0);
  ParamStore p = init_params(spec, rng);
  CHECK_THROWS_AS(mlp_forward(spec, p, std::vector<double>{1.0, 2.0}), std::invalid_argument);
  MlpSpec other{3, {5}, 2, Activation::kTanh};
  CHECK_THROWS_WITH_AS(mlp_forward(other, p, std::vector<double>{1, 2, 3}),
                       doctest::Contains("l0.weight"), std::invalid_argument);
  CHECK_THROWS_AS(mlp_backward(spec, p, std::vector<double>{1, 2, 3}, std::vector<double>{1}),
                  std::invalid_argument);
}

TEST_CASE("linear layer weight gradient is the outer product") {
  MlpSpec spec{3, {}, 2, Activation::kTanh};
  std::mt19937_64 rng(7);
  ParamStore p = random_params(spec, rng);
  const std::vector<double> x{0.5, -1.0, 2.0};
  const std::vector<double> c{3.0, -0.25};
  auto g = mlp_backward(spec, p, x, c);
  const auto& gw = g.params.at(weight_name(0)).data;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(gw[i * 3 + j] == doctest::Approx(c[i] * x[j]).epsilon(1e-15));
  }
  const auto& gb = g.params.at(bias_name(0)).data;
  CHECK(std::vector<double>(gb.begin(), gb.end()) == c);
}

TEST_CASE("zero cotangent gives zero gradients") {
  MlpSpec spec{3, {6, 6}, 2, Activation::kGelu};
  std::mt19937_64 rng(2);
  ParamStore p = random_params(spec, rng);
  auto g = mlp_backward(spec, p, std::vector<double>{1, 2, 3}, std::vector<double>{0, 0});
  for (const auto& [name, t] : g.params) {
    for (double v : t.data) CHECK(v == 0.0);
  }
  for (double v : g.input) CHECK(v == 0.0);
}

TEST_CASE("backward matches naive central differences") {
  // Perturbs the ParamStore directly and re-runs mlp_forward: a separate
  // route from grad_check's batched evaluation.
  const double h = 1e-5;
  for (auto act : {Activation::kTanh, Activation::kGelu}) {
    MlpSpec spec{3, {5, 4}, 2, act};
    std::mt19937_64 rng(11);
    ParamStore p = random_params(spec, rng);
    auto x = random_vector(rng, 3);
    const std::vector<double> c{0.7, -1.3};
    auto objective = [&](const ParamStore& q, const std::vector<double>& in) {
      auto y = mlp_forward(spec, q, in);
      return c[0] * y[0] + c[1] * y[1];
    };
    auto g = mlp_backward(spec, p, x, c);
    for (auto& [name, t] : p) {
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        const double orig = t.data[i];
        t.data[i] = orig + h;
        const double fp = objective(p, x);
        t.data[i] = orig - h;
        const double fm = objective(p, x);
        t.data[i] = orig;
        const double num = (fp - fm) / (2 * h);
        const double ana = g.params.at(name).data[i];
        CHECK(std::abs(ana - num) / std::max(1e-8, std::abs(ana) + std::abs(num)) < 1e-5);
      }
    }
    for (int j = 0; j < 3; ++j) {
      auto xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double num = (objective(p, xp) - objective(p, xm)) / (2 * h);
      CHECK(std::abs(g.input[j] - num) / std::max(1e-8, std::abs(g.input[j]) + std::abs(num)) < 1e-5);
    }
  }
}

TEST_CASE("forward and backward are pure") {
  MlpSpec spec{4, {8, 8}, 3, Activation::kGelu};
  std::mt19937_64 rng(5);
  ParamStore p = random_params(spec, rng);
  auto x = random_vector(rng, 4);
  const std::vector<double> c{1, 2, 3};
  CHECK(mlp_forward(spec, p, x) == mlp_forward(spec, p, x));
  auto g1 = mlp_backward(spec, p, x, c);
  auto g2 = mlp_backward(spec, p, x, c);
  CHECK(g1.params == g2.params);
  CHECK(g1.input == g2.input);
}

TEST_CASE("init: uniform glorot bounds and zero final layer") {
  MlpSpec spec{10, {20}, 4, Activation::kGelu};
  CHECK(spec.parameter_count() == 20 * 11 + 4 * 21);
  std::mt19937_64 rng(9);
  ParamStore p = init_params(spec, rng, /*zero_final_layer=*/true);
  const double limit = std::sqrt(6.0 / 30.0);
  for (double v : p.at(weight_name(0)).data) CHECK(std::abs(v) <= limit);
  for (double v : p.at(weight_name(1)).data) CHECK(v == 0.0);
  CHECK(p.value_count() == spec.parameter_count());
}

}  // namespace
}  // namespace fdpp::numgrad
