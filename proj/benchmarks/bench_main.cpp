// Copyright 2026 The tocomm Authors.
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

#include <benchmark/benchmark.h>

#include "tocomm/alignment.hpp"
#include "tocomm/channel.hpp"
#include "tocomm/datasets.hpp"
#include "tocomm/mi.hpp"
#include "tocomm/tensor.hpp"
#include "tocomm/transceiver.hpp"

namespace {

using namespace tocomm;

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = state.range(0);
  const Matrix a = gaussian(n, n, 1), b = gaussian(n, n, 2);
  for (auto _ : state) {
    nn::Tensor x = nn::Tensor::parameter(a);
    nn::sum(nn::tanh(nn::matmul(x, nn::Tensor::constant(b)))).backward();
    benchmark::DoNotOptimize(x.grad().data());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(256);

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const nn::ConvGeometry g{.in_channels = 1, .in_height = 12, .in_width = 12, .out_channels = 8, .kernel = 3,
                           .stride = 2, .padding = 1};
  const Matrix x = gaussian(state.range(0), g.in_size(), 3);
  const Matrix w = gaussian(g.patch_size(), g.out_channels, 4);
  const Matrix b = gaussian(1, g.out_channels, 5);
  for (auto _ : state) {
    nn::Tensor wt = nn::Tensor::parameter(w);
    nn::sum(nn::square(nn::conv2d(nn::Tensor::constant(x), wt, nn::Tensor::constant(b), g))).backward();
    benchmark::DoNotOptimize(wt.grad().data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(64)->Arg(256);

void BM_ChannelTransmit(benchmark::State& state) {
  const Matrix z = channel::normalize_power(gaussian(state.range(0), 16, 6));
  const auto spec = channel::ChannelSpec::rayleigh_snr(10, true);
  Rng rng(7);
  for (auto _ : state) benchmark::DoNotOptimize(channel::transmit(z, spec, rng).data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ChannelTransmit)->Arg(256)->Arg(4096);

void BM_EncoderForward(benchmark::State& state) {
  const std::string family = state.range(0) == 0 ? "mlp-small" : "conv-small";
  const data::Dataset ds = data::make_synthetic_digits(256, 8);
  Rng rng(9);
  const transceiver::Transceiver pair(transceiver::family_config(family, ds.shape(), 16, 10), rng);
  const Matrix x = ds.all_inputs();
  for (auto _ : state) benchmark::DoNotOptimize(pair.infer_codes(x).data());
  state.SetLabel(family);
  state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_EncoderForward)->Arg(0)->Arg(1);

void BM_DiscreteChannelMi(benchmark::State& state) {
  const auto c = state.range(0) == 4 ? mi::Constellation::pam4() : mi::Constellation::qam16();
  const auto spec = channel::ChannelSpec::awgn_snr(10);
  Rng rng(10);
  for (auto _ : state) benchmark::DoNotOptimize(mi::discrete_channel_mi(c, spec, 4096, rng).nats());
}
BENCHMARK(BM_DiscreteChannelMi)->Arg(4)->Arg(16);

void BM_FitLs(benchmark::State& state) {
  const auto d = state.range(0);
  const Matrix src = gaussian(8 * d, d, 11), tgt = gaussian(8 * d, d, 12);
  for (auto _ : state) benchmark::DoNotOptimize(alignment::fit_ls(src, tgt, 0.0).weight.data());
}
BENCHMARK(BM_FitLs)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
