// Copyright 2026 The aqlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "aqlab/aq_decoder.h"
#include "aqlab/bench.h"
#include "aqlab/circuit.h"
#include "aqlab/dem.h"
#include "aqlab/matching.h"
#include "aqlab/training.h"

using namespace aqlab;

namespace {

Circuit surface(int d, uint32_t cycles, double p) {
    return build_memory_circuit(CodeSpec{CodeKind::Surface, d, Basis::Z}, cycles, NoiseParams{p});
}

void BM_sample_surface(benchmark::State &state) {
    Circuit c = surface(int(state.range(0)), 10, 0.005);
    uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_table(c, 1024, seed++));
    }
    state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_sample_surface)->Arg(3)->Arg(5)->Arg(7);

void BM_extract_dem(benchmark::State &state) {
    Circuit c = surface(int(state.range(0)), 10, 0.005);
    for (auto _ : state) {
        benchmark::DoNotOptimize(extract_dem(c));
    }
}
BENCHMARK(BM_extract_dem)->Arg(3)->Arg(5);

void BM_mwpm_decode(benchmark::State &state) {
    Circuit c = surface(int(state.range(0)), 10, 0.005);
    MwpmDecoder dec(to_matching_graph(extract_dem(c)));
    ShotTable t = sample_table(c, 512, 1);
    size_t s = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(dec.decode(t.detectors_of(s++ % t.num_shots())));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_mwpm_decode)->Arg(3)->Arg(5);

void BM_matmul(benchmark::State &state) {
    const size_t n = size_t(state.range(0));
    Tensor<float> a(n, 64, 0.5f), b(64, 256, 0.25f);
    for (auto _ : state) {
        Graph<float> g(false);
        benchmark::DoNotOptimize(g.value(g.matmul(g.input(a), g.input(b))).data.data());
    }
    state.SetItemsProcessed(state.iterations() * int64_t(n * 64 * 256));
}
BENCHMARK(BM_matmul)->Arg(8)->Arg(192)->Arg(1536);

// Streaming time per cycle against block size (groups per processed block).
void BM_aq_stream_block(benchmark::State &state) {
    const uint32_t cycles = 1440;
    Circuit c = surface(3, cycles, 0.005);
    ShotTable t = sample_table(c, 1, 2);
    AqModel<float> model(ModelConfig::desk(CodeKind::Surface), 3);
    AqIncremental dec(model, c.info(), size_t(state.range(0)));
    const BitVec ev = t.detectors_of(0);
    for (auto _ : state) {
        dec.begin(ev);
        for (size_t u = 0; u < dec.num_units(); u += dec.max_batch()) {
            dec.process(u, std::min(dec.max_batch(), dec.num_units() - u));
        }
        benchmark::DoNotOptimize(dec.finish());
    }
    state.counters["s_per_cycle"] =
        benchmark::Counter(double(state.iterations()) * cycles, benchmark::Counter::kIsRate | benchmark::Counter::kInvert);
}
BENCHMARK(BM_aq_stream_block)->Arg(1)->Arg(4)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_aq_batched_shots(benchmark::State &state) {
    Circuit c = surface(3, 10, 0.005);
    ShotTable t = sample_table(c, 256, 4);
    AqModel<float> model(ModelConfig::desk(CodeKind::Surface), 3);
    StreamingDecoder<float> dec(model, c.info());
    for (auto _ : state) {
        benchmark::DoNotOptimize(dec.probabilities(t, 0, t.num_shots()));
    }
    state.SetItemsProcessed(state.iterations() * int64_t(t.num_shots()));
}
BENCHMARK(BM_aq_batched_shots)->Unit(benchmark::kMillisecond);

void BM_train_step(benchmark::State &state) {
    AqModel<float> model(ModelConfig::desk(CodeKind::Surface), 5);
    TrainConfig tc;
    tc.batch_size = size_t(state.range(0));
    tc.total_examples = uint64_t(1) << 40;
    tc.dev_shots = 0;
    Trainer trainer(model, tc);
    for (auto _ : state) {
        benchmark::DoNotOptimize(trainer.step());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_train_step)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
