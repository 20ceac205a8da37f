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

#include <numeric>

#include "aqlab/bench.h"
#include "aqlab/circuit.h"
#include "gtest/gtest.h"

using namespace aqlab;

namespace {

// One unit per cycle at a fixed reported cost.
class FixedCost : public IncrementalDecoder {
   public:
    FixedCost(uint32_t cycles, double unit_cost, size_t batch = 1)
        : cycles_(cycles), unit_cost_(unit_cost), batch_(batch) {
    }
    std::string name() const override {
        return "fixed";
    }
    void begin(const BitVec &) override {
    }
    size_t num_units() const override {
        return cycles_;
    }
    uint32_t unit_last_cycle(size_t k) const override {
        return uint32_t(k);
    }
    size_t max_batch() const override {
        return batch_;
    }
    double process(size_t, size_t count) override {
        return unit_cost_ * double(count);
    }
    std::pair<bool, double> finish() override {
        return {false, unit_cost_};
    }

   private:
    uint32_t cycles_;
    double unit_cost_;
    size_t batch_;
};

}  // namespace

TEST(percentiles, linear_interpolation) {
    std::vector<double> v(101);
    std::iota(v.begin(), v.end(), 0.0);
    Percentiles p = percentiles(v);
    EXPECT_DOUBLE_EQ(p.p1, 1);
    EXPECT_DOUBLE_EQ(p.p50, 50);
    EXPECT_DOUBLE_EQ(p.p99, 99);
    Percentiles q = percentiles({3, 1, 2});
    EXPECT_LE(q.p1, q.p50);
    EXPECT_LE(q.p50, q.p99);
    EXPECT_DOUBLE_EQ(q.p50, 2);
}

TEST(latency, decoder_keeping_up_has_no_backlog) {
    ShotTable shots(3, 1, 1, 0);
    FixedCost dec(50, 0.5e-6);
    TimingReport r = measure_latency(dec, shots, 50, 1e-6);
    EXPECT_EQ(r.max_backlog, 1u);
    for (double l : r.latencies) {
        EXPECT_NEAR(l, 1e-6, 1e-12);
    }
}

TEST(latency, slow_decoder_backlog_grows_linearly) {
    ShotTable shots(1, 1, 1, 0);
    FixedCost dec(100, 2e-6);
    TimingReport r = measure_latency(dec, shots, 100, 1e-6);
    ASSERT_EQ(r.backlog.size(), 100u);
    // Half of the arrived cycles are still waiting.
    EXPECT_NEAR(double(r.backlog[99]), 50.0, 2.0);
    EXPECT_NEAR(double(r.backlog[49]), 25.0, 2.0);
    EXPECT_GT(r.latencies[0], 90e-6);
}

TEST(latency, batching_lets_a_slow_start_catch_up) {
    ShotTable shots(1, 1, 1, 0);
    FixedCost dec(100, 0.1e-6, 8);
    TimingReport r = measure_latency(dec, shots, 100, 1e-6);
    EXPECT_LE(r.max_backlog, 1u);
}

TEST(throughput, constant_cost_check) {
    TimingReport a, b;
    a.time_per_cycle = 1.0;
    b.time_per_cycle = 1.15;
    EXPECT_TRUE(check_constant_cost(a, b).within_tolerance);
    b.time_per_cycle = 1.3;
    EXPECT_FALSE(check_constant_cost(a, b).within_tolerance);
}

TEST(throughput, aq_block_sweep_predictions_identical) {
    Circuit c = build_memory_circuit(CodeSpec{CodeKind::Surface, 3, Basis::Z}, 8, NoiseParams{0.01});
    ShotTable shots = sample_table(c, 6, 3);
    ModelConfig cfg = ModelConfig::desk(CodeKind::Surface);
    cfg.channels = 16;
    cfg.heads = 2;
    cfg.key_size = 8;
    cfg.widening = 2;
    cfg.group = 1;
    cfg.block = 4;
    AqModel<float> model(cfg, 2);
    BlockSweep sweep = sweep_block_size(model, c.info(), shots, {1, 2, 4});
    ASSERT_EQ(sweep.rows.size(), 3u);
    EXPECT_TRUE(sweep.predictions_identical);
    EXPECT_NE(sweep.best_block, 0u);
    EXPECT_NE(sweep.to_csv().find("block,time_per_cycle"), std::string::npos);
    EXPECT_THROW(AqIncremental(model, c.info(), 5), std::invalid_argument);

    AqIncremental inc(model, c.info(), 4);
    StreamingDecoder<float> stream(model, c.info());
    TimingReport r = measure_throughput(inc, shots, 8);
    for (size_t s = 0; s < shots.num_shots(); s++) {
        EXPECT_EQ(bool(r.predictions[s]), stream.probability(shots.detectors_of(s)) > 0.5f);
    }
    EXPECT_GT(inc.max_state_bytes(), 0u);
}

TEST(latency, wall_clock_mode_runs) {
    ShotTable shots(2, 1, 1, 0);
    FixedCost dec(20, 0);
    TimingReport r = measure_latency(dec, shots, 20, 50e-6, ClockMode::Wall);
    ASSERT_EQ(r.latencies.size(), 2u);
    EXPECT_GE(r.durations[0], 20 * 50e-6 * 0.99);
    EXPECT_NE(r.to_json().find("\"latency\""), std::string::npos);
}
