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

#ifndef AQLAB_BENCH_H
#define AQLAB_BENCH_H

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "aqlab/aq_decoder.h"
#include "aqlab/decoder.h"
#include "aqlab/sim.h"

namespace aqlab {

/// A decoder seen as a sequence of work units that become runnable as cycles
/// arrive, followed by a final step once the data readout is in.
class IncrementalDecoder {
   public:
    virtual ~IncrementalDecoder() = default;
    virtual std::string name() const = 0;
    virtual void begin(const BitVec &detection_events) = 0;
    virtual size_t num_units() const = 0;
    /// Last cycle (0-based) whose data unit k needs.
    virtual uint32_t unit_last_cycle(size_t k) const = 0;
    /// Most units handled by one process() call.
    virtual size_t max_batch() const = 0;
    /// Processes units [first, first + count); returns the cost in seconds.
    virtual double process(size_t first, size_t count) = 0;
    /// Final step after the data readout; returns (prediction, cost in seconds).
    virtual std::pair<bool, double> finish() = 0;
};

/// The neural decoder processed in blocks of `block` groups.
class AqIncremental : public IncrementalDecoder {
   public:
    AqIncremental(const AqModel<float> &model, std::shared_ptr<const ExperimentInfo> info, size_t block = 0);
    std::string name() const override {
        return "aq";
    }
    void begin(const BitVec &detection_events) override;
    size_t num_units() const override;
    uint32_t unit_last_cycle(size_t k) const override;
    size_t max_batch() const override {
        return block_;
    }
    double process(size_t first, size_t count) override;
    std::pair<bool, double> finish() override;
    /// Probability produced by the last finish().
    float last_probability() const {
        return probability_;
    }
    /// Largest recurrent-state footprint seen since construction.
    size_t max_state_bytes() const {
        return max_state_bytes_;
    }

   private:
    StreamingDecoder<float> stream_;
    size_t block_;
    ShotFrames frames_;
    DecoderState<float> state_;
    float probability_ = 0;
    size_t max_state_bytes_ = 0;
};

/// Any whole-shot decoder: nothing happens until the data readout arrives.
class WholeShotIncremental : public IncrementalDecoder {
   public:
    explicit WholeShotIncremental(const Decoder &decoder) : decoder_(decoder) {
    }
    std::string name() const override {
        return decoder_.name();
    }
    void begin(const BitVec &detection_events) override {
        events_ = detection_events;
    }
    size_t num_units() const override {
        return 0;
    }
    uint32_t unit_last_cycle(size_t) const override {
        return 0;
    }
    size_t max_batch() const override {
        return 1;
    }
    double process(size_t, size_t) override {
        return 0;
    }
    std::pair<bool, double> finish() override;

   private:
    const Decoder &decoder_;
    BitVec events_;
};

struct Percentiles {
    double p1 = 0, p50 = 0, p99 = 0;
};
/// Linear-interpolation percentiles of a sample.
Percentiles percentiles(std::vector<double> values);

struct TimingReport {
    std::string decoder;
    uint32_t cycles = 0;
    size_t shots = 0;
    std::vector<double> durations;   // per shot, seconds (first input to final prediction)
    double time_per_cycle = 0;       // mean duration / cycles
    Percentiles duration_percentiles;
    std::vector<double> latencies;   // per shot, seconds after the last cycle arrived
    Percentiles latency_percentiles;
    std::vector<size_t> backlog;     // cycles waiting at each clock tick of the first shot
    size_t max_backlog = 0;
    std::vector<uint8_t> predictions;

    std::string to_json() const;
    /// One JSON object per shot.
    std::string to_json_lines() const;
};

/// Decodes every shot as fast as possible and divides wall time by `cycles`.
TimingReport measure_throughput(IncrementalDecoder &decoder, const ShotTable &shots, uint32_t cycles);

enum class ClockMode { Virtual, Wall };

/// Feeds one cycle per `clock_period` seconds. In virtual mode the arrival
/// clock is simulated and the decoder's reported costs advance its own clock;
/// in wall mode a feeder thread releases cycles in real time into a bounded
/// queue. Latency is prediction time minus arrival time of the last cycle.
TimingReport measure_latency(IncrementalDecoder &decoder, const ShotTable &shots, uint32_t cycles,
                             double clock_period, ClockMode mode = ClockMode::Virtual);

struct ConstantCostCheck {
    double short_time_per_cycle = 0;
    double long_time_per_cycle = 0;
    double ratio = 0;
    bool within_tolerance = false;
};
/// Flags a per-cycle time at the long duration deviating more than `tolerance`.
ConstantCostCheck check_constant_cost(const TimingReport &short_run, const TimingReport &long_run,
                                      double tolerance = 0.2);

struct BlockSweepRow {
    size_t block;
    double time_per_cycle;
};
struct BlockSweep {
    std::vector<BlockSweepRow> rows;
    size_t best_block = 0;
    bool predictions_identical = true;
    std::string to_csv() const;
};
BlockSweep sweep_block_size(const AqModel<float> &model, std::shared_ptr<const ExperimentInfo> info,
                            const ShotTable &shots, const std::vector<size_t> &blocks);

}  // namespace aqlab

#endif
