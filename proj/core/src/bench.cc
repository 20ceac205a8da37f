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

#include "aqlab/bench.h"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace aqlab {

using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

AqIncremental::AqIncremental(const AqModel<float> &model, std::shared_ptr<const ExperimentInfo> info, size_t block)
    : stream_(model, std::move(info)), block_(block ? block : model.config().block) {
    if (block_ > model.config().block) {
        throw std::invalid_argument("block size " + std::to_string(block_) + " exceeds the model limit of " +
                                    std::to_string(model.config().block));
    }
}

void AqIncremental::begin(const BitVec &detection_events) {
    frames_ = stream_.encoder().frames(detection_events);
    state_ = stream_.initial_state(1);
}

size_t AqIncremental::num_units() const {
    return stream_.encoder().num_groups();
}

uint32_t AqIncremental::unit_last_cycle(size_t k) const {
    return stream_.encoder().last_cycle(k);
}

double AqIncremental::process(size_t first, size_t count) {
    auto t0 = Clock::now();
    const size_t S = stream_.geometry().stabilizers;
    const size_t W = 4 * stream_.encoder().group();
    std::vector<Tensor<float>> steps;
    for (size_t k = first; k < first + count; k++) {
        Tensor<float> t(S, W);
        stream_.encoder().write_group(frames_, k, state_.running[0], t.data.data());
        steps.push_back(std::move(t));
    }
    stream_.process_block(state_, steps);
    max_state_bytes_ = std::max(max_state_bytes_, state_.bytes());
    return seconds_since(t0);
}

std::pair<bool, double> AqIncremental::finish() {
    auto t0 = Clock::now();
    const size_t S = stream_.geometry().stabilizers;
    Tensor<float> term(S, 4 * stream_.encoder().group());
    stream_.encoder().write_terminal(frames_.terminal, state_.running[0], term.data.data());
    probability_ = stream_.finish(state_, term)[0];
    return {threshold_prediction(probability_), seconds_since(t0)};
}

std::pair<bool, double> WholeShotIncremental::finish() {
    auto t0 = Clock::now();
    DecodeResult r = decoder_.decode(events_);
    return {r.observables.size() > 0 && r.observables.get(0), seconds_since(t0)};
}

Percentiles percentiles(std::vector<double> values) {
    Percentiles p;
    if (values.empty()) {
        return p;
    }
    std::sort(values.begin(), values.end());
    auto at = [&](double q) {
        const double pos = q * double(values.size() - 1);
        const size_t lo = size_t(pos);
        const size_t hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
    };
    p.p1 = at(0.01);
    p.p50 = at(0.5);
    p.p99 = at(0.99);
    return p;
}

std::string TimingReport::to_json() const {
    json j;
    j["decoder"] = decoder;
    j["cycles"] = cycles;
    j["shots"] = shots;
    j["time_per_cycle"] = time_per_cycle;
    j["duration"] = {{"p1", duration_percentiles.p1},
                     {"p50", duration_percentiles.p50},
                     {"p99", duration_percentiles.p99}};
    if (!latencies.empty()) {
        j["latency"] = {{"p1", latency_percentiles.p1},
                        {"p50", latency_percentiles.p50},
                        {"p99", latency_percentiles.p99},
                        {"p99_over_p50", latency_percentiles.p50 > 0
                                             ? latency_percentiles.p99 / latency_percentiles.p50
                                             : 0.0}};
        j["max_backlog"] = max_backlog;
    }
    return j.dump();
}

std::string TimingReport::to_json_lines() const {
    std::ostringstream out;
    for (size_t s = 0; s < durations.size(); s++) {
        json j;
        j["shot"] = s;
        j["decoder"] = decoder;
        j["cycles"] = cycles;
        j["duration"] = durations[s];
        if (s < latencies.size()) {
            j["latency"] = latencies[s];
        }
        out << j.dump() << "\n";
    }
    return out.str();
}

TimingReport measure_throughput(IncrementalDecoder &decoder, const ShotTable &shots, uint32_t cycles) {
    if (cycles == 0) {
        throw std::invalid_argument("throughput needs at least one cycle");
    }
    TimingReport r;
    r.decoder = decoder.name();
    r.cycles = cycles;
    r.shots = shots.num_shots();
    double total = 0;
    for (size_t s = 0; s < shots.num_shots(); s++) {
        const BitVec events = shots.detectors_of(s);
        auto t0 = Clock::now();
        decoder.begin(events);
        const size_t units = decoder.num_units();
        for (size_t u = 0; u < units; u += decoder.max_batch()) {
            decoder.process(u, std::min(decoder.max_batch(), units - u));
        }
        const bool pred = decoder.finish().first;
        const double d = seconds_since(t0);
        r.durations.push_back(d);
        r.predictions.push_back(pred);
        total += d;
    }
    r.time_per_cycle = r.shots ? total / double(r.shots) / double(cycles) : 0.0;
    r.duration_percentiles = percentiles(r.durations);
    return r;
}

namespace {

// Cycles not yet consumed at each tick, given when each unit finished.
std::vector<size_t> backlog_per_tick(const std::vector<std::pair<double, uint32_t>> &done, uint32_t cycles,
                                     double period) {
    std::vector<size_t> backlog(cycles, 0);
    size_t j = 0;
    uint32_t consumed = 0;
    for (uint32_t c = 0; c < cycles; c++) {
        const double t = double(c + 1) * period;
        while (j < done.size() && done[j].first <= t) {
            consumed = std::max(consumed, done[j].second + 1);
            j++;
        }
        backlog[c] = size_t(c + 1) - std::min<size_t>(consumed, c + 1);
    }
    return backlog;
}

struct ShotTiming {
    double duration;
    double latency;
    bool prediction;
    std::vector<std::pair<double, uint32_t>> done;  // (finish time, last cycle covered)
};

ShotTiming run_virtual(IncrementalDecoder &decoder, uint32_t cycles, double period) {
    ShotTiming st{};
    auto arrival = [&](uint32_t c) { return double(c + 1) * period; };
    const size_t units = decoder.num_units();
    double free_at = 0;
    for (size_t u = 0; u < units;) {
        const double start = std::max(free_at, arrival(decoder.unit_last_cycle(u)));
        size_t count = 1;
        while (u + count < units && count < decoder.max_batch() &&
               arrival(decoder.unit_last_cycle(u + count)) <= start) {
            count++;
        }
        free_at = start + decoder.process(u, count);
        st.done.push_back({free_at, decoder.unit_last_cycle(u + count - 1)});
        u += count;
    }
    const double last = double(cycles) * period;
    auto [pred, cost] = decoder.finish();
    const double end = std::max(free_at, last) + cost;
    st.done.push_back({end, cycles - 1});
    st.duration = end;
    st.latency = end - last;
    st.prediction = pred;
    return st;
}

ShotTiming run_wall(IncrementalDecoder &decoder, uint32_t cycles, double period) {
    ShotTiming st{};
    std::mutex mu;
    std::condition_variable cv;
    uint32_t arrived = 0;
    const auto t0 = Clock::now();
    auto at = [&](double s) { return t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(s)); };
    std::thread feeder([&] {
        for (uint32_t c = 0; c < cycles; c++) {
            std::this_thread::sleep_until(at(double(c + 1) * period));
            std::lock_guard<std::mutex> lock(mu);
            arrived = c + 1;
            cv.notify_one();
        }
    });
    auto wait_for = [&](uint32_t cycle) {
        std::unique_lock<std::mutex> lock(mu);
        cv.wait(lock, [&] { return arrived > cycle; });
        return arrived;
    };
    const size_t units = decoder.num_units();
    for (size_t u = 0; u < units;) {
        const uint32_t have = wait_for(decoder.unit_last_cycle(u));
        size_t count = 1;
        while (u + count < units && count < decoder.max_batch() && decoder.unit_last_cycle(u + count) < have) {
            count++;
        }
        decoder.process(u, count);
        st.done.push_back({seconds_since(t0), decoder.unit_last_cycle(u + count - 1)});
        u += count;
    }
    wait_for(cycles - 1);
    const bool pred = decoder.finish().first;
    const double end = seconds_since(t0);
    feeder.join();
    st.done.push_back({end, cycles - 1});
    st.duration = end;
    st.latency = end - double(cycles) * period;
    st.prediction = pred;
    return st;
}

}  // namespace

TimingReport measure_latency(IncrementalDecoder &decoder, const ShotTable &shots, uint32_t cycles,
                             double clock_period, ClockMode mode) {
    if (cycles == 0 || !(clock_period > 0)) {
        throw std::invalid_argument("latency needs cycles > 0 and a positive clock period");
    }
    TimingReport r;
    r.decoder = decoder.name();
    r.cycles = cycles;
    r.shots = shots.num_shots();
    double total = 0;
    for (size_t s = 0; s < shots.num_shots(); s++) {
        decoder.begin(shots.detectors_of(s));
        ShotTiming st = mode == ClockMode::Virtual ? run_virtual(decoder, cycles, clock_period)
                                                   : run_wall(decoder, cycles, clock_period);
        r.durations.push_back(st.duration);
        r.latencies.push_back(st.latency);
        r.predictions.push_back(st.prediction);
        total += st.duration;
        if (s == 0) {
            r.backlog = backlog_per_tick(st.done, cycles, clock_period);
            r.max_backlog = r.backlog.empty() ? 0 : *std::max_element(r.backlog.begin(), r.backlog.end());
        }
    }
    r.time_per_cycle = r.shots ? total / double(r.shots) / double(cycles) : 0.0;
    r.duration_percentiles = percentiles(r.durations);
    r.latency_percentiles = percentiles(r.latencies);
    return r;
}

ConstantCostCheck check_constant_cost(const TimingReport &short_run, const TimingReport &long_run, double tolerance) {
    ConstantCostCheck c;
    c.short_time_per_cycle = short_run.time_per_cycle;
    c.long_time_per_cycle = long_run.time_per_cycle;
    c.ratio = c.short_time_per_cycle > 0 ? c.long_time_per_cycle / c.short_time_per_cycle : 0.0;
    c.within_tolerance = std::abs(c.ratio - 1) <= tolerance;
    return c;
}

std::string BlockSweep::to_csv() const {
    std::ostringstream out;
    out << "block,time_per_cycle\n";
    for (const auto &r : rows) {
        out << r.block << "," << r.time_per_cycle << "\n";
    }
    return out.str();
}

BlockSweep sweep_block_size(const AqModel<float> &model, std::shared_ptr<const ExperimentInfo> info,
                            const ShotTable &shots, const std::vector<size_t> &blocks) {
    BlockSweep sweep;
    std::vector<uint8_t> reference;
    double best = 0;
    for (size_t b : blocks) {
        if (b == 0) {
            throw std::invalid_argument("block sizes must be at least 1");
        }
        AqIncremental dec(model, info, b);
        TimingReport r = measure_throughput(dec, shots, info->cycles);
        sweep.rows.push_back({b, r.time_per_cycle});
        if (reference.empty()) {
            reference = r.predictions;
        } else if (r.predictions != reference) {
            sweep.predictions_identical = false;
        }
        if (sweep.best_block == 0 || r.time_per_cycle < best) {
            best = r.time_per_cycle;
            sweep.best_block = b;
        }
    }
    return sweep;
}

}  // namespace aqlab
