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

#ifndef AQLAB_MATCHING_H
#define AQLAB_MATCHING_H

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "aqlab/decoder.h"
#include "aqlab/dem.h"

namespace aqlab {

class Undecomposable : public std::runtime_error {
   public:
    Undecomposable(size_t mechanism, const std::string &message)
        : std::runtime_error(message), mechanism(mechanism) {
    }
    size_t mechanism;
};

class MatchingInfeasible : public std::runtime_error {
   public:
    MatchingInfeasible(uint32_t detector, const std::string &message)
        : std::runtime_error(message), detector(detector) {
    }
    uint32_t detector;
};

/// ln((1 - p) / p), clamped at 0 for p >= 0.5.
double edge_weight(double p);

struct MatchingEdge {
    uint32_t a;
    uint32_t b;  // == boundary node for half-edges
    double probability;
    double weight;
    uint64_t observables;
};

/// Graph-like projection of a DEM. Node `num_detectors` is the boundary.
struct MatchingGraph {
    size_t num_detectors = 0;
    size_t num_observables = 0;
    std::vector<MatchingEdge> edges;

    uint32_t boundary() const {
        return uint32_t(num_detectors);
    }
};

/// Splits every mechanism into at most two-detector parts (its X/Z split first,
/// then pairs of existing graph-like symptoms) and merges parallel edges.
/// Throws Undecomposable when some mechanism cannot be split.
MatchingGraph to_matching_graph(const DetectorErrorModel &dem);

/// Exact uncorrelated minimum-weight perfect matching decoder.
class MwpmDecoder : public Decoder {
   public:
    explicit MwpmDecoder(MatchingGraph graph);

    DecodeResult decode(const BitVec &detection_events) const override;
    size_t num_observables() const override {
        return graph_.num_observables;
    }
    std::string name() const override {
        return "mwpm";
    }
    const MatchingGraph &graph() const {
        return graph_;
    }
    /// Shortest-path distance between two nodes in discretized weight units,
    /// or kUnreachable.
    int64_t distance(uint32_t a, uint32_t b) const {
        return dist_[size_t(a) * nodes_ + b];
    }
    /// Length of that path in real weight units.
    double path_weight(uint32_t a, uint32_t b) const {
        return real_[size_t(a) * nodes_ + b];
    }
    uint64_t path_observables(uint32_t a, uint32_t b) const {
        return obs_[size_t(a) * nodes_ + b];
    }
    /// Integer weight of one real weight unit.
    double weight_scale() const {
        return scale_;
    }

    static constexpr int64_t kUnreachable = std::numeric_limits<int64_t>::max();

   private:
    MatchingGraph graph_;
    size_t nodes_;
    double scale_;
    std::vector<int64_t> dist_;
    std::vector<double> real_;
    std::vector<uint64_t> obs_;
};

class NoSolutionWithinCap : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Most-likely-error decoder: A* over mechanism subsets of size at most
/// `weight_cap`, minimizing the summed ln((1 - p) / p). Equal-cost optima are
/// resolved to the lexicographically smallest sorted index set.
class MlDecoder : public Decoder {
   public:
    MlDecoder(DetectorErrorModel dem, size_t weight_cap, size_t max_expansions = 50'000'000);

    DecodeResult decode(const BitVec &detection_events) const override;
    /// Same search, returning the chosen mechanism indices.
    std::vector<uint32_t> solve(const BitVec &detection_events, double *cost = nullptr) const;
    size_t num_observables() const override {
        return dem_.num_observables;
    }
    std::string name() const override {
        return "ml";
    }
    const DetectorErrorModel &dem() const {
        return dem_;
    }

   private:
    DetectorErrorModel dem_;
    size_t weight_cap_;
    size_t max_expansions_;
    std::vector<double> weights_;
    std::vector<std::vector<uint32_t>> by_detector_;
    std::vector<double> min_share_;  // per detector: min weight / |detectors|
};

DecodeResult mwpm_decode(const MwpmDecoder &decoder, const BitVec &detection_events);
DecodeResult exhaustive_ml_decode(const DetectorErrorModel &dem, const BitVec &detection_events, size_t weight_cap);

}  // namespace aqlab

#endif
