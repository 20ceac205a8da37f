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

#ifndef AQLAB_DECODER_H
#define AQLAB_DECODER_H

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aqlab/bits.h"
#include "aqlab/sim.h"

namespace aqlab {

struct DecodeResult {
    BitVec observables;
    std::optional<double> cost;
};

/// Anything that maps one shot's detection events to predicted observable flips.
/// Implementations are safe to call concurrently.
class Decoder {
   public:
    virtual ~Decoder() = default;
    virtual DecodeResult decode(const BitVec &detection_events) const = 0;
    virtual size_t num_observables() const = 0;
    virtual std::string name() const = 0;
};

struct EvalCounts {
    uint64_t errors = 0;
    uint64_t shots = 0;
};

/// Counts shots whose predicted observable mask differs from the sampled one.
/// When `predictions` is given it receives one byte per shot (bit k = L_k).
EvalCounts evaluate_decoder(
    const Decoder &decoder, const ShotTable &shots, unsigned threads = 1, std::vector<uint8_t> *predictions = nullptr);

}  // namespace aqlab

#endif
