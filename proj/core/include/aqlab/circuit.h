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

#ifndef AQLAB_CIRCUIT_H
#define AQLAB_CIRCUIT_H

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "aqlab/layout.h"

namespace aqlab {

enum class Op : uint8_t {
    R,
    RX,
    M,
    MX,
    H,
    CZ,
    X_ERROR,
    Z_ERROR,
    DEPOLARIZE1,
    DEPOLARIZE2,
    DETECTOR,
    OBSERVABLE_INCLUDE,
    QUBIT_COORDS,
    TICK,
};

std::string_view op_name(Op op);
bool is_noise(Op op);
bool is_measurement(Op op);
bool is_reset(Op op);
/// Ops whose targets are qubits and which act as gates (H, CZ).
bool is_unitary(Op op);

/// One circuit line. For DETECTOR and OBSERVABLE_INCLUDE the targets are
/// positive lookbacks: target k means rec[-k].
struct Instruction {
    Op op;
    std::vector<double> args;
    std::vector<uint32_t> targets;

    bool operator==(const Instruction &) const = default;
};

struct DetectorInfo {
    std::vector<uint32_t> measurements;  // absolute measurement indices, sorted
    std::vector<double> coords;
};

struct ExperimentInfo;

class ParseError : public std::runtime_error {
   public:
    ParseError(size_t line, size_t column, const std::string &message);
    size_t line;
    size_t column;
};

class Circuit {
   public:
    Circuit() = default;

    /// Validates and appends. Throws std::invalid_argument on bad probabilities,
    /// overlapping CZ pairs, or lookbacks past the start of the record.
    void append(Instruction inst);
    void append(Op op, std::vector<uint32_t> targets, std::vector<double> args = {});

    const std::vector<Instruction> &instructions() const {
        return instructions_;
    }
    size_t num_qubits() const {
        return num_qubits_;
    }
    size_t num_measurements() const {
        return num_measurements_;
    }
    const std::vector<DetectorInfo> &detectors() const {
        return detectors_;
    }
    size_t num_detectors() const {
        return detectors_.size();
    }
    /// Absolute measurement indices per logical observable (sorted).
    const std::vector<std::vector<uint32_t>> &observables() const {
        return observables_;
    }
    size_t num_observables() const {
        return observables_.size();
    }
    bool has_noise() const;

    /// Builder metadata; null for parsed or hand-written circuits.
    const std::shared_ptr<const ExperimentInfo> &info() const {
        return info_;
    }
    void set_info(std::shared_ptr<const ExperimentInfo> info) {
        info_ = std::move(info);
    }

    /// Equality compares instructions only.
    bool operator==(const Circuit &other) const {
        return instructions_ == other.instructions_;
    }

    std::string str() const;

   private:
    std::vector<Instruction> instructions_;
    size_t num_qubits_ = 0;
    size_t num_measurements_ = 0;
    std::vector<DetectorInfo> detectors_;
    std::vector<std::vector<uint32_t>> observables_;
    std::shared_ptr<const ExperimentInfo> info_;
};

Circuit parse_circuit(std::string_view text);
std::string serialize_circuit(const Circuit &circuit);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);
/// Rounds to 12 significant digits so derived probabilities such as p/10
/// print as their intended decimal.
double canonical_probability(double value);

struct NoiseParams {
    double p = 0.0;
    void validate() const;
};

/// Channel carried by a raw measurement in the decoder's per-cycle view.
enum class Channel : uint8_t { Event, Measurement, Flag };

/// Where a detector sits in the per-cycle picture. `cycle == cycles` marks the
/// terminal (data readout) group.
struct DetectorRole {
    uint32_t cycle;
    uint32_t slot;
    bool flag;
};

/// Bookkeeping attached by build_memory_circuit.
struct ExperimentInfo {
    QubitLayout layout;
    uint32_t cycles = 0;
    NoiseParams noise;
    /// stabilizer_meas[t][s]: measurement index of stabilizer s in cycle t.
    std::vector<std::vector<uint32_t>> stabilizer_meas;
    /// flag_meas[t][s]: flag measurement index, or kNone (surface code).
    std::vector<std::vector<uint32_t>> flag_meas;
    /// Measurement index of each data qubit (indexed like layout.ids(Data)).
    std::vector<uint32_t> data_meas;
    /// Number of measurements recorded once cycle t has been read out.
    std::vector<uint32_t> cycle_end;
    std::vector<DetectorRole> detector_roles;
    /// Stabilizers compared against the data readout (memory basis).
    std::vector<uint32_t> terminal_stabilizers;
    /// Final data readout as a standalone noisy fragment (no detectors).
    Circuit readout;

    static constexpr uint32_t kNone = UINT32_MAX;
    size_t num_slots() const {
        return layout.stabilizers.size();
    }
};

/// Builds an initialize / `cycles` rounds / measure memory experiment. Noise is
/// applied with apply_si1000 when noise.p > 0.
Circuit build_memory_circuit(const CodeSpec &spec, uint32_t cycles, const NoiseParams &noise);

/// `num_qubits` widens the idle set beyond the qubits the circuit touches.
Circuit apply_si1000(const Circuit &clean, const NoiseParams &noise, size_t num_qubits = 0);

/// One raw measurement in the unified per-cycle picture.
struct UnifiedSlot {
    uint32_t cycle;  // == cycles for the terminal data readout
    uint32_t slot;   // stabilizer id, or data-qubit index for terminal entries
    Channel channel;
};

/// Maps every raw measurement index to its place in the unified cycle layout.
/// Colour-code X and Z sub-cycles are merged into one cycle whose slots follow
/// the stabilizer order; flags share the slot of their stabilizer. Throws
/// std::invalid_argument if the ancilla measurement count is not a multiple of
/// the per-cycle count.
std::vector<UnifiedSlot> unified_cycle_view(const CodeSpec &spec, size_t num_measurements);

}  // namespace aqlab

#endif
