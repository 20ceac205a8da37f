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

#ifndef AQLAB_DEM_H
#define AQLAB_DEM_H

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "aqlab/circuit.h"

namespace aqlab {

/// Detectors and observables flipped by an error.
struct Symptom {
    std::vector<uint32_t> detectors;  // sorted, deduplicated
    uint64_t observables = 0;

    bool empty() const {
        return detectors.empty() && observables == 0;
    }
    auto operator<=>(const Symptom &) const = default;
};

/// XOR of two symptoms.
Symptom operator^(const Symptom &a, const Symptom &b);

struct ErrorMechanism {
    double probability = 0;
    Symptom symptom;
    /// Symptoms of the single-qubit X and Z pieces of the first contributing
    /// component that has more than one. Empty for simple errors and for
    /// mechanisms parsed from text.
    std::vector<Symptom> parts;

    const std::vector<uint32_t> &detectors() const {
        return symptom.detectors;
    }
    uint64_t observables() const {
        return symptom.observables;
    }
};

struct DetectorErrorModel {
    std::vector<ErrorMechanism> mechanisms;
    size_t num_detectors = 0;
    size_t num_observables = 0;
    /// Optional coordinates per detector (copied from the circuit).
    std::vector<std::vector<double>> detector_coords;
    /// Optional stabilizer basis per detector (0 = X, 1 = Z). When present,
    /// graph decomposition keeps the two bases apart.
    std::vector<uint8_t> detector_basis;
};

/// p1 (1 - p2) + p2 (1 - p1).
double merge_probability(double p1, double p2);

/// Propagates every noise-channel component to its symptom with a backward
/// sensitivity pass and merges identical symptoms. Mechanisms come out sorted
/// by symptom.
DetectorErrorModel extract_dem(const Circuit &circuit);

/// Single-error view used to cross-check extraction: every individual
/// component with its location and symptom.
struct ComponentError {
    size_t instruction;
    double probability;
    std::vector<std::pair<uint32_t, uint8_t>> paulis;  // 1 = X, 2 = Z, 3 = Y
    Symptom symptom;
};
std::vector<ComponentError> enumerate_components(const Circuit &circuit);

std::string serialize_dem(const DetectorErrorModel &dem);
DetectorErrorModel parse_dem(std::string_view text);

}  // namespace aqlab

#endif
