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

#ifndef AQLAB_LAYOUT_H
#define AQLAB_LAYOUT_H

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aqlab {

enum class CodeKind { Surface, Colour };
enum class Basis { X, Z };

std::string_view to_string(CodeKind kind);
std::string_view to_string(Basis basis);
CodeKind parse_code_kind(std::string_view text);
Basis parse_basis(std::string_view text);

struct CodeSpec {
    CodeKind kind = CodeKind::Surface;
    int distance = 3;
    Basis basis = Basis::Z;

    /// Throws std::invalid_argument for even or sub-3 distances.
    void validate() const;
    bool operator==(const CodeSpec &) const = default;
};

enum class QubitRole { Data, Measure, Flag };

struct Coord {
    int x = 0;
    int y = 0;
    bool operator==(const Coord &) const = default;
};

struct Qubit {
    uint32_t id;
    Coord pos;
    QubitRole role;
};

struct Stabilizer {
    uint32_t id;
    Basis basis;
    std::vector<uint32_t> data;
    uint32_t measure;
    std::optional<uint32_t> flag;
    /// Measure qubit for the surface code, cell centre for the colour code.
    Coord pos;
};

/// Geometry and stabilizer structure of one code patch.
///
/// Surface patches use a rotated lattice with data qubits at odd (x, y) and
/// measure qubits at even (x, y). Colour patches use a flat-top honeycomb whose
/// vertices sit at offsets (+-2, 0), (+-1, +-1) from each cell centre; the
/// measure and flag qubit of a cell sit at centre -+ (1, 0). Qubit ids are
/// assigned in row-major (y, x) order. Colour-code stabilizers are listed in
/// cell order with the X stabilizer of each cell directly before its Z
/// stabilizer.
struct QubitLayout {
    CodeSpec spec;
    std::vector<Qubit> qubits;
    std::vector<Stabilizer> stabilizers;
    /// Data-qubit support of each logical observable (one per patch).
    std::vector<std::vector<uint32_t>> observables;

    size_t num_qubits() const {
        return qubits.size();
    }
    size_t count(QubitRole role) const;
    std::vector<uint32_t> ids(QubitRole role) const;
    /// Returns the qubit at `pos`, if any.
    std::optional<uint32_t> find(Coord pos) const;
};

QubitLayout build_layout(const CodeSpec &spec);

/// Maps stabilizer positions affinely so the patch extremes land on -0.5 and
/// +0.5 per axis. An axis with zero extent maps to 0.
std::vector<std::pair<double, double>> normalized_positions(const QubitLayout &layout);

/// Text dump: "id role x y" per qubit, then "id basis measure flag members..."
/// per stabilizer (flag printed as "-" when absent).
std::string dump_layout(const QubitLayout &layout);

}  // namespace aqlab

#endif
