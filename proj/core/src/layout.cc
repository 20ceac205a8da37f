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

#include "aqlab/layout.h"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

namespace aqlab {

std::string_view to_string(CodeKind kind) {
    return kind == CodeKind::Surface ? "surface" : "colour";
}

std::string_view to_string(Basis basis) {
    return basis == Basis::X ? "X" : "Z";
}

CodeKind parse_code_kind(std::string_view text) {
    if (text == "surface") {
        return CodeKind::Surface;
    }
    if (text == "colour" || text == "color") {
        return CodeKind::Colour;
    }
    throw std::invalid_argument("unknown code kind '" + std::string(text) + "'");
}

Basis parse_basis(std::string_view text) {
    if (text == "X" || text == "x") {
        return Basis::X;
    }
    if (text == "Z" || text == "z") {
        return Basis::Z;
    }
    throw std::invalid_argument("unknown basis '" + std::string(text) + "'");
}

void CodeSpec::validate() const {
    if (distance < 3 || distance % 2 == 0) {
        throw std::invalid_argument(
            "code distance must be odd and at least 3, got " + std::to_string(distance));
    }
}

size_t QubitLayout::count(QubitRole role) const {
    return std::count_if(qubits.begin(), qubits.end(), [&](const Qubit &q) { return q.role == role; });
}

std::vector<uint32_t> QubitLayout::ids(QubitRole role) const {
    std::vector<uint32_t> out;
    for (const auto &q : qubits) {
        if (q.role == role) {
            out.push_back(q.id);
        }
    }
    return out;
}

std::optional<uint32_t> QubitLayout::find(Coord pos) const {
    for (const auto &q : qubits) {
        if (q.pos == pos) {
            return q.id;
        }
    }
    return std::nullopt;
}

namespace {

struct CoordLess {
    bool operator()(const Coord &a, const Coord &b) const {
        return a.y != b.y ? a.y < b.y : a.x < b.x;
    }
};

using RoleMap = std::map<Coord, QubitRole, CoordLess>;

std::map<Coord, uint32_t, CoordLess> assign_ids(const RoleMap &roles, QubitLayout &layout) {
    std::map<Coord, uint32_t, CoordLess> ids;
    uint32_t next = 0;
    for (const auto &[pos, role] : roles) {
        ids[pos] = next;
        layout.qubits.push_back({next, pos, role});
        next++;
    }
    return ids;
}

// Plaquette (a, b) sits at (2a, 2b); it is X-type when a + b is odd. Z-type
// plaquettes close the top and bottom edges, X-type the left and right edges.
bool surface_plaquette_exists(int d, int a, int b) {
    bool odd = (a + b) % 2 != 0;
    bool a_inner = a >= 1 && a <= d - 1;
    bool b_inner = b >= 1 && b <= d - 1;
    if (a_inner && b_inner) {
        return true;
    }
    if (a_inner && (b == 0 || b == d)) {
        return !odd;
    }
    if (b_inner && (a == 0 || a == d)) {
        return odd;
    }
    return false;
}

QubitLayout build_surface(const CodeSpec &spec) {
    const int d = spec.distance;
    QubitLayout layout;
    layout.spec = spec;
    RoleMap roles;
    for (int j = 0; j < d; j++) {
        for (int i = 0; i < d; i++) {
            roles[{2 * i + 1, 2 * j + 1}] = QubitRole::Data;
        }
    }
    for (int b = 0; b <= d; b++) {
        for (int a = 0; a <= d; a++) {
            if (surface_plaquette_exists(d, a, b)) {
                roles[{2 * a, 2 * b}] = QubitRole::Measure;
            }
        }
    }
    auto ids = assign_ids(roles, layout);
    for (const auto &[pos, role] : roles) {
        if (role != QubitRole::Measure) {
            continue;
        }
        Stabilizer s;
        s.id = static_cast<uint32_t>(layout.stabilizers.size());
        s.basis = ((pos.x / 2 + pos.y / 2) % 2 != 0) ? Basis::X : Basis::Z;
        s.measure = ids.at(pos);
        s.pos = pos;
        for (int dy : {-1, 1}) {
            for (int dx : {-1, 1}) {
                auto it = ids.find({pos.x + dx, pos.y + dy});
                if (it != ids.end()) {
                    s.data.push_back(it->second);
                }
            }
        }
        std::sort(s.data.begin(), s.data.end());
        layout.stabilizers.push_back(std::move(s));
    }
    std::vector<uint32_t> obs;
    for (int k = 0; k < d; k++) {
        // Z observable: left column. X observable: top row.
        Coord c = spec.basis == Basis::Z ? Coord{1, 2 * k + 1} : Coord{2 * k + 1, 1};
        obs.push_back(ids.at(c));
    }
    std::sort(obs.begin(), obs.end());
    layout.observables.push_back(std::move(obs));
    return layout;
}

constexpr Coord kHexOffsets[6] = {{2, 0}, {1, 1}, {-1, 1}, {-2, 0}, {-1, -1}, {1, -1}};

QubitLayout build_colour(const CodeSpec &spec) {
    const int d = spec.distance;
    const int right = 3 * d - 5;
    auto inside = [&](Coord c) { return c.y >= 0 && c.x - c.y >= -2 && c.x + c.y <= right; };

    std::vector<Coord> centres;
    for (int a = -2; a <= d + 2; a++) {
        for (int b = -3 * d; b <= 3 * d; b++) {
            Coord c{3 * a, 2 * b + a};
            if (inside(c)) {
                centres.push_back(c);
            }
        }
    }
    std::sort(centres.begin(), centres.end(), CoordLess{});

    RoleMap roles;
    for (const auto &c : centres) {
        for (const auto &o : kHexOffsets) {
            Coord v{c.x + o.x, c.y + o.y};
            if (inside(v)) {
                roles[v] = QubitRole::Data;
            }
        }
        roles[{c.x - 1, c.y}] = QubitRole::Measure;
        roles[{c.x + 1, c.y}] = QubitRole::Flag;
    }

    QubitLayout layout;
    layout.spec = spec;
    auto ids = assign_ids(roles, layout);
    for (const auto &c : centres) {
        std::vector<uint32_t> members;
        for (const auto &o : kHexOffsets) {
            auto it = ids.find({c.x + o.x, c.y + o.y});
            if (it != ids.end() && roles.at(it->first) == QubitRole::Data) {
                members.push_back(it->second);
            }
        }
        std::sort(members.begin(), members.end());
        for (Basis basis : {Basis::X, Basis::Z}) {
            Stabilizer s;
            s.id = static_cast<uint32_t>(layout.stabilizers.size());
            s.basis = basis;
            s.data = members;
            s.measure = ids.at({c.x - 1, c.y});
            s.flag = ids.at({c.x + 1, c.y});
            s.pos = c;
            layout.stabilizers.push_back(std::move(s));
        }
    }
    std::vector<uint32_t> obs;
    for (const auto &q : layout.qubits) {
        if (q.role == QubitRole::Data && q.pos.y == 0) {
            obs.push_back(q.id);
        }
    }
    layout.observables.push_back(std::move(obs));
    return layout;
}

}  // namespace

QubitLayout build_layout(const CodeSpec &spec) {
    spec.validate();
    return spec.kind == CodeKind::Surface ? build_surface(spec) : build_colour(spec);
}

std::vector<std::pair<double, double>> normalized_positions(const QubitLayout &layout) {
    std::vector<std::pair<double, double>> out;
    if (layout.stabilizers.empty()) {
        return out;
    }
    int min_x = layout.stabilizers[0].pos.x, max_x = min_x;
    int min_y = layout.stabilizers[0].pos.y, max_y = min_y;
    for (const auto &s : layout.stabilizers) {
        min_x = std::min(min_x, s.pos.x);
        max_x = std::max(max_x, s.pos.x);
        min_y = std::min(min_y, s.pos.y);
        max_y = std::max(max_y, s.pos.y);
    }
    auto norm = [](int v, int lo, int hi) {
        if (hi == lo) {
            return 0.0;
        }
        return (static_cast<double>(v - lo) / static_cast<double>(hi - lo)) - 0.5;
    };
    for (const auto &s : layout.stabilizers) {
        out.emplace_back(norm(s.pos.x, min_x, max_x), norm(s.pos.y, min_y, max_y));
    }
    return out;
}

std::string dump_layout(const QubitLayout &layout) {
    std::ostringstream out;
    for (const auto &q : layout.qubits) {
        const char *role = q.role == QubitRole::Data ? "data" : q.role == QubitRole::Measure ? "measure" : "flag";
        out << q.id << ' ' << role << ' ' << q.pos.x << ' ' << q.pos.y << '\n';
    }
    for (const auto &s : layout.stabilizers) {
        out << s.id << ' ' << to_string(s.basis) << ' ' << s.measure << ' ';
        if (s.flag) {
            out << *s.flag;
        } else {
            out << '-';
        }
        for (auto m : s.data) {
            out << ' ' << m;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace aqlab
