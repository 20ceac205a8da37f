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

#include <map>
#include <set>

#include "gtest/gtest.h"

using namespace aqlab;

TEST(layout, surface_counts) {
    for (int d = 3; d <= 15; d += 2) {
        auto layout = build_layout({CodeKind::Surface, d, Basis::Z});
        EXPECT_EQ(layout.count(QubitRole::Data), size_t(d * d));
        EXPECT_EQ(layout.count(QubitRole::Measure), size_t(d * d - 1));
        EXPECT_EQ(layout.count(QubitRole::Flag), 0u);
    }
}

TEST(layout, colour_counts) {
    for (int d = 3; d <= 15; d += 2) {
        auto layout = build_layout({CodeKind::Colour, d, Basis::Z});
        size_t cells = (3 * d * d - 3) / 8;
        EXPECT_EQ(layout.count(QubitRole::Data), size_t((3 * d * d + 1) / 4));
        EXPECT_EQ(layout.count(QubitRole::Measure), cells);
        EXPECT_EQ(layout.count(QubitRole::Flag), cells);
        EXPECT_EQ(layout.stabilizers.size(), 2 * cells);
    }
}

TEST(layout, qubit_totals_at_distance_11) {
    EXPECT_EQ(build_layout({CodeKind::Surface, 11, Basis::Z}).num_qubits(), 241u);
    EXPECT_EQ(build_layout({CodeKind::Colour, 11, Basis::Z}).num_qubits(), 181u);
}

TEST(layout, colour_d3_shape) {
    auto layout = build_layout({CodeKind::Colour, 3, Basis::Z});
    EXPECT_EQ(layout.count(QubitRole::Data), 7u);
    EXPECT_EQ(layout.stabilizers.size() / 2, 3u);
    EXPECT_EQ(layout.num_qubits(), 13u);
    for (const auto &s : layout.stabilizers) {
        EXPECT_EQ(s.data.size(), 4u);
    }
}

TEST(layout, rejects_bad_distance) {
    EXPECT_THROW(build_layout({CodeKind::Surface, 4, Basis::Z}), std::invalid_argument);
    EXPECT_THROW(build_layout({CodeKind::Colour, 1, Basis::Z}), std::invalid_argument);
    EXPECT_THROW(build_layout({CodeKind::Surface, -3, Basis::Z}), std::invalid_argument);
}

TEST(layout, deterministic_row_major_ids) {
    for (auto kind : {CodeKind::Surface, CodeKind::Colour}) {
        auto a = build_layout({kind, 5, Basis::Z});
        auto b = build_layout({kind, 5, Basis::Z});
        EXPECT_EQ(dump_layout(a), dump_layout(b));
        for (size_t i = 1; i < a.qubits.size(); i++) {
            auto p = a.qubits[i - 1].pos, q = a.qubits[i].pos;
            EXPECT_TRUE(p.y < q.y || (p.y == q.y && p.x < q.x));
            EXPECT_EQ(a.qubits[i].id, i);
        }
    }
}

TEST(layout, stabilizer_members_are_adjacent) {
    for (int d = 3; d <= 15; d += 2) {
        auto s = build_layout({CodeKind::Surface, d, Basis::Z});
        for (const auto &st : s.stabilizers) {
            EXPECT_TRUE(st.data.size() == 2 || st.data.size() == 4);
            for (auto q : st.data) {
                auto p = s.qubits[q].pos;
                EXPECT_EQ(std::abs(p.x - st.pos.x), 1);
                EXPECT_EQ(std::abs(p.y - st.pos.y), 1);
            }
        }
        auto c = build_layout({CodeKind::Colour, d, Basis::Z});
        for (const auto &st : c.stabilizers) {
            EXPECT_TRUE(st.data.size() == 4 || st.data.size() == 6);
            for (auto q : st.data) {
                auto p = c.qubits[q].pos;
                int dx = std::abs(p.x - st.pos.x), dy = std::abs(p.y - st.pos.y);
                EXPECT_TRUE((dx == 2 && dy == 0) || (dx == 1 && dy == 1));
            }
        }
    }
}

TEST(layout, stabilizer_participation_bounds) {
    for (int d = 3; d <= 15; d += 2) {
        auto s = build_layout({CodeKind::Surface, d, Basis::Z});
        std::map<std::pair<uint32_t, Basis>, int> uses;
        for (const auto &st : s.stabilizers) {
            for (auto q : st.data) {
                uses[{q, st.basis}]++;
            }
        }
        for (auto &[k, v] : uses) {
            EXPECT_LE(v, 2);
        }
        auto c = build_layout({CodeKind::Colour, d, Basis::Z});
        std::map<uint32_t, int> cells;
        for (size_t k = 0; k < c.stabilizers.size(); k += 2) {
            for (auto q : c.stabilizers[k].data) {
                cells[q]++;
            }
        }
        for (auto &[k, v] : cells) {
            EXPECT_LE(v, 3);
            EXPECT_GE(v, 1);
        }
    }
}

TEST(layout, stabilizers_commute) {
    for (auto kind : {CodeKind::Surface, CodeKind::Colour}) {
        for (int d = 3; d <= 9; d += 2) {
            auto l = build_layout({kind, d, Basis::Z});
            for (const auto &a : l.stabilizers) {
                for (const auto &b : l.stabilizers) {
                    if (a.basis == b.basis) {
                        continue;
                    }
                    std::vector<uint32_t> common;
                    std::set_intersection(a.data.begin(), a.data.end(), b.data.begin(), b.data.end(),
                                          std::back_inserter(common));
                    EXPECT_EQ(common.size() % 2, 0u);
                }
            }
        }
    }
}

TEST(layout, observable_support) {
    for (int d = 3; d <= 9; d += 2) {
        auto z = build_layout({CodeKind::Surface, d, Basis::Z});
        ASSERT_EQ(z.observables.size(), 1u);
        ASSERT_EQ(z.observables[0].size(), size_t(d));
        for (auto q : z.observables[0]) {
            EXPECT_EQ(z.qubits[q].pos.x, 1);
        }
        auto x = build_layout({CodeKind::Surface, d, Basis::X});
        for (auto q : x.observables[0]) {
            EXPECT_EQ(x.qubits[q].pos.y, 1);
        }
        auto c = build_layout({CodeKind::Colour, d, Basis::Z});
        ASSERT_EQ(c.observables[0].size(), size_t(d));
        for (auto q : c.observables[0]) {
            EXPECT_EQ(c.qubits[q].pos.y, 0);
        }
        // The observable commutes with every stabilizer of the other basis.
        for (const auto *l : {&z, &c}) {
            for (const auto &st : l->stabilizers) {
                if (st.basis != Basis::X) {
                    continue;
                }
                std::vector<uint32_t> common;
                std::set_intersection(st.data.begin(), st.data.end(), l->observables[0].begin(),
                                      l->observables[0].end(), std::back_inserter(common));
                EXPECT_EQ(common.size() % 2, 0u);
            }
        }
    }
}

TEST(layout, normalized_positions_surface) {
    auto l = build_layout({CodeKind::Surface, 3, Basis::Z});
    auto pos = normalized_positions(l);
    double min_x = 1, max_x = -1, min_y = 1, max_y = -1;
    for (auto [x, y] : pos) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
    }
    EXPECT_EQ(min_x, -0.5);
    EXPECT_EQ(max_x, 0.5);
    EXPECT_EQ(min_y, -0.5);
    EXPECT_EQ(max_y, 0.5);
    for (size_t s = 0; s < l.stabilizers.size(); s++) {
        if (l.stabilizers[s].pos == Coord{2, 2}) {
            EXPECT_NEAR(pos[s].first, -1.0 / 6, 1e-15);
        }
        if (l.stabilizers[s].pos.x == 0) {
            EXPECT_EQ(pos[s].first, -0.5);
        }
    }
}

TEST(layout, normalized_positions_degenerate_axis) {
    QubitLayout l;
    l.stabilizers.push_back({0, Basis::Z, {}, 0, std::nullopt, {4, 0}});
    l.stabilizers.push_back({1, Basis::Z, {}, 1, std::nullopt, {4, 6}});
    l.stabilizers.push_back({2, Basis::Z, {}, 2, std::nullopt, {4, 3}});
    auto pos = normalized_positions(l);
    for (auto [x, y] : pos) {
        EXPECT_EQ(x, 0.0);
    }
    EXPECT_EQ(pos[2].second, 0.0);
}

TEST(layout, normalized_positions_centre_of_symmetric_patch) {
    QubitLayout l;
    int k = 0;
    for (int y = 0; y <= 4; y += 2) {
        for (int x = 0; x <= 4; x += 2) {
            l.stabilizers.push_back({uint32_t(k), Basis::Z, {}, uint32_t(k), std::nullopt, {x, y}});
            k++;
        }
    }
    auto pos = normalized_positions(l);
    EXPECT_EQ(pos[4], std::make_pair(0.0, 0.0));
    EXPECT_EQ(pos[0], std::make_pair(-0.5, -0.5));
}

TEST(layout, dump_format) {
    auto l = build_layout({CodeKind::Surface, 3, Basis::Z});
    std::string dump = dump_layout(l);
    EXPECT_EQ(dump.substr(0, dump.find('\n')), "0 measure 4 0");
    EXPECT_NE(dump.find("\n1 data 1 1\n"), std::string::npos);
    auto c = build_layout({CodeKind::Colour, 3, Basis::Z});
    std::string cd = dump_layout(c);
    EXPECT_NE(cd.find(" X "), std::string::npos);
}
