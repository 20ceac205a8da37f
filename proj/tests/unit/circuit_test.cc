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

#include "aqlab/circuit.h"

#include "aqlab/sim.h"
#include "gtest/gtest.h"

using namespace aqlab;

TEST(circuit, parse_simple) {
    Circuit c = parse_circuit("H 0\nCZ 0 1\nM 1");
    EXPECT_EQ(c.instructions().size(), 3u);
    EXPECT_EQ(c.num_measurements(), 1u);
    EXPECT_EQ(c.num_qubits(), 2u);
}

TEST(circuit, parse_detector) {
    Circuit c = parse_circuit("M 0 1\nDETECTOR(1,2,0) rec[-1] rec[-2]");
    ASSERT_EQ(c.num_detectors(), 1u);
    EXPECT_EQ(c.detectors()[0].measurements, (std::vector<uint32_t>{0, 1}));
    EXPECT_EQ(c.detectors()[0].coords, (std::vector<double>{1, 2, 0}));
    EXPECT_EQ(serialize_circuit(c), "M 0 1\nDETECTOR(1, 2, 0) rec[-1] rec[-2]\n");
}

TEST(circuit, parse_errors_carry_position) {
    try {
        parse_circuit("H 0\nFOO 1\n");
        FAIL();
    } catch (const ParseError &e) {
        EXPECT_EQ(e.line, 2u);
        EXPECT_EQ(e.column, 1u);
    }
    try {
        parse_circuit("M 0\nDETECTOR rec[-2]");
        FAIL();
    } catch (const ParseError &e) {
        EXPECT_EQ(e.line, 2u);
    }
    try {
        parse_circuit("X_ERROR(0.1 0");
        FAIL();
    } catch (const ParseError &e) {
        EXPECT_EQ(e.line, 1u);
        EXPECT_GT(e.column, 10u);
    }
    EXPECT_THROW(parse_circuit("X_ERROR(1.5) 0"), ParseError);
    EXPECT_THROW(parse_circuit("CZ 0 1 1 2"), ParseError);
    EXPECT_THROW(parse_circuit("CZ 0"), ParseError);
}

TEST(circuit, comments_and_blank_lines) {
    Circuit c = parse_circuit("# header\n\nR 0 1  # reset\nTICK\nM 0\n");
    EXPECT_EQ(c.instructions().size(), 3u);
}

TEST(circuit, format_double_shortest) {
    EXPECT_EQ(format_double(0.01), "0.01");
    EXPECT_EQ(format_double(1), "1");
    EXPECT_EQ(format_double(-2), "-2");
    EXPECT_EQ(format_double(canonical_probability(0.002 / 10)), "0.0002");
    EXPECT_EQ(format_double(canonical_probability(5 * 0.002)), "0.01");
}

TEST(circuit, surface_counts) {
    Circuit c = build_memory_circuit({CodeKind::Surface, 3, Basis::Z}, 2, {0});
    EXPECT_EQ(c.num_measurements(), 25u);
    EXPECT_EQ(c.num_detectors(), 16u);
    EXPECT_EQ(c.num_observables(), 1u);
    EXPECT_EQ(c.observables()[0].size(), 3u);
}

TEST(circuit, colour_counts) {
    Circuit c = build_memory_circuit({CodeKind::Colour, 3, Basis::Z}, 1, {0});
    EXPECT_EQ(c.num_measurements(), 19u);
    size_t m_instr = 0;
    for (const auto &i : c.instructions()) {
        if (i.op == Op::M) {
            m_instr++;
        }
    }
    EXPECT_EQ(m_instr, 3u);
    // Cycle 0: 3 X flags, 3 Z stabilizers, 3 Z flags; terminal: 3 Z.
    EXPECT_EQ(c.num_detectors(), 12u);
    Circuit c3 = build_memory_circuit({CodeKind::Colour, 3, Basis::Z}, 3, {0});
    EXPECT_EQ(c3.num_detectors(), 9u + 2 * 12u + 3u);
    EXPECT_EQ(c3.num_measurements() - 7, 3u * 2 * 3 * 2);
}

TEST(circuit, rejects_zero_cycles) {
    EXPECT_THROW(build_memory_circuit({CodeKind::Surface, 3, Basis::Z}, 0, {0}), std::invalid_argument);
}

TEST(circuit, round_trip_builder_corpus) {
    for (auto kind : {CodeKind::Surface, CodeKind::Colour}) {
        for (int d : {3, 5}) {
            for (uint32_t cycles : {1u, 2u, 10u}) {
                for (double p : {0.0, 0.005}) {
                    Circuit c = build_memory_circuit({kind, d, Basis::Z}, cycles, {p});
                    std::string text = serialize_circuit(c);
                    Circuit back = parse_circuit(text);
                    EXPECT_EQ(back, c);
                    EXPECT_EQ(serialize_circuit(back), text);
                    EXPECT_EQ(back.num_detectors(), c.num_detectors());
                }
            }
        }
    }
}

TEST(circuit, builder_detectors_are_deterministic) {
    for (auto kind : {CodeKind::Surface, CodeKind::Colour}) {
        for (auto basis : {Basis::X, Basis::Z}) {
            for (int d : {3, 5}) {
                for (uint32_t cycles : {1u, 2u, 3u}) {
                    Circuit c = build_memory_circuit({kind, d, basis}, cycles, {0.001});
                    EXPECT_NO_THROW(reference_run(c));
                }
            }
        }
    }
}

TEST(circuit, flag_references_are_zero) {
    Circuit c = build_memory_circuit({CodeKind::Colour, 3, Basis::Z}, 2, {0});
    BitVec ref = reference_run(c);
    const auto &info = *c.info();
    for (const auto &cycle : info.flag_meas) {
        for (auto m : cycle) {
            EXPECT_FALSE(ref.get(m));
        }
    }
}

TEST(circuit, detector_cycles_nondecreasing) {
    Circuit c = build_memory_circuit({CodeKind::Colour, 5, Basis::X}, 4, {0.002});
    for (size_t k = 1; k < c.num_detectors(); k++) {
        EXPECT_LE(c.detectors()[k - 1].coords[2], c.detectors()[k].coords[2]);
    }
    EXPECT_THROW(parse_circuit("M 0\nDETECTOR(0, 0, 1) rec[-1]\nDETECTOR(0, 0, 0) rec[-1]"), ParseError);
}

TEST(si1000, methods_snippet) {
    Circuit clean = parse_circuit("M 7 8 9 10 11 12\nR 7 8 9 10 11 12\n");
    Circuit noisy = apply_si1000(clean, {0.002}, 13);
    EXPECT_EQ(serialize_circuit(noisy),
              "X_ERROR(0.01) 7 8 9 10 11 12\n"
              "M 7 8 9 10 11 12\n"
              "DEPOLARIZE1(0.0002) 0 1 2 3 4 5 6\n"
              "DEPOLARIZE1(0.004) 0 1 2 3 4 5 6\n"
              "R 7 8 9 10 11 12\n"
              "X_ERROR(0.004) 7 8 9 10 11 12\n"
              "DEPOLARIZE1(0.0002) 0 1 2 3 4 5 6\n"
              "DEPOLARIZE1(0.004) 0 1 2 3 4 5 6\n");
}

TEST(si1000, gates_and_idles) {
    Circuit clean = parse_circuit("H 0\nCZ 1 2\nTICK\nH 1\nTICK\n");
    Circuit noisy = apply_si1000(clean, {0.001});
    EXPECT_EQ(serialize_circuit(noisy),
              "H 0\n"
              "DEPOLARIZE1(0.0001) 0\n"
              "CZ 1 2\n"
              "DEPOLARIZE2(0.001) 1 2\n"
              "TICK\n"
              "H 1\n"
              "DEPOLARIZE1(0.0001) 1\n"
              "DEPOLARIZE1(0.0001) 0 2\n"
              "TICK\n");
}

TEST(si1000, zero_noise_is_identity) {
    Circuit clean = build_memory_circuit({CodeKind::Surface, 3, Basis::Z}, 3, {0});
    EXPECT_EQ(apply_si1000(clean, {0}), clean);
}

TEST(si1000, rejects_noisy_input) {
    Circuit noisy = parse_circuit("X_ERROR(0.1) 0\nM 0");
    EXPECT_THROW(apply_si1000(noisy, {0.001}), std::invalid_argument);
    EXPECT_THROW(apply_si1000(parse_circuit("M 0"), {0.2}), std::invalid_argument);
}

TEST(si1000, preserves_clean_instructions) {
    Circuit clean = build_memory_circuit({CodeKind::Colour, 5, Basis::Z}, 2, {0});
    Circuit noisy = apply_si1000(clean, {0.003});
    std::vector<Instruction> kept;
    for (const auto &i : noisy.instructions()) {
        if (!is_noise(i.op)) {
            kept.push_back(i);
        }
    }
    EXPECT_EQ(kept, clean.instructions());
}

TEST(unified_view, surface_is_identity) {
    CodeSpec spec{CodeKind::Surface, 3, Basis::Z};
    auto view = unified_cycle_view(spec, 8 * 4 + 9);
    for (uint32_t t = 0; t < 4; t++) {
        for (uint32_t s = 0; s < 8; s++) {
            EXPECT_EQ(view[t * 8 + s].cycle, t);
            EXPECT_EQ(view[t * 8 + s].slot, s);
            EXPECT_EQ(view[t * 8 + s].channel, Channel::Measurement);
        }
    }
    EXPECT_EQ(view.back().cycle, 4u);
}

TEST(unified_view, colour_d3_interleaves) {
    CodeSpec spec{CodeKind::Colour, 3, Basis::Z};
    auto view = unified_cycle_view(spec, 19);
    std::vector<uint32_t> slots;
    std::vector<Channel> channels;
    for (size_t k = 0; k < 12; k++) {
        EXPECT_EQ(view[k].cycle, 0u);
        slots.push_back(view[k].slot);
        channels.push_back(view[k].channel);
    }
    EXPECT_EQ(slots, (std::vector<uint32_t>{0, 2, 4, 0, 2, 4, 1, 3, 5, 1, 3, 5}));
    EXPECT_EQ(channels[3], Channel::Flag);
    for (size_t k = 12; k < 19; k++) {
        EXPECT_EQ(view[k].cycle, 1u);
    }
    // Agrees with the builder bookkeeping.
    Circuit c = build_memory_circuit(spec, 1, {0});
    const auto &info = *c.info();
    for (uint32_t s = 0; s < 6; s++) {
        EXPECT_EQ(view[info.stabilizer_meas[0][s]].slot, s);
        EXPECT_EQ(view[info.flag_meas[0][s]].slot, s);
        EXPECT_EQ(view[info.flag_meas[0][s]].channel, Channel::Flag);
    }
}

TEST(unified_view, rejects_partial_cycles) {
    EXPECT_THROW(unified_cycle_view({CodeKind::Colour, 3, Basis::Z}, 20), std::invalid_argument);
    EXPECT_THROW(unified_cycle_view({CodeKind::Surface, 3, Basis::Z}, 9), std::invalid_argument);
}
