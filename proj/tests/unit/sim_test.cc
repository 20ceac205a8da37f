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

#include "aqlab/sim.h"

#include <cmath>

#include "gtest/gtest.h"

using namespace aqlab;

namespace {

size_t instruction_after_cycle(const Circuit &c, uint32_t cycle) {
    // Index of the first TICK following the measurement that completes `cycle`.
    size_t meas = 0;
    const auto &info = *c.info();
    const auto &insts = c.instructions();
    for (size_t i = 0; i < insts.size(); i++) {
        if (is_measurement(insts[i].op)) {
            meas += insts[i].targets.size();
        }
        if (meas == info.cycle_end[cycle]) {
            for (size_t j = i; j < insts.size(); j++) {
                if (insts[j].op == Op::TICK) {
                    return j;
                }
            }
        }
    }
    return insts.size() - 1;
}

}  // namespace

TEST(tableau, bell_pair_correlations) {
    for (uint64_t seed = 0; seed < 20; seed++) {
        Rng rng(seed);
        Tableau t(2);
        t.h(0);
        t.cnot(0, 1);
        EXPECT_TRUE(t.is_consistent());
        EXPECT_FALSE(t.peek_z(0).has_value());
        bool a = t.measure_z(0, &rng);
        EXPECT_EQ(t.peek_z(1), std::optional<bool>(a));
    }
}

TEST(tableau, cz_and_paulis) {
    Tableau t(2);
    t.h(0);
    t.h(1);
    t.cz(0, 1);
    t.h(1);
    // Bell pair again; X-type parity checks via measure_x.
    Tableau u = t;
    bool a = u.measure_x(0, nullptr, true);
    bool b = u.measure_x(1, nullptr, false);
    EXPECT_EQ(a, b);
    Tableau v(1);
    v.x(0);
    EXPECT_EQ(v.peek_z(0), std::optional<bool>(true));
    v.y(0);
    EXPECT_EQ(v.peek_z(0), std::optional<bool>(false));
    EXPECT_TRUE(v.is_consistent());
}

TEST(tableau, stays_consistent_under_random_cliffords) {
    Rng rng(7);
    Tableau t(6);
    for (int k = 0; k < 400; k++) {
        size_t a = rng.below(6), b = rng.below(6);
        switch (rng.below(4)) {
            case 0:
                t.h(a);
                break;
            case 1:
                if (a != b) {
                    t.cz(a, b);
                }
                break;
            case 2:
                t.measure_z(a, &rng);
                break;
            default:
                t.reset_x(a);
        }
    }
    EXPECT_TRUE(t.is_consistent());
}

TEST(reference, surface_z_stabilizers_zero) {
    Circuit c = build_memory_circuit({CodeKind::Surface, 3, Basis::Z}, 2, {0});
    BitVec ref = reference_run(c);
    const auto &info = *c.info();
    for (uint32_t t = 0; t < 2; t++) {
        for (size_t s = 0; s < info.num_slots(); s++) {
            if (info.layout.stabilizers[s].basis == Basis::Z) {
                EXPECT_FALSE(ref.get(info.stabilizer_meas[t][s]));
            }
        }
    }
}

TEST(reference, catches_nondeterministic_detector) {
    Circuit c = parse_circuit("H 0\nM 0\nDETECTOR rec[-1]\n");
    EXPECT_THROW(reference_run(c), NondeterministicError);
    Circuit ok = parse_circuit("H 0\nM 0\nM 0\nDETECTOR rec[-1] rec[-2]\n");
    EXPECT_NO_THROW(reference_run(ok));
    Circuit obs = parse_circuit("RX 0\nM 0\nOBSERVABLE_INCLUDE(0) rec[-1]\n");
    EXPECT_THROW(reference_run(obs), NondeterministicError);
}

TEST(frame, zero_noise_gives_no_events) {
    for (auto kind : {CodeKind::Surface, CodeKind::Colour}) {
        Circuit c = build_memory_circuit({kind, 3, Basis::Z}, 5, {0});
        ShotTable t = sample_table(c, 200, 1);
        EXPECT_EQ(detection_fraction(t), 0.0);
        for (size_t s = 0; s < t.num_shots(); s++) {
            EXPECT_FALSE(t.observable(s, 0));
        }
    }
}

TEST(frame, single_bulk_x_error_gives_space_like_pair) {
    Circuit c = build_memory_circuit({CodeKind::Surface, 5, Basis::Z}, 3, {0});
    const auto &info = *c.info();
    // Centre data qubit (5, 5); i + j = 4 is even, so the stored frame is the CSS frame.
    uint32_t q = *info.layout.find({5, 5});
    auto [dets, obs] = propagate_error(c, {instruction_after_cycle(c, 0), {{q, 1}}});
    auto fired = dets.set_bits();
    ASSERT_EQ(fired.size(), 2u);
    for (auto d : fired) {
        const auto &role = info.detector_roles[d];
        EXPECT_EQ(role.cycle, 1u);
        EXPECT_EQ(info.layout.stabilizers[role.slot].basis, Basis::Z);
    }
    EXPECT_FALSE(obs.any());
}

TEST(frame, deterministic_for_any_thread_count) {
    Circuit c = build_memory_circuit({CodeKind::Surface, 3, Basis::Z}, 10, {0.005});
    SampleOptions one, four;
    one.measurements = four.measurements = true;
    four.threads = 4;
    ShotTable a = sample_table(c, 1000, 42, one);
    ShotTable b = sample_table(c, 1000, 42, four);
    EXPECT_EQ(a, b);
    ShotTable c2 = sample_table(c, 1000, 43, one);
    EXPECT_FALSE(a == c2);
}

TEST(frame, chunks_concatenate) {
    Circuit c = build_memory_circuit({CodeKind::Colour, 3, Basis::Z}, 4, {0.005});
    ShotTable whole = sample_table(c, 256, 9);
    SampleOptions opts;
    opts.first_batch = 2;
    ShotTable tail = sample_table(c, 128, 9, opts);
    EXPECT_EQ(whole.slice(128, 256), tail);
}

TEST(frame, measurement_rows_match_detectors) {
    Circuit c = build_memory_circuit({CodeKind::Surface, 3, Basis::Z}, 4, {0.01});
    auto shots = sample_shots(c, 300, 5);
    BitVec ref = reference_run(c);
    for (const auto &s : shots) {
        for (size_t d = 0; d < c.num_detectors(); d++) {
            bool parity = false, ref_parity = false;
            for (auto m : c.detectors()[d].measurements) {
                parity ^= s.measurements.get(m);
                ref_parity ^= ref.get(m);
            }
            EXPECT_EQ(s.detection_events.get(d), parity ^ ref_parity);
        }
    }
}

TEST(frame, marginals_match_tableau_sampler) {
    // Small noisy circuit with random and deterministic measurements.
    Circuit c = build_memory_circuit({CodeKind::Surface, 3, Basis::Z}, 1, {0.02});
    ASSERT_LE(c.num_qubits(), 17u);
    Circuit small = parse_circuit(
        "R 0 1 2\nX_ERROR(0.1) 0\nH 0\nDEPOLARIZE1(0.2) 0\nCZ 0 1\nDEPOLARIZE2(0.3) 0 1\nH 1\n"
        "M 1\nMX 0\nR 1\nZ_ERROR(0.25) 2\nH 2\nM 2 1\nRX 2\nM 2\n");
    const size_t shots = 200;
    auto tab = tableau_sample_measurements(small, shots, 3);
    SampleOptions opts;
    opts.measurements = true;
    ShotTable frame = sample_table(small, 64 * 40, 4, opts);
    for (size_t m = 0; m < small.num_measurements(); m++) {
        double pt = 0, pf = 0;
        for (const auto &s : tab) {
            pt += s.get(m);
        }
        pt /= double(shots);
        for (size_t s = 0; s < frame.num_shots(); s++) {
            pf += frame.measurement(s, m);
        }
        pf /= double(frame.num_shots());
        double sigma = std::sqrt(std::max(pf * (1 - pf), 0.01) / double(shots));
        EXPECT_LT(std::abs(pt - pf), 4 * sigma) << "measurement " << m;
    }
}

TEST(frame, detection_fraction_arithmetic) {
    std::vector<ShotRecord> shots(10);
    for (auto &s : shots) {
        s.detection_events = BitVec(10);
    }
    EXPECT_EQ(detection_fraction(shots), 0.0);
    shots[3].detection_events.set(4, true);
    EXPECT_DOUBLE_EQ(detection_fraction(shots), 0.01);
}

TEST(frame, detection_fraction_near_five_percent) {
    Circuit c = build_memory_circuit({CodeKind::Surface, 3, Basis::Z}, 10, {0.0015});
    double f = detection_fraction(sample_table(c, 20000, 11));
    EXPECT_NEAR(f, 0.05, 0.01);
}

TEST(aux, final_cycle_matches_shot) {
    for (auto kind : {CodeKind::Surface, CodeKind::Colour}) {
        Circuit c = build_memory_circuit({kind, 3, Basis::Z}, 6, {0.01});
        SampleOptions opts;
        opts.aux = true;
        ShotTable t = sample_table(c, 500, 8, opts);
        ShotTable plain = sample_table(c, 500, 8);
        for (size_t s = 0; s < t.num_shots(); s++) {
            const auto &a = t.aux()[s];
            EXPECT_EQ(a.fake_ending_observable.get(5), t.observable(s, 0));
            EXPECT_EQ(t.detectors_of(s), plain.detectors_of(s));
        }
    }
}

TEST(aux, zero_noise_labels_are_zero) {
    Circuit c = build_memory_circuit({CodeKind::Colour, 3, Basis::Z}, 4, {0});
    SampleOptions opts;
    opts.aux = true;
    ShotTable t = sample_table(c, 64, 1, opts);
    for (const auto &a : t.aux()) {
        EXPECT_FALSE(a.fake_ending_observable.any());
        EXPECT_FALSE(a.noiseless_observable.any());
        for (const auto &f : a.fake_ending_final_stabilizers) {
            EXPECT_FALSE(f.any());
        }
    }
}

TEST(aux, attach_matches_direct_sampling) {
    Circuit c = build_memory_circuit({CodeKind::Surface, 3, Basis::Z}, 5, {0.01});
    ShotTable t = sample_table(c, 100, 77);
    attach_auxiliary_labels(c, t, 77);
    SampleOptions opts;
    opts.aux = true;
    EXPECT_EQ(t, sample_table(c, 100, 77, opts));
    ShotTable wrong = sample_table(c, 100, 78);
    EXPECT_THROW(attach_auxiliary_labels(c, wrong, 77), std::invalid_argument);
    Circuit parsed = parse_circuit(serialize_circuit(c));
    EXPECT_THROW(attach_auxiliary_labels(parsed, t, 77), std::invalid_argument);
}

TEST(aux, noiseless_observable_steps_after_inserted_error) {
    // Emulates a single X error on an observable qubit after cycle 3 of 10 by
    // sampling a circuit whose only noise is that error.
    Circuit clean = build_memory_circuit({CodeKind::Surface, 3, Basis::Z}, 10, {0});
    const auto &info = *clean.info();
    size_t at = instruction_after_cycle(clean, 2);
    uint32_t q = info.layout.observables[0][0];
    bool rotated = ((info.layout.qubits[q].pos.x / 2 + info.layout.qubits[q].pos.y / 2) % 2) != 0;
    Circuit c;
    for (size_t i = 0; i < clean.instructions().size(); i++) {
        c.append(clean.instructions()[i]);
        if (i == at) {
            c.append(rotated ? Op::Z_ERROR : Op::X_ERROR, {q}, {1.0});
        }
    }
    c.set_info(clean.info());
    SampleOptions opts;
    opts.aux = true;
    ShotTable t = sample_table(c, 64, 2, opts);
    for (const auto &a : t.aux()) {
        for (uint32_t k = 0; k < 10; k++) {
            EXPECT_EQ(a.noiseless_observable.get(k), k >= 3) << k;
        }
    }
    EXPECT_TRUE(t.observable(0, 0));
}
