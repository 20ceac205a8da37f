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

#include <algorithm>
#include <stdexcept>

#include "aqlab/circuit.h"

namespace aqlab {

Circuit apply_si1000(const Circuit &clean, const NoiseParams &noise, size_t num_qubits) {
    noise.validate();
    if (clean.has_noise()) {
        throw std::invalid_argument("apply_si1000 expects a circuit without noise channels");
    }
    const double p = noise.p;
    const size_t n = std::max(num_qubits, clean.num_qubits());
    Circuit out;

    auto emit = [&](Op op, double prob, std::vector<uint32_t> targets) {
        prob = canonical_probability(prob);
        if (prob > 0 && !targets.empty()) {
            out.append(op, std::move(targets), {prob});
        }
    };
    auto others = [&](const std::vector<uint32_t> &targets) {
        std::vector<bool> hit(n, false);
        for (auto q : targets) {
            hit[q] = true;
        }
        std::vector<uint32_t> rest;
        for (uint32_t q = 0; q < n; q++) {
            if (!hit[q]) {
                rest.push_back(q);
            }
        }
        return rest;
    };

    std::vector<bool> touched(n, false);
    bool moment_has_gate = false;
    bool moment_has_mr = false;
    for (const auto &inst : clean.instructions()) {
        switch (inst.op) {
            case Op::H:
                out.append(inst);
                emit(Op::DEPOLARIZE1, p / 10, inst.targets);
                break;
            case Op::CZ:
                out.append(inst);
                emit(Op::DEPOLARIZE2, p, inst.targets);
                break;
            case Op::M:
            case Op::MX: {
                emit(inst.op == Op::M ? Op::X_ERROR : Op::Z_ERROR, 5 * p, inst.targets);
                out.append(inst);
                auto rest = others(inst.targets);
                emit(Op::DEPOLARIZE1, p / 10, rest);
                emit(Op::DEPOLARIZE1, 2 * p, rest);
                break;
            }
            case Op::R:
            case Op::RX: {
                out.append(inst);
                emit(inst.op == Op::R ? Op::X_ERROR : Op::Z_ERROR, 2 * p, inst.targets);
                auto rest = others(inst.targets);
                emit(Op::DEPOLARIZE1, p / 10, rest);
                emit(Op::DEPOLARIZE1, 2 * p, rest);
                break;
            }
            case Op::TICK: {
                if (moment_has_gate && !moment_has_mr) {
                    std::vector<uint32_t> idle;
                    for (uint32_t q = 0; q < n; q++) {
                        if (!touched[q]) {
                            idle.push_back(q);
                        }
                    }
                    emit(Op::DEPOLARIZE1, p / 10, idle);
                }
                out.append(inst);
                std::fill(touched.begin(), touched.end(), false);
                moment_has_gate = moment_has_mr = false;
                continue;
            }
            default:
                out.append(inst);
                continue;
        }
        for (auto q : inst.targets) {
            touched[q] = true;
        }
        if (is_unitary(inst.op)) {
            moment_has_gate = true;
        } else {
            moment_has_mr = true;
        }
    }
    out.set_info(clean.info());
    return out;
}

namespace {

class Builder {
   public:
    explicit Builder(Circuit &c) : c_(c) {
    }

    void op(Op op, std::vector<uint32_t> targets) {
        if (!targets.empty()) {
            c_.append(op, std::move(targets));
        }
    }

    void tick() {
        c_.append(Op::TICK, {});
    }

    /// Measures `targets` and returns their measurement indices.
    std::vector<uint32_t> measure(const std::vector<uint32_t> &targets, Op op = Op::M) {
        std::vector<uint32_t> idx;
        uint32_t base = static_cast<uint32_t>(c_.num_measurements());
        for (size_t k = 0; k < targets.size(); k++) {
            idx.push_back(base + static_cast<uint32_t>(k));
        }
        op == Op::M ? this->op(Op::M, targets) : this->op(Op::MX, targets);
        return idx;
    }

    void detector(const std::vector<uint32_t> &abs, Coord pos, uint32_t t) {
        uint32_t now = static_cast<uint32_t>(c_.num_measurements());
        std::vector<uint32_t> lookback;
        for (auto m : abs) {
            lookback.push_back(now - m);
        }
        c_.append(Op::DETECTOR, std::move(lookback), {double(pos.x), double(pos.y), double(t)});
    }

    void observable(const std::vector<uint32_t> &abs, uint32_t index) {
        uint32_t now = static_cast<uint32_t>(c_.num_measurements());
        std::vector<uint32_t> lookback;
        for (auto m : abs) {
            lookback.push_back(now - m);
        }
        c_.append(Op::OBSERVABLE_INCLUDE, std::move(lookback), {double(index)});
    }

   private:
    Circuit &c_;
};

void emit_coords(const QubitLayout &layout, Circuit &c) {
    for (const auto &q : layout.qubits) {
        c.append(Op::QUBIT_COORDS, {q.id}, {double(q.pos.x), double(q.pos.y)});
    }
}

std::vector<uint32_t> all_qubits(const QubitLayout &layout) {
    std::vector<uint32_t> out;
    for (const auto &q : layout.qubits) {
        out.push_back(q.id);
    }
    return out;
}

// Detector bookkeeping shared by both codes.
struct Recorder {
    ExperimentInfo &info;
    Builder &b;

    void event(uint32_t t, uint32_t slot, std::vector<uint32_t> meas, Coord pos, bool flag) {
        b.detector(meas, pos, t);
        info.detector_roles.push_back({t, slot, flag});
    }
};

// Surface data qubit (2i+1, 2j+1) is kept Hadamard-rotated when i + j is odd.
bool surface_rotated(const Qubit &q) {
    return ((q.pos.x / 2 + q.pos.y / 2) % 2) != 0;
}

void build_surface_body(const QubitLayout &layout, uint32_t cycles, Circuit &c, ExperimentInfo &info) {
    Builder b(c);
    Recorder rec{info, b};
    const Basis basis = layout.spec.basis;
    std::vector<uint32_t> data, rotated, plain, anc;
    for (const auto &q : layout.qubits) {
        if (q.role == QubitRole::Data) {
            data.push_back(q.id);
            (surface_rotated(q) ? rotated : plain).push_back(q.id);
        }
    }
    for (const auto &s : layout.stabilizers) {
        anc.push_back(s.measure);
    }
    const std::vector<uint32_t> &init_h = basis == Basis::Z ? rotated : plain;

    // Corner offsets in CZ layer order.
    static constexpr Coord kXOrder[4] = {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
    static constexpr Coord kZOrder[4] = {{-1, -1}, {1, -1}, {-1, 1}, {1, 1}};
    std::vector<std::vector<uint32_t>> layers(4);
    for (const auto &s : layout.stabilizers) {
        const auto &order = s.basis == Basis::X ? kXOrder : kZOrder;
        for (int k = 0; k < 4; k++) {
            if (auto q = layout.find({s.pos.x + order[k].x, s.pos.y + order[k].y})) {
                layers[k].push_back(s.measure);
                layers[k].push_back(*q);
            }
        }
    }

    emit_coords(layout, c);
    b.op(Op::R, all_qubits(layout));
    b.tick();
    std::vector<uint32_t> prev;
    for (uint32_t t = 0; t < cycles; t++) {
        std::vector<uint32_t> h0 = anc;
        if (t == 0) {
            h0.insert(h0.end(), init_h.begin(), init_h.end());
            std::sort(h0.begin(), h0.end());
        }
        b.op(Op::H, h0);
        b.tick();
        b.op(Op::CZ, layers[0]);
        b.tick();
        b.op(Op::H, data);
        b.tick();
        b.op(Op::CZ, layers[1]);
        b.tick();
        b.op(Op::CZ, layers[2]);
        b.tick();
        b.op(Op::H, data);
        b.tick();
        b.op(Op::CZ, layers[3]);
        b.tick();
        b.op(Op::H, anc);
        b.tick();
        auto meas = b.measure(anc);
        info.stabilizer_meas.push_back(meas);
        info.flag_meas.push_back(std::vector<uint32_t>(anc.size(), ExperimentInfo::kNone));
        info.cycle_end.push_back(static_cast<uint32_t>(c.num_measurements()));
        for (size_t s = 0; s < layout.stabilizers.size(); s++) {
            const auto &st = layout.stabilizers[s];
            if (t == 0) {
                if (st.basis == basis) {
                    rec.event(t, uint32_t(s), {meas[s]}, st.pos, false);
                }
            } else {
                rec.event(t, uint32_t(s), {prev[s], meas[s]}, st.pos, false);
            }
        }
        prev = meas;
        b.tick();
        if (t + 1 < cycles) {
            b.op(Op::R, anc);
            b.tick();
        }
    }

    // Data readout.
    info.readout = Circuit();
    Builder rb(info.readout);
    rb.op(Op::H, basis == Basis::Z ? rotated : plain);
    rb.tick();
    rb.measure(data);

    b.op(Op::H, basis == Basis::Z ? rotated : plain);
    b.tick();
    info.data_meas = b.measure(data);
    for (size_t s = 0; s < layout.stabilizers.size(); s++) {
        const auto &st = layout.stabilizers[s];
        if (st.basis != basis) {
            continue;
        }
        std::vector<uint32_t> m = {prev[s]};
        for (auto q : st.data) {
            m.push_back(info.data_meas[std::lower_bound(data.begin(), data.end(), q) - data.begin()]);
        }
        rec.event(cycles, uint32_t(s), m, st.pos, false);
        info.terminal_stabilizers.push_back(uint32_t(s));
    }
}

// Vertex angle index k (0..5 for 0, 60, ..., 300 degrees) relative to a cell centre.
int hex_angle(Coord centre, Coord v) {
    int dx = v.x - centre.x, dy = v.y - centre.y;
    if (dy == 0) {
        return dx > 0 ? 0 : 3;
    }
    if (dy > 0) {
        return dx > 0 ? 1 : 2;
    }
    return dx < 0 ? 4 : 5;
}

void build_colour_body(const QubitLayout &layout, uint32_t cycles, Circuit &c, ExperimentInfo &info) {
    Builder b(c);
    Recorder rec{info, b};
    const Basis basis = layout.spec.basis;
    const size_t cells = layout.stabilizers.size() / 2;
    std::vector<uint32_t> data = layout.ids(QubitRole::Data);
    std::vector<uint32_t> ms, fs, mfs;
    for (size_t k = 0; k < cells; k++) {
        ms.push_back(layout.stabilizers[2 * k].measure);
        fs.push_back(*layout.stabilizers[2 * k].flag);
    }
    mfs = ms;
    mfs.insert(mfs.end(), fs.begin(), fs.end());
    std::sort(mfs.begin(), mfs.end());

    // Measure qubit covers angles 0, 60, 120 in layers 0, 1, 2; the flag covers
    // 180, 240, 300.
    std::vector<std::vector<uint32_t>> layers(3);
    std::vector<uint32_t> bell;
    for (size_t k = 0; k < cells; k++) {
        const auto &st = layout.stabilizers[2 * k];
        for (auto q : st.data) {
            int a = hex_angle(st.pos, layout.qubits[q].pos);
            uint32_t anc = a < 3 ? ms[k] : fs[k];
            layers[a % 3].push_back(anc);
            layers[a % 3].push_back(q);
        }
        bell.push_back(ms[k]);
        bell.push_back(fs[k]);
    }

    emit_coords(layout, c);
    b.op(Op::R, all_qubits(layout));
    b.tick();
    if (basis == Basis::X) {
        b.op(Op::H, data);
        b.tick();
    }
    std::vector<uint32_t> prev(2 * cells);
    for (uint32_t t = 0; t < cycles; t++) {
        std::vector<uint32_t> stab_meas(2 * cells), flag_meas(2 * cells);
        for (int sub = 0; sub < 2; sub++) {
            const bool x_sub = sub == 0;
            if (t > 0 || sub > 0) {
                b.op(Op::R, mfs);
                b.tick();
            }
            b.op(Op::H, mfs);
            b.tick();
            b.op(Op::CZ, bell);
            b.tick();
            std::vector<uint32_t> h = fs;
            if (x_sub) {
                h.insert(h.end(), data.begin(), data.end());
                std::sort(h.begin(), h.end());
            }
            b.op(Op::H, h);
            b.tick();
            for (int l = 0; l < 3; l++) {
                b.op(Op::CZ, layers[l]);
                b.tick();
            }
            b.op(Op::H, h);
            b.tick();
            b.op(Op::CZ, bell);
            b.tick();
            b.op(Op::H, mfs);
            b.tick();
            std::vector<uint32_t> order = ms;
            order.insert(order.end(), fs.begin(), fs.end());
            auto meas = b.measure(order);
            for (size_t k = 0; k < cells; k++) {
                stab_meas[2 * k + sub] = meas[k];
                flag_meas[2 * k + sub] = meas[cells + k];
            }
            Basis sub_basis = x_sub ? Basis::X : Basis::Z;
            for (size_t k = 0; k < cells; k++) {
                uint32_t slot = uint32_t(2 * k + sub);
                const auto &st = layout.stabilizers[slot];
                if (t == 0) {
                    if (sub_basis == basis) {
                        rec.event(t, slot, {meas[k]}, st.pos, false);
                    }
                } else {
                    rec.event(t, slot, {prev[slot], meas[k]}, st.pos, false);
                }
            }
            for (size_t k = 0; k < cells; k++) {
                uint32_t slot = uint32_t(2 * k + sub);
                rec.event(t, slot, {meas[cells + k]}, layout.stabilizers[slot].pos, true);
            }
            b.tick();
        }
        prev = stab_meas;
        info.stabilizer_meas.push_back(stab_meas);
        info.flag_meas.push_back(flag_meas);
        info.cycle_end.push_back(static_cast<uint32_t>(c.num_measurements()));
    }

    info.readout = Circuit();
    Builder rb(info.readout);
    if (basis == Basis::X) {
        rb.op(Op::H, data);
        rb.tick();
    }
    rb.measure(data);

    if (basis == Basis::X) {
        b.op(Op::H, data);
        b.tick();
    }
    info.data_meas = b.measure(data);
    for (size_t s = 0; s < layout.stabilizers.size(); s++) {
        const auto &st = layout.stabilizers[s];
        if (st.basis != basis) {
            continue;
        }
        std::vector<uint32_t> m = {prev[s]};
        for (auto q : st.data) {
            m.push_back(info.data_meas[std::lower_bound(data.begin(), data.end(), q) - data.begin()]);
        }
        rec.event(cycles, uint32_t(s), m, st.pos, false);
        info.terminal_stabilizers.push_back(uint32_t(s));
    }
}

}  // namespace

Circuit build_memory_circuit(const CodeSpec &spec, uint32_t cycles, const NoiseParams &noise) {
    if (cycles < 1) {
        throw std::invalid_argument("a memory experiment needs at least one cycle");
    }
    noise.validate();
    auto info = std::make_shared<ExperimentInfo>();
    info->layout = build_layout(spec);
    info->cycles = cycles;
    info->noise = noise;
    Circuit clean;
    if (spec.kind == CodeKind::Surface) {
        build_surface_body(info->layout, cycles, clean, *info);
    } else {
        build_colour_body(info->layout, cycles, clean, *info);
    }
    Builder b(clean);
    std::vector<uint32_t> obs;
    const auto data = info->layout.ids(QubitRole::Data);
    for (auto q : info->layout.observables[0]) {
        obs.push_back(info->data_meas[std::lower_bound(data.begin(), data.end(), q) - data.begin()]);
    }
    b.observable(obs, 0);

    size_t n = info->layout.num_qubits();
    if (noise.p > 0) {
        info->readout = apply_si1000(info->readout, noise, n);
        Circuit noisy = apply_si1000(clean, noise, n);
        noisy.set_info(info);
        return noisy;
    }
    clean.set_info(info);
    return clean;
}

}  // namespace aqlab
