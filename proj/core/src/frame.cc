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
#include <cmath>
#include <thread>

#include "aqlab/sim.h"

namespace aqlab {

namespace {

constexpr uint64_t kAuxStream = 0x6A09E667F3BCC909ull;

struct Frame {
    std::vector<uint64_t> x, z;
    std::vector<uint64_t> record;
};

// Applies Bernoulli(p) events over `count` slots of 64 lanes each; `fn(slot, lane_mask)`.
template <typename Fn>
void sample_hits(double p, size_t count, Rng &rng, Fn &&fn) {
    if (p <= 0 || count == 0) {
        return;
    }
    const uint64_t total = uint64_t(count) * 64;
    if (p >= 1) {
        for (uint64_t i = 0; i < total; i++) {
            fn(i >> 6, uint64_t{1} << (i & 63));
        }
        return;
    }
    const double log1mp = std::log1p(-p);
    uint64_t i = rng.geometric_gap(p, log1mp);
    while (i < total) {
        fn(i >> 6, uint64_t{1} << (i & 63));
        i += 1 + rng.geometric_gap(p, log1mp);
    }
}

struct RunFlags {
    bool noise = true;
    bool gauge = true;
};

// Runs `insts` on the 64-lane frame. `on_measure(count)` is called after every
// measurement instruction with the running measurement count.
template <typename Hook>
void run_frame(const std::vector<Instruction> &insts, Frame &f, Rng &rng, RunFlags flags, Hook &&on_measure) {
    auto gauge_word = [&]() -> uint64_t { return flags.gauge ? rng() : 0; };
    for (const auto &inst : insts) {
        const auto &t = inst.targets;
        switch (inst.op) {
            case Op::R:
                for (auto q : t) {
                    f.x[q] = 0;
                    f.z[q] = gauge_word();
                }
                break;
            case Op::RX:
                for (auto q : t) {
                    f.z[q] = 0;
                    f.x[q] = gauge_word();
                }
                break;
            case Op::M:
                for (auto q : t) {
                    f.record.push_back(f.x[q]);
                    f.z[q] ^= gauge_word();
                }
                on_measure(f.record.size());
                break;
            case Op::MX:
                for (auto q : t) {
                    f.record.push_back(f.z[q]);
                    f.x[q] ^= gauge_word();
                }
                on_measure(f.record.size());
                break;
            case Op::H:
                for (auto q : t) {
                    std::swap(f.x[q], f.z[q]);
                }
                break;
            case Op::CZ:
                for (size_t k = 0; k + 1 < t.size(); k += 2) {
                    f.z[t[k]] ^= f.x[t[k + 1]];
                    f.z[t[k + 1]] ^= f.x[t[k]];
                }
                break;
            case Op::X_ERROR:
                if (flags.noise) {
                    sample_hits(inst.args[0], t.size(), rng, [&](size_t k, uint64_t m) { f.x[t[k]] ^= m; });
                }
                break;
            case Op::Z_ERROR:
                if (flags.noise) {
                    sample_hits(inst.args[0], t.size(), rng, [&](size_t k, uint64_t m) { f.z[t[k]] ^= m; });
                }
                break;
            case Op::DEPOLARIZE1:
                if (flags.noise) {
                    sample_hits(inst.args[0], t.size(), rng, [&](size_t k, uint64_t m) {
                        uint64_t p = 1 + rng.below(3);
                        if (p & 1) {
                            f.x[t[k]] ^= m;
                        }
                        if (p & 2) {
                            f.z[t[k]] ^= m;
                        }
                    });
                }
                break;
            case Op::DEPOLARIZE2:
                if (flags.noise) {
                    sample_hits(inst.args[0], t.size() / 2, rng, [&](size_t k, uint64_t m) {
                        uint64_t p = 1 + rng.below(15);
                        uint32_t a = t[2 * k], b = t[2 * k + 1];
                        if (p & 1) {
                            f.x[a] ^= m;
                        }
                        if (p & 2) {
                            f.z[a] ^= m;
                        }
                        if (p & 4) {
                            f.x[b] ^= m;
                        }
                        if (p & 8) {
                            f.z[b] ^= m;
                        }
                    });
                }
                break;
            default:
                break;
        }
    }
}

uint64_t parity_word(const std::vector<uint64_t> &record, const std::vector<uint32_t> &meas) {
    uint64_t w = 0;
    for (auto m : meas) {
        w ^= record[m];
    }
    return w;
}

void init_frame(Frame &f, size_t n, Rng &rng, bool gauge) {
    f.x.assign(n, 0);
    f.z.resize(n);
    for (auto &w : f.z) {
        w = gauge ? rng() : 0;
    }
    f.record.clear();
}

// Per-batch auxiliary words, [cycle][...].
struct AuxWords {
    std::vector<uint64_t> fake_obs, noiseless_obs;
    std::vector<std::vector<uint64_t>> fake_final;
};

std::vector<size_t> observable_data_positions(const ExperimentInfo &info) {
    const auto data = info.layout.ids(QubitRole::Data);
    std::vector<size_t> pos;
    for (auto q : info.layout.observables[0]) {
        pos.push_back(std::lower_bound(data.begin(), data.end(), q) - data.begin());
    }
    return pos;
}

std::vector<std::vector<size_t>> terminal_supports(const ExperimentInfo &info) {
    const auto data = info.layout.ids(QubitRole::Data);
    std::vector<std::vector<size_t>> out;
    for (auto s : info.terminal_stabilizers) {
        std::vector<size_t> pos;
        for (auto q : info.layout.stabilizers[s].data) {
            pos.push_back(std::lower_bound(data.begin(), data.end(), q) - data.begin());
        }
        out.push_back(std::move(pos));
    }
    return out;
}

void run_batch(
    const Circuit &circuit,
    uint64_t seed,
    uint64_t batch,
    Frame &f,
    AuxWords *aux) {
    Rng rng(derive_seed(seed, batch));
    const size_t n = circuit.num_qubits();
    init_frame(f, n, rng, true);
    f.record.reserve(circuit.num_measurements());
    if (!aux) {
        run_frame(circuit.instructions(), f, rng, {}, [](size_t) {});
        return;
    }
    const ExperimentInfo &info = *circuit.info();
    Rng aux_rng(derive_seed(seed ^ kAuxStream, batch));
    auto obs_pos = observable_data_positions(info);
    auto supports = terminal_supports(info);
    aux->fake_obs.assign(info.cycles, 0);
    aux->noiseless_obs.assign(info.cycles, 0);
    aux->fake_final.assign(info.cycles, std::vector<uint64_t>(supports.size(), 0));
    size_t next_cycle = 0;
    Frame scratch;
    auto snapshot = [&](size_t count) {
        if (next_cycle >= info.cycles || count != info.cycle_end[next_cycle]) {
            return;
        }
        size_t t = next_cycle++;
        for (int noisy = 0; noisy < 2; noisy++) {
            scratch.x = f.x;
            scratch.z = f.z;
            scratch.record.clear();
            run_frame(info.readout.instructions(), scratch, aux_rng, {bool(noisy), false}, [](size_t) {});
            uint64_t obs = 0;
            for (auto p : obs_pos) {
                obs ^= scratch.record[p];
            }
            if (!noisy) {
                aux->noiseless_obs[t] = obs;
                continue;
            }
            aux->fake_obs[t] = obs;
            for (size_t k = 0; k < supports.size(); k++) {
                uint64_t w = f.record[info.stabilizer_meas[t][info.terminal_stabilizers[k]]];
                for (auto p : supports[k]) {
                    w ^= scratch.record[p];
                }
                aux->fake_final[t][k] = w;
            }
        }
    };
    run_frame(circuit.instructions(), f, rng, {}, snapshot);
}

}  // namespace

ShotTable::ShotTable(size_t shots, size_t detectors, size_t observables, size_t measurements)
    : shots_(shots),
      detectors_(detectors),
      observables_(observables),
      measurements_(measurements),
      det_words_((detectors + 63) / 64),
      obs_words_((observables + 63) / 64),
      meas_words_((measurements + 63) / 64),
      det_(shots * det_words_, 0),
      obs_(shots * obs_words_, 0),
      meas_(shots * meas_words_, 0) {
}

BitVec ShotTable::detectors_of(size_t shot) const {
    BitVec v(detectors_);
    std::copy_n(det_.begin() + shot * det_words_, det_words_, v.words().begin());
    return v;
}

BitVec ShotTable::observables_of(size_t shot) const {
    BitVec v(observables_);
    std::copy_n(obs_.begin() + shot * obs_words_, obs_words_, v.words().begin());
    return v;
}

BitVec ShotTable::measurements_of(size_t shot) const {
    BitVec v(measurements_);
    std::copy_n(meas_.begin() + shot * meas_words_, meas_words_, v.words().begin());
    return v;
}

ShotRecord ShotTable::record(size_t shot) const {
    ShotRecord r{measurements_of(shot), detectors_of(shot), observables_of(shot), std::nullopt};
    if (!aux_.empty()) {
        r.aux = aux_[shot];
    }
    return r;
}

ShotTable ShotTable::slice(size_t begin, size_t end) const {
    ShotTable out(end - begin, detectors_, observables_, measurements_);
    std::copy(det_.begin() + begin * det_words_, det_.begin() + end * det_words_, out.det_.begin());
    std::copy(obs_.begin() + begin * obs_words_, obs_.begin() + end * obs_words_, out.obs_.begin());
    std::copy(meas_.begin() + begin * meas_words_, meas_.begin() + end * meas_words_, out.meas_.begin());
    if (!aux_.empty()) {
        out.aux_.assign(aux_.begin() + begin, aux_.begin() + end);
    }
    return out;
}

void ShotTable::append(const ShotTable &other) {
    if (shots_ == 0 && detectors_ == 0 && observables_ == 0) {
        *this = other;
        return;
    }
    if (other.detectors_ != detectors_ || other.observables_ != observables_ ||
        other.measurements_ != measurements_) {
        throw std::invalid_argument("cannot append shot tables of different shapes");
    }
    shots_ += other.shots_;
    det_.insert(det_.end(), other.det_.begin(), other.det_.end());
    obs_.insert(obs_.end(), other.obs_.begin(), other.obs_.end());
    meas_.insert(meas_.end(), other.meas_.begin(), other.meas_.end());
    aux_.insert(aux_.end(), other.aux_.begin(), other.aux_.end());
}

BitVec reference_run(const Circuit &circuit) {
    BitVec ref = reference_run_unchecked(circuit);
    for (uint64_t batch = 0; batch < 4; batch++) {
        Rng rng(derive_seed(0x5EED, batch));
        Frame f;
        init_frame(f, circuit.num_qubits(), rng, true);
        run_frame(circuit.instructions(), f, rng, {false, true}, [](size_t) {});
        for (size_t d = 0; d < circuit.num_detectors(); d++) {
            if (parity_word(f.record, circuit.detectors()[d].measurements)) {
                throw NondeterministicError("detector D" + std::to_string(d) + " is not deterministic");
            }
        }
        for (size_t k = 0; k < circuit.num_observables(); k++) {
            if (parity_word(f.record, circuit.observables()[k])) {
                throw NondeterministicError("observable L" + std::to_string(k) + " is not deterministic");
            }
        }
    }
    return ref;
}

ShotTable sample_table(const Circuit &circuit, size_t shots, uint64_t seed, const SampleOptions &options) {
    BitVec ref = options.measurements ? reference_run(circuit) : BitVec(circuit.num_measurements());
    return sample_table(circuit, ref, shots, seed, options);
}

ShotTable sample_table(
    const Circuit &circuit, const BitVec &reference, size_t shots, uint64_t seed, const SampleOptions &options) {
    if (options.aux && !circuit.info()) {
        throw std::invalid_argument("auxiliary labels need a circuit produced by build_memory_circuit");
    }
    const size_t num_meas = options.measurements ? circuit.num_measurements() : 0;
    ShotTable table(shots, circuit.num_detectors(), circuit.num_observables(), num_meas);
    const size_t batches = (shots + 63) / 64;
    if (options.aux) {
        table.aux().resize(shots);
    }

    auto worker = [&](size_t first, size_t stride) {
        Frame f;
        AuxWords aux;
        for (size_t b = first; b < batches; b += stride) {
            run_batch(circuit, seed, options.first_batch + b, f, options.aux ? &aux : nullptr);
            size_t base = b * 64;
            size_t lanes = std::min<size_t>(64, shots - base);
            uint64_t lane_mask = lanes == 64 ? ~uint64_t{0} : ((uint64_t{1} << lanes) - 1);
            auto scatter = [&](uint64_t w, auto &&set) {
                w &= lane_mask;
                while (w) {
                    set(base + std::countr_zero(w));
                    w &= w - 1;
                }
            };
            for (size_t d = 0; d < circuit.num_detectors(); d++) {
                scatter(parity_word(f.record, circuit.detectors()[d].measurements),
                        [&](size_t s) { table.set_detector(s, d); });
            }
            for (size_t k = 0; k < circuit.num_observables(); k++) {
                scatter(parity_word(f.record, circuit.observables()[k]), [&](size_t s) { table.set_observable(s, k); });
            }
            if (options.measurements) {
                for (size_t m = 0; m < num_meas; m++) {
                    uint64_t w = f.record[m] ^ (reference.get(m) ? ~uint64_t{0} : 0);
                    scatter(w, [&](size_t s) { table.set_measurement(s, m); });
                }
            }
            if (options.aux) {
                const ExperimentInfo &info = *circuit.info();
                const size_t cycles = info.cycles;
                const size_t nt = info.terminal_stabilizers.size();
                // Real terminal detectors override the last fake ending.
                std::vector<uint32_t> terminal_dets;
                for (size_t d = 0; d < info.detector_roles.size(); d++) {
                    if (info.detector_roles[d].cycle == cycles) {
                        terminal_dets.push_back(uint32_t(d));
                    }
                }
                aux.fake_obs[cycles - 1] = parity_word(f.record, circuit.observables()[0]);
                for (size_t k = 0; k < nt; k++) {
                    aux.fake_final[cycles - 1][k] =
                        parity_word(f.record, circuit.detectors()[terminal_dets[k]].measurements);
                }
                for (size_t l = 0; l < lanes; l++) {
                    AuxiliaryLabels &a = table.aux()[base + l];
                    a.fake_ending_observable = BitVec(cycles);
                    a.noiseless_observable = BitVec(cycles);
                    a.fake_ending_final_stabilizers.assign(cycles, BitVec(nt));
                    for (size_t t = 0; t < cycles; t++) {
                        a.fake_ending_observable.set(t, (aux.fake_obs[t] >> l) & 1);
                        a.noiseless_observable.set(t, (aux.noiseless_obs[t] >> l) & 1);
                        for (size_t k = 0; k < nt; k++) {
                            a.fake_ending_final_stabilizers[t].set(k, (aux.fake_final[t][k] >> l) & 1);
                        }
                    }
                }
            }
        }
    };

    unsigned threads = std::max(1u, options.threads);
    if (threads == 1 || batches < 2) {
        worker(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; i++) {
            pool.emplace_back(worker, i, threads);
        }
        for (auto &th : pool) {
            th.join();
        }
    }
    return table;
}

std::vector<ShotRecord> sample_shots(const Circuit &circuit, size_t count, uint64_t seed) {
    SampleOptions opts;
    opts.measurements = true;
    ShotTable table = sample_table(circuit, count, seed, opts);
    std::vector<ShotRecord> out;
    out.reserve(count);
    for (size_t s = 0; s < count; s++) {
        out.push_back(table.record(s));
    }
    return out;
}

void attach_auxiliary_labels(const Circuit &circuit, ShotTable &table, uint64_t seed) {
    SampleOptions opts;
    opts.aux = true;
    ShotTable with_aux = sample_table(circuit, table.num_shots(), seed, opts);
    for (size_t s = 0; s < table.num_shots(); s++) {
        if (with_aux.detectors_of(s) != table.detectors_of(s)) {
            throw std::invalid_argument("shot table was not sampled from this circuit with this seed");
        }
    }
    table.aux() = std::move(with_aux.aux());
}

double detection_fraction(const ShotTable &table) {
    if (table.num_shots() == 0 || table.num_detectors() == 0) {
        throw std::invalid_argument("detection fraction needs at least one shot and one detector");
    }
    size_t total = 0;
    for (size_t s = 0; s < table.num_shots(); s++) {
        const uint64_t *row = table.detector_row(s);
        for (size_t w = 0; w < table.detector_words(); w++) {
            total += std::popcount(row[w]);
        }
    }
    return double(total) / (double(table.num_shots()) * double(table.num_detectors()));
}

double detection_fraction(const std::vector<ShotRecord> &shots) {
    if (shots.empty() || shots[0].detection_events.size() == 0) {
        throw std::invalid_argument("detection fraction needs at least one shot and one detector");
    }
    size_t total = 0;
    for (const auto &s : shots) {
        total += s.detection_events.popcount();
    }
    return double(total) / (double(shots.size()) * double(shots[0].detection_events.size()));
}

std::pair<BitVec, BitVec> propagate_error(const Circuit &circuit, const InsertedError &error) {
    Frame f;
    Rng rng(0);
    init_frame(f, circuit.num_qubits(), rng, false);
    const auto &insts = circuit.instructions();
    std::vector<Instruction> head(insts.begin(), insts.begin() + error.after + 1);
    std::vector<Instruction> tail(insts.begin() + error.after + 1, insts.end());
    run_frame(head, f, rng, {false, false}, [](size_t) {});
    for (auto [q, p] : error.paulis) {
        if (p & 1) {
            f.x[q] ^= 1;
        }
        if (p & 2) {
            f.z[q] ^= 1;
        }
    }
    run_frame(tail, f, rng, {false, false}, [](size_t) {});
    BitVec dets(circuit.num_detectors()), obs(circuit.num_observables());
    for (size_t d = 0; d < circuit.num_detectors(); d++) {
        dets.set(d, parity_word(f.record, circuit.detectors()[d].measurements) & 1);
    }
    for (size_t k = 0; k < circuit.num_observables(); k++) {
        obs.set(k, parity_word(f.record, circuit.observables()[k]) & 1);
    }
    return {dets, obs};
}

}  // namespace aqlab
