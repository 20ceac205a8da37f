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

#ifndef AQLAB_SIM_H
#define AQLAB_SIM_H

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "aqlab/bits.h"
#include "aqlab/circuit.h"
#include "aqlab/rng.h"

namespace aqlab {

/// Aaronson-Gottesman stabilizer tableau. Rows 0..n-1 hold destabilizers,
/// rows n..2n-1 stabilizers.
class Tableau {
   public:
    explicit Tableau(size_t num_qubits);

    size_t num_qubits() const {
        return n_;
    }
    void h(size_t q);
    void cz(size_t a, size_t b);
    void cnot(size_t control, size_t target);
    void x(size_t q);
    void z(size_t q);
    void y(size_t q) {
        x(q);
        z(q);
    }
    /// Returns the Z-basis outcome of a measurement that would be deterministic,
    /// or nullopt when the outcome is random. Does not modify the state.
    std::optional<bool> peek_z(size_t q) const;
    /// Measures in the Z basis. Random outcomes are taken from `forced` when
    /// given, otherwise from `rng`.
    bool measure_z(size_t q, Rng *rng, bool forced = false);
    bool measure_x(size_t q, Rng *rng, bool forced = false);
    void reset_z(size_t q);
    void reset_x(size_t q);

    /// Checks the symplectic inner products of all row pairs.
    bool is_consistent() const;

    const BitVec &xs(size_t row) const {
        return x_[row];
    }
    const BitVec &zs(size_t row) const {
        return z_[row];
    }
    bool sign(size_t row) const {
        return r_[row];
    }

   private:
    void rowmul(size_t h, size_t i);
    size_t n_;
    std::vector<BitVec> x_, z_;
    std::vector<uint8_t> r_;
};

class NondeterministicError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Noiseless tableau run. Random outcomes are fixed to 0; every DETECTOR and
/// OBSERVABLE_INCLUDE is then checked for determinism with a gauge-randomized
/// frame run, and NondeterministicError names the first offender.
BitVec reference_run(const Circuit &circuit);
/// Tableau pass alone, without the determinism check.
BitVec reference_run_unchecked(const Circuit &circuit);

/// Samples every measurement with a full tableau per shot, applying each noise
/// channel as an explicit Pauli. Slow; used to cross-check the frame sampler.
std::vector<BitVec> tableau_sample_measurements(const Circuit &circuit, size_t shots, uint64_t seed);

struct AuxiliaryLabels {
    /// Observable read from a noisy early termination after cycle t.
    BitVec fake_ending_observable;
    /// Terminal detection events of that early termination, per cycle.
    std::vector<BitVec> fake_ending_final_stabilizers;
    /// Observable read without readout noise after cycle t.
    BitVec noiseless_observable;

    bool operator==(const AuxiliaryLabels &) const = default;
};

struct ShotRecord {
    BitVec measurements;
    BitVec detection_events;
    BitVec observable_flips;
    std::optional<AuxiliaryLabels> aux;
};

struct SampleOptions {
    bool measurements = false;
    bool aux = false;
    unsigned threads = 1;
    /// Shots are generated in 64-shot batches; batch k is seeded from (seed, k).
    /// Sampling can start at a later batch so that chunks concatenate to the
    /// same table as one large call.
    uint64_t first_batch = 0;
};

/// Bit-packed shot rows.
class ShotTable {
   public:
    ShotTable() = default;
    ShotTable(size_t shots, size_t detectors, size_t observables, size_t measurements);

    size_t num_shots() const {
        return shots_;
    }
    size_t num_detectors() const {
        return detectors_;
    }
    size_t num_observables() const {
        return observables_;
    }
    size_t num_measurements() const {
        return measurements_;
    }
    bool detector(size_t shot, size_t k) const {
        return (det_[shot * det_words_ + (k >> 6)] >> (k & 63)) & 1;
    }
    bool observable(size_t shot, size_t k) const {
        return (obs_[shot * obs_words_ + (k >> 6)] >> (k & 63)) & 1;
    }
    bool measurement(size_t shot, size_t k) const {
        return (meas_[shot * meas_words_ + (k >> 6)] >> (k & 63)) & 1;
    }
    void set_detector(size_t shot, size_t k) {
        det_[shot * det_words_ + (k >> 6)] |= uint64_t{1} << (k & 63);
    }
    void set_observable(size_t shot, size_t k) {
        obs_[shot * obs_words_ + (k >> 6)] |= uint64_t{1} << (k & 63);
    }
    void set_measurement(size_t shot, size_t k) {
        meas_[shot * meas_words_ + (k >> 6)] |= uint64_t{1} << (k & 63);
    }
    const uint64_t *detector_row(size_t shot) const {
        return det_.data() + shot * det_words_;
    }
    size_t detector_words() const {
        return det_words_;
    }
    BitVec detectors_of(size_t shot) const;
    BitVec observables_of(size_t shot) const;
    BitVec measurements_of(size_t shot) const;
    ShotRecord record(size_t shot) const;

    std::vector<AuxiliaryLabels> &aux() {
        return aux_;
    }
    const std::vector<AuxiliaryLabels> &aux() const {
        return aux_;
    }

    /// Keeps shots [begin, end).
    ShotTable slice(size_t begin, size_t end) const;
    void append(const ShotTable &other);

    bool operator==(const ShotTable &) const = default;

   private:
    size_t shots_ = 0, detectors_ = 0, observables_ = 0, measurements_ = 0;
    size_t det_words_ = 0, obs_words_ = 0, meas_words_ = 0;
    std::vector<uint64_t> det_, obs_, meas_;
    std::vector<AuxiliaryLabels> aux_;
};

/// Pauli-frame Monte Carlo against the reference run.
ShotTable sample_table(const Circuit &circuit, size_t shots, uint64_t seed, const SampleOptions &options = {});

/// Same as sample_table with a precomputed reference (skips the tableau run).
ShotTable sample_table(
    const Circuit &circuit, const BitVec &reference, size_t shots, uint64_t seed, const SampleOptions &options);

std::vector<ShotRecord> sample_shots(const Circuit &circuit, size_t count, uint64_t seed);

/// Computes auxiliary labels for the shots of `table` (which must have been
/// sampled from `circuit` with the same seed) by resampling them.
void attach_auxiliary_labels(const Circuit &circuit, ShotTable &table, uint64_t seed);

double detection_fraction(const ShotTable &table);
double detection_fraction(const std::vector<ShotRecord> &shots);

/// Detection events and observable flips for a single shot with one Pauli
/// inserted right after instruction `after` (frame starts clean, no noise).
/// `pauli` is 1 for X, 2 for Z, 3 for Y per target.
struct InsertedError {
    size_t after;
    std::vector<std::pair<uint32_t, uint8_t>> paulis;
};
std::pair<BitVec, BitVec> propagate_error(const Circuit &circuit, const InsertedError &error);

}  // namespace aqlab

#endif
