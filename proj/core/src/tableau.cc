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

#include <bit>

#include "aqlab/sim.h"

namespace aqlab {

Tableau::Tableau(size_t num_qubits) : n_(num_qubits), x_(2 * num_qubits), z_(2 * num_qubits), r_(2 * num_qubits, 0) {
    for (size_t i = 0; i < 2 * n_; i++) {
        x_[i] = BitVec(n_);
        z_[i] = BitVec(n_);
    }
    for (size_t i = 0; i < n_; i++) {
        x_[i].set(i, true);
        z_[n_ + i].set(i, true);
    }
}

void Tableau::h(size_t q) {
    for (size_t i = 0; i < 2 * n_; i++) {
        bool xi = x_[i].get(q), zi = z_[i].get(q);
        r_[i] ^= xi & zi;
        x_[i].set(q, zi);
        z_[i].set(q, xi);
    }
}

void Tableau::cnot(size_t a, size_t b) {
    for (size_t i = 0; i < 2 * n_; i++) {
        bool xa = x_[i].get(a), za = z_[i].get(a), xb = x_[i].get(b), zb = z_[i].get(b);
        r_[i] ^= xa & zb & (xb ^ za ^ 1);
        x_[i].set(b, xb ^ xa);
        z_[i].set(a, za ^ zb);
    }
}

void Tableau::cz(size_t a, size_t b) {
    h(b);
    cnot(a, b);
    h(b);
}

void Tableau::x(size_t q) {
    for (size_t i = 0; i < 2 * n_; i++) {
        r_[i] ^= z_[i].get(q);
    }
}

void Tableau::z(size_t q) {
    for (size_t i = 0; i < 2 * n_; i++) {
        r_[i] ^= x_[i].get(q);
    }
}

namespace {

// lhs <- lhs * rhs, returning the new sign.
bool mul_into(BitVec &x2, BitVec &z2, bool s2, const BitVec &x1, const BitVec &z1, bool s1) {
    uint64_t cnt1 = 0, cnt2 = 0;
    auto xw2 = x2.words();
    auto zw2 = z2.words();
    auto xw1 = x1.words();
    auto zw1 = z1.words();
    for (size_t w = 0; w < xw2.size(); w++) {
        uint64_t old_x2 = xw2[w], old_z2 = zw2[w];
        uint64_t nx2 = old_x2 ^ xw1[w];
        uint64_t nz2 = old_z2 ^ zw1[w];
        uint64_t x1z2 = xw1[w] & old_z2;
        uint64_t anti = (old_x2 & zw1[w]) ^ x1z2;
        cnt2 ^= (cnt1 ^ nx2 ^ nz2 ^ x1z2) & anti;
        cnt1 ^= anti;
        xw2[w] = nx2;
        zw2[w] = nz2;
    }
    unsigned s = static_cast<unsigned>(std::popcount(cnt1)) ^ (static_cast<unsigned>(std::popcount(cnt2)) << 1);
    s ^= unsigned(s1) << 1;
    return s2 ^ ((s & 2) != 0);
}

}  // namespace

void Tableau::rowmul(size_t h, size_t i) {
    r_[h] = mul_into(x_[h], z_[h], r_[h], x_[i], z_[i], r_[i]);
}

std::optional<bool> Tableau::peek_z(size_t q) const {
    for (size_t p = n_; p < 2 * n_; p++) {
        if (x_[p].get(q)) {
            return std::nullopt;
        }
    }
    BitVec sx(n_), sz(n_);
    bool sign = false;
    for (size_t i = 0; i < n_; i++) {
        if (x_[i].get(q)) {
            sign = mul_into(sx, sz, sign, x_[n_ + i], z_[n_ + i], r_[n_ + i]);
        }
    }
    return sign;
}

bool Tableau::measure_z(size_t q, Rng *rng, bool forced) {
    size_t p = 2 * n_;
    for (size_t i = n_; i < 2 * n_; i++) {
        if (x_[i].get(q)) {
            p = i;
            break;
        }
    }
    if (p == 2 * n_) {
        return *peek_z(q);
    }
    for (size_t i = 0; i < 2 * n_; i++) {
        if (i != p && x_[i].get(q)) {
            rowmul(i, p);
        }
    }
    x_[p - n_] = x_[p];
    z_[p - n_] = z_[p];
    r_[p - n_] = r_[p];
    x_[p].clear();
    z_[p].clear();
    z_[p].set(q, true);
    bool outcome = rng ? ((*rng)() & 1) : forced;
    r_[p] = outcome;
    return outcome;
}

bool Tableau::measure_x(size_t q, Rng *rng, bool forced) {
    h(q);
    bool m = measure_z(q, rng, forced);
    h(q);
    return m;
}

void Tableau::reset_z(size_t q) {
    if (measure_z(q, nullptr, false)) {
        x(q);
    }
}

void Tableau::reset_x(size_t q) {
    h(q);
    reset_z(q);
    h(q);
}

bool Tableau::is_consistent() const {
    auto inner = [&](size_t a, size_t b) {
        size_t c = 0;
        for (size_t w = 0; w < x_[a].num_words(); w++) {
            c += std::popcount((x_[a].words()[w] & z_[b].words()[w]) ^ (z_[a].words()[w] & x_[b].words()[w]));
        }
        return c & 1;
    };
    for (size_t a = 0; a < 2 * n_; a++) {
        for (size_t b = a + 1; b < 2 * n_; b++) {
            bool expect = (b == a + n_);
            if (inner(a, b) != size_t(expect)) {
                return false;
            }
        }
    }
    return true;
}

namespace {

template <typename Fn>
void for_pairs(const std::vector<uint32_t> &t, Fn &&fn) {
    for (size_t k = 0; k + 1 < t.size(); k += 2) {
        fn(t[k], t[k + 1]);
    }
}

void run_tableau(const Circuit &circuit, Tableau &tab, Rng *rng, std::vector<bool> &out) {
    for (const auto &inst : circuit.instructions()) {
        const auto &t = inst.targets;
        switch (inst.op) {
            case Op::R:
                for (auto q : t) {
                    if (rng) {
                        if (tab.measure_z(q, rng)) {
                            tab.x(q);
                        }
                    } else {
                        tab.reset_z(q);
                    }
                }
                break;
            case Op::RX:
                for (auto q : t) {
                    tab.h(q);
                    if (tab.measure_z(q, rng)) {
                        tab.x(q);
                    }
                    tab.h(q);
                }
                break;
            case Op::M:
                for (auto q : t) {
                    out.push_back(tab.measure_z(q, rng));
                }
                break;
            case Op::MX:
                for (auto q : t) {
                    out.push_back(tab.measure_x(q, rng));
                }
                break;
            case Op::H:
                for (auto q : t) {
                    tab.h(q);
                }
                break;
            case Op::CZ:
                for_pairs(t, [&](uint32_t a, uint32_t b) { tab.cz(a, b); });
                break;
            case Op::X_ERROR:
            case Op::Z_ERROR:
                if (rng) {
                    for (auto q : t) {
                        if (rng->uniform() < inst.args[0]) {
                            inst.op == Op::X_ERROR ? tab.x(q) : tab.z(q);
                        }
                    }
                }
                break;
            case Op::DEPOLARIZE1:
                if (rng) {
                    for (auto q : t) {
                        if (rng->uniform() < inst.args[0]) {
                            uint64_t k = 1 + rng->below(3);
                            if (k & 1) {
                                tab.x(q);
                            }
                            if (k & 2) {
                                tab.z(q);
                            }
                        }
                    }
                }
                break;
            case Op::DEPOLARIZE2:
                if (rng) {
                    for_pairs(t, [&](uint32_t a, uint32_t b) {
                        if (rng->uniform() < inst.args[0]) {
                            uint64_t k = 1 + rng->below(15);
                            if (k & 1) {
                                tab.x(a);
                            }
                            if (k & 2) {
                                tab.z(a);
                            }
                            if (k & 4) {
                                tab.x(b);
                            }
                            if (k & 8) {
                                tab.z(b);
                            }
                        }
                    });
                }
                break;
            default:
                break;
        }
    }
}

}  // namespace

BitVec reference_run_unchecked(const Circuit &circuit) {
    Tableau tab(circuit.num_qubits());
    std::vector<bool> out;
    out.reserve(circuit.num_measurements());
    run_tableau(circuit, tab, nullptr, out);
    BitVec ref(out.size());
    for (size_t k = 0; k < out.size(); k++) {
        ref.set(k, out[k]);
    }
    return ref;
}

std::vector<BitVec> tableau_sample_measurements(const Circuit &circuit, size_t shots, uint64_t seed) {
    std::vector<BitVec> result;
    for (size_t s = 0; s < shots; s++) {
        Rng rng(derive_seed(seed, s));
        Tableau tab(circuit.num_qubits());
        std::vector<bool> out;
        run_tableau(circuit, tab, &rng, out);
        BitVec v(out.size());
        for (size_t k = 0; k < out.size(); k++) {
            v.set(k, out[k]);
        }
        result.push_back(std::move(v));
    }
    return result;
}

}  // namespace aqlab
