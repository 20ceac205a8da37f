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

#include "aqlab/dem.h"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "aqlab/bits.h"

namespace aqlab {

Symptom operator^(const Symptom &a, const Symptom &b) {
    Symptom out;
    std::set_symmetric_difference(a.detectors.begin(), a.detectors.end(), b.detectors.begin(), b.detectors.end(),
                                  std::back_inserter(out.detectors));
    out.observables = a.observables ^ b.observables;
    return out;
}

double merge_probability(double p1, double p2) {
    return p1 * (1 - p2) + p2 * (1 - p1);
}

namespace {

// Backward pass state: which detectors/observables an X or Z on each qubit
// would flip from the current point to the end of the circuit.
class Sensitivity {
   public:
    explicit Sensitivity(const Circuit &c)
        : num_det_(c.num_detectors()), width_(c.num_detectors() + c.num_observables()), meas_sym_(c.num_measurements()) {
        xs_.assign(c.num_qubits(), BitVec(width_));
        zs_.assign(c.num_qubits(), BitVec(width_));
        for (auto &v : meas_sym_) {
            v = BitVec(width_);
        }
        for (size_t d = 0; d < c.num_detectors(); d++) {
            for (auto m : c.detectors()[d].measurements) {
                meas_sym_[m].flip(d);
            }
        }
        for (size_t k = 0; k < c.num_observables(); k++) {
            for (auto m : c.observables()[k]) {
                meas_sym_[m].flip(num_det_ + k);
            }
        }
        next_meas_ = c.num_measurements();
    }

    // Undoes `inst` (walking backwards). Noise instructions are left to the caller.
    void step_back(const Instruction &inst) {
        const auto &t = inst.targets;
        switch (inst.op) {
            case Op::M:
            case Op::MX:
                for (size_t k = t.size(); k-- > 0;) {
                    next_meas_--;
                    (inst.op == Op::M ? xs_ : zs_)[t[k]] ^= meas_sym_[next_meas_];
                }
                break;
            case Op::R:
            case Op::RX:
                for (auto q : t) {
                    xs_[q].clear();
                    zs_[q].clear();
                }
                break;
            case Op::H:
                for (auto q : t) {
                    std::swap(xs_[q], zs_[q]);
                }
                break;
            case Op::CZ:
                for (size_t k = 0; k + 1 < t.size(); k += 2) {
                    uint32_t a = t[k], b = t[k + 1];
                    xs_[a] ^= zs_[b];
                    xs_[b] ^= zs_[a];
                }
                break;
            default:
                break;
        }
    }

    Symptom symptom(uint32_t q, uint8_t pauli) const {
        BitVec v(width_);
        if (pauli & 1) {
            v ^= xs_[q];
        }
        if (pauli & 2) {
            v ^= zs_[q];
        }
        return to_symptom(v);
    }

    Symptom to_symptom(const BitVec &v) const {
        Symptom s;
        v.for_each_set([&](size_t k) {
            if (k < num_det_) {
                s.detectors.push_back(uint32_t(k));
            } else {
                s.observables |= uint64_t{1} << (k - num_det_);
            }
        });
        return s;
    }

   private:
    size_t num_det_, width_;
    std::vector<BitVec> xs_, zs_;
    std::vector<BitVec> meas_sym_;
    size_t next_meas_;
};

struct Component {
    double probability;
    std::vector<std::pair<uint32_t, uint8_t>> paulis;
};

// Expands a noise instruction into its independent single-Pauli components.
template <typename Fn>
void for_each_component(const Instruction &inst, Fn &&fn) {
    const auto &t = inst.targets;
    const double p = inst.args[0];
    if (p == 0) {
        return;
    }
    switch (inst.op) {
        case Op::X_ERROR:
        case Op::Z_ERROR:
            for (auto q : t) {
                fn(Component{p, {{q, uint8_t(inst.op == Op::X_ERROR ? 1 : 2)}}});
            }
            break;
        case Op::DEPOLARIZE1:
            for (auto q : t) {
                for (uint8_t k = 1; k <= 3; k++) {
                    fn(Component{p / 3, {{q, k}}});
                }
            }
            break;
        case Op::DEPOLARIZE2:
            for (size_t i = 0; i + 1 < t.size(); i += 2) {
                for (uint8_t k = 1; k < 16; k++) {
                    std::vector<std::pair<uint32_t, uint8_t>> ps;
                    if (k & 3) {
                        ps.push_back({t[i], uint8_t(k & 3)});
                    }
                    if (k >> 2) {
                        ps.push_back({t[i + 1], uint8_t(k >> 2)});
                    }
                    fn(Component{p / 15, std::move(ps)});
                }
            }
            break;
        default:
            break;
    }
}

// Walks the circuit backwards and reports (instruction index, component,
// symptom, per-qubit single-Pauli symptoms) for every component.
template <typename Fn>
void walk_components(const Circuit &circuit, Fn &&fn) {
    Sensitivity sens(circuit);
    const auto &insts = circuit.instructions();
    for (size_t i = insts.size(); i-- > 0;) {
        const auto &inst = insts[i];
        if (is_noise(inst.op)) {
            for_each_component(inst, [&](const Component &comp) {
                Symptom total;
                std::vector<Symptom> atoms;
                for (auto [q, p] : comp.paulis) {
                    for (uint8_t basis : {uint8_t(1), uint8_t(2)}) {
                        if (p & basis) {
                            auto s = sens.symptom(q, basis);
                            total = total ^ s;
                            if (!s.empty()) {
                                atoms.push_back(std::move(s));
                            }
                        }
                    }
                }
                fn(i, comp, total, atoms);
            });
        } else {
            sens.step_back(inst);
        }
    }
}

}  // namespace

std::vector<ComponentError> enumerate_components(const Circuit &circuit) {
    std::vector<ComponentError> out;
    walk_components(circuit, [&](size_t i, const Component &c, const Symptom &s, const std::vector<Symptom> &) {
        out.push_back({i, c.probability, c.paulis, s});
    });
    std::reverse(out.begin(), out.end());
    return out;
}

DetectorErrorModel extract_dem(const Circuit &circuit) {
    struct Entry {
        std::vector<double> probabilities;
        std::vector<Symptom> parts;
    };
    std::map<Symptom, Entry> merged;
    walk_components(circuit, [&](size_t, const Component &c, const Symptom &s, const std::vector<Symptom> &atoms) {
        if (s.empty()) {
            return;
        }
        auto &e = merged[s];
        e.probabilities.push_back(c.probability);
        if (e.parts.empty() && atoms.size() > 1) {
            e.parts = atoms;
        }
    });
    DetectorErrorModel dem;
    dem.num_detectors = circuit.num_detectors();
    dem.num_observables = circuit.num_observables();
    for (const auto &d : circuit.detectors()) {
        dem.detector_coords.push_back(d.coords);
    }
    if (auto info = circuit.info(); info && info->detector_roles.size() == dem.num_detectors) {
        for (const auto &role : info->detector_roles) {
            dem.detector_basis.push_back(info->layout.stabilizers[role.slot].basis == Basis::X ? 0 : 1);
        }
    }
    for (auto &[symptom, entry] : merged) {
        // Fold in sorted order so the result does not depend on instruction order.
        std::sort(entry.probabilities.begin(), entry.probabilities.end());
        double p = 0;
        for (double q : entry.probabilities) {
            p = merge_probability(p, q);
        }
        dem.mechanisms.push_back({p, symptom, entry.parts});
    }
    return dem;
}

std::string serialize_dem(const DetectorErrorModel &dem) {
    std::string out;
    for (const auto &m : dem.mechanisms) {
        out += "error(" + format_double(m.probability) + ")";
        for (auto d : m.symptom.detectors) {
            out += " D" + std::to_string(d);
        }
        for (size_t k = 0; k < 64; k++) {
            if ((m.symptom.observables >> k) & 1) {
                out += " L" + std::to_string(k);
            }
        }
        out += '\n';
    }
    for (size_t d = 0; d < dem.num_detectors; d++) {
        out += "detector";
        if (d < dem.detector_coords.size() && !dem.detector_coords[d].empty()) {
            out += '(';
            for (size_t k = 0; k < dem.detector_coords[d].size(); k++) {
                out += (k ? ", " : "") + format_double(dem.detector_coords[d][k]);
            }
            out += ')';
        }
        out += " D" + std::to_string(d) + '\n';
    }
    for (size_t k = 0; k < dem.num_observables; k++) {
        out += "logical_observable L" + std::to_string(k) + '\n';
    }
    return out;
}

DetectorErrorModel parse_dem(std::string_view text) {
    DetectorErrorModel dem;
    std::istringstream in{std::string(text)};
    std::string line;
    size_t line_no = 0;
    auto fail = [&](const std::string &msg) { throw ParseError(line_no, 1, msg); };
    auto parse_index = [&](const std::string &tok) -> uint32_t {
        uint32_t v;
        auto res = std::from_chars(tok.data() + 1, tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
            fail("bad target '" + tok + "'");
        }
        return v;
    };
    auto parse_args = [&](const std::string &head, const std::string &name) {
        std::vector<double> args;
        if (head.size() == name.size()) {
            return args;
        }
        if (head[name.size()] != '(' || head.back() != ')') {
            fail("malformed arguments in '" + head + "'");
        }
        std::string inner = head.substr(name.size() + 1, head.size() - name.size() - 2);
        std::replace(inner.begin(), inner.end(), ',', ' ');
        std::istringstream a(inner);
        double v;
        while (a >> v) {
            args.push_back(v);
        }
        return args;
    };
    std::vector<std::pair<size_t, std::vector<double>>> coords;
    while (std::getline(in, line)) {
        line_no++;
        if (auto h = line.find('#'); h != std::string::npos) {
            line = line.substr(0, h);
        }
        // Coordinates may contain spaces; glue the parenthesised head back together.
        std::string head;
        std::vector<std::string> toks;
        {
            size_t close = line.find(')');
            size_t open = line.find('(');
            std::string rest = line;
            if (open != std::string::npos && close != std::string::npos && open < close) {
                head = line.substr(0, close + 1);
                head.erase(std::remove(head.begin(), head.end(), ' '), head.end());
                rest = line.substr(close + 1);
            }
            std::istringstream ts(rest);
            std::string tok;
            while (ts >> tok) {
                toks.push_back(tok);
            }
            if (head.empty()) {
                if (toks.empty()) {
                    continue;
                }
                head = toks.front();
                toks.erase(toks.begin());
            }
        }
        if (head.rfind("error", 0) == 0) {
            auto args = parse_args(head, "error");
            if (args.size() != 1 || !(args[0] >= 0 && args[0] <= 1)) {
                fail("error needs one probability in [0, 1]");
            }
            ErrorMechanism m;
            m.probability = args[0];
            for (const auto &tok : toks) {
                if (tok[0] == 'D') {
                    uint32_t d = parse_index(tok);
                    m.symptom.detectors.push_back(d);
                    dem.num_detectors = std::max<size_t>(dem.num_detectors, d + 1);
                } else if (tok[0] == 'L') {
                    uint32_t k = parse_index(tok);
                    if (k >= 64) {
                        fail("observable index too large");
                    }
                    m.symptom.observables ^= uint64_t{1} << k;
                    dem.num_observables = std::max<size_t>(dem.num_observables, k + 1);
                } else if (tok != "^") {
                    fail("unexpected token '" + tok + "'");
                }
            }
            std::sort(m.symptom.detectors.begin(), m.symptom.detectors.end());
            dem.mechanisms.push_back(std::move(m));
        } else if (head.rfind("detector", 0) == 0) {
            auto args = parse_args(head, "detector");
            for (const auto &tok : toks) {
                uint32_t d = parse_index(tok);
                dem.num_detectors = std::max<size_t>(dem.num_detectors, d + 1);
                coords.push_back({d, args});
            }
        } else if (head == "logical_observable") {
            for (const auto &tok : toks) {
                dem.num_observables = std::max<size_t>(dem.num_observables, parse_index(tok) + 1);
            }
        } else {
            fail("unknown DEM instruction '" + head + "'");
        }
    }
    dem.detector_coords.assign(dem.num_detectors, {});
    for (auto &[d, c] : coords) {
        dem.detector_coords[d] = c;
    }
    return dem;
}

}  // namespace aqlab
