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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace aqlab {

namespace {

constexpr std::array<std::string_view, 14> kOpNames = {
    "R", "RX", "M", "MX", "H", "CZ", "X_ERROR", "Z_ERROR", "DEPOLARIZE1", "DEPOLARIZE2",
    "DETECTOR", "OBSERVABLE_INCLUDE", "QUBIT_COORDS", "TICK",
};

bool uses_records(Op op) {
    return op == Op::DETECTOR || op == Op::OBSERVABLE_INCLUDE;
}

}  // namespace

std::string_view op_name(Op op) {
    return kOpNames[static_cast<size_t>(op)];
}

bool is_noise(Op op) {
    return op == Op::X_ERROR || op == Op::Z_ERROR || op == Op::DEPOLARIZE1 || op == Op::DEPOLARIZE2;
}

bool is_measurement(Op op) {
    return op == Op::M || op == Op::MX;
}

bool is_reset(Op op) {
    return op == Op::R || op == Op::RX;
}

bool is_unitary(Op op) {
    return op == Op::H || op == Op::CZ;
}

ParseError::ParseError(size_t line, size_t column, const std::string &message)
    : std::runtime_error(
          "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line(line),
      column(column) {
}

void Circuit::append(Op op, std::vector<uint32_t> targets, std::vector<double> args) {
    append(Instruction{op, std::move(args), std::move(targets)});
}

void Circuit::append(Instruction inst) {
    auto fail = [&](const std::string &msg) {
        throw std::invalid_argument(std::string(op_name(inst.op)) + ": " + msg);
    };
    if (is_noise(inst.op)) {
        if (inst.args.size() != 1) {
            fail("expected exactly one probability argument");
        }
        double p = inst.args[0];
        if (!(p >= 0 && p <= 1)) {
            fail("probability " + format_double(p) + " outside [0, 1]");
        }
    } else if (inst.op == Op::OBSERVABLE_INCLUDE) {
        if (inst.args.size() != 1 || inst.args[0] < 0 || inst.args[0] != std::floor(inst.args[0])) {
            fail("expected a non-negative integer observable index");
        }
    } else if (inst.op == Op::QUBIT_COORDS) {
        if (inst.args.empty()) {
            fail("expected coordinates");
        }
    } else if (inst.op != Op::DETECTOR && !inst.args.empty()) {
        fail("takes no arguments");
    }
    if (inst.op == Op::TICK && !inst.targets.empty()) {
        fail("takes no targets");
    }
    if (inst.op == Op::CZ || inst.op == Op::DEPOLARIZE2) {
        if (inst.targets.size() % 2 != 0) {
            fail("targets must come in pairs");
        }
        for (size_t k = 0; k < inst.targets.size(); k += 2) {
            if (inst.targets[k] == inst.targets[k + 1]) {
                fail("pair acts twice on qubit " + std::to_string(inst.targets[k]));
            }
        }
    }
    if (inst.op == Op::CZ) {
        std::vector<uint32_t> sorted = inst.targets;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            fail("pairs must be disjoint");
        }
    }

    if (uses_records(inst.op)) {
        std::vector<uint32_t> abs;
        for (uint32_t k : inst.targets) {
            if (k == 0 || k > num_measurements_) {
                fail("rec[-" + std::to_string(k) + "] refers before the start of the measurement record");
            }
            abs.push_back(static_cast<uint32_t>(num_measurements_ - k));
        }
        std::sort(abs.begin(), abs.end());
        // Repeated records cancel.
        std::vector<uint32_t> reduced;
        for (size_t i = 0; i < abs.size();) {
            size_t j = i;
            while (j < abs.size() && abs[j] == abs[i]) {
                j++;
            }
            if ((j - i) % 2 == 1) {
                reduced.push_back(abs[i]);
            }
            i = j;
        }
        if (inst.op == Op::DETECTOR) {
            if (!detectors_.empty() && inst.args.size() >= 3 && detectors_.back().coords.size() >= 3 &&
                inst.args[2] < detectors_.back().coords[2]) {
                fail("detector cycle coordinate decreases");
            }
            detectors_.push_back({std::move(reduced), inst.args});
        } else {
            size_t index = static_cast<size_t>(inst.args[0]);
            if (observables_.size() <= index) {
                observables_.resize(index + 1);
            }
            auto &obs = observables_[index];
            std::vector<uint32_t> merged;
            std::set_symmetric_difference(
                obs.begin(), obs.end(), reduced.begin(), reduced.end(), std::back_inserter(merged));
            obs = std::move(merged);
        }
    } else {
        for (uint32_t q : inst.targets) {
            num_qubits_ = std::max<size_t>(num_qubits_, size_t{q} + 1);
        }
        if (is_measurement(inst.op)) {
            num_measurements_ += inst.targets.size();
        }
    }
    instructions_.push_back(std::move(inst));
}

bool Circuit::has_noise() const {
    return std::any_of(instructions_.begin(), instructions_.end(), [](const Instruction &i) {
        return is_noise(i.op);
    });
}

std::string Circuit::str() const {
    return serialize_circuit(*this);
}

std::string format_double(double value) {
    if (value == 0) {
        return "0";
    }
    char buf[400];
    double mag = std::fabs(value);
    auto fmt = (mag >= 1e-6 && mag < 1e15) ? std::chars_format::fixed : std::chars_format::general;
    auto res = std::to_chars(buf, buf + sizeof(buf), value, fmt);
    return std::string(buf, res.ptr);
}

double canonical_probability(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return std::strtod(buf, nullptr);
}

void NoiseParams::validate() const {
    if (!(p >= 0 && p <= 0.1)) {
        throw std::invalid_argument("noise strength p=" + format_double(p) + " outside [0, 0.1]");
    }
}

std::string serialize_circuit(const Circuit &circuit) {
    std::string out;
    for (const auto &inst : circuit.instructions()) {
        out += op_name(inst.op);
        if (!inst.args.empty()) {
            out += '(';
            for (size_t k = 0; k < inst.args.size(); k++) {
                if (k) {
                    out += ", ";
                }
                out += format_double(inst.args[k]);
            }
            out += ')';
        }
        bool rec = uses_records(inst.op);
        for (uint32_t t : inst.targets) {
            out += ' ';
            if (rec) {
                out += "rec[-" + std::to_string(t) + "]";
            } else {
                out += std::to_string(t);
            }
        }
        out += '\n';
    }
    return out;
}

namespace {

class LineParser {
   public:
    LineParser(std::string_view line, size_t line_no) : s_(line), line_(line_no) {
    }

    [[noreturn]] void fail(const std::string &msg) const {
        throw ParseError(line_, pos_ + 1, msg);
    }

    void skip_space() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) {
            pos_++;
        }
    }

    bool done() {
        skip_space();
        return pos_ >= s_.size();
    }

    std::string_view word() {
        size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
            pos_++;
        }
        return s_.substr(start, pos_ - start);
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < s_.size() && s_[pos_] == c) {
            pos_++;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            fail(std::string("expected '") + c + "'");
        }
    }

    double number() {
        skip_space();
        double v;
        auto res = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
        if (res.ec != std::errc()) {
            fail("expected a number");
        }
        pos_ = res.ptr - s_.data();
        return v;
    }

    uint32_t integer() {
        skip_space();
        uint32_t v;
        auto res = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
        if (res.ec != std::errc()) {
            fail("expected a non-negative integer");
        }
        pos_ = res.ptr - s_.data();
        return v;
    }

    size_t pos() const {
        return pos_;
    }

   private:
    std::string_view s_;
    size_t pos_ = 0;
    size_t line_;
};

}  // namespace

Circuit parse_circuit(std::string_view text) {
    Circuit circuit;
    size_t line_no = 0;
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        line_no++;
        if (auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        LineParser p(line, line_no);
        if (p.done()) {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        size_t name_col = p.pos();
        std::string_view name = p.word();
        auto it = std::find(kOpNames.begin(), kOpNames.end(), name);
        if (name.empty() || it == kOpNames.end()) {
            throw ParseError(line_no, name_col + 1, "unknown instruction '" + std::string(name) + "'");
        }
        Instruction inst{static_cast<Op>(it - kOpNames.begin()), {}, {}};
        if (p.accept('(')) {
            if (!p.accept(')')) {
                do {
                    inst.args.push_back(p.number());
                } while (p.accept(','));
                p.expect(')');
            }
        }
        bool rec = uses_records(inst.op);
        while (!p.done()) {
            if (rec) {
                std::string_view w = p.word();
                if (w != "rec") {
                    p.fail("expected rec[-k] target");
                }
                p.expect('[');
                p.expect('-');
                inst.targets.push_back(p.integer());
                p.expect(']');
            } else {
                inst.targets.push_back(p.integer());
            }
        }
        try {
            circuit.append(std::move(inst));
        } catch (const std::invalid_argument &e) {
            throw ParseError(line_no, 1, e.what());
        }
        if (end == text.size()) {
            break;
        }
    }
    return circuit;
}

std::vector<UnifiedSlot> unified_cycle_view(const CodeSpec &spec, size_t num_measurements) {
    spec.validate();
    const size_t d = spec.distance;
    size_t num_data, per_cycle, num_stabs;
    if (spec.kind == CodeKind::Surface) {
        num_data = d * d;
        num_stabs = d * d - 1;
        per_cycle = num_stabs;
    } else {
        num_data = (3 * d * d + 1) / 4;
        size_t cells = (3 * d * d - 3) / 8;
        num_stabs = 2 * cells;
        per_cycle = 4 * cells;
    }
    if (num_measurements < num_data || (num_measurements - num_data) % per_cycle != 0 ||
        num_measurements == num_data) {
        throw std::invalid_argument(
            std::to_string(num_measurements) + " measurements do not split into whole cycles of " +
            std::to_string(per_cycle) + " plus " + std::to_string(num_data) + " data measurements");
    }
    uint32_t cycles = static_cast<uint32_t>((num_measurements - num_data) / per_cycle);
    std::vector<UnifiedSlot> out;
    out.reserve(num_measurements);
    for (uint32_t t = 0; t < cycles; t++) {
        if (spec.kind == CodeKind::Surface) {
            for (uint32_t s = 0; s < num_stabs; s++) {
                out.push_back({t, s, Channel::Measurement});
            }
        } else {
            uint32_t cells = static_cast<uint32_t>(num_stabs / 2);
            for (uint32_t sub = 0; sub < 2; sub++) {
                for (uint32_t c = 0; c < cells; c++) {
                    out.push_back({t, 2 * c + sub, Channel::Measurement});
                }
                for (uint32_t c = 0; c < cells; c++) {
                    out.push_back({t, 2 * c + sub, Channel::Flag});
                }
            }
        }
    }
    for (uint32_t q = 0; q < num_data; q++) {
        out.push_back({cycles, q, Channel::Measurement});
    }
    return out;
}

}  // namespace aqlab
