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

#include "aqlab/shot_io.h"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace aqlab {

ShotFormat parse_shot_format(std::string_view text) {
    if (text == "b8") {
        return ShotFormat::B8;
    }
    if (text == "01") {
        return ShotFormat::Text01;
    }
    throw std::invalid_argument("unknown shot format '" + std::string(text) + "' (expected b8 or 01)");
}

std::string_view to_string(ShotFormat format) {
    return format == ShotFormat::B8 ? "b8" : "01";
}

ShotFormat shot_format_for_path(const std::string &path) {
    const auto dot = path.rfind('.');
    if (dot != std::string::npos) {
        const std::string ext = path.substr(dot + 1);
        if (ext == "b8" || ext == "01") {
            return parse_shot_format(ext);
        }
    }
    throw std::invalid_argument("cannot infer shot format from '" + path + "'; use a .b8 or .01 extension");
}

void write_shots(std::ostream &out, const ShotTable &table, ShotFormat format) {
    const size_t D = table.num_detectors(), O = table.num_observables(), bits = D + O;
    out << "aqlab-shots format=" << to_string(format) << " shots=" << table.num_shots() << " detectors=" << D
        << " observables=" << O << "\n";
    std::string row;
    for (size_t s = 0; s < table.num_shots(); s++) {
        auto bit = [&](size_t k) { return k < D ? table.detector(s, k) : table.observable(s, k - D); };
        if (format == ShotFormat::B8) {
            row.assign((bits + 7) / 8, '\0');
            for (size_t k = 0; k < bits; k++) {
                if (bit(k)) {
                    row[k >> 3] = char(uint8_t(row[k >> 3]) | (1u << (k & 7)));
                }
            }
        } else {
            row.assign(bits + 1, '0');
            for (size_t k = 0; k < bits; k++) {
                row[k] = bit(k) ? '1' : '0';
            }
            row[bits] = '\n';
        }
        out.write(row.data(), std::streamsize(row.size()));
    }
    if (!out) {
        throw ShotFileError("failed while writing shots");
    }
}

ShotTable read_shots(std::istream &in) {
    std::string header;
    if (!std::getline(in, header)) {
        throw ShotFileError("shot file is empty");
    }
    std::istringstream hs(header);
    std::string magic, field;
    hs >> magic;
    if (magic != "aqlab-shots") {
        throw ShotFileError("not a shot file (header starts with '" + magic + "')");
    }
    std::string format_text;
    long long shots = -1, detectors = -1, observables = -1;
    while (hs >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) {
            throw ShotFileError("malformed header field '" + field + "'");
        }
        const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
        try {
            if (key == "format") {
                format_text = value;
            } else if (key == "shots") {
                shots = std::stoll(value);
            } else if (key == "detectors") {
                detectors = std::stoll(value);
            } else if (key == "observables") {
                observables = std::stoll(value);
            }
        } catch (const std::logic_error &) {
            throw ShotFileError("bad header value in '" + field + "'");
        }
    }
    if (format_text.empty() || shots < 0 || detectors < 0 || observables < 0) {
        throw ShotFileError("shot file header lacks format, shots, detectors or observables");
    }
    const ShotFormat format = parse_shot_format(format_text);
    const size_t D = size_t(detectors), O = size_t(observables), bits = D + O;
    ShotTable table(size_t(shots), D, O, 0);
    std::string row;
    for (size_t s = 0; s < size_t(shots); s++) {
        auto set = [&](size_t k) {
            if (k < D) {
                table.set_detector(s, k);
            } else {
                table.set_observable(s, k - D);
            }
        };
        if (format == ShotFormat::B8) {
            row.resize((bits + 7) / 8);
            if (!in.read(row.data(), std::streamsize(row.size()))) {
                throw ShotFileError("shot file truncated at shot " + std::to_string(s));
            }
            for (size_t k = 0; k < bits; k++) {
                if ((uint8_t(row[k >> 3]) >> (k & 7)) & 1) {
                    set(k);
                }
            }
        } else {
            if (!std::getline(in, row)) {
                throw ShotFileError("shot file truncated at shot " + std::to_string(s));
            }
            if (row.size() != bits) {
                throw ShotFileError("shot " + std::to_string(s) + " has " + std::to_string(row.size()) +
                                    " characters, expected " + std::to_string(bits));
            }
            for (size_t k = 0; k < bits; k++) {
                if (row[k] == '1') {
                    set(k);
                } else if (row[k] != '0') {
                    throw ShotFileError("shot " + std::to_string(s) + " contains '" + std::string(1, row[k]) + "'");
                }
            }
        }
    }
    return table;
}

void write_shots_file(const std::string &path, const ShotTable &table, ShotFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ShotFileError("cannot open " + path + " for writing");
    }
    write_shots(out, table, format);
}

ShotTable read_shots_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ShotFileError("cannot open " + path);
    }
    return read_shots(in);
}

void write_predictions(std::ostream &out, const std::vector<uint8_t> &predictions, size_t num_observables) {
    std::string line(num_observables + 1, '\n');
    for (uint8_t p : predictions) {
        for (size_t k = 0; k < num_observables; k++) {
            line[k] = (p >> k) & 1 ? '1' : '0';
        }
        out << line;
    }
}

std::vector<uint8_t> read_predictions(std::istream &in, size_t num_observables) {
    std::vector<uint8_t> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.size() != num_observables) {
            throw ShotFileError("prediction line " + std::to_string(out.size()) + " has the wrong width");
        }
        uint8_t v = 0;
        for (size_t k = 0; k < num_observables; k++) {
            if (line[k] == '1') {
                v |= uint8_t(1u << k);
            }
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace aqlab
