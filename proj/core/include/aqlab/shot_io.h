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

#ifndef AQLAB_SHOT_IO_H
#define AQLAB_SHOT_IO_H

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "aqlab/sim.h"

namespace aqlab {

enum class ShotFormat { B8, Text01 };
ShotFormat parse_shot_format(std::string_view text);
std::string_view to_string(ShotFormat format);
/// Picks the format from a ".b8" or ".01" extension.
ShotFormat shot_format_for_path(const std::string &path);

class ShotFileError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Shot files start with one header line
///   "aqlab-shots format=<b8|01> shots=N detectors=D observables=O\n"
/// followed by one row per shot holding the detection events then the
/// observable flips. b8 rows are ceil((D + O) / 8) bytes, bit k of the row at
/// byte k / 8, position k % 8 (little-endian bit order). 01 rows are D + O
/// characters and a newline.
void write_shots(std::ostream &out, const ShotTable &table, ShotFormat format);
ShotTable read_shots(std::istream &in);
void write_shots_file(const std::string &path, const ShotTable &table, ShotFormat format);
ShotTable read_shots_file(const std::string &path);

/// Predictions as "01" text: one line per shot with one character per observable.
void write_predictions(std::ostream &out, const std::vector<uint8_t> &predictions, size_t num_observables);
std::vector<uint8_t> read_predictions(std::istream &in, size_t num_observables);

}  // namespace aqlab

#endif
