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

#ifndef AQLAB_METRICS_H
#define AQLAB_METRICS_H

#include <cstdint>
#include <string>
#include <vector>

namespace aqlab {

/// Logical error per cycle from the logical error fraction E after n cycles.
double ler_from_fraction(double fraction, uint32_t cycles);
/// Inverse of ler_from_fraction.
double fraction_from_ler(double ler, uint32_t cycles);

struct Interval {
    double low;
    double high;
};

/// Wilson score interval for k successes in n trials.
Interval wilson_interval(uint64_t k, uint64_t n, double confidence = 0.95);

/// Two-sided standard normal quantile for the given confidence (0.95 -> 1.959964).
double normal_z(double confidence);

struct LerStats {
    uint64_t errors = 0;
    uint64_t shots = 0;
    uint32_t cycles = 0;
    double ler = 0;
    double ci_low = 0;
    double ci_high = 0;
};

/// Fraction errors/shots converted to LER, with the Wilson interval of the
/// fraction mapped through the same (monotone) conversion. Fractions above
/// one half are clamped there.
LerStats ler_stats(uint64_t errors, uint64_t shots, uint32_t cycles, double confidence = 0.95);

struct FidelityPoint {
    uint32_t cycles;
    double fraction;      // logical error fraction E(n)
    uint64_t shots = 0;   // 0 when unknown; used for the error estimate only
};

struct FidelityFit {
    double f0;
    double epsilon;
    double epsilon_stderr;  // NaN unless every point carries a shot count
};

/// Least squares of log(1 - 2E(n)) = log F0 + n log(1 - 2 epsilon).
FidelityFit fit_fidelity_line(const std::vector<FidelityPoint> &points);

/// One row of decoder results.
struct ResultRecord {
    std::string code;
    uint32_t distance = 0;
    double p = 0;
    std::string decoder;
    LerStats stats;
};

std::string to_json(const ResultRecord &r);
ResultRecord result_from_json(const std::string &line);
std::string results_csv(const std::vector<ResultRecord> &rows);
std::string results_markdown(const std::vector<ResultRecord> &rows);

}  // namespace aqlab

#endif
