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

#include "aqlab/metrics.h"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace aqlab {

double ler_from_fraction(double fraction, uint32_t cycles) {
    if (!(fraction >= 0) || fraction > 0.5) {
        throw std::invalid_argument("logical error fraction must lie in [0, 0.5], got " + std::to_string(fraction));
    }
    if (cycles < 1) {
        throw std::invalid_argument("cycle count must be at least 1");
    }
    return 0.5 * (1 - std::pow(1 - 2 * fraction, 1.0 / cycles));
}

double fraction_from_ler(double ler, uint32_t cycles) {
    if (!(ler >= 0) || ler > 0.5) {
        throw std::invalid_argument("LER must lie in [0, 0.5]");
    }
    return 0.5 * (1 - std::pow(1 - 2 * ler, double(cycles)));
}

double normal_z(double confidence) {
    if (!(confidence > 0 && confidence < 1)) {
        throw std::invalid_argument("confidence must lie in (0, 1)");
    }
    boost::math::normal_distribution<double> normal;
    return boost::math::quantile(normal, 0.5 + confidence / 2);
}

Interval wilson_interval(uint64_t k, uint64_t n, double confidence) {
    if (n == 0 || k > n) {
        throw std::invalid_argument("wilson_interval needs 0 <= k <= n and n >= 1");
    }
    const double z = normal_z(confidence);
    const double z2 = z * z;
    const double nn = double(n);
    const double phat = double(k) / nn;
    const double denom = 1 + z2 / nn;
    const double centre = (phat + z2 / (2 * nn)) / denom;
    const double half = z * std::sqrt(phat * (1 - phat) / nn + z2 / (4 * nn * nn)) / denom;
    Interval r{centre - half, centre + half};
    if (k == 0) {
        r.low = 0;
    }
    if (k == n) {
        r.high = 1;
    }
    return r;
}

LerStats ler_stats(uint64_t errors, uint64_t shots, uint32_t cycles, double confidence) {
    if (shots == 0) {
        throw std::invalid_argument("ler_stats needs at least one shot");
    }
    LerStats s;
    s.errors = errors;
    s.shots = shots;
    s.cycles = cycles;
    auto clamp = [](double e) { return std::min(e, 0.5); };
    s.ler = ler_from_fraction(clamp(double(errors) / double(shots)), cycles);
    auto ci = wilson_interval(errors, shots, confidence);
    s.ci_low = ler_from_fraction(clamp(ci.low), cycles);
    s.ci_high = ler_from_fraction(clamp(ci.high), cycles);
    return s;
}

FidelityFit fit_fidelity_line(const std::vector<FidelityPoint> &points) {
    const size_t m = points.size();
    if (m < 2) {
        throw std::invalid_argument("fidelity fit needs at least two durations");
    }
    double mean_n = 0, mean_y = 0;
    std::vector<double> y(m);
    bool have_shots = true;
    for (size_t i = 0; i < m; i++) {
        if (!(points[i].fraction >= 0) || points[i].fraction >= 0.5) {
            throw std::invalid_argument("fidelity fit needs every fraction in [0, 0.5)");
        }
        y[i] = std::log(1 - 2 * points[i].fraction);
        mean_n += points[i].cycles;
        mean_y += y[i];
        have_shots &= points[i].shots > 0;
    }
    mean_n /= double(m);
    mean_y /= double(m);
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < m; i++) {
        double dx = points[i].cycles - mean_n;
        sxx += dx * dx;
        sxy += dx * (y[i] - mean_y);
    }
    if (sxx == 0) {
        throw std::invalid_argument("fidelity fit is singular: all points share one duration");
    }
    const double slope = sxy / sxx;
    const double intercept = mean_y - slope * mean_n;
    FidelityFit fit{std::exp(intercept), (1 - std::exp(slope)) / 2, std::numeric_limits<double>::quiet_NaN()};
    if (have_shots) {
        double var_slope = 0;
        for (size_t i = 0; i < m; i++) {
            double e = points[i].fraction;
            double var_e = e * (1 - e) / double(points[i].shots);
            double var_y = var_e * 4 / ((1 - 2 * e) * (1 - 2 * e));
            double dx = points[i].cycles - mean_n;
            var_slope += dx * dx * var_y;
        }
        var_slope /= sxx * sxx;
        fit.epsilon_stderr = std::exp(slope) / 2 * std::sqrt(var_slope);
    }
    return fit;
}

std::string to_json(const ResultRecord &r) {
    nlohmann::ordered_json j;
    j["code"] = r.code;
    j["distance"] = r.distance;
    j["p"] = r.p;
    j["decoder"] = r.decoder;
    j["cycles"] = r.stats.cycles;
    j["shots"] = r.stats.shots;
    j["errors"] = r.stats.errors;
    j["ler"] = r.stats.ler;
    j["ci"] = {r.stats.ci_low, r.stats.ci_high};
    return j.dump();
}

ResultRecord result_from_json(const std::string &line) {
    auto j = nlohmann::json::parse(line);
    ResultRecord r;
    r.code = j.at("code").get<std::string>();
    r.distance = j.at("distance").get<uint32_t>();
    r.p = j.at("p").get<double>();
    r.decoder = j.value("decoder", std::string());
    r.stats.cycles = j.at("cycles").get<uint32_t>();
    r.stats.shots = j.at("shots").get<uint64_t>();
    r.stats.errors = j.at("errors").get<uint64_t>();
    r.stats.ler = j.at("ler").get<double>();
    r.stats.ci_low = j.at("ci").at(0).get<double>();
    r.stats.ci_high = j.at("ci").at(1).get<double>();
    return r;
}

std::string results_csv(const std::vector<ResultRecord> &rows) {
    std::ostringstream out;
    out.precision(10);
    out << "code,distance,p,decoder,cycles,shots,errors,ler,ci_low,ci_high\n";
    for (const auto &r : rows) {
        out << r.code << ',' << r.distance << ',' << r.p << ',' << r.decoder << ',' << r.stats.cycles << ','
            << r.stats.shots << ',' << r.stats.errors << ',' << r.stats.ler << ',' << r.stats.ci_low << ','
            << r.stats.ci_high << '\n';
    }
    return out.str();
}

std::string results_markdown(const std::vector<ResultRecord> &rows) {
    std::ostringstream out;
    out.precision(4);
    out << "| code | d | p | decoder | cycles | shots | errors | LER | 95% CI |\n";
    out << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto &r : rows) {
        out << "| " << r.code << " | " << r.distance << " | " << r.p << " | " << r.decoder << " | " << r.stats.cycles
            << " | " << r.stats.shots << " | " << r.stats.errors << " | " << r.stats.ler << " | [" << r.stats.ci_low
            << ", " << r.stats.ci_high << "] |\n";
    }
    return out.str();
}

}  // namespace aqlab
