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

#include "aqlab/matching.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <thread>
#include <unordered_map>

#include "aqlab/blossom.h"

namespace aqlab {

double edge_weight(double p) {
    if (p >= 0.5) {
        return 0;
    }
    return std::log((1 - p) / p);
}

namespace {

struct EdgeKey {
    uint32_t a, b;
    auto operator<=>(const EdgeKey &) const = default;
};

// Groups the pieces so that every group's combined symptom has at most two
// detectors (all of one basis when `basis` is given), using as few groups as
// possible. Empty when impossible.
std::vector<Symptom> partition_graphlike(const std::vector<Symptom> &pieces, const std::vector<uint8_t> *basis) {
    auto ok = [&](const Symptom &b) {
        if (b.detectors.size() > 2 || (b.detectors.empty() && b.observables)) {
            return false;
        }
        return !basis || b.detectors.size() < 2 || (*basis)[b.detectors[0]] == (*basis)[b.detectors[1]];
    };
    std::vector<Symptom> best, blocks;
    bool found = false;
    auto rec = [&](auto &&self, size_t k) -> void {
        if (k == pieces.size()) {
            std::vector<Symptom> nonempty;
            for (const auto &b : blocks) {
                if (!ok(b)) {
                    return;
                }
                if (!b.empty()) {
                    nonempty.push_back(b);
                }
            }
            if (!nonempty.empty() && (!found || nonempty.size() < best.size())) {
                best = std::move(nonempty);
                found = true;
            }
            return;
        }
        for (size_t i = 0; i < blocks.size(); i++) {
            Symptom saved = blocks[i];
            blocks[i] = blocks[i] ^ pieces[k];
            self(self, k + 1);
            blocks[i] = std::move(saved);
        }
        blocks.push_back(pieces[k]);
        self(self, k + 1);
        blocks.pop_back();
    };
    rec(rec, 0);
    return best;
}

}  // namespace

MatchingGraph to_matching_graph(const DetectorErrorModel &dem) {
    const uint32_t boundary = uint32_t(dem.num_detectors);
    // Graph-like symptoms available as decomposition building blocks.
    std::map<std::vector<uint32_t>, std::set<uint64_t>> graphlike;
    for (const auto &m : dem.mechanisms) {
        if (!m.detectors().empty() && m.detectors().size() <= 2) {
            graphlike[m.detectors()].insert(m.observables());
        }
    }

    std::map<EdgeKey, MatchingEdge> merged;
    auto add = [&](const Symptom &part, double p) {
        uint32_t a = part.detectors[0];
        uint32_t b = part.detectors.size() == 2 ? part.detectors[1] : boundary;
        auto [it, fresh] = merged.try_emplace({a, b}, MatchingEdge{a, b, p, 0, part.observables});
        if (!fresh) {
            auto &e = it->second;
            if (e.observables == part.observables) {
                e.probability = merge_probability(e.probability, p);
            } else if (p > e.probability) {
                e.probability = p;
                e.observables = part.observables;
            }
        }
    };

    for (size_t k = 0; k < dem.mechanisms.size(); k++) {
        const auto &m = dem.mechanisms[k];
        if (m.detectors().empty()) {
            continue;
        }
        const bool mixed = m.detectors().size() == 2 && !dem.detector_basis.empty() &&
                           dem.detector_basis[m.detectors()[0]] != dem.detector_basis[m.detectors()[1]];
        if (m.detectors().size() <= 2 && (!mixed || m.parts.empty())) {
            add(m.symptom, m.probability);
            continue;
        }
        if (!m.parts.empty()) {
            auto blocks = partition_graphlike(m.parts, dem.detector_basis.empty() ? nullptr : &dem.detector_basis);
            if (blocks.empty()) {
                blocks = partition_graphlike(m.parts, nullptr);
            }
            if (!blocks.empty()) {
                for (const auto &b : blocks) {
                    add(b, m.probability);
                }
                continue;
            }
        }
        // Search for two existing graph-like symptoms whose XOR is this one.
        bool done = false;
        const auto &dets = m.detectors();
        if (dets.size() <= 4) {
            const size_t n = dets.size();
            for (uint32_t mask = 1; mask < (1u << n) - 1 && !done; mask++) {
                Symptom a, b;
                for (size_t i = 0; i < n; i++) {
                    ((mask >> i) & 1 ? a : b).detectors.push_back(dets[i]);
                }
                if (a.detectors.size() > 2 || b.detectors.size() > 2 || (mask & 1) == 0) {
                    continue;
                }
                auto ia = graphlike.find(a.detectors);
                auto ib = graphlike.find(b.detectors);
                if (ia == graphlike.end() || ib == graphlike.end()) {
                    continue;
                }
                for (uint64_t oa : ia->second) {
                    if (ib->second.count(oa ^ m.observables())) {
                        a.observables = oa;
                        b.observables = oa ^ m.observables();
                        add(a, m.probability);
                        add(b, m.probability);
                        done = true;
                        break;
                    }
                }
            }
        }
        if (!done) {
            std::string text;
            for (auto d : dets) {
                text += " D" + std::to_string(d);
            }
            throw Undecomposable(k, "error mechanism" + text + " cannot be split into graph-like parts");
        }
    }

    MatchingGraph g;
    g.num_detectors = dem.num_detectors;
    g.num_observables = dem.num_observables;
    for (auto &[key, e] : merged) {
        e.weight = edge_weight(e.probability);
        g.edges.push_back(e);
    }
    return g;
}

MwpmDecoder::MwpmDecoder(MatchingGraph graph) : graph_(std::move(graph)), nodes_(graph_.num_detectors + 1) {
    double max_w = 1;
    for (const auto &e : graph_.edges) {
        max_w = std::max(max_w, e.weight);
    }
    scale_ = double(1 << 20) / max_w;
    struct Arc {
        uint32_t to;
        int64_t w;
        double real;
        uint64_t obs;
    };
    std::vector<std::vector<Arc>> adj(nodes_);
    for (const auto &e : graph_.edges) {
        int64_t w = std::llround(e.weight * scale_);
        adj[e.a].push_back({e.b, w, e.weight, e.observables});
        adj[e.b].push_back({e.a, w, e.weight, e.observables});
    }
    for (auto &list : adj) {
        std::sort(list.begin(), list.end(), [](const Arc &x, const Arc &y) { return x.to < y.to; });
    }
    dist_.assign(nodes_ * nodes_, kUnreachable);
    real_.assign(nodes_ * nodes_, 0);
    obs_.assign(nodes_ * nodes_, 0);
    using Item = std::pair<int64_t, uint32_t>;
    for (uint32_t s = 0; s < nodes_; s++) {
        int64_t *dist = &dist_[size_t(s) * nodes_];
        double *real = &real_[size_t(s) * nodes_];
        uint64_t *obs = &obs_[size_t(s) * nodes_];
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        dist[s] = 0;
        pq.push({0, s});
        while (!pq.empty()) {
            auto [d, u] = pq.top();
            pq.pop();
            if (d != dist[u]) {
                continue;
            }
            // Paths do not pass through the boundary.
            if (u == graph_.boundary() && u != s) {
                continue;
            }
            for (const auto &arc : adj[u]) {
                int64_t nd = d + arc.w;
                if (nd < dist[arc.to]) {
                    dist[arc.to] = nd;
                    real[arc.to] = real[u] + arc.real;
                    obs[arc.to] = obs[u] ^ arc.obs;
                    pq.push({nd, arc.to});
                }
            }
        }
    }
}

DecodeResult MwpmDecoder::decode(const BitVec &events) const {
    DecodeResult result{BitVec(graph_.num_observables), 0.0};
    std::vector<uint32_t> flagged;
    events.for_each_set([&](size_t k) { flagged.push_back(uint32_t(k)); });
    if (flagged.empty()) {
        return result;
    }
    const int k = int(flagged.size());
    const uint32_t bnd = graph_.boundary();
    int64_t big = 1;
    for (int i = 0; i < k; i++) {
        for (int j = i + 1; j < k; j++) {
            if (distance(flagged[i], flagged[j]) != kUnreachable) {
                big = std::max(big, distance(flagged[i], flagged[j]) + 1);
            }
        }
        if (distance(flagged[i], bnd) != kUnreachable) {
            big = std::max(big, distance(flagged[i], bnd) + 1);
        }
    }
    std::vector<WeightedEdge> edges;
    for (int i = 0; i < k; i++) {
        for (int j = i + 1; j < k; j++) {
            int64_t d = distance(flagged[i], flagged[j]);
            if (d != kUnreachable) {
                edges.push_back({i, j, big - d});
            }
        }
        int64_t db = distance(flagged[i], bnd);
        if (db != kUnreachable) {
            edges.push_back({i, k + i, big - db});
        }
        for (int j = i + 1; j < k; j++) {
            edges.push_back({k + i, k + j, big});
        }
    }
    auto mate = max_weight_matching(2 * k, edges, true);
    uint64_t mask = 0;
    double cost = 0;
    for (int i = 0; i < k; i++) {
        int m = mate[i];
        if (m < 0) {
            throw MatchingInfeasible(
                flagged[i], "detector D" + std::to_string(flagged[i]) + " has no feasible partner in the matching graph");
        }
        if (m < k) {
            if (i < m) {
                mask ^= path_observables(flagged[i], flagged[m]);
                cost += path_weight(flagged[i], flagged[m]);
            }
        } else {
            mask ^= path_observables(flagged[i], bnd);
            cost += path_weight(flagged[i], bnd);
        }
    }
    for (size_t b = 0; b < graph_.num_observables; b++) {
        result.observables.set(b, (mask >> b) & 1);
    }
    result.cost = cost;
    return result;
}

DecodeResult mwpm_decode(const MwpmDecoder &decoder, const BitVec &events) {
    return decoder.decode(events);
}

MlDecoder::MlDecoder(DetectorErrorModel dem, size_t weight_cap, size_t max_expansions)
    : dem_(std::move(dem)), weight_cap_(weight_cap), max_expansions_(max_expansions) {
    by_detector_.assign(dem_.num_detectors, {});
    min_share_.assign(dem_.num_detectors, std::numeric_limits<double>::infinity());
    for (size_t i = 0; i < dem_.mechanisms.size(); i++) {
        const auto &m = dem_.mechanisms[i];
        double w = edge_weight(m.probability);
        weights_.push_back(w);
        for (auto d : m.detectors()) {
            by_detector_[d].push_back(uint32_t(i));
            min_share_[d] = std::min(min_share_[d], w / double(m.detectors().size()));
        }
    }
}

namespace {

struct SearchNode {
    double f;
    double g;
    std::vector<uint32_t> chosen;
    BitVec residual;
};

struct NodeOrder {
    bool operator()(const SearchNode *a, const SearchNode *b) const {
        if (a->f != b->f) {
            return a->f > b->f;
        }
        return a->chosen > b->chosen;
    }
};

}  // namespace

std::vector<uint32_t> MlDecoder::solve(const BitVec &events, double *cost_out) const {
    constexpr double kEps = 1e-9;
    auto heuristic = [&](const BitVec &r) {
        double h = 0;
        r.for_each_set([&](size_t d) { h += min_share_[d]; });
        return h;
    };
    auto cost_of = [&](const std::vector<uint32_t> &set) {
        double g = 0;
        for (auto i : set) {
            g += weights_[i];
        }
        return g;
    };
    if (!events.any()) {
        if (cost_out) {
            *cost_out = 0;
        }
        return {};
    }
    std::vector<std::unique_ptr<SearchNode>> pool;
    std::priority_queue<SearchNode *, std::vector<SearchNode *>, NodeOrder> open;
    std::unordered_map<BitVec, double, BitVecHash> best_g;
    std::set<std::vector<uint32_t>> seen;

    pool.push_back(std::make_unique<SearchNode>(SearchNode{heuristic(events), 0, {}, events}));
    open.push(pool.back().get());
    best_g[events] = 0;

    const SearchNode *best = nullptr;
    size_t expansions = 0;
    while (!open.empty()) {
        SearchNode *node = open.top();
        if (best && node->f > best->g + kEps) {
            break;
        }
        open.pop();
        if (!std::isfinite(node->f)) {
            break;
        }
        if (!node->residual.any()) {
            if (!best || node->g < best->g - kEps || (node->g <= best->g + kEps && node->chosen < best->chosen)) {
                best = node;
            }
            continue;
        }
        if (node->chosen.size() >= weight_cap_) {
            continue;
        }
        if (++expansions > max_expansions_) {
            throw NoSolutionWithinCap("search budget of " + std::to_string(max_expansions_) + " expansions exhausted");
        }
        size_t d = node->residual.set_bits().front();
        for (uint32_t i : by_detector_[d]) {
            if (std::binary_search(node->chosen.begin(), node->chosen.end(), i)) {
                continue;
            }
            std::vector<uint32_t> chosen = node->chosen;
            chosen.insert(std::upper_bound(chosen.begin(), chosen.end(), i), i);
            if (!seen.insert(chosen).second) {
                continue;
            }
            BitVec residual = node->residual;
            for (auto det : dem_.mechanisms[i].detectors()) {
                residual.flip(det);
            }
            double g = cost_of(chosen);
            auto it = best_g.find(residual);
            if (it != best_g.end() && g > it->second + kEps) {
                continue;
            }
            if (it == best_g.end() || g < it->second) {
                best_g[residual] = g;
            }
            double h = heuristic(residual);
            pool.push_back(std::make_unique<SearchNode>(SearchNode{g + h, g, std::move(chosen), std::move(residual)}));
            open.push(pool.back().get());
        }
    }
    if (!best) {
        throw NoSolutionWithinCap("no set of at most " + std::to_string(weight_cap_) +
                                  " error mechanisms reproduces the syndrome");
    }
    if (cost_out) {
        *cost_out = best->g;
    }
    return best->chosen;
}

DecodeResult MlDecoder::decode(const BitVec &events) const {
    double cost = 0;
    auto chosen = solve(events, &cost);
    uint64_t mask = 0;
    for (auto i : chosen) {
        mask ^= dem_.mechanisms[i].observables();
    }
    DecodeResult r{BitVec(dem_.num_observables), cost};
    for (size_t b = 0; b < dem_.num_observables; b++) {
        r.observables.set(b, (mask >> b) & 1);
    }
    return r;
}

DecodeResult exhaustive_ml_decode(const DetectorErrorModel &dem, const BitVec &events, size_t weight_cap) {
    return MlDecoder(dem, weight_cap).decode(events);
}

EvalCounts evaluate_decoder(const Decoder &decoder, const ShotTable &shots, unsigned threads,
                            std::vector<uint8_t> *predictions) {
    const size_t n = shots.num_shots();
    std::vector<uint8_t> wrong(n, 0), pred(n, 0);
    auto work = [&](size_t first, size_t stride) {
        for (size_t s = first; s < n; s += stride) {
            auto r = decoder.decode(shots.detectors_of(s));
            uint8_t p = 0;
            bool err = false;
            for (size_t k = 0; k < shots.num_observables(); k++) {
                bool b = r.observables.get(k);
                p |= uint8_t(b) << k;
                err |= b != shots.observable(s, k);
            }
            pred[s] = p;
            wrong[s] = err;
        }
    };
    threads = std::max(1u, threads);
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; t++) {
            pool.emplace_back(work, t, threads);
        }
        for (auto &t : pool) {
            t.join();
        }
    }
    EvalCounts c;
    c.shots = n;
    for (auto w : wrong) {
        c.errors += w;
    }
    if (predictions) {
        *predictions = std::move(pred);
    }
    return c;
}

}  // namespace aqlab
