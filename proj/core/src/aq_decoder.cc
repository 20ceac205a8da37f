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

#include "aqlab/aq_decoder.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "aqlab/rng.h"
#include "json.hpp"

namespace aqlab {

using json = nlohmann::ordered_json;

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Rnn:
            return "rnn";
        case LayerKind::RnnGated:
            return "rnn_gated";
        case LayerKind::Transformer:
            return "transformer";
    }
    return "?";
}

LayerKind parse_layer_kind(std::string_view text) {
    if (text == "rnn") {
        return LayerKind::Rnn;
    }
    if (text == "rnn_gated") {
        return LayerKind::RnnGated;
    }
    if (text == "transformer") {
        return LayerKind::Transformer;
    }
    throw std::invalid_argument("unknown layer kind '" + std::string(text) + "'");
}

ModelConfig ModelConfig::desk(CodeKind code) {
    ModelConfig c;
    c.code = code;
    c.group = code == CodeKind::Colour ? 3 : 6;
    return c;
}

void ModelConfig::validate() const {
    auto fail = [](const std::string &m) { throw std::invalid_argument("model config: " + m); };
    if (channels == 0 || heads == 0 || key_size == 0 || widening == 0) {
        fail("channels, heads, key_size and widening must be positive");
    }
    if (channels % (2 * heads) != 0) {
        fail("channels must be divisible by 2 * heads");
    }
    if (key_size % 4 != 0) {
        fail("key_size must be a multiple of 4 for the two-axis rotary split");
    }
    if (group == 0 || block == 0) {
        fail("group and block must be at least 1");
    }
    if (layers.empty()) {
        fail("layer sequence is empty");
    }
    if (layers.front() == LayerKind::Transformer || layers.back() == LayerKind::Transformer) {
        fail("first and last layers must be recurrent");
    }
    if (num_observables == 0) {
        fail("num_observables must be positive");
    }
}

size_t ModelConfig::num_recurrent() const {
    return size_t(std::count_if(layers.begin(), layers.end(), [](LayerKind k) { return k != LayerKind::Transformer; }));
}

std::string ModelConfig::to_json() const {
    json j;
    j["code"] = std::string(aqlab::to_string(code));
    j["channels"] = channels;
    j["heads"] = heads;
    j["key_size"] = key_size;
    j["widening"] = widening;
    json layer_list = json::array();
    for (auto k : layers) {
        layer_list.push_back(aqlab::to_string(k));
    }
    j["layers"] = layer_list;
    j["group"] = group;
    j["block"] = block;
    j["readout_layers"] = readout_layers;
    j["num_observables"] = num_observables;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string &text) {
    json j = json::parse(text);
    ModelConfig c;
    c.code = parse_code_kind(j.at("code").get<std::string>());
    c.channels = j.at("channels").get<size_t>();
    c.heads = j.at("heads").get<size_t>();
    c.key_size = j.at("key_size").get<size_t>();
    c.widening = j.at("widening").get<size_t>();
    c.layers.clear();
    for (const auto &k : j.at("layers")) {
        c.layers.push_back(parse_layer_kind(k.get<std::string>()));
    }
    c.group = j.at("group").get<size_t>();
    c.block = j.at("block").get<size_t>();
    c.readout_layers = j.at("readout_layers").get<size_t>();
    c.num_observables = j.at("num_observables").get<size_t>();
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Input encoding.

ShotEncoder::ShotEncoder(std::shared_ptr<const ExperimentInfo> info, size_t group)
    : info_(std::move(info)), group_(group) {
    if (!info_) {
        throw std::invalid_argument("shot encoder needs experiment metadata");
    }
    if (group_ == 0) {
        throw std::invalid_argument("group size must be at least 1");
    }
    stabilizers_ = info_->num_slots();
    cycles_ = info_->cycles;
    bool has_terminal = false;
    for (const auto &r : info_->detector_roles) {
        uint8_t kind = r.cycle == cycles_ ? 2 : (r.flag ? 1 : 0);
        has_terminal |= kind == 2;
        targets_.push_back({r.cycle, r.slot, kind});
    }
    if (!has_terminal) {
        throw std::invalid_argument("experiment has no terminal data-readout detectors");
    }
}

uint32_t ShotEncoder::last_cycle(size_t k) const {
    return uint32_t(std::min<size_t>((k + 1) * group_, cycles_) - 1);
}

ShotFrames ShotEncoder::frames(const uint64_t *row) const {
    ShotFrames f;
    f.cycles = cycles_;
    f.stabilizers = stabilizers_;
    f.events.assign(size_t(cycles_) * stabilizers_, 0);
    f.flags.assign(size_t(cycles_) * stabilizers_, 0);
    f.terminal.assign(stabilizers_, 0);
    for (size_t d = 0; d < targets_.size(); d++) {
        if (!((row[d >> 6] >> (d & 63)) & 1)) {
            continue;
        }
        const auto &t = targets_[d];
        switch (t.kind) {
            case 0:
                f.events[size_t(t.cycle) * stabilizers_ + t.slot] = 1;
                break;
            case 1:
                f.flags[size_t(t.cycle) * stabilizers_ + t.slot] = 1;
                break;
            default:
                f.terminal[t.slot] = 1;
        }
    }
    return f;
}

ShotFrames ShotEncoder::frames(const BitVec &events) const {
    if (events.size() != targets_.size()) {
        throw std::invalid_argument("shot has " + std::to_string(events.size()) + " detection events, expected " +
                                    std::to_string(targets_.size()) + " ending with the terminal data readout");
    }
    return frames(events.words().data());
}

std::vector<uint8_t> ShotEncoder::terminal_from_bits(const BitVec &bits) const {
    const auto &ts = info_->terminal_stabilizers;
    if (bits.size() != ts.size()) {
        throw std::invalid_argument("terminal bit count mismatch");
    }
    std::vector<uint8_t> out(stabilizers_, 0);
    for (size_t k = 0; k < ts.size(); k++) {
        out[ts[k]] = bits.get(k);
    }
    return out;
}

template <typename T>
void ShotEncoder::write_group(const ShotFrames &f, size_t k, std::vector<uint8_t> &running, T *out,
                              const uint8_t *mask) const {
    const size_t width = 4 * group_;
    std::fill(out, out + stabilizers_ * width, T(0));
    for (size_t j = 0; j < group_; j++) {
        const size_t c = k * group_ + j;
        if (c >= cycles_) {
            break;
        }
        for (size_t s = 0; s < stabilizers_; s++) {
            const size_t at = c * stabilizers_ + s;
            const uint8_t ev = f.events[at];
            running[s] ^= ev;
            if (mask && mask[at]) {
                continue;
            }
            T *o = out + s * width + 4 * j;
            o[0] = T(ev);
            o[1] = T(running[s]);
            o[2] = T(f.flags[at]);
        }
    }
}

template <typename T>
void ShotEncoder::write_terminal(const std::vector<uint8_t> &terminal, const std::vector<uint8_t> &running,
                                 T *out) const {
    const size_t width = 4 * group_;
    std::fill(out, out + stabilizers_ * width, T(0));
    for (size_t s = 0; s < stabilizers_; s++) {
        T *o = out + s * width;
        o[0] = T(terminal[s]);
        o[1] = T(running[s] ^ terminal[s]);
        o[3] = T(1);
    }
}

template void ShotEncoder::write_group<float>(const ShotFrames &, size_t, std::vector<uint8_t> &, float *,
                                              const uint8_t *) const;
template void ShotEncoder::write_group<double>(const ShotFrames &, size_t, std::vector<uint8_t> &, double *,
                                               const uint8_t *) const;
template void ShotEncoder::write_terminal<float>(const std::vector<uint8_t> &, const std::vector<uint8_t> &,
                                                 float *) const;
template void ShotEncoder::write_terminal<double>(const std::vector<uint8_t> &, const std::vector<uint8_t> &,
                                                  double *) const;

template <typename T>
Geometry<T> make_geometry(const QubitLayout &layout, const ModelConfig &config) {
    Geometry<T> g;
    auto pos = normalized_positions(layout);
    g.stabilizers = pos.size();
    g.positions = Tensor<T>(pos.size(), 2);
    g.basis = Tensor<T>(pos.size(), 2);
    for (size_t s = 0; s < pos.size(); s++) {
        g.positions.at(s, 0) = T(pos[s].first);
        g.positions.at(s, 1) = T(pos[s].second);
        g.basis.at(s, layout.stabilizers[s].basis == Basis::X ? 0 : 1) = T(1);
    }
    g.rope = make_rope<T>(pos, config.key_size);
    return g;
}

// ---------------------------------------------------------------------------
// Model.

namespace {

std::string layer_prefix(size_t i) {
    return "l" + std::to_string(i) + ".";
}

template <typename T>
Tensor<T> normal_tensor(size_t rows, size_t cols, double stddev, Rng &rng) {
    Tensor<T> t(rows, cols);
    for (auto &v : t.data) {
        v = T(rng.normal() * stddev);
    }
    return t;
}

}  // namespace

template <typename T>
AqModel<T>::AqModel(ModelConfig config, uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    init(seed);
}

template <typename T>
AqModel<T>::AqModel(ModelConfig config, ParameterStore<T> params) : config_(std::move(config)) {
    config_.validate();
    AqModel<T> reference(config_, 0);
    for (const auto &p : reference.params_.all()) {
        if (!params.contains(p.name)) {
            throw std::invalid_argument("checkpoint lacks parameter " + p.name);
        }
        const auto &q = params.get(p.name);
        if (q.value.rows != p.value.rows || q.value.cols != p.value.cols) {
            throw std::invalid_argument("parameter " + p.name + " has shape " + q.value.shape_str() + ", expected " +
                                        p.value.shape_str());
        }
    }
    params_ = std::move(params);
}

template <typename T>
void AqModel<T>::init(uint64_t seed) {
    Rng rng(seed);
    const size_t C = config_.channels;
    const size_t W = config_.widening * C;
    const size_t HK = config_.heads * config_.key_size;
    auto dense = [&](const std::string &name, size_t in, size_t out) {
        params_.add(name, normal_tensor<T>(in, out, 1.0 / std::sqrt(double(in)), rng));
    };
    auto fill = [&](const std::string &name, size_t rows, size_t cols, T v) {
        params_.add(name, Tensor<T>(rows, cols, v));
    };

    dense("embed.w", config_.input_width(), C);
    fill("embed.b", 1, C, T(0));
    dense("embed.pos", 2, C);
    if (config_.code == CodeKind::Colour) {
        dense("embed.basis", 2, C);
    }
    for (size_t i = 0; i < config_.layers.size(); i++) {
        const std::string pre = layer_prefix(i);
        switch (config_.layers[i]) {
            case LayerKind::RnnGated:
                fill(pre + "norm", 1, C, T(1));
                dense(pre + "w1", C, W);
                fill(pre + "b1", 1, W, T(0));
                dense(pre + "w2", W, C);
                fill(pre + "b2", 1, C, T(0));
                fill(pre + "zx", 1, C, T(0));
                fill(pre + "zh", 1, C, T(0));
                fill(pre + "zb", 1, C, T(0));
                fill(pre + "ux", 1, C, T(1));
                fill(pre + "ub", 1, C, T(0));
                break;
            case LayerKind::Rnn: {
                Tensor<T> w(2 * C, C);
                Tensor<double> orth = orthogonal_init(C, C, rng());
                const double sx = 1.0 / std::sqrt(double(C));
                for (size_t r = 0; r < C; r++) {
                    for (size_t c = 0; c < C; c++) {
                        w.at(r, c) = T(orth.at(r, c));
                    }
                }
                for (size_t r = C; r < 2 * C; r++) {
                    for (size_t c = 0; c < C; c++) {
                        w.at(r, c) = T(rng.normal() * sx);
                    }
                }
                params_.add(pre + "w", std::move(w));
                fill(pre + "b", 1, C, T(0));
                fill(pre + "norm", 1, C, T(1));
                break;
            }
            case LayerKind::Transformer:
                fill(pre + "norm1", 1, C, T(1));
                dense(pre + "wq", C, HK);
                dense(pre + "wk", C, HK);
                dense(pre + "wv", C, HK);
                dense(pre + "wo", HK, C);
                fill(pre + "norm2", 1, C, T(1));
                dense(pre + "w1", C, W);
                dense(pre + "w2", C, W);
                dense(pre + "w3", W, C);
                break;
        }
    }
    fill("ro.norm", 1, C, T(1));
    dense("ro.obs", config_.num_observables, C);
    for (size_t j = 0; j < config_.readout_layers; j++) {
        const std::string pre = "ro.x" + std::to_string(j) + ".";
        fill(pre + "norm", 1, C, T(1));
        dense(pre + "wq", C, HK);
        dense(pre + "wk", C, HK);
        dense(pre + "wv", C, HK);
        dense(pre + "wo", HK, C);
    }
    for (size_t j = 0; j < 2; j++) {
        const std::string pre = "ro.d" + std::to_string(j) + ".";
        fill(pre + "norm", 1, C, T(1));
        dense(pre + "w1", C, W);
        fill(pre + "b1", 1, W, T(0));
        dense(pre + "w2", W, C);
        fill(pre + "b2", 1, C, T(0));
    }
    fill("ro.fnorm", 1, C, T(1));
    dense("ro.out", C, 2);
    fill("ro.outb", 1, 2, T(0));
}

template <typename T>
Var AqModel<T>::embed(Graph<T> &g, Var inputs, const Geometry<T> &geo) const {
    const auto &x = g.value(inputs);
    if (x.cols != config_.input_width()) {
        throw std::invalid_argument("embedding input has width " + std::to_string(x.cols) + ", expected " +
                                    std::to_string(config_.input_width()));
    }
    if (geo.stabilizers == 0 || x.rows % geo.stabilizers != 0) {
        throw std::invalid_argument("embedding input rows are not a multiple of the stabilizer count");
    }
    Var y = g.linear(inputs, p(g, "embed.w"), p(g, "embed.b"));
    Var site = g.matmul(g.input(geo.positions), p(g, "embed.pos"));
    if (config_.code == CodeKind::Colour) {
        site = g.add(site, g.matmul(g.input(geo.basis), p(g, "embed.basis")));
    }
    return g.add_tiled(y, site);
}

template <typename T>
Var AqModel<T>::gated_recurrence(Graph<T> &g, size_t layer, Var x, Var state) const {
    const std::string pre = layer_prefix(layer);
    Var z = g.sigmoid(g.add_row(g.add(g.mul_row(x, p(g, pre + "zx")), g.mul_row(state, p(g, pre + "zh"))),
                                p(g, pre + "zb")));
    Var u = g.add_row(g.mul_row(x, p(g, pre + "ux")), p(g, pre + "ub"));
    return g.add(state, g.mul(z, g.sub(u, state)));
}

template <typename T>
std::pair<Var, Var> AqModel<T>::rnn_step(Graph<T> &g, size_t layer, Var state, Var x) const {
    const std::string pre = layer_prefix(layer);
    if (config_.layers.at(layer) == LayerKind::Rnn) {
        Var y = g.gelu(g.linear(g.concat_cols(state, x), p(g, pre + "w"), p(g, pre + "b")));
        Var h = g.rmsnorm(y, p(g, pre + "norm"));
        return {h, h};
    }
    if (config_.layers.at(layer) != LayerKind::RnnGated) {
        throw std::invalid_argument("layer " + std::to_string(layer) + " is not recurrent");
    }
    Var n = g.rmsnorm(x, p(g, pre + "norm"));
    Var hidden = g.gelu(g.linear(n, p(g, pre + "w1"), p(g, pre + "b1")));
    Var x1 = g.add(x, g.linear(hidden, p(g, pre + "w2"), p(g, pre + "b2")));
    Var h = gated_recurrence(g, layer, x1, state);
    return {h, g.add(x1, h)};
}

template <typename T>
Var AqModel<T>::transformer(Graph<T> &g, size_t layer, Var x, size_t groups, const Geometry<T> &geo) const {
    const std::string pre = layer_prefix(layer);
    Var n = g.rmsnorm(x, p(g, pre + "norm1"));
    Var q = g.matmul(n, p(g, pre + "wq"));
    Var k = g.matmul(n, p(g, pre + "wk"));
    Var v = g.matmul(n, p(g, pre + "wv"));
    Var a = g.attention(q, k, v, groups, config_.heads, &geo.rope, &geo.rope);
    Var x1 = g.add(x, g.matmul(a, p(g, pre + "wo")));
    Var n2 = g.rmsnorm(x1, p(g, pre + "norm2"));
    Var gate = g.gelu(g.matmul(n2, p(g, pre + "w1")));
    Var lin = g.matmul(n2, p(g, pre + "w2"));
    return g.add(x1, g.matmul(g.mul(gate, lin), p(g, pre + "w3")));
}

template <typename T>
Var AqModel<T>::readout(Graph<T> &g, Var rep, size_t groups, size_t stabilizers) const {
    Var n = g.rmsnorm(rep, p(g, "ro.norm"));
    Var q = g.add_tiled(g.repeat_rows(g.mean_blocks(n, stabilizers), config_.num_observables), p(g, "ro.obs"));
    for (size_t j = 0; j < config_.readout_layers; j++) {
        const std::string pre = "ro.x" + std::to_string(j) + ".";
        Var qn = g.rmsnorm(q, p(g, pre + "norm"));
        Var a = g.attention(g.matmul(qn, p(g, pre + "wq")), g.matmul(n, p(g, pre + "wk")), g.matmul(n, p(g, pre + "wv")),
                            groups, config_.heads);
        q = g.add(q, g.matmul(a, p(g, pre + "wo")));
    }
    for (size_t j = 0; j < 2; j++) {
        const std::string pre = "ro.d" + std::to_string(j) + ".";
        Var dn = g.rmsnorm(q, p(g, pre + "norm"));
        Var h = g.gelu(g.linear(dn, p(g, pre + "w1"), p(g, pre + "b1")));
        q = g.add(q, g.linear(h, p(g, pre + "w2"), p(g, pre + "b2")));
    }
    return g.linear(g.rmsnorm(q, p(g, "ro.fnorm")), p(g, "ro.out"), p(g, "ro.outb"));
}

template <typename T>
typename AqModel<T>::StackOutput AqModel<T>::run_stack(Graph<T> &g, std::vector<Var> states, std::vector<Var> steps,
                                                       size_t stabilizers, const Geometry<T> &geo,
                                                       bool keep_states) const {
    if (states.size() != config_.num_recurrent()) {
        throw std::invalid_argument("expected one state per recurrent layer");
    }
    StackOutput out;
    if (keep_states) {
        out.states.assign(steps.size(), std::vector<Var>(states.size()));
    }
    size_t r = 0;
    for (size_t i = 0; i < config_.layers.size() && !steps.empty(); i++) {
        if (config_.layers[i] == LayerKind::Transformer) {
            Var all = steps.size() == 1 ? steps[0] : g.concat_rows(steps);
            const size_t rows = g.value(all).rows;
            Var y = transformer(g, i, all, rows / stabilizers, geo);
            if (steps.size() == 1) {
                steps[0] = y;
            } else {
                size_t at = 0;
                for (auto &s : steps) {
                    const size_t n = g.value(s).rows;
                    s = g.slice_rows(y, at, n);
                    at += n;
                }
            }
            continue;
        }
        for (size_t t = 0; t < steps.size(); t++) {
            auto [h, o] = rnn_step(g, i, states[r], steps[t]);
            states[r] = h;
            steps[t] = o;
            if (keep_states) {
                out.states[t][r] = h;
            }
        }
        r++;
    }
    out.outputs = std::move(steps);
    out.final_states = std::move(states);
    return out;
}

// ---------------------------------------------------------------------------
// Streaming.

template <typename T>
size_t DecoderState<T>::bytes() const {
    size_t n = sizeof(*this);
    for (const auto &t : layers) {
        n += t.data.capacity() * sizeof(T);
    }
    for (const auto &r : running) {
        n += r.capacity();
    }
    return n;
}

template <typename T>
StreamingDecoder<T>::StreamingDecoder(const AqModel<T> &model, std::shared_ptr<const ExperimentInfo> info)
    : model_(model), encoder_(info, model.config().group) {
    if (info->layout.spec.kind != model.config().code) {
        throw std::invalid_argument("model was built for the " + std::string(to_string(model.config().code)) +
                                    " code but the experiment is a " +
                                    std::string(to_string(info->layout.spec.kind)) + " code");
    }
    if (info->layout.observables.size() != model.config().num_observables) {
        throw std::invalid_argument("observable count does not match the model");
    }
    geo_ = make_geometry<T>(info->layout, model.config());
}

template <typename T>
DecoderState<T> StreamingDecoder<T>::initial_state(size_t batch) const {
    DecoderState<T> s;
    s.batch = batch;
    const size_t rows = batch * geo_.stabilizers;
    s.layers.assign(model_.config().num_recurrent(), Tensor<T>(rows, model_.config().channels));
    s.running.assign(batch, std::vector<uint8_t>(geo_.stabilizers, 0));
    return s;
}

template <typename T>
void StreamingDecoder<T>::process_block(DecoderState<T> &state, const std::vector<Tensor<T>> &steps) const {
    if (steps.empty()) {
        return;
    }
    if (steps.size() > model_.config().block) {
        throw std::invalid_argument("block holds " + std::to_string(steps.size()) + " steps, limit is " +
                                    std::to_string(model_.config().block));
    }
    Graph<T> g(false);
    std::vector<Var> states, xs;
    for (const auto &l : state.layers) {
        states.push_back(g.input(l));
    }
    for (const auto &s : steps) {
        xs.push_back(model_.embed(g, g.input(s), geo_));
    }
    auto out = model_.run_stack(g, std::move(states), std::move(xs), geo_.stabilizers, geo_, false);
    for (size_t r = 0; r < state.layers.size(); r++) {
        state.layers[r] = g.value(out.final_states[r]);
    }
    state.steps += steps.size();
}

template <typename T>
std::vector<T> StreamingDecoder<T>::finish(const DecoderState<T> &state, const Tensor<T> &terminal) const {
    Graph<T> g(false);
    std::vector<Var> states;
    for (const auto &l : state.layers) {
        states.push_back(g.input(l));
    }
    Var x = model_.embed(g, g.input(terminal), geo_);
    auto out = model_.run_stack(g, std::move(states), {x}, geo_.stabilizers, geo_, false);
    Var logits = model_.readout(g, out.outputs[0], state.batch, geo_.stabilizers);
    const auto &v = g.value(logits);
    std::vector<T> probs(v.rows);
    for (size_t i = 0; i < v.rows; i++) {
        probs[i] = T(1) / (T(1) + std::exp(-v.at(i, 0)));
    }
    return probs;
}

template <typename T>
T StreamingDecoder<T>::probability(const BitVec &events, size_t block, std::vector<double> *block_seconds) const {
    const ShotFrames f = encoder_.frames(events);
    if (block == 0) {
        block = model_.config().block;
    }
    const size_t S = geo_.stabilizers;
    const size_t W = model_.config().input_width();
    DecoderState<T> state = initial_state(1);
    const size_t total = encoder_.num_groups();
    std::vector<Tensor<T>> steps;
    for (size_t k0 = 0; k0 < total; k0 += block) {
        auto start = std::chrono::steady_clock::now();
        steps.clear();
        for (size_t k = k0; k < std::min(total, k0 + block); k++) {
            Tensor<T> t(S, W);
            encoder_.write_group(f, k, state.running[0], t.data.data());
            steps.push_back(std::move(t));
        }
        process_block(state, steps);
        if (block_seconds) {
            block_seconds->push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        }
    }
    Tensor<T> term(S, W);
    encoder_.write_terminal(f.terminal, state.running[0], term.data.data());
    return finish(state, term)[0];
}

template <typename T>
std::vector<T> StreamingDecoder<T>::probabilities(const ShotTable &shots, size_t begin, size_t count) const {
    if (begin + count > shots.num_shots()) {
        throw std::out_of_range("shot range exceeds table");
    }
    if (count == 0) {
        return {};
    }
    const size_t S = geo_.stabilizers;
    const size_t W = model_.config().input_width();
    const size_t total = encoder_.num_groups();
    std::vector<Tensor<T>> inputs(total + 1, Tensor<T>(count * S, W));
    for (size_t b = 0; b < count; b++) {
        if (shots.num_detectors() != encoder_.info().detector_roles.size()) {
            throw std::invalid_argument("shot table does not match the experiment");
        }
        ShotFrames f = encoder_.frames(shots.detector_row(begin + b));
        std::vector<uint8_t> running(S, 0);
        for (size_t k = 0; k < total; k++) {
            encoder_.write_group(f, k, running, inputs[k].row(b * S));
        }
        encoder_.write_terminal(f.terminal, running, inputs[total].row(b * S));
    }
    Graph<T> g(false);
    std::vector<Var> states, xs;
    for (size_t r = 0; r < model_.config().num_recurrent(); r++) {
        states.push_back(g.input(Tensor<T>(count * S, model_.config().channels)));
    }
    for (auto &t : inputs) {
        xs.push_back(model_.embed(g, g.input(std::move(t)), geo_));
    }
    auto out = model_.run_stack(g, std::move(states), std::move(xs), S, geo_, false);
    Var logits = model_.readout(g, out.outputs.back(), count, S);
    const auto &v = g.value(logits);
    std::vector<T> probs(v.rows);
    for (size_t i = 0; i < v.rows; i++) {
        probs[i] = T(1) / (T(1) + std::exp(-v.at(i, 0)));
    }
    return probs;
}

// ---------------------------------------------------------------------------
// Decoder adapter, ensembles and files.

double ensemble_probability(const std::vector<double> &probabilities) {
    if (probabilities.empty()) {
        throw std::invalid_argument("ensemble needs at least one model");
    }
    double sum = 0;
    for (double p : probabilities) {
        sum += p;
    }
    return sum / double(probabilities.size());
}

AqDecoder::AqDecoder(std::vector<std::shared_ptr<const AqModel<float>>> models,
                     std::shared_ptr<const ExperimentInfo> info)
    : models_(std::move(models)) {
    if (models_.empty()) {
        throw std::invalid_argument("ensemble needs at least one model");
    }
    for (const auto &m : models_) {
        if (m->config().code != models_[0]->config().code ||
            m->config().num_observables != models_[0]->config().num_observables) {
            throw std::invalid_argument("ensemble members disagree on code geometry");
        }
        streams_.emplace_back(*m, info);
    }
}

size_t AqDecoder::num_observables() const {
    return models_[0]->config().num_observables;
}

double AqDecoder::probability(const BitVec &detection_events) const {
    std::vector<double> ps;
    for (const auto &s : streams_) {
        ps.push_back(double(s.probability(detection_events)));
    }
    return ensemble_probability(ps);
}

DecodeResult AqDecoder::decode(const BitVec &detection_events) const {
    DecodeResult r;
    r.observables = BitVec(num_observables());
    if (num_observables() != 1) {
        throw std::invalid_argument("streaming decode supports a single observable");
    }
    r.observables.set(0, threshold_prediction(probability(detection_events)));
    return r;
}

std::vector<uint8_t> AqDecoder::predict_table(const ShotTable &shots, size_t batch) const {
    const size_t O = num_observables();
    std::vector<uint8_t> out(shots.num_shots(), 0);
    batch = std::max<size_t>(batch, 1);
    for (size_t b0 = 0; b0 < shots.num_shots(); b0 += batch) {
        const size_t n = std::min(batch, shots.num_shots() - b0);
        std::vector<double> mean(n * O, 0.0);
        for (const auto &s : streams_) {
            auto p = s.probabilities(shots, b0, n);
            for (size_t i = 0; i < p.size(); i++) {
                mean[i] += double(p[i]);
            }
        }
        for (size_t i = 0; i < n; i++) {
            for (size_t o = 0; o < O; o++) {
                if (threshold_prediction(mean[i * O + o] / double(streams_.size()))) {
                    out[b0 + i] |= uint8_t(1u << o);
                }
            }
        }
    }
    return out;
}

void save_model(const std::string &path, const AqModel<float> &model, const std::string &extra_metadata) {
    json meta;
    meta["model"] = json::parse(model.config().to_json());
    meta["extra"] = json::parse(extra_metadata);
    save_checkpoint(path, meta.dump(), model.params());
}

std::shared_ptr<AqModel<float>> load_model(const std::string &path) {
    Checkpoint ck = load_checkpoint(path);
    json meta = json::parse(ck.metadata);
    if (!meta.contains("model")) {
        throw std::invalid_argument("checkpoint " + path + " carries no model config");
    }
    return std::make_shared<AqModel<float>>(ModelConfig::from_json(meta["model"].dump()), std::move(ck.params));
}

template struct Geometry<float>;
template struct Geometry<double>;
template Geometry<float> make_geometry<float>(const QubitLayout &, const ModelConfig &);
template Geometry<double> make_geometry<double>(const QubitLayout &, const ModelConfig &);
template class AqModel<float>;
template class AqModel<double>;
template struct DecoderState<float>;
template struct DecoderState<double>;
template class StreamingDecoder<float>;
template class StreamingDecoder<double>;

}  // namespace aqlab
