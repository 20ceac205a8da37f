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

#include "aqlab/training.h"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace aqlab {

using json = nlohmann::ordered_json;

namespace {

constexpr uint64_t kMixtureStream = 0x6d69787475726573ull;
constexpr uint64_t kMaskStream = 0x6d61736b6d61736bull;
constexpr uint64_t kDevStream = 0x6465767365747321ull;

}  // namespace

const char *head_name(size_t head) {
    static const char *names[kNumHeads] = {"final", "fake", "noiseless", "delta", "n2i"};
    if (head >= kNumHeads) {
        throw std::out_of_range("no such loss head");
    }
    return names[head];
}

void TrainConfig::validate() const {
    auto fail = [](const std::string &m) { throw std::invalid_argument("train config: " + m); };
    if (distances.empty() || cycles.empty() || noise.empty()) {
        fail("distances, cycles and noise mixture must be non-empty");
    }
    for (const auto &n : noise) {
        if (!(n.weight > 0) || !(n.p > 0 && n.p < 0.5)) {
            fail("noise components need 0 < p < 0.5 and positive weights");
        }
    }
    for (auto c : cycles) {
        if (c == 0) {
            fail("cycle counts must be positive");
        }
    }
    for (int d : distances) {
        CodeSpec{code, d, basis}.validate();
    }
    auto frac = [&](double v, const char *what) {
        if (!(v >= 0 && v <= 1)) {
            fail(std::string(what) + " must lie in [0, 1]");
        }
    };
    frac(mask_fraction, "mask_fraction");
    frac(mask_example_fraction, "mask_example_fraction");
    frac(warmup_fraction, "warmup_fraction");
    if (batch_size == 0) {
        fail("batch_size must be positive");
    }
    if (!(base_learning_rate > 0)) {
        fail("base_learning_rate must be positive");
    }
}

std::string TrainConfig::to_json() const {
    json j;
    j["code"] = std::string(aqlab::to_string(code));
    j["basis"] = std::string(aqlab::to_string(basis));
    j["distances"] = distances;
    j["cycles"] = cycles;
    json mix = json::array();
    for (const auto &n : noise) {
        mix.push_back({{"p", n.p}, {"weight", n.weight}});
    }
    j["noise"] = mix;
    j["base_learning_rate"] = base_learning_rate;
    j["batch_size"] = batch_size;
    j["total_examples"] = total_examples;
    j["warmup_fraction"] = warmup_fraction;
    j["cosine_decay"] = cosine_decay;
    j["mask_fraction"] = mask_fraction;
    j["mask_example_fraction"] = mask_example_fraction;
    j["aux_heads"] = aux_heads;
    json w;
    for (size_t h = 0; h < kNumHeads; h++) {
        w[head_name(h)] = weights.w[h];
    }
    j["loss_weights"] = w;
    j["lion"] = {{"beta1", lion.beta1}, {"beta2", lion.beta2}, {"weight_decay", lion.weight_decay}};
    j["seed"] = seed;
    j["dev_shots"] = dev_shots;
    j["dev_p"] = dev_p;
    j["eval_every"] = eval_every;
    j["checkpoint_every"] = checkpoint_every;
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string &text) {
    json j = json::parse(text);
    TrainConfig c;
    if (j.contains("code")) {
        c.code = parse_code_kind(j["code"].get<std::string>());
    }
    if (j.contains("basis")) {
        c.basis = parse_basis(j["basis"].get<std::string>());
    }
    auto get = [&](const char *key, auto &field) {
        if (j.contains(key)) {
            field = j[key].get<std::decay_t<decltype(field)>>();
        }
    };
    get("distances", c.distances);
    get("cycles", c.cycles);
    if (j.contains("noise")) {
        c.noise.clear();
        for (const auto &n : j["noise"]) {
            c.noise.push_back({n.at("p").get<double>(), n.at("weight").get<double>()});
        }
    }
    get("base_learning_rate", c.base_learning_rate);
    get("batch_size", c.batch_size);
    get("total_examples", c.total_examples);
    get("warmup_fraction", c.warmup_fraction);
    get("cosine_decay", c.cosine_decay);
    get("mask_fraction", c.mask_fraction);
    get("mask_example_fraction", c.mask_example_fraction);
    get("aux_heads", c.aux_heads);
    if (j.contains("loss_weights")) {
        for (size_t h = 0; h < kNumHeads; h++) {
            if (j["loss_weights"].contains(head_name(h))) {
                c.weights.w[h] = j["loss_weights"][head_name(h)].get<double>();
            }
        }
    }
    if (j.contains("lion")) {
        const auto &l = j["lion"];
        c.lion.beta1 = l.value("beta1", c.lion.beta1);
        c.lion.beta2 = l.value("beta2", c.lion.beta2);
        c.lion.weight_decay = l.value("weight_decay", c.lion.weight_decay);
    }
    get("seed", c.seed);
    get("dev_shots", c.dev_shots);
    get("dev_p", c.dev_p);
    get("eval_every", c.eval_every);
    get("checkpoint_every", c.checkpoint_every);
    c.validate();
    return c;
}

double lr_scale(double base, size_t stabilizers, double cycles) {
    if (stabilizers < 1 || cycles < 1) {
        throw std::invalid_argument("lr_scale needs at least one stabilizer and one cycle");
    }
    return base * std::pow(0.8, std::log2(double(stabilizers) / 8.0)) * std::pow(2.0, std::log2(cycles / 24.0));
}

double lr_scale(double base, size_t stabilizers, uint32_t cycles, CodeKind code) {
    return lr_scale(base, stabilizers, double(cycles) * (code == CodeKind::Colour ? 2.0 : 1.0));
}

std::vector<double> curriculum_weights(double progress, const std::vector<int> &distances) {
    if (!(progress >= 0 && progress <= 1)) {
        throw std::invalid_argument("curriculum progress must lie in [0, 1]");
    }
    if (distances.empty()) {
        throw std::invalid_argument("curriculum needs at least one distance");
    }
    const size_t n = distances.size();
    std::vector<double> w(n, 0.1 / double(n));
    w[0] += 0.9 * (1 - progress);
    w[n - 1] += 0.9 * progress;
    return w;
}

size_t sample_index(const std::vector<double> &weights, Rng &rng) {
    double total = 0;
    for (double w : weights) {
        total += w;
    }
    double u = rng.uniform() * total;
    for (size_t i = 0; i < weights.size(); i++) {
        if (u < weights[i]) {
            return i;
        }
        u -= weights[i];
    }
    return weights.size() - 1;
}

std::vector<uint8_t> make_input_mask(size_t examples, size_t cycles, size_t stabilizers, double fraction,
                                     double example_fraction, Rng &rng) {
    const size_t per = cycles * stabilizers;
    std::vector<uint8_t> mask(examples * per, 0);
    if (fraction <= 0 || example_fraction <= 0) {
        return mask;
    }
    for (size_t e = 0; e < examples; e++) {
        if (rng.uniform() >= example_fraction) {
            continue;
        }
        for (size_t i = 0; i < per; i++) {
            mask[e * per + i] = rng.uniform() < fraction;
        }
    }
    return mask;
}

LossReport combine_losses(const std::array<double, kNumHeads> &heads, const std::array<bool, kNumHeads> &present,
                          const LossWeights &weights, size_t examples) {
    LossReport r;
    r.heads = heads;
    r.present = present;
    r.examples = examples;
    for (size_t h = 0; h < kNumHeads; h++) {
        if (present[h]) {
            r.total += weights.w[h] * heads[h];
        }
    }
    return r;
}

TrainBatch make_batch(const Circuit &circuit, size_t examples, uint64_t seed, bool aux, double mask_fraction,
                      double mask_example_fraction) {
    auto info = circuit.info();
    if (!info) {
        throw std::invalid_argument("training circuits must carry experiment metadata");
    }
    SampleOptions opt;
    opt.aux = aux;
    ShotTable table = sample_table(circuit, examples, seed, opt);
    ShotEncoder enc(info, 1);
    TrainBatch b;
    b.info = info;
    b.distance = info->layout.spec.distance;
    b.cycles = info->cycles;
    b.p = info->noise.p;
    for (size_t s = 0; s < examples; s++) {
        b.frames.push_back(enc.frames(table.detector_row(s)));
        b.observable.push_back(table.observable(s, 0));
    }
    if (aux) {
        b.aux = table.aux();
    }
    if (mask_fraction > 0 && mask_example_fraction > 0) {
        Rng rng(derive_seed(seed, kMaskStream));
        b.mask = make_input_mask(examples, info->cycles, info->num_slots(), mask_fraction, mask_example_fraction, rng);
    }
    return b;
}

template <typename T>
LossGraph<T> build_loss(Graph<T> &g, const AqModel<T> &model, const TrainBatch &batch, const LossWeights &weights,
                        bool aux_heads) {
    if (aux_heads && batch.aux.size() != batch.size()) {
        throw std::invalid_argument("auxiliary heads need auxiliary labels for every example");
    }
    const ModelConfig &cfg = model.config();
    const ShotEncoder enc(batch.info, cfg.group);
    const Geometry<T> geo = make_geometry<T>(batch.info->layout, cfg);
    const size_t B = batch.size();
    const size_t S = enc.stabilizers();
    const size_t W = cfg.input_width();
    const size_t Tm = enc.num_groups();
    const size_t nT = aux_heads ? Tm : 1;
    const size_t per_mask = size_t(batch.cycles) * S;

    std::vector<Tensor<T>> main(Tm, Tensor<T>(B * S, W));
    Tensor<T> term(nT * B * S, W);
    for (size_t b = 0; b < B; b++) {
        std::vector<uint8_t> running(S, 0);
        const uint8_t *mask = batch.mask.empty() ? nullptr : batch.mask.data() + b * per_mask;
        for (size_t k = 0; k < Tm; k++) {
            enc.write_group(batch.frames[b], k, running, main[k].row(b * S), mask);
            if (k + 1 == Tm) {
                enc.write_terminal(batch.frames[b].terminal, running, term.row(((nT - 1) * B + b) * S));
            } else if (aux_heads) {
                auto bits = enc.terminal_from_bits(batch.aux[b].fake_ending_final_stabilizers[enc.last_cycle(k)]);
                enc.write_terminal(bits, running, term.row((k * B + b) * S));
            }
        }
    }

    std::vector<Var> states, xs;
    for (size_t r = 0; r < cfg.num_recurrent(); r++) {
        states.push_back(g.input(Tensor<T>(B * S, cfg.channels)));
    }
    for (auto &t : main) {
        xs.push_back(model.embed(g, g.input(std::move(t)), geo));
    }
    auto so = model.run_stack(g, std::move(states), std::move(xs), S, geo, aux_heads);
    std::vector<Var> tstates;
    for (size_t r = 0; r < cfg.num_recurrent(); r++) {
        if (aux_heads && Tm > 1) {
            std::vector<Var> parts;
            for (size_t k = 0; k < Tm; k++) {
                parts.push_back(so.states[k][r]);
            }
            tstates.push_back(g.concat_rows(parts));
        } else {
            tstates.push_back(so.final_states[r]);
        }
    }
    auto to = model.run_stack(g, std::move(tstates), {model.embed(g, g.input(std::move(term)), geo)}, S, geo, false);
    Var tl = model.readout(g, to.outputs[0], nT * B, S);

    LossGraph<T> out;
    std::array<std::vector<T>, kNumHeads> labels, wts;
    auto head_rows = [&](size_t h, size_t rows) {
        labels[h].assign(rows, T(0));
        wts[h].assign(rows, T(0));
    };
    for (size_t h = 0; h < kNumHeads; h++) {
        head_rows(h, (h == kNoiseless || h == kDelta) ? Tm * B : nT * B);
    }
    for (size_t k = 0; k < nT; k++) {
        const bool real = k + 1 == nT;
        const uint32_t c = enc.last_cycle(aux_heads ? k : Tm - 1);
        for (size_t b = 0; b < B; b++) {
            const size_t row = k * B + b;
            const uint8_t obs = real ? batch.observable[b] : batch.aux[b].fake_ending_observable.get(c);
            if (real) {
                labels[kFinal][row] = T(obs);
                wts[kFinal][row] = T(1) / T(B);
            } else {
                labels[kFake][row] = T(obs);
                wts[kFake][row] = T(1) / T((nT - 1) * B);
            }
            if (aux_heads) {
                labels[kNoiselessToFake][row] = T(obs ^ uint8_t(batch.aux[b].noiseless_observable.get(c)));
                wts[kNoiselessToFake][row] = T(1) / T(nT * B);
            }
        }
    }
    out.present[kFinal] = true;
    out.present[kFake] = aux_heads && nT > 1;
    out.present[kNoiselessToFake] = aux_heads;
    out.present[kNoiseless] = aux_heads;
    out.present[kDelta] = aux_heads;

    Var ml{};
    if (aux_heads) {
        ml = model.readout(g, Tm == 1 ? so.outputs[0] : g.concat_rows(so.outputs), Tm * B, S);
        for (size_t k = 0; k < Tm; k++) {
            const uint32_t c = enc.last_cycle(k);
            for (size_t b = 0; b < B; b++) {
                const size_t row = k * B + b;
                const uint8_t now = batch.aux[b].noiseless_observable.get(c);
                const uint8_t before = k == 0 ? 0 : batch.aux[b].noiseless_observable.get(enc.last_cycle(k - 1));
                labels[kNoiseless][row] = T(now);
                labels[kDelta][row] = T(now ^ before);
                wts[kNoiseless][row] = wts[kDelta][row] = T(1) / T(Tm * B);
            }
        }
    }

    std::vector<Var> terms;
    for (size_t h = 0; h < kNumHeads; h++) {
        if (!out.present[h]) {
            continue;
        }
        const bool on_main = h == kNoiseless || h == kDelta;
        const size_t col = (h == kFinal || h == kFake || h == kNoiseless) ? 0 : 1;
        out.heads[h] = g.bce_logits(g.slice_cols(on_main ? ml : tl, col, 1), labels[h], wts[h]);
        terms.push_back(g.scale(out.heads[h], T(weights.w[h])));
    }
    out.total = g.sum(terms);
    return out;
}

template LossGraph<float> build_loss<float>(Graph<float> &, const AqModel<float> &, const TrainBatch &,
                                            const LossWeights &, bool);
template LossGraph<double> build_loss<double>(Graph<double> &, const AqModel<double> &, const TrainBatch &,
                                              const LossWeights &, bool);

// ---------------------------------------------------------------------------

Trainer::Trainer(AqModel<float> &model, TrainConfig config) : model_(model), config_(std::move(config)) {
    config_.validate();
    if (config_.code != model_.config().code) {
        throw std::invalid_argument("train config and model disagree on the code");
    }
}

const Circuit &Trainer::circuit_for(int distance, uint32_t cycles, double p) {
    auto key = std::make_tuple(distance, cycles, p);
    auto it = circuits_.find(key);
    if (it == circuits_.end()) {
        it = circuits_
                 .emplace(key, build_memory_circuit(CodeSpec{config_.code, distance, config_.basis}, cycles,
                                                    NoiseParams{p}))
                 .first;
    }
    return it->second;
}

TrainBatch Trainer::batch_for_step(uint64_t step) {
    Rng rng(derive_seed(config_.seed ^ kMixtureStream, step));
    const double progress =
        config_.total_examples ? std::min(1.0, double(progress_.examples) / double(config_.total_examples)) : 0.0;
    std::vector<int> ds = config_.distances;
    std::sort(ds.begin(), ds.end());
    const int d = ds[sample_index(curriculum_weights(progress, ds), rng)];
    std::vector<double> pw;
    for (const auto &n : config_.noise) {
        pw.push_back(n.weight);
    }
    const double p = config_.noise[sample_index(pw, rng)].p;
    const uint32_t cycles = config_.cycles[rng.below(config_.cycles.size())];
    return make_batch(circuit_for(d, cycles, p), config_.batch_size, derive_seed(config_.seed, step),
                      config_.aux_heads, config_.mask_fraction, config_.mask_example_fraction);
}

double Trainer::learning_rate(size_t stabilizers, uint32_t cycles) const {
    double lr = lr_scale(config_.base_learning_rate, stabilizers, cycles, config_.code);
    const double warm = config_.warmup_fraction * double(config_.total_examples);
    const double seen = double(progress_.examples);
    if (warm > 0 && seen < warm) {
        return lr * seen / warm;
    }
    if (config_.cosine_decay && config_.total_examples > 0) {
        const double span = std::max(1.0, double(config_.total_examples) - warm);
        const double t = std::min(1.0, (seen - warm) / span);
        lr *= 0.5 * (1 + std::cos(M_PI * t));
    }
    return lr;
}

TrainProgress Trainer::step() {
    TrainBatch batch = batch_for_step(progress_.step);
    Graph<float> g(true);
    auto lg = build_loss(g, model_, batch, config_.weights, config_.aux_heads);
    std::array<double, kNumHeads> heads{};
    for (size_t h = 0; h < kNumHeads; h++) {
        if (lg.present[h]) {
            heads[h] = double(g.value(lg.heads[h]).data[0]);
        }
    }
    LossReport report = combine_losses(heads, lg.present, config_.weights, batch.size());
    if (!std::isfinite(double(g.value(lg.total).data[0])) || !std::isfinite(report.total)) {
        throw TrainingDiverged("loss became non-finite at step " + std::to_string(progress_.step));
    }
    model_.params().zero_grad();
    g.backward(lg.total);
    const double lr = learning_rate(batch.info->num_slots(), batch.cycles);
    lion_step(model_.params(), lr, config_.lion);
    progress_.step++;
    progress_.examples += batch.size();
    progress_.loss = report;
    progress_.lr = lr;
    return progress_;
}

double Trainer::dev_error_fraction() {
    if (!dev_) {
        const Circuit &c = circuit_for(config_.distances.front(), config_.cycles.front(), config_.dev_p);
        dev_ = std::make_shared<ShotTable>(sample_table(c, config_.dev_shots, derive_seed(config_.seed, kDevStream)));
        dev_info_ = c.info();
    }
    StreamingDecoder<float> dec(model_, dev_info_);
    uint64_t errors = 0;
    for (size_t b0 = 0; b0 < dev_->num_shots(); b0 += 256) {
        const size_t n = std::min<size_t>(256, dev_->num_shots() - b0);
        auto probs = dec.probabilities(*dev_, b0, n);
        for (size_t i = 0; i < n; i++) {
            errors += threshold_prediction(probs[i]) != dev_->observable(b0 + i, 0);
        }
    }
    return dev_->num_shots() ? double(errors) / double(dev_->num_shots()) : 0.0;
}

void Trainer::run(std::ostream *log, const std::string &checkpoint_path) {
    uint64_t next_eval = config_.eval_every ? (progress_.examples / config_.eval_every + 1) * config_.eval_every : 0;
    uint64_t next_ckpt =
        config_.checkpoint_every ? (progress_.examples / config_.checkpoint_every + 1) * config_.checkpoint_every : 0;
    while (progress_.examples < config_.total_examples) {
        step();
        if (log) {
            json j;
            j["step"] = progress_.step;
            j["examples"] = progress_.examples;
            j["lr"] = progress_.lr;
            json heads;
            for (size_t h = 0; h < kNumHeads; h++) {
                if (progress_.loss.present[h]) {
                    heads[head_name(h)] = progress_.loss.heads[h];
                }
            }
            j["loss"] = heads;
            j["total"] = progress_.loss.total;
            *log << j.dump() << "\n";
        }
        const bool last = progress_.examples >= config_.total_examples;
        if (config_.dev_shots && ((next_eval && progress_.examples >= next_eval) || last)) {
            const double frac = dev_error_fraction();
            progress_.dev_ler = frac < 0.5 ? 0.5 * (1 - std::pow(1 - 2 * frac, 1.0 / config_.cycles.front())) : 0.5;
            if (log) {
                json j;
                j["step"] = progress_.step;
                j["examples"] = progress_.examples;
                j["dev_error_fraction"] = frac;
                j["dev_ler"] = progress_.dev_ler;
                *log << j.dump() << "\n";
                log->flush();
            }
            while (next_eval && next_eval <= progress_.examples) {
                next_eval += config_.eval_every;
            }
        }
        if (!checkpoint_path.empty() && ((next_ckpt && progress_.examples >= next_ckpt) || last)) {
            save(checkpoint_path);
            while (next_ckpt && next_ckpt <= progress_.examples) {
                next_ckpt += config_.checkpoint_every;
            }
        }
    }
}

void Trainer::save(const std::string &path) const {
    json extra;
    extra["train"] = json::parse(config_.to_json());
    extra["step"] = progress_.step;
    extra["examples"] = progress_.examples;
    save_model(path, model_, extra.dump());
}

void Trainer::resume(const std::string &path) {
    Checkpoint ck = load_checkpoint(path);
    json meta = json::parse(ck.metadata);
    if (ModelConfig::from_json(meta.at("model").dump()) != model_.config()) {
        throw std::invalid_argument("checkpoint " + path + " was written for a different model config");
    }
    for (auto &p : model_.params().all()) {
        const auto &q = ck.params.get(p.name);
        if (q.value.rows != p.value.rows || q.value.cols != p.value.cols) {
            throw std::invalid_argument("checkpoint parameter " + p.name + " has the wrong shape");
        }
        p.value = q.value;
        p.momentum = q.momentum;
    }
    const auto &extra = meta.at("extra");
    progress_.step = extra.at("step").get<uint64_t>();
    progress_.examples = extra.at("examples").get<uint64_t>();
}

}  // namespace aqlab
