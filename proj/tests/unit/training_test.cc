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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "aqlab/training.h"
#include "gradcheck.h"
#include "gtest/gtest.h"

using namespace aqlab;

namespace {

ModelConfig tiny_config() {
    ModelConfig c = ModelConfig::desk(CodeKind::Surface);
    c.channels = 16;
    c.heads = 2;
    c.key_size = 8;
    c.widening = 2;
    c.group = 4;
    return c;
}

TrainConfig tiny_train(uint64_t seed) {
    TrainConfig t;
    t.cycles = {8};
    t.batch_size = 16;
    t.total_examples = 160;
    t.seed = seed;
    t.dev_shots = 0;
    t.eval_every = 0;
    return t;
}

std::string file_bytes(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST(lr_scale, base_cases) {
    EXPECT_DOUBLE_EQ(lr_scale(1.0, 8, 24.0), 1.0);
    EXPECT_DOUBLE_EQ(lr_scale(1.0, 8, 48.0), 2.0);
    // 0.8^(log2 15) * 2^(log2 5), evaluated with exp/log.
    const double want = std::exp(std::log(0.8) * std::log(15.0) / std::log(2.0)) * 5.0;
    EXPECT_NEAR(lr_scale(1.0, 120, 120.0), want, 1e-12);
    EXPECT_NEAR(want, 2.091, 5e-4);
    EXPECT_DOUBLE_EQ(lr_scale(0.5, 8, 12, CodeKind::Colour), 0.5);
    EXPECT_THROW(lr_scale(1.0, 0, 24.0), std::invalid_argument);
}

TEST(curriculum, endpoints_normalization_monotone) {
    const std::vector<int> ds{3, 5, 7};
    double last_big = -1;
    for (int i = 0; i <= 10; i++) {
        auto w = curriculum_weights(i / 10.0, ds);
        EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
        EXPECT_GE(w.back(), last_big);
        last_big = w.back();
    }
    auto w0 = curriculum_weights(0, ds);
    auto w1 = curriculum_weights(1, ds);
    EXPECT_EQ(std::max_element(w0.begin(), w0.end()) - w0.begin(), 0);
    EXPECT_EQ(std::max_element(w1.begin(), w1.end()) - w1.begin(), 2);
    EXPECT_THROW(curriculum_weights(1.5, ds), std::invalid_argument);
}

TEST(mixture, empirical_frequencies_within_three_sigma) {
    const std::vector<double> w{1, 2, 1};
    Rng rng(3);
    std::vector<int> counts(3, 0);
    const int n = 10000;
    for (int i = 0; i < n; i++) {
        counts[sample_index(w, rng)]++;
    }
    for (size_t i = 0; i < 3; i++) {
        const double p = w[i] / 4.0;
        EXPECT_LT(std::abs(counts[i] - n * p), 3 * std::sqrt(n * p * (1 - p)));
    }
}

TEST(input_mask, fractions) {
    Rng rng(4);
    auto none = make_input_mask(50, 10, 8, 0.0, 0.8, rng);
    EXPECT_EQ(std::accumulate(none.begin(), none.end(), 0), 0);
    auto m = make_input_mask(4000, 10, 8, 0.5, 0.8, rng);
    const double frac = std::accumulate(m.begin(), m.end(), 0.0) / double(m.size());
    EXPECT_NEAR(frac, 0.4, 0.01);
    // About a fifth of the examples are untouched.
    size_t clean = 0;
    for (size_t e = 0; e < 4000; e++) {
        clean += std::all_of(m.begin() + e * 80, m.begin() + (e + 1) * 80, [](uint8_t v) { return v == 0; });
    }
    EXPECT_NEAR(clean / 4000.0, 0.2, 0.03);
}

TEST(loss, weighted_total_and_half_probability_baseline) {
    std::array<double, kNumHeads> heads;
    heads.fill(std::log(2.0));
    std::array<bool, kNumHeads> all;
    all.fill(true);
    auto r = combine_losses(heads, all, LossWeights{}, 10);
    EXPECT_NEAR(r.total, 12.2 * std::log(2.0), 1e-12);
    EXPECT_NEAR(r.total, 8.456, 1e-3);
    heads.fill(0.0);
    EXPECT_EQ(combine_losses(heads, all, LossWeights{}, 1).total, 0.0);

    // A zeroed output projection predicts 0.5 on every head.
    AqModel<double> model(tiny_config(), 5);
    for (const char *name : {"ro.out", "ro.outb"}) {
        for (auto &v : model.params().get(name).value.data) {
            v = 0;
        }
    }
    Circuit c = build_memory_circuit(CodeSpec{CodeKind::Surface, 3, Basis::Z}, 10, NoiseParams{0.005});
    TrainBatch b = make_batch(c, 8, 6, true, 0.5, 0.8);
    Graph<double> g(false);
    auto lg = build_loss(g, model, b, LossWeights{}, true);
    for (size_t h = 0; h < kNumHeads; h++) {
        ASSERT_TRUE(lg.present[h]);
        EXPECT_NEAR(g.value(lg.heads[h]).data[0], std::log(2.0), 1e-12) << head_name(h);
    }
    EXPECT_NEAR(g.value(lg.total).data[0], 12.2 * std::log(2.0), 1e-12);

    TrainBatch plain = make_batch(c, 8, 6, false, 0.0, 0.0);
    EXPECT_THROW(build_loss(g, model, plain, LossWeights{}, true), std::invalid_argument);
    auto only_final = build_loss(g, model, plain, LossWeights{}, false);
    EXPECT_FALSE(only_final.present[kFake]);
    EXPECT_NEAR(g.value(only_final.total).data[0], 1.2 * std::log(2.0), 1e-12);
}

TEST(loss, gradients_match_finite_differences) {
    for (const auto &e : aqlab::testing::loss_gradient_check()) {
        EXPECT_LT(e.relative_error, 1e-3) << e.name;
    }
}

TEST(train_config, json_round_trip_and_validation) {
    TrainConfig t = tiny_train(9);
    t.noise = {{0.002, 1}, {0.01, 3}};
    TrainConfig back = TrainConfig::from_json(t.to_json());
    EXPECT_EQ(back.to_json(), t.to_json());
    t.mask_fraction = 1.5;
    EXPECT_THROW(t.validate(), std::invalid_argument);
    t = tiny_train(9);
    t.noise = {{0.005, 0}};
    EXPECT_THROW(t.validate(), std::invalid_argument);
}

TEST(trainer, warmup_starts_at_zero_and_reaches_scaled_rate) {
    AqModel<float> model(tiny_config(), 10);
    TrainConfig t = tiny_train(11);
    t.total_examples = 320;
    t.warmup_fraction = 0.1;  // 32 examples, two steps
    Trainer tr(model, t);
    const double full = lr_scale(t.base_learning_rate, 8, 8u, CodeKind::Surface);
    EXPECT_EQ(tr.learning_rate(8, 8), 0.0);
    EXPECT_EQ(tr.step().lr, 0.0);
    EXPECT_DOUBLE_EQ(tr.step().lr, full / 2);
    EXPECT_DOUBLE_EQ(tr.step().lr, full);
    EXPECT_DOUBLE_EQ(tr.step().lr, full);
}

TEST(trainer, deterministic_checkpoints_and_resume) {
    const std::string dir = ::testing::TempDir();
    auto run = [&](const std::string &path, int steps) {
        AqModel<float> model(tiny_config(), 12);
        Trainer tr(model, tiny_train(13));
        for (int i = 0; i < steps; i++) {
            tr.step();
        }
        tr.save(path);
    };
    run(dir + "ck_a.aqck", 3);
    run(dir + "ck_b.aqck", 3);
    EXPECT_EQ(file_bytes(dir + "ck_a.aqck"), file_bytes(dir + "ck_b.aqck"));

    run(dir + "ck_c.aqck", 2);
    {
        AqModel<float> model(tiny_config(), 99);
        Trainer tr(model, tiny_train(13));
        tr.resume(dir + "ck_c.aqck");
        EXPECT_EQ(tr.progress().step, 2u);
        tr.step();
        tr.save(dir + "ck_d.aqck");
    }
    EXPECT_EQ(file_bytes(dir + "ck_a.aqck"), file_bytes(dir + "ck_d.aqck"));
    for (const char *f : {"ck_a.aqck", "ck_b.aqck", "ck_c.aqck", "ck_d.aqck"}) {
        std::remove((dir + f).c_str());
    }
}

TEST(trainer, smoke_run_reduces_loss_from_baseline) {
    ModelConfig cfg = tiny_config();
    cfg.group = 5;
    AqModel<float> model(cfg, 14);
    TrainConfig t = tiny_train(15);
    t.cycles = {10};
    t.batch_size = 32;
    t.total_examples = 2048;
    t.noise = {{0.005, 1}};
    t.warmup_fraction = 0.02;
    t.dev_shots = 200;
    t.eval_every = 1024;
    Trainer tr(model, t);
    std::ostringstream log;
    tr.run(&log);
    std::vector<double> totals;
    std::istringstream in(log.str());
    std::string line;
    size_t dev_lines = 0;
    while (std::getline(in, line)) {
        if (line.find("\"dev_ler\"") != std::string::npos) {
            dev_lines++;
            continue;
        }
        const auto at = line.find("\"total\":");
        ASSERT_NE(at, std::string::npos);
        totals.push_back(std::stod(line.substr(at + 8)));
    }
    ASSERT_EQ(totals.size(), 64u);
    EXPECT_EQ(dev_lines, 2u);
    // The untrained model sits near the weighted ln 2 baseline.
    EXPECT_NEAR(totals[0], 12.2 * std::log(2.0), 3.0);
    const double late = std::accumulate(totals.end() - 16, totals.end(), 0.0) / 16;
    EXPECT_LT(late, 0.6 * 12.2 * std::log(2.0));
}
