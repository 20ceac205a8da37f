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

#include "aqlab/nn.h"

#include <cmath>
#include <functional>

#include "aqlab/params.h"
#include "aqlab/rng.h"
#include "gtest/gtest.h"

using namespace aqlab;

namespace {

using Fn = std::function<Var(Graph<double> &, std::vector<Var> &)>;

Tensor<double> random_tensor(size_t r, size_t c, Rng &rng, double scale = 1.0) {
    Tensor<double> t(r, c);
    for (auto &x : t.data) {
        x = rng.normal() * scale;
    }
    return t;
}

// Reduces an op output to a scalar with fixed random weights, then compares
// autodiff gradients of every input against central differences.
double max_gradient_error(std::vector<Tensor<double>> inputs, const Fn &op, uint64_t seed = 1) {
    Rng rng(seed);
    std::vector<Parameter<double>> ps(inputs.size());
    for (size_t i = 0; i < inputs.size(); i++) {
        ps[i].value = inputs[i];
    }
    Tensor<double> mix;
    auto eval = [&](bool grad) {
        Graph<double> g(true);
        std::vector<Var> vs;
        for (auto &p : ps) {
            vs.push_back(g.param(p));
        }
        Var out = op(g, vs);
        const auto &o = g.value(out);
        if (mix.size() != o.size()) {
            mix = random_tensor(o.rows, o.cols, rng);
        }
        Var loss = g.sum({g.mul(out, g.input(mix))});
        // Sum all entries through a ones matmul.
        Var total = g.matmul(g.matmul(g.input(Tensor<double>(1, o.rows, 1.0)), loss), g.input(Tensor<double>(o.cols, 1, 1.0)));
        if (grad) {
            for (auto &p : ps) {
                p.grad = Tensor<double>(p.value.rows, p.value.cols);
            }
            g.backward(total);
        }
        return g.value(total).data[0];
    };
    eval(true);
    double worst = 0;
    const double h = 1e-5;
    for (auto &p : ps) {
        for (size_t i = 0; i < p.value.size(); i++) {
            double keep = p.value.data[i];
            p.value.data[i] = keep + h;
            double up = eval(false);
            p.value.data[i] = keep - h;
            double down = eval(false);
            p.value.data[i] = keep;
            double fd = (up - down) / (2 * h);
            double ad = p.grad.data[i];
            double err = std::abs(fd - ad) / std::max(1.0, std::abs(fd) + std::abs(ad));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace

TEST(nn, gelu_and_rmsnorm_values) {
    EXPECT_EQ(gelu_value(0), 0);
    EXPECT_NEAR(gelu_value(1.0), 0.8413447460685429, 1e-12);
    Graph<float> g(false);
    Var x = g.input(Tensor<float>(2, 4, 1.0f));
    Var gain = g.input(Tensor<float>(1, 4, 1.0f));
    auto y = g.value(g.rmsnorm(x, gain));
    for (float v : y.data) {
        EXPECT_NEAR(v, 1.0f, 1e-5f);
    }
    Var z = g.input(Tensor<float>(1, 4, 0.0f));
    for (float v : g.value(g.rmsnorm(z, gain)).data) {
        EXPECT_EQ(v, 0.0f);
    }
}

TEST(nn, shape_errors_name_shapes) {
    Graph<float> g(false);
    Var a = g.input(Tensor<float>(2, 3));
    Var b = g.input(Tensor<float>(2, 3));
    try {
        g.matmul(a, b);
        FAIL();
    } catch (const std::invalid_argument &e) {
        EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
    }
    EXPECT_THROW(Tensor<float>(2, 2, std::vector<float>(3)), std::invalid_argument);
}

TEST(nn, op_gradients_match_finite_differences) {
    Rng rng(42);
    auto T = [&](size_t r, size_t c) { return random_tensor(r, c, rng); };
    EXPECT_LT(max_gradient_error({T(3, 4), T(4, 5)}, [](auto &g, auto &v) { return g.matmul(v[0], v[1]); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(3, 4), T(4, 5), T(1, 5)},
                                 [](auto &g, auto &v) { return g.linear(v[0], v[1], v[2]); }),
              1e-4);
    EXPECT_LT(max_gradient_error({T(3, 4), T(3, 4)}, [](auto &g, auto &v) { return g.add(v[0], v[1]); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(3, 4), T(3, 4)}, [](auto &g, auto &v) { return g.sub(v[0], v[1]); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(3, 4), T(3, 4)}, [](auto &g, auto &v) { return g.mul(v[0], v[1]); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(3, 4)}, [](auto &g, auto &v) { return g.scale(v[0], 0.7); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(3, 4), T(1, 4)}, [](auto &g, auto &v) { return g.mul_row(v[0], v[1]); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(6, 4), T(2, 4)}, [](auto &g, auto &v) { return g.add_tiled(v[0], v[1]); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(3, 4)}, [](auto &g, auto &v) { return g.gelu(v[0]); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(3, 4)}, [](auto &g, auto &v) { return g.sigmoid(v[0]); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(3, 5), T(1, 5)}, [](auto &g, auto &v) { return g.rmsnorm(v[0], v[1]); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(3, 2), T(3, 3)}, [](auto &g, auto &v) { return g.concat_cols(v[0], v[1]); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(3, 5)}, [](auto &g, auto &v) { return g.slice_cols(v[0], 1, 3); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(2, 3), T(1, 3)},
                                 [](auto &g, auto &v) { return g.concat_rows({v[0], v[1], v[0]}); }),
              1e-4);
    EXPECT_LT(max_gradient_error({T(5, 3)}, [](auto &g, auto &v) { return g.slice_rows(v[0], 1, 3); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(6, 3)}, [](auto &g, auto &v) { return g.mean_blocks(v[0], 3); }), 1e-4);
    EXPECT_LT(max_gradient_error({T(2, 3)}, [](auto &g, auto &v) { return g.repeat_rows(v[0], 3); }), 1e-4);
    std::vector<double> labels = {0, 1, 1, 0, 1, 0}, weights = {0.5, 1, 2, 1, 0.25, 1};
    EXPECT_LT(max_gradient_error({T(6, 1)},
                                 [&](auto &g, auto &v) { return g.bce_logits(v[0], labels, weights); }),
              1e-4);
}

TEST(nn, attention_gradients_with_rope) {
    Rng rng(9);
    auto T = [&](size_t r, size_t c) { return random_tensor(r, c, rng); };
    std::vector<std::pair<double, double>> pos = {{-0.5, 0.5}, {0.1, -0.2}, {0.3, 0.0}};
    auto rope = make_rope<double>(pos, 4, 1.0);
    // Two groups of three tokens, two heads of width 4.
    EXPECT_LT(max_gradient_error({T(6, 8), T(6, 8), T(6, 8)},
                                 [&](auto &g, auto &v) { return g.attention(v[0], v[1], v[2], 2, 2, &rope, &rope); }),
              1e-4);
    // Cross attention: one query per group, no rotation.
    EXPECT_LT(max_gradient_error({T(2, 8), T(6, 8), T(6, 8)},
                                 [&](auto &g, auto &v) { return g.attention(v[0], v[1], v[2], 2, 2); }),
              1e-4);
}

TEST(nn, rope_properties) {
    EXPECT_THROW(make_rope<double>({{0, 0}}, 6), std::invalid_argument);
    Rng rng(4);
    auto q = random_tensor(3, 8, rng), k = random_tensor(3, 8, rng), v = random_tensor(3, 8, rng);
    auto run = [&](const std::vector<std::pair<double, double>> &pos, const Tensor<double> &qq,
                   const Tensor<double> &kk, const Tensor<double> &vv, bool use_rope) {
        auto rope = make_rope<double>(pos, 8);
        Graph<double> g(false);
        return g.value(g.attention(g.input(qq), g.input(kk), g.input(vv), 1, 1, use_rope ? &rope : nullptr,
                                   use_rope ? &rope : nullptr));
    };
    // Equal positions: relative rotation cancels.
    std::vector<std::pair<double, double>> same(3, {0.25, -0.1});
    auto a = run(same, q, k, v, true), b = run(same, q, k, v, false);
    for (size_t i = 0; i < a.size(); i++) {
        EXPECT_NEAR(a.data[i], b.data[i], 1e-12);
    }
    // Swapping tokens together with their positions swaps the output rows.
    std::vector<std::pair<double, double>> pos = {{-0.5, 0.5}, {0.1, -0.2}, {0.3, 0.0}};
    auto swap_rows = [](Tensor<double> t) {
        std::swap_ranges(t.row(0), t.row(0) + t.cols, t.row(2));
        return t;
    };
    auto base = run(pos, q, k, v, true);
    auto swapped = run({pos[2], pos[1], pos[0]}, swap_rows(q), swap_rows(k), swap_rows(v), true);
    auto expect = swap_rows(base);
    for (size_t i = 0; i < base.size(); i++) {
        EXPECT_NEAR(swapped.data[i], expect.data[i], 1e-12);
    }
    // Rotation keeps norms: with one key the output is that value row, while q and k
    // norms enter only through the (rotated) dot product.
    auto rope = make_rope<double>(pos, 8);
    for (size_t t = 0; t < 3; t++) {
        for (size_t p = 0; p < rope.pairs; p++) {
            double c = rope.cos[t * rope.pairs + p], s = rope.sin[t * rope.pairs + p];
            EXPECT_NEAR(c * c + s * s, 1.0, 1e-12);
        }
    }
}

TEST(nn, single_token_attention_is_value_path) {
    Rng rng(5);
    auto q = random_tensor(1, 8, rng), k = random_tensor(1, 8, rng), v = random_tensor(1, 8, rng);
    Graph<double> g(false);
    auto out = g.value(g.attention(g.input(q), g.input(k), g.input(v), 1, 2));
    for (size_t i = 0; i < 8; i++) {
        EXPECT_NEAR(out.data[i], v.data[i], 1e-15);
    }
}

TEST(nn, orthogonal_init) {
    for (uint64_t seed : {1u, 2u, 77u}) {
        auto q = orthogonal_init(4, 4, seed);
        double worst = 0;
        for (size_t i = 0; i < 4; i++) {
            for (size_t j = 0; j < 4; j++) {
                double dot = 0;
                for (size_t r = 0; r < 4; r++) {
                    dot += q.at(r, i) * q.at(r, j);
                }
                worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
            }
        }
        EXPECT_LT(worst, 1e-5);
        // |det| via Gaussian elimination.
        auto m = q;
        double det = 1;
        for (size_t c = 0; c < 4; c++) {
            size_t piv = c;
            for (size_t r = c; r < 4; r++) {
                if (std::abs(m.at(r, c)) > std::abs(m.at(piv, c))) {
                    piv = r;
                }
            }
            for (size_t k = 0; k < 4; k++) {
                std::swap(m.at(c, k), m.at(piv, k));
            }
            det *= m.at(c, c);
            for (size_t r = c + 1; r < 4; r++) {
                double f = m.at(r, c) / m.at(c, c);
                for (size_t k = c; k < 4; k++) {
                    m.at(r, k) -= f * m.at(c, k);
                }
            }
        }
        EXPECT_NEAR(std::abs(det), 1.0, 1e-4);
    }
    EXPECT_EQ(orthogonal_init(8, 8, 3), orthogonal_init(8, 8, 3));
    EXPECT_THROW(orthogonal_init(3, 4, 1), std::invalid_argument);
}

TEST(nn, lion_rules) {
    ParameterStore<double> s;
    auto &p = s.add("w", Tensor<double>(1, 3, std::vector<double>{1.0, -2.0, 0.5}));
    lion_step(s, 0.1, {0.9, 0.99, 0.0});
    EXPECT_EQ(p.value.data, (std::vector<double>{1.0, -2.0, 0.5}));
    lion_step(s, 0.1, {0.9, 0.99, 0.5});
    EXPECT_NEAR(p.value.data[0], 1.0 - 0.1 * 0.5 * 1.0, 1e-15);

    // Direction is invariant to gradient scale.
    ParameterStore<double> a, b;
    a.add("w", Tensor<double>(1, 3)).grad = Tensor<double>(1, 3, std::vector<double>{0.3, -0.2, 0.0});
    b.add("w", Tensor<double>(1, 3)).grad = Tensor<double>(1, 3, std::vector<double>{3.0, -2.0, 0.0});
    lion_step(a, 0.01, {});
    lion_step(b, 0.01, {});
    EXPECT_EQ(a.get("w").value, b.get("w").value);
    EXPECT_EQ(a.get("w").value.data[2], 0.0);

    // Scalar quadratic (w - 3)^2 decreases.
    ParameterStore<double> q;
    auto &w = q.add("w", Tensor<double>(1, 1, 0.0));
    double first = 9;
    for (int step = 0; step < 100; step++) {
        w.grad.data[0] = 2 * (w.value.data[0] - 3);
        lion_step(q, 1e-3, {});
    }
    double last = (w.value.data[0] - 3) * (w.value.data[0] - 3);
    EXPECT_LT(last, first);
    EXPECT_NEAR(w.value.data[0], 0.1, 1e-9);
}

TEST(nn, checkpoint_round_trip) {
    ParameterStore<float> s;
    s.add("a", Tensor<float>(2, 3, std::vector<float>{1, 2, 3, 4, 5, 6}));
    auto &b = s.add("b.gain", Tensor<float>(1, 2, std::vector<float>{-0.5f, 0.25f}));
    b.momentum = Tensor<float>(1, 2, std::vector<float>{0.125f, 0});
    auto bytes = checkpoint_bytes("{\"step\":3}", s);
    EXPECT_EQ(bytes.substr(0, 4), "AQCK");
    auto ck = parse_checkpoint(bytes);
    EXPECT_EQ(ck.metadata, "{\"step\":3}");
    EXPECT_EQ(ck.params.get("a").value, s.get("a").value);
    EXPECT_EQ(ck.params.get("b.gain").momentum, b.momentum);
    EXPECT_EQ(checkpoint_bytes(ck.metadata, ck.params), bytes);
    EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 1)), std::runtime_error);
    EXPECT_THROW(parse_checkpoint("XXXX"), std::runtime_error);
}
