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

#ifndef AQLAB_NN_H
#define AQLAB_NN_H

#include <cstddef>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aqlab {

/// Row-major matrix. Everything in the network is two-dimensional; a scalar is 1 x 1.
template <typename T>
struct Tensor {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(size_t r, size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {
    }
    Tensor(size_t r, size_t c, std::vector<T> values) : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != r * c) {
            throw std::invalid_argument("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                                        std::to_string(r) + "x" + std::to_string(c));
        }
    }

    size_t size() const {
        return data.size();
    }
    T &at(size_t r, size_t c) {
        return data[r * cols + c];
    }
    T at(size_t r, size_t c) const {
        return data[r * cols + c];
    }
    T *row(size_t r) {
        return data.data() + r * cols;
    }
    const T *row(size_t r) const {
        return data.data() + r * cols;
    }
    std::string shape_str() const {
        return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
    }
    bool operator==(const Tensor &) const = default;
};

/// A trainable tensor with its gradient and optimizer momentum.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> momentum;
};

/// Rotary tables for one sequence: angle per (token, pair). Pairs [0, P/2)
/// rotate with the x coordinate and [P/2, P) with y, where P = head_dim / 2.
template <typename T>
struct RopeTable {
    size_t tokens = 0;
    size_t pairs = 0;
    std::vector<T> cos, sin;
};

/// Builds rotary tables from per-token (x, y) positions. Each axis gets
/// head_dim / 2 channels, which must be even.
template <typename T>
RopeTable<T> make_rope(const std::vector<std::pair<double, double>> &positions, size_t head_dim,
                       double position_scale = 100.0, double base = 10000.0);

/// Handle to a node of a Graph.
struct Var {
    int id = -1;
};

/// Tape for reverse-mode differentiation. With `record == false` no backward
/// closures are kept, which is the inference mode.
template <typename T>
class Graph {
   public:
    explicit Graph(bool record = true) : record_(record) {
    }

    bool recording() const {
        return record_;
    }
    size_t size() const {
        return nodes_.size();
    }
    const Tensor<T> &value(Var v) const {
        return node(v).val();
    }
    /// Gradient accumulated on a node by backward() (zero tensor when none).
    Tensor<T> grad(Var v) const;

    Var input(Tensor<T> t);
    Var param(Parameter<T> &p);

    Var matmul(Var a, Var b);
    /// x W + bias (bias may be a default Var for none).
    Var linear(Var x, Var w, Var bias = {});
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, T c);
    /// Adds a 1 x m row to every row of a.
    Var add_row(Var a, Var row);
    /// Multiplies every row of a elementwise by a 1 x m row.
    Var mul_row(Var a, Var row);
    /// Adds p (R x m) to each consecutive block of R rows of a.
    Var add_tiled(Var a, Var p);
    Var gelu(Var a);
    Var sigmoid(Var a);
    /// x / sqrt(mean(x^2) + eps) * gain, per row.
    Var rmsnorm(Var x, Var gain, T eps = T(1e-6));
    Var concat_cols(Var a, Var b);
    Var slice_cols(Var a, size_t begin, size_t count);
    Var concat_rows(const std::vector<Var> &parts);
    Var slice_rows(Var a, size_t begin, size_t count);
    /// Mean over each consecutive block of `block` rows.
    Var mean_blocks(Var a, size_t block);
    /// Repeats every row `times` times consecutively.
    Var repeat_rows(Var a, size_t times);
    /// Multi-head attention within groups. q has groups*sq rows, k and v have
    /// groups*sk rows; all have heads*head_dim columns. Rotary tables, when
    /// given, are indexed by the position of a row inside its group.
    Var attention(Var q, Var k, Var v, size_t groups, size_t heads, const RopeTable<T> *rope_q = nullptr,
                  const RopeTable<T> *rope_k = nullptr);
    /// sum_i w_i (softplus(z_i) - y_i z_i) over a column of logits; 1 x 1.
    Var bce_logits(Var logits, const std::vector<T> &labels, const std::vector<T> &weights);
    Var sum(const std::vector<Var> &scalars);

    /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
    void backward(Var loss);

   private:
    struct Node {
        Tensor<T> value;
        const Tensor<T> *ext = nullptr;  // parameters are referenced, not copied
        Tensor<T> grad;
        bool needs_grad = false;
        std::function<void()> back;
        Parameter<T> *param = nullptr;

        const Tensor<T> &val() const {
            return ext ? *ext : value;
        }
    };
    Var push(Tensor<T> value, bool needs_grad);
    Tensor<T> &g(Var v);
    bool needs(Var v) const {
        return v.id >= 0 && nodes_[v.id].needs_grad;
    }
    const Node &node(Var v) const;
    const Tensor<T> &val(Var v) const {
        return nodes_[v.id].val();
    }

    bool record_;
    std::vector<Node> nodes_;
    std::deque<RopeTable<T>> ropes_;
};

/// Elementwise activations shared by the graph and tests.
double gelu_value(double x);

}  // namespace aqlab

#endif
