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

#ifndef AQLAB_PARAMS_H
#define AQLAB_PARAMS_H

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "aqlab/nn.h"

namespace aqlab {

/// Named parameters with stable addresses.
template <typename T>
class ParameterStore {
   public:
    Parameter<T> &add(const std::string &name, Tensor<T> value);
    Parameter<T> &get(const std::string &name);
    const Parameter<T> &get(const std::string &name) const;
    bool contains(const std::string &name) const {
        return index_.count(name) != 0;
    }
    size_t size() const {
        return params_.size();
    }
    size_t num_values() const;
    std::deque<Parameter<T>> &all() {
        return params_;
    }
    const std::deque<Parameter<T>> &all() const {
        return params_;
    }
    void zero_grad();

    /// Same names and shapes, values converted to U.
    template <typename U>
    ParameterStore<U> cast() const {
        ParameterStore<U> out;
        for (const auto &p : params_) {
            Tensor<U> v(p.value.rows, p.value.cols);
            for (size_t i = 0; i < v.size(); i++) {
                v.data[i] = U(p.value.data[i]);
            }
            auto &q = out.add(p.name, std::move(v));
            if (p.momentum.size() == p.value.size()) {
                q.momentum = Tensor<U>(p.value.rows, p.value.cols);
                for (size_t i = 0; i < p.momentum.size(); i++) {
                    q.momentum.data[i] = U(p.momentum.data[i]);
                }
            }
        }
        return out;
    }

   private:
    std::deque<Parameter<T>> params_;
    std::map<std::string, size_t> index_;
};

struct LionConfig {
    double beta1 = 0.9;
    double beta2 = 0.99;
    double weight_decay = 0.0;
};

/// theta -= lr * (sign(beta1 m + (1 - beta1) g) + wd * theta);
/// m = beta2 m + (1 - beta2) g. Gradients are left in place.
template <typename T>
void lion_step(ParameterStore<T> &store, double lr, const LionConfig &config);

/// Random n x n orthogonal matrix (Gram-Schmidt on a Gaussian matrix in
/// double precision, columns sign-fixed so the factorization is unique).
Tensor<double> orthogonal_init(size_t rows, size_t cols, uint64_t seed);

/// Checkpoint file: "AQCK", format version, a metadata string, then a table of
/// (name, dtype, rows, cols) entries followed by raw little-endian values.
/// Optimizer momenta are stored as extra entries named "<param>#m".
struct Checkpoint {
    std::string metadata;
    ParameterStore<float> params;
};

void save_checkpoint(const std::string &path, const std::string &metadata, const ParameterStore<float> &params);
Checkpoint load_checkpoint(const std::string &path);
std::string checkpoint_bytes(const std::string &metadata, const ParameterStore<float> &params);
Checkpoint parse_checkpoint(const std::string &bytes);

}  // namespace aqlab

#endif
