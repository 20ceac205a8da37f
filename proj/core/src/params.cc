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

#include "aqlab/params.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "aqlab/rng.h"

namespace aqlab {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename T>
Parameter<T> &ParameterStore<T>::add(const std::string &name, Tensor<T> value) {
    if (index_.count(name)) {
        throw std::invalid_argument("duplicate parameter name '" + name + "'");
    }
    index_[name] = params_.size();
    Parameter<T> p;
    p.name = name;
    p.grad = Tensor<T>(value.rows, value.cols);
    p.value = std::move(value);
    params_.push_back(std::move(p));
    return params_.back();
}

template <typename T>
Parameter<T> &ParameterStore<T>::get(const std::string &name) {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw std::out_of_range("no parameter named '" + name + "'");
    }
    return params_[it->second];
}

template <typename T>
const Parameter<T> &ParameterStore<T>::get(const std::string &name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw std::out_of_range("no parameter named '" + name + "'");
    }
    return params_[it->second];
}

template <typename T>
size_t ParameterStore<T>::num_values() const {
    size_t n = 0;
    for (const auto &p : params_) {
        n += p.value.size();
    }
    return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
    for (auto &p : params_) {
        if (p.grad.size() != p.value.size()) {
            p.grad = Tensor<T>(p.value.rows, p.value.cols);
        } else {
            std::fill(p.grad.data.begin(), p.grad.data.end(), T(0));
        }
    }
}

template <typename T>
void lion_step(ParameterStore<T> &store, double lr, const LionConfig &config) {
    const T b1 = T(config.beta1), b2 = T(config.beta2), wd = T(config.weight_decay), step = T(lr);
    for (auto &p : store.all()) {
        if (p.momentum.size() != p.value.size()) {
            p.momentum = Tensor<T>(p.value.rows, p.value.cols);
        }
        if (p.grad.size() != p.value.size()) {
            p.grad = Tensor<T>(p.value.rows, p.value.cols);
        }
        for (size_t i = 0; i < p.value.size(); i++) {
            T gi = p.grad.data[i];
            T mi = p.momentum.data[i];
            T c = b1 * mi + (T(1) - b1) * gi;
            T sign = c > T(0) ? T(1) : (c < T(0) ? T(-1) : T(0));
            p.value.data[i] -= step * (sign + wd * p.value.data[i]);
            p.momentum.data[i] = b2 * mi + (T(1) - b2) * gi;
        }
    }
}

Tensor<double> orthogonal_init(size_t rows, size_t cols, uint64_t seed) {
    if (rows != cols || rows == 0) {
        throw std::invalid_argument("orthogonal_init needs a non-empty square shape, got " + std::to_string(rows) +
                                    "x" + std::to_string(cols));
    }
    const size_t n = rows;
    Rng rng(seed);
    // Columns of a Gaussian matrix, orthonormalized in order.
    std::vector<std::vector<double>> col(n, std::vector<double>(n));
    for (size_t i = 0; i < n; i++) {
        for (size_t j = 0; j < n; j++) {
            col[j][i] = rng.normal();
        }
    }
    for (size_t j = 0; j < n; j++) {
        // Two passes of modified Gram-Schmidt for numerical orthogonality.
        for (int pass = 0; pass < 2; pass++) {
            for (size_t k = 0; k < j; k++) {
                double dot = 0;
                for (size_t i = 0; i < n; i++) {
                    dot += col[k][i] * col[j][i];
                }
                for (size_t i = 0; i < n; i++) {
                    col[j][i] -= dot * col[k][i];
                }
            }
        }
        double norm = 0;
        for (double v : col[j]) {
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double &v : col[j]) {
            v /= norm;
        }
    }
    Tensor<double> q(n, n);
    for (size_t i = 0; i < n; i++) {
        for (size_t j = 0; j < n; j++) {
            q.at(i, j) = col[j][i];
        }
    }
    return q;
}

namespace {

constexpr char kMagic[4] = {'A', 'Q', 'C', 'K'};
constexpr uint32_t kVersion = 1;

template <typename V>
void put(std::string &out, V v) {
    char buf[sizeof(V)];
    std::memcpy(buf, &v, sizeof(V));
    out.append(buf, sizeof(V));
}

class Reader {
   public:
    explicit Reader(const std::string &b) : b_(b) {
    }
    template <typename V>
    V get() {
        need(sizeof(V));
        V v;
        std::memcpy(&v, b_.data() + at_, sizeof(V));
        at_ += sizeof(V);
        return v;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = b_.substr(at_, n);
        at_ += n;
        return s;
    }
    bool done() const {
        return at_ == b_.size();
    }

   private:
    void need(size_t n) {
        if (at_ + n > b_.size()) {
            throw std::runtime_error("checkpoint truncated at byte " + std::to_string(at_));
        }
    }
    const std::string &b_;
    size_t at_ = 0;
};

}  // namespace

std::string checkpoint_bytes(const std::string &metadata, const ParameterStore<float> &params) {
    struct Entry {
        std::string name;
        const Tensor<float> *t;
    };
    std::vector<Entry> entries;
    for (const auto &p : params.all()) {
        entries.push_back({p.name, &p.value});
    }
    for (const auto &p : params.all()) {
        if (p.momentum.size() == p.value.size()) {
            entries.push_back({p.name + "#m", &p.momentum});
        }
    }
    std::string out(kMagic, 4);
    put<uint32_t>(out, kVersion);
    put<uint64_t>(out, metadata.size());
    out += metadata;
    put<uint32_t>(out, uint32_t(entries.size()));
    for (const auto &e : entries) {
        put<uint32_t>(out, uint32_t(e.name.size()));
        out += e.name;
        put<uint8_t>(out, 0);  // dtype: float32
        put<uint64_t>(out, e.t->rows);
        put<uint64_t>(out, e.t->cols);
    }
    for (const auto &e : entries) {
        out.append(reinterpret_cast<const char *>(e.t->data.data()), e.t->size() * sizeof(float));
    }
    return out;
}

Checkpoint parse_checkpoint(const std::string &bytes) {
    Reader r(bytes);
    if (r.bytes(4) != std::string(kMagic, 4)) {
        throw std::runtime_error("not a checkpoint file (bad magic)");
    }
    uint32_t version = r.get<uint32_t>();
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    ck.metadata = r.bytes(r.get<uint64_t>());
    uint32_t count = r.get<uint32_t>();
    struct Entry {
        std::string name;
        uint64_t rows, cols;
    };
    std::vector<Entry> entries;
    for (uint32_t i = 0; i < count; i++) {
        Entry e;
        e.name = r.bytes(r.get<uint32_t>());
        if (r.get<uint8_t>() != 0) {
            throw std::runtime_error("checkpoint entry '" + e.name + "' has an unsupported dtype");
        }
        e.rows = r.get<uint64_t>();
        e.cols = r.get<uint64_t>();
        entries.push_back(std::move(e));
    }
    for (const auto &e : entries) {
        Tensor<float> t(e.rows, e.cols);
        std::string raw = r.bytes(t.size() * sizeof(float));
        std::memcpy(t.data.data(), raw.data(), raw.size());
        if (e.name.size() > 2 && e.name.compare(e.name.size() - 2, 2, "#m") == 0) {
            ck.params.get(e.name.substr(0, e.name.size() - 2)).momentum = std::move(t);
        } else {
            ck.params.add(e.name, std::move(t));
        }
    }
    if (!r.done()) {
        throw std::runtime_error("checkpoint has trailing bytes");
    }
    return ck;
}

void save_checkpoint(const std::string &path, const std::string &metadata, const ParameterStore<float> &params) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) {
            throw std::runtime_error("cannot write checkpoint " + tmp);
        }
        auto bytes = checkpoint_bytes(metadata, params);
        f.write(bytes.data(), std::streamsize(bytes.size()));
        if (!f) {
            throw std::runtime_error("write failed for checkpoint " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw std::runtime_error("cannot move checkpoint into place at " + path);
    }
}

Checkpoint load_checkpoint(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open checkpoint " + path);
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_checkpoint(ss.str());
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template void lion_step<float>(ParameterStore<float> &, double, const LionConfig &);
template void lion_step<double>(ParameterStore<double> &, double, const LionConfig &);

}  // namespace aqlab
