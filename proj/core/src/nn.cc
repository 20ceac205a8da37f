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

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

#ifdef __AVX512F__
#include <immintrin.h>
#endif

namespace aqlab {

namespace {

template <typename T>
std::string shapes(const char *op, const Tensor<T> &a, const Tensor<T> &b) {
    return std::string(op) + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str();
}

// C[n x m] += A[n x k] B[k x m]. Every output element is accumulated with
// fused multiply-adds over k in increasing order, whatever the row blocking,
// so a row's result does not depend on the other rows of the product.
template <typename T, size_t R>
void gemm_rows(const T *a, const T *b, T *c, size_t k, size_t m) {
    for (size_t j = 0; j < m; j++) {
        T acc[R];
        for (size_t r = 0; r < R; r++) {
            acc[r] = c[r * m + j];
        }
        for (size_t kk = 0; kk < k; kk++) {
            const T bv = b[kk * m + j];
            for (size_t r = 0; r < R; r++) {
                acc[r] = std::fma(a[r * k + kk], bv, acc[r]);
            }
        }
        for (size_t r = 0; r < R; r++) {
            c[r * m + j] = acc[r];
        }
    }
}

#ifdef __AVX512F__
struct Avx512Float {
    using V = __m512;
    static constexpr size_t kLanes = 16;
    static V load(const float *p, __mmask16 mask) {
        return _mm512_maskz_loadu_ps(mask, p);
    }
    static void store(float *p, V v, __mmask16 mask) {
        _mm512_mask_storeu_ps(p, mask, v);
    }
    static V broadcast(float x) {
        return _mm512_set1_ps(x);
    }
    static V fma(V a, V b, V c) {
        return _mm512_fmadd_ps(a, b, c);
    }
};

struct Avx512Double {
    using V = __m512d;
    static constexpr size_t kLanes = 8;
    static V load(const double *p, __mmask8 mask) {
        return _mm512_maskz_loadu_pd(mask, p);
    }
    static void store(double *p, V v, __mmask8 mask) {
        _mm512_mask_storeu_pd(p, mask, v);
    }
    static V broadcast(double x) {
        return _mm512_set1_pd(x);
    }
    static V fma(V a, V b, V c) {
        return _mm512_fmadd_pd(a, b, c);
    }
};

// R rows by NV vectors of columns starting at j0; the last vector may be partial.
template <typename K, typename T, size_t R, size_t NV>
void gemm_tile(const T *a, const T *b, T *c, size_t k, size_t m, size_t j0) {
    constexpr size_t L = K::kLanes;
    constexpr uint32_t kFull = L == 16 ? 0xFFFFu : 0xFFu;
    typename K::V acc[R][NV];
    uint32_t masks[NV];
    for (size_t v = 0; v < NV; v++) {
        const size_t left = m - (j0 + v * L);
        masks[v] = left >= L ? kFull : ((1u << left) - 1);
    }
    for (size_t r = 0; r < R; r++) {
        for (size_t v = 0; v < NV; v++) {
            acc[r][v] = K::load(c + r * m + j0 + v * L, masks[v]);
        }
    }
    for (size_t kk = 0; kk < k; kk++) {
        typename K::V bv[NV];
        for (size_t v = 0; v < NV; v++) {
            bv[v] = K::load(b + kk * m + j0 + v * L, masks[v]);
        }
        for (size_t r = 0; r < R; r++) {
            const auto av = K::broadcast(a[r * k + kk]);
            for (size_t v = 0; v < NV; v++) {
                acc[r][v] = K::fma(av, bv[v], acc[r][v]);
            }
        }
    }
    for (size_t r = 0; r < R; r++) {
        for (size_t v = 0; v < NV; v++) {
            K::store(c + r * m + j0 + v * L, acc[r][v], masks[v]);
        }
    }
}

template <typename K, typename T, size_t R>
void gemm_block(const T *a, const T *b, T *c, size_t k, size_t m) {
    constexpr size_t L = K::kLanes;
    size_t j0 = 0;
    for (; j0 + 4 * L <= m; j0 += 4 * L) {
        gemm_tile<K, T, R, 4>(a, b, c, k, m, j0);
    }
    for (; j0 < m; j0 += L) {
        gemm_tile<K, T, R, 1>(a, b, c, k, m, j0);
    }
}

template <typename K, typename T>
void gemm_simd(const T *a, const T *b, T *c, size_t n, size_t k, size_t m) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        gemm_block<K, T, 4>(a + i * k, b, c + i * m, k, m);
    }
    switch (n - i) {
        case 3:
            gemm_block<K, T, 3>(a + i * k, b, c + i * m, k, m);
            break;
        case 2:
            gemm_block<K, T, 2>(a + i * k, b, c + i * m, k, m);
            break;
        case 1:
            gemm_block<K, T, 1>(a + i * k, b, c + i * m, k, m);
            break;
        default:
            break;
    }
}
#endif

template <typename T>
void gemm_acc(const T *a, const T *b, T *c, size_t n, size_t k, size_t m) {
#ifdef __AVX512F__
    if constexpr (std::is_same_v<T, float>) {
        gemm_simd<Avx512Float>(a, b, c, n, k, m);
        return;
    } else if constexpr (std::is_same_v<T, double>) {
        gemm_simd<Avx512Double>(a, b, c, n, k, m);
        return;
    }
#endif
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        gemm_rows<T, 4>(a + i * k, b, c + i * m, k, m);
    }
    for (; i < n; i++) {
        gemm_rows<T, 1>(a + i * k, b, c + i * m, k, m);
    }
}

template <typename T>
std::vector<T> transpose(const Tensor<T> &t) {
    std::vector<T> out(t.size());
    for (size_t r = 0; r < t.rows; r++) {
        for (size_t c = 0; c < t.cols; c++) {
            out[c * t.rows + r] = t.data[r * t.cols + c];
        }
    }
    return out;
}

// dB[k x m] += A^T[k x n] dC[n x m]
// dB[k x m] += A^T dC with A [n x k], dC [n x m].
template <typename T>
void gemm_tn_acc(const T *a, const T *dc, T *db, size_t n, size_t k, size_t m) {
    std::vector<T> at(n * k);
    for (size_t i = 0; i < n; i++) {
        for (size_t kk = 0; kk < k; kk++) {
            at[kk * n + i] = a[i * k + kk];
        }
    }
    gemm_acc(at.data(), dc, db, k, n, m);
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

template <typename T>
void rotate(T *x, const RopeTable<T> &rope, size_t token, size_t heads, size_t head_dim, bool inverse) {
    const T *cs = rope.cos.data() + token * rope.pairs;
    const T *sn = rope.sin.data() + token * rope.pairs;
    for (size_t h = 0; h < heads; h++) {
        T *xh = x + h * head_dim;
        for (size_t p = 0; p < rope.pairs; p++) {
            T a = xh[2 * p], b = xh[2 * p + 1];
            T c = cs[p], s = inverse ? -sn[p] : sn[p];
            xh[2 * p] = a * c - b * s;
            xh[2 * p + 1] = a * s + b * c;
        }
    }
}

}  // namespace

double gelu_value(double x) {
    return 0.5 * x * (1 + std::erf(x * kInvSqrt2));
}

template <typename T>
RopeTable<T> make_rope(const std::vector<std::pair<double, double>> &positions, size_t head_dim, double position_scale,
                       double base) {
    if (head_dim % 2 != 0 || (head_dim / 2) % 2 != 0) {
        throw std::invalid_argument("rotary encoding needs an even channel count per axis; head dimension " +
                                    std::to_string(head_dim) + " gives " + std::to_string(head_dim / 2));
    }
    RopeTable<T> r;
    r.tokens = positions.size();
    r.pairs = head_dim / 2;
    const size_t per_axis = r.pairs / 2;
    r.cos.resize(r.tokens * r.pairs);
    r.sin.resize(r.tokens * r.pairs);
    for (size_t t = 0; t < r.tokens; t++) {
        for (size_t p = 0; p < r.pairs; p++) {
            size_t j = p % per_axis;
            double coord = p < per_axis ? positions[t].first : positions[t].second;
            double freq = std::pow(base, -double(j) / double(per_axis));
            double angle = coord * position_scale * freq;
            r.cos[t * r.pairs + p] = T(std::cos(angle));
            r.sin[t * r.pairs + p] = T(std::sin(angle));
        }
    }
    return r;
}

template <typename T>
Var Graph<T>::push(Tensor<T> value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad && record_;
    nodes_.push_back(std::move(n));
    return Var{int(nodes_.size() - 1)};
}

template <typename T>
const typename Graph<T>::Node &Graph<T>::node(Var v) const {
    if (v.id < 0 || size_t(v.id) >= nodes_.size()) {
        throw std::invalid_argument("invalid graph variable");
    }
    return nodes_[v.id];
}

template <typename T>
Tensor<T> &Graph<T>::g(Var v) {
    Node &n = nodes_[v.id];
    const auto &value = n.val();
    if (n.grad.size() != value.size()) {
        n.grad = Tensor<T>(value.rows, value.cols);
    }
    return n.grad;
}

template <typename T>
Tensor<T> Graph<T>::grad(Var v) const {
    const Node &n = node(v);
    const auto &value = n.val();
    if (n.grad.size() != value.size()) {
        return Tensor<T>(value.rows, value.cols);
    }
    return n.grad;
}

template <typename T>
Var Graph<T>::input(Tensor<T> t) {
    return push(std::move(t), false);
}

template <typename T>
Var Graph<T>::param(Parameter<T> &p) {
    Var v = push(Tensor<T>(), true);
    nodes_[v.id].ext = &p.value;
    if (record_) {
        nodes_[v.id].param = &p;
    }
    return v;
}

template <typename T>
Var Graph<T>::matmul(Var a, Var b) {
    const auto &A = val(a);
    const auto &B = val(b);
    if (A.cols != B.rows) {
        throw std::invalid_argument(shapes("matmul", A, B));
    }
    Tensor<T> out(A.rows, B.cols);
    gemm_acc(A.data.data(), B.data.data(), out.data.data(), A.rows, A.cols, B.cols);
    Var v = push(std::move(out), needs(a) || needs(b));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, b, v] {
            const auto &A = val(a);
            const auto &B = val(b);
            const auto &G = nodes_[v.id].grad;
            if (needs(a)) {
                auto bt = transpose(B);
                gemm_acc(G.data.data(), bt.data(), g(a).data.data(), A.rows, B.cols, A.cols);
            }
            if (needs(b)) {
                gemm_tn_acc(A.data.data(), G.data.data(), g(b).data.data(), A.rows, A.cols, B.cols);
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::linear(Var x, Var w, Var bias) {
    Var y = matmul(x, w);
    return bias.id >= 0 ? add_row(y, bias) : y;
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
    const auto &A = val(a);
    const auto &B = val(b);
    if (A.rows != B.rows || A.cols != B.cols) {
        throw std::invalid_argument(shapes("add", A, B));
    }
    Tensor<T> out = A;
    for (size_t i = 0; i < out.size(); i++) {
        out.data[i] += B.data[i];
    }
    Var v = push(std::move(out), needs(a) || needs(b));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, b, v] {
            const auto &G = nodes_[v.id].grad;
            for (Var x : {a, b}) {
                if (needs(x)) {
                    auto &gx = g(x);
                    for (size_t i = 0; i < G.size(); i++) {
                        gx.data[i] += G.data[i];
                    }
                }
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::sub(Var a, Var b) {
    return add(a, scale(b, T(-1)));
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
    const auto &A = val(a);
    const auto &B = val(b);
    if (A.rows != B.rows || A.cols != B.cols) {
        throw std::invalid_argument(shapes("mul", A, B));
    }
    Tensor<T> out = A;
    for (size_t i = 0; i < out.size(); i++) {
        out.data[i] *= B.data[i];
    }
    Var v = push(std::move(out), needs(a) || needs(b));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, b, v] {
            const auto &G = nodes_[v.id].grad;
            const auto &A = val(a);
            const auto &B = val(b);
            if (needs(a)) {
                auto &ga = g(a);
                for (size_t i = 0; i < G.size(); i++) {
                    ga.data[i] += G.data[i] * B.data[i];
                }
            }
            if (needs(b)) {
                auto &gb = g(b);
                for (size_t i = 0; i < G.size(); i++) {
                    gb.data[i] += G.data[i] * A.data[i];
                }
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::scale(Var a, T c) {
    Tensor<T> out = val(a);
    for (auto &x : out.data) {
        x *= c;
    }
    Var v = push(std::move(out), needs(a));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, v, c] {
            const auto &G = nodes_[v.id].grad;
            auto &ga = g(a);
            for (size_t i = 0; i < G.size(); i++) {
                ga.data[i] += G.data[i] * c;
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::add_row(Var a, Var row) {
    const auto &A = val(a);
    const auto &R = val(row);
    if (R.rows != 1 || R.cols != A.cols) {
        throw std::invalid_argument(shapes("add_row", A, R));
    }
    Tensor<T> out = A;
    for (size_t r = 0; r < out.rows; r++) {
        T *o = out.row(r);
        for (size_t c = 0; c < out.cols; c++) {
            o[c] += R.data[c];
        }
    }
    Var v = push(std::move(out), needs(a) || needs(row));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, row, v] {
            const auto &G = nodes_[v.id].grad;
            if (needs(a)) {
                auto &ga = g(a);
                for (size_t i = 0; i < G.size(); i++) {
                    ga.data[i] += G.data[i];
                }
            }
            if (needs(row)) {
                auto &gr = g(row);
                for (size_t r = 0; r < G.rows; r++) {
                    const T *gi = G.row(r);
                    for (size_t c = 0; c < G.cols; c++) {
                        gr.data[c] += gi[c];
                    }
                }
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::add_tiled(Var a, Var p) {
    const auto &A = val(a);
    const auto &P = val(p);
    if (P.cols != A.cols || P.rows == 0 || A.rows % P.rows != 0) {
        throw std::invalid_argument(shapes("add_tiled", A, P));
    }
    Tensor<T> out = A;
    for (size_t r = 0; r < out.rows; r++) {
        T *o = out.row(r);
        const T *pr = P.row(r % P.rows);
        for (size_t c = 0; c < out.cols; c++) {
            o[c] += pr[c];
        }
    }
    Var v = push(std::move(out), needs(a) || needs(p));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, p, v] {
            const auto &G = nodes_[v.id].grad;
            if (needs(a)) {
                auto &ga = g(a);
                for (size_t i = 0; i < G.size(); i++) {
                    ga.data[i] += G.data[i];
                }
            }
            if (needs(p)) {
                auto &gp = g(p);
                for (size_t r = 0; r < G.rows; r++) {
                    const T *gi = G.row(r);
                    T *pr = gp.row(r % gp.rows);
                    for (size_t c = 0; c < G.cols; c++) {
                        pr[c] += gi[c];
                    }
                }
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::gelu(Var a) {
    Tensor<T> out = val(a);
    const T r2 = T(kInvSqrt2);
    for (auto &x : out.data) {
        x = T(0.5) * x * (T(1) + std::erf(x * r2));
    }
    Var v = push(std::move(out), needs(a));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, v] {
            const auto &G = nodes_[v.id].grad;
            const auto &A = val(a);
            auto &ga = g(a);
            const T r2 = T(kInvSqrt2), r2pi = T(kInvSqrt2Pi);
            for (size_t i = 0; i < G.size(); i++) {
                const T x = A.data[i];
                const T d = T(0.5) * (T(1) + std::erf(x * r2)) + x * r2pi * std::exp(T(-0.5) * x * x);
                ga.data[i] += G.data[i] * d;
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::sigmoid(Var a) {
    Tensor<T> out = val(a);
    for (auto &x : out.data) {
        x = T(1) / (T(1) + std::exp(-x));
    }
    Var v = push(std::move(out), needs(a));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, v] {
            const auto &G = nodes_[v.id].grad;
            const auto &Y = val(v);
            auto &ga = g(a);
            for (size_t i = 0; i < G.size(); i++) {
                ga.data[i] += G.data[i] * Y.data[i] * (T(1) - Y.data[i]);
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::rmsnorm(Var x, Var gain, T eps) {
    const auto &X = val(x);
    const auto &Gn = val(gain);
    if (Gn.rows != 1 || Gn.cols != X.cols) {
        throw std::invalid_argument(shapes("rmsnorm", X, Gn));
    }
    Tensor<T> out(X.rows, X.cols);
    std::vector<T> inv(X.rows);
    for (size_t r = 0; r < X.rows; r++) {
        const T *xr = X.row(r);
        T ss = 0;
        for (size_t c = 0; c < X.cols; c++) {
            ss += xr[c] * xr[c];
        }
        T ir = T(1) / std::sqrt(ss / T(X.cols) + eps);
        inv[r] = ir;
        T *o = out.row(r);
        for (size_t c = 0; c < X.cols; c++) {
            o[c] = xr[c] * ir * Gn.data[c];
        }
    }
    Var v = push(std::move(out), needs(x) || needs(gain));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, x, gain, v, inv = std::move(inv)] {
            const auto &G = nodes_[v.id].grad;
            const auto &X = val(x);
            const auto &Gn = val(gain);
            const size_t m = X.cols;
            for (size_t r = 0; r < X.rows; r++) {
                const T *xr = X.row(r);
                const T *gr = G.row(r);
                const T ir = inv[r];
                if (needs(x)) {
                    T dot = 0;
                    for (size_t c = 0; c < m; c++) {
                        dot += gr[c] * Gn.data[c] * xr[c];
                    }
                    T k = dot * ir * ir * ir / T(m);
                    T *gx = g(x).row(r);
                    for (size_t c = 0; c < m; c++) {
                        gx[c] += gr[c] * Gn.data[c] * ir - xr[c] * k;
                    }
                }
                if (needs(gain)) {
                    auto &gg = g(gain);
                    for (size_t c = 0; c < m; c++) {
                        gg.data[c] += gr[c] * xr[c] * ir;
                    }
                }
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::concat_cols(Var a, Var b) {
    const auto &A = val(a);
    const auto &B = val(b);
    if (A.rows != B.rows) {
        throw std::invalid_argument(shapes("concat_cols", A, B));
    }
    Tensor<T> out(A.rows, A.cols + B.cols);
    for (size_t r = 0; r < A.rows; r++) {
        std::copy(A.row(r), A.row(r) + A.cols, out.row(r));
        std::copy(B.row(r), B.row(r) + B.cols, out.row(r) + A.cols);
    }
    Var v = push(std::move(out), needs(a) || needs(b));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, b, v] {
            const auto &G = nodes_[v.id].grad;
            const size_t ca = val(a).cols, cb = val(b).cols;
            for (size_t r = 0; r < G.rows; r++) {
                const T *gi = G.row(r);
                if (needs(a)) {
                    T *ga = g(a).row(r);
                    for (size_t c = 0; c < ca; c++) {
                        ga[c] += gi[c];
                    }
                }
                if (needs(b)) {
                    T *gb = g(b).row(r);
                    for (size_t c = 0; c < cb; c++) {
                        gb[c] += gi[ca + c];
                    }
                }
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::slice_cols(Var a, size_t begin, size_t count) {
    const auto &A = val(a);
    if (begin + count > A.cols) {
        throw std::invalid_argument("slice_cols: columns [" + std::to_string(begin) + ", " +
                                    std::to_string(begin + count) + ") out of range for " + A.shape_str());
    }
    Tensor<T> out(A.rows, count);
    for (size_t r = 0; r < A.rows; r++) {
        std::copy(A.row(r) + begin, A.row(r) + begin + count, out.row(r));
    }
    Var v = push(std::move(out), needs(a));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, v, begin, count] {
            const auto &G = nodes_[v.id].grad;
            auto &ga = g(a);
            for (size_t r = 0; r < G.rows; r++) {
                for (size_t c = 0; c < count; c++) {
                    ga.row(r)[begin + c] += G.row(r)[c];
                }
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::concat_rows(const std::vector<Var> &parts) {
    if (parts.empty()) {
        throw std::invalid_argument("concat_rows: no inputs");
    }
    size_t cols = val(parts[0]).cols, rows = 0;
    bool ng = false;
    for (Var p : parts) {
        const auto &P = val(p);
        if (P.cols != cols) {
            throw std::invalid_argument(shapes("concat_rows", val(parts[0]), P));
        }
        rows += P.rows;
        ng |= needs(p);
    }
    Tensor<T> out(rows, cols);
    size_t at = 0;
    for (Var p : parts) {
        const auto &P = val(p);
        std::copy(P.data.begin(), P.data.end(), out.data.begin() + at);
        at += P.size();
    }
    Var v = push(std::move(out), ng);
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, parts, v] {
            const auto &G = nodes_[v.id].grad;
            size_t at = 0;
            for (Var p : parts) {
                size_t n = val(p).size();
                if (needs(p)) {
                    auto &gp = g(p);
                    for (size_t i = 0; i < n; i++) {
                        gp.data[i] += G.data[at + i];
                    }
                }
                at += n;
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::slice_rows(Var a, size_t begin, size_t count) {
    const auto &A = val(a);
    if (begin + count > A.rows) {
        throw std::invalid_argument("slice_rows: rows [" + std::to_string(begin) + ", " +
                                    std::to_string(begin + count) + ") out of range for " + A.shape_str());
    }
    Tensor<T> out(count, A.cols);
    std::copy(A.row(begin), A.row(begin) + count * A.cols, out.data.begin());
    Var v = push(std::move(out), needs(a));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, v, begin] {
            const auto &G = nodes_[v.id].grad;
            T *ga = g(a).row(begin);
            for (size_t i = 0; i < G.size(); i++) {
                ga[i] += G.data[i];
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::mean_blocks(Var a, size_t block) {
    const auto &A = val(a);
    if (block == 0 || A.rows % block != 0) {
        throw std::invalid_argument("mean_blocks: " + A.shape_str() + " rows not divisible by " + std::to_string(block));
    }
    Tensor<T> out(A.rows / block, A.cols);
    const T inv = T(1) / T(block);
    for (size_t b = 0; b < out.rows; b++) {
        T *o = out.row(b);
        for (size_t r = 0; r < block; r++) {
            const T *ar = A.row(b * block + r);
            for (size_t c = 0; c < A.cols; c++) {
                o[c] += ar[c];
            }
        }
        for (size_t c = 0; c < A.cols; c++) {
            o[c] *= inv;
        }
    }
    Var v = push(std::move(out), needs(a));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, v, block, inv] {
            const auto &G = nodes_[v.id].grad;
            auto &ga = g(a);
            for (size_t r = 0; r < ga.rows; r++) {
                const T *gi = G.row(r / block);
                T *gr = ga.row(r);
                for (size_t c = 0; c < ga.cols; c++) {
                    gr[c] += gi[c] * inv;
                }
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::repeat_rows(Var a, size_t times) {
    const auto &A = val(a);
    Tensor<T> out(A.rows * times, A.cols);
    for (size_t r = 0; r < out.rows; r++) {
        std::copy(A.row(r / times), A.row(r / times) + A.cols, out.row(r));
    }
    Var v = push(std::move(out), needs(a));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, v, times] {
            const auto &G = nodes_[v.id].grad;
            auto &ga = g(a);
            for (size_t r = 0; r < G.rows; r++) {
                T *gr = ga.row(r / times);
                const T *gi = G.row(r);
                for (size_t c = 0; c < G.cols; c++) {
                    gr[c] += gi[c];
                }
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::attention(Var q, Var k, Var v_in, size_t groups, size_t heads, const RopeTable<T> *rope_q,
                        const RopeTable<T> *rope_k) {
    const auto &Q = val(q);
    const auto &K = val(k);
    const auto &V = val(v_in);
    if (Q.cols != K.cols || K.cols != V.cols || K.rows != V.rows || groups == 0 || Q.rows % groups != 0 ||
        K.rows % groups != 0 || heads == 0 || Q.cols % heads != 0) {
        throw std::invalid_argument("attention: incompatible shapes q" + Q.shape_str() + " k" + K.shape_str() + " v" +
                                    V.shape_str());
    }
    const size_t sq = Q.rows / groups, sk = K.rows / groups, dh = Q.cols / heads, width = Q.cols;
    if ((rope_q && rope_q->tokens != sq) || (rope_k && rope_k->tokens != sk)) {
        throw std::invalid_argument("attention: rotary table length does not match the sequence");
    }
    if (record_) {
        // The backward pass outlives the caller's tables.
        if (rope_q) {
            rope_q = &ropes_.emplace_back(*rope_q);
        }
        if (rope_k) {
            rope_k = &ropes_.emplace_back(*rope_k);
        }
    }
    Tensor<T> qr = Q, kr = K;
    for (size_t r = 0; r < qr.rows && rope_q; r++) {
        rotate(qr.row(r), *rope_q, r % sq, heads, dh, false);
    }
    for (size_t r = 0; r < kr.rows && rope_k; r++) {
        rotate(kr.row(r), *rope_k, r % sk, heads, dh, false);
    }
    const T inv_sqrt = T(1) / std::sqrt(T(dh));
    std::vector<T> probs(groups * heads * sq * sk);
    Tensor<T> out(Q.rows, width);
    std::vector<T> s(sk);
    for (size_t gi = 0; gi < groups; gi++) {
        for (size_t h = 0; h < heads; h++) {
            for (size_t i = 0; i < sq; i++) {
                const T *qi = qr.row(gi * sq + i) + h * dh;
                T mx = -std::numeric_limits<T>::infinity();
                for (size_t j = 0; j < sk; j++) {
                    const T *kj = kr.row(gi * sk + j) + h * dh;
                    T dot = 0;
                    for (size_t d = 0; d < dh; d++) {
                        dot += qi[d] * kj[d];
                    }
                    s[j] = dot * inv_sqrt;
                    mx = std::max(mx, s[j]);
                }
                T z = 0;
                for (size_t j = 0; j < sk; j++) {
                    s[j] = std::exp(s[j] - mx);
                    z += s[j];
                }
                T *p = probs.data() + ((gi * heads + h) * sq + i) * sk;
                T *o = out.row(gi * sq + i) + h * dh;
                for (size_t j = 0; j < sk; j++) {
                    p[j] = s[j] / z;
                    const T *vj = V.row(gi * sk + j) + h * dh;
                    for (size_t d = 0; d < dh; d++) {
                        o[d] += p[j] * vj[d];
                    }
                }
            }
        }
    }
    Var v = push(std::move(out), needs(q) || needs(k) || needs(v_in));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, q, k, v_in, v, groups, heads, sq, sk, dh, width, inv_sqrt, rope_q, rope_k,
                             qr = std::move(qr), kr = std::move(kr), probs = std::move(probs)] {
            const auto &G = nodes_[v.id].grad;
            const auto &V = val(v_in);
            Tensor<T> dq(qr.rows, width), dk(kr.rows, width);
            std::vector<T> dp(sk);
            for (size_t gi = 0; gi < groups; gi++) {
                for (size_t h = 0; h < heads; h++) {
                    for (size_t i = 0; i < sq; i++) {
                        const T *p = probs.data() + ((gi * heads + h) * sq + i) * sk;
                        const T *go = G.row(gi * sq + i) + h * dh;
                        T acc = 0;
                        for (size_t j = 0; j < sk; j++) {
                            const T *vj = V.row(gi * sk + j) + h * dh;
                            T d = 0;
                            for (size_t c = 0; c < dh; c++) {
                                d += go[c] * vj[c];
                            }
                            dp[j] = d;
                            acc += p[j] * d;
                            if (needs(v_in)) {
                                T *gv = g(v_in).row(gi * sk + j) + h * dh;
                                for (size_t c = 0; c < dh; c++) {
                                    gv[c] += p[j] * go[c];
                                }
                            }
                        }
                        const T *qi = qr.row(gi * sq + i) + h * dh;
                        T *dqi = dq.row(gi * sq + i) + h * dh;
                        for (size_t j = 0; j < sk; j++) {
                            T ds = p[j] * (dp[j] - acc) * inv_sqrt;
                            const T *kj = kr.row(gi * sk + j) + h * dh;
                            T *dkj = dk.row(gi * sk + j) + h * dh;
                            for (size_t c = 0; c < dh; c++) {
                                dqi[c] += ds * kj[c];
                                dkj[c] += ds * qi[c];
                            }
                        }
                    }
                }
            }
            if (needs(q)) {
                auto &gq = g(q);
                for (size_t r = 0; r < dq.rows; r++) {
                    if (rope_q) {
                        rotate(dq.row(r), *rope_q, r % sq, heads, dh, true);
                    }
                    for (size_t c = 0; c < width; c++) {
                        gq.row(r)[c] += dq.row(r)[c];
                    }
                }
            }
            if (needs(k)) {
                auto &gk = g(k);
                for (size_t r = 0; r < dk.rows; r++) {
                    if (rope_k) {
                        rotate(dk.row(r), *rope_k, r % sk, heads, dh, true);
                    }
                    for (size_t c = 0; c < width; c++) {
                        gk.row(r)[c] += dk.row(r)[c];
                    }
                }
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::mul_row(Var a, Var row) {
    const auto &A = val(a);
    const auto &R = val(row);
    if (R.rows != 1 || R.cols != A.cols) {
        throw std::invalid_argument(shapes("mul_row", A, R));
    }
    Tensor<T> out = A;
    for (size_t r = 0; r < out.rows; r++) {
        T *o = out.row(r);
        for (size_t c = 0; c < out.cols; c++) {
            o[c] *= R.data[c];
        }
    }
    Var v = push(std::move(out), needs(a) || needs(row));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, a, row, v] {
            const auto &G = nodes_[v.id].grad;
            const auto &A = val(a);
            const auto &R = val(row);
            for (size_t r = 0; r < G.rows; r++) {
                const T *gi = G.row(r);
                const T *ai = A.row(r);
                if (needs(a)) {
                    T *ga = g(a).row(r);
                    for (size_t c = 0; c < G.cols; c++) {
                        ga[c] += gi[c] * R.data[c];
                    }
                }
                if (needs(row)) {
                    T *gr = g(row).data.data();
                    for (size_t c = 0; c < G.cols; c++) {
                        gr[c] += gi[c] * ai[c];
                    }
                }
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::bce_logits(Var logits, const std::vector<T> &labels, const std::vector<T> &weights) {
    const auto &Z = val(logits);
    if (Z.size() != labels.size() || Z.size() != weights.size()) {
        throw std::invalid_argument("bce_logits: " + std::to_string(Z.size()) + " logits but " +
                                    std::to_string(labels.size()) + " labels and " + std::to_string(weights.size()) +
                                    " weights");
    }
    T total = 0;
    for (size_t i = 0; i < Z.size(); i++) {
        T z = Z.data[i];
        T softplus = std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)));
        total += weights[i] * (softplus - labels[i] * z);
    }
    Var v = push(Tensor<T>(1, 1, total), needs(logits));
    if (nodes_[v.id].needs_grad) {
        nodes_[v.id].back = [this, logits, v, labels, weights] {
            const T gv = nodes_[v.id].grad.data[0];
            const auto &Z = val(logits);
            auto &gz = g(logits);
            for (size_t i = 0; i < Z.size(); i++) {
                T sig = T(1) / (T(1) + std::exp(-Z.data[i]));
                gz.data[i] += gv * weights[i] * (sig - labels[i]);
            }
        };
    }
    return v;
}

template <typename T>
Var Graph<T>::sum(const std::vector<Var> &scalars) {
    if (scalars.empty()) {
        return input(Tensor<T>(1, 1));
    }
    Var acc = scalars[0];
    for (size_t i = 1; i < scalars.size(); i++) {
        acc = add(acc, scalars[i]);
    }
    return acc;
}

template <typename T>
void Graph<T>::backward(Var loss) {
    if (!record_) {
        throw std::logic_error("backward() on a graph built without recording");
    }
    const auto &L = val(loss);
    if (L.size() != 1) {
        throw std::invalid_argument("backward() needs a scalar, got " + L.shape_str());
    }
    g(loss).data[0] += T(1);
    for (int i = loss.id; i >= 0; i--) {
        Node &n = nodes_[i];
        if (!n.needs_grad || n.grad.size() == 0) {
            continue;
        }
        if (n.back) {
            n.back();
        }
        if (n.param) {
            auto &pg = n.param->grad;
            if (pg.size() != n.grad.size()) {
                pg = Tensor<T>(n.grad.rows, n.grad.cols);
            }
            for (size_t k = 0; k < pg.size(); k++) {
                pg.data[k] += n.grad.data[k];
            }
        }
    }
}

template struct RopeTable<float>;
template struct RopeTable<double>;
template RopeTable<float> make_rope<float>(const std::vector<std::pair<double, double>> &, size_t, double, double);
template RopeTable<double> make_rope<double>(const std::vector<std::pair<double, double>> &, size_t, double, double);
template class Graph<float>;
template class Graph<double>;

}  // namespace aqlab
