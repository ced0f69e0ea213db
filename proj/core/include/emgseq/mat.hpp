// Copyright 2026 The emgseq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <vector>

namespace emgseq {

/// Dense row-major matrix. Time-major throughout the library: rows are time
/// steps / frames, columns are channels / feature dims.
template <typename T>
struct Mat {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<T> v;

    Mat() = default;
    Mat(std::int64_t r, std::int64_t c) : rows(r), cols(c), v(static_cast<std::size_t>(r * c)) {}

    T* row(std::int64_t i) { return v.data() + i * cols; }
    const T* row(std::int64_t i) const { return v.data() + i * cols; }

    T& at(std::int64_t i, std::int64_t j) { return v[static_cast<std::size_t>(i * cols + j)]; }
    T at(std::int64_t i, std::int64_t j) const { return v[static_cast<std::size_t>(i * cols + j)]; }

    std::int64_t size() const { return rows * cols; }

    void fill(T value) { std::fill(v.begin(), v.end(), value); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

namespace linalg {

/// C = A * B^T.  A is [m x k], B is [n x k], C is [m x n].
/// Row-dot-row form; the workhorse for linear layers and attention scores.
void matmul_nt(const MatF& a, const MatF& b, MatF& c);

/// C = A * B.  A is [m x k], B is [k x n], C is [m x n].
void matmul_nn(const MatF& a, const MatF& b, MatF& c);

/// C += A^T * B.  A is [k x m], B is [k x n], C is [m x n].
/// Accumulating form used for weight gradients.
void matmul_tn_acc(const MatF& a, const MatF& b, MatF& c);

void add_inplace(MatF& a, const MatF& b);

}  // namespace linalg

}  // namespace emgseq
