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

#include "emgseq/common.hpp"
#include "emgseq/mat.hpp"

// Layer primitives with hand-derived backward passes. Forward functions are
// pure; backward functions accumulate into the provided gradient tensors.
// Every activation a backward pass needs is passed back in explicitly, which
// keeps forward passes const and safe to run concurrently over shared weights.
namespace emgseq::nn {

// y = x * W^T + b.  x: [F x in], W: [out x in], b: [1 x out].
MatF linear_fwd(const MatF& x, const MatF& w, const MatF& b);
// dx (optional, may be null), dw += dy^T x, db += colsum(dy).
void linear_bwd(const MatF& x, const MatF& w, const MatF& dy, MatF* dx, MatF& dw, MatF& db);

// Causal strided 1-D convolution over the time axis with groups. Left pad of
// (kernel - stride) zeros so output frame t consumes inputs up through sample
// (t+1)*stride - 1 and the output has floor(T / stride) frames.
// W: [out_ch x (kernel * in_per_group)], row-major (tap, channel).
MatF conv1d_causal_fwd(const MatF& x, const MatF& w, const MatF& b, int kernel, int stride,
                       int groups);
void conv1d_causal_bwd(const MatF& x, const MatF& w, const MatF& dy, int kernel, int stride,
                       int groups, MatF* dx, MatF& dw, MatF& db);

// Causal instance norm: each channel is normalized at time t by the mean and
// (population) variance of that channel over samples 0..t, then scaled by a
// learned per-channel affine. Cumulative statistics keep the op streamable.
struct CinCache {
    MatF x;     // input
    MatF z;     // normalized, pre-affine
    MatF r;     // 1 / sqrt(var_t + eps)
    MatF mu;    // running mean at t
};
MatF cin_fwd(const MatF& x, const MatF& gamma, const MatF& beta, float eps, CinCache* cache);
void cin_bwd(const CinCache& cache, const MatF& gamma, const MatF& dy, MatF& dx, MatF& dgamma,
             MatF& dbeta);

// Exact GELU (erf form).
MatF gelu_fwd(const MatF& x);
MatF gelu_bwd(const MatF& x_pre, const MatF& dy);

struct LnCache {
    std::vector<float> mean;
    std::vector<float> rstd;
};
MatF ln_fwd(const MatF& x, const MatF& gamma, const MatF& beta, float eps, LnCache* cache);
void ln_bwd(const MatF& x, const LnCache& cache, const MatF& gamma, const MatF& dy, MatF& dx,
            MatF& dgamma, MatF& dbeta);

// Inverted dropout; mask holds the kept/dropped pattern for backward.
MatF dropout_fwd(const MatF& x, float p, Rng& rng, std::vector<std::uint8_t>& mask);
MatF dropout_bwd(const MatF& dy, const std::vector<std::uint8_t>& mask, float p);

// Multi-head self-attention over u: [F x d]. Causal masking restricts frame i
// to keys j <= i. Attention dropout (p > 0 with rng) is applied to the
// probabilities.
struct AttnCache {
    MatF u;                         // input (needed for projection grads)
    MatF q, k, v;                   // projected, [F x d]
    std::vector<MatF> probs;        // per head, [F x F], pre-dropout
    std::vector<std::vector<std::uint8_t>> drop_masks;  // per head, empty if no dropout
    float drop_p = 0.0f;
    bool causal = true;
};
MatF attention_fwd(const MatF& u, const MatF& wq, const MatF& bq, const MatF& wk, const MatF& bk,
                   const MatF& wv, const MatF& bv, const MatF& wo, const MatF& bo, int num_heads,
                   bool causal, float drop_p, Rng* rng, AttnCache* cache);
void attention_bwd(const AttnCache& cache, const MatF& wq, const MatF& wk, const MatF& wv,
                   const MatF& wo, int num_heads, const MatF& dy, MatF& du, MatF& dwq, MatF& dbq,
                   MatF& dwk, MatF& dbk, MatF& dwv, MatF& dbv, MatF& dwo, MatF& dbo);

// Per-channel log-power spectrogram at the featurizer frame rate. Frame f is
// computed from the fft_size samples ending at (f+1)*hop - 1 (zero-padded on
// the left), Hann-windowed. Output: [floor(T/hop) x channels*(fft_size/2+1)].
MatF log_spectrogram(const MatF& x, int fft_size, int hop);

}  // namespace emgseq::nn
