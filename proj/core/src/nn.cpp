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

#include "emgseq/nn.hpp"

#include <algorithm>
#include <cmath>

namespace emgseq::nn {

using threading::parallel_for;

namespace {
// Work-based dispatch threshold, matching the matmul kernels.
constexpr std::int64_t kMinParallelWork = 1 << 21;
inline std::int64_t min_items_for(std::int64_t work_per_item, std::int64_t floor_items) {
    return std::max<std::int64_t>(floor_items,
                                  kMinParallelWork / std::max<std::int64_t>(1, work_per_item));
}
}  // namespace

MatF linear_fwd(const MatF& x, const MatF& w, const MatF& b) {
    MatF y;
    linalg::matmul_nt(x, w, y);
    for (std::int64_t i = 0; i < y.rows; ++i) {
        float* yi = y.row(i);
        const float* bv = b.row(0);
        for (std::int64_t j = 0; j < y.cols; ++j) yi[j] += bv[j];
    }
    return y;
}

void linear_bwd(const MatF& x, const MatF& w, const MatF& dy, MatF* dx, MatF& dw, MatF& db) {
    if (dx != nullptr) linalg::matmul_nn(dy, w, *dx);
    linalg::matmul_tn_acc(dy, x, dw);
    for (std::int64_t i = 0; i < dy.rows; ++i) {
        const float* di = dy.row(i);
        float* dbv = db.row(0);
        for (std::int64_t j = 0; j < dy.cols; ++j) dbv[j] += di[j];
    }
}

MatF conv1d_causal_fwd(const MatF& x, const MatF& w, const MatF& b, int kernel, int stride,
                       int groups) {
    require(kernel >= stride && stride > 0, "bad_conv", "kernel must be >= stride > 0");
    const std::int64_t in_ch = x.cols;
    const std::int64_t out_ch = w.rows;
    require(in_ch % groups == 0 && out_ch % groups == 0, "bad_conv",
            "channels must divide evenly into groups");
    const std::int64_t in_pg = in_ch / groups;
    const std::int64_t out_pg = out_ch / groups;
    require(w.cols == in_pg * kernel, "bad_conv", "weight shape mismatch");

    const std::int64_t frames = x.rows / stride;
    MatF y(frames, out_ch);
    parallel_for(frames, min_items_for(out_ch * in_pg * kernel, 16),
                 [&](std::int64_t t0, std::int64_t t1) {
        for (std::int64_t t = t0; t < t1; ++t) {
            const std::int64_t in_start = (t + 1) * stride - kernel;
            const std::int64_t j0 = in_start < 0 ? -in_start : 0;
            float* yt = y.row(t);
            for (std::int64_t o = 0; o < out_ch; ++o) {
                const std::int64_t g = o / out_pg;
                const float* wrow = w.row(o);
                float acc = b.row(0)[o];
                // tap-major weights: the inner channel loop runs contiguously
                for (std::int64_t j = j0; j < kernel; ++j) {
                    const float* xrow = x.row(in_start + j) + g * in_pg;
                    const float* wtap = wrow + j * in_pg;
                    for (std::int64_t ci = 0; ci < in_pg; ++ci) acc += wtap[ci] * xrow[ci];
                }
                yt[o] = acc;
            }
        }
    });
    return y;
}

void conv1d_causal_bwd(const MatF& x, const MatF& w, const MatF& dy, int kernel, int stride,
                       int groups, MatF* dx, MatF& dw, MatF& db) {
    const std::int64_t in_ch = x.cols;
    const std::int64_t out_ch = w.rows;
    const std::int64_t in_pg = in_ch / groups;
    const std::int64_t out_pg = out_ch / groups;
    const std::int64_t frames = dy.rows;

    // Weight and bias gradients: each output channel owned by one worker.
    parallel_for(out_ch, min_items_for(frames * in_pg * kernel, 8),
                 [&](std::int64_t o0, std::int64_t o1) {
        for (std::int64_t o = o0; o < o1; ++o) {
            const std::int64_t g = o / out_pg;
            float* dwrow = dw.row(o);
            double db_acc = 0.0;
            for (std::int64_t t = 0; t < frames; ++t) {
                const float d = dy.at(t, o);
                db_acc += d;
                if (d == 0.0f) continue;
                const std::int64_t in_start = (t + 1) * stride - kernel;
                const std::int64_t j0 = in_start < 0 ? -in_start : 0;
                for (std::int64_t j = j0; j < kernel; ++j) {
                    const float* xrow = x.row(in_start + j) + g * in_pg;
                    float* dwtap = dwrow + j * in_pg;
                    for (std::int64_t ci = 0; ci < in_pg; ++ci) dwtap[ci] += d * xrow[ci];
                }
            }
            db.row(0)[o] += static_cast<float>(db_acc);
        }
    });

    if (dx == nullptr) return;
    dx->rows = x.rows;
    dx->cols = x.cols;
    dx->v.assign(x.v.size(), 0.0f);
    // Input gradient: workers own disjoint channel groups.
    parallel_for(groups, min_items_for(frames * out_pg * in_pg * kernel, 2),
                 [&](std::int64_t g0, std::int64_t g1) {
        for (std::int64_t g = g0; g < g1; ++g) {
            for (std::int64_t t = 0; t < frames; ++t) {
                const std::int64_t in_start = (t + 1) * stride - kernel;
                const std::int64_t j0 = in_start < 0 ? -in_start : 0;
                const float* dyt = dy.row(t);
                for (std::int64_t oo = 0; oo < out_pg; ++oo) {
                    const std::int64_t o = g * out_pg + oo;
                    const float d = dyt[o];
                    if (d == 0.0f) continue;
                    const float* wrow = w.row(o);
                    for (std::int64_t j = j0; j < kernel; ++j) {
                        float* dxrow = dx->row(in_start + j) + g * in_pg;
                        const float* wtap = wrow + j * in_pg;
                        for (std::int64_t ci = 0; ci < in_pg; ++ci) dxrow[ci] += d * wtap[ci];
                    }
                }
            }
        }
    });
}

MatF cin_fwd(const MatF& x, const MatF& gamma, const MatF& beta, float eps, CinCache* cache) {
    const std::int64_t frames = x.rows, channels = x.cols;
    MatF y(frames, channels);
    MatF z(frames, channels), r(frames, channels), mu(frames, channels);
    parallel_for(channels, min_items_for(frames * 8, 4), [&](std::int64_t c0, std::int64_t c1) {
        for (std::int64_t c = c0; c < c1; ++c) {
            const float g = gamma.row(0)[c];
            const float bb = beta.row(0)[c];
            double s1 = 0.0, s2 = 0.0;
            for (std::int64_t t = 0; t < frames; ++t) {
                const double xv = x.at(t, c);
                s1 += xv;
                s2 += xv * xv;
                const double n = static_cast<double>(t + 1);
                const double mean = s1 / n;
                const double var = std::max(0.0, s2 / n - mean * mean);
                const double rinv = 1.0 / std::sqrt(var + eps);
                const float zv = static_cast<float>((xv - mean) * rinv);
                z.at(t, c) = zv;
                r.at(t, c) = static_cast<float>(rinv);
                mu.at(t, c) = static_cast<float>(mean);
                y.at(t, c) = g * zv + bb;
            }
        }
    });
    if (cache != nullptr) {
        cache->x = x;
        cache->z = std::move(z);
        cache->r = std::move(r);
        cache->mu = std::move(mu);
    }
    return y;
}

void cin_bwd(const CinCache& cache, const MatF& gamma, const MatF& dy, MatF& dx, MatF& dgamma,
             MatF& dbeta) {
    const std::int64_t frames = cache.x.rows, channels = cache.x.cols;
    dx.rows = frames;
    dx.cols = channels;
    dx.v.assign(cache.x.v.size(), 0.0f);
    parallel_for(channels, min_items_for(frames * 8, 4), [&](std::int64_t c0, std::int64_t c1) {
        for (std::int64_t c = c0; c < c1; ++c) {
            const float g = gamma.row(0)[c];
            double dg = 0.0, db = 0.0;
            // Suffix accumulators for the cumulative-statistics chain rule:
            //   dx_i = g_i r_i - sum_{t>=i} g_t r_t / n_t
            //        - x_i sum_{t>=i} g_t z_t r_t^2 / n_t
            //        + sum_{t>=i} g_t z_t r_t^2 mu_t / n_t
            // with g_t the gradient w.r.t. the normalized value.
            double suffix_a = 0.0, suffix_b = 0.0, suffix_c = 0.0;
            for (std::int64_t t = frames - 1; t >= 0; --t) {
                const double dyv = dy.at(t, c);
                const double zv = cache.z.at(t, c);
                dg += dyv * zv;
                db += dyv;
                const double gz = dyv * g;  // gradient at normalized value
                const double rv = cache.r.at(t, c);
                const double n = static_cast<double>(t + 1);
                suffix_a += gz * rv / n;
                const double core = gz * zv * rv * rv / n;
                suffix_b += core;
                suffix_c += core * cache.mu.at(t, c);
                const double xv = cache.x.at(t, c);
                dx.at(t, c) =
                    static_cast<float>(gz * rv - suffix_a - xv * suffix_b + suffix_c);
            }
            dgamma.row(0)[c] += static_cast<float>(dg);
            dbeta.row(0)[c] += static_cast<float>(db);
        }
    });
}

namespace {
inline float gelu_scalar(float x) {
    return 0.5f * x * (1.0f + std::erf(x * 0.70710678118654752440f));
}
inline float gelu_grad_scalar(float x) {
    const float phi = 0.5f * (1.0f + std::erf(x * 0.70710678118654752440f));
    const float pdf = 0.39894228040143267794f * std::exp(-0.5f * x * x);
    return phi + x * pdf;
}
}  // namespace

MatF gelu_fwd(const MatF& x) {
    MatF y(x.rows, x.cols);
    const std::int64_t n = x.size();
    parallel_for(n, 1 << 17, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) y.v[i] = gelu_scalar(x.v[i]);
    });
    return y;
}

MatF gelu_bwd(const MatF& x_pre, const MatF& dy) {
    MatF dx(x_pre.rows, x_pre.cols);
    const std::int64_t n = x_pre.size();
    parallel_for(n, 1 << 17, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) dx.v[i] = dy.v[i] * gelu_grad_scalar(x_pre.v[i]);
    });
    return dx;
}

MatF ln_fwd(const MatF& x, const MatF& gamma, const MatF& beta, float eps, LnCache* cache) {
    const std::int64_t rows = x.rows, d = x.cols;
    MatF y(rows, d);
    if (cache != nullptr) {
        cache->mean.resize(static_cast<std::size_t>(rows));
        cache->rstd.resize(static_cast<std::size_t>(rows));
    }
    parallel_for(rows, min_items_for(d * 4, 16), [&](std::int64_t r0, std::int64_t r1) {
        for (std::int64_t i = r0; i < r1; ++i) {
            const float* xi = x.row(i);
            double s1 = 0.0, s2 = 0.0;
            for (std::int64_t j = 0; j < d; ++j) {
                s1 += xi[j];
                s2 += static_cast<double>(xi[j]) * xi[j];
            }
            const double mean = s1 / static_cast<double>(d);
            const double var = std::max(0.0, s2 / static_cast<double>(d) - mean * mean);
            const float rstd = static_cast<float>(1.0 / std::sqrt(var + eps));
            const float m = static_cast<float>(mean);
            if (cache != nullptr) {
                cache->mean[static_cast<std::size_t>(i)] = m;
                cache->rstd[static_cast<std::size_t>(i)] = rstd;
            }
            float* yi = y.row(i);
            const float* gv = gamma.row(0);
            const float* bv = beta.row(0);
            for (std::int64_t j = 0; j < d; ++j) {
                yi[j] = (xi[j] - m) * rstd * gv[j] + bv[j];
            }
        }
    });
    return y;
}

void ln_bwd(const MatF& x, const LnCache& cache, const MatF& gamma, const MatF& dy, MatF& dx,
            MatF& dgamma, MatF& dbeta) {
    const std::int64_t rows = x.rows, d = x.cols;
    dx.rows = rows;
    dx.cols = d;
    dx.v.assign(x.v.size(), 0.0f);
    std::vector<double> dg(static_cast<std::size_t>(d), 0.0), db(static_cast<std::size_t>(d), 0.0);
    for (std::int64_t i = 0; i < rows; ++i) {
        const float* xi = x.row(i);
        const float* dyi = dy.row(i);
        const float m = cache.mean[static_cast<std::size_t>(i)];
        const float rstd = cache.rstd[static_cast<std::size_t>(i)];
        const float* gv = gamma.row(0);
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const float xhat = (xi[j] - m) * rstd;
            const float dxhat = dyi[j] * gv[j];
            dg[static_cast<std::size_t>(j)] += static_cast<double>(dyi[j]) * xhat;
            db[static_cast<std::size_t>(j)] += dyi[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += static_cast<double>(dxhat) * xhat;
        }
        const float mean_dxhat = static_cast<float>(sum_dxhat / static_cast<double>(d));
        const float mean_dxhat_xhat = static_cast<float>(sum_dxhat_xhat / static_cast<double>(d));
        float* dxi = dx.row(i);
        for (std::int64_t j = 0; j < d; ++j) {
            const float xhat = (xi[j] - m) * rstd;
            const float dxhat = dyi[j] * gv[j];
            dxi[j] = rstd * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
        }
    }
    for (std::int64_t j = 0; j < d; ++j) {
        dgamma.row(0)[j] += static_cast<float>(dg[static_cast<std::size_t>(j)]);
        dbeta.row(0)[j] += static_cast<float>(db[static_cast<std::size_t>(j)]);
    }
}

MatF dropout_fwd(const MatF& x, float p, Rng& rng, std::vector<std::uint8_t>& mask) {
    const std::int64_t n = x.size();
    mask.resize(static_cast<std::size_t>(n));
    MatF y(x.rows, x.cols);
    const float scale = 1.0f / (1.0f - p);
    for (std::int64_t i = 0; i < n; ++i) {
        const bool keep = rng.next_double() >= p;
        mask[static_cast<std::size_t>(i)] = keep ? 1 : 0;
        y.v[i] = keep ? x.v[i] * scale : 0.0f;
    }
    return y;
}

MatF dropout_bwd(const MatF& dy, const std::vector<std::uint8_t>& mask, float p) {
    MatF dx(dy.rows, dy.cols);
    const float scale = 1.0f / (1.0f - p);
    for (std::int64_t i = 0; i < dy.size(); ++i) {
        dx.v[i] = mask[static_cast<std::size_t>(i)] ? dy.v[i] * scale : 0.0f;
    }
    return dx;
}

namespace {

// Softmax over the first `valid` entries of a row; the rest are zeroed.
inline void softmax_prefix(float* row, std::int64_t valid, std::int64_t total) {
    float mx = row[0];
    for (std::int64_t j = 1; j < valid; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::int64_t j = 0; j < valid; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (std::int64_t j = 0; j < valid; ++j) row[j] *= inv;
    for (std::int64_t j = valid; j < total; ++j) row[j] = 0.0f;
}

}  // namespace

MatF attention_fwd(const MatF& u, const MatF& wq, const MatF& bq, const MatF& wk, const MatF& bk,
                   const MatF& wv, const MatF& bv, const MatF& wo, const MatF& bo, int num_heads,
                   bool causal, float drop_p, Rng* rng, AttnCache* cache) {
    const std::int64_t frames = u.rows;
    const std::int64_t d = u.cols;
    const std::int64_t dh = d / num_heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    MatF q = linear_fwd(u, wq, bq);
    MatF k = linear_fwd(u, wk, bk);
    MatF v = linear_fwd(u, wv, bv);

    MatF concat(frames, d);
    std::vector<MatF> probs(static_cast<std::size_t>(num_heads));
    std::vector<std::vector<std::uint8_t>> drop_masks(static_cast<std::size_t>(num_heads));

    for (int h = 0; h < num_heads; ++h) {
        const std::int64_t off = h * dh;
        MatF p(frames, frames);
        parallel_for(frames, min_items_for(frames * dh, 16), [&](std::int64_t r0, std::int64_t r1) {
            for (std::int64_t i = r0; i < r1; ++i) {
                const std::int64_t valid = causal ? i + 1 : frames;
                const float* qi = q.row(i) + off;
                float* pi = p.row(i);
                for (std::int64_t j = 0; j < valid; ++j) {
                    const float* kj = k.row(j) + off;
                    float acc = 0.0f;
                    for (std::int64_t c = 0; c < dh; ++c) acc += qi[c] * kj[c];
                    pi[j] = acc * scale;
                }
                softmax_prefix(pi, valid, frames);
            }
        });

        const MatF* p_used = &p;
        MatF p_dropped;
        if (drop_p > 0.0f && rng != nullptr) {
            p_dropped = dropout_fwd(p, drop_p, *rng, drop_masks[static_cast<std::size_t>(h)]);
            p_used = &p_dropped;
        }

        parallel_for(frames, min_items_for(frames * dh, 16), [&](std::int64_t r0, std::int64_t r1) {
            for (std::int64_t i = r0; i < r1; ++i) {
                const std::int64_t valid = causal ? i + 1 : frames;
                const float* pi = p_used->row(i);
                float* oi = concat.row(i) + off;
                for (std::int64_t c = 0; c < dh; ++c) oi[c] = 0.0f;
                for (std::int64_t j = 0; j < valid; ++j) {
                    const float pv = pi[j];
                    if (pv == 0.0f) continue;
                    const float* vj = v.row(j) + off;
                    for (std::int64_t c = 0; c < dh; ++c) oi[c] += pv * vj[c];
                }
            }
        });
        probs[static_cast<std::size_t>(h)] = std::move(p);
    }

    MatF out = linear_fwd(concat, wo, bo);
    if (cache != nullptr) {
        cache->u = u;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->probs = std::move(probs);
        cache->drop_masks = std::move(drop_masks);
        cache->drop_p = (rng != nullptr) ? drop_p : 0.0f;
        cache->causal = causal;
    }
    return out;
}

void attention_bwd(const AttnCache& cache, const MatF& wq, const MatF& wk, const MatF& wv,
                   const MatF& wo, int num_heads, const MatF& dy, MatF& du, MatF& dwq, MatF& dbq,
                   MatF& dwk, MatF& dbk, MatF& dwv, MatF& dbv, MatF& dwo, MatF& dbo) {
    const std::int64_t frames = cache.u.rows;
    const std::int64_t d = cache.u.cols;
    const std::int64_t dh = d / num_heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
    const bool causal = cache.causal;
    const bool dropped = cache.drop_p > 0.0f && !cache.drop_masks.empty() &&
                         !cache.drop_masks[0].empty();
    const float drop_scale = dropped ? 1.0f / (1.0f - cache.drop_p) : 1.0f;

    // Reconstruct concat = heads(P_dropped * V) for the output projection grad.
    MatF concat(frames, d);
    for (int h = 0; h < num_heads; ++h) {
        const std::int64_t off = h * dh;
        const MatF& p = cache.probs[static_cast<std::size_t>(h)];
        const auto* mask = dropped ? &cache.drop_masks[static_cast<std::size_t>(h)] : nullptr;
        for (std::int64_t i = 0; i < frames; ++i) {
            const std::int64_t valid = causal ? i + 1 : frames;
            float* oi = concat.row(i) + off;
            for (std::int64_t c = 0; c < dh; ++c) oi[c] = 0.0f;
            const float* pi = p.row(i);
            for (std::int64_t j = 0; j < valid; ++j) {
                float pv = pi[j];
                if (mask != nullptr) pv = (*mask)[static_cast<std::size_t>(i * frames + j)]
                                              ? pv * drop_scale
                                              : 0.0f;
                if (pv == 0.0f) continue;
                const float* vj = cache.v.row(j) + off;
                for (std::int64_t c = 0; c < dh; ++c) oi[c] += pv * vj[c];
            }
        }
    }

    MatF dconcat;
    linear_bwd(concat, wo, dy, &dconcat, dwo, dbo);

    MatF dq(frames, d), dk(frames, d), dv(frames, d);
    for (int h = 0; h < num_heads; ++h) {
        const std::int64_t off = h * dh;
        const MatF& p = cache.probs[static_cast<std::size_t>(h)];
        const auto* mask = dropped ? &cache.drop_masks[static_cast<std::size_t>(h)] : nullptr;

        // dV and dP from O = P_dropped V.
        MatF dp(frames, frames);
        for (std::int64_t i = 0; i < frames; ++i) {
            const std::int64_t valid = causal ? i + 1 : frames;
            const float* doi = dconcat.row(i) + off;
            float* dpi = dp.row(i);
            const float* pi = p.row(i);
            for (std::int64_t j = 0; j < valid; ++j) {
                const float* vj = cache.v.row(j) + off;
                float acc = 0.0f;
                for (std::int64_t c = 0; c < dh; ++c) acc += doi[c] * vj[c];
                float keep = 1.0f;
                if (mask != nullptr) {
                    keep = (*mask)[static_cast<std::size_t>(i * frames + j)] ? drop_scale : 0.0f;
                }
                dpi[j] = acc * keep;  // gradient at pre-dropout probabilities

                float pv = pi[j];
                if (mask != nullptr) pv = (*mask)[static_cast<std::size_t>(i * frames + j)]
                                              ? pv * drop_scale
                                              : 0.0f;
                if (pv != 0.0f) {
                    float* dvj = dv.row(j) + off;
                    for (std::int64_t c = 0; c < dh; ++c) dvj[c] += pv * doi[c];
                }
            }
        }

        // Softmax backward, then scores to q/k.
        for (std::int64_t i = 0; i < frames; ++i) {
            const std::int64_t valid = causal ? i + 1 : frames;
            const float* pi = p.row(i);
            float* dpi = dp.row(i);
            double dot = 0.0;
            for (std::int64_t j = 0; j < valid; ++j) dot += static_cast<double>(dpi[j]) * pi[j];
            const float dotf = static_cast<float>(dot);
            float* dqi = dq.row(i) + off;
            const float* qi = cache.q.row(i) + off;
            for (std::int64_t j = 0; j < valid; ++j) {
                const float ds = pi[j] * (dpi[j] - dotf) * scale;
                if (ds == 0.0f) continue;
                const float* kj = cache.k.row(j) + off;
                float* dkj = dk.row(j) + off;
                for (std::int64_t c = 0; c < dh; ++c) {
                    dqi[c] += ds * kj[c];
                    dkj[c] += ds * qi[c];
                }
            }
        }
    }

    du.rows = frames;
    du.cols = d;
    du.v.assign(static_cast<std::size_t>(frames * d), 0.0f);
    MatF tmp;
    linear_bwd(cache.u, wq, dq, &tmp, dwq, dbq);
    linalg::add_inplace(du, tmp);
    linear_bwd(cache.u, wk, dk, &tmp, dwk, dbk);
    linalg::add_inplace(du, tmp);
    linear_bwd(cache.u, wv, dv, &tmp, dwv, dbv);
    linalg::add_inplace(du, tmp);
}

MatF log_spectrogram(const MatF& x, int fft_size, int hop) {
    require(fft_size >= 2, "bad_featurizer", "fft_size must be >= 2");
    require(hop > 0, "bad_featurizer", "hop must be positive");
    const std::int64_t frames = x.rows / hop;
    const std::int64_t bins = fft_size / 2 + 1;
    const std::int64_t channels = x.cols;
    constexpr double kLogEps = 1e-8;

    std::vector<double> window(static_cast<std::size_t>(fft_size));
    for (int n = 0; n < fft_size; ++n) {
        window[static_cast<std::size_t>(n)] =
            0.5 * (1.0 - std::cos(2.0 * 3.141592653589793 * n / (fft_size - 1)));
    }
    // Precomputed DFT basis; fft_size stays small (tens of samples) so the
    // direct transform is cheap enough.
    std::vector<double> cos_tab(static_cast<std::size_t>(bins * fft_size));
    std::vector<double> sin_tab(static_cast<std::size_t>(bins * fft_size));
    for (std::int64_t b = 0; b < bins; ++b) {
        for (int n = 0; n < fft_size; ++n) {
            const double ang = 2.0 * 3.141592653589793 * static_cast<double>(b) * n / fft_size;
            cos_tab[static_cast<std::size_t>(b * fft_size + n)] = std::cos(ang);
            sin_tab[static_cast<std::size_t>(b * fft_size + n)] = std::sin(ang);
        }
    }

    MatF out(frames, channels * bins);
    parallel_for(frames, min_items_for(channels * bins * fft_size * 2, 8),
                 [&](std::int64_t f0, std::int64_t f1) {
        for (std::int64_t f = f0; f < f1; ++f) {
            const std::int64_t start = (f + 1) * hop - fft_size;
            float* orow = out.row(f);
            for (std::int64_t c = 0; c < channels; ++c) {
                for (std::int64_t b = 0; b < bins; ++b) {
                    double re = 0.0, im = 0.0;
                    const double* ct = cos_tab.data() + b * fft_size;
                    const double* st = sin_tab.data() + b * fft_size;
                    for (int n = 0; n < fft_size; ++n) {
                        const std::int64_t t = start + n;
                        if (t < 0) continue;
                        const double wx = window[static_cast<std::size_t>(n)] * x.at(t, c);
                        re += wx * ct[n];
                        im -= wx * st[n];
                    }
                    orow[c * bins + b] = static_cast<float>(std::log(re * re + im * im + kLogEps));
                }
            }
        }
    });
    return out;
}

}  // namespace emgseq::nn
