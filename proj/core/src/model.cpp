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

#include "emgseq/model.hpp"

#include <algorithm>
#include <cmath>

namespace emgseq::model {

using nn::conv1d_causal_bwd;
using nn::conv1d_causal_fwd;
using nn::gelu_bwd;
using nn::gelu_fwd;
using nn::linear_bwd;
using nn::linear_fwd;

void validate_arch_config(const ArchConfig& cfg) {
    require(cfg.hidden_size > 0 && cfg.num_layers > 0, "bad_arch",
            "hidden size and layer count must be positive");
    require(cfg.hidden_size % cfg.num_heads == 0, "bad_arch",
            "hidden size " + std::to_string(cfg.hidden_size) + " not divisible by " +
                std::to_string(cfg.num_heads) + " attention heads");
    require(cfg.ff_ratio > 0, "bad_arch", "ff_ratio must be positive");
    require(cfg.vocab_size >= 2, "bad_arch", "vocab must hold the blank plus at least one symbol");
    require(cfg.num_channels > 0, "bad_arch", "num_channels must be positive");
    const FeaturizerConfig& f = cfg.featurizer;
    if (f.kind == FeaturizerKind::RawCnn) {
        require(f.cnn_channels.size() == f.cnn_kernels.size() &&
                    f.cnn_channels.size() == f.cnn_strides.size() && f.cnn_channels.size() == 3,
                "bad_arch", "raw featurizer uses exactly three conv layers");
        for (std::size_t i = 0; i < f.cnn_channels.size(); ++i) {
            require(f.cnn_channels[i] > 0, "bad_arch", "featurizer channels must be positive");
            require(f.cnn_kernels[i] >= f.cnn_strides[i] && f.cnn_strides[i] > 0, "bad_arch",
                    "featurizer kernels must be >= strides > 0");
        }
    } else {
        require(f.fft_size >= 2, "bad_arch", "fft_size must be >= 2");
    }
    require(f.downsample() == 20, "bad_arch",
            "featurizer stride product must be 20 (2 kHz input to 100 Hz frames)");
}

nlohmann::json arch_to_json(const ArchConfig& cfg) {
    nlohmann::json f = {
        {"kind", cfg.featurizer.kind == FeaturizerKind::RawCnn ? "raw_cnn" : "spectrogram_mlp"},
        {"cnn_channels", cfg.featurizer.cnn_channels},
        {"cnn_kernels", cfg.featurizer.cnn_kernels},
        {"cnn_strides", cfg.featurizer.cnn_strides},
        {"instance_norm_after_first", cfg.featurizer.instance_norm_after_first},
        {"fft_size", cfg.featurizer.fft_size},
        {"mlp_dims", cfg.featurizer.mlp_dims},
    };
    return nlohmann::json{
        {"hidden_size", cfg.hidden_size},
        {"num_layers", cfg.num_layers},
        {"ff_ratio", cfg.ff_ratio},
        {"num_heads", cfg.num_heads},
        {"vocab_size", cfg.vocab_size},
        {"num_channels", cfg.num_channels},
        {"causal", cfg.causal},
        {"dropout_hidden", cfg.dropout_hidden},
        {"dropout_attention", cfg.dropout_attention},
        {"dropout_activation", cfg.dropout_activation},
        {"dropout_feature_projection", cfg.dropout_feature_projection},
        {"dropout_final_layer", cfg.dropout_final_layer},
        {"featurizer", f},
        {"tag", cfg.tag},
    };
}

ArchConfig arch_from_json(const nlohmann::json& j) {
    ArchConfig cfg;
    cfg.hidden_size = j.at("hidden_size").get<int>();
    cfg.num_layers = j.at("num_layers").get<int>();
    cfg.ff_ratio = j.at("ff_ratio").get<int>();
    cfg.num_heads = j.at("num_heads").get<int>();
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.num_channels = j.at("num_channels").get<int>();
    cfg.causal = j.at("causal").get<bool>();
    cfg.dropout_hidden = j.at("dropout_hidden").get<float>();
    cfg.dropout_attention = j.at("dropout_attention").get<float>();
    cfg.dropout_activation = j.at("dropout_activation").get<float>();
    cfg.dropout_feature_projection = j.at("dropout_feature_projection").get<float>();
    cfg.dropout_final_layer = j.at("dropout_final_layer").get<float>();
    cfg.tag = j.value("tag", "");
    const nlohmann::json& f = j.at("featurizer");
    cfg.featurizer.kind = f.at("kind").get<std::string>() == "raw_cnn"
                              ? FeaturizerKind::RawCnn
                              : FeaturizerKind::SpectrogramMlp;
    cfg.featurizer.cnn_channels = f.at("cnn_channels").get<std::vector<int>>();
    cfg.featurizer.cnn_kernels = f.at("cnn_kernels").get<std::vector<int>>();
    cfg.featurizer.cnn_strides = f.at("cnn_strides").get<std::vector<int>>();
    cfg.featurizer.instance_norm_after_first = f.at("instance_norm_after_first").get<bool>();
    cfg.featurizer.fft_size = f.at("fft_size").get<int>();
    cfg.featurizer.mlp_dims = f.at("mlp_dims").get<std::vector<int>>();
    return cfg;
}

std::vector<ArchConfig> arch_grid() {
    std::vector<ArchConfig> grid;
    for (int d : {128, 256, 512, 1024}) {
        for (int layers : {2, 4, 6, 8, 10}) {
            ArchConfig cfg;
            cfg.hidden_size = d;
            cfg.num_layers = layers;
            if (d == 128 && layers == 10) cfg.tag = "tiny";
            if (d == 256 && layers == 6) cfg.tag = "small";
            if (d == 1024 && layers == 8) cfg.tag = "large";
            grid.push_back(cfg);
        }
    }
    return grid;
}

std::size_t Model::add_param(const std::string& name, std::int64_t rows, std::int64_t cols) {
    params_.emplace_back(rows, cols);
    names_.push_back(name);
    return params_.size() - 1;
}

Model Model::build(const ArchConfig& cfg, std::uint64_t seed) {
    validate_arch_config(cfg);
    Model m;
    m.cfg_ = cfg;
    m.seed_ = seed;

    const int d = cfg.hidden_size;
    const FeaturizerConfig& f = cfg.featurizer;

    int feat_out;
    if (f.kind == FeaturizerKind::RawCnn) {
        int in_ch = cfg.num_channels;
        for (std::size_t i = 0; i < f.cnn_channels.size(); ++i) {
            const std::string stem = "featurizer.conv" + std::to_string(i + 1);
            m.cnn_.conv_w.push_back(
                m.add_param(stem + ".weight", f.cnn_channels[i], in_ch * f.cnn_kernels[i]));
            m.cnn_.conv_b.push_back(m.add_param(stem + ".bias", 1, f.cnn_channels[i]));
            if (i == 0 && f.instance_norm_after_first) {
                m.cnn_.in_gamma = m.add_param("featurizer.norm.gamma", 1, f.cnn_channels[0]);
                m.cnn_.in_beta = m.add_param("featurizer.norm.beta", 1, f.cnn_channels[0]);
            }
            in_ch = f.cnn_channels[i];
        }
        feat_out = in_ch;
    } else {
        const int bins = f.fft_size / 2 + 1;
        int prev = cfg.num_channels * bins;
        for (std::size_t i = 0; i < f.mlp_dims.size(); ++i) {
            const std::string stem = "featurizer.mlp" + std::to_string(i + 1);
            m.mlp_.w.push_back(m.add_param(stem + ".weight", f.mlp_dims[i], prev));
            m.mlp_.b.push_back(m.add_param(stem + ".bias", 1, f.mlp_dims[i]));
            prev = f.mlp_dims[i];
        }
        feat_out = prev;
    }
    m.proj_w_ = m.add_param("featurizer.proj.weight", d, feat_out);
    m.proj_b_ = m.add_param("featurizer.proj.bias", 1, d);

    require(d % kPosConvGroups == 0, "bad_arch", "hidden size must divide into pos-conv groups");
    m.pos_w_ = m.add_param("pos_conv.weight", d, (d / kPosConvGroups) * kPosConvKernel);
    m.pos_b_ = m.add_param("pos_conv.bias", 1, d);

    const int ff = cfg.ff_ratio * d;
    for (int l = 0; l < cfg.num_layers; ++l) {
        const std::string stem = "encoder.layers." + std::to_string(l);
        BlockIdx b;
        b.ln1_g = m.add_param(stem + ".ln1.gamma", 1, d);
        b.ln1_b = m.add_param(stem + ".ln1.beta", 1, d);
        b.q_w = m.add_param(stem + ".attn.q.weight", d, d);
        b.q_b = m.add_param(stem + ".attn.q.bias", 1, d);
        b.k_w = m.add_param(stem + ".attn.k.weight", d, d);
        b.k_b = m.add_param(stem + ".attn.k.bias", 1, d);
        b.v_w = m.add_param(stem + ".attn.v.weight", d, d);
        b.v_b = m.add_param(stem + ".attn.v.bias", 1, d);
        b.o_w = m.add_param(stem + ".attn.out.weight", d, d);
        b.o_b = m.add_param(stem + ".attn.out.bias", 1, d);
        b.ln2_g = m.add_param(stem + ".ln2.gamma", 1, d);
        b.ln2_b = m.add_param(stem + ".ln2.beta", 1, d);
        b.ff1_w = m.add_param(stem + ".ff.in.weight", ff, d);
        b.ff1_b = m.add_param(stem + ".ff.in.bias", 1, ff);
        b.ff2_w = m.add_param(stem + ".ff.out.weight", d, ff);
        b.ff2_b = m.add_param(stem + ".ff.out.bias", 1, d);
        m.blocks_.push_back(b);
    }

    m.fin_g_ = m.add_param("encoder.final_norm.gamma", 1, d);
    m.fin_b_ = m.add_param("encoder.final_norm.beta", 1, d);
    m.dec_w_ = m.add_param("decoder.weight", cfg.vocab_size, d);
    m.dec_b_ = m.add_param("decoder.bias", 1, cfg.vocab_size);

    // Scaled-normal weights, zero biases, unit norm scales.
    Rng rng(Rng::derive(seed, 0x11));
    for (std::size_t i = 0; i < m.params_.size(); ++i) {
        const std::string& name = m.names_[i];
        MatF& p = m.params_[i];
        if (name.ends_with(".gamma")) {
            p.fill(1.0f);
        } else if (name.ends_with(".bias") || name.ends_with(".beta")) {
            p.fill(0.0f);
        } else {
            for (float& x : p.v) x = static_cast<float>(rng.normal(0.0, kInitStd));
        }
    }
    return m;
}

std::size_t Model::param_index(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    fail("unknown_param", "no parameter named " + name);
}

std::int64_t Model::count_params() const {
    std::int64_t total = 0;
    for (const MatF& p : params_) total += p.size();
    return total;
}

std::int64_t count_params(const Model& m) { return m.count_params(); }

std::int64_t Model::frames_for(std::int64_t num_samples) const {
    if (cfg_.featurizer.kind == FeaturizerKind::SpectrogramMlp) {
        return num_samples / cfg_.featurizer.downsample();
    }
    std::int64_t t = num_samples;
    for (int s : cfg_.featurizer.cnn_strides) t /= s;
    return t;
}

std::vector<MatF> Model::make_grad_store() const {
    std::vector<MatF> grads;
    grads.reserve(params_.size());
    for (const MatF& p : params_) grads.emplace_back(p.rows, p.cols);
    return grads;
}

namespace {

void check_finite(const MatF& x) {
    for (float v : x.v) {
        require(std::isfinite(v), "nonfinite_input", "input signal contains a non-finite value");
    }
}

void apply_mask_spans(MatF& feat, const std::vector<augment::MaskSpan>& spans) {
    for (const augment::MaskSpan& span : spans) {
        for (std::int64_t f = span.start; f < span.start + span.len && f < feat.rows; ++f) {
            float* row = feat.row(f);
            for (std::int64_t c = 0; c < feat.cols; ++c) row[c] = 0.0f;
        }
    }
}

}  // namespace

MatF Model::featurize(const MatF& signal, const ForwardOpts& opts, Cache* cache) const {
    require(signal.cols == cfg_.num_channels, "bad_input",
            "expected " + std::to_string(cfg_.num_channels) + " channels, got " +
                std::to_string(signal.cols));
    require(signal.rows >= cfg_.featurizer.downsample(), "bad_input",
            "signal must cover at least one output frame (" +
                std::to_string(cfg_.featurizer.downsample()) + " samples)");
    check_finite(signal);

    const FeaturizerConfig& f = cfg_.featurizer;
    const bool train = opts.train && opts.dropout_rng != nullptr;
    MatF feat;

    if (f.kind == FeaturizerKind::RawCnn) {
        MatF cur = conv1d_causal_fwd(signal, params_[cnn_.conv_w[0]], params_[cnn_.conv_b[0]],
                                     f.cnn_kernels[0], f.cnn_strides[0], 1);
        if (cache != nullptr) {
            cache->x = signal;
            cache->act1_pre = cur;
        }
        if (f.instance_norm_after_first) {
            cur = nn::cin_fwd(cur, params_[cnn_.in_gamma], params_[cnn_.in_beta], kNormEps,
                              cache != nullptr ? &cache->cin : nullptr);
        }
        MatF pre = cur;
        cur = gelu_fwd(cur);
        if (cache != nullptr) {
            if (f.instance_norm_after_first) cache->act1_pre = std::move(pre);
            cache->act1 = cur;
        }
        for (std::size_t i = 1; i < f.cnn_channels.size(); ++i) {
            MatF conv = conv1d_causal_fwd(cur, params_[cnn_.conv_w[i]], params_[cnn_.conv_b[i]],
                                          f.cnn_kernels[i], f.cnn_strides[i], 1);
            MatF act = gelu_fwd(conv);
            if (cache != nullptr) {
                if (i == 1) {
                    cache->act2_pre = std::move(conv);
                    cache->act2 = act;
                } else {
                    cache->act3_pre = std::move(conv);
                    cache->act3 = act;
                }
            }
            cur = std::move(act);
        }
        feat = linear_fwd(cur, params_[proj_w_], params_[proj_b_]);
    } else {
        MatF spec = nn::log_spectrogram(signal, f.fft_size, f.downsample());
        if (cache != nullptr) {
            cache->x = signal;
            cache->spec = spec;
        }
        MatF cur = std::move(spec);
        for (std::size_t i = 0; i < mlp_.w.size(); ++i) {
            MatF pre = linear_fwd(cur, params_[mlp_.w[i]], params_[mlp_.b[i]]);
            MatF act = gelu_fwd(pre);
            if (cache != nullptr) {
                cache->mlp_pre.push_back(pre);
                cache->mlp_act.push_back(act);
            }
            cur = std::move(act);
        }
        feat = linear_fwd(cur, params_[proj_w_], params_[proj_b_]);
    }

    if (cache != nullptr) cache->feat_raw = feat;
    if (train && cfg_.dropout_feature_projection > 0.0f) {
        std::vector<std::uint8_t> mask;
        feat = nn::dropout_fwd(feat, cfg_.dropout_feature_projection, *opts.dropout_rng, mask);
        if (cache != nullptr) cache->drop_feat = std::move(mask);
    }
    if (opts.mask_spans != nullptr && !opts.mask_spans->empty()) {
        apply_mask_spans(feat, *opts.mask_spans);
        if (cache != nullptr) cache->mask_spans = *opts.mask_spans;
    }
    if (cache != nullptr) cache->feat = feat;
    return feat;
}

MatF Model::forward(const MatF& signal, const ForwardOpts& opts, Cache* cache) const {
    const bool train = opts.train && opts.dropout_rng != nullptr;
    MatF h = featurize(signal, opts, cache);

    // Convolutional positional embedding, added residually.
    MatF pos_pre = conv1d_causal_fwd(h, params_[pos_w_], params_[pos_b_], kPosConvKernel, 1,
                                     kPosConvGroups);
    MatF pos = gelu_fwd(pos_pre);
    if (cache != nullptr) cache->pos_pre = std::move(pos_pre);
    linalg::add_inplace(h, pos);

    if (cache != nullptr) cache->blocks.resize(blocks_.size());
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const BlockIdx& b = blocks_[l];
        BlockCache* bc = cache != nullptr ? &cache->blocks[l] : nullptr;
        if (bc != nullptr) bc->h_in = h;

        MatF u = nn::ln_fwd(h, params_[b.ln1_g], params_[b.ln1_b], kNormEps,
                            bc != nullptr ? &bc->ln1 : nullptr);
        if (bc != nullptr) bc->u = u;
        MatF attn = nn::attention_fwd(u, params_[b.q_w], params_[b.q_b], params_[b.k_w],
                                      params_[b.k_b], params_[b.v_w], params_[b.v_b],
                                      params_[b.o_w], params_[b.o_b], cfg_.num_heads, cfg_.causal,
                                      train ? cfg_.dropout_attention : 0.0f,
                                      train ? opts.dropout_rng : nullptr,
                                      bc != nullptr ? &bc->attn : nullptr);
        if (train && cfg_.dropout_hidden > 0.0f) {
            std::vector<std::uint8_t> mask;
            attn = nn::dropout_fwd(attn, cfg_.dropout_hidden, *opts.dropout_rng, mask);
            if (bc != nullptr) bc->drop_attn_out = std::move(mask);
        }
        linalg::add_inplace(h, attn);
        if (bc != nullptr) bc->h_mid = h;

        MatF v2 = nn::ln_fwd(h, params_[b.ln2_g], params_[b.ln2_b], kNormEps,
                             bc != nullptr ? &bc->ln2 : nullptr);
        if (bc != nullptr) bc->v2 = v2;
        MatF ff1 = linear_fwd(v2, params_[b.ff1_w], params_[b.ff1_b]);
        MatF act = gelu_fwd(ff1);
        if (bc != nullptr) bc->ff1_pre = std::move(ff1);
        if (train && cfg_.dropout_activation > 0.0f) {
            std::vector<std::uint8_t> mask;
            act = nn::dropout_fwd(act, cfg_.dropout_activation, *opts.dropout_rng, mask);
            if (bc != nullptr) bc->drop_act = std::move(mask);
        }
        if (bc != nullptr) bc->ff_act = act;
        MatF ff2 = linear_fwd(act, params_[b.ff2_w], params_[b.ff2_b]);
        if (train && cfg_.dropout_hidden > 0.0f) {
            std::vector<std::uint8_t> mask;
            ff2 = nn::dropout_fwd(ff2, cfg_.dropout_hidden, *opts.dropout_rng, mask);
            if (bc != nullptr) bc->drop_ff_out = std::move(mask);
        }
        linalg::add_inplace(h, ff2);
    }

    if (cache != nullptr) cache->enc_out = h;
    MatF fin = nn::ln_fwd(h, params_[fin_g_], params_[fin_b_], kNormEps,
                          cache != nullptr ? &cache->final_ln : nullptr);
    if (train && cfg_.dropout_final_layer > 0.0f) {
        std::vector<std::uint8_t> mask;
        fin = nn::dropout_fwd(fin, cfg_.dropout_final_layer, *opts.dropout_rng, mask);
        if (cache != nullptr) cache->drop_final = std::move(mask);
    }
    if (cache != nullptr) cache->dec_in = fin;
    return linear_fwd(fin, params_[dec_w_], params_[dec_b_]);
}

void Model::backward(const Cache& cache, const MatF& dlogits, std::vector<MatF>& grads) const {
    require(grads.size() == params_.size(), "bad_grads", "gradient store shape mismatch");
    const FeaturizerConfig& f = cfg_.featurizer;

    // Decoder and final norm.
    MatF d_fin;
    linear_bwd(cache.dec_in, params_[dec_w_], dlogits, &d_fin, grads[dec_w_], grads[dec_b_]);
    if (!cache.drop_final.empty()) {
        d_fin = nn::dropout_bwd(d_fin, cache.drop_final, cfg_.dropout_final_layer);
    }
    MatF dh;
    nn::ln_bwd(cache.enc_out, cache.final_ln, params_[fin_g_], d_fin, dh, grads[fin_g_],
               grads[fin_b_]);

    // Encoder blocks in reverse.
    for (std::size_t li = blocks_.size(); li-- > 0;) {
        const BlockIdx& b = blocks_[li];
        const BlockCache& bc = cache.blocks[li];

        MatF d_ff2 = dh;  // residual branch gradient
        if (!bc.drop_ff_out.empty()) {
            d_ff2 = nn::dropout_bwd(d_ff2, bc.drop_ff_out, cfg_.dropout_hidden);
        }
        MatF d_act;
        linear_bwd(bc.ff_act, params_[b.ff2_w], d_ff2, &d_act, grads[b.ff2_w], grads[b.ff2_b]);
        if (!bc.drop_act.empty()) {
            d_act = nn::dropout_bwd(d_act, bc.drop_act, cfg_.dropout_activation);
        }
        MatF d_ff1 = gelu_bwd(bc.ff1_pre, d_act);
        MatF d_v2;
        linear_bwd(bc.v2, params_[b.ff1_w], d_ff1, &d_v2, grads[b.ff1_w], grads[b.ff1_b]);
        MatF d_hmid;
        nn::ln_bwd(bc.h_mid, bc.ln2, params_[b.ln2_g], d_v2, d_hmid, grads[b.ln2_g],
                   grads[b.ln2_b]);
        linalg::add_inplace(dh, d_hmid);

        MatF d_attn = dh;
        if (!bc.drop_attn_out.empty()) {
            d_attn = nn::dropout_bwd(d_attn, bc.drop_attn_out, cfg_.dropout_hidden);
        }
        MatF d_u;
        nn::attention_bwd(bc.attn, params_[b.q_w], params_[b.k_w], params_[b.v_w], params_[b.o_w],
                          cfg_.num_heads, d_attn, d_u, grads[b.q_w], grads[b.q_b], grads[b.k_w],
                          grads[b.k_b], grads[b.v_w], grads[b.v_b], grads[b.o_w], grads[b.o_b]);
        MatF d_hin;
        nn::ln_bwd(bc.h_in, bc.ln1, params_[b.ln1_g], d_u, d_hin, grads[b.ln1_g], grads[b.ln1_b]);
        linalg::add_inplace(dh, d_hin);
    }

    // Positional conv residual: h0 = feat + gelu(conv(feat)).
    MatF d_pos = gelu_bwd(cache.pos_pre, dh);
    MatF d_feat_from_pos;
    conv1d_causal_bwd(cache.feat, params_[pos_w_], d_pos, kPosConvKernel, 1, kPosConvGroups,
                      &d_feat_from_pos, grads[pos_w_], grads[pos_b_]);
    MatF d_feat = dh;
    linalg::add_inplace(d_feat, d_feat_from_pos);

    // Masked frames contributed nothing, so their gradient is dropped.
    apply_mask_spans(d_feat, cache.mask_spans);
    if (!cache.drop_feat.empty()) {
        d_feat = nn::dropout_bwd(d_feat, cache.drop_feat, cfg_.dropout_feature_projection);
    }

    if (f.kind == FeaturizerKind::RawCnn) {
        MatF d_act3;
        linear_bwd(cache.act3, params_[proj_w_], d_feat, &d_act3, grads[proj_w_], grads[proj_b_]);
        MatF d_conv3 = gelu_bwd(cache.act3_pre, d_act3);
        MatF d_act2;
        conv1d_causal_bwd(cache.act2, params_[cnn_.conv_w[2]], d_conv3, f.cnn_kernels[2],
                          f.cnn_strides[2], 1, &d_act2, grads[cnn_.conv_w[2]],
                          grads[cnn_.conv_b[2]]);
        MatF d_conv2 = gelu_bwd(cache.act2_pre, d_act2);
        MatF d_act1;
        conv1d_causal_bwd(cache.act1, params_[cnn_.conv_w[1]], d_conv2, f.cnn_kernels[1],
                          f.cnn_strides[1], 1, &d_act1, grads[cnn_.conv_w[1]],
                          grads[cnn_.conv_b[1]]);
        MatF d_norm = gelu_bwd(cache.act1_pre, d_act1);
        MatF d_conv1;
        if (f.instance_norm_after_first) {
            nn::cin_bwd(cache.cin, params_[cnn_.in_gamma], d_norm, d_conv1, grads[cnn_.in_gamma],
                        grads[cnn_.in_beta]);
        } else {
            d_conv1 = std::move(d_norm);
        }
        // No gradient to the raw signal: it is data, not a parameter.
        conv1d_causal_bwd(cache.x, params_[cnn_.conv_w[0]], d_conv1, f.cnn_kernels[0],
                          f.cnn_strides[0], 1, nullptr, grads[cnn_.conv_w[0]],
                          grads[cnn_.conv_b[0]]);
    } else {
        MatF d_cur = d_feat;
        const MatF& last_act = mlp_.w.empty() ? cache.spec : cache.mlp_act.back();
        MatF d_prev;
        linear_bwd(last_act, params_[proj_w_], d_cur, &d_prev, grads[proj_w_], grads[proj_b_]);
        d_cur = std::move(d_prev);
        for (std::size_t i = mlp_.w.size(); i-- > 0;) {
            MatF d_pre = gelu_bwd(cache.mlp_pre[i], d_cur);
            const MatF& input = i == 0 ? cache.spec : cache.mlp_act[i - 1];
            const bool need_dx = i > 0;
            MatF dx;
            linear_bwd(input, params_[mlp_.w[i]], d_pre, need_dx ? &dx : nullptr, grads[mlp_.w[i]],
                       grads[mlp_.b[i]]);
            if (need_dx) d_cur = std::move(dx);
        }
    }
}

}  // namespace emgseq::model
