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
#include <string>
#include <vector>

#include <json.hpp>

#include "emgseq/augment.hpp"
#include "emgseq/common.hpp"
#include "emgseq/mat.hpp"
#include "emgseq/nn.hpp"

namespace emgseq::model {

enum class FeaturizerKind { RawCnn, SpectrogramMlp };

struct FeaturizerConfig {
    FeaturizerKind kind = FeaturizerKind::RawCnn;
    std::vector<int> cnn_channels = {128, 64, 64};
    std::vector<int> cnn_kernels = {11, 3, 3};
    std::vector<int> cnn_strides = {5, 2, 2};
    bool instance_norm_after_first = true;
    // spectrogram_mlp featurizer (featurizer ablation)
    int fft_size = 64;
    std::vector<int> mlp_dims = {384};

    /// Raw-sample-to-frame downsampling factor; the product of the strides.
    int downsample() const {
        int p = 1;
        for (int s : cnn_strides) p *= s;
        return p;
    }
};

struct ArchConfig {
    int hidden_size = 1024;
    int num_layers = 8;
    int ff_ratio = 4;
    int num_heads = 16;
    int vocab_size = 99;
    int num_channels = 32;
    bool causal = true;
    float dropout_hidden = 0.2f;
    float dropout_attention = 0.2f;
    float dropout_activation = 0.2f;
    float dropout_feature_projection = 0.2f;
    float dropout_final_layer = 0.2f;
    FeaturizerConfig featurizer;
    std::string tag;

    void set_all_dropouts(float p) {
        dropout_hidden = dropout_attention = dropout_activation = p;
        dropout_feature_projection = dropout_final_layer = p;
    }
};

void validate_arch_config(const ArchConfig& cfg);

nlohmann::json arch_to_json(const ArchConfig& cfg);
ArchConfig arch_from_json(const nlohmann::json& j);

/// The width x depth grid: hidden sizes {128, 256, 512, 1024} crossed with
/// layer counts {2, 4, 6, 8, 10}; the tiny/small/large reference points carry
/// their tag.
std::vector<ArchConfig> arch_grid();

// Positional information enters through a grouped causal convolution over the
// feature sequence, added residually before the first encoder block.
constexpr int kPosConvKernel = 128;
constexpr int kPosConvGroups = 16;
constexpr float kNormEps = 1e-5f;
constexpr float kInitStd = 0.02f;

struct ForwardOpts {
    bool train = false;
    Rng* dropout_rng = nullptr;  // required for dropout when train
    const std::vector<augment::MaskSpan>* mask_spans = nullptr;  // feature-frame time masks
};

class Model {
public:
    /// Deterministic construction: weights are N(0, kInitStd) draws from the
    /// given seed in registration order; biases zero; norm scales one.
    static Model build(const ArchConfig& cfg, std::uint64_t seed);

    const ArchConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

    std::size_t num_tensors() const { return params_.size(); }
    MatF& param(std::size_t i) { return params_[i]; }
    const MatF& param(std::size_t i) const { return params_[i]; }
    const std::string& param_name(std::size_t i) const { return names_[i]; }
    std::size_t param_index(const std::string& name) const;

    /// Exact count of trainable scalars.
    std::int64_t count_params() const;

    /// Feature frames produced from a signal of this many samples.
    std::int64_t frames_for(std::int64_t num_samples) const;

    struct BlockCache {
        MatF h_in;
        nn::LnCache ln1;
        MatF u;  // ln1 output
        nn::AttnCache attn;
        std::vector<std::uint8_t> drop_attn_out;
        MatF h_mid;
        nn::LnCache ln2;
        MatF v2;  // ln2 output
        MatF ff1_pre;
        MatF ff_act;  // post-gelu, post activation-dropout (ff2 input)
        std::vector<std::uint8_t> drop_act;
        std::vector<std::uint8_t> drop_ff_out;
    };

    struct Cache {
        MatF x;  // model input
        // raw_cnn featurizer
        MatF act1_pre;  // gelu input after the conv1 stage (post-norm when present)
        nn::CinCache cin;
        MatF act1, act2_pre, act2, act3_pre, act3;
        // spectrogram_mlp featurizer
        MatF spec;
        std::vector<MatF> mlp_pre;  // pre-gelu per hidden layer
        std::vector<MatF> mlp_act;  // post-gelu per hidden layer
        // shared tail
        MatF feat_raw;  // featurizer output before dropout/masking
        std::vector<std::uint8_t> drop_feat;
        std::vector<augment::MaskSpan> mask_spans;
        MatF feat;  // encoder input (post dropout + mask)
        MatF pos_pre;
        std::vector<BlockCache> blocks;
        MatF enc_out;
        nn::LnCache final_ln;
        MatF dec_in;
        std::vector<std::uint8_t> drop_final;
    };

    /// Featurizer output [F x d]. With default opts this is a pure function
    /// of (weights, signal) and safe to call concurrently.
    MatF featurize(const MatF& signal, const ForwardOpts& opts = {}, Cache* cache = nullptr) const;

    /// Per-frame logits [F x vocab_size]. Causal: logits at frame t depend
    /// only on samples before (t+1) * downsample.
    MatF forward(const MatF& signal, const ForwardOpts& opts = {}, Cache* cache = nullptr) const;

    /// Accumulates parameter gradients for a recorded forward pass.
    /// `grads` must be shaped like the parameter list (see make_grad_store).
    void backward(const Cache& cache, const MatF& dlogits, std::vector<MatF>& grads) const;

    std::vector<MatF> make_grad_store() const;

private:
    Model() = default;

    std::size_t add_param(const std::string& name, std::int64_t rows, std::int64_t cols);

    ArchConfig cfg_;
    std::uint64_t seed_ = 0;
    std::vector<MatF> params_;
    std::vector<std::string> names_;

    // typed indices into params_
    struct RawCnnIdx {
        std::vector<std::size_t> conv_w, conv_b;
        std::size_t in_gamma = 0, in_beta = 0;
    };
    struct MlpIdx {
        std::vector<std::size_t> w, b;  // hidden layers then final projection
    };
    struct BlockIdx {
        std::size_t ln1_g, ln1_b, q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
        std::size_t ln2_g, ln2_b, ff1_w, ff1_b, ff2_w, ff2_b;
    };
    RawCnnIdx cnn_;
    MlpIdx mlp_;
    std::size_t proj_w_ = 0, proj_b_ = 0;
    std::size_t pos_w_ = 0, pos_b_ = 0;
    std::vector<BlockIdx> blocks_;
    std::size_t fin_g_ = 0, fin_b_ = 0, dec_w_ = 0, dec_b_ = 0;
};

/// Exact count of all trainable scalars (same as model.count_params()).
std::int64_t count_params(const Model& m);

}  // namespace emgseq::model
