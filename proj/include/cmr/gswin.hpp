#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cmr/gwg.hpp"
#include "cmr/tensor.hpp"

namespace cmr {

class Rng;

// Architecture hyperparameters for the four-stage image encoder. Stage k
// runs at base_channels * 2^(k-1) channels on a map halved k-1 times.
struct GswinConfig {
    int patch_size = 4;
    int win = 8;
    int base_channels = 32;
    std::array<int, 4> stage_depths{1, 1, 3, 1};
    std::array<int, 4> heads_per_stage{2, 4, 8, 16};
    int proj_dim = 256;
    double mlp_ratio = 4.0;
    bool rel_pos_bias = false;
    int shift = -1;  // -1 selects win / 2
    bool gwg_share_weights = false;
    bool mean_pool_feature = false;  // default: 0-th spatial token

    int effective_shift() const { return shift < 0 ? win / 2 : shift; }
};

// Packed multi-head projections plus the pre-norm layer parameters of the
// sublayer they belong to. rel_bias is a ((2 win - 1)^2) x heads table,
// consulted only for window self-attention when use_rel_bias is set.
struct AttentionWeights {
    int heads = 1;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln_gain, ln_bias;
    Tensor rel_bias;
    bool use_rel_bias = false;
};

struct MlpWeights {
    Tensor ln_gain, ln_bias;
    Tensor w1, b1, w2, b2;
};

struct GswinBlockWeights {
    std::vector<GwgBlockWeights> gwg;  // one per halving down to the window size
    AttentionWeights lw, slw, ca_local, ca_shift;
    MlpWeights mlp;
};

struct GswinStageWeights {
    std::vector<GswinBlockWeights> blocks;
    Tensor merge;  // 4C x 2C, empty after the last stage
};

struct GswinWeights {
    Tensor patch_proj;  // (3 patch^2) x C
    std::array<GswinStageWeights, 4> stages;
    Tensor feature_proj;  // 8C x proj_dim
};

// Collects numeric evidence from a forward pass: attention row-sum error and
// the per-stage shape ledger.
struct EncodeDiag {
    struct Stage {
        int h = 0, w = 0, c = 0;
        int blocks = 0;
        int gwg_depth = 0;
        int fw_h = 0, fw_w = 0, fw_c = 0;
    };
    std::vector<Stage> stages;
    int total_blocks = 0;
    double max_attn_row_err = 0.0;
    long attn_rows = 0;
};

struct AttnStats {
    double max_row_sum_err = 0.0;
    long rows = 0;
};

AttentionWeights make_attention_weights(int channels, int heads, int win, bool rel_bias,
                                        Rng& rng);
MlpWeights make_mlp_weights(int channels, double ratio, Rng& rng);
GswinWeights make_gswin_weights(const GswinConfig& cfg, int image_size, std::uint64_t seed);

// Checks that an image_size x image_size input satisfies every stage's
// window and merging constraint; throws ConfigError naming the stage.
void validate_gswin_geometry(const GswinConfig& cfg, int image_size);

// Local window multi-head self-attention wrapped as x + Attn(LN(x)),
// computed independently inside each win x win window.
Tensor lw_msa(const Tensor& f, const AttentionWeights& w, int win, AttnStats* stats = nullptr);

// Shifted variant: cyclic shift by (-shift, -shift), window attention,
// inverse shift.
Tensor slw_msa(const Tensor& f, const AttentionWeights& w, int win, int shift,
               AttnStats* stats = nullptr);

// Cross-attention: queries from each local window, keys/values from the one
// shared global window. Wrapped as x + Attn(LN(x), f_w).
Tensor glw_ca(const Tensor& f_local, const Tensor& f_w, const AttentionWeights& w,
              AttnStats* stats = nullptr);

// Full block: local attention, shifted attention, both global-local
// cross-attention contributions summed onto the residual stream, MLP.
Tensor gswin_block(const Tensor& f, const GswinConfig& cfg, const GswinBlockWeights& w,
                   AttnStats* stats = nullptr);

struct ImageEncodeResult {
    Tensor tokens;                // h' x w' x 8C
    std::vector<double> feature;  // unit-norm, proj_dim
};

ImageEncodeResult image_encode(const Tensor& image, const GswinConfig& cfg,
                               const GswinWeights& w, EncodeDiag* diag = nullptr);

}  // namespace cmr
