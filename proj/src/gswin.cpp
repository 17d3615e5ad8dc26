#include "cmr/gswin.hpp"

#include <cmath>

#include "cmr/kernels.hpp"
#include "cmr/rng.hpp"
#include "cmr/windowing.hpp"

namespace cmr {

namespace {

constexpr double kLnEps = 1e-5;

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor out = matmul(x, w);
    const int n = out.shape[1];
    for (int r = 0; r < out.shape[0]; ++r)
        for (int j = 0; j < n; ++j) out.at(r, j) += b.at(j);
    return out;
}

Tensor head_slice(const Tensor& x, int head, int dh) {
    Tensor out({x.shape[0], dh});
    for (int r = 0; r < x.shape[0]; ++r)
        for (int j = 0; j < dh; ++j) out.at(r, j) = x.at(r, head * dh + j);
    return out;
}

void track_rows(const Tensor& probs, AttnStats* stats) {
    if (stats == nullptr) return;
    for (int r = 0; r < probs.shape[0]; ++r) {
        double sum = 0.0;
        for (int j = 0; j < probs.shape[1]; ++j) sum += probs.at(r, j);
        stats->max_row_sum_err = std::max(stats->max_row_sum_err, std::abs(sum - 1.0));
        ++stats->rows;
    }
}

// Pure attention delta: inputs are already layer-normed by the caller.
// `bias_win` > 0 enables the relative-position table for win^2 self-attention.
Tensor attention_core(const Tensor& q_in, const Tensor& kv_in, const AttentionWeights& w,
                      int bias_win, AttnStats* stats) {
    const int c = q_in.shape[1];
    if (c % w.heads != 0)
        throw ConfigError("attention: heads " + std::to_string(w.heads) +
                          " do not divide channels " + std::to_string(c));
    const int dh = c / w.heads;
    const Tensor q = linear(q_in, w.wq, w.bq);
    const Tensor k = linear(kv_in, w.wk, w.bk);
    const Tensor v = linear(kv_in, w.wv, w.bv);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const int nq = q.shape[0], nk = k.shape[0];
    Tensor merged({nq, c});
    for (int head = 0; head < w.heads; ++head) {
        const Tensor qh = head_slice(q, head, dh);
        Tensor kh = head_slice(k, head, dh);
        // logits = qh * kh^T * scale
        Tensor kt({dh, nk});
        for (int r = 0; r < nk; ++r)
            for (int j = 0; j < dh; ++j) kt.at(j, r) = kh.at(r, j);
        Tensor logits = matmul(qh, kt);
        for (double& val : logits.data) val *= scale;
        if (w.use_rel_bias && bias_win > 0 && nq == bias_win * bias_win && nk == nq) {
            const int span = 2 * bias_win - 1;
            for (int i = 0; i < nq; ++i) {
                const int yi = i / bias_win, xi = i % bias_win;
                for (int j = 0; j < nk; ++j) {
                    const int yj = j / bias_win, xj = j % bias_win;
                    const int idx = (yi - yj + bias_win - 1) * span + (xi - xj + bias_win - 1);
                    logits.at(i, j) += w.rel_bias.at(idx, head);
                }
            }
        }
        const Tensor probs = softmax_rows(logits, 1.0);
        track_rows(probs, stats);
        const Tensor vh = head_slice(v, head, dh);
        const Tensor out_h = matmul(probs, vh);
        for (int r = 0; r < nq; ++r)
            for (int j = 0; j < dh; ++j) merged.at(r, head * dh + j) = out_h.at(r, j);
    }
    return linear(merged, w.wo, w.bo);
}

Tensor as_rows(const Tensor& map) {
    const int tokens = map.shape[0] * map.shape[1];
    return Tensor({tokens, map.shape[2]}, map.data);
}

// Window self-attention delta applied to every window of the map; includes
// the residual add.
Tensor windowed_self_attention(const Tensor& f, const AttentionWeights& w, int win,
                               AttnStats* stats) {
    const Tensor windows = window_partition(f, win);
    const int nw = windows.shape[0], wsq = windows.shape[1], c = windows.shape[2];
    Tensor out = windows;
    for (int wi = 0; wi < nw; ++wi) {
        Tensor tokens({wsq, c});
        for (int t = 0; t < wsq; ++t)
            for (int ch = 0; ch < c; ++ch) tokens.at(t, ch) = windows.at(wi, t, ch);
        const Tensor normed = layer_norm(tokens, w.ln_gain, w.ln_bias, kLnEps);
        const Tensor delta = attention_core(normed, normed, w, win, stats);
        for (int t = 0; t < wsq; ++t)
            for (int ch = 0; ch < c; ++ch) out.at(wi, t, ch) += delta.at(t, ch);
    }
    return window_reverse(out, f.shape[0], f.shape[1]);
}

// Cross-attention delta against the shared global window, without the
// residual add (the block composes deltas onto a single residual stream).
Tensor glw_ca_delta(const Tensor& f_local, const Tensor& f_w, const AttentionWeights& w,
                    AttnStats* stats) {
    if (f_w.rank() != 3 || f_w.shape[0] != f_w.shape[1])
        throw DimensionError("glw_ca: global window must be square, got " + f_w.shape_str());
    const int win = f_w.shape[0];
    if (f_local.shape[2] != f_w.shape[2])
        throw DimensionError("glw_ca: channel mismatch " + f_local.shape_str() + " vs " +
                             f_w.shape_str());
    const Tensor kv = as_rows(f_w);
    const Tensor windows = window_partition(f_local, win);
    const int nw = windows.shape[0], wsq = windows.shape[1], c = windows.shape[2];
    Tensor delta_windows({nw, wsq, c});
    for (int wi = 0; wi < nw; ++wi) {
        Tensor tokens({wsq, c});
        for (int t = 0; t < wsq; ++t)
            for (int ch = 0; ch < c; ++ch) tokens.at(t, ch) = windows.at(wi, t, ch);
        const Tensor normed = layer_norm(tokens, w.ln_gain, w.ln_bias, kLnEps);
        const Tensor delta = attention_core(normed, kv, w, 0, stats);
        for (int t = 0; t < wsq; ++t)
            for (int ch = 0; ch < c; ++ch) delta_windows.at(wi, t, ch) = delta.at(t, ch);
    }
    return window_reverse(delta_windows, f_local.shape[0], f_local.shape[1]);
}

Tensor mlp_delta(const Tensor& tokens, const MlpWeights& w) {
    const Tensor normed = layer_norm(tokens, w.ln_gain, w.ln_bias, kLnEps);
    return linear(gelu(linear(normed, w.w1, w.b1)), w.w2, w.b2);
}

}  // namespace

AttentionWeights make_attention_weights(int channels, int heads, int win, bool rel_bias,
                                        Rng& rng) {
    if (heads <= 0 || channels % heads != 0)
        throw ConfigError("attention: heads " + std::to_string(heads) +
                          " must divide channels " + std::to_string(channels));
    AttentionWeights w;
    w.heads = heads;
    w.wq = init_uniform({channels, channels}, channels, rng);
    w.bq = Tensor({channels});
    w.wk = init_uniform({channels, channels}, channels, rng);
    w.bk = Tensor({channels});
    w.wv = init_uniform({channels, channels}, channels, rng);
    w.bv = Tensor({channels});
    w.wo = init_uniform({channels, channels}, channels, rng);
    w.bo = Tensor({channels});
    w.ln_gain = Tensor::full({channels}, 1.0);
    w.ln_bias = Tensor({channels});
    w.use_rel_bias = rel_bias;
    const int span = 2 * win - 1;
    if (rel_bias && win > 0)
        w.rel_bias = init_uniform({span * span, heads}, span * span, rng);
    return w;
}

MlpWeights make_mlp_weights(int channels, double ratio, Rng& rng) {
    const int hidden = static_cast<int>(ratio * channels);
    MlpWeights w;
    w.ln_gain = Tensor::full({channels}, 1.0);
    w.ln_bias = Tensor({channels});
    w.w1 = init_uniform({channels, hidden}, channels, rng);
    w.b1 = Tensor({hidden});
    w.w2 = init_uniform({hidden, channels}, hidden, rng);
    w.b2 = Tensor({channels});
    return w;
}

void validate_gswin_geometry(const GswinConfig& cfg, int image_size) {
    if (image_size <= 0 || cfg.patch_size <= 0 || image_size % cfg.patch_size != 0)
        throw ConfigError("image size " + std::to_string(image_size) +
                          " not divisible by patch size " + std::to_string(cfg.patch_size));
    int map = image_size / cfg.patch_size;
    for (int k = 0; k < 4; ++k) {
        const int channels = cfg.base_channels << k;
        if (map % cfg.win != 0)
            throw ConfigError("stage " + std::to_string(k + 1) + ": map extent " +
                              std::to_string(map) + " not divisible by window " +
                              std::to_string(cfg.win));
        gwg_depth(map, cfg.win);  // power-of-two ratio check
        if (channels % 2 != 0)
            throw ConfigError("stage " + std::to_string(k + 1) + ": odd channel count " +
                              std::to_string(channels));
        if (cfg.heads_per_stage[static_cast<std::size_t>(k)] <= 0 ||
            channels % cfg.heads_per_stage[static_cast<std::size_t>(k)] != 0)
            throw ConfigError("stage " + std::to_string(k + 1) + ": heads " +
                              std::to_string(cfg.heads_per_stage[static_cast<std::size_t>(k)]) +
                              " do not divide channels " + std::to_string(channels));
        if (k < 3) {
            if (map % 2 != 0)
                throw ConfigError("stage " + std::to_string(k + 1) + ": map extent " +
                                  std::to_string(map) + " not mergeable");
            map /= 2;
        }
    }
}

GswinWeights make_gswin_weights(const GswinConfig& cfg, int image_size, std::uint64_t seed) {
    validate_gswin_geometry(cfg, image_size);
    Rng rng(seed);
    GswinWeights w;
    const int c0 = cfg.base_channels;
    w.patch_proj = init_uniform({3 * cfg.patch_size * cfg.patch_size, c0},
                                3 * cfg.patch_size * cfg.patch_size, rng);
    int map = image_size / cfg.patch_size;
    for (int k = 0; k < 4; ++k) {
        const int channels = c0 << k;
        const int heads = cfg.heads_per_stage[static_cast<std::size_t>(k)];
        const int depth = gwg_depth(map, cfg.win);
        auto& stage = w.stages[static_cast<std::size_t>(k)];
        for (int b = 0; b < cfg.stage_depths[static_cast<std::size_t>(k)]; ++b) {
            GswinBlockWeights bw;
            if (cfg.gwg_share_weights && depth > 0) {
                const GwgBlockWeights shared = make_gwg_block_weights(channels, rng);
                bw.gwg.assign(static_cast<std::size_t>(depth), shared);
            } else {
                for (int g = 0; g < depth; ++g)
                    bw.gwg.push_back(make_gwg_block_weights(channels, rng));
            }
            bw.lw = make_attention_weights(channels, heads, cfg.win, cfg.rel_pos_bias, rng);
            bw.slw = make_attention_weights(channels, heads, cfg.win, cfg.rel_pos_bias, rng);
            bw.ca_local = make_attention_weights(channels, heads, 0, false, rng);
            bw.ca_shift = make_attention_weights(channels, heads, 0, false, rng);
            bw.mlp = make_mlp_weights(channels, cfg.mlp_ratio, rng);
            stage.blocks.push_back(std::move(bw));
        }
        if (k < 3) {
            stage.merge = init_uniform({4 * channels, 2 * channels}, 4 * channels, rng);
            map /= 2;
        }
    }
    w.feature_proj = init_uniform({8 * c0, cfg.proj_dim}, 8 * c0, rng);
    return w;
}

Tensor lw_msa(const Tensor& f, const AttentionWeights& w, int win, AttnStats* stats) {
    return windowed_self_attention(f, w, win, stats);
}

Tensor slw_msa(const Tensor& f, const AttentionWeights& w, int win, int shift,
               AttnStats* stats) {
    const Tensor shifted = cyclic_shift(f, -shift, -shift);
    const Tensor attended = windowed_self_attention(shifted, w, win, stats);
    return cyclic_shift(attended, shift, shift);
}

Tensor glw_ca(const Tensor& f_local, const Tensor& f_w, const AttentionWeights& w,
              AttnStats* stats) {
    Tensor out = f_local;
    add_inplace(out, glw_ca_delta(f_local, f_w, w, stats));
    return out;
}

Tensor gswin_block(const Tensor& f, const GswinConfig& cfg, const GswinBlockWeights& w,
                   AttnStats* stats) {
    const Tensor f_w = gwg_stack(f, cfg.win, w.gwg);
    const Tensor f_l = lw_msa(f, w.lw, cfg.win, stats);
    const Tensor f_sl = slw_msa(f_l, w.slw, cfg.win, cfg.effective_shift(), stats);
    // Both cross-attention branches contribute onto one residual stream.
    Tensor f_gl = f_sl;
    add_inplace(f_gl, glw_ca_delta(f_l, f_w, w.ca_local, stats));
    add_inplace(f_gl, glw_ca_delta(f_sl, f_w, w.ca_shift, stats));

    const Tensor tokens = as_rows(f_gl);
    const Tensor delta = mlp_delta(tokens, w.mlp);
    Tensor out = f_gl;
    kernels::active_ops().add(out.numel(), delta.data.data(), out.data.data());
    return out;
}

ImageEncodeResult image_encode(const Tensor& image, const GswinConfig& cfg,
                               const GswinWeights& w, EncodeDiag* diag) {
    if (image.rank() != 3 || image.shape[0] != image.shape[1])
        throw DimensionError("image_encode: image must be square HxWx3, got " +
                             image.shape_str());
    validate_gswin_geometry(cfg, image.shape[0]);
    AttnStats stats;
    Tensor x = patch_embed(image, cfg.patch_size, w.patch_proj).tokens;
    for (int k = 0; k < 4; ++k) {
        const auto& stage = w.stages[static_cast<std::size_t>(k)];
        for (const auto& block : stage.blocks) {
            x = gswin_block(x, cfg, block, &stats);
            if (diag != nullptr) ++diag->total_blocks;
        }
        if (diag != nullptr) {
            EncodeDiag::Stage s;
            s.h = x.shape[0];
            s.w = x.shape[1];
            s.c = x.shape[2];
            s.blocks = static_cast<int>(stage.blocks.size());
            s.gwg_depth = gwg_depth(x.shape[0], cfg.win);
            s.fw_h = cfg.win;
            s.fw_w = cfg.win;
            s.fw_c = x.shape[2];
            diag->stages.push_back(s);
        }
        if (k < 3) x = patch_merge(x, stage.merge);
    }
    if (diag != nullptr) {
        diag->max_attn_row_err = stats.max_row_sum_err;
        diag->attn_rows = stats.rows;
    }

    const int c_final = x.shape[2];
    Tensor pooled({1, c_final});
    if (cfg.mean_pool_feature) {
        const int tokens = x.shape[0] * x.shape[1];
        for (int t = 0; t < tokens; ++t)
            for (int ch = 0; ch < c_final; ++ch)
                pooled.at(0, ch) += x.data[static_cast<std::size_t>(t) * c_final + ch];
        for (int ch = 0; ch < c_final; ++ch) pooled.at(0, ch) /= (x.shape[0] * x.shape[1]);
    } else {
        for (int ch = 0; ch < c_final; ++ch) pooled.at(0, ch) = x.data[static_cast<std::size_t>(ch)];
    }
    Tensor feat = matmul(pooled, w.feature_proj);
    double norm = 0.0;
    for (double v : feat.data) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw NumericError("image_encode: zero feature vector");
    for (double& v : feat.data) v /= norm;
    return ImageEncodeResult{std::move(x), std::move(feat.data)};
}

}  // namespace cmr
