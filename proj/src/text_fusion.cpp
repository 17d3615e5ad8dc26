#include "cmr/text_fusion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cmr/rng.hpp"

namespace cmr {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kMaskedLogit = -1e30;

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor out = matmul(x, w);
    for (int r = 0; r < out.shape[0]; ++r)
        for (int j = 0; j < out.shape[1]; ++j) out.at(r, j) += b.at(j);
    return out;
}

Tensor head_slice(const Tensor& x, int head, int dh) {
    Tensor out({x.shape[0], dh});
    for (int r = 0; r < x.shape[0]; ++r)
        for (int j = 0; j < dh; ++j) out.at(r, j) = x.at(r, head * dh + j);
    return out;
}

// Masked attention delta over already-normed queries. `key_mask` entries of 0
// are excluded from every softmax row.
Tensor attention_masked(const Tensor& q_in, const Tensor& kv_in, const AttentionWeights& w,
                        const std::vector<std::uint8_t>& key_mask, AttnStats* stats) {
    const int c = q_in.shape[1];
    if (c % w.heads != 0)
        throw ConfigError("attention: heads " + std::to_string(w.heads) +
                          " do not divide channels " + std::to_string(c));
    if (!key_mask.empty() && static_cast<int>(key_mask.size()) != kv_in.shape[0])
        throw DimensionError("attention: mask length " + std::to_string(key_mask.size()) +
                             " vs keys " + std::to_string(kv_in.shape[0]));
    const int dh = c / w.heads;
    const Tensor q = linear(q_in, w.wq, w.bq);
    const Tensor k = linear(kv_in, w.wk, w.bk);
    const Tensor v = linear(kv_in, w.wv, w.bv);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const int nq = q.shape[0], nk = k.shape[0];
    Tensor merged({nq, c});
    for (int head = 0; head < w.heads; ++head) {
        const Tensor qh = head_slice(q, head, dh);
        const Tensor kh = head_slice(k, head, dh);
        Tensor logits({nq, nk});
        for (int i = 0; i < nq; ++i)
            for (int j = 0; j < nk; ++j) {
                if (!key_mask.empty() && key_mask[static_cast<std::size_t>(j)] == 0) {
                    logits.at(i, j) = kMaskedLogit;
                    continue;
                }
                double dot = 0.0;
                for (int d = 0; d < dh; ++d) dot += qh.at(i, d) * kh.at(j, d);
                logits.at(i, j) = dot * scale;
            }
        const Tensor probs = softmax_rows(logits, 1.0);
        if (stats != nullptr) {
            for (int r = 0; r < nq; ++r) {
                double sum = 0.0;
                for (int j = 0; j < nk; ++j) sum += probs.at(r, j);
                stats->max_row_sum_err = std::max(stats->max_row_sum_err, std::abs(sum - 1.0));
                ++stats->rows;
            }
        }
        const Tensor vh = head_slice(v, head, dh);
        const Tensor out_h = matmul(probs, vh);
        for (int r = 0; r < nq; ++r)
            for (int j = 0; j < dh; ++j) merged.at(r, head * dh + j) = out_h.at(r, j);
    }
    return linear(merged, w.wo, w.bo);
}

Tensor mlp_delta(const Tensor& tokens, const MlpWeights& w) {
    const Tensor normed = layer_norm(tokens, w.ln_gain, w.ln_bias, kLnEps);
    return linear(gelu(linear(normed, w.w1, w.b1)), w.w2, w.b2);
}

std::vector<double> project_feature(const Tensor& tokens, const Tensor& proj) {
    const int c = tokens.shape[1];
    Tensor cls({1, c});
    for (int ch = 0; ch < c; ++ch) cls.at(0, ch) = tokens.at(0, ch);
    Tensor feat = matmul(cls, proj);
    double norm = 0.0;
    for (double v : feat.data) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw NumericError("text_encode: zero feature vector");
    for (double& v : feat.data) v /= norm;
    return std::move(feat.data);
}

}  // namespace

Vocabulary::Vocabulary(const std::vector<std::string>& words) : words_(words) {
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i)
        index_.emplace_back(words_[i], kReservedCount + static_cast<int>(i));
    std::sort(index_.begin(), index_.end());
    for (std::size_t i = 1; i < index_.size(); ++i)
        if (index_[i].first == index_[i - 1].first)
            throw DataError("vocabulary: duplicate token '" + index_[i].first + "'");
}

Vocabulary Vocabulary::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("vocabulary: cannot open " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    return Vocabulary(words);
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("vocabulary: cannot write " + path);
    for (const auto& w : words_) out << w << '\n';
}

int Vocabulary::id_of(const std::string& word) const {
    auto it = std::lower_bound(index_.begin(), index_.end(), std::make_pair(word, 0),
                               [](const auto& a, const auto& b) { return a.first < b.first; });
    if (it != index_.end() && it->first == word) return it->second;
    return kUnk;
}

const std::string& Vocabulary::word_of(int id) const {
    static const std::string reserved[] = {"[CLS]", "[SEP]", "[MASK]", "[PAD]", "[UNK]"};
    if (id < 0 || id >= size()) throw DataError("vocabulary: id out of range " + std::to_string(id));
    if (id < kReservedCount) return reserved[static_cast<std::size_t>(id)];
    return words_[static_cast<std::size_t>(id - kReservedCount)];
}

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab, int n_t) {
    if (n_t < 2) throw ParameterError("tokenize: n_t must be at least 2");
    if (vocab.content_size() == 0) throw ConfigError("tokenize: empty vocabulary");
    std::string lowered = text;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    std::istringstream stream(lowered);
    std::vector<int> ids;
    ids.push_back(Vocabulary::kCls);
    std::string word;
    while (stream >> word && static_cast<int>(ids.size()) < n_t - 1)
        ids.push_back(vocab.id_of(word));
    ids.push_back(Vocabulary::kSep);
    while (static_cast<int>(ids.size()) < n_t) ids.push_back(Vocabulary::kPad);
    return ids;
}

Tensor embed_tokens(const std::vector<int>& ids, const Tensor& token_emb, const Tensor& pos_emb) {
    const int n = static_cast<int>(ids.size());
    const int c = token_emb.shape[1];
    if (pos_emb.shape[0] < n || pos_emb.shape[1] != c)
        throw DimensionError("embed_tokens: positional table " + pos_emb.shape_str() +
                             " too small for sequence " + std::to_string(n));
    Tensor out({n, c});
    for (int t = 0; t < n; ++t) {
        const int id = ids[static_cast<std::size_t>(t)];
        if (id < 0 || id >= token_emb.shape[0])
            throw DataError("embed_tokens: id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(token_emb.shape[0]));
        for (int ch = 0; ch < c; ++ch)
            out.at(t, ch) = token_emb.at(id, ch) + pos_emb.at(t, ch);
    }
    return out;
}

Tensor tokenize_embed(const std::string& text, const Vocabulary& vocab, const Tensor& token_emb,
                      const Tensor& pos_emb, int n_t) {
    return embed_tokens(tokenize(text, vocab, n_t), token_emb, pos_emb);
}

std::vector<std::uint8_t> padding_mask(const std::vector<int>& ids) {
    std::vector<std::uint8_t> mask(ids.size(), 1);
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (ids[i] == Vocabulary::kPad) mask[i] = 0;
    return mask;
}

TextWeights make_text_weights(const TextConfig& cfg, int vocab_size, std::uint64_t seed) {
    if (cfg.channels % cfg.heads != 0)
        throw ConfigError("text: heads " + std::to_string(cfg.heads) +
                          " do not divide channels " + std::to_string(cfg.channels));
    Rng rng(seed);
    TextWeights w;
    w.token_emb = init_uniform({vocab_size, cfg.channels}, cfg.channels, rng);
    w.pos_emb = init_uniform({cfg.n_t, cfg.channels}, cfg.channels, rng);
    for (int l = 0; l < cfg.layers; ++l) {
        EncoderLayerWeights lw;
        lw.attn = make_attention_weights(cfg.channels, cfg.heads, 0, false, rng);
        lw.mlp = make_mlp_weights(cfg.channels, cfg.mlp_ratio, rng);
        w.layers.push_back(std::move(lw));
    }
    w.feature_proj = init_uniform({cfg.channels, cfg.proj_dim}, cfg.channels, rng);
    return w;
}

FusionWeights make_fusion_weights(const TextConfig& cfg, int image_channels, int vocab_size,
                                  std::uint64_t seed) {
    Rng rng(seed);
    FusionWeights w;
    w.img_proj = init_uniform({image_channels, cfg.channels}, image_channels, rng);
    for (int l = 0; l < cfg.fusion_layers; ++l) {
        FusionLayerWeights lw;
        lw.self_attn = make_attention_weights(cfg.channels, cfg.heads, 0, false, rng);
        lw.cross_attn = make_attention_weights(cfg.channels, cfg.heads, 0, false, rng);
        lw.mlp = make_mlp_weights(cfg.channels, cfg.mlp_ratio, rng);
        w.layers.push_back(std::move(lw));
    }
    w.itm_w = init_uniform({cfg.channels}, cfg.channels, rng);
    w.itm_b = 0.0;
    w.mlm_w = init_uniform({cfg.channels, vocab_size}, cfg.channels, rng);
    w.mlm_b = Tensor({vocab_size});
    return w;
}

TextEncodeResult text_encode(const Tensor& v, const TextWeights& w,
                             const std::vector<std::uint8_t>& mask, AttnStats* stats) {
    if (v.rank() != 2)
        throw DimensionError("text_encode: input must be N_T x C, got " + v.shape_str());
    Tensor x = v;
    for (const auto& layer : w.layers) {
        const Tensor normed = layer_norm(x, layer.attn.ln_gain, layer.attn.ln_bias, kLnEps);
        add_inplace(x, attention_masked(normed, normed, layer.attn, mask, stats));
        add_inplace(x, mlp_delta(x, layer.mlp));
    }
    std::vector<double> feature = project_feature(x, w.feature_proj);
    return TextEncodeResult{std::move(x), std::move(feature)};
}

Tensor project_image_tokens(const Tensor& tokens, const FusionWeights& w) {
    Tensor flat = tokens;
    if (tokens.rank() == 3)
        flat = Tensor({tokens.shape[0] * tokens.shape[1], tokens.shape[2]}, tokens.data);
    if (flat.rank() != 2)
        throw DimensionError("project_image_tokens: expected token matrix, got " +
                             tokens.shape_str());
    return matmul(flat, w.img_proj);
}

MmEncodeResult mm_encode(const Tensor& img_tokens, const Tensor& txt_tokens,
                         const FusionWeights& w, const std::vector<std::uint8_t>& txt_mask,
                         AttnStats* stats) {
    if (img_tokens.rank() != 2 || txt_tokens.rank() != 2)
        throw DimensionError("mm_encode: token inputs must be matrices, got " +
                             img_tokens.shape_str() + " and " + txt_tokens.shape_str());
    if (img_tokens.shape[1] != txt_tokens.shape[1])
        throw DimensionError("mm_encode: width mismatch " + img_tokens.shape_str() + " vs " +
                             txt_tokens.shape_str());
    Tensor x = txt_tokens;
    for (const auto& layer : w.layers) {
        const Tensor self_normed =
            layer_norm(x, layer.self_attn.ln_gain, layer.self_attn.ln_bias, kLnEps);
        add_inplace(x, attention_masked(self_normed, self_normed, layer.self_attn, txt_mask,
                                        stats));
        const Tensor cross_normed =
            layer_norm(x, layer.cross_attn.ln_gain, layer.cross_attn.ln_bias, kLnEps);
        add_inplace(x, attention_masked(cross_normed, img_tokens, layer.cross_attn, {}, stats));
        add_inplace(x, mlp_delta(x, layer.mlp));
    }
    double logit = w.itm_b;
    for (int ch = 0; ch < x.shape[1]; ++ch) logit += x.at(0, ch) * w.itm_w.at(ch);
    const double prob = 1.0 / (1.0 + std::exp(-logit));
    return MmEncodeResult{std::move(x), prob};
}

Tensor mlm_logits(const Tensor& fused, const FusionWeights& w) {
    Tensor logits = matmul(fused, w.mlm_w);
    for (int r = 0; r < logits.shape[0]; ++r)
        for (int j = 0; j < logits.shape[1]; ++j) logits.at(r, j) += w.mlm_b.at(j);
    return logits;
}

MaskedText mlm_mask(const std::vector<int>& ids, double p, std::uint64_t seed, int vocab_size) {
    if (!(p > 0.0) || !(p < 1.0))
        throw ParameterError("mlm_mask: probability must lie in (0,1), got " + std::to_string(p));
    if (vocab_size <= Vocabulary::kReservedCount)
        throw ConfigError("mlm_mask: vocabulary has no content tokens");
    Rng rng(seed);
    MaskedText out;
    out.ids = ids;
    out.flags.assign(ids.size(), 0);
    out.labels.assign(ids.size(), -1);
    const int content = vocab_size - Vocabulary::kReservedCount;
    for (std::size_t t = 0; t < ids.size(); ++t) {
        if (ids[t] < Vocabulary::kReservedCount) continue;
        if (rng.uniform01() >= p) continue;
        out.flags[t] = 1;
        out.labels[t] = ids[t];
        const double u = rng.uniform01();
        if (u < 0.8) {
            out.ids[t] = Vocabulary::kMask;
        } else if (u < 0.9) {
            out.ids[t] = Vocabulary::kReservedCount +
                         static_cast<int>(rng.below(static_cast<std::uint64_t>(content)));
        }
        // else: keep the original token
    }
    return out;
}

}  // namespace cmr
