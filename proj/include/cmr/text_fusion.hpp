#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmr/gswin.hpp"
#include "cmr/tensor.hpp"

namespace cmr {

// Whitespace-token vocabulary with five fixed reserved ids.
class Vocabulary {
public:
    static constexpr int kCls = 0;
    static constexpr int kSep = 1;
    static constexpr int kMask = 2;
    static constexpr int kPad = 3;
    static constexpr int kUnk = 4;
    static constexpr int kReservedCount = 5;

    Vocabulary() = default;
    explicit Vocabulary(const std::vector<std::string>& words);

    // One token per line; line number = id - kReservedCount.
    static Vocabulary from_file(const std::string& path);
    void save(const std::string& path) const;

    int id_of(const std::string& word) const;  // kUnk when absent
    const std::string& word_of(int id) const;
    int size() const { return kReservedCount + static_cast<int>(words_.size()); }
    int content_size() const { return static_cast<int>(words_.size()); }

private:
    std::vector<std::string> words_;
    std::vector<std::pair<std::string, int>> index_;  // sorted for lookup
};

struct MaskedText {
    std::vector<int> ids;             // after masking
    std::vector<std::uint8_t> flags;  // 1 where selected for prediction
    std::vector<int> labels;          // original id where selected, -1 elsewhere
};

struct TextConfig {
    int n_t = 32;
    int channels = 64;  // shared width of text and fusion stacks
    int layers = 6;
    int fusion_layers = 6;
    int heads = 4;
    int proj_dim = 256;
    double mlp_ratio = 4.0;
    double mlm_prob = 0.15;
};

struct EncoderLayerWeights {
    AttentionWeights attn;
    MlpWeights mlp;
};

struct TextWeights {
    Tensor token_emb;  // |V| x C
    Tensor pos_emb;    // N_T x C
    std::vector<EncoderLayerWeights> layers;
    Tensor feature_proj;  // C x proj_dim
};

struct FusionLayerWeights {
    AttentionWeights self_attn;
    AttentionWeights cross_attn;
    MlpWeights mlp;
};

struct FusionWeights {
    Tensor img_proj;  // image token channels x C
    std::vector<FusionLayerWeights> layers;
    Tensor itm_w;  // C
    double itm_b = 0.0;
    Tensor mlm_w;  // C x |V| (untied from token_emb)
    Tensor mlm_b;  // |V|
};

TextWeights make_text_weights(const TextConfig& cfg, int vocab_size, std::uint64_t seed);
FusionWeights make_fusion_weights(const TextConfig& cfg, int image_channels, int vocab_size,
                                  std::uint64_t seed);

// Lowercase whitespace tokenization: CLS + content (UNK for out-of-vocab) +
// SEP, truncated/padded to n_t.
std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab, int n_t);

// Token + learned positional embeddings for a tokenized sequence.
Tensor embed_tokens(const std::vector<int>& ids, const Tensor& token_emb, const Tensor& pos_emb);

Tensor tokenize_embed(const std::string& text, const Vocabulary& vocab, const Tensor& token_emb,
                      const Tensor& pos_emb, int n_t);

std::vector<std::uint8_t> padding_mask(const std::vector<int>& ids);  // 1 = attendable

struct TextEncodeResult {
    Tensor tokens;                // N_T x C
    std::vector<double> feature;  // unit-norm, proj_dim
};

// Pre-norm self-attention stack; feature = projected, normalized CLS token.
// `mask` marks attendable key positions (empty = all).
TextEncodeResult text_encode(const Tensor& v, const TextWeights& w,
                             const std::vector<std::uint8_t>& mask = {},
                             AttnStats* stats = nullptr);

struct MmEncodeResult {
    Tensor fused;  // N_T x C
    double itm_prob = 0.0;
};

// Fusion stack: per layer, masked text self-attention, cross-attention with
// image tokens as keys/values, MLP. itm_prob = sigmoid(linear(fused CLS)).
MmEncodeResult mm_encode(const Tensor& img_tokens, const Tensor& txt_tokens,
                         const FusionWeights& w, const std::vector<std::uint8_t>& txt_mask = {},
                         AttnStats* stats = nullptr);

// Projects h x w x C image token maps (or n x C matrices) to the fusion width.
Tensor project_image_tokens(const Tensor& tokens, const FusionWeights& w);

Tensor mlm_logits(const Tensor& fused, const FusionWeights& w);

// Independently selects non-reserved positions with probability p; selected
// positions become MASK (80%), a random content id (10%), or stay (10%).
MaskedText mlm_mask(const std::vector<int>& ids, double p, std::uint64_t seed, int vocab_size);

}  // namespace cmr
