#include "cmr/gwg.hpp"

#include "cmr/rng.hpp"

namespace cmr {

GwgBlockWeights make_gwg_block_weights(int channels, Rng& rng) {
    if (channels % 2 != 0)
        throw DimensionError("gwg: channel count must be even, got " + std::to_string(channels));
    const int half = channels / 2;
    GwgBlockWeights w;
    w.conv1x1_a = init_uniform({1, 1, channels, half}, channels, rng);
    w.conv3x3_a = init_uniform({3, 3, half, half}, 9 * half, rng);
    w.conv3x3_b = init_uniform({3, 3, half, half}, 9 * half, rng);
    w.conv1x1_b = init_uniform({1, 1, channels, half}, channels, rng);
    w.conv1x1_c = init_uniform({1, 1, channels, channels}, channels, rng);
    return w;
}

Tensor gwg_block(const Tensor& f, const GwgBlockWeights& w) {
    if (f.rank() != 3)
        throw DimensionError("gwg_block: input must be HxWxC, got " + f.shape_str());
    const int h = f.shape[0], wd = f.shape[1], c = f.shape[2];
    if (h % 2 != 0 || wd % 2 != 0 || c % 2 != 0)
        throw DimensionError("gwg_block: extents and channels must be even, got " +
                             f.shape_str());
    Tensor x1 = conv2d(f, w.conv1x1_a, 1, 0);
    x1 = conv2d(gelu(conv2d(x1, w.conv3x3_a, 1, 1)), w.conv3x3_b, 1, 1);
    const Tensor skip = conv2d(f, w.conv1x1_b, 1, 0);

    const int half = c / 2;
    Tensor xhat({h, wd, c});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wd; ++x) {
            for (int ch = 0; ch < half; ++ch) xhat.at(y, x, ch) = x1.at(y, x, ch);
            for (int ch = 0; ch < half; ++ch) xhat.at(y, x, half + ch) = skip.at(y, x, ch);
        }
    Tensor fused = conv2d(xhat, w.conv1x1_c, 1, 0);
    add_inplace(fused, f);
    return avg_pool2x2(fused);
}

int gwg_depth(int extent, int win) {
    if (win <= 0 || extent < win)
        throw ConfigError("gwg: window " + std::to_string(win) + " exceeds extent " +
                          std::to_string(extent));
    int depth = 0;
    int e = extent;
    while (e > win && e % 2 == 0) {
        e /= 2;
        ++depth;
    }
    if (e != win)
        throw ConfigError("gwg: extent " + std::to_string(extent) + " / window " +
                          std::to_string(win) + " is not a power of two");
    return depth;
}

Tensor gwg_stack(const Tensor& f, int win, const std::vector<GwgBlockWeights>& weights) {
    if (f.rank() != 3)
        throw DimensionError("gwg_stack: input must be HxWxC, got " + f.shape_str());
    if (f.shape[0] != f.shape[1])
        throw ConfigError("gwg_stack: input must be square, got " + f.shape_str());
    const int depth = gwg_depth(f.shape[0], win);
    if (static_cast<int>(weights.size()) != depth)
        throw ConfigError("gwg_stack: need " + std::to_string(depth) + " blocks, got " +
                          std::to_string(weights.size()));
    Tensor out = f;
    for (const auto& w : weights) out = gwg_block(out, w);
    return out;
}

}  // namespace cmr
