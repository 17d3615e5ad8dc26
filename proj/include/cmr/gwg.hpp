#pragma once

#include <vector>

#include "cmr/tensor.hpp"

namespace cmr {

class Rng;

// One global-window-generation block. Channel widths chain so the two-path
// concat restores C channels and the residual add is shape-valid:
//   x1   = conv3x3_b( GELU( conv3x3_a( conv1x1_a(f) ) ) )     C -> C/2 -> C/2 -> C/2
//   xhat = concat(x1, conv1x1_b(f))                           C/2 || C/2 = C
//   out  = avg_pool_2x2( conv1x1_c(xhat) + f )                C -> C, halved extents
struct GwgBlockWeights {
    Tensor conv1x1_a;  // 1 x 1 x C x C/2
    Tensor conv3x3_a;  // 3 x 3 x C/2 x C/2
    Tensor conv3x3_b;  // 3 x 3 x C/2 x C/2
    Tensor conv1x1_b;  // 1 x 1 x C x C/2
    Tensor conv1x1_c;  // 1 x 1 x C x C
};

GwgBlockWeights make_gwg_block_weights(int channels, Rng& rng);

// Halves both spatial extents, preserves channels. 3x3 convolutions use zero
// padding 1 so the residual add happens at full resolution.
Tensor gwg_block(const Tensor& f, const GwgBlockWeights& w);

// Applies log2(H/win) blocks to a square H x H x C map, producing the
// win x win x C global window. Empty weight list when H == win.
Tensor gwg_stack(const Tensor& f, int win, const std::vector<GwgBlockWeights>& weights);

// Number of halving blocks needed from extent to win; configuration error
// when the ratio is not a power of two.
int gwg_depth(int extent, int win);

}  // namespace cmr
