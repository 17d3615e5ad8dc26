#pragma once

#include "cmr/tensor.hpp"

namespace cmr {

// Token grid produced by patch embedding: h x w tokens of C channels, plus
// the pixel-per-patch side length it was built with.
struct PatchGrid {
    Tensor tokens;  // h x w x C
    int patch_size = 0;
};

// Splits an H x W x 3 image into non-overlapping patch_size^2 patches, each
// flattened (row-major, channel fastest) and projected by `weights`
// ((3 * patch_size^2) x C).
PatchGrid patch_embed(const Tensor& image, int patch_size, const Tensor& weights);

// Regroups h x w x C into (h/win * w/win) x win^2 x C. Windows are ordered
// row-major over the window grid; tokens row-major within each window.
Tensor window_partition(const Tensor& t, int win);

// Exact inverse of window_partition.
Tensor window_reverse(const Tensor& wt, int h, int w);

// Toroidal roll: out(y, x) = in((y - dy) mod h, (x - dx) mod w).
Tensor cyclic_shift(const Tensor& t, int dy, int dx);

// Concatenates each 2x2 neighborhood (row-major: TL, TR, BL, BR) to 4C and
// projects with `weights` (4C x 2C).
Tensor patch_merge(const Tensor& t, const Tensor& weights);

}  // namespace cmr
