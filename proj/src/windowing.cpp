#include "cmr/windowing.hpp"

namespace cmr {

PatchGrid patch_embed(const Tensor& image, int patch_size, const Tensor& weights) {
    if (image.rank() != 3 || image.shape[2] != 3)
        throw DimensionError("patch_embed: image must be HxWx3, got " + image.shape_str());
    if (patch_size <= 0) throw ParameterError("patch_embed: patch_size must be positive");
    const int h_px = image.shape[0], w_px = image.shape[1];
    if (h_px % patch_size != 0 || w_px % patch_size != 0)
        throw DimensionError("patch_embed: image " + std::to_string(h_px) + "x" +
                             std::to_string(w_px) + " not divisible by patch_size " +
                             std::to_string(patch_size));
    const int flat = 3 * patch_size * patch_size;
    if (weights.rank() != 2 || weights.shape[0] != flat)
        throw DimensionError("patch_embed: weights " + weights.shape_str() + " must be " +
                             std::to_string(flat) + "xC");
    const int h = h_px / patch_size, w = w_px / patch_size, c = weights.shape[1];

    // Gather all patches as rows, then one projection matmul.
    Tensor patches({h * w, flat});
    for (int py = 0; py < h; ++py)
        for (int px = 0; px < w; ++px) {
            double* row = patches.data.data() + static_cast<std::size_t>(py * w + px) * flat;
            int idx = 0;
            for (int dy = 0; dy < patch_size; ++dy)
                for (int dx = 0; dx < patch_size; ++dx)
                    for (int ch = 0; ch < 3; ++ch)
                        row[idx++] = image.at(py * patch_size + dy, px * patch_size + dx, ch);
        }
    Tensor projected = matmul(patches, weights);
    return PatchGrid{Tensor({h, w, c}, std::move(projected.data)), patch_size};
}

Tensor window_partition(const Tensor& t, int win) {
    if (t.rank() != 3)
        throw DimensionError("window_partition: input must be hxwxC, got " + t.shape_str());
    if (win <= 0) throw ParameterError("window_partition: win must be positive");
    const int h = t.shape[0], w = t.shape[1], c = t.shape[2];
    if (h % win != 0 || w % win != 0)
        throw DimensionError("window_partition: map " + t.shape_str() +
                             " not divisible by window " + std::to_string(win));
    const int nw = (h / win) * (w / win);
    Tensor out({nw, win * win, c});
    for (int wy = 0; wy < h / win; ++wy)
        for (int wx = 0; wx < w / win; ++wx) {
            const int widx = wy * (w / win) + wx;
            for (int ty = 0; ty < win; ++ty)
                for (int tx = 0; tx < win; ++tx)
                    for (int ch = 0; ch < c; ++ch)
                        out.at(widx, ty * win + tx, ch) =
                            t.at(wy * win + ty, wx * win + tx, ch);
        }
    return out;
}

Tensor window_reverse(const Tensor& wt, int h, int w) {
    if (wt.rank() != 3)
        throw DimensionError("window_reverse: input must be nw x win^2 x C, got " +
                             wt.shape_str());
    const int nw = wt.shape[0], wsq = wt.shape[1], c = wt.shape[2];
    if (static_cast<long long>(nw) * wsq != static_cast<long long>(h) * w)
        throw DimensionError("window_reverse: " + wt.shape_str() + " does not cover " +
                             std::to_string(h) + "x" + std::to_string(w));
    int win = 1;
    while (win * win < wsq) ++win;
    if (win * win != wsq || h % win != 0 || w % win != 0)
        throw DimensionError("window_reverse: window token count " + std::to_string(wsq) +
                             " incompatible with " + std::to_string(h) + "x" + std::to_string(w));
    Tensor out({h, w, c});
    for (int wy = 0; wy < h / win; ++wy)
        for (int wx = 0; wx < w / win; ++wx) {
            const int widx = wy * (w / win) + wx;
            for (int ty = 0; ty < win; ++ty)
                for (int tx = 0; tx < win; ++tx)
                    for (int ch = 0; ch < c; ++ch)
                        out.at(wy * win + ty, wx * win + tx, ch) =
                            wt.at(widx, ty * win + tx, ch);
        }
    return out;
}

Tensor cyclic_shift(const Tensor& t, int dy, int dx) {
    if (t.rank() != 3)
        throw DimensionError("cyclic_shift: input must be hxwxC, got " + t.shape_str());
    const int h = t.shape[0], w = t.shape[1], c = t.shape[2];
    const int sy = ((dy % h) + h) % h;
    const int sx = ((dx % w) + w) % w;
    if (sy == 0 && sx == 0) return t;
    Tensor out({h, w, c});
    for (int y = 0; y < h; ++y) {
        const int src_y = (y - sy + h) % h;
        for (int x = 0; x < w; ++x) {
            const int src_x = (x - sx + w) % w;
            for (int ch = 0; ch < c; ++ch) out.at(y, x, ch) = t.at(src_y, src_x, ch);
        }
    }
    return out;
}

Tensor patch_merge(const Tensor& t, const Tensor& weights) {
    if (t.rank() != 3)
        throw DimensionError("patch_merge: input must be hxwxC, got " + t.shape_str());
    const int h = t.shape[0], w = t.shape[1], c = t.shape[2];
    if (h % 2 != 0 || w % 2 != 0)
        throw DimensionError("patch_merge: extents must be even, got " + t.shape_str());
    if (weights.rank() != 2 || weights.shape[0] != 4 * c || weights.shape[1] != 2 * c)
        throw DimensionError("patch_merge: weights " + weights.shape_str() + " must be " +
                             std::to_string(4 * c) + "x" + std::to_string(2 * c));
    Tensor gathered({(h / 2) * (w / 2), 4 * c});
    for (int y = 0; y < h / 2; ++y)
        for (int x = 0; x < w / 2; ++x) {
            double* row = gathered.data.data() +
                          static_cast<std::size_t>(y * (w / 2) + x) * (4 * c);
            int idx = 0;
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx)
                    for (int ch = 0; ch < c; ++ch)
                        row[idx++] = t.at(2 * y + dy, 2 * x + dx, ch);
        }
    Tensor projected = matmul(gathered, weights);
    return Tensor({h / 2, w / 2, 2 * c}, std::move(projected.data));
}

}  // namespace cmr
