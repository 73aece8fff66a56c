#pragma once
#include <algorithm>
#include <cmath>
#include <vector>

#include "cfcml/dataset.hpp"
#include "cfcml/rng.hpp"

namespace cfcml::dataio {

// Training-time image augmentation. Geometric draws (flip, crop) are shared
// across the modalities of one sample; intensity draws (noise, erase) are
// independent per modality. Label and tabular data are never touched and
// output dims always equal input dims.
struct AugmentPolicy {
    bool gaussian_noise = false;
    double sigma = 0.05;
    bool random_crop = false;
    double crop_frac = 0.1;  // fraction of each spatial extent removed
    bool random_flip = false;
    bool random_erase = false;
    double erase_frac = 0.2;  // erased box edge as fraction of extent

    bool any() const { return gaussian_noise || random_crop || random_flip || random_erase; }
};

namespace detail {

// spatial axes are the trailing `spatial_rank` dims; a leading channel dim,
// when present, is carried along untouched
inline int spatial_offset(const NdArray& t, int spatial_rank) {
    return t.rank() - spatial_rank;
}

template <typename Fn>
inline void for_each_index(const NdArray& t, Fn&& fn) {
    std::vector<int> idx(t.dims.size(), 0);
    for (std::size_t flat = 0; flat < t.count(); ++flat) {
        fn(idx, flat);
        for (int ax = t.rank() - 1; ax >= 0; --ax) {
            if (++idx[ax] < t.dims[ax]) break;
            idx[ax] = 0;
        }
    }
}

inline std::size_t flat_index(const NdArray& t, const std::vector<int>& idx) {
    std::size_t f = 0;
    for (int ax = 0; ax < t.rank(); ++ax) f = f * t.dims[ax] + idx[ax];
    return f;
}

}  // namespace detail

// Reverse one spatial axis (0-based among the spatial dims).
inline NdArray flip_axis(const NdArray& t, int spatial_axis, int spatial_rank) {
    const int ax = detail::spatial_offset(t, spatial_rank) + spatial_axis;
    NdArray out(t.dims);
    detail::for_each_index(t, [&](const std::vector<int>& idx, std::size_t flat) {
        std::vector<int> src = idx;
        src[ax] = t.dims[ax] - 1 - idx[ax];
        out.v[flat] = t.v[detail::flat_index(t, src)];
    });
    return out;
}

// Keep a box of `sizes` at `offsets` (per spatial axis), zero elsewhere.
// Equivalent to cropping and zero-padding back in place.
inline NdArray crop_zero_pad(const NdArray& t, const std::vector<int>& offsets,
                             const std::vector<int>& sizes, int spatial_rank) {
    const int off = detail::spatial_offset(t, spatial_rank);
    NdArray out(t.dims);
    detail::for_each_index(t, [&](const std::vector<int>& idx, std::size_t flat) {
        bool inside = true;
        for (int s = 0; s < spatial_rank; ++s) {
            int p = idx[off + s];
            if (p < offsets[s] || p >= offsets[s] + sizes[s]) {
                inside = false;
                break;
            }
        }
        out.v[flat] = inside ? t.v[flat] : 0.0;
    });
    return out;
}

inline NdArray erase_box(const NdArray& t, const std::vector<int>& offsets,
                         const std::vector<int>& sizes, int spatial_rank) {
    const int off = detail::spatial_offset(t, spatial_rank);
    NdArray out = t;
    detail::for_each_index(t, [&](const std::vector<int>& idx, std::size_t flat) {
        bool inside = true;
        for (int s = 0; s < spatial_rank; ++s) {
            int p = idx[off + s];
            if (p < offsets[s] || p >= offsets[s] + sizes[s]) {
                inside = false;
                break;
            }
        }
        if (inside) out.v[flat] = 0.0;
    });
    return out;
}

inline MultimodalSample augment(const MultimodalSample& sample, const AugmentPolicy& policy,
                                ImageMode mode, RngStream& rng) {
    MultimodalSample out = sample;
    if (!policy.any()) return out;
    const int spatial_rank = mode == ImageMode::Vol3D ? 3 : 2;

    // shared geometric draws
    std::vector<bool> flips(spatial_rank, false);
    if (policy.random_flip)
        for (int s = 0; s < spatial_rank; ++s) flips[s] = rng.bernoulli(0.5);
    std::vector<double> crop_pos(spatial_rank, 0.0);
    if (policy.random_crop)
        for (int s = 0; s < spatial_rank; ++s) crop_pos[s] = rng.next_double();

    for (auto& img : out.images) {
        const int off = detail::spatial_offset(img, spatial_rank);
        if (policy.random_flip)
            for (int s = 0; s < spatial_rank; ++s)
                if (flips[s]) img = flip_axis(img, s, spatial_rank);
        if (policy.random_crop) {
            std::vector<int> offsets(spatial_rank), sizes(spatial_rank);
            for (int s = 0; s < spatial_rank; ++s) {
                const int extent = img.dims[off + s];
                int keep = std::max(1, static_cast<int>(std::lround(extent * (1.0 - policy.crop_frac))));
                keep = std::min(keep, extent);
                offsets[s] = static_cast<int>(crop_pos[s] * (extent - keep + 1));
                offsets[s] = std::min(offsets[s], extent - keep);
                sizes[s] = keep;
            }
            img = crop_zero_pad(img, offsets, sizes, spatial_rank);
        }
        if (policy.random_erase) {
            std::vector<int> offsets(spatial_rank), sizes(spatial_rank);
            for (int s = 0; s < spatial_rank; ++s) {
                const int extent = img.dims[off + s];
                int len = std::max(1, static_cast<int>(std::lround(extent * policy.erase_frac)));
                len = std::min(len, extent);
                offsets[s] = static_cast<int>(rng.next_below(extent - len + 1));
                sizes[s] = len;
            }
            img = erase_box(img, offsets, sizes, spatial_rank);
        }
        if (policy.gaussian_noise && policy.sigma > 0.0)
            for (auto& v : img.v) v += policy.sigma * rng.normal();
        else if (policy.gaussian_noise)
            for (std::size_t i = 0; i < img.v.size(); ++i) rng.normal();  // keep stream aligned
    }
    return out;
}

}  // namespace cfcml::dataio
