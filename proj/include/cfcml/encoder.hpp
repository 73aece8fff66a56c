#pragma once
#include <cmath>
#include <string>
#include <vector>

#include "cfcml/graph.hpp"
#include "cfcml/shape_law.hpp"

namespace cfcml::encoders {

// Feature maps travel as (tokens x channels) matrices; tokens enumerate
// spatial positions row-major over (h, w[, d]). This fixed flattening is the
// Re operation referenced by the token adapters.
inline Mat image_to_tokens(const NdArray& img, int spatial_rank) {
    const int rank = img.rank();
    const int channels = rank > spatial_rank ? img.dims[0] : 1;
    std::size_t voxels = 1;
    for (int i = rank - spatial_rank; i < rank; ++i) voxels *= img.dims[i];
    Mat m(static_cast<int>(voxels), channels);
    for (int c = 0; c < channels; ++c)
        for (std::size_t p = 0; p < voxels; ++p)
            m(static_cast<int>(p), c) = img.v[static_cast<std::size_t>(c) * voxels + p];
    return m;
}

// index groups for block-mean pooling from `from` dims to `to` dims
inline std::vector<std::vector<int>> pooling_groups(const std::vector<int>& from,
                                                    const std::vector<int>& to) {
    const int rank = static_cast<int>(from.size());
    std::vector<int> block(rank);
    for (int ax = 0; ax < rank; ++ax) {
        if (from[ax] % to[ax] != 0)
            throw ShapeError("pooling: extent " + std::to_string(from[ax]) +
                             " not divisible by " + std::to_string(to[ax]));
        block[ax] = from[ax] / to[ax];
    }
    long long n_out = 1;
    for (int d : to) n_out *= d;
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(n_out));
    std::vector<int> out_idx(rank, 0);
    for (long long g = 0; g < n_out; ++g) {
        long long block_size = 1;
        for (int b : block) block_size *= b;
        auto& grp = groups[static_cast<std::size_t>(g)];
        grp.reserve(static_cast<std::size_t>(block_size));
        std::vector<int> off(rank, 0);
        for (long long k = 0; k < block_size; ++k) {
            long long flat = 0;
            for (int ax = 0; ax < rank; ++ax)
                flat = flat * from[ax] + (out_idx[ax] * block[ax] + off[ax]);
            grp.push_back(static_cast<int>(flat));
            for (int ax = rank - 1; ax >= 0; --ax) {
                if (++off[ax] < block[ax]) break;
                off[ax] = 0;
            }
        }
        for (int ax = rank - 1; ax >= 0; --ax) {
            if (++out_idx[ax] < to[ax]) break;
            out_idx[ax] = 0;
        }
    }
    return groups;
}

struct GranularFeatureSet {
    std::vector<Var> stages;       // 4 token matrices (tokens x C*s)
    std::vector<StageDims> dims;
};

// Four-stage encoder. Each stage is a strided filter bank: the spatial block
// that collapses into one output position is flattened and mapped linearly to
// the stage's channel count (a stride = kernel convolution), then tanh.
// Trains end-to-end.
struct MultiStageEncoder {
    StageShapeLaw law;
    int in_channels = 1;
    std::vector<int> input_spatial;
    std::vector<Param> weights;  // 4 x (block*c_in x c_out)
    std::vector<Param> biases;   // 4 x (1 x c_out)

    static long long block_size(const std::vector<int>& from, const std::vector<int>& to) {
        long long b = 1;
        for (std::size_t ax = 0; ax < from.size(); ++ax) b *= from[ax] / to[ax];
        return b;
    }

    void init(const std::string& name, RngStream& rng) {
        weights.clear();
        biases.clear();
        const auto shapes = all_stage_shapes(input_spatial, law);
        int c_prev = in_channels;
        std::vector<int> cur = input_spatial;
        for (int s = 1; s <= StageShapeLaw::n_stages; ++s) {
            const auto& tgt = shapes[static_cast<std::size_t>(s - 1)];
            const int fan_in = static_cast<int>(block_size(cur, tgt.spatial)) * c_prev;
            const int c_out = law.base_channels * s;
            const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
            weights.emplace_back(name + ".stage" + std::to_string(s) + ".w",
                                 Mat::uniform(fan_in, c_out, -bound, bound, rng));
            biases.emplace_back(name + ".stage" + std::to_string(s) + ".b", Mat::zeros(1, c_out));
            c_prev = c_out;
            cur = tgt.spatial;
        }
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (auto& w : weights) out.push_back(&w);
        for (auto& b : biases) out.push_back(&b);
        return out;
    }

    // image_tokens: (prod(input_spatial) x in_channels)
    GranularFeatureSet forward(Graph& g, Var image_tokens) const {
        const auto shapes = all_stage_shapes(input_spatial, law);
        if (image_tokens.cols() != in_channels)
            throw ShapeError("encoder: channel count mismatch");
        long long voxels = 1;
        for (int d : input_spatial) voxels *= d;
        if (image_tokens.rows() != voxels)
            throw ShapeError("encoder: token count does not match declared spatial dims");

        GranularFeatureSet out;
        out.dims = shapes;
        Var x = image_tokens;
        std::vector<int> cur = input_spatial;
        for (int s = 1; s <= StageShapeLaw::n_stages; ++s) {
            const auto& tgt = shapes[static_cast<std::size_t>(s - 1)];
            Var blocks = g.gather_concat_rows(x, pooling_groups(cur, tgt.spatial));
            cur = tgt.spatial;
            Var wv = g.param(const_cast<Param&>(weights[static_cast<std::size_t>(s - 1)]));
            Var bv = g.param(const_cast<Param&>(biases[static_cast<std::size_t>(s - 1)]));
            x = g.tanh_(g.row_bias(g.matmul(blocks, wv), bv));
            out.stages.push_back(x);
        }
        return out;
    }
};

}  // namespace cfcml::encoders
