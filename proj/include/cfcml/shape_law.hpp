#pragma once
#include <string>
#include <vector>

#include "cfcml/dataset.hpp"
#include "cfcml/errors.hpp"

namespace cfcml::encoders {

using dataio::ImageMode;

// Stage shape contract for the 4-stage image encoder.
//   channels at stage s:       C * s
//   3d spatial at stage s:     dim / 2^s
//   2d spatial at stage s:     dim / 2^(s+1)
// Each stage halves every spatial axis. An axis of 1 (or one whose final
// halving would land below 1, i.e. extent 3) saturates to 1; any other odd
// extent does not admit further halving.
struct StageShapeLaw {
    int base_channels = 4;  // C
    ImageMode mode = ImageMode::Planar2D;
    static constexpr int n_stages = 4;

    int spatial_rank() const { return mode == ImageMode::Vol3D ? 3 : 2; }
    int stage_halvings(int s) const { return mode == ImageMode::Vol3D ? s : s + 1; }
};

struct StageDims {
    int channels = 0;
    std::vector<int> spatial;

    long long tokens() const {
        long long n = 1;
        for (int d : spatial) n *= d;
        return n;
    }
    bool operator==(const StageDims& o) const = default;
};

inline int halve_extent(int dim) {
    if (dim % 2 == 0) return dim / 2;
    if (dim < 4) return 1;  // 1 stays 1; 3 pools fully
    throw ShapeError("spatial extent " + std::to_string(dim) + " does not admit halving");
}

inline int halved_extent(int dim, int n_halvings) {
    int d = dim;
    for (int i = 0; i < n_halvings; ++i) d = halve_extent(d);
    return d;
}

inline StageDims stage_shape(int s, const std::vector<int>& input_spatial,
                             const StageShapeLaw& law) {
    if (s < 1 || s > StageShapeLaw::n_stages) throw ShapeError("stage index must be in 1..4");
    if (static_cast<int>(input_spatial.size()) != law.spatial_rank())
        throw ShapeError("input spatial rank does not match encoder mode");
    StageDims out;
    out.channels = law.base_channels * s;
    for (int d : input_spatial) out.spatial.push_back(halved_extent(d, law.stage_halvings(s)));
    return out;
}

// All four stage shapes, validating the whole ladder up front.
inline std::vector<StageDims> all_stage_shapes(const std::vector<int>& input_spatial,
                                               const StageShapeLaw& law) {
    std::vector<StageDims> out;
    for (int s = 1; s <= StageShapeLaw::n_stages; ++s)
        out.push_back(stage_shape(s, input_spatial, law));
    return out;
}

}  // namespace cfcml::encoders
