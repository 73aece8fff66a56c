#pragma once
#include <cmath>
#include <string>
#include <vector>

#include "cfcml/graph.hpp"

namespace cfcml::mgcie {

// Learned linear map across the token axis: y = W x (+ b per output token,
// broadcast over channels). W is (target_tokens x source_tokens).
struct TokenMap {
    Param weight;
    Param bias;
    bool use_bias = true;

    void init(const std::string& name, int target, int source, RngStream& rng, bool with_bias) {
        const double bound = std::sqrt(3.0 / static_cast<double>(source));
        weight = Param(name + ".w", Mat::uniform(target, source, -bound, bound, rng));
        use_bias = with_bias;
        if (with_bias) bias = Param(name + ".b", Mat::zeros(target, 1));
    }

    // near-selector. `block` picks which source block of size `target`
    // starts as the identity; everything else starts near zero.
    void init_selector(const std::string& name, int target, int source, int block,
                       double noise, RngStream& rng, bool with_bias) {
        Mat w = noise > 0.0 ? Mat::uniform(target, source, -noise, noise, rng)
                            : Mat::zeros(target, source);
        for (int i = 0; i < target; ++i) {
            const int j = block * target + i;
            if (j < source) w(i, j) += 1.0;
        }
        weight = Param(name + ".w", std::move(w));
        use_bias = with_bias;
        if (with_bias) bias = Param(name + ".b", Mat::zeros(target, 1));
    }

    int target_tokens() const { return weight.value.rows; }
    int source_tokens() const { return weight.value.cols; }

    std::vector<Param*> params() {
        std::vector<Param*> out{&weight};
        if (use_bias) out.push_back(&bias);
        return out;
    }

    Var apply(Graph& g, Var x) {
        if (x.rows() != source_tokens())
            throw ShapeError("token map expects " + std::to_string(source_tokens()) +
                             " tokens, got " + std::to_string(x.rows()));
        Var y = g.matmul(g.param(weight), x);
        if (use_bias) y = g.col_bias(y, g.param(bias));
        return y;
    }
};

// Adapter for one (modality, granularity): flatten is already done upstream
// (tokens arrive row-major over spatial positions), so this is the channel
// projection to C_d followed by the token-count map.
struct TokenAdapter {
    Param fc_weight;  // (source_channels x C_d)
    Param fc_bias;    // (1 x C_d)
    TokenMap token_map;

    void init(const std::string& name, int source_tokens, int source_channels, int target_tokens,
              int common_dim, RngStream& rng) {
        const double bound = std::sqrt(3.0 / static_cast<double>(source_channels));
        fc_weight = Param(name + ".fc.w",
                          Mat::uniform(source_channels, common_dim, -bound, bound, rng));
        fc_bias = Param(name + ".fc.b", Mat::zeros(1, common_dim));
        token_map.init(name + ".tok", target_tokens, source_tokens, rng, true);
    }

    int source_tokens() const { return token_map.source_tokens(); }
    int source_channels() const { return fc_weight.value.rows; }
    int target_tokens() const { return token_map.target_tokens(); }
    int common_dim() const { return fc_weight.value.cols; }

    std::vector<Param*> params() {
        std::vector<Param*> out{&fc_weight, &fc_bias};
        for (auto* p : token_map.params()) out.push_back(p);
        return out;
    }

    // feature: (source_tokens x source_channels) -> (target_tokens x C_d)
    Var adapt(Graph& g, Var feature) {
        if (feature.rows() != source_tokens() || feature.cols() != source_channels())
            throw_shape_mismatch(feature);
        Var projected = g.row_bias(g.matmul(feature, g.param(fc_weight)), g.param(fc_bias));
        return token_map.apply(g, projected);
    }

    // the channel projection alone, for tests of the identity token map
    Var project_channels(Graph& g, Var feature) {
        return g.row_bias(g.matmul(feature, g.param(fc_weight)), g.param(fc_bias));
    }

private:
    void throw_shape_mismatch(Var feature) const {
        throw ShapeError("adapter expects (" + std::to_string(source_tokens()) + " x " +
                         std::to_string(source_channels()) + "), got (" +
                         std::to_string(feature.rows()) + " x " + std::to_string(feature.cols()) +
                         ")");
    }
};

// Q/K/V projections for one (granularity, primary modality).
struct CrossAttentionParams {
    Param wq, wk, wv;  // each (C_d x C_d)
    int heads = 1;

    void init(const std::string& name, int common_dim, int n_heads, RngStream& rng) {
        if (n_heads < 1) throw ShapeError("head count must be >= 1");
        if (common_dim % n_heads != 0)
            throw ShapeError("common dim " + std::to_string(common_dim) +
                             " not divisible by heads " + std::to_string(n_heads));
        const double bound = std::sqrt(3.0 / static_cast<double>(common_dim));
        wq = Param(name + ".wq", Mat::uniform(common_dim, common_dim, -bound, bound, rng));
        wk = Param(name + ".wk", Mat::uniform(common_dim, common_dim, -bound, bound, rng));
        wv = Param(name + ".wv", Mat::uniform(common_dim, common_dim, -bound, bound, rng));
        heads = n_heads;
    }

    std::vector<Param*> params() { return {&wq, &wk, &wv}; }
};

struct AttentionResult {
    Var supplement;                 // (primary_tokens x C_d)
    std::vector<Var> head_weights;  // per head (primary_tokens x aux_tokens), rows sum to 1
};

// Scaled-dot cross-attention: the primary sequence queries the auxiliary
// sequence; keys and values both come from the auxiliary side. Scale is
// 1/sqrt(C_d / N_h) per head; heads are column-splits re-concatenated.
inline AttentionResult multihead_cross_attention(Graph& g, Var primary, Var auxiliary,
                                                 CrossAttentionParams& params) {
    const int cd = primary.cols();
    if (auxiliary.cols() != cd)
        throw ShapeError("cross-attention: primary and auxiliary channel dims differ");
    if (params.wq.value.rows != cd)
        throw ShapeError("cross-attention: projections sized for a different channel dim");
    if (cd % params.heads != 0)
        throw ShapeError("cross-attention: channel dim not divisible by head count");
    const int dh = cd / params.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Var q = g.matmul(primary, g.param(params.wq));
    Var k = g.matmul(auxiliary, g.param(params.wk));
    Var v = g.matmul(auxiliary, g.param(params.wv));

    AttentionResult res;
    std::vector<Var> head_outputs;
    for (int h = 0; h < params.heads; ++h) {
        Var qh = g.slice_cols(q, h * dh, (h + 1) * dh);
        Var kh = g.slice_cols(k, h * dh, (h + 1) * dh);
        Var vh = g.slice_cols(v, h * dh, (h + 1) * dh);
        Var weights = g.softmax_rows(g.scale(g.matmul(qh, kh, false, true), scale));
        res.head_weights.push_back(weights);
        head_outputs.push_back(g.matmul(weights, vh));
    }
    res.supplement = params.heads == 1 ? head_outputs[0] : g.concat_cols(head_outputs);
    return res;
}

// One granularity of crossmodal information enhancement: in turn, each
// sequence is the primary and the token-concatenation of all the others is
// the auxiliary; the supplement is folded back through the per-primary
// token map (2n -> n tokens).
inline std::vector<Var> cie_enhance(Graph& g, const std::vector<Var>& sequences,
                                    std::vector<CrossAttentionParams>& attention,
                                    std::vector<TokenMap>& fold_maps) {
    const int m = static_cast<int>(sequences.size());
    if (m < 2) throw ShapeError("cie_enhance needs at least two sequences");
    if (attention.size() != sequences.size() || fold_maps.size() != sequences.size())
        throw ShapeError("cie_enhance: one attention/fold parameter set per sequence required");
    std::vector<Var> enhanced;
    enhanced.reserve(sequences.size());
    for (int b = 0; b < m; ++b) {
        std::vector<Var> others;
        for (int o = 0; o < m; ++o)
            if (o != b) others.push_back(sequences[static_cast<std::size_t>(o)]);
        Var aux = others.size() == 1 ? others[0] : g.concat_rows(others);
        AttentionResult att = multihead_cross_attention(
            g, sequences[static_cast<std::size_t>(b)], aux,
            attention[static_cast<std::size_t>(b)]);
        Var folded = fold_maps[static_cast<std::size_t>(b)].apply(
            g, g.concat_rows({sequences[static_cast<std::size_t>(b)], att.supplement}));
        enhanced.push_back(folded);
    }
    return enhanced;
}

// Fuse one modality's enhanced sequences across granularities: token
// concatenation followed by a pure linear token map to the modality's
// predefined count.
inline Var fuse_multigranularity(Graph& g, const std::vector<Var>& enhanced, TokenMap& fusion) {
    if (enhanced.empty()) throw ShapeError("fuse: no granularities");
    const int cd = enhanced[0].cols();
    for (const Var& v : enhanced)
        if (v.cols() != cd) throw ShapeError("fuse: channel dim mismatch across granularities");
    Var cat = enhanced.size() == 1 ? enhanced[0] : g.concat_rows(enhanced);
    return fusion.apply(g, cat);
}

}  // namespace cfcml::mgcie
