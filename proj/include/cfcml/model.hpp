#pragma once
#include <memory>
#include <string>
#include <vector>

#include "cfcml/ccrm.hpp"
#include "cfcml/dataset.hpp"
#include "cfcml/embedder.hpp"
#include "cfcml/encoder.hpp"
#include "cfcml/mgcie.hpp"
#include "cfcml/templates.hpp"

namespace cfcml::trainer {

using dataio::ImageMode;

enum class Granularity { MG, SG1, SG2, SG3, SG4 };

inline std::string granularity_name(Granularity g) {
    switch (g) {
        case Granularity::MG: return "mg";
        case Granularity::SG1: return "sg1";
        case Granularity::SG2: return "sg2";
        case Granularity::SG3: return "sg3";
        case Granularity::SG4: return "sg4";
    }
    return "mg";
}

inline Granularity granularity_from_name(const std::string& s) {
    if (s == "mg") return Granularity::MG;
    if (s == "sg1") return Granularity::SG1;
    if (s == "sg2") return Granularity::SG2;
    if (s == "sg3") return Granularity::SG3;
    if (s == "sg4") return Granularity::SG4;
    throw ConfigError("granularity must be one of mg, sg1..sg4; got '" + s + "'");
}

// Structural description of one model. Everything here is checked against
// checkpoints on load.
struct ModelConfig {
    ImageMode mode = ImageMode::Planar2D;
    int m = 1;                                 // image modalities
    std::vector<std::vector<int>> image_dims;  // per modality, channel-leading when rank>spatial
    int t = 1;                                 // tabular attributes
    int n_classes = 2;

    int base_channels = 8;  // C
    int common_dim = 16;    // C_d
    int heads = 2;          // N_h
    int n_x = 8;            // predefined image token count
    int n_t = 6;            // predefined tabular token count
    Granularity granularity = Granularity::MG;
    bool mgcie_enabled = true;
    bool ccrm_enabled = true;
    std::vector<int> classifier_hidden = {64};
    double dropout = 0.5;

    int total_modalities() const { return m + 1; }

    // encoder stages that carry adapters (and CIE when enabled)
    std::vector<int> active_stages() const {
        if (!mgcie_enabled) return {4};
        switch (granularity) {
            case Granularity::MG: return {1, 2, 3, 4};
            case Granularity::SG1: return {1};
            case Granularity::SG2: return {2};
            case Granularity::SG3: return {3};
            case Granularity::SG4: return {4};
        }
        return {1, 2, 3, 4};
    }

    int tokens_for(int modality_slot) const { return modality_slot < m ? n_x : n_t; }

    void validate() const {
        if (m < 1) throw ConfigError("model needs at least one image modality");
        if (static_cast<int>(image_dims.size()) != m)
            throw ConfigError("image_dims must list one shape per modality");
        if (t < 1) throw ConfigError("model needs at least one tabular attribute");
        if (n_classes < 2) throw ConfigError("model needs at least two classes");
        if (common_dim < 1 || heads < 1 || common_dim % heads != 0)
            throw ConfigError("common_dim must be positive and divisible by heads");
        if (n_x < 1 || n_t < 1) throw ConfigError("token counts must be positive");
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
        if (base_channels < 1) throw ConfigError("base_channels must be positive");
    }
};

struct ForwardResult {
    Var logits;                            // batch x n_classes
    std::vector<std::vector<Var>> pooled;  // [sample][modality slot] 1 x C_d
};

// The assembled network. Parameter layout is fixed by the config, so two
// models built from the same (config, seed) are identical.
class CfcmlModel {
public:
    ModelConfig cfg;
    dataio::TemplateTable templates = dataio::TemplateTable::builtin();
    std::shared_ptr<const encoders::TabularEmbedder> embedder =
        std::make_shared<encoders::HashEmbedder>();

    CfcmlModel(ModelConfig config, std::uint64_t seed) : cfg(std::move(config)) {
        cfg.validate();
        build(seed);
    }

    std::vector<Param*>& params() { return params_; }

    std::uint64_t param_hash() const {
        std::uint64_t h = 14695981039346656037ULL;
        for (const Param* p : params_) {
            h = fnv1a64(p->name, h);
            h = fnv1a64(p->value.a.data(), p->value.a.size() * sizeof(double), h);
        }
        return h;
    }

    // spatial dims (channel dim stripped) of one modality
    std::vector<int> modality_spatial(int j) const {
        const auto& dims = cfg.image_dims[static_cast<std::size_t>(j)];
        const int spatial_rank = cfg.mode == ImageMode::Vol3D ? 3 : 2;
        std::vector<int> out(dims.end() - spatial_rank, dims.end());
        return out;
    }
    int modality_channels(int j) const {
        const auto& dims = cfg.image_dims[static_cast<std::size_t>(j)];
        const int spatial_rank = cfg.mode == ImageMode::Vol3D ? 3 : 2;
        return static_cast<int>(dims.size()) > spatial_rank ? dims[0] : 1;
    }

    ForwardResult forward(Graph& g, const std::vector<const dataio::MultimodalSample*>& batch,
                          bool training, RngStream* dropout_rng) {
        if (batch.empty()) throw ShapeError("forward: empty batch");
        const auto stages = cfg.active_stages();
        const int M = cfg.total_modalities();
        const int spatial_rank = cfg.mode == ImageMode::Vol3D ? 3 : 2;

        ForwardResult res;
        std::vector<Var> logit_rows;
        for (const dataio::MultimodalSample* sample : batch) {
            if (static_cast<int>(sample->images.size()) != cfg.m)
                throw ShapeError("sample has wrong image modality count");

            // adapted token sequences per modality slot per active stage
            std::vector<std::vector<Var>> adapted(static_cast<std::size_t>(M));
            for (int j = 0; j < cfg.m; ++j) {
                Var tokens = g.constant(
                    encoders::image_to_tokens(sample->images[static_cast<std::size_t>(j)],
                                              spatial_rank));
                auto feats = encoders_[static_cast<std::size_t>(j)].forward(g, tokens);
                for (std::size_t si = 0; si < stages.size(); ++si)
                    adapted[static_cast<std::size_t>(j)].push_back(
                        image_adapters_[static_cast<std::size_t>(j)][si].adapt(
                            g, feats.stages[static_cast<std::size_t>(stages[si] - 1)]));
            }
            // TODO: cache per-sample sentence embeddings across epochs; the
            // frozen embedder makes them constants of the dataset
            Var tab = g.constant(encoders::embed_tabular(sample->tabular, templates, *embedder));
            Var tab_adapted = tab_adapter_.adapt(g, tab);
            for (std::size_t si = 0; si < stages.size(); ++si)
                adapted[static_cast<std::size_t>(M - 1)].push_back(tab_adapted);

            // per-granularity enhancement, then per-modality fusion
            std::vector<Var> fused(static_cast<std::size_t>(M));
            if (cfg.mgcie_enabled) {
                std::vector<std::vector<Var>> enhanced(stages.size());
                for (std::size_t si = 0; si < stages.size(); ++si) {
                    std::vector<Var> seqs;
                    for (int b = 0; b < M; ++b)
                        seqs.push_back(adapted[static_cast<std::size_t>(b)][si]);
                    enhanced[si] =
                        mgcie::cie_enhance(g, seqs, cie_attention_[si], cie_fold_[si]);
                }
                for (int b = 0; b < M; ++b) {
                    std::vector<Var> per_gran;
                    for (std::size_t si = 0; si < stages.size(); ++si)
                        per_gran.push_back(enhanced[si][static_cast<std::size_t>(b)]);
                    fused[static_cast<std::size_t>(b)] = mgcie::fuse_multigranularity(
                        g, per_gran, fusion_[static_cast<std::size_t>(b)]);
                }
            } else {
                for (int b = 0; b < M; ++b)
                    fused[static_cast<std::size_t>(b)] = adapted[static_cast<std::size_t>(b)][0];
            }

            std::vector<Var> pooled;
            for (int b = 0; b < M; ++b)
                pooled.push_back(ccrm::pool_tokens(g, fused[static_cast<std::size_t>(b)]));
            res.pooled.push_back(pooled);

            Var concat = g.concat_cols(pooled);
            if (training && cfg.dropout > 0.0) {
                if (dropout_rng == nullptr)
                    throw ShapeError("training forward needs a dropout rng");
                Mat mask(1, concat.cols());
                const double keep = 1.0 - cfg.dropout;
                for (int i = 0; i < concat.cols(); ++i)
                    mask(0, i) = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
                concat = g.cmul(concat, g.constant(mask));
            }
            logit_rows.push_back(classify(g, concat));
        }
        res.logits = logit_rows.size() == 1 ? logit_rows[0] : g.concat_rows(logit_rows);
        return res;
    }

private:
    std::vector<encoders::MultiStageEncoder> encoders_;
    mgcie::TokenAdapter tab_adapter_;
    std::vector<std::vector<mgcie::TokenAdapter>> image_adapters_;  // [modality][stage idx]
    std::vector<std::vector<mgcie::CrossAttentionParams>> cie_attention_;  // [stage idx][slot]
    std::vector<std::vector<mgcie::TokenMap>> cie_fold_;                   // [stage idx][slot]
    std::vector<mgcie::TokenMap> fusion_;                                  // [slot]
    std::vector<Param> classifier_w_, classifier_b_;
    std::vector<Param*> params_;

    Var classify(Graph& g, Var x) {
        Var h = x;
        for (std::size_t l = 0; l < classifier_w_.size(); ++l) {
            h = g.row_bias(g.matmul(h, g.param(classifier_w_[l])), g.param(classifier_b_[l]));
            if (l + 1 < classifier_w_.size()) h = g.tanh_(h);
        }
        return h;
    }

    void build(std::uint64_t seed) {
        RngStream rng(mix_seed(seed, 0x10de1));
        const auto stages = cfg.active_stages();
        const int M = cfg.total_modalities();

        for (int j = 0; j < cfg.m; ++j) {
            encoders::MultiStageEncoder enc;
            enc.law = encoders::StageShapeLaw{cfg.base_channels, cfg.mode};
            enc.in_channels = modality_channels(j);
            enc.input_spatial = modality_spatial(j);
            enc.init("enc" + std::to_string(j), rng);
            // validates admissibility of the declared dims
            encoders::all_stage_shapes(enc.input_spatial, enc.law);
            encoders_.push_back(std::move(enc));
        }

        tab_adapter_.init("adapter.tab", cfg.t, encoders::kEmbedDim, cfg.n_t, cfg.common_dim,
                          rng);

        image_adapters_.resize(static_cast<std::size_t>(cfg.m));
        for (int j = 0; j < cfg.m; ++j) {
            for (int s : stages) {
                auto sd = encoders::stage_shape(
                    s, modality_spatial(j),
                    encoders::StageShapeLaw{cfg.base_channels, cfg.mode});
                mgcie::TokenAdapter ad;
                ad.init("adapter.img" + std::to_string(j) + ".g" + std::to_string(s),
                        static_cast<int>(sd.tokens()), sd.channels, cfg.n_x, cfg.common_dim, rng);
                image_adapters_[static_cast<std::size_t>(j)].push_back(std::move(ad));
            }
        }

        if (cfg.mgcie_enabled) {
            cie_attention_.resize(stages.size());
            cie_fold_.resize(stages.size());
            for (std::size_t si = 0; si < stages.size(); ++si) {
                for (int b = 0; b < M; ++b) {
                    const std::string base = "cie.g" + std::to_string(stages[si]) + ".slot" +
                                             std::to_string(b);
                    mgcie::CrossAttentionParams att;
                    att.init(base, cfg.common_dim, cfg.heads, rng);
                    cie_attention_[si].push_back(std::move(att));
                    const int n = cfg.tokens_for(b);
                    mgcie::TokenMap fold;
                    // keep-primary start: primary block identity, supplement small
                    fold.init_selector(base + ".fold", n, 2 * n, 0, 0.01, rng, true);
                    cie_fold_[si].push_back(std::move(fold));
                }
            }
            for (int b = 0; b < M; ++b) {
                const int n = cfg.tokens_for(b);
                mgcie::TokenMap fuse;
                fuse.init("fuse.slot" + std::to_string(b), n,
                          static_cast<int>(stages.size()) * n, rng, false);
                fusion_.push_back(std::move(fuse));
            }
        }

        int in_dim = M * cfg.common_dim;
        std::vector<int> layer_sizes = cfg.classifier_hidden;
        layer_sizes.push_back(cfg.n_classes);
        for (std::size_t l = 0; l < layer_sizes.size(); ++l) {
            const int out_dim = layer_sizes[l];
            const double bound = std::sqrt(3.0 / static_cast<double>(in_dim));
            classifier_w_.emplace_back("clf." + std::to_string(l) + ".w",
                                       Mat::uniform(in_dim, out_dim, -bound, bound, rng));
            classifier_b_.emplace_back("clf." + std::to_string(l) + ".b", Mat::zeros(1, out_dim));
            in_dim = out_dim;
        }

        // fixed registration order defines checkpoint and optimizer layout
        for (auto& enc : encoders_)
            for (Param* p : enc.params()) params_.push_back(p);
        for (Param* p : tab_adapter_.params()) params_.push_back(p);
        for (auto& per_mod : image_adapters_)
            for (auto& ad : per_mod)
                for (Param* p : ad.params()) params_.push_back(p);
        for (std::size_t si = 0; si < cie_attention_.size(); ++si) {
            for (auto& att : cie_attention_[si])
                for (Param* p : att.params()) params_.push_back(p);
            for (auto& fold : cie_fold_[si])
                for (Param* p : fold.params()) params_.push_back(p);
        }
        for (auto& fuse : fusion_)
            for (Param* p : fuse.params()) params_.push_back(p);
        for (std::size_t l = 0; l < classifier_w_.size(); ++l) {
            params_.push_back(&classifier_w_[l]);
            params_.push_back(&classifier_b_[l]);
        }
    }
};

}  // namespace cfcml::trainer
