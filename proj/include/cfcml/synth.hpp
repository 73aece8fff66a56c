#pragma once
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "cfcml/dataset.hpp"
#include "cfcml/rng.hpp"
#include "cfcml/templates.hpp"

namespace cfcml::dataio {

// Synthetic crossmodal dataset: every modality carries a class signal.
// Images get a class-positioned Gaussian blob (fine cue) plus a class
// intensity tilt (coarse cue) on a noisy background; attributes are
// class-conditional categoricals with a configurable corruption rate.
struct SynthConfig {
    int n_classes = 3;
    int per_class_train = 20;
    int per_class_val = 0;
    int per_class_test = 0;
    int modalities = 2;
    ImageMode mode = ImageMode::Planar2D;
    std::vector<int> spatial = {32, 32};  // (H,W) or (H,W,D)
    int channels = 1;
    int attributes = 4;
    std::uint64_t seed = 7;
    double attr_noise = 0.0;   // probability an attribute value is resampled uniformly
    double noise_sigma = 0.25; // additive Gaussian background
    double blob_amp = 3.0;     // fine-grained positional cue
    double tilt_amp = 0.6;     // coarse mean-intensity cue
    double blob_radius_frac = 1.0 / 6.0;  // blob radius as a fraction of the mean extent
    // attributes identify class groups (k / 2) instead of classes; the images
    // must then disambiguate within a group
    bool attr_coarse = false;
    // geometric class imbalance of the train split: class k gets
    // round(per_class_train * ratio^k) samples (>= 2); val/test stay balanced
    double train_imbalance = 1.0;
};

namespace detail {

inline std::vector<std::string> synth_attribute_names(int t) {
    static const char* table1[] = {
        "sex", "age", "management", "tumor area", "edema area", "tumor location",
        "lesion location", "lesion elevation", "level of diagnostic difficulty",
        "value of apparent diffusion coefficient"};
    std::vector<std::string> out;
    for (int i = 0; i < t; ++i) {
        if (i < 10) out.emplace_back(table1[i]);
        else out.push_back("marker " + std::to_string(i + 1));
    }
    return out;
}

inline NdArray synth_image(const SynthConfig& cfg, int klass, int modality, RngStream& rng) {
    const int spatial_rank = static_cast<int>(cfg.spatial.size());
    std::vector<int> dims;
    if (cfg.channels > 1) dims.push_back(cfg.channels);
    dims.insert(dims.end(), cfg.spatial.begin(), cfg.spatial.end());
    NdArray img(dims);

    // blob center: class determines the fraction along each axis; the class
    // order is rotated per modality so each modality has its own geometry
    const int kk = (klass + modality) % cfg.n_classes;
    std::vector<double> center(spatial_rank);
    for (int ax = 0; ax < spatial_rank; ++ax) {
        double frac = (kk + 1.0) / (cfg.n_classes + 1.0);
        frac += rng.uniform(-0.3, 0.3) / (cfg.n_classes + 1.0);
        center[ax] = frac * (cfg.spatial[ax] - 1);
    }
    double radius = 0.0;
    for (int ax = 0; ax < spatial_rank; ++ax) radius += cfg.spatial[ax];
    radius = radius / spatial_rank * cfg.blob_radius_frac;

    const double tilt =
        cfg.tilt_amp * (cfg.n_classes > 1
                            ? (2.0 * klass - (cfg.n_classes - 1)) / (cfg.n_classes - 1)
                            : 0.0);
    const double amp = cfg.blob_amp * (1.0 + 0.15 * klass);

    std::vector<int> idx(spatial_rank, 0);
    const std::size_t voxels = img.count() / (cfg.channels > 1 ? cfg.channels : 1);
    for (int c = 0; c < std::max(1, cfg.channels); ++c) {
        std::fill(idx.begin(), idx.end(), 0);
        for (std::size_t p = 0; p < voxels; ++p) {
            double d2 = 0.0;
            for (int ax = 0; ax < spatial_rank; ++ax) {
                double d = idx[ax] - center[ax];
                d2 += d * d;
            }
            double val = tilt + amp * std::exp(-d2 / (2.0 * radius * radius)) +
                         cfg.noise_sigma * rng.normal();
            img.v[static_cast<std::size_t>(c) * voxels + p] = val;
            for (int ax = spatial_rank - 1; ax >= 0; --ax) {
                if (++idx[ax] < cfg.spatial[ax]) break;
                idx[ax] = 0;
            }
        }
    }
    return img;
}

inline TabularRecord synth_tabular(const SynthConfig& cfg, int klass, RngStream& rng,
                                   const std::vector<std::string>& names) {
    TabularRecord rec;
    const int n_values = cfg.attr_coarse ? (cfg.n_classes + 1) / 2 : cfg.n_classes;
    for (int i = 0; i < cfg.attributes; ++i) {
        int v = cfg.attr_coarse ? klass / 2 : klass;
        if (cfg.attr_noise > 0.0 && rng.bernoulli(cfg.attr_noise))
            v = static_cast<int>(rng.next_below(n_values));
        std::string value;
        if (names[i] == "age") {
            value = std::to_string(30 + 20 * v + static_cast<int>(rng.next_below(10)));
        } else {
            value = "group " + std::to_string(v);
        }
        rec.attributes.emplace_back(names[i], value);
    }
    return rec;
}

}  // namespace detail

inline DatasetManifest generate_synthetic_dataset(const std::filesystem::path& root,
                                                  const SynthConfig& cfg) {
    if (cfg.n_classes < 2) throw InvalidDims("n_classes must be >= 2");
    if (cfg.per_class_train < 2) throw InvalidDims("per-class train count must be >= 2");
    if (cfg.modalities < 1) throw InvalidDims("modalities must be >= 1");
    if (cfg.attributes < 1) throw InvalidDims("attributes must be >= 1");
    const int spatial_rank = static_cast<int>(cfg.spatial.size());
    if ((cfg.mode == ImageMode::Vol3D && spatial_rank != 3) ||
        (cfg.mode == ImageMode::Planar2D && spatial_rank != 2))
        throw InvalidDims("spatial rank does not match mode");
    for (int d : cfg.spatial)
        if (d < 8) throw InvalidDims("image dimensions must be >= 8");

    DatasetManifest man;
    man.root = root;
    man.mode = cfg.mode;
    for (int j = 0; j < cfg.modalities; ++j) man.modalities.push_back("img" + std::to_string(j));
    for (int j = 0; j < cfg.modalities; ++j) {
        std::vector<int> dims;
        if (cfg.channels > 1) dims.push_back(cfg.channels);
        dims.insert(dims.end(), cfg.spatial.begin(), cfg.spatial.end());
        man.image_dims.push_back(dims);
    }
    man.attributes = detail::synth_attribute_names(cfg.attributes);
    for (int k = 0; k < cfg.n_classes; ++k) man.classes.push_back("class" + std::to_string(k));

    struct SplitSpec {
        const char* name;
        int per_class;
    };
    const SplitSpec specs[] = {{"train", cfg.per_class_train},
                               {"val", cfg.per_class_val},
                               {"test", cfg.per_class_test}};

    std::filesystem::create_directories(root);
    int split_idx = 0;
    for (const auto& spec : specs) {
        ++split_idx;
        if (spec.per_class <= 0) continue;
        man.splits.push_back(spec.name);
        for (int k = 0; k < cfg.n_classes; ++k) {
            int count = spec.per_class;
            if (std::string(spec.name) == "train" && cfg.train_imbalance != 1.0)
                count = std::max(2, static_cast<int>(std::lround(
                                        spec.per_class * std::pow(cfg.train_imbalance, k))));
            for (int i = 0; i < count; ++i) {
                char sid[16];
                std::snprintf(sid, sizeof(sid), "s%04d", i);
                std::filesystem::path dir = root / spec.name / man.classes[k] / sid;
                std::filesystem::create_directories(dir);
                RngStream tab_rng(mix_seed(cfg.seed, split_idx, k, i, 1000));
                write_tabular_tsv(dir / "tabular.tsv",
                                  detail::synth_tabular(cfg, k, tab_rng, man.attributes));
                for (int j = 0; j < cfg.modalities; ++j) {
                    RngStream img_rng(mix_seed(cfg.seed, split_idx, k, i, j));
                    blob::write_file(dir / (man.modalities[j] + ".cft"),
                                     detail::synth_image(cfg, k, j, img_rng));
                }
            }
        }
    }
    write_manifest(man);
    return man;
}

}  // namespace cfcml::dataio
