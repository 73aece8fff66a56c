#pragma once
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cfcml/blob.hpp"
#include "cfcml/errors.hpp"
#include "cfcml/kv.hpp"

namespace cfcml::dataio {

namespace fs = std::filesystem;

enum class ImageMode { Vol3D, Planar2D };

inline std::string mode_name(ImageMode m) { return m == ImageMode::Vol3D ? "3d" : "2d"; }
inline ImageMode mode_from_name(const std::string& s) {
    if (s == "3d") return ImageMode::Vol3D;
    if (s == "2d") return ImageMode::Planar2D;
    throw ConfigError("mode must be '2d' or '3d', got '" + s + "'");
}

// Ordered attribute list; names unique, at least one attribute.
struct TabularRecord {
    std::vector<std::pair<std::string, std::string>> attributes;

    int count() const { return static_cast<int>(attributes.size()); }

    void validate() const {
        if (attributes.empty()) throw InvalidDims("tabular record needs at least one attribute");
        for (std::size_t i = 0; i < attributes.size(); ++i)
            for (std::size_t j = i + 1; j < attributes.size(); ++j)
                if (attributes[i].first == attributes[j].first)
                    throw InvalidDims("duplicate attribute name '" + attributes[i].first + "'");
    }
};

struct MultimodalSample {
    std::vector<NdArray> images;  // one per image modality
    TabularRecord tabular;
    int label = -1;
    std::string id;
};

// What a dataset directory declares about itself. Layout on disk:
//   root/manifest.txt
//   root/<split>/<class>/<sample-id>/<modality>.cft
//   root/<split>/<class>/<sample-id>/tabular.tsv
struct DatasetManifest {
    fs::path root;
    ImageMode mode = ImageMode::Planar2D;
    std::vector<std::string> modalities;              // image modality names, fixed order
    std::vector<std::vector<int>> image_dims;         // per modality; channel-leading when rank > spatial rank
    std::vector<std::string> attributes;              // attribute schema, fixed order
    std::vector<std::string> classes;                 // class names; label = index
    std::vector<std::string> splits;

    int m() const { return static_cast<int>(modalities.size()); }
    int n_classes() const { return static_cast<int>(classes.size()); }
    int t() const { return static_cast<int>(attributes.size()); }

    int class_index(const std::string& name) const {
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == name) return static_cast<int>(i);
        return -1;
    }
};

inline void write_manifest(const DatasetManifest& man) {
    kv::Pairs p;
    p.set("manifest_version", "1");
    p.set("mode", mode_name(man.mode));
    std::string mods;
    for (std::size_t i = 0; i < man.modalities.size(); ++i)
        mods += (i ? ", " : "") + man.modalities[i];
    p.set("modalities", mods);
    for (std::size_t i = 0; i < man.modalities.size(); ++i)
        p.set("dims." + man.modalities[i], kv::dims_to_string(man.image_dims[i]));
    std::string attrs;
    for (std::size_t i = 0; i < man.attributes.size(); ++i)
        attrs += (i ? ", " : "") + man.attributes[i];
    p.set("attributes", attrs);
    std::string cls;
    for (std::size_t i = 0; i < man.classes.size(); ++i) cls += (i ? ", " : "") + man.classes[i];
    p.set("classes", cls);
    std::string sp;
    for (std::size_t i = 0; i < man.splits.size(); ++i) sp += (i ? ", " : "") + man.splits[i];
    p.set("splits", sp);
    kv::write_file(man.root / "manifest.txt", p);
}

inline DatasetManifest read_manifest(const fs::path& root) {
    DatasetManifest man;
    man.root = root;
    kv::Pairs p = kv::parse_file(root / "manifest.txt");
    if (p.get("manifest_version") != "1")
        throw ConfigError("unsupported manifest_version in " + (root / "manifest.txt").string());
    man.mode = mode_from_name(p.get("mode"));
    man.modalities = kv::split_list(p.get("modalities"));
    if (man.modalities.empty()) throw ConfigError("manifest declares no modalities");
    for (const auto& mod : man.modalities)
        man.image_dims.push_back(kv::parse_dims(p.get("dims." + mod), "dims." + mod));
    man.attributes = kv::split_list(p.get("attributes"));
    man.classes = kv::split_list(p.get("classes"));
    if (man.classes.size() < 1) throw ConfigError("manifest declares no classes");
    man.splits = kv::split_list(p.get("splits"));
    return man;
}

inline TabularRecord read_tabular_tsv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path.string());
    TabularRecord rec;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw CorruptBlob("tabular.tsv line without a tab: " + path.string());
        rec.attributes.emplace_back(kv::trim(line.substr(0, tab)), kv::trim(line.substr(tab + 1)));
    }
    rec.validate();
    return rec;
}

inline void write_tabular_tsv(const fs::path& path, const TabularRecord& rec) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + path.string());
    for (const auto& [name, value] : rec.attributes) os << name << "\t" << value << "\n";
}

// A fully loaded split, samples in deterministic (class, id) order.
struct Dataset {
    DatasetManifest manifest;
    std::map<std::string, std::vector<MultimodalSample>> by_split;

    const std::vector<MultimodalSample>& split(const std::string& name) const {
        auto it = by_split.find(name);
        if (it == by_split.end()) throw ConfigError("dataset has no split '" + name + "'");
        return it->second;
    }
    bool has_split(const std::string& name) const { return by_split.count(name) > 0; }

    std::vector<int> labels(const std::string& name) const {
        std::vector<int> out;
        for (const auto& s : split(name)) out.push_back(s.label);
        return out;
    }
};

inline MultimodalSample load_sample(const DatasetManifest& man, const fs::path& dir, int label,
                                    const std::string& id) {
    MultimodalSample s;
    s.label = label;
    s.id = id;
    for (std::size_t j = 0; j < man.modalities.size(); ++j) {
        fs::path p = dir / (man.modalities[j] + ".cft");
        if (!fs::exists(p)) throw CorruptBlob("missing tensor file: " + p.string());
        NdArray t = blob::read_file(p);
        if (t.dims != man.image_dims[j])
            throw CorruptBlob("tensor dims mismatch manifest for " + p.string());
        if (!std::all_of(t.v.begin(), t.v.end(), [](double x) { return std::isfinite(x); }))
            throw CorruptBlob("non-finite values in " + p.string());
        s.images.push_back(std::move(t));
    }
    s.tabular = read_tabular_tsv(dir / "tabular.tsv");
    if (s.tabular.count() != man.t())
        throw CorruptBlob("attribute count mismatch manifest in " + dir.string());
    for (int i = 0; i < s.tabular.count(); ++i)
        if (s.tabular.attributes[i].first != man.attributes[i])
            throw CorruptBlob("attribute schema mismatch in " + dir.string());
    return s;
}

// Load every declared split eagerly. Order within a split is
// (class index, sample id) lexicographic, independent of directory iteration.
inline Dataset load_dataset(const fs::path& root) {
    Dataset ds;
    ds.manifest = read_manifest(root);
    const auto& man = ds.manifest;
    for (const auto& split : man.splits) {
        std::vector<MultimodalSample> samples;
        for (std::size_t ci = 0; ci < man.classes.size(); ++ci) {
            fs::path cls_dir = root / split / man.classes[ci];
            if (!fs::exists(cls_dir)) continue;
            std::vector<std::string> ids;
            for (const auto& e : fs::directory_iterator(cls_dir))
                if (e.is_directory()) ids.push_back(e.path().filename().string());
            std::sort(ids.begin(), ids.end());
            for (const auto& id : ids)
                samples.push_back(load_sample(man, cls_dir / id, static_cast<int>(ci), id));
        }
        ds.by_split[split] = std::move(samples);
    }
    return ds;
}

}  // namespace cfcml::dataio
