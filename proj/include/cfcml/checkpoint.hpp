#pragma once
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cfcml/adam.hpp"
#include "cfcml/kv.hpp"
#include "cfcml/model.hpp"

namespace cfcml::trainer {

inline kv::Pairs model_config_to_kv(const ModelConfig& mc) {
    kv::Pairs p;
    p.set("mode", dataio::mode_name(mc.mode));
    p.set("m", std::to_string(mc.m));
    for (int j = 0; j < mc.m; ++j)
        p.set("image_dims." + std::to_string(j),
              kv::dims_to_string(mc.image_dims[static_cast<std::size_t>(j)]));
    p.set("t", std::to_string(mc.t));
    p.set("n_classes", std::to_string(mc.n_classes));
    p.set("base_channels", std::to_string(mc.base_channels));
    p.set("common_dim", std::to_string(mc.common_dim));
    p.set("heads", std::to_string(mc.heads));
    p.set("n_x", std::to_string(mc.n_x));
    p.set("n_t", std::to_string(mc.n_t));
    p.set("granularity", granularity_name(mc.granularity));
    p.set("mgcie", mc.mgcie_enabled ? "true" : "false");
    p.set("ccrm", mc.ccrm_enabled ? "true" : "false");
    std::string hidden;
    for (std::size_t i = 0; i < mc.classifier_hidden.size(); ++i)
        hidden += (i ? ", " : "") + std::to_string(mc.classifier_hidden[i]);
    p.set("classifier_hidden", hidden);
    p.set("dropout", kv::format_double(mc.dropout));
    return p;
}

inline ModelConfig model_config_from_kv(const kv::Pairs& p) {
    ModelConfig mc;
    mc.mode = dataio::mode_from_name(p.get("mode"));
    mc.m = static_cast<int>(kv::parse_int(p.get("m"), "m"));
    for (int j = 0; j < mc.m; ++j) {
        const std::string key = "image_dims." + std::to_string(j);
        mc.image_dims.push_back(kv::parse_dims(p.get(key), key));
    }
    mc.t = static_cast<int>(kv::parse_int(p.get("t"), "t"));
    mc.n_classes = static_cast<int>(kv::parse_int(p.get("n_classes"), "n_classes"));
    mc.base_channels = static_cast<int>(kv::parse_int(p.get("base_channels"), "base_channels"));
    mc.common_dim = static_cast<int>(kv::parse_int(p.get("common_dim"), "common_dim"));
    mc.heads = static_cast<int>(kv::parse_int(p.get("heads"), "heads"));
    mc.n_x = static_cast<int>(kv::parse_int(p.get("n_x"), "n_x"));
    mc.n_t = static_cast<int>(kv::parse_int(p.get("n_t"), "n_t"));
    mc.granularity = granularity_from_name(p.get("granularity"));
    mc.mgcie_enabled = kv::parse_bool(p.get("mgcie"), "mgcie");
    mc.ccrm_enabled = kv::parse_bool(p.get("ccrm"), "ccrm");
    mc.classifier_hidden.clear();
    for (const auto& h : kv::split_list(p.get("classifier_hidden")))
        mc.classifier_hidden.push_back(static_cast<int>(kv::parse_int(h, "classifier_hidden")));
    mc.dropout = kv::parse_double(p.get("dropout"), "dropout");
    return mc;
}

// Raises CheckpointError naming the first differing field.
inline void verify_model_config(const ModelConfig& expected, const ModelConfig& loaded) {
    kv::Pairs a = model_config_to_kv(expected);
    kv::Pairs b = model_config_to_kv(loaded);
    for (const auto& [key, value] : a.items) {
        const std::string* other = b.find(key);
        if (other == nullptr || *other != value)
            throw CheckpointError("checkpoint does not match the configured model: field '" +
                                  key + "' is '" + (other ? *other : "<missing>") +
                                  "' in the checkpoint but '" + value + "' in the configuration");
    }
}

struct Checkpoint {
    ModelConfig model;
    std::vector<std::pair<std::string, Mat>> params;
    long long opt_steps = 0;
    std::vector<Mat> opt_m, opt_v;
    int epoch = 0;
    std::string rng_state;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t x) {
    unsigned char b[4] = {static_cast<unsigned char>(x & 0xff),
                          static_cast<unsigned char>((x >> 8) & 0xff),
                          static_cast<unsigned char>((x >> 16) & 0xff),
                          static_cast<unsigned char>((x >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
inline void put_u64(std::ostream& os, std::uint64_t x) {
    put_u32(os, static_cast<std::uint32_t>(x & 0xffffffffULL));
    put_u32(os, static_cast<std::uint32_t>(x >> 32));
}
inline std::uint64_t get_u64(std::istream& is) {
    std::uint64_t lo = get_u32(is);
    std::uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}
inline void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string get_string(std::istream& is) {
    std::uint32_t n = get_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
}
inline void put_mat(std::ostream& os, const Mat& m) {
    put_u32(os, static_cast<std::uint32_t>(m.rows));
    put_u32(os, static_cast<std::uint32_t>(m.cols));
    for (double x : m.a) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, 8);
        put_u64(os, bits);
    }
}
inline Mat get_mat(std::istream& is) {
    const int rows = static_cast<int>(get_u32(is));
    const int cols = static_cast<int>(get_u32(is));
    Mat m(rows, cols);
    for (auto& x : m.a) {
        std::uint64_t bits = get_u64(is);
        std::memcpy(&x, &bits, 8);
    }
    return m;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'C', 'F', 'C', 'K'};

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for write: " + path.string());
    os.write(kCheckpointMagic, 4);
    detail::put_u32(os, 1);  // format version

    std::ostringstream cfg;
    for (const auto& [k, v] : model_config_to_kv(ckpt.model).items) cfg << k << " = " << v << "\n";
    detail::put_string(os, cfg.str());

    detail::put_u32(os, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& [name, mat] : ckpt.params) {
        detail::put_string(os, name);
        detail::put_mat(os, mat);
    }
    detail::put_u64(os, static_cast<std::uint64_t>(ckpt.opt_steps));
    detail::put_u32(os, static_cast<std::uint32_t>(ckpt.opt_m.size()));
    for (const Mat& m : ckpt.opt_m) detail::put_mat(os, m);
    for (const Mat& m : ckpt.opt_v) detail::put_mat(os, m);
    detail::put_u32(os, static_cast<std::uint32_t>(ckpt.epoch));
    detail::put_string(os, ckpt.rng_state);
    if (!os) throw IoError("checkpoint write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw CheckpointError("not a checkpoint file: " + path.string());
    const std::uint32_t version = detail::get_u32(is);
    if (version != 1)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    std::istringstream cfg(detail::get_string(is));
    ckpt.model = model_config_from_kv(kv::parse(cfg, "checkpoint-config"));

    const std::uint32_t n_params = detail::get_u32(is);
    for (std::uint32_t i = 0; i < n_params; ++i) {
        std::string name = detail::get_string(is);
        Mat m = detail::get_mat(is);
        ckpt.params.emplace_back(std::move(name), std::move(m));
    }
    ckpt.opt_steps = static_cast<long long>(detail::get_u64(is));
    const std::uint32_t n_opt = detail::get_u32(is);
    for (std::uint32_t i = 0; i < n_opt; ++i) ckpt.opt_m.push_back(detail::get_mat(is));
    for (std::uint32_t i = 0; i < n_opt; ++i) ckpt.opt_v.push_back(detail::get_mat(is));
    ckpt.epoch = static_cast<int>(detail::get_u32(is));
    ckpt.rng_state = detail::get_string(is);
    if (!is) throw CheckpointError("truncated checkpoint: " + path.string());
    return ckpt;
}

inline Checkpoint snapshot(const CfcmlModel& model_const, const Adam* opt, int epoch,
                           const std::string& rng_state) {
    auto& model = const_cast<CfcmlModel&>(model_const);
    Checkpoint ckpt;
    ckpt.model = model.cfg;
    for (Param* p : model.params()) ckpt.params.emplace_back(p->name, p->value);
    if (opt != nullptr) {
        ckpt.opt_steps = opt->steps();
        ckpt.opt_m = opt->first_moments();
        ckpt.opt_v = opt->second_moments();
    }
    ckpt.epoch = epoch;
    ckpt.rng_state = rng_state;
    return ckpt;
}

// Loads parameter values (and optimizer state when present) into a built
// model; the checkpoint's config must match exactly.
inline void restore(CfcmlModel& model, Adam* opt, const Checkpoint& ckpt) {
    verify_model_config(model.cfg, ckpt.model);
    auto& params = model.params();
    if (params.size() != ckpt.params.size())
        throw CheckpointError("checkpoint parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->name != ckpt.params[i].first)
            throw CheckpointError("checkpoint parameter order mismatch at '" +
                                  ckpt.params[i].first + "'");
        if (!params[i]->value.same_shape(ckpt.params[i].second))
            throw CheckpointError("checkpoint parameter shape mismatch at '" +
                                  ckpt.params[i].first + "'");
        params[i]->value = ckpt.params[i].second;
    }
    if (opt != nullptr && !ckpt.opt_m.empty())
        opt->restore(ckpt.opt_steps, ckpt.opt_m, ckpt.opt_v);
}

}  // namespace cfcml::trainer
