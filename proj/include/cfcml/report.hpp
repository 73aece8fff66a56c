#pragma once
#include <string>

#include "cfcml/kv.hpp"
#include "cfcml/metrics.hpp"

namespace cfcml::metrics {

// Reports are flat key = value text; absent metrics are omitted entirely.
inline kv::Pairs eval_report_to_kv(const EvalReport& rep) {
    kv::Pairs p;
    p.set("report_version", "1");
    p.set("kind", "eval");
    if (!rep.config_digest.empty()) p.set("config_digest", rep.config_digest);
    p.set("n", std::to_string(rep.n));
    for (std::size_t c = 0; c < rep.class_support.size(); ++c)
        p.set("support." + std::to_string(c), std::to_string(rep.class_support[c]));
    p.set("acc", kv::format_double(rep.acc));
    for (std::size_t c = 0; c < rep.per_class_acc.size(); ++c)
        if (rep.per_class_acc[c])
            p.set("per_class_acc." + std::to_string(c), kv::format_double(*rep.per_class_acc[c]));
    p.set("weighted_f1", kv::format_double(rep.weighted_f1));
    p.set("macro_f1", kv::format_double(rep.macro_f1));
    if (rep.auc_macro_ovr) p.set("auc_macro_ovr", kv::format_double(*rep.auc_macro_ovr));
    if (rep.sen) p.set("sen", kv::format_double(*rep.sen));
    if (rep.spe) p.set("spe", kv::format_double(*rep.spe));
    if (rep.g_mean) p.set("g_mean", kv::format_double(*rep.g_mean));
    if (rep.ba_acc) p.set("ba_acc", kv::format_double(*rep.ba_acc));
    if (rep.auprc) p.set("auprc", kv::format_double(*rep.auprc));
    if (rep.auc) p.set("auc", kv::format_double(*rep.auc));
    return p;
}

inline EvalReport eval_report_from_kv(const kv::Pairs& p) {
    if (p.get("kind") != "eval") throw ConfigError("not an eval report");
    EvalReport rep;
    rep.config_digest = p.get_or("config_digest", "");
    rep.n = static_cast<int>(kv::parse_int(p.get("n"), "n"));
    for (int c = 0;; ++c) {
        const std::string* v = p.find("support." + std::to_string(c));
        if (!v) break;
        rep.class_support.push_back(static_cast<int>(kv::parse_int(*v, "support")));
    }
    rep.acc = kv::parse_double(p.get("acc"), "acc");
    rep.per_class_acc.assign(rep.class_support.size(), std::nullopt);
    for (std::size_t c = 0; c < rep.class_support.size(); ++c) {
        const std::string* v = p.find("per_class_acc." + std::to_string(c));
        if (v) rep.per_class_acc[c] = kv::parse_double(*v, "per_class_acc");
    }
    rep.weighted_f1 = kv::parse_double(p.get("weighted_f1"), "weighted_f1");
    rep.macro_f1 = kv::parse_double(p.get("macro_f1"), "macro_f1");
    auto opt = [&](const char* key) -> std::optional<double> {
        const std::string* v = p.find(key);
        if (!v) return std::nullopt;
        return kv::parse_double(*v, key);
    };
    rep.auc_macro_ovr = opt("auc_macro_ovr");
    rep.sen = opt("sen");
    rep.spe = opt("spe");
    rep.g_mean = opt("g_mean");
    rep.ba_acc = opt("ba_acc");
    rep.auprc = opt("auprc");
    rep.auc = opt("auc");
    return rep;
}

inline kv::Pairs gap_report_to_kv(const GapReport& rep) {
    kv::Pairs p;
    p.set("report_version", "1");
    p.set("kind", "gap");
    if (!rep.config_digest.empty()) p.set("config_digest", rep.config_digest);
    p.set("intra", kv::format_double(rep.intra));
    p.set("inter", kv::format_double(rep.inter));
    p.set("gap", kv::format_double(rep.gap));
    p.set("pairs_intra", std::to_string(rep.pairs_intra));
    p.set("pairs_inter", std::to_string(rep.pairs_inter));
    return p;
}

inline GapReport gap_report_from_kv(const kv::Pairs& p) {
    if (p.get("kind") != "gap") throw ConfigError("not a gap report");
    GapReport rep;
    rep.config_digest = p.get_or("config_digest", "");
    rep.intra = kv::parse_double(p.get("intra"), "intra");
    rep.inter = kv::parse_double(p.get("inter"), "inter");
    rep.gap = kv::parse_double(p.get("gap"), "gap");
    rep.pairs_intra = kv::parse_int(p.get("pairs_intra"), "pairs_intra");
    rep.pairs_inter = kv::parse_int(p.get("pairs_inter"), "pairs_inter");
    return rep;
}

}  // namespace cfcml::metrics
