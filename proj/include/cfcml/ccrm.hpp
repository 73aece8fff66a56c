#pragma once
#include <set>
#include <string>
#include <vector>

#include "cfcml/graph.hpp"

namespace cfcml::ccrm {

// Temperature and behaviour switches for the contrastive losses.
struct ContrastConfig {
    double tau = 0.07;
    double alpha = 0.06;
    double beta = 0.04;
    double gamma = 0.24;
    // literal variant: similarity sums are exp(cos) scaled by 1/tau outside
    bool tau_outside_exp = false;
    // prototypes enter the losses as detached constants
    bool stop_grad_prototypes = false;
    // restrict unimodal-prototype-anchor negatives to the anchor's modality
    bool up_negatives_same_modality_only = false;
    // sample-anchor positives: only the anchor's own-modality prototype
    // (plus the crossmodal one) instead of all M unimodal prototypes
    bool sample_positives_own_modality_only = false;

    void validate() const {
        if (!(tau > 0.0)) throw DegenerateBatch("temperature must be positive");
        if (alpha < 0.0 || beta < 0.0 || gamma < 0.0)
            throw DegenerateBatch("loss weights must be >= 0");
    }
};

// Token-mean pooling: (n x C_d) -> (1 x C_d). The pooled vectors are the
// per-(sample, modality) features all CCRM math runs on.
inline Var pool_tokens(Graph& g, Var sequence) {
    if (sequence.rows() < 1) throw ShapeError("pool_tokens: empty sequence");
    return g.mean_rows(sequence);
}

// Per-class prototypes over one batch. An entry is defined iff its class
// (and modality) has at least one member; undefined entries are never read.
struct PrototypeBank {
    int n_classes = 0;
    int n_modalities = 0;
    std::vector<Var> crossmodal;                    // [class]
    std::vector<char> crossmodal_defined;           // [class]
    std::vector<std::vector<Var>> unimodal;         // [class][modality]
    std::vector<std::vector<char>> unimodal_defined;

    int defined_classes() const {
        int n = 0;
        for (char c : crossmodal_defined) n += c ? 1 : 0;
        return n;
    }
};

// features[i][j]: pooled (1 x C_d) feature of sample i, modality j.
inline PrototypeBank compute_prototypes(Graph& g,
                                        const std::vector<std::vector<Var>>& features,
                                        const std::vector<int>& labels, int n_classes) {
    if (features.empty()) throw DegenerateBatch("prototype construction needs >= 1 sample");
    if (features.size() != labels.size())
        throw ShapeError("compute_prototypes: feature/label count mismatch");
    const int n = static_cast<int>(features.size());
    const int m = static_cast<int>(features[0].size());
    for (const auto& row : features)
        if (static_cast<int>(row.size()) != m)
            throw ShapeError("compute_prototypes: ragged modality lists");

    PrototypeBank bank;
    bank.n_classes = n_classes;
    bank.n_modalities = m;
    bank.crossmodal_defined.assign(static_cast<std::size_t>(n_classes), 0);
    bank.crossmodal.resize(static_cast<std::size_t>(n_classes));
    bank.unimodal.assign(static_cast<std::size_t>(n_classes), std::vector<Var>(m));
    bank.unimodal_defined.assign(static_cast<std::size_t>(n_classes),
                                 std::vector<char>(static_cast<std::size_t>(m), 0));

    for (int l = 0; l < n_classes; ++l) {
        std::vector<Var> all_members;
        for (int j = 0; j < m; ++j) {
            std::vector<Var> members;
            for (int i = 0; i < n; ++i)
                if (labels[static_cast<std::size_t>(i)] == l)
                    members.push_back(features[static_cast<std::size_t>(i)]
                                              [static_cast<std::size_t>(j)]);
            if (!members.empty()) {
                Var stacked = members.size() == 1 ? members[0] : g.concat_rows(members);
                bank.unimodal[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] =
                    g.mean_rows(stacked);
                bank.unimodal_defined[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] = 1;
                for (Var v : members) all_members.push_back(v);
            }
        }
        if (!all_members.empty()) {
            Var stacked = all_members.size() == 1 ? all_members[0] : g.concat_rows(all_members);
            bank.crossmodal[static_cast<std::size_t>(l)] = g.mean_rows(stacked);
            bank.crossmodal_defined[static_cast<std::size_t>(l)] = 1;
        }
    }
    return bank;
}

inline PrototypeBank detach_bank(Graph& g, const PrototypeBank& bank) {
    PrototypeBank out = bank;
    for (std::size_t l = 0; l < out.crossmodal.size(); ++l)
        if (out.crossmodal_defined[l]) out.crossmodal[l] = g.constant(bank.crossmodal[l].val());
    for (std::size_t l = 0; l < out.unimodal.size(); ++l)
        for (std::size_t j = 0; j < out.unimodal[l].size(); ++j)
            if (out.unimodal_defined[l][j])
                out.unimodal[l][j] = g.constant(bank.unimodal[l][j].val());
    return out;
}

namespace detail {

inline Var cosine(Graph& g, Var unit_a, Var unit_b) {
    return g.matmul(unit_a, unit_b, false, true);
}

// sum of temperature-scaled similarities between a unit anchor and unit
// members; 0 for an empty set
inline Var op_sum(Graph& g, Var unit_anchor, const std::vector<Var>& unit_members, double tau,
                  bool tau_outside) {
    if (unit_members.empty()) return g.constant(Mat::zeros(1, 1));
    Var acc;
    bool first = true;
    for (Var m : unit_members) {
        Var cos = cosine(g, unit_anchor, m);
        Var term = tau_outside ? g.exp_(cos) : g.exp_(g.scale(cos, 1.0 / tau));
        acc = first ? term : g.add(acc, term);
        first = false;
    }
    if (tau_outside) acc = g.scale(acc, 1.0 / tau);
    return acc;
}

inline Var neg_log_ratio(Graph& g, Var op_pos, Var op_neg) {
    Var ratio = g.divide(op_pos, g.add(op_pos, op_neg));
    return g.scale(g.log_(ratio), -1.0);
}

inline Var mean_of(Graph& g, const std::vector<Var>& terms) {
    Var sum;
    bool first = true;
    for (Var t : terms) {
        sum = first ? t : g.add(sum, t);
        first = false;
    }
    return g.scale(sum, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace detail

// Cumulative similarity between an anchor and a (possibly empty) set.
inline Var op_similarity(Graph& g, Var anchor, const std::vector<Var>& members,
                         const ContrastConfig& cfg) {
    Var ua = g.normalize_rows(anchor);
    std::vector<Var> um;
    um.reserve(members.size());
    for (Var m : members) um.push_back(g.normalize_rows(m));
    return detail::op_sum(g, ua, um, cfg.tau, cfg.tau_outside_exp);
}

// Every (sample, modality) feature anchors one term: positives are its
// class's prototypes, negatives the same-modality features of other-class
// samples in the batch. Mean of -log(pos / (pos + neg)) over anchors.
inline Var loss_sample_anchor(Graph& g, const std::vector<std::vector<Var>>& features,
                              const std::vector<int>& labels, const PrototypeBank& bank,
                              const ContrastConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(features.size());
    const int m = bank.n_modalities;
    std::set<int> present(labels.begin(), labels.end());
    if (present.size() < 2)
        throw DegenerateBatch("sample-anchor loss needs >= 2 classes in the batch");

    // normalize once
    std::vector<std::vector<Var>> unit(static_cast<std::size_t>(n),
                                       std::vector<Var>(static_cast<std::size_t>(m)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            unit[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                g.normalize_rows(features[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    std::vector<Var> unit_cp(static_cast<std::size_t>(bank.n_classes));
    std::vector<std::vector<Var>> unit_up(static_cast<std::size_t>(bank.n_classes),
                                          std::vector<Var>(static_cast<std::size_t>(m)));
    for (int l = 0; l < bank.n_classes; ++l) {
        if (bank.crossmodal_defined[static_cast<std::size_t>(l)])
            unit_cp[static_cast<std::size_t>(l)] =
                g.normalize_rows(bank.crossmodal[static_cast<std::size_t>(l)]);
        for (int j = 0; j < m; ++j)
            if (bank.unimodal_defined[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)])
                unit_up[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] =
                    g.normalize_rows(bank.unimodal[static_cast<std::size_t>(l)]
                                                  [static_cast<std::size_t>(j)]);
    }

    std::vector<Var> terms;
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        for (int j = 0; j < m; ++j) {
            std::vector<Var> positives;
            if (cfg.sample_positives_own_modality_only) {
                if (bank.unimodal_defined[static_cast<std::size_t>(y)][static_cast<std::size_t>(j)])
                    positives.push_back(
                        unit_up[static_cast<std::size_t>(y)][static_cast<std::size_t>(j)]);
            } else {
                for (int jj = 0; jj < m; ++jj)
                    if (bank.unimodal_defined[static_cast<std::size_t>(y)]
                                             [static_cast<std::size_t>(jj)])
                        positives.push_back(
                            unit_up[static_cast<std::size_t>(y)][static_cast<std::size_t>(jj)]);
            }
            if (bank.crossmodal_defined[static_cast<std::size_t>(y)])
                positives.push_back(unit_cp[static_cast<std::size_t>(y)]);
            if (positives.empty()) continue;  // cannot happen with in-batch prototypes
            std::vector<Var> negatives;
            for (int ii = 0; ii < n; ++ii)
                if (labels[static_cast<std::size_t>(ii)] != y)
                    negatives.push_back(
                        unit[static_cast<std::size_t>(ii)][static_cast<std::size_t>(j)]);
            Var anchor = unit[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            Var op_pos = detail::op_sum(g, anchor, positives, cfg.tau, cfg.tau_outside_exp);
            Var op_neg = detail::op_sum(g, anchor, negatives, cfg.tau, cfg.tau_outside_exp);
            terms.push_back(detail::neg_log_ratio(g, op_pos, op_neg));
        }
    }
    if (terms.empty()) throw DegenerateBatch("sample-anchor loss has no usable anchors");
    return detail::mean_of(g, terms);
}

// Unimodal prototypes anchor terms against their class's crossmodal
// prototype (positive) and other classes' unimodal prototypes (negatives).
inline Var loss_unimodal_proto_anchor(Graph& g, const PrototypeBank& bank,
                                      const ContrastConfig& cfg) {
    cfg.validate();
    if (bank.defined_classes() < 2)
        throw DegenerateBatch("unimodal-prototype loss needs >= 2 classes with prototypes");
    const int m = bank.n_modalities;

    std::vector<Var> unit_cp(static_cast<std::size_t>(bank.n_classes));
    std::vector<std::vector<Var>> unit_up(static_cast<std::size_t>(bank.n_classes),
                                          std::vector<Var>(static_cast<std::size_t>(m)));
    for (int l = 0; l < bank.n_classes; ++l) {
        if (bank.crossmodal_defined[static_cast<std::size_t>(l)])
            unit_cp[static_cast<std::size_t>(l)] =
                g.normalize_rows(bank.crossmodal[static_cast<std::size_t>(l)]);
        for (int j = 0; j < m; ++j)
            if (bank.unimodal_defined[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)])
                unit_up[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] =
                    g.normalize_rows(bank.unimodal[static_cast<std::size_t>(l)]
                                                  [static_cast<std::size_t>(j)]);
    }

    std::vector<Var> terms;
    bool any_negative = false;
    for (int l = 0; l < bank.n_classes; ++l) {
        for (int j = 0; j < m; ++j) {
            if (!bank.unimodal_defined[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)])
                continue;
            if (!bank.crossmodal_defined[static_cast<std::size_t>(l)]) continue;
            std::vector<Var> positives{unit_cp[static_cast<std::size_t>(l)]};
            std::vector<Var> negatives;
            for (int ll = 0; ll < bank.n_classes; ++ll) {
                if (ll == l) continue;
                for (int jj = 0; jj < m; ++jj) {
                    if (cfg.up_negatives_same_modality_only && jj != j) continue;
                    if (bank.unimodal_defined[static_cast<std::size_t>(ll)]
                                             [static_cast<std::size_t>(jj)])
                        negatives.push_back(
                            unit_up[static_cast<std::size_t>(ll)][static_cast<std::size_t>(jj)]);
                }
            }
            any_negative = any_negative || !negatives.empty();
            Var anchor = unit_up[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
            Var op_pos = detail::op_sum(g, anchor, positives, cfg.tau, cfg.tau_outside_exp);
            Var op_neg = detail::op_sum(g, anchor, negatives, cfg.tau, cfg.tau_outside_exp);
            terms.push_back(detail::neg_log_ratio(g, op_pos, op_neg));
        }
    }
    if (terms.empty() || !any_negative)
        throw DegenerateBatch("unimodal-prototype loss has no anchor with negatives");
    return detail::mean_of(g, terms);
}

// Crossmodal prototypes anchor terms against their class's unimodal
// prototypes (positives) and the other crossmodal prototypes (negatives).
inline Var loss_crossmodal_proto_anchor(Graph& g, const PrototypeBank& bank,
                                        const ContrastConfig& cfg) {
    cfg.validate();
    if (bank.defined_classes() < 2)
        throw DegenerateBatch("crossmodal-prototype loss needs >= 2 classes with prototypes");
    const int m = bank.n_modalities;

    std::vector<Var> unit_cp(static_cast<std::size_t>(bank.n_classes));
    std::vector<std::vector<Var>> unit_up(static_cast<std::size_t>(bank.n_classes),
                                          std::vector<Var>(static_cast<std::size_t>(m)));
    for (int l = 0; l < bank.n_classes; ++l) {
        if (bank.crossmodal_defined[static_cast<std::size_t>(l)])
            unit_cp[static_cast<std::size_t>(l)] =
                g.normalize_rows(bank.crossmodal[static_cast<std::size_t>(l)]);
        for (int j = 0; j < m; ++j)
            if (bank.unimodal_defined[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)])
                unit_up[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] =
                    g.normalize_rows(bank.unimodal[static_cast<std::size_t>(l)]
                                                  [static_cast<std::size_t>(j)]);
    }

    std::vector<Var> terms;
    for (int l = 0; l < bank.n_classes; ++l) {
        if (!bank.crossmodal_defined[static_cast<std::size_t>(l)]) continue;
        std::vector<Var> positives;
        for (int j = 0; j < m; ++j)
            if (bank.unimodal_defined[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)])
                positives.push_back(
                    unit_up[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)]);
        if (positives.empty()) continue;
        std::vector<Var> negatives;
        for (int ll = 0; ll < bank.n_classes; ++ll)
            if (ll != l && bank.crossmodal_defined[static_cast<std::size_t>(ll)])
                negatives.push_back(unit_cp[static_cast<std::size_t>(ll)]);
        Var anchor = unit_cp[static_cast<std::size_t>(l)];
        Var op_pos = detail::op_sum(g, anchor, positives, cfg.tau, cfg.tau_outside_exp);
        Var op_neg = detail::op_sum(g, anchor, negatives, cfg.tau, cfg.tau_outside_exp);
        terms.push_back(detail::neg_log_ratio(g, op_pos, op_neg));
    }
    if (terms.empty())
        throw DegenerateBatch("crossmodal-prototype loss has no usable anchors");
    return detail::mean_of(g, terms);
}

}  // namespace cfcml::ccrm
