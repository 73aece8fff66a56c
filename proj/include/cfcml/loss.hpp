#pragma once
#include <vector>

#include "cfcml/ccrm.hpp"
#include "cfcml/model.hpp"

namespace cfcml::trainer {

struct LossBundle {
    double l_cls = 0.0;
    double l_sam = 0.0;
    double l_up = 0.0;
    double l_cp = 0.0;
    double total = 0.0;
};

struct LossVars {
    Var l_cls, l_sam, l_up, l_cp, total;

    LossBundle values() const {
        LossBundle b;
        b.l_cls = l_cls.scalar();
        b.l_sam = l_sam.valid() ? l_sam.scalar() : 0.0;
        b.l_up = l_up.valid() ? l_up.scalar() : 0.0;
        b.l_cp = l_cp.valid() ? l_cp.scalar() : 0.0;
        b.total = total.scalar();
        return b;
    }
};

// mean cross-entropy of softmaxed logits; optional per-class weights use the
// weighted-mean convention (sum w*loss / sum w)
inline Var cross_entropy(Graph& g, Var logits, const std::vector<int>& labels,
                         const std::vector<double>* class_weights = nullptr) {
    if (logits.rows() != static_cast<int>(labels.size()))
        throw ShapeError("cross_entropy: logits/label count mismatch");
    Var logp = g.log_softmax_rows(logits);
    Var acc;
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= logits.cols()) throw ShapeError("cross_entropy: label out of range");
        const double w = class_weights ? (*class_weights)[static_cast<std::size_t>(y)] : 1.0;
        Var term = g.scale(g.select(logp, static_cast<int>(i), y), -w);
        acc = acc.valid() ? g.add(acc, term) : term;
        weight_sum += w;
    }
    return g.scale(acc, 1.0 / weight_sum);
}

// The composite objective: classification plus the weighted CCRM terms.
inline LossVars total_loss(Graph& g, const ForwardResult& fwd, const std::vector<int>& labels,
                           const ModelConfig& mc, const ccrm::ContrastConfig& contrast,
                           const std::vector<double>* class_weights = nullptr) {
    LossVars out;
    out.l_cls = cross_entropy(g, fwd.logits, labels, class_weights);
    if (mc.ccrm_enabled) {
        auto bank = ccrm::compute_prototypes(g, fwd.pooled, labels, mc.n_classes);
        if (contrast.stop_grad_prototypes) bank = ccrm::detach_bank(g, bank);
        out.l_sam = ccrm::loss_sample_anchor(g, fwd.pooled, labels, bank, contrast);
        out.l_up = ccrm::loss_unimodal_proto_anchor(g, bank, contrast);
        out.l_cp = ccrm::loss_crossmodal_proto_anchor(g, bank, contrast);
        out.total = g.add(out.l_cls, g.add(g.scale(out.l_sam, contrast.alpha),
                                           g.add(g.scale(out.l_up, contrast.beta),
                                                 g.scale(out.l_cp, contrast.gamma))));
    } else {
        out.total = out.l_cls;
    }
    return out;
}

}  // namespace cfcml::trainer
