#pragma once
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cfcml/errors.hpp"

namespace cfcml::metrics {

// Mann-Whitney rank AUC; tied scores contribute half wins.
inline double rank_auc(const std::vector<int>& is_pos, const std::vector<double>& scores) {
    const std::size_t n = scores.size();
    long long n_pos = 0;
    for (int p : is_pos) n_pos += p ? 1 : 0;
    const long long n_neg = static_cast<long long>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw UndefinedMetric("AUC needs both classes present");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // average ranks over tie groups (1-based ranks)
    std::vector<double> rank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double rank_sum_pos = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (is_pos[k]) rank_sum_pos += rank[k];
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Average precision by stepwise integration of the precision-recall curve
// (no interpolation); threshold sweeps over distinct score levels.
inline double average_precision(const std::vector<int>& is_pos,
                                const std::vector<double>& scores) {
    long long n_pos = 0;
    for (int p : is_pos) n_pos += p ? 1 : 0;
    if (n_pos == 0 || n_pos == static_cast<long long>(is_pos.size()))
        throw UndefinedMetric("AUPRC needs both classes present");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double ap = 0.0;
    long long tp = 0, fp = 0;
    double prev_recall = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) {
            if (is_pos[order[k]]) ++tp;
            else ++fp;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    return ap;
}

struct EvalReport {
    int n = 0;
    std::vector<int> class_support;
    double acc = 0.0;
    std::vector<std::optional<double>> per_class_acc;  // absent for zero-support classes
    double weighted_f1 = 0.0;
    double macro_f1 = 0.0;
    std::optional<double> auc_macro_ovr;

    // binary extras
    std::optional<double> sen, spe, g_mean, ba_acc, auprc, auc;

    std::string config_digest;
};

// g-mean and balanced accuracy from the two rates
inline std::pair<double, double> binary_rate_summary(double sen, double spe) {
    return {std::sqrt(sen * spe), 0.5 * (sen + spe)};
}

inline EvalReport compute_multiclass_metrics(const std::vector<int>& y_true,
                                             const std::vector<int>& y_pred,
                                             const std::vector<std::vector<double>>& probs) {
    if (y_true.empty() || y_true.size() != y_pred.size() || y_true.size() != probs.size())
        throw UndefinedMetric("metrics need matched, non-empty inputs");
    const int n_classes = static_cast<int>(probs[0].size());
    for (const auto& row : probs) {
        double s = 0.0;
        for (double p : row) s += p;
        if (std::abs(s - 1.0) > 1e-6)
            throw UndefinedMetric("probability rows must sum to 1");
    }

    EvalReport rep;
    rep.n = static_cast<int>(y_true.size());
    rep.class_support.assign(n_classes, 0);
    for (int y : y_true) {
        if (y < 0 || y >= n_classes) throw UndefinedMetric("label out of range");
        ++rep.class_support[static_cast<std::size_t>(y)];
    }

    int correct = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) correct += y_true[i] == y_pred[i] ? 1 : 0;
    rep.acc = static_cast<double>(correct) / rep.n;

    double weighted_sum = 0.0, macro_sum = 0.0;
    int macro_count = 0;
    rep.per_class_acc.assign(n_classes, std::nullopt);
    for (int c = 0; c < n_classes; ++c) {
        long long tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            if (y_true[i] == c && y_pred[i] == c) ++tp;
            if (y_true[i] != c && y_pred[i] == c) ++fp;
            if (y_true[i] == c && y_pred[i] != c) ++fn;
        }
        const int support = rep.class_support[static_cast<std::size_t>(c)];
        if (support == 0) continue;  // reported as absent, not zero
        rep.per_class_acc[static_cast<std::size_t>(c)] =
            static_cast<double>(tp) / static_cast<double>(support);
        const double precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double recall = static_cast<double>(tp) / support;
        const double f1 =
            (precision + recall > 0.0) ? 2.0 * precision * recall / (precision + recall) : 0.0;
        weighted_sum += f1 * support;
        macro_sum += f1;
        ++macro_count;
    }
    rep.weighted_f1 = weighted_sum / rep.n;
    rep.macro_f1 = macro_count ? macro_sum / macro_count : 0.0;

    // macro one-vs-rest AUC over classes with both members and non-members
    double auc_sum = 0.0;
    int auc_count = 0;
    for (int c = 0; c < n_classes; ++c) {
        const int support = rep.class_support[static_cast<std::size_t>(c)];
        if (support == 0 || support == rep.n) continue;
        std::vector<int> is_pos(y_true.size());
        std::vector<double> scores(y_true.size());
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            is_pos[i] = y_true[i] == c ? 1 : 0;
            scores[i] = probs[i][static_cast<std::size_t>(c)];
        }
        auc_sum += rank_auc(is_pos, scores);
        ++auc_count;
    }
    if (auc_count > 0) rep.auc_macro_ovr = auc_sum / auc_count;
    return rep;
}

// Binary task: labels in {0, 1}, scores are the positive-class probability,
// decisions threshold at 0.5.
inline EvalReport compute_binary_metrics(const std::vector<int>& y_true,
                                         const std::vector<double>& scores) {
    if (y_true.empty() || y_true.size() != scores.size())
        throw UndefinedMetric("metrics need matched, non-empty inputs");
    long long tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool pred = scores[i] >= 0.5;
        if (y_true[i] == 1 && pred) ++tp;
        else if (y_true[i] == 1) ++fn;
        else if (pred) ++fp;
        else ++tn;
    }
    if (tp + fn == 0 || tn + fp == 0)
        throw UndefinedMetric("binary metrics need both classes in the ground truth");

    EvalReport rep;
    rep.n = static_cast<int>(y_true.size());
    rep.class_support = {static_cast<int>(tn + fp), static_cast<int>(tp + fn)};
    rep.sen = static_cast<double>(tp) / static_cast<double>(tp + fn);
    rep.spe = static_cast<double>(tn) / static_cast<double>(tn + fp);
    auto [gm, ba] = binary_rate_summary(*rep.sen, *rep.spe);
    rep.g_mean = gm;
    rep.ba_acc = ba;
    rep.acc = static_cast<double>(tp + tn) / rep.n;
    std::vector<int> is_pos(y_true.size());
    for (std::size_t i = 0; i < y_true.size(); ++i) is_pos[i] = y_true[i] == 1 ? 1 : 0;
    rep.auc = rank_auc(is_pos, scores);
    rep.auprc = average_precision(is_pos, scores);

    // fill the shared multiclass fields for uniform reporting
    std::vector<int> y_pred(y_true.size());
    std::vector<std::vector<double>> probs(y_true.size(), std::vector<double>(2));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        y_pred[i] = scores[i] >= 0.5 ? 1 : 0;
        probs[i][1] = std::min(1.0, std::max(0.0, scores[i]));
        probs[i][0] = 1.0 - probs[i][1];
    }
    EvalReport multi = compute_multiclass_metrics(y_true, y_pred, probs);
    rep.per_class_acc = multi.per_class_acc;
    rep.weighted_f1 = multi.weighted_f1;
    rep.macro_f1 = multi.macro_f1;
    rep.auc_macro_ovr = multi.auc_macro_ovr;
    return rep;
}

// Cross-modal class-structure diagnostic over pooled features. Pairs are
// unordered, drawn across distinct modalities (same sample allowed); the gap
// score is mean intra-class minus mean inter-class cosine similarity.
struct GapReport {
    double intra = 0.0;
    double inter = 0.0;
    double gap = 0.0;
    long long pairs_intra = 0;
    long long pairs_inter = 0;
    std::string config_digest;
};

inline GapReport compute_gap_report(const std::vector<std::vector<std::vector<double>>>& pooled,
                                    const std::vector<int>& labels) {
    if (pooled.empty() || pooled.size() != labels.size())
        throw UndefinedMetric("gap report needs matched, non-empty inputs");
    const int n = static_cast<int>(pooled.size());
    const int m = static_cast<int>(pooled[0].size());
    if (m < 2) throw UndefinedMetric("gap report needs >= 2 modalities");
    std::set<int> classes(labels.begin(), labels.end());
    if (classes.size() < 2) throw UndefinedMetric("gap report needs >= 2 classes");

    auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
        double na = 0.0, nb = 0.0, d = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            na += a[i] * a[i];
            nb += b[i] * b[i];
            d += a[i] * b[i];
        }
        return d / ((std::sqrt(na) + 1e-12) * (std::sqrt(nb) + 1e-12));
    };

    GapReport rep;
    double intra = 0.0, inter = 0.0;
    for (int a = 0; a < n * m; ++a) {
        const int ia = a / m, ja = a % m;
        for (int b = a + 1; b < n * m; ++b) {
            const int ib = b / m, jb = b % m;
            if (ja == jb) continue;
            const double c = cosine(pooled[static_cast<std::size_t>(ia)][static_cast<std::size_t>(ja)],
                                    pooled[static_cast<std::size_t>(ib)][static_cast<std::size_t>(jb)]);
            if (labels[static_cast<std::size_t>(ia)] == labels[static_cast<std::size_t>(ib)]) {
                intra += c;
                ++rep.pairs_intra;
            } else {
                inter += c;
                ++rep.pairs_inter;
            }
        }
    }
    if (rep.pairs_intra == 0 || rep.pairs_inter == 0)
        throw UndefinedMetric("gap report needs both intra- and inter-class pairs");
    rep.intra = intra / rep.pairs_intra;
    rep.inter = inter / rep.pairs_inter;
    rep.gap = rep.intra - rep.inter;
    return rep;
}

}  // namespace cfcml::metrics
