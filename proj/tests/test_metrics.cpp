#include <catch2/catch.hpp>
#include <sstream>

#include "cfcml/metrics.hpp"
#include "cfcml/report.hpp"
#include "cfcml/rng.hpp"
#include "oracles.hpp"

using namespace cfcml;
using namespace cfcml::metrics;

namespace {

std::vector<std::vector<double>> one_hot_probs(const std::vector<int>& y, int k,
                                               double confidence = 0.9) {
    std::vector<std::vector<double>> probs(y.size(), std::vector<double>(k));
    for (std::size_t i = 0; i < y.size(); ++i)
        for (int c = 0; c < k; ++c)
            probs[i][static_cast<std::size_t>(c)] =
                c == y[i] ? confidence : (1.0 - confidence) / (k - 1);
    return probs;
}

}  // namespace

TEST_CASE("multiclass metrics: perfect predictions") {
    std::vector<int> y{0, 1, 2, 0, 1, 2};
    auto rep = compute_multiclass_metrics(y, y, one_hot_probs(y, 3));
    CHECK(rep.acc == 1.0);
    CHECK(rep.macro_f1 == Approx(1.0));
    CHECK(rep.weighted_f1 == Approx(1.0));
    REQUIRE(rep.auc_macro_ovr.has_value());
    CHECK(*rep.auc_macro_ovr == Approx(1.0));
    for (auto& pca : rep.per_class_acc) {
        REQUIRE(pca.has_value());
        CHECK(*pca == Approx(1.0));
    }
}

TEST_CASE("multiclass metrics: the constant predictor on balanced binary data") {
    std::vector<int> y_true{0, 0, 1, 1};
    std::vector<int> y_pred{0, 0, 0, 0};
    std::vector<std::vector<double>> probs(4, {0.8, 0.2});
    auto rep = compute_multiclass_metrics(y_true, y_pred, probs);
    CHECK(rep.acc == Approx(0.5));
    CHECK(rep.macro_f1 == Approx(1.0 / 3.0));
    // per-class recalls: 1 and 0
    CHECK(*rep.per_class_acc[0] == Approx(1.0));
    CHECK(*rep.per_class_acc[1] == Approx(0.0));
}

TEST_CASE("single-class ground truth: AUC absent, missing classes absent") {
    std::vector<int> y{1, 1, 1};
    std::vector<int> pred{1, 1, 0};
    std::vector<std::vector<double>> probs(3, {0.5, 0.5});
    auto rep = compute_multiclass_metrics(y, pred, probs);
    CHECK_FALSE(rep.auc_macro_ovr.has_value());
    CHECK_FALSE(rep.per_class_acc[0].has_value());
    REQUIRE(rep.per_class_acc[1].has_value());
    CHECK(*rep.per_class_acc[1] == Approx(2.0 / 3.0));
}

TEST_CASE("weighted F1 equals the naive support-weighted recomputation") {
    RngStream rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 2 + static_cast<int>(rng.next_below(4));
        const int n = 10 + static_cast<int>(rng.next_below(50));
        std::vector<int> y_true, y_pred;
        for (int i = 0; i < n; ++i) {
            y_true.push_back(i < k ? i : static_cast<int>(rng.next_below(k)));
            y_pred.push_back(static_cast<int>(rng.next_below(k)));
        }
        auto rep = compute_multiclass_metrics(y_true, y_pred, one_hot_probs(y_pred, k));
        CHECK(rep.weighted_f1 == Approx(oracle::weighted_f1(y_true, y_pred, k)).margin(1e-9));
    }
}

TEST_CASE("rank AUC equals exhaustive pair counting, ties included") {
    RngStream rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 5 + static_cast<int>(rng.next_below(196));
        std::vector<int> y;
        std::vector<double> s;
        bool has_pos = false, has_neg = false;
        for (int i = 0; i < n; ++i) {
            int yi = rng.bernoulli(0.4) ? 1 : 0;
            if (i == 0) yi = 1;
            if (i == 1) yi = 0;
            y.push_back(yi);
            has_pos |= yi == 1;
            has_neg |= yi == 0;
            // quantized scores force ties
            s.push_back(std::round(rng.next_double() * 8.0) / 8.0);
        }
        REQUIRE((has_pos && has_neg));
        CHECK(rank_auc(y, s) == Approx(oracle::auc_pairs(y, s)).margin(1e-12));
    }
}

TEST_CASE("binary metrics identities and degenerate input") {
    std::vector<int> y{1, 1, 1, 0, 0, 1, 0, 1};
    std::vector<double> s{0.9, 0.8, 0.3, 0.2, 0.6, 0.7, 0.1, 0.55};
    auto rep = compute_binary_metrics(y, s);
    REQUIRE(rep.sen);
    REQUIRE(rep.spe);
    CHECK(*rep.g_mean == Approx(std::sqrt(*rep.sen * *rep.spe)).margin(1e-12));
    CHECK(*rep.ba_acc == Approx(0.5 * (*rep.sen + *rep.spe)).margin(1e-12));
    CHECK(*rep.auc == Approx(oracle::auc_pairs(y, s)).margin(1e-12));

    CHECK_THROWS_AS(compute_binary_metrics({1, 1, 1}, {0.5, 0.6, 0.7}), UndefinedMetric);
}

TEST_CASE("the reference rate pair reproduces its summary row") {
    auto [g_mean, ba_acc] = binary_rate_summary(0.7591, 0.8949);
    CHECK(g_mean == Approx(0.8240).margin(5e-4));
    CHECK(ba_acc == Approx(0.8270).margin(5e-4));
}

TEST_CASE("perfect separation maxes AUC and AUPRC") {
    std::vector<int> y{0, 0, 0, 1, 1, 1};
    std::vector<double> s{0.1, 0.2, 0.3, 0.7, 0.8, 0.9};
    auto rep = compute_binary_metrics(y, s);
    CHECK(*rep.auc == Approx(1.0));
    CHECK(*rep.auprc == Approx(1.0));
    CHECK(*rep.sen == Approx(1.0));
    CHECK(*rep.spe == Approx(1.0));
}

TEST_CASE("average precision on a small hand-checked case") {
    // ordered by score desc: + - + -
    std::vector<int> y{1, 0, 1, 0};
    std::vector<double> s{0.9, 0.8, 0.7, 0.6};
    // steps: R 0->.5 at P=1, R .5->1 at P=2/3
    CHECK(average_precision(y, s) == Approx(0.5 * 1.0 + 0.5 * (2.0 / 3.0)).margin(1e-12));
}

TEST_CASE("gap report: constructed and random cases") {
    SECTION("identical features everywhere") {
        std::vector<std::vector<std::vector<double>>> pooled(
            4, std::vector<std::vector<double>>(2, {1.0, 2.0}));
        std::vector<int> labels{0, 0, 1, 1};
        auto rep = compute_gap_report(pooled, labels);
        CHECK(rep.intra == Approx(1.0).margin(1e-9));
        CHECK(rep.inter == Approx(1.0).margin(1e-9));
        CHECK(rep.gap == Approx(0.0).margin(1e-9));
    }
    SECTION("orthogonal classes give gap one") {
        std::vector<std::vector<std::vector<double>>> pooled;
        std::vector<int> labels;
        for (int i = 0; i < 4; ++i) {
            const bool cls = i % 2 == 1;
            std::vector<double> e = cls ? std::vector<double>{0.0, 1.0}
                                        : std::vector<double>{1.0, 0.0};
            pooled.push_back({e, e});
            labels.push_back(cls ? 1 : 0);
        }
        auto rep = compute_gap_report(pooled, labels);
        CHECK(rep.intra == Approx(1.0).margin(1e-9));
        CHECK(rep.inter == Approx(0.0).margin(1e-9));
        CHECK(rep.gap == Approx(1.0).margin(1e-9));
    }
    SECTION("random features match the pair-loop reference") {
        RngStream rng(9);
        for (int trial = 0; trial < 10; ++trial) {
            const int n = 3 + static_cast<int>(rng.next_below(5));
            const int m = 2 + static_cast<int>(rng.next_below(3));
            std::vector<std::vector<std::vector<double>>> pooled;
            std::vector<int> labels;
            oracle::Feats z;
            for (int i = 0; i < n; ++i) {
                std::vector<std::vector<double>> row;
                for (int j = 0; j < m; ++j) {
                    std::vector<double> v(4);
                    for (auto& x : v) x = rng.normal();
                    row.push_back(v);
                }
                pooled.push_back(row);
                z.push_back(row);
                labels.push_back(i < 2 ? i : static_cast<int>(rng.next_below(2)));
            }
            auto rep = compute_gap_report(pooled, labels);
            auto ref = oracle::gap_pairs(z, labels);
            CHECK(rep.intra == Approx(ref.intra).margin(1e-9));
            CHECK(rep.inter == Approx(ref.inter).margin(1e-9));
            CHECK(rep.gap == Approx(ref.gap).margin(1e-9));
        }
    }
    SECTION("degenerate inputs raise") {
        std::vector<std::vector<std::vector<double>>> one_mod(
            4, std::vector<std::vector<double>>(1, {1.0, 0.0}));
        CHECK_THROWS_AS(compute_gap_report(one_mod, std::vector<int>{0, 0, 1, 1}),
                        UndefinedMetric);
        std::vector<std::vector<std::vector<double>>> pooled(
            4, std::vector<std::vector<double>>(2, {1.0, 0.0}));
        CHECK_THROWS_AS(compute_gap_report(pooled, std::vector<int>{0, 0, 0, 0}),
                        UndefinedMetric);
    }
}

TEST_CASE("metric consistency invariants on random reports") {
    RngStream rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 20 + static_cast<int>(rng.next_below(40));
        std::vector<int> y;
        std::vector<double> s;
        for (int i = 0; i < n; ++i) {
            y.push_back(i < 2 ? i : (rng.bernoulli(0.5) ? 1 : 0));
            s.push_back(rng.next_double());
        }
        auto rep = compute_binary_metrics(y, s);
        CHECK(*rep.g_mean == Approx(std::sqrt(*rep.sen * *rep.spe)).margin(1e-12));
        CHECK(*rep.ba_acc == Approx(0.5 * (*rep.sen + *rep.spe)).margin(1e-12));
        for (double rate : {*rep.sen, *rep.spe, rep.acc, *rep.auc, *rep.auprc}) {
            CHECK(rate >= 0.0);
            CHECK(rate <= 1.0);
        }
    }
}

TEST_CASE("report serialization round-trips losslessly") {
    RngStream rng(13);
    std::vector<int> y_true, y_pred;
    for (int i = 0; i < 25; ++i) {
        y_true.push_back(i % 3);
        y_pred.push_back(static_cast<int>(rng.next_below(3)));
    }
    auto rep = compute_multiclass_metrics(y_true, y_pred, one_hot_probs(y_pred, 3, 0.7));
    rep.config_digest = "deadbeef01";
    kv::Pairs p = eval_report_to_kv(rep);
    std::ostringstream os;
    for (const auto& [k, v] : p.items) os << k << " = " << v << "\n";
    std::istringstream is(os.str());
    auto back = eval_report_from_kv(kv::parse(is));
    CHECK(back.n == rep.n);
    CHECK(back.acc == rep.acc);
    CHECK(back.weighted_f1 == rep.weighted_f1);
    CHECK(back.macro_f1 == rep.macro_f1);
    CHECK(back.config_digest == rep.config_digest);
    REQUIRE(back.auc_macro_ovr.has_value() == rep.auc_macro_ovr.has_value());
    if (rep.auc_macro_ovr) CHECK(*back.auc_macro_ovr == *rep.auc_macro_ovr);
    for (std::size_t c = 0; c < rep.per_class_acc.size(); ++c) {
        REQUIRE(back.per_class_acc[c].has_value() == rep.per_class_acc[c].has_value());
        if (rep.per_class_acc[c]) CHECK(*back.per_class_acc[c] == *rep.per_class_acc[c]);
    }

    GapReport gap;
    gap.intra = 0.731234567890123;
    gap.inter = -0.122109876543210;
    gap.gap = gap.intra - gap.inter;
    gap.pairs_intra = 42;
    gap.pairs_inter = 58;
    kv::Pairs gp = gap_report_to_kv(gap);
    std::ostringstream os2;
    for (const auto& [k, v] : gp.items) os2 << k << " = " << v << "\n";
    std::istringstream is2(os2.str());
    auto gback = gap_report_from_kv(kv::parse(is2));
    CHECK(gback.intra == gap.intra);
    CHECK(gback.inter == gap.inter);
    CHECK(gback.gap == gap.gap);
    CHECK(gback.pairs_intra == gap.pairs_intra);
}

TEST_CASE("probability rows must sum to one") {
    std::vector<int> y{0, 1};
    std::vector<std::vector<double>> bad(2, {0.9, 0.9});
    CHECK_THROWS_AS(compute_multiclass_metrics(y, y, bad), UndefinedMetric);
}
