#include <catch2/catch.hpp>

#include "cfcml/ccrm.hpp"
#include "oracles.hpp"

using namespace cfcml;
using namespace cfcml::ccrm;

namespace {

struct Instance {
    std::vector<std::vector<Mat>> feats;  // [sample][modality] 1 x C_d
    std::vector<int> labels;
    int n_classes = 0;
};

Instance random_instance(RngStream& rng, int max_samples = 5, int max_modalities = 4,
                         int max_classes = 4, int max_cd = 8) {
    Instance ins;
    const int n = 2 + static_cast<int>(rng.next_below(max_samples - 1));
    const int m = 1 + static_cast<int>(rng.next_below(max_modalities));
    ins.n_classes = 2 + static_cast<int>(rng.next_below(max_classes - 1));
    const int cd = 2 + static_cast<int>(rng.next_below(max_cd - 1));
    // ensure at least two distinct classes appear
    for (int i = 0; i < n; ++i)
        ins.labels.push_back(i < 2 ? i : static_cast<int>(rng.next_below(ins.n_classes)));
    for (int i = 0; i < n; ++i) {
        std::vector<Mat> row;
        for (int j = 0; j < m; ++j) row.push_back(Mat::normal(1, cd, 0.0, 1.0, rng));
        ins.feats.push_back(std::move(row));
    }
    return ins;
}

oracle::Feats to_oracle(const Instance& ins) {
    oracle::Feats z;
    for (const auto& row : ins.feats) {
        std::vector<oracle::Vec> r;
        for (const Mat& m : row) r.push_back(m.a);
        z.push_back(r);
    }
    return z;
}

struct GraphEval {
    double l_sam, l_up, l_cp;
    std::vector<std::vector<double>> cp;  // defined prototypes flattened
};

GraphEval eval_losses(const Instance& ins, const ContrastConfig& cfg) {
    Graph g;
    std::vector<std::vector<Var>> feats;
    for (const auto& row : ins.feats) {
        std::vector<Var> r;
        for (const Mat& m : row) r.push_back(g.constant(m));
        feats.push_back(r);
    }
    PrototypeBank bank = compute_prototypes(g, feats, ins.labels, ins.n_classes);
    GraphEval out;
    out.l_sam = loss_sample_anchor(g, feats, ins.labels, bank, cfg).scalar();
    out.l_up = loss_unimodal_proto_anchor(g, bank, cfg).scalar();
    out.l_cp = loss_crossmodal_proto_anchor(g, bank, cfg).scalar();
    for (int l = 0; l < bank.n_classes; ++l)
        if (bank.crossmodal_defined[l]) out.cp.push_back(bank.crossmodal[l].val().a);
    return out;
}

}  // namespace

TEST_CASE("pool_tokens is the arithmetic token mean") {
    Graph g;
    Mat single(1, 3, {0.5, -1.0, 2.0});
    Var pooled = pool_tokens(g, g.constant(single));
    CHECK(pooled.val().a == single.a);

    Mat two(2, 2, {1.0, 0.0, 0.0, 1.0});
    Var p2 = pool_tokens(g, g.constant(two));
    CHECK(p2.val()(0, 0) == Approx(0.5));
    CHECK(p2.val()(0, 1) == Approx(0.5));

    RngStream rng(3);
    Mat r = Mat::normal(5, 3, 0.0, 1.0, rng);
    Var pr = pool_tokens(g, g.constant(r));
    for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int i = 0; i < 5; ++i) s += r(i, j);
        CHECK(pr.val()(0, j) == Approx(s / 5.0).margin(1e-12));
    }
}

TEST_CASE("prototypes: trivial cases") {
    Graph g;
    // one sample, three modalities with the same feature
    Mat z(1, 4, {1.0, 2.0, 3.0, 4.0});
    std::vector<std::vector<Var>> feats{{g.constant(z), g.constant(z), g.constant(z)}};
    auto bank = compute_prototypes(g, feats, {1}, 3);
    REQUIRE(bank.crossmodal_defined[1]);
    CHECK_FALSE(bank.crossmodal_defined[0]);
    CHECK_FALSE(bank.crossmodal_defined[2]);
    CHECK(bank.crossmodal[1].val().a == z.a);
    for (int j = 0; j < 3; ++j) {
        REQUIRE(bank.unimodal_defined[1][j]);
        CHECK(bank.unimodal[1][j].val().a == z.a);
    }

    // two class-0 samples: unimodal prototypes are per-modality means
    Mat a(1, 2, {2.0, 0.0}), b(1, 2, {0.0, 4.0});
    std::vector<std::vector<Var>> f2{{g.constant(a)}, {g.constant(b)}};
    auto bank2 = compute_prototypes(g, f2, {0, 0}, 1);
    CHECK(bank2.unimodal[0][0].val()(0, 0) == Approx(1.0));
    CHECK(bank2.unimodal[0][0].val()(0, 1) == Approx(2.0));
    CHECK(bank2.crossmodal[0].val()(0, 0) == Approx(1.0));
}

TEST_CASE("prototypes match the nested-loop reference on random batches") {
    RngStream rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        Instance ins = random_instance(rng);
        Graph g;
        std::vector<std::vector<Var>> feats;
        for (const auto& row : ins.feats) {
            std::vector<Var> r;
            for (const Mat& m : row) r.push_back(g.constant(m));
            feats.push_back(r);
        }
        auto bank = compute_prototypes(g, feats, ins.labels, ins.n_classes);
        auto ref = oracle::prototypes(to_oracle(ins), ins.labels, ins.n_classes);
        for (int l = 0; l < ins.n_classes; ++l) {
            REQUIRE(static_cast<bool>(bank.crossmodal_defined[l]) ==
                    static_cast<bool>(ref.cp_defined[l]));
            if (ref.cp_defined[l])
                for (std::size_t d = 0; d < ref.cp[l].size(); ++d)
                    REQUIRE(bank.crossmodal[l].val().a[d] == Approx(ref.cp[l][d]).margin(1e-9));
            for (int j = 0; j < bank.n_modalities; ++j) {
                REQUIRE(static_cast<bool>(bank.unimodal_defined[l][j]) ==
                        static_cast<bool>(ref.up_defined[l][j]));
                if (ref.up_defined[l][j])
                    for (std::size_t d = 0; d < ref.up[l][j].size(); ++d)
                        REQUIRE(bank.unimodal[l][j].val().a[d] ==
                                Approx(ref.up[l][j][d]).margin(1e-9));
            }
        }
    }
}

TEST_CASE("crossmodal prototype equals the mean of unimodal prototypes") {
    // holds exactly when every sample carries all modalities
    RngStream rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        Instance ins = random_instance(rng);
        Graph g;
        std::vector<std::vector<Var>> feats;
        for (const auto& row : ins.feats) {
            std::vector<Var> r;
            for (const Mat& m : row) r.push_back(g.constant(m));
            feats.push_back(r);
        }
        auto bank = compute_prototypes(g, feats, ins.labels, ins.n_classes);
        for (int l = 0; l < ins.n_classes; ++l) {
            if (!bank.crossmodal_defined[l]) continue;
            const int m = bank.n_modalities;
            for (int d = 0; d < bank.crossmodal[l].cols(); ++d) {
                double mean_up = 0.0;
                for (int j = 0; j < m; ++j) mean_up += bank.unimodal[l][j].val()(0, d);
                mean_up /= m;
                REQUIRE(bank.crossmodal[l].val()(0, d) == Approx(mean_up).margin(1e-6));
            }
        }
    }
}

TEST_CASE("op_similarity closed-form values") {
    ContrastConfig cfg;
    Graph g;
    Var anchor = g.constant(Mat(1, 2, {1.0, 0.0}));

    SECTION("empty set gives zero") {
        cfg.tau = 0.5;
        CHECK(op_similarity(g, anchor, {}, cfg).scalar() == 0.0);
    }
    SECTION("one member equal to the anchor at tau 1") {
        cfg.tau = 1.0;
        Var m = g.constant(Mat(1, 2, {2.0, 0.0}));  // same direction
        CHECK(op_similarity(g, anchor, {m}, cfg).scalar() == Approx(std::exp(1.0)).margin(1e-9));
    }
    SECTION("three members at tau 0.5") {
        cfg.tau = 0.5;
        std::vector<Var> members{g.constant(Mat(1, 2, {1.0, 0.0})),
                                 g.constant(Mat(1, 2, {0.0, 1.0})),
                                 g.constant(Mat(1, 2, {-1.0, 0.0}))};
        double expect = std::exp(2.0) + std::exp(0.0) + std::exp(-2.0);
        CHECK(op_similarity(g, anchor, members, cfg).scalar() == Approx(expect).margin(1e-9));
    }
    SECTION("literal variant scales the sum by 1/tau outside the exponential") {
        cfg.tau = 0.5;
        cfg.tau_outside_exp = true;
        Var m = g.constant(Mat(1, 2, {1.0, 0.0}));
        CHECK(op_similarity(g, anchor, {m}, cfg).scalar() ==
              Approx(std::exp(1.0) / 0.5).margin(1e-9));
    }
}

TEST_CASE("per-anchor ratio formula at the reference example values") {
    // one positive at cos 1, one negative at cos -1, tau 1
    Graph g;
    ContrastConfig cfg;
    cfg.tau = 1.0;
    Var anchor = g.constant(Mat(1, 2, {1.0, 0.0}));
    Var op_pos = op_similarity(g, anchor, {g.constant(Mat(1, 2, {1.0, 0.0}))}, cfg);
    Var op_neg = op_similarity(g, anchor, {g.constant(Mat(1, 2, {-1.0, 0.0}))}, cfg);
    double term = -std::log(op_pos.scalar() / (op_pos.scalar() + op_neg.scalar()));
    CHECK(term == Approx(0.1269).margin(1e-3));
    CHECK(term == Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(-1.0))))
                      .margin(1e-12));
    // a positive-only anchor contributes zero
    CHECK(-std::log(op_pos.scalar() / (op_pos.scalar() + 0.0)) == Approx(0.0).margin(1e-12));
}

TEST_CASE("losses match the loop reference on random instances") {
    RngStream rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        Instance ins = random_instance(rng);
        ContrastConfig cfg;
        cfg.tau = 0.05 + 0.3 * rng.next_double();
        oracle::LossFlags flags;
        if (trial % 3 == 1) {
            cfg.tau_outside_exp = true;
            flags.tau_outside = true;
        }
        if (trial % 4 == 1) {
            cfg.up_negatives_same_modality_only = true;
            flags.up_neg_same_modality = true;
        }
        if (trial % 5 == 2) {
            cfg.sample_positives_own_modality_only = true;
            flags.sample_pos_own_modality = true;
        }
        GraphEval got = eval_losses(ins, cfg);
        auto z = to_oracle(ins);
        auto ref_protos = oracle::prototypes(z, ins.labels, ins.n_classes);
        REQUIRE(got.l_sam ==
                Approx(oracle::loss_sample_anchor(z, ins.labels, ref_protos, cfg.tau, flags))
                    .margin(1e-6));
        REQUIRE(got.l_up ==
                Approx(oracle::loss_up_anchor(ref_protos, cfg.tau, flags)).margin(1e-6));
        REQUIRE(got.l_cp ==
                Approx(oracle::loss_cp_anchor(ref_protos, cfg.tau, flags)).margin(1e-6));
        CHECK(got.l_sam >= 0.0);
        CHECK(got.l_up >= 0.0);
        CHECK(got.l_cp >= 0.0);
        CHECK(std::isfinite(got.l_sam));
        CHECK(std::isfinite(got.l_up));
        CHECK(std::isfinite(got.l_cp));
    }
}

TEST_CASE("losses are invariant to positive rescaling of all features") {
    RngStream rng(12);
    Instance ins = random_instance(rng);
    ContrastConfig cfg;
    GraphEval base = eval_losses(ins, cfg);
    for (double lambda : {0.37, 5.0}) {
        Instance scaled = ins;
        for (auto& row : scaled.feats)
            for (Mat& m : row)
                for (double& v : m.a) v *= lambda;
        GraphEval got = eval_losses(scaled, cfg);
        CHECK(got.l_sam == Approx(base.l_sam).margin(1e-9));
        CHECK(got.l_up == Approx(base.l_up).margin(1e-9));
        CHECK(got.l_cp == Approx(base.l_cp).margin(1e-9));
    }
}

TEST_CASE("degenerate situations raise") {
    Graph g;
    Mat z(1, 3, {1.0, 0.0, 0.0});
    std::vector<std::vector<Var>> feats{{g.constant(z)}, {g.constant(z)}};
    std::vector<int> labels{0, 0};
    auto bank = compute_prototypes(g, feats, labels, 2);
    ContrastConfig cfg;
    CHECK_THROWS_AS(loss_sample_anchor(g, feats, labels, bank, cfg), DegenerateBatch);
    CHECK_THROWS_AS(loss_unimodal_proto_anchor(g, bank, cfg), DegenerateBatch);
    CHECK_THROWS_AS(loss_crossmodal_proto_anchor(g, bank, cfg), DegenerateBatch);
    ContrastConfig bad;
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), DegenerateBatch);
}

TEST_CASE("identical class prototypes: the adversarial closed form") {
    // all features equal => every cosine is 1; with M modalities the
    // crossmodal anchor term is -log(M / (M + 1)) per anchor
    const int m = 3;
    Graph g;
    Mat z(1, 4, {0.3, -0.2, 0.9, 0.1});
    std::vector<std::vector<Var>> feats;
    for (int i = 0; i < 2; ++i) {
        std::vector<Var> row;
        for (int j = 0; j < m; ++j) row.push_back(g.constant(z));
        feats.push_back(row);
    }
    std::vector<int> labels{0, 1};
    auto bank = compute_prototypes(g, feats, labels, 2);
    ContrastConfig cfg;
    cfg.tau = 0.07;
    double got = loss_crossmodal_proto_anchor(g, bank, cfg).scalar();
    double expect = -std::log(static_cast<double>(m) / (m + 1.0));
    CHECK(got == Approx(expect).margin(1e-9));
}

TEST_CASE("detached prototypes block gradient flow but keep values") {
    RngStream rng(21);
    Instance ins = random_instance(rng, 4, 3, 3, 4);
    ContrastConfig cfg;

    auto run = [&](bool detach) {
        Graph g;
        std::vector<std::vector<Var>> feats;
        for (const auto& row : ins.feats) {
            std::vector<Var> r;
            for (const Mat& m : row) r.push_back(g.input(m));
            feats.push_back(r);
        }
        auto bank = compute_prototypes(g, feats, ins.labels, ins.n_classes);
        if (detach) bank = detach_bank(g, bank);
        Var up = loss_unimodal_proto_anchor(g, bank, cfg);
        Var cp = loss_crossmodal_proto_anchor(g, bank, cfg);
        Var total = g.add(up, cp);
        g.backward(total);
        double grad_mass = 0.0;
        for (auto& row : feats)
            for (Var v : row) grad_mass += g.grad(v).max_abs();
        return std::pair<double, double>{total.scalar(), grad_mass};
    };

    auto [v_live, g_live] = run(false);
    auto [v_detached, g_detached] = run(true);
    CHECK(v_live == Approx(v_detached).margin(1e-12));  // values unchanged
    CHECK(g_live > 0.0);                                // gradients flow normally
    CHECK(g_detached == 0.0);  // prototype-only losses see constants
}

TEST_CASE("M=1 collapse: unimodal prototype equals the crossmodal one") {
    Graph g;
    Mat a(1, 3, {1.0, 0.0, 0.0}), b(1, 3, {0.0, 1.0, 0.0});
    std::vector<std::vector<Var>> feats{{g.constant(a)}, {g.constant(b)}};
    std::vector<int> labels{0, 1};
    auto bank = compute_prototypes(g, feats, labels, 2);
    for (int l = 0; l < 2; ++l)
        for (int d = 0; d < 3; ++d)
            CHECK(bank.unimodal[l][0].val()(0, d) ==
                  Approx(bank.crossmodal[l].val()(0, d)).margin(1e-12));
    ContrastConfig cfg;
    // positives sit at cosine 1, so op+ is exactly exp(1/tau)
    double l_up = loss_unimodal_proto_anchor(g, bank, cfg).scalar();
    double op_pos = std::exp(1.0 / cfg.tau);
    double op_neg = std::exp(oracle::cosine(a.a, b.a) / cfg.tau);
    CHECK(l_up == Approx(-std::log(op_pos / (op_pos + op_neg))).margin(1e-9));
}

TEST_CASE("analytic loss gradients agree with central finite differences") {
    RngStream rng(14);
    const double h = 1e-4;
    for (int trial = 0; trial < 3; ++trial) {
        Instance ins = random_instance(rng, 4, 3, 3, 4);
        ContrastConfig cfg;

        auto eval_total = [&](const Instance& in) {
            Graph g;
            std::vector<std::vector<Var>> feats;
            for (const auto& row : in.feats) {
                std::vector<Var> r;
                for (const Mat& m : row) r.push_back(g.input(m));
                feats.push_back(r);
            }
            auto bank = compute_prototypes(g, feats, in.labels, in.n_classes);
            Var total = g.add(loss_sample_anchor(g, feats, in.labels, bank, cfg),
                              g.add(loss_unimodal_proto_anchor(g, bank, cfg),
                                    loss_crossmodal_proto_anchor(g, bank, cfg)));
            return total.scalar();
        };

        Graph g;
        std::vector<std::vector<Var>> feats;
        for (const auto& row : ins.feats) {
            std::vector<Var> r;
            for (const Mat& m : row) r.push_back(g.input(m));
            feats.push_back(r);
        }
        auto bank = compute_prototypes(g, feats, ins.labels, ins.n_classes);
        Var total = g.add(loss_sample_anchor(g, feats, ins.labels, bank, cfg),
                          g.add(loss_unimodal_proto_anchor(g, bank, cfg),
                                loss_crossmodal_proto_anchor(g, bank, cfg)));
        g.backward(total);

        for (std::size_t i = 0; i < ins.feats.size(); ++i) {
            for (std::size_t j = 0; j < ins.feats[i].size(); ++j) {
                for (std::size_t e = 0; e < ins.feats[i][j].a.size(); ++e) {
                    Instance plus = ins, minus = ins;
                    plus.feats[i][j].a[e] += h;
                    minus.feats[i][j].a[e] -= h;
                    double fd = (eval_total(plus) - eval_total(minus)) / (2 * h);
                    double an = g.grad(feats[i][j]).a[e];
                    double rel = std::abs(an - fd) / std::max({1e-8, std::abs(an), std::abs(fd)});
                    REQUIRE(rel < 1e-3);
                }
            }
        }
    }
}
