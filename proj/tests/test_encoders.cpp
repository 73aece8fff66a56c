#include <catch2/catch.hpp>
#include <filesystem>
#include <fstream>

#include "cfcml/embedder.hpp"
#include "cfcml/encoder.hpp"
#include "cfcml/shape_law.hpp"
#include "oracles.hpp"

using namespace cfcml;
using namespace cfcml::encoders;

TEST_CASE("stage shape law: reference configurations") {
    StageShapeLaw men{16, dataio::ImageMode::Vol3D};
    auto s2 = stage_shape(2, {128, 128, 24}, men);
    CHECK(s2.channels == 32);
    CHECK(s2.spatial == std::vector<int>{32, 32, 6});

    auto s1 = stage_shape(1, {128, 128, 24}, men);
    CHECK(s1.tokens() == 49152);

    auto s4 = stage_shape(4, {128, 128, 24}, men);
    CHECK(s4.channels == 64);
    CHECK(s4.spatial == std::vector<int>{8, 8, 1});

    StageShapeLaw derm{96, dataio::ImageMode::Planar2D};
    auto d1 = stage_shape(1, {224, 224}, derm);
    CHECK(d1.channels == 96);
    CHECK(d1.spatial == std::vector<int>{56, 56});

    StageShapeLaw small{16, dataio::ImageMode::Vol3D};
    auto b3 = stage_shape(3, {8, 8, 8}, small);
    CHECK(b3.channels == 48);
    CHECK(b3.spatial == std::vector<int>{1, 1, 1});

    CHECK_THROWS_AS(stage_shape(4, {128, 128, 25}, men), ShapeError);
    CHECK_THROWS_AS(stage_shape(1, {128, 128, 25}, men), ShapeError);
}

TEST_CASE("encoder stages obey the shape law for random admitted dims") {
    RngStream rng(31);
    for (int trial = 0; trial < 12; ++trial) {
        const bool vol = trial % 2 == 0;
        StageShapeLaw law{2 + 2 * static_cast<int>(rng.next_below(2)),
                          vol ? dataio::ImageMode::Vol3D : dataio::ImageMode::Planar2D};
        std::vector<int> spatial;
        const int unit = vol ? 16 : 32;
        const int rank_ = vol ? 3 : 2;
        for (int i = 0; i < rank_; ++i)
            spatial.push_back(unit * (1 + static_cast<int>(rng.next_below(2))));

        MultiStageEncoder enc;
        enc.law = law;
        enc.in_channels = 1;
        enc.input_spatial = spatial;
        enc.init("enc", rng);

        long long voxels = 1;
        for (int d : spatial) voxels *= d;
        Graph g;
        Var img = g.constant(Mat::normal(static_cast<int>(voxels), 1, 0.0, 1.0, rng));
        auto feats = enc.forward(g, img);
        REQUIRE(feats.stages.size() == 4);
        for (int s = 1; s <= 4; ++s) {
            auto expect = stage_shape(s, spatial, law);
            CHECK(expect.channels == law.base_channels * s);
            CHECK(feats.stages[s - 1].cols() == expect.channels);
            CHECK(feats.stages[s - 1].rows() == expect.tokens());
            for (std::size_t ax = 0; ax < spatial.size(); ++ax) {
                const int div = vol ? (1 << s) : (1 << (s + 1));
                CHECK(expect.spatial[ax] == spatial[ax] / div);
            }
            CHECK(feats.stages[s - 1].val().all_finite());
        }
    }
}

TEST_CASE("saturating dims still produce lawful stage outputs") {
    RngStream rng(32);
    StageShapeLaw law{4, dataio::ImageMode::Vol3D};
    MultiStageEncoder enc;
    enc.law = law;
    enc.in_channels = 1;
    enc.input_spatial = {16, 16, 24};  // depth saturates to 1 at stage 4
    enc.init("enc", rng);
    Graph g;
    Var img = g.constant(Mat::normal(16 * 16 * 24, 1, 0.0, 1.0, rng));
    auto feats = enc.forward(g, img);
    for (int s = 1; s <= 4; ++s) {
        auto expect = stage_shape(s, {16, 16, 24}, law);
        CHECK(feats.stages[s - 1].rows() == expect.tokens());
        CHECK(feats.stages[s - 1].cols() == expect.channels);
    }
    CHECK(feats.dims[3].spatial == std::vector<int>{1, 1, 1});
}

TEST_CASE("encoder output is sensitive to its input everywhere") {
    RngStream rng(33);
    StageShapeLaw law{2, dataio::ImageMode::Planar2D};
    MultiStageEncoder enc;
    enc.law = law;
    enc.in_channels = 1;
    enc.input_spatial = {32, 32};
    enc.init("enc", rng);
    Graph g;
    Var img = g.input(Mat::normal(32 * 32, 1, 0.0, 1.0, rng));
    auto feats = enc.forward(g, img);
    for (int s = 0; s < 4; ++s) {
        Graph g2;
        Var img2 = g2.input(img.val());
        auto f2 = enc.forward(g2, img2);
        Var loss = g2.sum_all(f2.stages[s]);
        g2.backward(loss);
        CHECK(g2.grad(img2).max_abs() > 0.0);
    }
}

TEST_CASE("encoder rejects inadmissible or mismatched inputs") {
    RngStream rng(34);
    StageShapeLaw law{2, dataio::ImageMode::Vol3D};
    MultiStageEncoder enc;
    enc.law = law;
    enc.in_channels = 1;
    enc.input_spatial = {16, 16, 25};  // 25 never halves
    CHECK_THROWS_AS(enc.init("enc", rng), ShapeError);

    enc.input_spatial = {16, 16, 16};
    enc.init("enc", rng);
    Graph g;
    Var wrong = g.constant(Mat::zeros(100, 1));
    CHECK_THROWS_AS(enc.forward(g, wrong), ShapeError);
}

TEST_CASE("2d stem collapses a leading channel dim") {
    RngStream rng(35);
    StageShapeLaw law{4, dataio::ImageMode::Planar2D};
    MultiStageEncoder enc;
    enc.law = law;
    enc.in_channels = 3;
    enc.input_spatial = {32, 32};
    enc.init("enc", rng);
    NdArray img({3, 32, 32});
    for (auto& v : img.v) v = rng.normal();
    Mat tokens = image_to_tokens(img, 2);
    REQUIRE(tokens.rows == 32 * 32);
    REQUIRE(tokens.cols == 3);
    Graph g;
    auto feats = enc.forward(g, g.constant(tokens));
    CHECK(feats.stages[0].cols() == 4);
    CHECK(feats.stages[0].rows() == 8 * 8);
}

TEST_CASE("hash embedder: frozen, unit norm, matches independent recompute") {
    HashEmbedder emb;
    const std::string sentence = "The sex of patient is male";
    auto v1 = emb.embed(sentence);
    auto v2 = emb.embed(sentence);
    REQUIRE(v1.size() == 512);
    CHECK(v1 == v2);

    double norm = 0.0;
    for (double x : v1) norm += x * x;
    CHECK(std::sqrt(norm) == Approx(1.0).margin(1e-12));

    auto ref = oracle::hash_embed_reference(sentence);
    for (int i = 0; i < 512; ++i) CHECK(v1[i] == Approx(ref[i]).margin(1e-12));
}

TEST_CASE("embed_tabular: one row per attribute, deterministic") {
    dataio::TabularRecord rec;
    rec.attributes = {{"sex", "male"},
                      {"age", "61"},
                      {"management", "excision"},
                      {"tumor area", "large"},
                      {"edema area", "small"}};
    HashEmbedder emb;
    auto table = dataio::TemplateTable::builtin();
    Mat m1 = embed_tabular(rec, table, emb);
    Mat m2 = embed_tabular(rec, table, emb);
    REQUIRE(m1.rows == 5);
    REQUIRE(m1.cols == 512);
    CHECK(m1.a == m2.a);

    dataio::TabularRecord bad;
    bad.attributes = {{"sex", ""}};
    CHECK_THROWS_AS(embed_tabular(bad, table, emb), EmptyValue);
}

TEST_CASE("precomputed embedder round trips through its file format") {
    namespace fs = std::filesystem;
    fs::path p = fs::temp_directory_path() / "cfcml_test_embed.tsv";
    HashEmbedder hash;
    const std::string s1 = "The sex of patient is male";
    const std::string s2 = "The age of patient is 61";
    {
        std::ofstream os(p, std::ios::trunc);
        for (const auto& s : {s1, s2}) {
            os << s << "\t";
            auto v = hash.embed(s);
            for (int i = 0; i < 512; ++i) os << (i ? " " : "") << kv::format_double(v[i]);
            os << "\n";
        }
    }
    PrecomputedEmbedder pre(p);
    auto a = pre.embed(s1);
    auto b = hash.embed(s1);
    for (int i = 0; i < 512; ++i) CHECK(a[i] == Approx(b[i]).margin(1e-15));
    CHECK_THROWS_AS(pre.embed("never seen"), UnknownAttribute);
}
