#include <catch2/catch.hpp>

#include "cfcml/graph.hpp"
#include "cfcml/rng.hpp"

using namespace cfcml;

namespace {

// Scalarize `out` against a fixed random weighting so every entry of the
// output contributes a distinct gradient signal.
Var weighted_sum(Graph& g, Var out, std::uint64_t seed) {
    RngStream rng(seed);
    Mat w = Mat::uniform(out.rows(), out.cols(), -1.0, 1.0, rng);
    return g.sum_all(g.cmul(out, g.constant(w)));
}

// Compares analytic input gradients of build(...) against central finite
// differences over every entry of every input.
template <typename BuildFn>
double max_grad_err(std::vector<Mat> inputs, BuildFn build, double h = 1e-5) {
    auto eval = [&](const std::vector<Mat>& ins) {
        Graph g;
        std::vector<Var> vars;
        for (const Mat& m : ins) vars.push_back(g.input(m));
        Var out = build(g, vars);
        return weighted_sum(g, out, 1234).scalar();
    };

    Graph g;
    std::vector<Var> vars;
    for (const Mat& m : inputs) vars.push_back(g.input(m));
    Var out = build(g, vars);
    Var loss = weighted_sum(g, out, 1234);
    g.backward(loss);

    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Mat& analytic = g.grad(vars[k]);
        for (std::size_t e = 0; e < inputs[k].a.size(); ++e) {
            std::vector<Mat> plus = inputs, minus = inputs;
            plus[k].a[e] += h;
            minus[k].a[e] -= h;
            double fd = (eval(plus) - eval(minus)) / (2.0 * h);
            double a = analytic.a[e];
            double err = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

Mat rnd(int r, int c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    RngStream rng(seed);
    return Mat::uniform(r, c, lo, hi, rng);
}

}  // namespace

TEST_CASE("matmul value against hand loop") {
    Mat a = rnd(3, 4, 1), b = rnd(4, 2, 2);
    Mat c = matmul_val(a, b);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
            REQUIRE(c(i, j) == Approx(s).margin(1e-12));
        }
    // transposed variants agree with explicit transposition
    Mat at(4, 3);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 4; ++k) at(k, i) = a(i, k);
    Mat c2 = matmul_val(at, b, true, false);
    for (std::size_t i = 0; i < c.a.size(); ++i) REQUIRE(c2.a[i] == Approx(c.a[i]).margin(1e-12));
    Mat bt(2, 4);
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 2; ++j) bt(j, k) = b(k, j);
    Mat c3 = matmul_val(a, bt, false, true);
    for (std::size_t i = 0; i < c.a.size(); ++i) REQUIRE(c3.a[i] == Approx(c.a[i]).margin(1e-12));
}

TEST_CASE("gradients: arithmetic ops") {
    REQUIRE(max_grad_err({rnd(3, 4, 3), rnd(3, 4, 4)}, [](Graph& g, std::vector<Var>& v) {
                return g.add(v[0], v[1]);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(3, 4, 5), rnd(3, 4, 6)}, [](Graph& g, std::vector<Var>& v) {
                return g.sub(v[0], v[1]);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(3, 4, 7), rnd(3, 4, 8)}, [](Graph& g, std::vector<Var>& v) {
                return g.cmul(v[0], v[1]);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(3, 4, 9), rnd(3, 4, 10, 0.5, 2.0)},
                         [](Graph& g, std::vector<Var>& v) { return g.divide(v[0], v[1]); }) <
            1e-6);
    REQUIRE(max_grad_err({rnd(3, 4, 11)}, [](Graph& g, std::vector<Var>& v) {
                return g.add_const(g.scale(v[0], -2.5), 0.75);
            }) < 1e-6);
}

TEST_CASE("gradients: matmul variants") {
    REQUIRE(max_grad_err({rnd(3, 4, 12), rnd(4, 2, 13)}, [](Graph& g, std::vector<Var>& v) {
                return g.matmul(v[0], v[1]);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(4, 3, 14), rnd(4, 2, 15)}, [](Graph& g, std::vector<Var>& v) {
                return g.matmul(v[0], v[1], true, false);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(3, 4, 16), rnd(2, 4, 17)}, [](Graph& g, std::vector<Var>& v) {
                return g.matmul(v[0], v[1], false, true);
            }) < 1e-6);
}

TEST_CASE("gradients: bias and broadcast ops") {
    REQUIRE(max_grad_err({rnd(3, 4, 18), rnd(1, 4, 19)}, [](Graph& g, std::vector<Var>& v) {
                return g.row_bias(v[0], v[1]);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(3, 4, 20), rnd(3, 1, 21)}, [](Graph& g, std::vector<Var>& v) {
                return g.col_bias(v[0], v[1]);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(3, 4, 22), rnd(3, 1, 23, 0.5, 1.5)},
                         [](Graph& g, std::vector<Var>& v) { return g.col_div(v[0], v[1]); }) <
            1e-6);
}

TEST_CASE("gradients: nonlinearities") {
    REQUIRE(max_grad_err({rnd(3, 4, 24)}, [](Graph& g, std::vector<Var>& v) {
                return g.tanh_(v[0]);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(3, 4, 25)}, [](Graph& g, std::vector<Var>& v) {
                return g.exp_(v[0]);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(3, 4, 26, 0.2, 3.0)}, [](Graph& g, std::vector<Var>& v) {
                return g.log_(v[0]);
            }) < 1e-6);
}

TEST_CASE("gradients and normalization: softmax family") {
    REQUIRE(max_grad_err({rnd(3, 5, 27)}, [](Graph& g, std::vector<Var>& v) {
                return g.softmax_rows(v[0]);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(3, 5, 28)}, [](Graph& g, std::vector<Var>& v) {
                return g.log_softmax_rows(v[0]);
            }) < 1e-6);

    Graph g;
    Var y = g.softmax_rows(g.constant(rnd(4, 7, 29, -5.0, 5.0)));
    for (int i = 0; i < 4; ++i) {
        double s = 0.0;
        for (int j = 0; j < 7; ++j) {
            s += y.val()(i, j);
            REQUIRE(y.val()(i, j) >= 0.0);
        }
        REQUIRE(s == Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("gradients: concat and slice") {
    REQUIRE(max_grad_err({rnd(2, 4, 30), rnd(3, 4, 31)}, [](Graph& g, std::vector<Var>& v) {
                return g.concat_rows({v[0], v[1]});
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(3, 2, 32), rnd(3, 5, 33)}, [](Graph& g, std::vector<Var>& v) {
                return g.concat_cols({v[0], v[1]});
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(3, 6, 34)}, [](Graph& g, std::vector<Var>& v) {
                return g.slice_cols(v[0], 1, 4);
            }) < 1e-6);
}

TEST_CASE("gradients: reductions and selection") {
    REQUIRE(max_grad_err({rnd(6, 3, 35)}, [](Graph& g, std::vector<Var>& v) {
                return g.pool_rows(v[0], {{0, 3}, {1, 4}, {2, 5}});
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(5, 3, 36)}, [](Graph& g, std::vector<Var>& v) {
                return g.mean_rows(v[0]);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(4, 3, 37)}, [](Graph& g, std::vector<Var>& v) {
                return g.sum_cols(v[0]);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(4, 3, 38)}, [](Graph& g, std::vector<Var>& v) {
                return g.select(v[0], 2, 1);
            }) < 1e-6);
    REQUIRE(max_grad_err({rnd(4, 3, 39)}, [](Graph& g, std::vector<Var>& v) {
                return g.mean_all(v[0]);
            }) < 1e-6);
}

TEST_CASE("gradients: row normalization") {
    REQUIRE(max_grad_err({rnd(4, 5, 40)}, [](Graph& g, std::vector<Var>& v) {
                return g.normalize_rows(v[0]);
            }) < 1e-6);
    // rows come out unit length
    Graph g;
    Var u = g.normalize_rows(g.constant(rnd(5, 6, 41, -2.0, 2.0)));
    for (int i = 0; i < 5; ++i) {
        double s = 0.0;
        for (int j = 0; j < 6; ++j) s += u.val()(i, j) * u.val()(i, j);
        REQUIRE(std::sqrt(s) == Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("gradients: composite expression reusing a node") {
    // y = tanh(A B); loss uses y twice through different paths
    REQUIRE(max_grad_err({rnd(3, 4, 42), rnd(4, 3, 43)}, [](Graph& g, std::vector<Var>& v) {
                Var y = g.tanh_(g.matmul(v[0], v[1]));
                return g.add(g.cmul(y, y), g.scale(y, 0.5));
            }) < 1e-6);
}

TEST_CASE("params accumulate gradients across multiple uses") {
    RngStream rng(77);
    Param p("w", Mat::uniform(2, 2, -1, 1, rng));
    Graph g;
    Var w1 = g.param(p);
    Var w2 = g.param(p);  // spliced twice, gradients must sum
    Var loss = g.sum_all(g.add(w1, g.cmul(w2, w2)));
    g.backward(loss);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            REQUIRE(p.grad(i, j) == Approx(1.0 + 2.0 * p.value(i, j)).margin(1e-12));
}

TEST_CASE("backward rejects non-scalar roots") {
    Graph g;
    Var x = g.input(Mat::zeros(2, 2));
    REQUIRE_THROWS_AS(g.backward(x), ShapeError);
}
