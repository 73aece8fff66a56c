#pragma once
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cfcml/mat.hpp"

namespace cfcml {

// A trainable tensor. Lives outside any Graph so it persists across forward
// passes; Graph::param() splices it into a tape and backward() accumulates
// into `grad`.
struct Param {
    std::string name;
    Mat value;
    Mat grad;

    Param() = default;
    Param(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) {
        grad = Mat::zeros(value.rows, value.cols);
    }
    void zero_grad() { std::fill(grad.a.begin(), grad.a.end(), 0.0); }
};

class Graph;

// Handle to a node on a Graph's tape.
struct Var {
    Graph* g = nullptr;
    int id = -1;

    bool valid() const { return g != nullptr && id >= 0; }
    inline int rows() const;
    inline int cols() const;
    inline const Mat& val() const;
    inline double scalar() const;
};

// Reverse-mode tape over matrix operations. Values are computed eagerly as
// the expression is built; backward() walks the tape once in reverse.
// Single-threaded by contract; one Graph per forward pass.
class Graph {
public:
    // ---- leaves ----

    Var constant(Mat v) { return make(std::move(v), false, {}, nullptr); }

    // grad-tracked leaf not bound to a Param (for input-sensitivity checks)
    Var input(Mat v) { return make(std::move(v), true, {}, nullptr); }

    Var param(Param& p) {
        Var v = make(p.value, true, {}, nullptr);
        nodes_[v.id].bound = &p;
        return v;
    }

    // ---- arithmetic ----

    Var add(Var x, Var y) {
        require_same_shape(x, y, "add");
        Mat out = node(x).val;
        out += node(y).val;
        return make(std::move(out), tracked(x) || tracked(y), {x.id, y.id},
                    [](Graph& g, int self) {
                        const Mat& go = g.nodes_[self].grad;
                        g.accumulate(g.nodes_[self].parents[0], go);
                        g.accumulate(g.nodes_[self].parents[1], go);
                    });
    }

    Var sub(Var x, Var y) {
        require_same_shape(x, y, "sub");
        Mat out = node(x).val;
        out -= node(y).val;
        return make(std::move(out), tracked(x) || tracked(y), {x.id, y.id},
                    [](Graph& g, int self) {
                        const Mat& go = g.nodes_[self].grad;
                        g.accumulate(g.nodes_[self].parents[0], go);
                        Mat neg = go;
                        neg *= -1.0;
                        g.accumulate(g.nodes_[self].parents[1], neg);
                    });
    }

    // elementwise product
    Var cmul(Var x, Var y) {
        require_same_shape(x, y, "cmul");
        Mat out = node(x).val;
        for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] *= node(y).val.a[i];
        return make(std::move(out), tracked(x) || tracked(y), {x.id, y.id},
                    [](Graph& g, int self) {
                        auto& n = g.nodes_[self];
                        int px = n.parents[0], py = n.parents[1];
                        if (g.nodes_[px].track) {
                            Mat gx = n.grad;
                            for (std::size_t i = 0; i < gx.a.size(); ++i)
                                gx.a[i] *= g.nodes_[py].val.a[i];
                            g.accumulate(px, gx);
                        }
                        if (g.nodes_[py].track) {
                            Mat gy = n.grad;
                            for (std::size_t i = 0; i < gy.a.size(); ++i)
                                gy.a[i] *= g.nodes_[px].val.a[i];
                            g.accumulate(py, gy);
                        }
                    });
    }

    // elementwise quotient; denominators must be nonzero
    Var divide(Var x, Var y) {
        require_same_shape(x, y, "divide");
        Mat out = node(x).val;
        for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] /= node(y).val.a[i];
        return make(std::move(out), tracked(x) || tracked(y), {x.id, y.id},
                    [](Graph& g, int self) {
                        auto& n = g.nodes_[self];
                        int px = n.parents[0], py = n.parents[1];
                        const Mat& yv = g.nodes_[py].val;
                        if (g.nodes_[px].track) {
                            Mat gx = n.grad;
                            for (std::size_t i = 0; i < gx.a.size(); ++i) gx.a[i] /= yv.a[i];
                            g.accumulate(px, gx);
                        }
                        if (g.nodes_[py].track) {
                            Mat gy = n.grad;
                            for (std::size_t i = 0; i < gy.a.size(); ++i)
                                gy.a[i] *= -n.val.a[i] / yv.a[i];
                            g.accumulate(py, gy);
                        }
                    });
    }

    Var scale(Var x, double s) {
        Mat out = node(x).val;
        out *= s;
        return make(std::move(out), tracked(x), {x.id}, [s](Graph& g, int self) {
            Mat gx = g.nodes_[self].grad;
            gx *= s;
            g.accumulate(g.nodes_[self].parents[0], gx);
        });
    }

    Var add_const(Var x, double c) {
        Mat out = node(x).val;
        for (auto& v : out.a) v += c;
        return make(std::move(out), tracked(x), {x.id}, [](Graph& g, int self) {
            g.accumulate(g.nodes_[self].parents[0], g.nodes_[self].grad);
        });
    }

    Var matmul(Var a, Var b, bool ta = false, bool tb = false) {
        Mat out = matmul_val(node(a).val, node(b).val, ta, tb);
        return make(std::move(out), tracked(a) || tracked(b), {a.id, b.id},
                    [ta, tb](Graph& g, int self) {
                        auto& n = g.nodes_[self];
                        int pa = n.parents[0], pb = n.parents[1];
                        const Mat& go = n.grad;
                        const Mat& av = g.nodes_[pa].val;
                        const Mat& bv = g.nodes_[pb].val;
                        if (!ta && !tb) {
                            if (g.nodes_[pa].track) g.accumulate(pa, matmul_val(go, bv, false, true));
                            if (g.nodes_[pb].track) g.accumulate(pb, matmul_val(av, go, true, false));
                        } else if (ta) {
                            // C = A^T B : dA = B dC^T is (k x m); dA(p,i) = sum_j B(p,j) dC(i,j)
                            if (g.nodes_[pa].track) g.accumulate(pa, matmul_val(bv, go, false, true));
                            if (g.nodes_[pb].track) g.accumulate(pb, matmul_val(av, go, false, false));
                        } else {
                            // C = A B^T : dA = dC B ; dB(j,p) = sum_i dC(i,j) A(i,p)
                            if (g.nodes_[pa].track) g.accumulate(pa, matmul_val(go, bv, false, false));
                            if (g.nodes_[pb].track) g.accumulate(pb, matmul_val(go, av, true, false));
                        }
                    });
    }

    // add a 1 x c row vector to every row
    Var row_bias(Var x, Var b) {
        const Mat& xv = node(x).val;
        const Mat& bv = node(b).val;
        if (bv.rows != 1 || bv.cols != xv.cols) throw ShapeError("row_bias: bias must be 1 x cols");
        Mat out = xv;
        for (int i = 0; i < out.rows; ++i)
            for (int j = 0; j < out.cols; ++j) out(i, j) += bv(0, j);
        return make(std::move(out), tracked(x) || tracked(b), {x.id, b.id},
                    [](Graph& g, int self) {
                        auto& n = g.nodes_[self];
                        const Mat& go = n.grad;
                        if (g.nodes_[n.parents[0]].track) g.accumulate(n.parents[0], go);
                        if (g.nodes_[n.parents[1]].track) {
                            Mat gb(1, go.cols);
                            for (int i = 0; i < go.rows; ++i)
                                for (int j = 0; j < go.cols; ++j) gb(0, j) += go(i, j);
                            g.accumulate(n.parents[1], gb);
                        }
                    });
    }

    // add an n x 1 column vector to every column
    Var col_bias(Var x, Var b) {
        const Mat& xv = node(x).val;
        const Mat& bv = node(b).val;
        if (bv.cols != 1 || bv.rows != xv.rows) throw ShapeError("col_bias: bias must be rows x 1");
        Mat out = xv;
        for (int i = 0; i < out.rows; ++i)
            for (int j = 0; j < out.cols; ++j) out(i, j) += bv(i, 0);
        return make(std::move(out), tracked(x) || tracked(b), {x.id, b.id},
                    [](Graph& g, int self) {
                        auto& n = g.nodes_[self];
                        const Mat& go = n.grad;
                        if (g.nodes_[n.parents[0]].track) g.accumulate(n.parents[0], go);
                        if (g.nodes_[n.parents[1]].track) {
                            Mat gb(go.rows, 1);
                            for (int i = 0; i < go.rows; ++i)
                                for (int j = 0; j < go.cols; ++j) gb(i, 0) += go(i, j);
                            g.accumulate(n.parents[1], gb);
                        }
                    });
    }

    // divide every row entry by the row's entry of an n x 1 column
    Var col_div(Var x, Var d) {
        const Mat& xv = node(x).val;
        const Mat& dv = node(d).val;
        if (dv.cols != 1 || dv.rows != xv.rows) throw ShapeError("col_div: divisor must be rows x 1");
        Mat out = xv;
        for (int i = 0; i < out.rows; ++i)
            for (int j = 0; j < out.cols; ++j) out(i, j) /= dv(i, 0);
        return make(std::move(out), tracked(x) || tracked(d), {x.id, d.id},
                    [](Graph& g, int self) {
                        auto& n = g.nodes_[self];
                        const Mat& go = n.grad;
                        const Mat& dv = g.nodes_[n.parents[1]].val;
                        if (g.nodes_[n.parents[0]].track) {
                            Mat gx = go;
                            for (int i = 0; i < gx.rows; ++i)
                                for (int j = 0; j < gx.cols; ++j) gx(i, j) /= dv(i, 0);
                            g.accumulate(n.parents[0], gx);
                        }
                        if (g.nodes_[n.parents[1]].track) {
                            Mat gd(go.rows, 1);
                            for (int i = 0; i < go.rows; ++i) {
                                double s = 0.0;
                                for (int j = 0; j < go.cols; ++j) s += go(i, j) * n.val(i, j);
                                gd(i, 0) = -s / dv(i, 0);
                            }
                            g.accumulate(n.parents[1], gd);
                        }
                    });
    }

    // ---- elementwise nonlinearities ----

    Var tanh_(Var x) {
        Mat out = node(x).val;
        for (auto& v : out.a) v = std::tanh(v);
        return make(std::move(out), tracked(x), {x.id}, [](Graph& g, int self) {
            auto& n = g.nodes_[self];
            Mat gx = n.grad;
            for (std::size_t i = 0; i < gx.a.size(); ++i) gx.a[i] *= 1.0 - n.val.a[i] * n.val.a[i];
            g.accumulate(n.parents[0], gx);
        });
    }

    Var exp_(Var x) {
        Mat out = node(x).val;
        for (auto& v : out.a) v = std::exp(v);
        return make(std::move(out), tracked(x), {x.id}, [](Graph& g, int self) {
            auto& n = g.nodes_[self];
            Mat gx = n.grad;
            for (std::size_t i = 0; i < gx.a.size(); ++i) gx.a[i] *= n.val.a[i];
            g.accumulate(n.parents[0], gx);
        });
    }

    // natural log; inputs must be positive
    Var log_(Var x) {
        Mat out = node(x).val;
        for (auto& v : out.a) v = std::log(v);
        return make(std::move(out), tracked(x), {x.id}, [](Graph& g, int self) {
            auto& n = g.nodes_[self];
            Mat gx = n.grad;
            const Mat& xv = g.nodes_[n.parents[0]].val;
            for (std::size_t i = 0; i < gx.a.size(); ++i) gx.a[i] /= xv.a[i];
            g.accumulate(n.parents[0], gx);
        });
    }

    // ---- softmax family ----

    Var softmax_rows(Var x) {
        Mat out = node(x).val;
        softmax_rows_val(out);
        return make(std::move(out), tracked(x), {x.id}, [](Graph& g, int self) {
            auto& n = g.nodes_[self];
            Mat gx(n.val.rows, n.val.cols);
            for (int i = 0; i < n.val.rows; ++i) {
                double dot = 0.0;
                for (int j = 0; j < n.val.cols; ++j) dot += n.grad(i, j) * n.val(i, j);
                for (int j = 0; j < n.val.cols; ++j)
                    gx(i, j) = n.val(i, j) * (n.grad(i, j) - dot);
            }
            g.accumulate(n.parents[0], gx);
        });
    }

    Var log_softmax_rows(Var x) {
        const Mat& xv = node(x).val;
        Mat out(xv.rows, xv.cols);
        for (int i = 0; i < xv.rows; ++i) {
            double mx = xv(i, 0);
            for (int j = 1; j < xv.cols; ++j) mx = std::max(mx, xv(i, j));
            double lse = 0.0;
            for (int j = 0; j < xv.cols; ++j) lse += std::exp(xv(i, j) - mx);
            lse = mx + std::log(lse);
            for (int j = 0; j < xv.cols; ++j) out(i, j) = xv(i, j) - lse;
        }
        return make(std::move(out), tracked(x), {x.id}, [](Graph& g, int self) {
            auto& n = g.nodes_[self];
            Mat gx(n.val.rows, n.val.cols);
            for (int i = 0; i < n.val.rows; ++i) {
                double gsum = 0.0;
                for (int j = 0; j < n.val.cols; ++j) gsum += n.grad(i, j);
                for (int j = 0; j < n.val.cols; ++j)
                    gx(i, j) = n.grad(i, j) - std::exp(n.val(i, j)) * gsum;
            }
            g.accumulate(n.parents[0], gx);
        });
    }

    // ---- shape ops ----

    Var concat_rows(const std::vector<Var>& xs) {
        if (xs.empty()) throw ShapeError("concat_rows: empty list");
        int cols = node(xs[0]).val.cols;
        int rows = 0;
        bool track = false;
        std::vector<int> parents;
        for (Var v : xs) {
            if (node(v).val.cols != cols) throw ShapeError("concat_rows: column mismatch");
            rows += node(v).val.rows;
            track = track || tracked(v);
            parents.push_back(v.id);
        }
        Mat out(rows, cols);
        int r = 0;
        for (Var v : xs) {
            const Mat& m = node(v).val;
            std::copy(m.a.begin(), m.a.end(), out.a.begin() + static_cast<std::size_t>(r) * cols);
            r += m.rows;
        }
        return make(std::move(out), track, std::move(parents), [](Graph& g, int self) {
            auto& n = g.nodes_[self];
            int r = 0;
            const int cols = n.val.cols;
            for (int p : n.parents) {
                const int pr = g.nodes_[p].val.rows;
                if (g.nodes_[p].track) {
                    Mat gp(pr, cols);
                    std::copy(n.grad.a.begin() + static_cast<std::size_t>(r) * cols,
                              n.grad.a.begin() + static_cast<std::size_t>(r + pr) * cols,
                              gp.a.begin());
                    g.accumulate(p, gp);
                }
                r += pr;
            }
        });
    }

    Var concat_cols(const std::vector<Var>& xs) {
        if (xs.empty()) throw ShapeError("concat_cols: empty list");
        int rows = node(xs[0]).val.rows;
        int cols = 0;
        bool track = false;
        std::vector<int> parents;
        for (Var v : xs) {
            if (node(v).val.rows != rows) throw ShapeError("concat_cols: row mismatch");
            cols += node(v).val.cols;
            track = track || tracked(v);
            parents.push_back(v.id);
        }
        Mat out(rows, cols);
        int c = 0;
        for (Var v : xs) {
            const Mat& m = node(v).val;
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < m.cols; ++j) out(i, c + j) = m(i, j);
            c += m.cols;
        }
        return make(std::move(out), track, std::move(parents), [](Graph& g, int self) {
            auto& n = g.nodes_[self];
            int c = 0;
            for (int p : n.parents) {
                const int pc = g.nodes_[p].val.cols;
                if (g.nodes_[p].track) {
                    Mat gp(n.val.rows, pc);
                    for (int i = 0; i < n.val.rows; ++i)
                        for (int j = 0; j < pc; ++j) gp(i, j) = n.grad(i, c + j);
                    g.accumulate(p, gp);
                }
                c += pc;
            }
        });
    }

    Var slice_cols(Var x, int c0, int c1) {
        const Mat& xv = node(x).val;
        if (c0 < 0 || c1 > xv.cols || c0 >= c1) throw ShapeError("slice_cols: bad range");
        Mat out(xv.rows, c1 - c0);
        for (int i = 0; i < xv.rows; ++i)
            for (int j = c0; j < c1; ++j) out(i, j - c0) = xv(i, j);
        return make(std::move(out), tracked(x), {x.id}, [c0](Graph& g, int self) {
            auto& n = g.nodes_[self];
            const Mat& pv = g.nodes_[n.parents[0]].val;
            Mat gp(pv.rows, pv.cols);
            for (int i = 0; i < n.grad.rows; ++i)
                for (int j = 0; j < n.grad.cols; ++j) gp(i, c0 + j) = n.grad(i, j);
            g.accumulate(n.parents[0], gp);
        });
    }

    // mean over fixed row groups; groups must cover disjoint index sets
    Var pool_rows(Var x, std::vector<std::vector<int>> groups) {
        const Mat& xv = node(x).val;
        Mat out(static_cast<int>(groups.size()), xv.cols);
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            for (int r : groups[gi])
                for (int j = 0; j < xv.cols; ++j) out(static_cast<int>(gi), j) += xv(r, j);
            const double inv = 1.0 / static_cast<double>(groups[gi].size());
            for (int j = 0; j < xv.cols; ++j) out(static_cast<int>(gi), j) *= inv;
        }
        auto shared = std::make_shared<std::vector<std::vector<int>>>(std::move(groups));
        return make(std::move(out), tracked(x), {x.id}, [shared](Graph& g, int self) {
            auto& n = g.nodes_[self];
            const Mat& pv = g.nodes_[n.parents[0]].val;
            Mat gp(pv.rows, pv.cols);
            for (std::size_t gi = 0; gi < shared->size(); ++gi) {
                const double inv = 1.0 / static_cast<double>((*shared)[gi].size());
                for (int r : (*shared)[gi])
                    for (int j = 0; j < pv.cols; ++j)
                        gp(r, j) += n.grad(static_cast<int>(gi), j) * inv;
            }
            g.accumulate(n.parents[0], gp);
        });
    }

    // concatenate fixed row groups into single rows: group g of size B over a
    // (n x c) input yields row g of width B*c, blocks in stored group order.
    // All groups must share one size.
    Var gather_concat_rows(Var x, std::vector<std::vector<int>> groups) {
        const Mat& xv = node(x).val;
        if (groups.empty()) throw ShapeError("gather_concat_rows: no groups");
        const std::size_t block = groups[0].size();
        for (const auto& g : groups)
            if (g.size() != block) throw ShapeError("gather_concat_rows: ragged groups");
        Mat out(static_cast<int>(groups.size()), static_cast<int>(block) * xv.cols);
        for (std::size_t gi = 0; gi < groups.size(); ++gi)
            for (std::size_t b = 0; b < block; ++b)
                for (int j = 0; j < xv.cols; ++j)
                    out(static_cast<int>(gi), static_cast<int>(b) * xv.cols + j) =
                        xv(groups[gi][b], j);
        auto shared = std::make_shared<std::vector<std::vector<int>>>(std::move(groups));
        return make(std::move(out), tracked(x), {x.id}, [shared](Graph& g, int self) {
            auto& n = g.nodes_[self];
            const Mat& pv = g.nodes_[n.parents[0]].val;
            Mat gp(pv.rows, pv.cols);
            const std::size_t block = (*shared)[0].size();
            for (std::size_t gi = 0; gi < shared->size(); ++gi)
                for (std::size_t b = 0; b < block; ++b)
                    for (int j = 0; j < pv.cols; ++j)
                        gp((*shared)[gi][b], j) +=
                            n.grad(static_cast<int>(gi), static_cast<int>(b) * pv.cols + j);
            g.accumulate(n.parents[0], gp);
        });
    }

    // mean over all rows -> 1 x c
    Var mean_rows(Var x) {
        std::vector<int> all(node(x).val.rows);
        for (int i = 0; i < node(x).val.rows; ++i) all[i] = i;
        return pool_rows(x, {all});
    }

    // row-wise sums -> n x 1
    Var sum_cols(Var x) {
        const Mat& xv = node(x).val;
        Mat out(xv.rows, 1);
        for (int i = 0; i < xv.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < xv.cols; ++j) s += xv(i, j);
            out(i, 0) = s;
        }
        return make(std::move(out), tracked(x), {x.id}, [](Graph& g, int self) {
            auto& n = g.nodes_[self];
            const Mat& pv = g.nodes_[n.parents[0]].val;
            Mat gp(pv.rows, pv.cols);
            for (int i = 0; i < pv.rows; ++i)
                for (int j = 0; j < pv.cols; ++j) gp(i, j) = n.grad(i, 0);
            g.accumulate(n.parents[0], gp);
        });
    }

    Var sum_all(Var x) {
        const Mat& xv = node(x).val;
        Mat out(1, 1);
        for (double v : xv.a) out(0, 0) += v;
        return make(std::move(out), tracked(x), {x.id}, [](Graph& g, int self) {
            auto& n = g.nodes_[self];
            const Mat& pv = g.nodes_[n.parents[0]].val;
            g.accumulate(n.parents[0], Mat::full(pv.rows, pv.cols, n.grad(0, 0)));
        });
    }

    Var mean_all(Var x) {
        const std::size_t n = node(x).val.size();
        return scale(sum_all(x), 1.0 / static_cast<double>(n));
    }

    Var select(Var x, int i, int j) {
        const Mat& xv = node(x).val;
        if (i < 0 || i >= xv.rows || j < 0 || j >= xv.cols) throw ShapeError("select: out of range");
        Mat out(1, 1);
        out(0, 0) = xv(i, j);
        return make(std::move(out), tracked(x), {x.id}, [i, j](Graph& g, int self) {
            auto& n = g.nodes_[self];
            const Mat& pv = g.nodes_[n.parents[0]].val;
            Mat gp(pv.rows, pv.cols);
            gp(i, j) = n.grad(0, 0);
            g.accumulate(n.parents[0], gp);
        });
    }

    // rows mapped to unit length: u_i = x_i / (||x_i|| + eps)
    Var normalize_rows(Var x, double eps = 1e-12) {
        const Mat& xv = node(x).val;
        Mat out = xv;
        std::vector<double> norms(xv.rows);
        for (int i = 0; i < xv.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < xv.cols; ++j) s += xv(i, j) * xv(i, j);
            norms[i] = std::sqrt(s);
            const double inv = 1.0 / (norms[i] + eps);
            for (int j = 0; j < xv.cols; ++j) out(i, j) *= inv;
        }
        auto shared = std::make_shared<std::vector<double>>(std::move(norms));
        return make(std::move(out), tracked(x), {x.id}, [shared, eps](Graph& g, int self) {
            auto& n = g.nodes_[self];
            const Mat& xv = g.nodes_[n.parents[0]].val;
            Mat gp(xv.rows, xv.cols);
            for (int i = 0; i < xv.rows; ++i) {
                const double nm = (*shared)[i];
                const double d = nm + eps;
                double gdotx = 0.0;
                for (int j = 0; j < xv.cols; ++j) gdotx += n.grad(i, j) * xv(i, j);
                for (int j = 0; j < xv.cols; ++j) {
                    double t = n.grad(i, j) / d;
                    if (nm > 0.0) t -= xv(i, j) * gdotx / (nm * d * d);
                    gp(i, j) = t;
                }
            }
            g.accumulate(n.parents[0], gp);
        });
    }

    // ---- backward ----

    void backward(Var root) {
        if (node(root).val.rows != 1 || node(root).val.cols != 1)
            throw ShapeError("backward: root must be a 1x1 scalar");
        for (auto& n : nodes_)
            if (n.track) std::fill(n.grad.a.begin(), n.grad.a.end(), 0.0);
        if (!node(root).track) return;  // constant root: all gradients are zero
        nodes_[root.id].grad(0, 0) = 1.0;
        for (int i = root.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.track || !n.back) continue;
            n.back(*this, i);
        }
        // flush leaf gradients into bound parameters
        for (auto& n : nodes_)
            if (n.bound != nullptr) n.bound->grad += n.grad;
    }

    const Mat& value(Var v) const { return nodes_[v.id].val; }
    const Mat& grad(Var v) const { return nodes_[v.id].grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    friend struct Var;

    struct Node {
        Mat val;
        Mat grad;
        bool track = false;
        Param* bound = nullptr;
        std::vector<int> parents;
        std::function<void(Graph&, int)> back;
    };

    std::vector<Node> nodes_;

    Node& node(Var v) { return nodes_[v.id]; }
    const Node& node(Var v) const { return nodes_[v.id]; }
    bool tracked(Var v) const { return nodes_[v.id].track; }

    void require_same_shape(Var x, Var y, const char* op) {
        if (!node(x).val.same_shape(node(y).val))
            throw ShapeError(std::string(op) + ": shape mismatch");
    }

    void accumulate(int id, const Mat& g) {
        Node& n = nodes_[id];
        if (!n.track) return;
        n.grad += g;
    }

    Var make(Mat val, bool track, std::vector<int> parents,
             std::function<void(Graph&, int)> back) {
        Node n;
        n.val = std::move(val);
        if (track) n.grad = Mat::zeros(n.val.rows, n.val.cols);
        n.track = track;
        n.parents = std::move(parents);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{this, static_cast<int>(nodes_.size()) - 1};
    }

public:
    static void softmax_rows_val(Mat& m) {
        for (int i = 0; i < m.rows; ++i) {
            double mx = m(i, 0);
            for (int j = 1; j < m.cols; ++j) mx = std::max(mx, m(i, j));
            double sum = 0.0;
            for (int j = 0; j < m.cols; ++j) {
                m(i, j) = std::exp(m(i, j) - mx);
                sum += m(i, j);
            }
            for (int j = 0; j < m.cols; ++j) m(i, j) /= sum;
        }
    }
};

inline int Var::rows() const { return g->value(*this).rows; }
inline int Var::cols() const { return g->value(*this).cols; }
inline const Mat& Var::val() const { return g->value(*this); }
inline double Var::scalar() const {
    const Mat& m = g->value(*this);
    if (m.rows != 1 || m.cols != 1) throw ShapeError("scalar() on non-1x1 value");
    return m(0, 0);
}

}  // namespace cfcml
