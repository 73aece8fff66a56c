#pragma once
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "cfcml/errors.hpp"
#include "cfcml/rng.hpp"

namespace cfcml {

// Dense row-major matrix of doubles. The numeric currency of the library:
// token sequences are (tokens x channels), pooled features are (1 x C_d).
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
    Mat(int r, int c, std::vector<double> values) : rows(r), cols(c), a(std::move(values)) {
        assert(a.size() == static_cast<std::size_t>(r) * c);
    }

    static Mat zeros(int r, int c) { return Mat(r, c); }
    static Mat full(int r, int c, double v) {
        Mat m(r, c);
        std::fill(m.a.begin(), m.a.end(), v);
        return m;
    }
    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Mat uniform(int r, int c, double lo, double hi, RngStream& rng) {
        Mat m(r, c);
        for (auto& x : m.a) x = rng.uniform(lo, hi);
        return m;
    }
    static Mat normal(int r, int c, double mean, double stddev, RngStream& rng) {
        Mat m(r, c);
        for (auto& x : m.a) x = rng.normal(mean, stddev);
        return m;
    }

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    std::size_t size() const { return a.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    Mat& operator+=(const Mat& o) {
        assert(same_shape(o));
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        assert(same_shape(o));
        for (std::size_t i = 0; i < a.size(); ++i) a[i] -= o.a[i];
        return *this;
    }
    Mat& operator*=(double s) {
        for (auto& x : a) x *= s;
        return *this;
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : a) m = std::max(m, std::abs(x));
        return m;
    }
    bool all_finite() const {
        for (double x : a)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

// C = op(A) * op(B); at most one side transposed.
inline Mat matmul_val(const Mat& A, const Mat& B, bool ta = false, bool tb = false) {
    assert(!(ta && tb));
    const int m = ta ? A.cols : A.rows;
    const int k = ta ? A.rows : A.cols;
    const int kb = tb ? B.cols : B.rows;
    const int n = tb ? B.rows : B.cols;
    if (k != kb) throw ShapeError("matmul: inner dimensions disagree");
    Mat C(m, n);
    if (!ta && !tb) {
        for (int i = 0; i < m; ++i) {
            double* ci = &C.a[static_cast<std::size_t>(i) * n];
            const double* airow = &A.a[static_cast<std::size_t>(i) * k];
            for (int p = 0; p < k; ++p) {
                const double aip = airow[p];
                if (aip == 0.0) continue;
                const double* bp = &B.a[static_cast<std::size_t>(p) * n];
                for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
            }
        }
    } else if (ta) {
        // C(i,j) = sum_p A(p,i) B(p,j)
        for (int p = 0; p < k; ++p) {
            const double* ap = &A.a[static_cast<std::size_t>(p) * m];
            const double* bp = &B.a[static_cast<std::size_t>(p) * n];
            for (int i = 0; i < m; ++i) {
                const double api = ap[i];
                if (api == 0.0) continue;
                double* ci = &C.a[static_cast<std::size_t>(i) * n];
                for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
            }
        }
    } else {
        // C(i,j) = sum_p A(i,p) B(j,p)
        for (int i = 0; i < m; ++i) {
            const double* ai = &A.a[static_cast<std::size_t>(i) * k];
            double* ci = &C.a[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) {
                const double* bj = &B.a[static_cast<std::size_t>(j) * k];
                double s = 0.0;
                for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
                ci[j] = s;
            }
        }
    }
    return C;
}

inline void axpy(Mat& y, double alpha, const Mat& x) {
    assert(y.same_shape(x));
    for (std::size_t i = 0; i < y.a.size(); ++i) y.a[i] += alpha * x.a[i];
}

}  // namespace cfcml
