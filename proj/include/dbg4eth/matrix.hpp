#pragma once

#include <cassert>
#include <cmath>
#include <vector>

#include "dbg4eth/common.hpp"

namespace dbg4eth {

// Dense row-major double matrix. Row vectors are 1xC, column vectors Rx1.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    static Mat zeros(int r, int c) { return Mat(r, c, 0.0); }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    static Mat from_rows(std::vector<std::vector<double>> rs) {
        Mat m(static_cast<int>(rs.size()), rs.empty() ? 0 : static_cast<int>(rs[0].size()));
        for (int i = 0; i < m.rows; ++i) {
            assert(static_cast<int>(rs[i].size()) == m.cols);
            for (int j = 0; j < m.cols; ++j) m.at(i, j) = rs[i][j];
        }
        return m;
    }

    static Mat row(std::vector<double> v) {
        Mat m(1, static_cast<int>(v.size()));
        m.a = std::move(v);
        return m;
    }

    static Mat col(std::vector<double> v) {
        Mat m(static_cast<int>(v.size()), 1);
        m.a = std::move(v);
        return m;
    }

    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return a.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline Mat matmul(const Mat& x, const Mat& y) {
    assert(x.cols == y.rows);
    Mat out(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double* xi = &x.a[static_cast<size_t>(i) * x.cols];
        double* oi = &out.a[static_cast<size_t>(i) * out.cols];
        for (int k = 0; k < x.cols; ++k) {
            double v = xi[k];
            if (v == 0.0) continue;
            const double* yk = &y.a[static_cast<size_t>(k) * y.cols];
            for (int j = 0; j < y.cols; ++j) oi[j] += v * yk[j];
        }
    }
    return out;
}

inline Mat transpose(const Mat& x) {
    Mat out(x.cols, x.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) out.at(j, i) = x.at(i, j);
    return out;
}

inline Mat operator+(const Mat& x, const Mat& y) {
    assert(x.same_shape(y));
    Mat out = x;
    for (size_t i = 0; i < out.size(); ++i) out.a[i] += y.a[i];
    return out;
}

inline Mat operator-(const Mat& x, const Mat& y) {
    assert(x.same_shape(y));
    Mat out = x;
    for (size_t i = 0; i < out.size(); ++i) out.a[i] -= y.a[i];
    return out;
}

inline Mat operator*(const Mat& x, double s) {
    Mat out = x;
    for (double& v : out.a) v *= s;
    return out;
}

inline Mat hadamard(const Mat& x, const Mat& y) {
    assert(x.same_shape(y));
    Mat out = x;
    for (size_t i = 0; i < out.size(); ++i) out.a[i] *= y.a[i];
    return out;
}

inline double max_abs_diff(const Mat& x, const Mat& y) {
    assert(x.same_shape(y));
    double m = 0.0;
    for (size_t i = 0; i < x.size(); ++i) m = std::max(m, std::fabs(x.a[i] - y.a[i]));
    return m;
}

inline Mat xavier_init(int rows, int cols, Rng& rng) {
    double limit = std::sqrt(6.0 / (rows + cols));
    Mat m(rows, cols);
    for (double& v : m.a) v = rng.uniform(-limit, limit);
    return m;
}

}  // namespace dbg4eth
