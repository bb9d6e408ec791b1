// Minimal dense row-major matrix for the desk-scale model. Operations are
// plain loops in cache-friendly (i,k,j) order; shapes are tiny enough that
// nothing fancier pays off here.
#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace gkg {

template <class S>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<S> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, S(0)) {}

    S* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
    const S* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }

    S& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    S at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    std::size_t size() const { return data.size(); }
    void fill(S v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const Mat& o) const { return same_shape(o) && data == o.data; }
};

// C += A(m,k) * B(k,n)
template <class S>
void matmul_acc(const Mat<S>& a, const Mat<S>& b, Mat<S>& c) {
    assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const S* arow = a.row(i);
        S* crow = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            S av = arow[k];
            if (av == S(0)) continue;
            const S* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

template <class S>
Mat<S> matmul(const Mat<S>& a, const Mat<S>& b) {
    Mat<S> c(a.rows, b.cols);
    matmul_acc(a, b, c);
    return c;
}

// C += A^T(m,k) * B(m,n)  -- A is (m,k), result (k,n)
template <class S>
void matmul_tn_acc(const Mat<S>& a, const Mat<S>& b, Mat<S>& c) {
    assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const S* arow = a.row(i);
        const S* brow = b.row(i);
        for (int k = 0; k < a.cols; ++k) {
            S av = arow[k];
            if (av == S(0)) continue;
            S* crow = c.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

template <class S>
Mat<S> matmul_tn(const Mat<S>& a, const Mat<S>& b) {
    Mat<S> c(a.cols, b.cols);
    matmul_tn_acc(a, b, c);
    return c;
}

// C += A(m,k) * B^T(n,k)  -- result (m,n)
template <class S>
void matmul_nt_acc(const Mat<S>& a, const Mat<S>& b, Mat<S>& c) {
    assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const S* arow = a.row(i);
        S* crow = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const S* brow = b.row(j);
            S acc = S(0);
            for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            crow[j] += acc;
        }
    }
}

template <class S>
Mat<S> matmul_nt(const Mat<S>& a, const Mat<S>& b) {
    Mat<S> c(a.rows, b.rows);
    matmul_nt_acc(a, b, c);
    return c;
}

template <class S>
void add_in_place(Mat<S>& a, const Mat<S>& b) {
    assert(a.same_shape(b));
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

template <class S>
void axpy(Mat<S>& a, S alpha, const Mat<S>& b) {
    assert(a.same_shape(b));
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += alpha * b.data[i];
}

template <class S>
double squared_norm(const Mat<S>& a) {
    double s = 0.0;
    for (S v : a.data) s += static_cast<double>(v) * static_cast<double>(v);
    return s;
}

template <class S>
double max_abs_diff(const Mat<S>& a, const Mat<S>& b) {
    assert(a.same_shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
        if (d > m) m = d;
    }
    return m;
}

}  // namespace gkg
