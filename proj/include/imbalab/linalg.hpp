#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "imbalab/errors.hpp"
#include "imbalab/rng.hpp"

namespace imbalab {

/// Dense row-major matrix of doubles. Weight matrices are stored
/// (in_dim x out_dim) so forward passes stream contiguously over the
/// output dimension.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

    double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
    double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

/// y = x * w + b.  x: n x in, w: in x out, b: out, y: n x out.
inline void affine(const Matrix& x, const Matrix& w, const std::vector<double>& b, Matrix& y) {
    if (x.cols != w.rows || static_cast<int>(b.size()) != w.cols)
        throw InputError("affine: shape mismatch");
    y = Matrix(x.rows, w.cols);
    for (int i = 0; i < x.rows; ++i) {
        double* yi = y.row(i);
        for (int j = 0; j < w.cols; ++j) yi[j] = b[j];
        const double* xi = x.row(i);
        for (int k = 0; k < x.cols; ++k) {
            const double a = xi[k];
            const double* wk = w.row(k);
            for (int j = 0; j < w.cols; ++j) yi[j] += a * wk[j];
        }
    }
}

/// Accumulates gradients of an affine layer. dy: n x out upstream.
/// dx (optional out), dw, db are accumulated in place.
inline void affine_backward(const Matrix& x, const Matrix& w, const Matrix& dy, Matrix* dx,
                            Matrix& dw, std::vector<double>& db) {
    for (int i = 0; i < x.rows; ++i) {
        const double* dyi = dy.row(i);
        const double* xi = x.row(i);
        for (int j = 0; j < w.cols; ++j) db[j] += dyi[j];
        for (int k = 0; k < x.cols; ++k) {
            const double a = xi[k];
            double* dwk = dw.row(k);
            for (int j = 0; j < w.cols; ++j) dwk[j] += a * dyi[j];
        }
        if (dx) {
            double* dxi = dx->row(i);
            for (int k = 0; k < x.cols; ++k) {
                const double* wk = w.row(k);
                double acc = 0.0;
                for (int j = 0; j < w.cols; ++j) acc += dyi[j] * wk[j];
                dxi[k] += acc;
            }
        }
    }
}

inline double dot2(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm2(const Vec2& a) { return std::sqrt(dot2(a, a)); }
inline Vec2 sub2(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2 add2(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2 scale2(const Vec2& a, double s) { return {a[0] * s, a[1] * s}; }

} // namespace imbalab
