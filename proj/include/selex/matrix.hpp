#pragma once
// Dense row-major matrix and the embedding helpers shared by every module.
//
// All arithmetic is double precision and all reductions run in a fixed
// sequential order, so results are bit-stable from run to run.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace selex {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, rows*cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Embeddings are plain matrices: row index is the universal sample id.
using EmbeddingMatrix = Matrix;

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double row_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct NormalizeResult {
    Matrix m;
    std::size_t zero_rows = 0;  // rows passed through unchanged
};

// Scales every nonzero row to unit Euclidean norm. Zero rows are kept as-is
// and counted instead of raising.
inline NormalizeResult normalize_rows(const Matrix& e) {
    NormalizeResult out;
    out.m = e;
    for (std::size_t i = 0; i < e.rows; ++i) {
        double n = row_norm(e.row(i));
        if (n == 0.0) {
            ++out.zero_rows;
            continue;
        }
        auto r = out.m.row(i);
        for (double& v : r) v /= n;
    }
    return out;
}

// Squared Euclidean distances between all rows of a and all rows of b.
inline Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols)
        throw std::invalid_argument("pairwise_sq_dist: dimension mismatch");
    Matrix d(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.rows; ++j)
            d.at(i, j) = sq_dist(a.row(i), b.row(j));
    return d;
}

// First `width` columns of e (the level-k segment of the embedding).
inline Matrix slice_dims(const Matrix& e, std::size_t width) {
    if (width < 1 || width > e.cols)
        throw std::invalid_argument("slice_dims: width out of range");
    Matrix s(e.rows, width);
    for (std::size_t i = 0; i < e.rows; ++i)
        for (std::size_t j = 0; j < width; ++j) s.at(i, j) = e.at(i, j);
    return s;
}

}  // namespace selex
