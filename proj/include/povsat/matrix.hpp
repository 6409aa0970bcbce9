#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "povsat/errors.hpp"

namespace povsat {

// Dense row-major matrix of doubles. Entries are expected to stay finite;
// callers that ingest external data must validate with all_finite().
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }

    bool operator==(const Matrix& other) const {
        return rows == other.rows && cols == other.cols && data == other.data;
    }
};

// C = A * B^T. A is m x k, Bt is n x k, C is m x n. Both operands are read
// row-contiguously, which is the fast path for batched layer evaluation.
inline void matmul_transB(const Matrix& a, const Matrix& bt, Matrix& c) {
    if (a.cols != bt.cols) throw ShapeError("matmul_transB: inner dims disagree");
    c = Matrix(a.rows, bt.rows);
    const std::size_t k = a.cols;
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t j = 0; j < bt.rows; ++j) {
            const double* brow = bt.row(j);
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
}

// C += A^T * B with A m x k, B m x n, C k x n. Accumulation order is fixed
// (row by row) so results are bit-reproducible.
inline void matmul_transA_accum(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.rows != b.rows) throw ShapeError("matmul_transA_accum: outer dims disagree");
    if (c.rows != a.cols || c.cols != b.cols) throw ShapeError("matmul_transA_accum: bad output shape");
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        const double* brow = b.row(i);
        for (std::size_t p = 0; p < a.cols; ++p) {
            const double s = arow[p];
            if (s == 0.0) continue;
            double* crow = c.row(p);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += s * brow[j];
        }
    }
}

// C = A * B with A m x k, B k x n, C m x n. ikj order keeps B reads contiguous.
inline void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.rows) throw ShapeError("matmul: inner dims disagree");
    c = Matrix(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t p = 0; p < a.cols; ++p) {
            const double s = arow[p];
            if (s == 0.0) continue;
            const double* brow = b.row(p);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += s * brow[j];
        }
    }
}

}  // namespace povsat
