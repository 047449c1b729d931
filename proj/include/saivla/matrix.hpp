#pragma once

#include <cstddef>
#include <vector>

namespace saivla {

// Dense row-major float64 matrix. Small on purpose: the math modules need
// matmul, transpose products, bias rows and not much else.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows*cols, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }
    bool all_finite() const;
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_bt(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_at(const Matrix& a, const Matrix& b);
// C += A * B (accumulating form used by backward passes)
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_bt_acc(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_at_acc(const Matrix& a, const Matrix& b, Matrix& out);

// out[r] += bias for every row
void add_row_bias(Matrix& m, const std::vector<double>& bias);
// vertical concatenation, all blocks must share the column count
Matrix vcat(const std::vector<Matrix>& blocks);

Matrix transpose(const Matrix& m);

}  // namespace saivla
