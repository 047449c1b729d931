#include "saivla/matrix.hpp"

#include <cmath>

#include "saivla/errors.hpp"

namespace saivla {

bool Matrix::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

namespace {

void check_mul(std::size_t a_cols, std::size_t b_rows, const char* what) {
    if (a_cols != b_rows) {
        throw InvalidArgument(std::string(what) + ": inner dimensions disagree");
    }
}

}  // namespace

// ikj order keeps the inner loop contiguous in both B and C.
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    check_mul(a.cols, b.rows, "matmul");
    out.rows = a.rows;
    out.cols = b.cols;
    out.data.resize(a.rows * b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* out_row = out.row(i);
        const double* a_row = a.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a_row[k];
            if (aik == 0.0) continue;
            const double* b_row = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) {
                out_row[j] += aik * b_row[j];
            }
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.cols);
    matmul_acc(a, b, out);
    return out;
}

void matmul_bt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    check_mul(a.cols, b.cols, "matmul_bt");
    out.rows = a.rows;
    out.cols = b.rows;
    out.data.resize(a.rows * b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* a_row = a.row(i);
        double* out_row = out.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* b_row = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += a_row[k] * b_row[k];
            out_row[j] += acc;
        }
    }
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.rows);
    matmul_bt_acc(a, b, out);
    return out;
}

void matmul_at_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    check_mul(a.rows, b.rows, "matmul_at");
    out.rows = a.cols;
    out.cols = b.cols;
    out.data.resize(a.cols * b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* a_row = a.row(k);
        const double* b_row = b.row(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = a_row[i];
            if (aki == 0.0) continue;
            double* out_row = out.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) {
                out_row[j] += aki * b_row[j];
            }
        }
    }
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
    Matrix out(a.cols, b.cols);
    matmul_at_acc(a, b, out);
    return out;
}

void add_row_bias(Matrix& m, const std::vector<double>& bias) {
    if (bias.size() != m.cols) {
        throw InvalidArgument("add_row_bias: bias length != cols");
    }
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) r[j] += bias[j];
    }
}

Matrix vcat(const std::vector<Matrix>& blocks) {
    if (blocks.empty()) throw InvalidArgument("vcat: empty block list");
    const std::size_t cols = blocks.front().cols;
    std::size_t rows = 0;
    for (const Matrix& b : blocks) {
        if (b.cols != cols) throw InvalidArgument("vcat: column mismatch");
        rows += b.rows;
    }
    Matrix out(rows, cols);
    std::size_t at = 0;
    for (const Matrix& b : blocks) {
        std::copy(b.data.begin(), b.data.end(), out.data.begin() + at);
        at += b.data.size();
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
    return out;
}

}  // namespace saivla
