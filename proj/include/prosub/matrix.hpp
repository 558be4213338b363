#pragma once

#include <cstddef>
#include <vector>

namespace prosub {

// Dense row-major matrix of 64-bit floats. All training math runs in f64 so
// the finite-difference checks can run at tight tolerances.
class Matrix {
public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}
    Matrix(size_t rows, size_t cols, std::vector<double> values);

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return v_.size(); }

    double& at(size_t r, size_t c) { return v_[r * cols_ + c]; }
    double at(size_t r, size_t c) const { return v_[r * cols_ + c]; }
    double* row(size_t r) { return v_.data() + r * cols_; }
    const double* row(size_t r) const { return v_.data() + r * cols_; }

    std::vector<double>& values() { return v_; }
    const std::vector<double>& values() const { return v_; }

    bool all_finite() const;
    bool same_shape(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

    Matrix take_rows(const std::vector<size_t>& idx) const;

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<double> v_;
};

// c = a @ b
Matrix matmul(const Matrix& a, const Matrix& b);
// c = a @ b^T
Matrix matmul_transb(const Matrix& a, const Matrix& b);
// c = a^T @ b
Matrix matmul_transa(const Matrix& a, const Matrix& b);

// Worker threads used for large matrix products; from PROSUB_THREADS, else 1.
// Row-partitioned, so results do not depend on the thread count.
int matmul_threads();

}  // namespace prosub
