#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace privsim {

/// Dense row-major matrix of doubles. Value type: copy/move like a vector.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    std::size_t rows_, cols_;
    std::vector<double> data_;
};

/// Standard product. Throws std::invalid_argument naming both shapes when
/// the inner dimensions disagree; verifies the result is finite.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

/// y += alpha * x (shape-checked).
void axpy(Matrix& y, double alpha, const Matrix& x);

/// max_ij |a - b|; throws on shape mismatch.
double max_abs_diff(const Matrix& a, const Matrix& b);

bool all_finite(const Matrix& a);

/// "RxC" render used in error messages.
std::string shape_str(const Matrix& a);

}  // namespace privsim
