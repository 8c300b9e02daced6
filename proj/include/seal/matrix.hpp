#pragma once

#include "seal/errors.hpp"

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace seal {

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    Matrix transposed() const;
    /// Rows [begin, end) as a new matrix.
    Matrix row_slice(std::size_t begin, std::size_t end) const;
    /// Columns [begin, end) as a new matrix.
    Matrix col_slice(std::size_t begin, std::size_t end) const;
    /// Rows picked by index, in order.
    Matrix gather_rows(std::span<const std::size_t> indices) const;

    bool all_finite() const noexcept;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// A * B
Matrix matmul(const Matrix& a, const Matrix& b);
/// A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what);

}  // namespace seal
