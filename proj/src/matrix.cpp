#include "seal/matrix.hpp"

#include <cmath>

namespace seal {

namespace {

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                             std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw DimensionError("ragged matrix initializer");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::transposed() const {
    Matrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            out(c, r) = (*this)(r, c);
        }
    }
    return out;
}

Matrix Matrix::row_slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows_) {
        throw DimensionError("row slice out of range");
    }
    return Matrix(end - begin, cols_,
                  std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                                      data_.begin() + static_cast<std::ptrdiff_t>(end * cols_)));
}

Matrix Matrix::col_slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > cols_) {
        throw DimensionError("column slice out of range");
    }
    Matrix out(rows_, end - begin);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = begin; c < end; ++c) {
            out(r, c - begin) = (*this)(r, c);
        }
    }
    return out;
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

bool Matrix::all_finite() const noexcept {
    for (const double v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + shape(a) + " * " + shape(b));
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* o = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            const double* br = b.row(k).data();
            for (std::size_t j = 0; j < b.cols(); ++j) {
                o[j] += aik * br[j];
            }
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn: " + shape(a) + "^T * " + shape(b));
    }
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* ar = a.row(k).data();
        const double* br = b.row(k).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ar[i];
            if (aki == 0.0) {
                continue;
            }
            double* o = out.row(i).data();
            for (std::size_t j = 0; j < b.cols(); ++j) {
                o[j] += aki * br[j];
            }
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: " + shape(a) + " * " + shape(b) + "^T");
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ar = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* br = b.row(j).data();
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                s += ar[k] * br[k];
            }
            out(i, j) = s;
        }
    }
    return out;
}

void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(what + ": shape " + shape(a) + " vs " + shape(b));
    }
}

}  // namespace seal
