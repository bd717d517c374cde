#include "rsfkit/matrix.hpp"

#include <cmath>

namespace rsfkit {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    a_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("ragged initializer for Matrix");
        a_.insert(a_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix I(n, n);
    for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
}

Matrix Matrix::col_vec(const std::vector<double>& v) {
    Matrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

Matrix Matrix::row_vec(const std::vector<double>& v) {
    Matrix m(1, v.size());
    for (std::size_t j = 0; j < v.size(); ++j) m(0, j) = v[j];
    return m;
}

Matrix Matrix::transpose() const {
    Matrix T(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) T(j, i) = (*this)(i, j);
    return T;
}

Matrix Matrix::block(std::size_t i0, std::size_t j0, std::size_t r, std::size_t c) const {
    if (i0 + r > rows_ || j0 + c > cols_) throw DimensionError("block out of range");
    Matrix B(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) B(i, j) = (*this)(i0 + i, j0 + j);
    return B;
}

void Matrix::set_block(std::size_t i0, std::size_t j0, const Matrix& B) {
    if (i0 + B.rows() > rows_ || j0 + B.cols() > cols_) throw DimensionError("set_block out of range");
    for (std::size_t i = 0; i < B.rows(); ++i)
        for (std::size_t j = 0; j < B.cols(); ++j) (*this)(i0 + i, j0 + j) = B(i, j);
}

Matrix& Matrix::operator+=(const Matrix& B) {
    if (rows_ != B.rows_ || cols_ != B.cols_) throw DimensionError("size mismatch in +");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += B.a_[k];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& B) {
    if (rows_ != B.rows_ || cols_ != B.cols_) throw DimensionError("size mismatch in -");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= B.a_[k];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& x : a_) x *= s;
    return *this;
}

Matrix operator*(const Matrix& A, const Matrix& B) {
    if (A.cols_ != B.rows_) throw DimensionError("size mismatch in *");
    Matrix C(A.rows_, B.cols_);
    for (std::size_t i = 0; i < A.rows_; ++i)
        for (std::size_t k = 0; k < A.cols_; ++k) {
            const double aik = A(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < B.cols_; ++j) C(i, j) += aik * B(k, j);
        }
    return C;
}

double Matrix::norm() const {
    double s = 0.0;
    for (double x : a_) s += x * x;
    return std::sqrt(s);
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double x : a_) m = std::max(m, std::fabs(x));
    return m;
}

bool Matrix::all_finite() const {
    for (double x : a_)
        if (!std::isfinite(x)) return false;
    return true;
}

std::vector<double> Matrix::to_vector() const {
    if (rows_ != 1 && cols_ != 1) throw DimensionError("to_vector needs a row or column matrix");
    return a_;
}

void require_dims(const Matrix& A, std::size_t rows, std::size_t cols, const std::string& name) {
    if (A.rows() != rows || A.cols() != cols)
        throw DimensionError(name + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                             ", got " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()));
}

std::vector<double> matvec(const Matrix& A, const std::vector<double>& x) {
    if (A.cols() != x.size()) throw DimensionError("matvec size mismatch");
    std::vector<double> y(A.rows(), 0.0);
    for (std::size_t i = 0; i < A.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < A.cols(); ++j) s += A(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DimensionError("dot size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace rsfkit
