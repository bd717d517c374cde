#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsfkit {

/// Dense row-major matrix of doubles. Sized for control problems
/// (n <= 30 or so); no attempt at cache blocking or sparsity.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    /// Column vector from values.
    static Matrix col_vec(const std::vector<double>& v);
    /// Row vector from values.
    static Matrix row_vec(const std::vector<double>& v);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return a_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    Matrix transpose() const;
    Matrix block(std::size_t i0, std::size_t j0, std::size_t r, std::size_t c) const;
    void set_block(std::size_t i0, std::size_t j0, const Matrix& B);

    Matrix& operator+=(const Matrix& B);
    Matrix& operator-=(const Matrix& B);
    Matrix& operator*=(double s);

    friend Matrix operator+(Matrix A, const Matrix& B) { return A += B; }
    friend Matrix operator-(Matrix A, const Matrix& B) { return A -= B; }
    friend Matrix operator*(Matrix A, double s) { return A *= s; }
    friend Matrix operator*(double s, Matrix A) { return A *= s; }
    friend Matrix operator*(const Matrix& A, const Matrix& B);

    /// Frobenius norm.
    double norm() const;
    double max_abs() const;
    bool all_finite() const;

    /// Flatten an n x 1 or 1 x n matrix to a std::vector.
    std::vector<double> to_vector() const;

    const std::vector<double>& data() const { return a_; }
    std::vector<double>& data() { return a_; }

private:
    std::size_t rows_, cols_;
    std::vector<double> a_;
};

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

void require_dims(const Matrix& A, std::size_t rows, std::size_t cols, const std::string& name);

/// y = A*x for a plain vector x.
std::vector<double> matvec(const Matrix& A, const std::vector<double>& x);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& v);

}  // namespace rsfkit
