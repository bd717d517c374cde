#pragma once

#include <random>

#include "rsfkit/io.hpp"
#include "rsfkit/matrix.hpp"
#include "rsfkit/model.hpp"
#include "rsfkit/nets.hpp"

namespace rsfkit::testing {

inline Matrix random_matrix(std::mt19937& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Matrix M(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) M(i, j) = dist(rng);
    return M;
}

inline Matrix random_symmetric(std::mt19937& rng, std::size_t n, double scale = 1.0) {
    Matrix M = random_matrix(rng, n, n, scale);
    return (M + M.transpose()) * 0.5;
}

/// Random Hurwitz matrix: shift a random matrix left of its abscissa
/// estimate (the symmetric-part bound).
inline Matrix random_stable(std::mt19937& rng, std::size_t n, double margin = 0.5) {
    Matrix A = random_matrix(rng, n, n);
    const Matrix S = (A + A.transpose()) * 0.5;
    double bound = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += std::fabs(S(i, j));
        bound = std::max(bound, row);
    }
    return A - Matrix::identity(n) * (bound + margin);
}

inline SystemModel linear_model(Matrix A, Matrix B, Matrix C, Matrix G) {
    SystemModel m;
    m.A = std::move(A);
    m.B = std::move(B);
    m.C = std::move(C);
    m.G = std::move(G);
    const std::size_t n = m.A.rows();
    m.S_int = Matrix(n, 0);
    m.E = Matrix(n, 1);
    m.F = Matrix(1, n);
    m.validate();
    return m;
}

inline SystemModel load_bundled(const std::string& rel) {
    return load_model(nets::data_dir() / rel);
}

}  // namespace rsfkit::testing
