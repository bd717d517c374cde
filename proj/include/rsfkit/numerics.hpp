#pragma once

#include "rsfkit/matrix.hpp"

namespace rsfkit {

/// Central tolerance knobs. Defaults reflect what the dense solvers in
/// this module actually achieve at the problem sizes we care about.
struct Tolerances {
    double symmetry = 1e-9;        // allowed asymmetry before sym_eig refuses
    double eig_residual = 1e-8;    // |S v - lambda v| <= eig_residual * |S|
    double lyapunov_residual = 1e-7;
    double psd_clamp = 1e-9;       // eigenvalues above -psd_clamp count as >= 0
    double hurwitz_margin = 1e-9;  // abscissa must be below -hurwitz_margin
    double rank = 1e-12;           // relative pivot cutoff in least squares
};

Tolerances& tolerances();

struct NumericsError : std::runtime_error {
    explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

struct SymEig {
    std::vector<double> values;  // ascending
    Matrix vectors;              // orthonormal, column i pairs with values[i]
};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// The input is symmetrized first; asymmetry beyond tolerances().symmetry
/// on top of a relative scale is rejected.
SymEig sym_eig(const Matrix& S);

/// Solve A x = b by Gaussian elimination with partial pivoting.
Matrix solve_linear(const Matrix& A, const Matrix& B);

/// Solve A' X + X A + Q = 0 via the Kronecker vectorization (fine for
/// n <= 30, the system has n^2 unknowns).
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

/// Symmetric PSD square root R with R R = M. Eigenvalues in
/// [-psd_clamp, 0) are clamped to zero; smaller ones raise.
Matrix psd_sqrt(const Matrix& M);

/// Real parts of the (generally complex) eigenvalues of a square matrix,
/// sorted ascending. Implicit double-shift QR on the Hessenberg form.
std::vector<double> eig_real_parts(const Matrix& A);

struct HurwitzReport {
    bool hurwitz = false;
    double abscissa = 0.0;  // max real part of the spectrum
};

/// Hurwitz test. The boolean comes from Lyapunov feasibility
/// (A'X + XA = -I with X positive definite); if that solve is singular
/// the QR spectrum decides. The abscissa is always taken from the QR
/// spectrum.
HurwitzReport is_hurwitz(const Matrix& A);

struct LeastSquaresResult {
    Matrix X;
    double residual = 0.0;     // ||A X - B|| (Frobenius over all right-hand sides)
    bool rank_deficient = false;
};

/// Minimize ||A X - B|| by Householder QR with column pivoting. On rank
/// deficiency the minimum-norm solution is returned and flagged.
LeastSquaresResult least_squares(const Matrix& A, const Matrix& B);

/// Spectral norm ||A||_2 via sym_eig of A'A.
double spectral_norm(const Matrix& A);

}  // namespace rsfkit
