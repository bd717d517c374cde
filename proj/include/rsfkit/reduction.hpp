#pragma once

#include "rsfkit/model.hpp"
#include "rsfkit/numerics.hpp"

namespace rsfkit {

struct Gramians {
    Matrix Wc, Wo;
};

/// Controllability/observability Gramians of the linear part. When
/// include_disturbances is set the controllability side is driven by
/// [B G S] instead of B alone (both conventions appear in practice; the
/// disturbance-driven one reflects what actually excites the states).
Gramians gramians(const SystemModel& m, bool include_disturbances = false);

struct Reduction {
    SystemModel reduced;          // A2, B2, C2 (+ G2/S2/E2/F2 mapped through the projection)
    Matrix P;                     // n x r, maps reduced state into the full space
    Matrix T;                     // r x n, left projection (T A P = A2)
    std::vector<double> hankel;   // all Hankel singular values, descending
    bool repeated_hankel = false; // balancing not unique
    bool rank_warning = false;    // r exceeds numerical rank
};

/// Square-root balanced truncation to order r. The reduced disturbance,
/// nonlinearity-input and output maps are carried through the projection
/// (G2 = T G, E2 = T E, F2 = F P, C2 = C P).
Reduction balanced_truncate(const SystemModel& m, std::size_t r, bool gramian_disturbances = false);

/// Change of realization of a reduced model by an invertible S:
/// x2' = S x2. Returns the transformed model and rewrites P <- P S^{-1}.
SystemModel change_realization(const SystemModel& m2, const Matrix& S, Matrix& P);

/// Orthogonal realization change making the output map point along the
/// first state axis (C2' = [||C2||, 0, ...]). Grids over the transformed
/// state then classify output bands exactly. Returns the rotation used.
Matrix output_aligned_rotation(const SystemModel& m2);

/// Solve for the projection P and feedforward Q2 that satisfy the
/// abstraction equalities exactly for a linear pair:
///    A1 P + B1 Q2 = P A2,   C1 P = C2.
/// The system is square in (P, Q2) for single-output C; it inherits the
/// balanced A2/C2 and repairs the balancing projection, whose raw P only
/// satisfies these equalities approximately.
struct ConsistentProjection {
    Matrix P;
    Matrix Q2;
    double residual = 0.0;
};
ConsistentProjection consistent_projection(const SystemModel& m1, const Matrix& A2, const Matrix& C2);

}  // namespace rsfkit
