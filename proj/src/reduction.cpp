#include "rsfkit/reduction.hpp"

#include <cmath>

namespace rsfkit {

Gramians gramians(const SystemModel& m, bool include_disturbances) {
    const HurwitzReport h = is_hurwitz(m.A);
    if (!h.hurwitz)
        throw NumericsError("gramians: A is not Hurwitz (spectral abscissa " +
                            std::to_string(h.abscissa) + ")");
    Matrix Bg = m.B;
    if (include_disturbances) {
        Bg = Matrix(m.n(), m.p() + m.q() + m.r());
        Bg.set_block(0, 0, m.B);
        Bg.set_block(0, m.p(), m.G);
        if (m.r() > 0) Bg.set_block(0, m.p() + m.q(), m.S_int);
    }
    Gramians g;
    g.Wc = solve_lyapunov(m.A.transpose(), Bg * Bg.transpose());  // A Wc + Wc A' + B B' = 0
    g.Wo = solve_lyapunov(m.A, m.C.transpose() * m.C);            // A' Wo + Wo A + C'C = 0
    return g;
}

namespace {

// PSD factor W = L L' from the eigendecomposition, clamping round-off.
Matrix psd_factor(const Matrix& W) {
    SymEig e = sym_eig(W);
    const std::size_t n = W.rows();
    Matrix L(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const double s = std::sqrt(std::max(e.values[j], 0.0));
        for (std::size_t i = 0; i < n; ++i) L(i, j) = e.vectors(i, j) * s;
    }
    return L;
}

}  // namespace

Reduction balanced_truncate(const SystemModel& m, std::size_t r, bool gramian_disturbances) {
    const std::size_t n = m.n();
    if (r < 1 || r > n) throw std::runtime_error("balanced_truncate: order out of range");
    const Gramians g = gramians(m, gramian_disturbances);
    const Matrix Lc = psd_factor(g.Wc);
    const Matrix Lo = psd_factor(g.Wo);

    // SVD of Lo' Lc via the symmetric eigenproblem of its Gram matrix:
    // Lo'Lc = U S V', (Lo'Lc)'(Lo'Lc) = V S^2 V', U = (Lo'Lc) V S^{-1}.
    const Matrix H = Lo.transpose() * Lc;
    SymEig e = sym_eig(H.transpose() * H);
    Reduction out;
    out.hankel.resize(n);
    Matrix V(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = n - 1 - j;  // descending
        out.hankel[j] = std::sqrt(std::max(e.values[src], 0.0));
        for (std::size_t i = 0; i < n; ++i) V(i, j) = e.vectors(i, src);
    }
    const double rank_floor = 1e-12 * std::max(out.hankel[0], 1e-300);
    for (std::size_t j = 0; j + 1 < n; ++j)
        if (std::fabs(out.hankel[j] - out.hankel[j + 1]) < 1e-10) out.repeated_hankel = true;
    if (out.hankel[r - 1] <= rank_floor) out.rank_warning = true;

    Matrix U(n, n);
    {
        const Matrix HV = H * V;
        for (std::size_t j = 0; j < n; ++j) {
            const double s = out.hankel[j] > rank_floor ? out.hankel[j] : 1.0;
            for (std::size_t i = 0; i < n; ++i) U(i, j) = HV(i, j) / s;
        }
    }
    // T = S_r^{-1/2} U_r' Lo',  P = Lc V_r S_r^{-1/2}
    Matrix T(r, n), P(n, r);
    for (std::size_t k = 0; k < r; ++k) {
        const double s = 1.0 / std::sqrt(std::max(out.hankel[k], rank_floor));
        for (std::size_t j = 0; j < n; ++j) {
            double tv = 0.0;
            for (std::size_t i = 0; i < n; ++i) tv += U(i, k) * Lo(j, i) /* Lo' */;
            T(k, j) = s * tv;
        }
        for (std::size_t i = 0; i < n; ++i) {
            double pv = 0.0;
            for (std::size_t j = 0; j < n; ++j) pv += Lc(i, j) * V(j, k);
            P(i, k) = s * pv;
        }
    }

    SystemModel red;
    red.name = m.name.empty() ? "reduced" : m.name + "_r" + std::to_string(r);
    red.A = T * m.A * P;
    red.B = T * m.B;
    red.C = m.C * P;
    red.G = T * m.G;
    red.S_int = m.r() > 0 ? T * m.S_int : Matrix(r, 0);
    red.E = m.is_linear() ? Matrix(r, 1) : T * m.E;
    red.F = m.is_linear() ? Matrix(1, r) : m.F * P;
    red.phi = m.phi;
    if (m.is_linear()) red.phi.kind = SlopeNonlinearity::Kind::zero;
    red.validate();

    out.reduced = std::move(red);
    out.P = std::move(P);
    out.T = std::move(T);
    return out;
}

SystemModel change_realization(const SystemModel& m2, const Matrix& S, Matrix& P) {
    const std::size_t r = m2.n();
    require_dims(S, r, r, "change_realization: S");
    const Matrix Sinv = solve_linear(S, Matrix::identity(r));
    SystemModel out = m2;
    out.A = S * m2.A * Sinv;
    out.B = S * m2.B;
    out.C = m2.C * Sinv;
    out.G = S * m2.G;
    if (m2.r() > 0) out.S_int = S * m2.S_int;
    if (!m2.is_linear()) {
        out.E = S * m2.E;
        out.F = m2.F * Sinv;
    }
    if (!m2.C_int.empty()) out.C_int = m2.C_int * Sinv;
    if (!P.empty()) P = P * Sinv;
    out.validate();
    return out;
}

Matrix output_aligned_rotation(const SystemModel& m2) {
    if (m2.m() != 1) throw std::runtime_error("output_aligned_rotation: needs a single-output model");
    const std::size_t r = m2.n();
    // Gram-Schmidt starting from C2'.
    std::vector<std::vector<double>> basis;
    std::vector<double> c = m2.C.transpose().to_vector();
    const double cn = norm2(c);
    if (cn == 0.0) throw std::runtime_error("output_aligned_rotation: zero output map");
    for (double& x : c) x /= cn;
    basis.push_back(c);
    for (std::size_t axis = 0; axis < r && basis.size() < r; ++axis) {
        std::vector<double> v(r, 0.0);
        v[axis] = 1.0;
        for (const auto& b : basis) {
            const double d = dot(v, b);
            for (std::size_t i = 0; i < r; ++i) v[i] -= d * b[i];
        }
        const double vn = norm2(v);
        if (vn > 1e-8) {
            for (double& x : v) x /= vn;
            basis.push_back(v);
        }
    }
    if (basis.size() != r) throw NumericsError("output_aligned_rotation: failed to complete basis");
    Matrix G(r, r);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) G(i, j) = basis[i][j];
    return G;
}

ConsistentProjection consistent_projection(const SystemModel& m1, const Matrix& A2, const Matrix& C2) {
    const std::size_t n = m1.n(), r = A2.rows(), p = m1.p(), mo = m1.m();
    require_dims(C2, mo, r, "consistent_projection: C2");
    // Unknowns: vec(P) (n*r, column-major) then vec(Q2) (p*r).
    const std::size_t nun = n * r + p * r;
    const std::size_t neq = n * r + mo * r;
    Matrix K(neq, nun), rhs(neq, 1);
    auto ip = [n](std::size_t i, std::size_t j) { return j * n + i; };
    std::size_t row = 0;
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t i = 0; i < n; ++i, ++row) {
            // (A1 P - P A2 + B1 Q2)(i,j) = 0
            for (std::size_t k = 0; k < n; ++k) K(row, ip(k, j)) += m1.A(i, k);
            for (std::size_t k = 0; k < r; ++k) K(row, ip(i, k)) -= A2(k, j);
            for (std::size_t k = 0; k < p; ++k) K(row, n * r + j * p + k) += m1.B(i, k);
        }
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t i = 0; i < mo; ++i, ++row) {
            for (std::size_t k = 0; k < n; ++k) K(row, ip(k, j)) += m1.C(i, k);
            rhs(row, 0) = C2(i, j);
        }

    ConsistentProjection out;
    LeastSquaresResult ls = least_squares(K, rhs);
    out.residual = ls.residual;
    out.P = Matrix(n, r);
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t i = 0; i < n; ++i) out.P(i, j) = ls.X(ip(i, j), 0);
    out.Q2 = Matrix(p, r);
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t k = 0; k < p; ++k) out.Q2(k, j) = ls.X(n * r + j * p + k, 0);
    return out;
}

}  // namespace rsfkit
