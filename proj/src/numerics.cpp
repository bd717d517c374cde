#include "rsfkit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rsfkit {

Tolerances& tolerances() {
    static Tolerances t;
    return t;
}

// ---------------------------------------------------------------- sym_eig

SymEig sym_eig(const Matrix& S) {
    const std::size_t n = S.rows();
    if (S.cols() != n) throw DimensionError("sym_eig: matrix not square");
    const double scale = std::max(S.max_abs(), 1.0);
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) asym = std::max(asym, std::fabs(S(i, j) - S(j, i)));
    // Data sources (printed matrices) carry asymmetry at their rounding
    // level; symmetrize unconditionally but refuse clearly lopsided input.
    if (asym > 0.5 * scale) throw NumericsError("sym_eig: input is far from symmetric");

    Matrix A(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) A(i, j) = 0.5 * (S(i, j) + S(j, i));
    Matrix V = Matrix::identity(n);

    auto offdiag = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += A(i, j) * A(i, j);
        return std::sqrt(2.0 * s);
    };

    const double target = 1e-14 * std::max(A.norm(), 1e-300);
    for (int sweep = 0; sweep < 64 && offdiag() > target; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (std::fabs(apq) <= 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return A(a, a) < A(b, b); });

    SymEig out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = A(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = V(i, order[j]);
    }
    return out;
}

// ---------------------------------------------------------------- solve

Matrix solve_linear(const Matrix& A, const Matrix& B) {
    const std::size_t n = A.rows();
    if (A.cols() != n) throw DimensionError("solve_linear: matrix not square");
    if (B.rows() != n) throw DimensionError("solve_linear: rhs rows mismatch");
    Matrix U = A, X = B;
    std::vector<std::size_t> piv(n);
    std::iota(piv.begin(), piv.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::fabs(U(i, k)) > std::fabs(U(p, k))) p = i;
        if (std::fabs(U(p, k)) < 1e-300) throw NumericsError("solve_linear: singular matrix");
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(U(k, j), U(p, j));
            for (std::size_t j = 0; j < X.cols(); ++j) std::swap(X(k, j), X(p, j));
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = U(i, k) / U(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) U(i, j) -= f * U(k, j);
            for (std::size_t j = 0; j < X.cols(); ++j) X(i, j) -= f * X(k, j);
        }
    }
    for (std::size_t kk = n; kk-- > 0;) {
        for (std::size_t j = 0; j < X.cols(); ++j) {
            double s = X(kk, j);
            for (std::size_t i = kk + 1; i < n; ++i) s -= U(kk, i) * X(i, j);
            X(kk, j) = s / U(kk, kk);
        }
    }
    return X;
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
    const std::size_t n = A.rows();
    if (A.cols() != n) throw DimensionError("solve_lyapunov: A not square");
    require_dims(Q, n, n, "solve_lyapunov: Q");

    // vec (column-major): (I (x) A' + A' (x) I) vec(X) = -vec(Q)
    const std::size_t N = n * n;
    Matrix K(N, N);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t row = j * n + i;
            for (std::size_t k = 0; k < n; ++k) {
                K(row, j * n + k) += A(k, i);  // (A' X)_{ij} = sum_k A(k,i) X(k,j)
                K(row, k * n + i) += A(k, j);  // (X A)_{ij} = sum_k X(i,k) A(k,j)
            }
        }
    Matrix rhs(N, 1);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) rhs(j * n + i, 0) = -Q(i, j);

    Matrix x;
    try {
        x = solve_linear(K, rhs);
    } catch (const NumericsError&) {
        throw NumericsError("solve_lyapunov: singular Lyapunov operator (eigenvalue pair summing to zero)");
    }
    Matrix X(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) X(i, j) = x(j * n + i, 0);

    const Matrix R = A.transpose() * X + X * A + Q;
    const double tol = tolerances().lyapunov_residual * (A.norm() * X.norm() + Q.norm() + 1e-300);
    if (R.norm() > std::max(tol, 1e-300))
        throw NumericsError("solve_lyapunov: residual " + std::to_string(R.norm()) + " exceeds tolerance");
    return X;
}

Matrix psd_sqrt(const Matrix& M) {
    SymEig e = sym_eig(M);
    const std::size_t n = M.rows();
    const double floor = -tolerances().psd_clamp * std::max(1.0, std::fabs(e.values.back()));
    Matrix R(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        if (e.values[k] < floor)
            throw NumericsError("psd_sqrt: eigenvalue " + std::to_string(e.values[k]) + " below PSD tolerance");
        const double s = std::sqrt(std::max(e.values[k], 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) R(i, j) += s * e.vectors(i, k) * e.vectors(j, k);
    }
    return R;
}

// ------------------------------------------------------ general spectrum

namespace {

// Reduce to upper Hessenberg by Householder similarity.
Matrix hessenberg(Matrix A) {
    const std::size_t n = A.rows();
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double alpha = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) alpha += A(i, k) * A(i, k);
        alpha = std::sqrt(alpha);
        if (alpha < 1e-300) continue;
        if (A(k + 1, k) > 0) alpha = -alpha;
        std::vector<double> v(n, 0.0);
        v[k + 1] = A(k + 1, k) - alpha;
        for (std::size_t i = k + 2; i < n; ++i) v[i] = A(i, k);
        double vn = 0.0;
        for (double x : v) vn += x * x;
        if (vn < 1e-300) continue;
        // A <- (I - 2vv'/v'v) A (I - 2vv'/v'v)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) s += v[i] * A(i, j);
            s = 2.0 * s / vn;
            for (std::size_t i = k + 1; i < n; ++i) A(i, j) -= s * v[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) s += A(i, j) * v[j];
            s = 2.0 * s / vn;
            for (std::size_t j = k + 1; j < n; ++j) A(i, j) -= s * v[j];
        }
    }
    return A;
}

// Francis implicit double-shift QR sweep on H[lo..hi] (inclusive).
void francis_sweep(Matrix& H, std::size_t lo, std::size_t hi) {
    const std::size_t n = H.rows();
    const double s = H(hi - 1, hi - 1) + H(hi, hi);
    const double t = H(hi - 1, hi - 1) * H(hi, hi) - H(hi - 1, hi) * H(hi, hi - 1);
    double x = H(lo, lo) * H(lo, lo) + H(lo, lo + 1) * H(lo + 1, lo) - s * H(lo, lo) + t;
    double y = H(lo + 1, lo) * (H(lo, lo) + H(lo + 1, lo + 1) - s);
    double z = (lo + 2 <= hi) ? H(lo + 2, lo + 1) * H(lo + 1, lo) : 0.0;
    for (std::size_t k = lo; k <= hi - 1; ++k) {
        // Householder on [x y z]'
        double nrm = std::sqrt(x * x + y * y + z * z);
        if (nrm > 1e-300) {
            double alpha = (x >= 0) ? -nrm : nrm;
            double v0 = x - alpha, v1 = y, v2 = z;
            double vn = v0 * v0 + v1 * v1 + v2 * v2;
            if (vn > 1e-300) {
                const std::size_t rmax = std::min(hi, k + 3);
                for (std::size_t j = (k > lo ? k - 1 : lo); j < n; ++j) {
                    double sum = v0 * H(k, j) + v1 * H(k + 1, j) + (k + 2 <= hi ? v2 * H(k + 2, j) : 0.0);
                    sum = 2.0 * sum / vn;
                    H(k, j) -= sum * v0;
                    H(k + 1, j) -= sum * v1;
                    if (k + 2 <= hi) H(k + 2, j) -= sum * v2;
                }
                for (std::size_t i = 0; i <= rmax; ++i) {
                    double sum = v0 * H(i, k) + v1 * H(i, k + 1) + (k + 2 <= hi ? v2 * H(i, k + 2) : 0.0);
                    sum = 2.0 * sum / vn;
                    H(i, k) -= sum * v0;
                    H(i, k + 1) -= sum * v1;
                    if (k + 2 <= hi) H(i, k + 2) -= sum * v2;
                }
            }
        }
        x = H(k + 1, k);
        y = (k + 2 <= hi) ? H(k + 2, k) : 0.0;
        z = (k + 3 <= hi) ? H(k + 3, k) : 0.0;
    }
}

}  // namespace

std::vector<double> eig_real_parts(const Matrix& A) {
    const std::size_t n = A.rows();
    if (A.cols() != n) throw DimensionError("eig_real_parts: matrix not square");
    if (n == 0) return {};
    if (!A.all_finite()) throw NumericsError("eig_real_parts: non-finite entries");

    Matrix H = hessenberg(A);
    std::vector<double> re;
    re.reserve(n);
    const double eps = 1e-13;
    std::size_t hi = n - 1;
    int stall = 0;
    while (true) {
        // deflate tiny subdiagonals
        for (std::size_t i = 1; i <= hi && hi > 0; ++i) {
            const double bound = eps * (std::fabs(H(i - 1, i - 1)) + std::fabs(H(i, i)) + 1e-300);
            if (std::fabs(H(i, i - 1)) < bound) H(i, i - 1) = 0.0;
        }
        if (hi == 0) {
            re.push_back(H(0, 0));
            break;
        }
        if (H(hi, hi - 1) == 0.0) {
            re.push_back(H(hi, hi));
            --hi;
            stall = 0;
            continue;
        }
        if (hi == 1 || H(hi - 1, hi - 2) == 0.0) {
            // 2x2 block [a b; c d]
            const std::size_t i = hi - 1;
            const double a = H(i, i), b = H(i, i + 1), c = H(i + 1, i), d = H(i + 1, i + 1);
            const double tr = a + d, det = a * d - b * c;
            const double disc = tr * tr / 4.0 - det;
            if (disc >= 0) {
                const double r = std::sqrt(disc);
                re.push_back(tr / 2.0 + r);
                re.push_back(tr / 2.0 - r);
            } else {
                re.push_back(tr / 2.0);
                re.push_back(tr / 2.0);
            }
            if (hi >= 2)
                hi -= 2;
            else
                break;
            stall = 0;
            continue;
        }
        // find active block start
        std::size_t lo = hi - 1;
        while (lo > 0 && H(lo, lo - 1) != 0.0) --lo;
        francis_sweep(H, lo, hi);
        if (++stall > 40 * static_cast<int>(n)) throw NumericsError("eig_real_parts: QR iteration failed to converge");
    }
    std::sort(re.begin(), re.end());
    return re;
}

HurwitzReport is_hurwitz(const Matrix& A) {
    if (A.rows() != A.cols()) throw DimensionError("is_hurwitz: matrix not square");
    HurwitzReport rep;
    const std::vector<double> re = eig_real_parts(A);
    rep.abscissa = re.empty() ? 0.0 : re.back();
    bool decided = false;
    try {
        const Matrix X = solve_lyapunov(A, Matrix::identity(A.rows()));
        const SymEig e = sym_eig(X);
        rep.hurwitz = e.values.front() > 0.0;
        decided = true;
    } catch (const NumericsError&) {
        // singular Lyapunov operator: fall back to the QR spectrum
    }
    if (!decided) rep.hurwitz = rep.abscissa < -tolerances().hurwitz_margin;
    return rep;
}

// ---------------------------------------------------------- least squares

LeastSquaresResult least_squares(const Matrix& A, const Matrix& B) {
    const std::size_t m = A.rows(), n = A.cols();
    if (B.rows() != m) throw DimensionError("least_squares: A rows != B rows");

    // Householder QR with column pivoting: A P = Q R.
    Matrix R = A, Bt = B;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> colnorm(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) colnorm[j] += R(i, j) * R(i, j);

    const std::size_t steps = std::min(m, n);
    std::size_t rank = 0;
    double max_pivot = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        std::size_t p = k;
        for (std::size_t j = k + 1; j < n; ++j)
            if (colnorm[perm[j]] > colnorm[perm[p]]) p = j;
        std::swap(perm[k], perm[p]);
        const std::size_t col = perm[k];
        double alpha = 0.0;
        for (std::size_t i = k; i < m; ++i) alpha += R(i, col) * R(i, col);
        alpha = std::sqrt(alpha);
        max_pivot = std::max(max_pivot, alpha);
        if (alpha <= tolerances().rank * std::max(max_pivot, 1e-300)) break;
        ++rank;
        if (R(k, col) > 0) alpha = -alpha;
        std::vector<double> v(m, 0.0);
        v[k] = R(k, col) - alpha;
        for (std::size_t i = k + 1; i < m; ++i) v[i] = R(i, col);
        double vn = 0.0;
        for (double x : v) vn += x * x;
        if (vn < 1e-300) continue;
        auto reflect = [&](Matrix& M2, std::size_t jcol) {
            double s = 0.0;
            for (std::size_t i = k; i < m; ++i) s += v[i] * M2(i, jcol);
            s = 2.0 * s / vn;
            for (std::size_t i = k; i < m; ++i) M2(i, jcol) -= s * v[i];
        };
        for (std::size_t j = k; j < n; ++j) reflect(R, perm[j]);
        for (std::size_t j = 0; j < B.cols(); ++j) reflect(Bt, j);
        for (std::size_t j = k + 1; j < n; ++j) colnorm[perm[j]] -= R(k, perm[j]) * R(k, perm[j]);
    }

    LeastSquaresResult out;
    out.rank_deficient = rank < n;
    out.X = Matrix(n, B.cols());
    if (!out.rank_deficient) {
        for (std::size_t j = 0; j < B.cols(); ++j)
            for (std::size_t kk = rank; kk-- > 0;) {
                double s = Bt(kk, j);
                for (std::size_t i = kk + 1; i < rank; ++i) s -= R(kk, perm[i]) * out.X(perm[i], j);
                out.X(perm[kk], j) = s / R(kk, perm[kk]);
            }
    } else if (rank > 0) {
        // Minimum-norm solution on the rank-r leading system:
        // with permuted unknowns xt, solve R1 xt = c by xt = R1'(R1 R1')^{-1} c.
        Matrix R1(rank, n);
        for (std::size_t i = 0; i < rank; ++i)
            for (std::size_t j = 0; j < n; ++j) R1(i, j) = R(i, perm[j]);
        Matrix C(rank, B.cols());
        for (std::size_t i = 0; i < rank; ++i)
            for (std::size_t j = 0; j < B.cols(); ++j) C(i, j) = Bt(i, j);
        const Matrix xt = R1.transpose() * solve_linear(R1 * R1.transpose(), C);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < B.cols(); ++j) out.X(perm[k], j) = xt(k, j);
    }
    const Matrix res = A * out.X - B;
    out.residual = res.norm();
    return out;
}

double spectral_norm(const Matrix& A) {
    if (A.rows() == 0 || A.cols() == 0) return 0.0;
    const Matrix G = (A.rows() >= A.cols()) ? A.transpose() * A : A * A.transpose();
    SymEig e = sym_eig(G);
    return std::sqrt(std::max(e.values.back(), 0.0));
}

}  // namespace rsfkit
