#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rsfkit/numerics.hpp"
#include "rsfkit/rsf.hpp"
#include "test_helpers.hpp"

using namespace rsfkit;
using namespace rsfkit::testing;

TEST_CASE("sym_eig diagonal and exchange matrices") {
    SymEig e = sym_eig(Matrix{{2, 0}, {0, 5}});
    CHECK(e.values[0] == doctest::Approx(2.0));
    CHECK(e.values[1] == doctest::Approx(5.0));
    CHECK(std::fabs(e.vectors(0, 0)) == doctest::Approx(1.0));

    e = sym_eig(Matrix{{0, 1}, {1, 0}});
    CHECK(e.values[0] == doctest::Approx(-1.0));
    CHECK(e.values[1] == doctest::Approx(1.0));
}

TEST_CASE("sym_eig rejects non-square input") {
    CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), DimensionError);
}

TEST_CASE("sym_eig reconstructs random symmetric matrices") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + trial % 9;
        const Matrix S = random_symmetric(rng, n, 3.0);
        const SymEig e = sym_eig(S);
        Matrix R(n, n);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    R(i, j) += e.values[k] * e.vectors(i, k) * e.vectors(j, k);
        CHECK((R - S).norm() <= 1e-8 * std::max(S.norm(), 1.0));
        // residual per pair
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<double> v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = e.vectors(i, k);
            std::vector<double> Sv = matvec(S, v);
            for (std::size_t i = 0; i < n; ++i) Sv[i] -= e.values[k] * v[i];
            CHECK(norm2(Sv) <= 1e-8 * std::max(S.norm(), 1.0));
        }
    }
}

TEST_CASE("appendix M is positive definite") {
    const RsfCertificate cert = load_certificate(nets::data_dir() / "nets_area1_cert.json");
    const SymEig e = sym_eig(cert.M);
    CHECK(e.values.front() > 0.0);
    CHECK(e.values.front() == doctest::Approx(0.0195).epsilon(0.05));
    CHECK(e.values.back() == doctest::Approx(93.3679).epsilon(1e-3));
}

TEST_CASE("solve_lyapunov closed forms") {
    // A = -I, Q = 2I -> X = I
    Matrix X = solve_lyapunov(Matrix::identity(2) * -1.0, Matrix::identity(2) * 2.0);
    CHECK((X - Matrix::identity(2)).norm() == doctest::Approx(0.0).epsilon(1e-12));
    // decoupled scalars
    X = solve_lyapunov(Matrix{{-1, 0}, {0, -2}}, Matrix{{2, 0}, {0, 4}});
    CHECK(X(0, 0) == doctest::Approx(1.0));
    CHECK(X(1, 1) == doctest::Approx(1.0));
    CHECK(X(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("solve_lyapunov on the bundled reduced model") {
    const SystemModel m2 = load_bundled("nets_area1_abstract.json");
    const Matrix X = solve_lyapunov(m2.A, Matrix::identity(3));
    const Matrix R = m2.A.transpose() * X + X * m2.A + Matrix::identity(3);
    CHECK(R.norm() <= 1e-7 * (m2.A.norm() * X.norm() + 3.0));
}

TEST_CASE("solve_lyapunov random stable substitution residuals") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + trial % 7;
        const Matrix A = random_stable(rng, n);
        const Matrix Q = random_symmetric(rng, n);
        const Matrix X = solve_lyapunov(A, Q);
        const Matrix R = A.transpose() * X + X * A + Q;
        CHECK(R.norm() <= 1e-7 * (A.norm() * X.norm() + Q.norm() + 1.0));
    }
}

TEST_CASE("solve_lyapunov singular operator reports") {
    // eigenvalues +1, -1 sum to zero: operator singular
    CHECK_THROWS_AS(solve_lyapunov(Matrix{{1, 0}, {0, -1}}, Matrix::identity(2)), NumericsError);
}

TEST_CASE("psd_sqrt basics and idempotence") {
    CHECK((psd_sqrt(Matrix::identity(3)) - Matrix::identity(3)).norm() == doctest::Approx(0.0));
    const Matrix R = psd_sqrt(Matrix{{4, 0}, {0, 9}});
    CHECK(R(0, 0) == doctest::Approx(2.0));
    CHECK(R(1, 1) == doctest::Approx(3.0));

    std::mt19937 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + trial % 6;
        const Matrix B = random_matrix(rng, n, n);
        const Matrix M = B * B.transpose();
        const Matrix S = psd_sqrt(M);
        CHECK((S * S - M).norm() <= 1e-6 * std::max(M.norm(), 1.0));
        // applying psd_sqrt to S*S recovers S
        CHECK((psd_sqrt(S * S) - S).norm() <= 1e-6 * std::max(S.norm(), 1.0));
    }
    CHECK_THROWS_AS(psd_sqrt(Matrix{{-1.0}}), NumericsError);
}

TEST_CASE("psd_sqrt of the appendix M") {
    const RsfCertificate cert = load_certificate(nets::data_dir() / "nets_area1_cert.json");
    const Matrix Ms = (cert.M + cert.M.transpose()) * 0.5;
    const Matrix R = psd_sqrt(Ms);
    CHECK((R * R - Ms).norm() <= 1e-8 * Ms.norm());
}

TEST_CASE("is_hurwitz examples") {
    HurwitzReport h = is_hurwitz(Matrix::identity(3) * -1.0);
    CHECK(h.hurwitz);
    CHECK(h.abscissa == doctest::Approx(-1.0));

    h = is_hurwitz(Matrix{{0, 1}, {0, 0}});
    CHECK_FALSE(h.hurwitz);
    CHECK(h.abscissa == doctest::Approx(0.0).epsilon(1e-6));

    const SystemModel m2 = load_bundled("nets_area1_abstract.json");
    h = is_hurwitz(m2.A);
    CHECK(h.hurwitz);
    CHECK(h.abscissa == doctest::Approx(-0.33543855).epsilon(1e-5));
}

TEST_CASE("is_hurwitz agrees with Lyapunov positive definiteness") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + trial % 5;
        Matrix A = random_matrix(rng, n, n, 2.0);
        // push clearly off the imaginary axis either way
        A += Matrix::identity(n) * ((trial % 2) ? -4.0 : 4.0);
        bool lyap_pd = false;
        bool solvable = true;
        try {
            const Matrix X = solve_lyapunov(A, Matrix::identity(n));
            lyap_pd = sym_eig(X).values.front() > 0.0;
        } catch (const NumericsError&) {
            solvable = false;
        }
        if (solvable) CHECK(is_hurwitz(A).hurwitz == lyap_pd);
    }
}

TEST_CASE("eig_real_parts on known spectra") {
    const std::vector<double> re = eig_real_parts(Matrix{{-3, 1, 0}, {0, -3, 1}, {0, 0, 5}});
    CHECK(re.front() == doctest::Approx(-3.0));
    CHECK(re.back() == doctest::Approx(5.0));
    // rotation block: complex pair with real part -0.5
    const std::vector<double> rc = eig_real_parts(Matrix{{-0.5, 3.0}, {-3.0, -0.5}});
    CHECK(rc[0] == doctest::Approx(-0.5));
    CHECK(rc[1] == doctest::Approx(-0.5));
}

TEST_CASE("least_squares exact, overdetermined and rank-deficient") {
    // A = I -> X = B
    const Matrix B = Matrix{{1, 2}, {3, 4}};
    LeastSquaresResult r = least_squares(Matrix::identity(2), B);
    CHECK((r.X - B).norm() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.residual == doctest::Approx(0.0).epsilon(1e-12));

    // scalar mean: A = [1;1], B = [1;3] -> X = 2, residual sqrt(2)
    r = least_squares(Matrix{{1}, {1}}, Matrix{{1}, {3}});
    CHECK(r.X(0, 0) == doctest::Approx(2.0));
    CHECK(r.residual == doctest::Approx(std::sqrt(2.0)));
    CHECK_FALSE(r.rank_deficient);

    // rank-deficient: duplicate columns, minimum-norm splits the weight
    r = least_squares(Matrix{{1, 1}, {1, 1}}, Matrix{{2}, {2}});
    CHECK(r.rank_deficient);
    CHECK(r.X(0, 0) == doctest::Approx(1.0));
    CHECK(r.X(1, 0) == doctest::Approx(1.0));
    CHECK(r.residual == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("least_squares reproduces the appendix Q2") {
    // B1 Q2 = P A2 - A1 P with the printed matrices; Q2 close to print
    const SystemModel m1 = load_bundled("nets_area1_nonlinear.json");
    const SystemModel m2 = load_bundled("nets_area1_abstract.json");
    const RsfCertificate cert = load_certificate(nets::data_dir() / "nets_area1_cert.json");
    const Matrix rhs = cert.P * m2.A - m1.A * cert.P;
    const LeastSquaresResult r = least_squares(m1.B, rhs);
    CHECK(std::fabs(r.X(0, 0) - 0.02) <= 0.05);
    CHECK(std::fabs(r.X(0, 1) - (-0.0343)) <= 0.05);
    CHECK(std::fabs(r.X(0, 2) - 0.2860) <= 0.05);
    // frozen value of the rounding-induced residual
    CHECK(r.residual == doctest::Approx(0.126214).epsilon(1e-3));
}

TEST_CASE("spectral_norm matches the Euclidean norm on vectors") {
    const Matrix v = Matrix::col_vec({3.0, 4.0});
    CHECK(spectral_norm(v) == doctest::Approx(5.0));
    CHECK(spectral_norm(Matrix::identity(4)) == doctest::Approx(1.0));
}
