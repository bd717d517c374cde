#include "rsfkit/rsf.hpp"

#include <cmath>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "rsfkit/io.hpp"

namespace rsfkit {

namespace {

Matrix or_default(const std::optional<Matrix>& m, std::size_t rows, std::size_t cols, bool eye = false) {
    if (m) {
        require_dims(*m, rows, cols, "certificate seed matrix");
        return *m;
    }
    if (eye && rows == cols) return Matrix::identity(rows);
    Matrix z(rows, cols);
    if (eye)
        for (std::size_t i = 0; i < std::min(rows, cols); ++i) z(i, i) = 1.0;
    return z;
}

double phi1(const SystemModel& m1, const std::vector<double>& arg_state) {
    return m1.phi_of_state(arg_state);
}

}  // namespace

void RsfCertificate::validate(const SystemModel& m1, const SystemModel& m2) const {
    const std::size_t n1 = m1.n(), n2 = m2.n(), p1 = m1.p(), p2 = m2.p();
    const std::size_t d1 = m1.q() + m1.r(), d2 = m2.q() + m2.r();
    require_dims(M, n1, n1, "M");
    require_dims(P, n1, n2, "P");
    require_dims(K1, d2, n1, "K1");
    require_dims(Q1, d2, n1, "Q1");
    require_dims(K2, p1, n1, "K2");
    require_dims(Q2, p1, n2, "Q2");
    require_dims(R1, d2, d1, "R1");
    require_dims(R2, p1, p2, "R2");
    require_dims(L11, d2, 1, "L11");
    require_dims(L12, d2, 1, "L12");
    require_dims(L21, p1, 1, "L21");
    require_dims(L22, p1, 1, "L22");
    if (lambda <= 0) throw std::runtime_error("certificate: lambda must be positive");
    const SymEig e = sym_eig(M);
    if (e.values.front() < -tolerances().psd_clamp * std::max(1.0, e.values.back()))
        throw std::runtime_error("certificate: M is not PSD");
}

Matrix build_H(const RsfCertificate& c, const SystemModel& m1, const SystemModel& m2) {
    const Matrix PD2 = c.P * m2.D();
    Matrix H = m1.A - PD2 * (c.K1 + c.Q1) + m1.B * c.K2;
    if (c.delta_bar != 0.0 && !m1.F.empty() && m1.F.norm() > 0.0) {
        Matrix Eeff = m1.E.empty() ? Matrix(m1.n(), 1) : m1.E;
        Eeff += m1.B * c.L21 - PD2 * c.L11;
        H += c.delta_bar * (Eeff * m1.F);
    }
    return H;
}

LmiReport verify_lmis(const RsfCertificate& c, const SystemModel& m1, const SystemModel& m2,
                      double tol) {
    LmiReport rep;
    rep.pass_tolerance = tol;
    const Matrix H = build_H(c, m1, m2);
    const SymEig ea = sym_eig(c.M - m1.C.transpose() * m1.C);
    rep.lmi_a_margin = ea.values.front();
    const Matrix Mh = H.transpose() * c.M + c.M * H + (2.0 * c.lambda) * c.M;
    const SymEig eb = sym_eig(Mh);
    rep.lmi_b_margin = -eb.values.back();
    rep.hurwitz = is_hurwitz(H).hurwitz;
    rep.pass = rep.lmi_a_margin >= -tol && rep.lmi_b_margin >= -tol && rep.hurwitz;
    return rep;
}

EqualityReport verify_equalities(const RsfCertificate& c, const SystemModel& m1,
                                 const SystemModel& m2, double tol) {
    EqualityReport rep;
    rep.tol = tol;
    const Matrix PD2 = c.P * m2.D();
    rep.res_c2 = (m2.C - m1.C * c.P).norm();
    if (!m2.F.empty() && !m1.F.empty()) rep.res_f2 = (m2.F - m1.F * c.P).norm();
    rep.res_sylv = (m1.A * c.P + m1.B * c.Q2 - c.P * m2.A - PD2 * c.Q1 * c.P).norm();
    {
        Matrix lhs = m1.E.empty() ? Matrix(m1.n(), 1) : m1.E;
        Matrix rhs = c.P * (m2.E.empty() ? Matrix(m2.n(), 1) : m2.E) - m1.B * (c.L21 - c.L22) +
                     PD2 * (c.L11 - c.L12);
        rep.res_e = (lhs - rhs).norm();
    }
    rep.pass = rep.res_c2 <= tol && rep.res_f2 <= tol && rep.res_sylv <= tol && rep.res_e <= tol;
    return rep;
}

namespace {

/// Single-input Ackermann: returns K with eig(A + b K) = poles.
Matrix ackermann_gain(const Matrix& A, const Matrix& b, const std::vector<double>& poles) {
    const std::size_t n = A.rows();
    if (poles.size() != n) throw ConstructionError("pole placement: need exactly n pole targets");
    Matrix ctrb(n, n);
    {
        Matrix v = b;
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) ctrb(i, j) = v(i, 0);
            v = A * v;
        }
    }
    // polynomial with the target roots, p(s) = prod (s - t)
    std::vector<double> coeff{1.0};
    for (double t : poles) {
        std::vector<double> next(coeff.size() + 1, 0.0);
        for (std::size_t i = 0; i < coeff.size(); ++i) {
            next[i] += coeff[i];
            next[i + 1] -= coeff[i] * t;
        }
        coeff = std::move(next);
    }
    Matrix pA = Matrix::identity(n) * coeff[0];
    for (std::size_t i = 1; i < coeff.size(); ++i) pA = pA * A + Matrix::identity(n) * coeff[i];
    // K = -e_n' Ctrb^{-1} p(A)
    Matrix en(n, 1);
    en(n - 1, 0) = 1.0;
    Matrix w;
    try {
        w = solve_linear(ctrb.transpose(), en);  // Ctrb' w = e_n
    } catch (const NumericsError&) {
        throw ConstructionError("pole placement: controllability matrix is singular (unstabilizable pair)");
    }
    return (w.transpose() * pA) * -1.0;
}

}  // namespace

RsfCertificate construct_certificate(const SystemModel& m1, const SystemModel& m2, const Matrix& P,
                                     double lambda, const CertificateSeed& seed,
                                     const std::vector<double>& pole_targets, double equality_tol) {
    if (m1.p() != 1) throw ConstructionError("construct_certificate: single-input concrete model required");
    const std::size_t n1 = m1.n(), n2 = m2.n();
    const std::size_t d1 = m1.q() + m1.r(), d2 = m2.q() + m2.r();
    require_dims(P, n1, n2, "P");

    RsfCertificate c;
    c.lambda = lambda;
    c.P = P;
    c.K1 = or_default(seed.K1, d2, n1);
    c.Q1 = or_default(seed.Q1, d2, n1);
    c.R1 = or_default(seed.R1, d2, d1, /*eye=*/true);
    c.R2 = or_default(seed.R2, 1, m2.p(), /*eye=*/true);
    c.L11 = or_default(seed.L11, d2, 1);
    c.L12 = or_default(seed.L12, d2, 1);
    c.L21 = or_default(seed.L21, 1, 1);
    c.L22 = or_default(seed.L22, 1, 1);
    c.delta_bar = seed.delta_bar;

    // (i) Q2 from the Sylvester-type equality.
    const Matrix PD2 = P * m2.D();
    const Matrix rhs = P * m2.A + PD2 * c.Q1 * P - m1.A * P;
    const LeastSquaresResult q2 = least_squares(m1.B, rhs);
    c.Q2 = q2.X;

    for (double t : pole_targets)
        if (t >= -lambda)
            throw ConstructionError("pole target " + std::to_string(t) +
                                    " does not clear the decay rate -lambda");

    // (iii) fold the nonlinearity's B-channel into the placed gain.
    Matrix Abase = m1.A - PD2 * (c.K1 + c.Q1);
    Matrix L21F(1, n1);
    if (c.delta_bar != 0.0 && !m1.F.empty() && m1.F.norm() > 0.0) {
        Matrix Eeff = m1.E.empty() ? Matrix(n1, 1) : m1.E;
        Eeff -= PD2 * c.L11;
        Abase += c.delta_bar * (Eeff * m1.F);
        L21F = c.delta_bar * (c.L21 * m1.F);
    }
    c.K2 = ackermann_gain(Abase, m1.B, pole_targets) - L21F;

    // (iv) M via the shifted Lyapunov equation, then scale to dominate C1'C1.
    const Matrix H = build_H(c, m1, m2);
    const Matrix Hs = H + Matrix::identity(n1) * lambda;
    Matrix M0 = solve_lyapunov(Hs, m1.C.transpose() * m1.C + Matrix::identity(n1) * 1e-6);
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = i + 1; j < n1; ++j) {
            const double s = 0.5 * (M0(i, j) + M0(j, i));
            M0(i, j) = M0(j, i) = s;
        }
    // smallest sigma >= 1 with sigma M0 >= C1'C1: sigma = max eig of
    // M0^{-1/2} C1'C1 M0^{-1/2}
    const Matrix R0 = psd_sqrt(M0);
    const Matrix R0inv = solve_linear(R0, Matrix::identity(n1));
    const SymEig es = sym_eig(R0inv * (m1.C.transpose() * m1.C) * R0inv);
    const double sigma = std::max(1.0, es.values.back() * (1.0 + 1e-9));
    c.M = M0 * sigma;

    // (v) final gate.
    const LmiReport lmi = verify_lmis(c, m1, m2);
    if (!lmi.pass)
        throw ConstructionError("constructed certificate fails the matrix inequalities (margins " +
                                std::to_string(lmi.lmi_a_margin) + ", " + std::to_string(lmi.lmi_b_margin) + ")");
    const EqualityReport eq = verify_equalities(c, m1, m2, equality_tol);
    if (eq.res_c2 > equality_tol || eq.res_sylv > equality_tol || eq.res_f2 > equality_tol)
        throw ConstructionError("abstraction equalities violated beyond tolerance (C2: " +
                                std::to_string(eq.res_c2) + ", Sylvester: " + std::to_string(eq.res_sylv) +
                                ", F2: " + std::to_string(eq.res_f2) + ")");
    return c;
}

std::vector<double> interface_u(const RsfCertificate& c, const SystemModel& m1,
                                const std::vector<double>& x1, const std::vector<double>& x2,
                                const std::vector<double>& u2) {
    std::vector<double> err = x1;
    const std::vector<double> px2 = matvec(c.P, x2);
    for (std::size_t i = 0; i < err.size(); ++i) err[i] -= px2[i];
    std::vector<double> u = matvec(c.K2, err);
    const std::vector<double> q2x = matvec(c.Q2, x2);
    const std::vector<double> r2u = matvec(c.R2, u2);
    const double p1v = phi1(m1, x1), p2v = phi1(m1, px2);
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] += q2x[i] + r2u[i] + c.L21(i, 0) * p1v - c.L22(i, 0) * p2v;
    return u;
}

std::vector<double> interface_d(const RsfCertificate& c, const SystemModel& m1,
                                const std::vector<double>& x1, const std::vector<double>& x2,
                                const std::vector<double>& d1) {
    std::vector<double> err = x1;
    const std::vector<double> px2 = matvec(c.P, x2);
    for (std::size_t i = 0; i < err.size(); ++i) err[i] -= px2[i];
    std::vector<double> d = matvec(c.K1, err);
    const std::vector<double> q1x = matvec(c.Q1, x1);
    const std::vector<double> r1d = matvec(c.R1, d1);
    const double p1v = phi1(m1, x1), p2v = phi1(m1, px2);
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] += q1x[i] + r1d[i] + c.L11(i, 0) * p1v - c.L12(i, 0) * p2v;
    return d;
}

GammaCoefficients gamma_coefficients(const RsfCertificate& c, const SystemModel& m1,
                                     const SystemModel& m2) {
    const Matrix sqM = psd_sqrt(c.M);
    GammaCoefficients g;
    g.c1 = spectral_norm(sqM * (m1.D() - c.P * m2.D() * c.R1)) / c.lambda;
    g.c2 = spectral_norm(sqM * (m1.B * c.R2 - c.P * m2.B)) / c.lambda;
    return g;
}

double epsilon_bound(const RsfCertificate& c, const SystemModel& m1, const SystemModel& m2,
                     const EpsilonQuery& q) {
    if (q.d_max < 0 || q.u2_max < 0) throw std::runtime_error("epsilon_bound: negative bound");
    const GammaCoefficients g = gamma_coefficients(c, m1, m2);
    double v0 = 0.0;
    if (!q.x1_0.empty() || !q.x2_0.empty()) {
        std::vector<double> x1 = q.x1_0.empty() ? std::vector<double>(m1.n(), 0.0) : q.x1_0;
        std::vector<double> x2 = q.x2_0.empty() ? std::vector<double>(m2.n(), 0.0) : q.x2_0;
        v0 = eval_V(c, x1, x2);
    }
    return std::max(v0, g.c1 * q.d_max + g.c2 * q.u2_max);
}

double eval_V(const RsfCertificate& c, const std::vector<double>& x1, const std::vector<double>& x2) {
    std::vector<double> err = x1;
    const std::vector<double> px2 = matvec(c.P, x2);
    for (std::size_t i = 0; i < err.size(); ++i) err[i] -= px2[i];
    const double q = dot(err, matvec(c.M, err));
    return std::sqrt(std::max(q, 0.0));
}

void optimize_r_gains(RsfCertificate& c, const SystemModel& m1, const SystemModel& m2) {
    const Matrix sqM = psd_sqrt(c.M);
    {
        const Matrix Aw = sqM * (c.P * m2.D());
        const Matrix Bw = sqM * m1.D();
        if (Aw.cols() > 0 && Bw.cols() > 0) c.R1 = least_squares(Aw, Bw).X;
    }
    {
        const Matrix Aw = sqM * m1.B;
        const Matrix Bw = sqM * (c.P * m2.B);
        if (Aw.cols() > 0 && Bw.cols() > 0) c.R2 = least_squares(Aw, Bw).X;
    }
}

void refit_abstraction_inputs(const RsfCertificate& c, const SystemModel& m1, SystemModel& m2) {
    if (!m2.is_linear())
        throw std::runtime_error("refit_abstraction_inputs: abstract input maps are only free in the linear case");
    const Matrix sqM = psd_sqrt(c.M);
    const Matrix W = sqM * c.P;
    {
        // B2 = argmin ||sqrt(M)(B1 R2 - P B2)||
        const Matrix target = sqM * (m1.B * c.R2);
        m2.B = least_squares(W, target).X;
    }
    {
        // [G2 S2] = argmin ||sqrt(M)(D1 - P D2 R1)||, requires square R1;
        // solve with R1 = I block convention: D2 = argmin ||sqrt(M)(D1 - P D2)||.
        const Matrix target = sqM * m1.D();
        const Matrix D2 = least_squares(W, target).X;
        m2.G = D2.block(0, 0, m2.n(), m1.q());
        m2.S_int = m1.r() > 0 ? D2.block(0, m1.q(), m2.n(), m1.r()) : Matrix(m2.n(), 0);
    }
    m2.validate();
}

TraceCheckReport check_rsf_conditions_along_trace(const RsfCertificate& c, const SystemModel& m1,
                                                  const SystemModel& m2, const Trace& t1,
                                                  const Trace& t2, double decay_slack) {
    if (t1.t.size() != t2.t.size() || t1.t.empty())
        throw std::runtime_error("check_rsf_conditions_along_trace: traces not synchronized");
    const GammaCoefficients g = gamma_coefficients(c, m1, m2);
    const Matrix sqM = psd_sqrt(c.M);
    const Matrix Wd = sqM * (m1.D() - c.P * m2.D() * c.R1);
    const Matrix Wu = sqM * (m1.B * c.R2 - c.P * m2.B);

    TraceCheckReport rep;
    rep.samples = t1.t.size();
    std::vector<double> V(rep.samples);
    for (std::size_t k = 0; k < rep.samples; ++k) {
        V[k] = eval_V(c, t1.x[k], t2.x[k]);
        rep.max_V = std::max(rep.max_V, V[k]);
        double mm = 0.0;
        for (std::size_t i = 0; i < t1.y[k].size(); ++i) {
            const double d = t1.y[k][i] - t2.y[k][i];
            mm += d * d;
        }
        mm = std::sqrt(mm);
        rep.max_output_mismatch = std::max(rep.max_output_mismatch, mm);
        if (mm > V[k] + 1e-6) ++rep.bound_violations;
    }
    const double dt = t1.t.size() > 1 ? t1.t[1] - t1.t[0] : 0.0;
    for (std::size_t k = 0; k + 1 < rep.samples; ++k) {
        std::vector<double> d1 = t1.v[k];
        d1.insert(d1.end(), t1.w[k].begin(), t1.w[k].end());
        const std::vector<double>& u2 = t2.u[k];
        const double dV = (V[k + 1] - V[k]) / dt;
        if (g.c1 * norm2(d1) + g.c2 * norm2(u2) <= V[k] && dV > decay_slack) ++rep.decay_violations;
        // Theorem-1 derivation chain: dV <= -lambda V + ||Wd d1 + Wu u2||.
        std::vector<double> leak = matvec(Wd, d1);
        const std::vector<double> lu = matvec(Wu, u2);
        for (std::size_t i = 0; i < leak.size(); ++i) leak[i] += lu[i];
        if (dV > -c.lambda * V[k] + norm2(leak) + decay_slack) ++rep.chain_violations;
    }
    rep.pass = rep.bound_violations == 0 && rep.decay_violations == 0;
    return rep;
}

RsfCertificate load_certificate(const std::filesystem::path& path) {
    const nlohmann::json j = load_json(path);
    RsfCertificate c;
    c.M = matrix_from_json(j, "M");
    c.P = matrix_from_json(j, "P");
    c.K1 = matrix_from_json(j, "K1");
    c.Q1 = matrix_from_json(j, "Q1");
    c.K2 = matrix_from_json(j, "K2");
    c.Q2 = matrix_from_json(j, "Q2");
    c.R1 = matrix_from_json(j, "R1");
    c.R2 = matrix_from_json(j, "R2");
    c.L11 = matrix_from_json(j, "L11");
    c.L12 = matrix_from_json(j, "L12");
    c.L21 = matrix_from_json(j, "L21");
    c.L22 = matrix_from_json(j, "L22");
    c.lambda = j.at("lambda").get<double>();
    c.delta_bar = j.value("delta_bar", 0.0);
    return c;
}

void save_certificate(const std::filesystem::path& path, const RsfCertificate& c) {
    nlohmann::json j;
    j["M"] = matrix_to_json(c.M);
    j["P"] = matrix_to_json(c.P);
    j["K1"] = matrix_to_json(c.K1);
    j["Q1"] = matrix_to_json(c.Q1);
    j["K2"] = matrix_to_json(c.K2);
    j["Q2"] = matrix_to_json(c.Q2);
    j["R1"] = matrix_to_json(c.R1);
    j["R2"] = matrix_to_json(c.R2);
    j["L11"] = matrix_to_json(c.L11);
    j["L12"] = matrix_to_json(c.L12);
    j["L21"] = matrix_to_json(c.L21);
    j["L22"] = matrix_to_json(c.L22);
    j["lambda"] = c.lambda;
    j["delta_bar"] = c.delta_bar;
    save_json(path, j);
}

}  // namespace rsfkit
