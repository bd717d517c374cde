#include "rsfkit/model.hpp"

#include <cmath>

namespace rsfkit {

void SlopeNonlinearity::validate() const {
    if (a > b) throw std::runtime_error("SlopeNonlinearity: a > b");
    if (kind == Kind::saturation && sat_min > sat_max)
        throw std::runtime_error("SlopeNonlinearity: sat_min > sat_max");
}

Matrix SystemModel::D() const {
    Matrix d(n(), q() + r());
    d.set_block(0, 0, G);
    if (r() > 0) d.set_block(0, q(), S_int);
    return d;
}

double SystemModel::phi_of_state(const std::vector<double>& x) const {
    if (is_linear()) return 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < n(); ++j) s += F(0, j) * x[j];
    return phi.eval(s);
}

void SystemModel::validate() const {
    const std::size_t nn = n();
    if (A.cols() != nn) throw DimensionError(name + ": A not square");
    if (B.rows() != nn) throw DimensionError(name + ": B rows != n");
    if (C.cols() != nn) throw DimensionError(name + ": C cols != n");
    if (G.rows() != nn) throw DimensionError(name + ": G rows != n");
    if (!S_int.empty() && S_int.rows() != nn) throw DimensionError(name + ": S rows != n");
    if (!E.empty() && (E.rows() != nn || E.cols() != 1)) throw DimensionError(name + ": E must be n x 1");
    if (!F.empty() && (F.rows() != 1 || F.cols() != nn)) throw DimensionError(name + ": F must be 1 x n");
    if (!C_int.empty() && C_int.cols() != nn) throw DimensionError(name + ": C_int cols != n");
    for (const Matrix* M : {&A, &B, &C, &G, &S_int, &E, &F, &C_int})
        if (!M->all_finite()) throw std::runtime_error(name + ": non-finite matrix entry");
    phi.validate();
}

void Interconnection::validate() const {
    std::size_t rsum = 0, msum = 0;
    for (const auto& s : subsystems) {
        s.validate();
        rsum += s.r();
        msum += s.m_int();
    }
    if (coupling.rows() != rsum || coupling.cols() != msum)
        throw DimensionError("Interconnection: coupling must be (sum r_i) x (sum m_int_i)");
    if (!T.empty()) {
        for (std::size_t i = 0; i < T.rows() && i < T.cols(); ++i)
            if (T(i, i) != 0.0) throw std::runtime_error("Interconnection: T_ii must be zero");
    }
}

std::vector<double> Trace::output_channel(std::size_t k) const {
    std::vector<double> s(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) s[i] = y[i].at(k);
    return s;
}

Signal constant_signal(std::vector<double> value) {
    return [value](double, const std::vector<double>&) { return value; };
}

Signal zero_signal(std::size_t dim) { return constant_signal(std::vector<double>(dim, 0.0)); }

Signal step_signal(std::vector<double> value, double t_on) {
    return [value, t_on](double t, const std::vector<double>&) {
        return t >= t_on ? value : std::vector<double>(value.size(), 0.0);
    };
}

Signal ramp_signal(std::vector<double> slope, double t0) {
    return [slope, t0](double t, const std::vector<double>&) {
        std::vector<double> v(slope.size(), 0.0);
        if (t > t0)
            for (std::size_t i = 0; i < slope.size(); ++i) v[i] = slope[i] * (t - t0);
        return v;
    };
}

std::vector<double> eval_dynamics(const SystemModel& m, const std::vector<double>& x,
                                  const std::vector<double>& u, const std::vector<double>& v,
                                  const std::vector<double>& w) {
    if (x.size() != m.n() || u.size() != m.p() || v.size() != m.q() || w.size() != m.r())
        throw DimensionError(m.name + ": eval_dynamics dimension mismatch");
    std::vector<double> dx = matvec(m.A, x);
    for (std::size_t i = 0; i < m.n(); ++i) {
        for (std::size_t j = 0; j < m.p(); ++j) dx[i] += m.B(i, j) * u[j];
        for (std::size_t j = 0; j < m.q(); ++j) dx[i] += m.G(i, j) * v[j];
        for (std::size_t j = 0; j < m.r(); ++j) dx[i] += m.S_int(i, j) * w[j];
    }
    if (!m.is_linear()) {
        const double ph = m.phi_of_state(x);
        for (std::size_t i = 0; i < m.n(); ++i) dx[i] += m.E(i, 0) * ph;
    }
    return dx;
}

double ess_response(double delta_f, const SlopeNonlinearity& p) {
    return p.gain * p.eval(delta_f);
}

double coupling_disturbance(double f_local, const std::vector<double>& f_neighbors,
                            const std::vector<double>& T_row) {
    if (f_neighbors.size() != T_row.size()) throw DimensionError("coupling_disturbance: length mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < T_row.size(); ++j) s += T_row[j] * (f_local - f_neighbors[j]);
    return s;
}

Trace simulate(const SystemModel& m, const std::vector<double>& x0, const Signal& u_sig,
               const Signal& v_sig, const Signal& w_sig, double horizon, double dt) {
    if (dt <= 0) throw std::runtime_error("simulate: dt must be positive");
    if (x0.size() != m.n()) throw DimensionError("simulate: x0 dimension mismatch");
    const std::size_t nsteps = static_cast<std::size_t>(std::llround(horizon / dt));

    Trace tr;
    tr.dt = dt;
    tr.t.reserve(nsteps + 1);
    std::vector<double> x = x0;

    auto deriv = [&](double t, const std::vector<double>& xs) {
        return eval_dynamics(m, xs, u_sig(t, xs), v_sig(t, xs), w_sig(t, xs));
    };

    for (std::size_t k = 0; k <= nsteps; ++k) {
        const double t = k * dt;
        tr.t.push_back(t);
        tr.x.push_back(x);
        tr.y.push_back(matvec(m.C, x));
        tr.u.push_back(u_sig(t, x));
        tr.v.push_back(v_sig(t, x));
        tr.w.push_back(w_sig(t, x));
        if (k == nsteps) break;

        const std::vector<double> k1 = deriv(t, x);
        std::vector<double> xt(m.n());
        for (std::size_t i = 0; i < m.n(); ++i) xt[i] = x[i] + 0.5 * dt * k1[i];
        const std::vector<double> k2 = deriv(t + 0.5 * dt, xt);
        for (std::size_t i = 0; i < m.n(); ++i) xt[i] = x[i] + 0.5 * dt * k2[i];
        const std::vector<double> k3 = deriv(t + 0.5 * dt, xt);
        for (std::size_t i = 0; i < m.n(); ++i) xt[i] = x[i] + dt * k3[i];
        const std::vector<double> k4 = deriv(t + dt, xt);
        for (std::size_t i = 0; i < m.n(); ++i)
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        for (double xi : x)
            if (!std::isfinite(xi)) throw SimulationError("simulate: state diverged", t + dt);
    }
    return tr;
}

SystemModel interconnect(const Interconnection& net) {
    net.validate();
    std::size_t n = 0, p = 0, q = 0, m = 0, r = 0, mi = 0;
    for (const auto& s : net.subsystems) {
        if (!s.is_linear())
            throw std::runtime_error("interconnect: nonlinear subsystems are not supported "
                                     "(scalar nonlinearities do not stack)");
        n += s.n(); p += s.p(); q += s.q(); m += s.m(); r += s.r(); mi += s.m_int();
    }
    SystemModel out;
    out.name = "interconnected";
    out.A = Matrix(n, n);
    out.B = Matrix(n, p);
    out.C = Matrix(m, n);
    out.G = Matrix(n, q);
    out.S_int = Matrix(n, 0);  // loop is closed, no free internal channel
    out.E = Matrix(n, 1);
    out.F = Matrix(1, n);
    out.phi.kind = SlopeNonlinearity::Kind::zero;

    // Block-diagonal placement plus S * M_coupling * C_int closure.
    Matrix Sblk(n, r), Cintblk(mi, n);
    std::size_t in = 0, ip = 0, iq = 0, im = 0, ir = 0, imi = 0;
    for (const auto& s : net.subsystems) {
        out.A.set_block(in, in, s.A);
        out.B.set_block(in, ip, s.B);
        out.C.set_block(im, in, s.C);
        out.G.set_block(in, iq, s.G);
        if (s.r() > 0) Sblk.set_block(in, ir, s.S_int);
        Cintblk.set_block(imi, in, s.internal_output_map());
        in += s.n(); ip += s.p(); iq += s.q(); im += s.m(); ir += s.r(); imi += s.m_int();
    }
    if (r > 0) out.A += Sblk * net.coupling * Cintblk;
    out.validate();
    return out;
}

}  // namespace rsfkit
