#pragma once

#include <functional>
#include <optional>

#include "rsfkit/matrix.hpp"

namespace rsfkit {

/// Scalar nonlinearity with a sector/slope restriction
/// a <= (phi(c)-phi(d))/(c-d) <= b.
struct SlopeNonlinearity {
    enum class Kind { zero, identity, saturation };
    Kind kind = Kind::zero;
    double a = 0.0;
    double b = 0.0;
    double sat_min = 0.0;
    double sat_max = 0.0;
    double gain = 1.0;  // output aggregation (N_ESS); slope bounds refer to phi itself

    double eval(double s) const {
        switch (kind) {
            case Kind::zero: return 0.0;
            case Kind::identity: return s;
            case Kind::saturation: return s < sat_min ? sat_min : (s > sat_max ? sat_max : s);
        }
        return 0.0;
    }
    void validate() const;
};

/// One subsystem:
///   xdot = A x + B u + G v + S w + E phi(F x),   y = C x,  y_int = C_int x.
struct SystemModel {
    Matrix A, B, C, G, S_int, E, F;
    SlopeNonlinearity phi;
    Matrix C_int;  // internal output map; empty means "same as C"
    std::string name;

    std::size_t n() const { return A.rows(); }
    std::size_t p() const { return B.cols(); }
    std::size_t q() const { return G.cols(); }
    std::size_t r() const { return S_int.cols(); }
    std::size_t m() const { return C.rows(); }
    std::size_t m_int() const { return C_int.empty() ? C.rows() : C_int.rows(); }
    const Matrix& internal_output_map() const { return C_int.empty() ? C : C_int; }

    bool is_linear() const { return phi.kind == SlopeNonlinearity::Kind::zero || E.norm() == 0.0 || F.norm() == 0.0; }

    /// D = [G S], the stacked disturbance input matrix.
    Matrix D() const;

    double phi_of_state(const std::vector<double>& x) const;

    void validate() const;
};

/// Network of subsystems coupled by w = M_coupling * y_int (stacked).
struct Interconnection {
    std::vector<SystemModel> subsystems;
    Matrix coupling;  // (sum r_i) x (sum m_int_i)
    Matrix T;         // pairwise frequency coupling constants, T_ii = 0

    void validate() const;
};

/// Uniformly sampled simulation record.
struct Trace {
    double dt = 0.0;
    std::vector<double> t;
    std::vector<std::vector<double>> x, y, u, v, w;

    std::size_t steps() const { return t.size(); }
    /// Column named y<k> (0-based) as a flat signal.
    std::vector<double> output_channel(std::size_t k) const;
};

/// Input signals may depend on time and current state. Evaluated at every
/// RK4 substage.
using Signal = std::function<std::vector<double>(double t, const std::vector<double>& x)>;

Signal constant_signal(std::vector<double> value);
Signal zero_signal(std::size_t dim);
/// value for t >= t_on, zero before.
Signal step_signal(std::vector<double> value, double t_on = 0.0);
/// ramp from zero at t0 with the given slope per channel.
Signal ramp_signal(std::vector<double> slope, double t0 = 0.0);

std::vector<double> eval_dynamics(const SystemModel& m, const std::vector<double>& x,
                                  const std::vector<double>& u, const std::vector<double>& v,
                                  const std::vector<double>& w);

/// EV/ESS aggregate droop response: gain * sat(s) with the model's clamp.
double ess_response(double delta_f, const SlopeNonlinearity& p);

/// Sum_j T_row[j] * (f_local - f_neighbors[j]).
double coupling_disturbance(double f_local, const std::vector<double>& f_neighbors,
                            const std::vector<double>& T_row);

struct SimulationError : std::runtime_error {
    double t_fail;
    SimulationError(const std::string& what, double t) : std::runtime_error(what), t_fail(t) {}
};

/// Classical fixed-step RK4. Signals are sampled at substage times.
Trace simulate(const SystemModel& m, const std::vector<double>& x0, const Signal& u_sig,
               const Signal& v_sig, const Signal& w_sig, double horizon, double dt);

/// Close the internal-disturbance loop: block-diagonal subsystems with
/// w = coupling * y_int substituted into the S terms. All subsystems must
/// be linear (the scalar nonlinearity does not stack).
SystemModel interconnect(const Interconnection& net);

}  // namespace rsfkit
