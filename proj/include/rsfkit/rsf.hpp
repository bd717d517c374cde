#pragma once

#include <filesystem>
#include <optional>

#include "rsfkit/model.hpp"
#include "rsfkit/numerics.hpp"

namespace rsfkit {

/// All data of a robust-simulation-function certificate binding a
/// concrete model m1 to an abstract model m2:
///   V(x1,x2) = sqrt((x1 - P x2)' M (x1 - P x2)).
struct RsfCertificate {
    Matrix M;            // n1 x n1 symmetric PSD
    double lambda = 0.0; // decay rate, > 0
    Matrix P;            // n1 x n2
    Matrix K1, Q1;       // disturbance-side gains, (q2+r2) x n1
    Matrix K2;           // p1 x n1
    Matrix Q2;           // p1 x n2
    Matrix R1;           // (q2+r2) x (q1+r1)
    Matrix R2;           // p1 x p2
    Matrix L11, L12;     // (q2+r2) x 1
    Matrix L21, L22;     // p1 x 1
    double delta_bar = 0.0;

    void validate(const SystemModel& m1, const SystemModel& m2) const;
};

/// H = (A1 - P D2 (K1+Q1) + B1 K2) + delta_bar (E1 + B1 L21 - P D2 L11) F1.
/// D2 comes from the bound abstract model; for linear models the E1/F1
/// term vanishes.
Matrix build_H(const RsfCertificate& c, const SystemModel& m1, const SystemModel& m2);

struct LmiReport {
    double lmi_a_margin = 0.0;  // min eig(M - C1'C1)
    double lmi_b_margin = 0.0;  // -max eig(H'M + MH + 2 lambda M)
    bool hurwitz = false;
    double pass_tolerance = 0.0;
    bool pass = false;
};
/// Margins of the two certificate matrix inequalities. pass iff both
/// margins >= -tol (tol absorbs printed-data rounding).
LmiReport verify_lmis(const RsfCertificate& c, const SystemModel& m1, const SystemModel& m2,
                      double tol = 1e-6);

struct EqualityReport {
    double res_c2 = 0.0;   // ||C2 - C1 P||
    double res_f2 = 0.0;   // ||F2 - F1 P||
    double res_sylv = 0.0; // ||A1 P + B1 Q2 - P A2 - P D2 Q1 P||
    double res_e = 0.0;    // ||E1 - P E2 + B1 (L21 - L22) - P D2 (L11 - L12)||
    double tol = 0.0;
    bool pass = false;
};
EqualityReport verify_equalities(const RsfCertificate& c, const SystemModel& m1,
                                 const SystemModel& m2, double tol);

/// Fixed certificate pieces supplied by the caller; anything absent
/// defaults to zero (gains) or identity (R1, R2).
struct CertificateSeed {
    std::optional<Matrix> K1, Q1, R1, R2, L11, L12, L21, L22;
    double delta_bar = 0.0;
};

struct ConstructionError : std::runtime_error {
    explicit ConstructionError(const std::string& what) : std::runtime_error(what) {}
};

/// Constructive certificate path (replaces an SDP search):
///  (i)  Q2 from least squares on B1 Q2 = P A2 + P D2 Q1 P - A1 P,
///  (ii) the E-equality residual is reported,
///  (iii) K2 by single-input Ackermann placement of H at pole_targets,
///  (iv) M from the Lyapunov equation of H + lambda I, scaled so that
///       M >= C1'C1,
///  (v)  the result must pass verify_lmis / verify_equalities.
RsfCertificate construct_certificate(const SystemModel& m1, const SystemModel& m2, const Matrix& P,
                                     double lambda, const CertificateSeed& seed,
                                     const std::vector<double>& pole_targets,
                                     double equality_tol = 1e-6);

/// u1 = K2 (x1 - P x2) + Q2 x2 + R2 u2 + L21 phi(F1 x1) - L22 phi(F1 P x2).
std::vector<double> interface_u(const RsfCertificate& c, const SystemModel& m1,
                                const std::vector<double>& x1, const std::vector<double>& x2,
                                const std::vector<double>& u2);

/// d2 = K1 (x1 - P x2) + Q1 x1 + R1 d1 + L11 phi(F1 x1) - L12 phi(F1 P x2).
std::vector<double> interface_d(const RsfCertificate& c, const SystemModel& m1,
                                const std::vector<double>& x1, const std::vector<double>& x2,
                                const std::vector<double>& d1);

struct GammaCoefficients {
    double c1 = 0.0;  // gamma1(v) = c1 v = ||sqrt(M)(D1 - P D2 R1)|| / lambda * v
    double c2 = 0.0;  // gamma2(v) = c2 v = ||sqrt(M)(B1 R2 - P B2)|| / lambda * v
};
GammaCoefficients gamma_coefficients(const RsfCertificate& c, const SystemModel& m1,
                                     const SystemModel& m2);

struct EpsilonQuery {
    double d_max = 0.0;
    double u2_max = 0.0;
    std::vector<double> x1_0, x2_0;  // empty means zero
};
/// epsilon = max{ V(x1(0), x2(0)), gamma1(d_max) + gamma2(u2_max) }.
double epsilon_bound(const RsfCertificate& c, const SystemModel& m1, const SystemModel& m2,
                     const EpsilonQuery& q);

double eval_V(const RsfCertificate& c, const std::vector<double>& x1, const std::vector<double>& x2);

/// Closed-form minimizers of the gamma norms over R1, R2 (the optional
/// tuning step; Frobenius surrogate of the spectral norm).
void optimize_r_gains(RsfCertificate& c, const SystemModel& m1, const SystemModel& m2);

/// Replace free abstract input maps by the M-weighted projections that
/// minimize the gamma norms: B2 <- argmin ||sqrt(M)(B1 R2 - P B2)||,
/// G2/S2 <- argmin ||sqrt(M)(D1 - P D2 R1)||. Only valid for linear
/// abstractions, where these maps are unconstrained by the equalities.
void refit_abstraction_inputs(const RsfCertificate& c, const SystemModel& m1, SystemModel& m2);

struct TraceCheckReport {
    std::size_t samples = 0;
    std::size_t bound_violations = 0;      // ||y1-y2|| > V + slack
    std::size_t decay_violations = 0;      // dV/dt > slack while gammas <= V
    std::size_t chain_violations = 0;      // dV/dt > -lambda V + ||...d1 + ...u2|| + slack
    double max_output_mismatch = 0.0;
    double max_V = 0.0;
    bool pass = false;
};
/// Pointwise checks of the RSF conditions along a synchronized pair of
/// traces (trace1 carries d1 in its v/w columns, trace2 carries u2 in u).
TraceCheckReport check_rsf_conditions_along_trace(const RsfCertificate& c, const SystemModel& m1,
                                                  const SystemModel& m2, const Trace& t1,
                                                  const Trace& t2, double decay_slack = 1e-4);

/// Certificate JSON: all matrices plus lambda and delta_bar.
RsfCertificate load_certificate(const std::filesystem::path& path);
void save_certificate(const std::filesystem::path& path, const RsfCertificate& c);

}  // namespace rsfkit
