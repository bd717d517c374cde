#pragma once

#include "rsfkit/reduction.hpp"
#include "rsfkit/rsf.hpp"

namespace rsfkit {

/// One-call construction of a certified reduced-order abstraction for a
/// linear single-input model: balanced truncation for A2/C2, the exact
/// projection repair, optional output-aligned realization, Ackermann and
/// Lyapunov certificate pieces, and the gamma-minimizing refit of the
/// free abstract input maps.
struct AbstractionRecipe {
    std::size_t order = 3;
    double lambda = 1.7;
    std::vector<double> pole_targets;
    bool gramian_disturbances = true;
    bool align_output = true;
    bool refit_inputs = true;
};

struct CertifiedAbstraction {
    SystemModel abstract_model;
    RsfCertificate cert;
    std::vector<double> hankel;
};

CertifiedAbstraction certify_reduction(const SystemModel& m1, const AbstractionRecipe& recipe);

}  // namespace rsfkit
