#pragma once

#include <cstdint>
#include <filesystem>

#include "rsfkit/model.hpp"
#include "rsfkit/rsf.hpp"

namespace rsfkit {

/// Uniform grid over a box with a finite input set and a per-channel
/// disturbance box. The abstraction is robust to any disturbance signal
/// taking values in that box.
struct GridAbstraction {
    std::vector<double> lower, upper, eta;
    std::vector<double> input_values;          // scalar input alphabet
    double tau = 0.1;                          // sampling period
    std::vector<double> dist_lo, dist_hi;      // disturbance box per channel

    std::size_t dim() const { return lower.size(); }
    std::vector<std::size_t> cells_per_dim() const;
    std::size_t cell_count() const;
    void validate(const SystemModel& m2) const;

    std::vector<double> cell_center(std::size_t idx) const;
    /// -1 when outside the box.
    long cell_of(const std::vector<double>& x) const;
};

/// Over-approximated successor sets, one axis-aligned cell box per
/// (cell, input); pairs whose box leaves the grid are out-of-domain.
class TransitionRelation {
public:
    TransitionRelation(GridAbstraction grid);

    const GridAbstraction& grid() const { return grid_; }
    std::size_t cells() const { return ncells_; }
    std::size_t inputs() const { return grid_.input_values.size(); }

    bool valid(std::size_t cell, std::size_t input) const { return valid_[pair_index(cell, input)]; }
    /// Successor box as inclusive cell-coordinate ranges per dimension.
    void successor_box(std::size_t cell, std::size_t input, std::vector<int>& lo,
                       std::vector<int>& hi) const;

    void set(std::size_t cell, std::size_t input, const std::vector<int>& lo,
             const std::vector<int>& hi, bool ok);

    std::size_t pair_index(std::size_t cell, std::size_t input) const {
        return input * ncells_ + cell;
    }

private:
    GridAbstraction grid_;
    std::size_t ncells_;
    std::vector<int16_t> box_;   // [pair][2*dim] lo..., hi...
    std::vector<uint8_t> valid_;
};

/// Successors by one-step RK4 of the cell center under the box-midpoint
/// disturbance plus a growth-bound radius r(tau), rdot = Lambda r + rho
/// with Lambda_ii = A_ii + delta |E_i F_i|, Lambda_ij = |A_ij| +
/// delta |E_i||F_j|, rho = |D| dhat. For a saturation nonlinearity the
/// slope factor delta is chosen per cell: zero when the cell's phi
/// argument range cannot straddle the kinks, the global bound otherwise.
TransitionRelation build_abstraction(const SystemModel& m2, const GridAbstraction& grid);

struct SymbolicController {
    GridAbstraction grid;
    std::vector<int32_t> mu_rank;             // -1 for losing cells
    std::vector<std::vector<uint16_t>> inputs;  // valid input indices, tie-break order
    std::size_t winning_count = 0;

    bool winning(std::size_t cell) const { return cell < mu_rank.size() && mu_rank[cell] >= 0; }
    bool empty() const { return winning_count == 0; }
};

struct SynthesisResult {
    SymbolicController controller;
    bool success = false;        // non-empty winning set
    std::size_t outer_iterations = 0;
    std::size_t inner_iterations = 0;
};

/// Recurrence winning set W = nu Z. mu Y. ((T and Pre(Z)) or Pre(Y)) \ A
/// with Pre(Y) = cells having an input whose every successor is in Y.
/// Goal cells store safety inputs (all successors stay in W); reach cells
/// store the inputs that realized their mu rank. Input lists are ordered
/// by |u| then negative-first.
SynthesisResult synthesize_recurrence(const TransitionRelation& rel,
                                      const std::vector<uint8_t>& target_cells,
                                      const std::vector<uint8_t>& avoid_cells);

struct ControlLookupError : std::runtime_error {
    explicit ControlLookupError(const std::string& what) : std::runtime_error(what) {}
};

/// Tie-broken input of the containing winning cell.
double control_lookup(const SymbolicController& ctrl, const std::vector<double>& x2);

/// Cell classification of an output band: target cells lie fully inside
/// [t_lo, t_hi]; avoid cells intersect the complement of [a_lo, a_hi].
struct BandCells {
    std::vector<uint8_t> target, avoid;
};
BandCells classify_output_band(const SystemModel& m2, const GridAbstraction& grid, double t_lo,
                               double t_hi, double a_lo, double a_hi);

struct ClosedLoopReport {
    double max_output_mismatch = 0.0;
    double max_V = 0.0;
    bool stayed_in_winning_set = true;
    bool disturbance_in_box = true;
    double min_y1 = 0.0, max_y1 = 0.0;
    std::size_t controller_active_steps = 0;
};

struct ClosedLoopResult {
    Trace concrete, abstract_trace;
    ClosedLoopReport report;
};

/// Sampled-data closed loop: u2 from the controller every tau (or held
/// at u2_constant when ctrl is null), u1 = interface_u, d2 = interface_d,
/// both systems integrated jointly by RK4 at step dt. d1_signal supplies
/// the stacked concrete disturbance [v; w].
ClosedLoopResult closed_loop(const SystemModel& m1, const SystemModel& m2,
                             const RsfCertificate& cert, const SymbolicController* ctrl,
                             const Signal& d1_signal, const std::vector<double>& x1_0,
                             const std::vector<double>& x2_0, double horizon, double dt,
                             double u2_constant = 0.0);

void save_controller(const std::filesystem::path& path, const SymbolicController& ctrl);
SymbolicController load_controller(const std::filesystem::path& path);

}  // namespace rsfkit
