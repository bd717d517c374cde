#include "rsfkit/symbolic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace rsfkit {

std::vector<std::size_t> GridAbstraction::cells_per_dim() const {
    std::vector<std::size_t> nc(dim());
    for (std::size_t i = 0; i < dim(); ++i)
        nc[i] = static_cast<std::size_t>(std::llround((upper[i] - lower[i]) / eta[i]));
    return nc;
}

std::size_t GridAbstraction::cell_count() const {
    std::size_t n = 1;
    for (std::size_t c : cells_per_dim()) n *= c;
    return n;
}

void GridAbstraction::validate(const SystemModel& m2) const {
    if (lower.size() != m2.n() || upper.size() != m2.n() || eta.size() != m2.n())
        throw DimensionError("grid dimension does not match the model");
    for (std::size_t i = 0; i < dim(); ++i) {
        if (eta[i] <= 0) throw std::runtime_error("grid: eta must be positive");
        if (lower[i] >= upper[i]) throw std::runtime_error("grid: lower must be below upper");
    }
    if (input_values.empty()) throw std::runtime_error("grid: empty input list");
    if (tau <= 0) throw std::runtime_error("grid: tau must be positive");
    const std::size_t nd = m2.q() + m2.r();
    if (dist_lo.size() != nd || dist_hi.size() != nd)
        throw DimensionError("grid: disturbance box must cover all q+r channels");
    for (std::size_t i = 0; i < nd; ++i)
        if (dist_lo[i] > dist_hi[i]) throw std::runtime_error("grid: empty disturbance box");
}

std::vector<double> GridAbstraction::cell_center(std::size_t idx) const {
    const auto nc = cells_per_dim();
    std::vector<double> x(dim());
    for (std::size_t i = dim(); i-- > 0;) {
        x[i] = lower[i] + (static_cast<double>(idx % nc[i]) + 0.5) * eta[i];
        idx /= nc[i];
    }
    return x;
}

long GridAbstraction::cell_of(const std::vector<double>& x) const {
    const auto nc = cells_per_dim();
    long idx = 0;
    for (std::size_t i = 0; i < dim(); ++i) {
        const double f = (x[i] - lower[i]) / eta[i];
        const long c = static_cast<long>(std::floor(f));
        if (c < 0 || c >= static_cast<long>(nc[i])) return -1;
        idx = idx * static_cast<long>(nc[i]) + c;
    }
    return idx;
}

TransitionRelation::TransitionRelation(GridAbstraction grid)
    : grid_(std::move(grid)), ncells_(grid_.cell_count()) {
    const std::size_t pairs = ncells_ * grid_.input_values.size();
    box_.assign(pairs * 2 * grid_.dim(), 0);
    valid_.assign(pairs, 0);
}

void TransitionRelation::successor_box(std::size_t cell, std::size_t input, std::vector<int>& lo,
                                       std::vector<int>& hi) const {
    const std::size_t d = grid_.dim();
    lo.resize(d);
    hi.resize(d);
    const std::size_t base = pair_index(cell, input) * 2 * d;
    for (std::size_t i = 0; i < d; ++i) {
        lo[i] = box_[base + i];
        hi[i] = box_[base + d + i];
    }
}

void TransitionRelation::set(std::size_t cell, std::size_t input, const std::vector<int>& lo,
                             const std::vector<int>& hi, bool ok) {
    const std::size_t d = grid_.dim();
    const std::size_t base = pair_index(cell, input) * 2 * d;
    for (std::size_t i = 0; i < d; ++i) {
        box_[base + i] = static_cast<int16_t>(lo[i]);
        box_[base + d + i] = static_cast<int16_t>(hi[i]);
    }
    valid_[pair_index(cell, input)] = ok ? 1 : 0;
}

namespace {

std::vector<double> grow_radius(const Matrix& Lam, const std::vector<double>& rho,
                                std::vector<double> r, double tau) {
    const int steps = 16;
    const double h = tau / steps;
    const std::size_t d = r.size();
    auto f = [&](const std::vector<double>& rr) {
        std::vector<double> out = matvec(Lam, rr);
        for (std::size_t i = 0; i < d; ++i) out[i] += rho[i];
        return out;
    };
    for (int s = 0; s < steps; ++s) {
        const auto k1 = f(r);
        std::vector<double> t(d);
        for (std::size_t i = 0; i < d; ++i) t[i] = r[i] + 0.5 * h * k1[i];
        const auto k2 = f(t);
        for (std::size_t i = 0; i < d; ++i) t[i] = r[i] + 0.5 * h * k2[i];
        const auto k3 = f(t);
        for (std::size_t i = 0; i < d; ++i) t[i] = r[i] + h * k3[i];
        const auto k4 = f(t);
        for (std::size_t i = 0; i < d; ++i) r[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
    return r;
}

}  // namespace

TransitionRelation build_abstraction(const SystemModel& m2, const GridAbstraction& grid) {
    grid.validate(m2);
    const std::size_t d = grid.dim(), nc = grid.cell_count(), nu = grid.input_values.size();
    const auto dims = grid.cells_per_dim();

    std::vector<double> dmid(grid.dist_lo.size()), dhat(grid.dist_lo.size());
    for (std::size_t i = 0; i < dmid.size(); ++i) {
        dmid[i] = 0.5 * (grid.dist_lo[i] + grid.dist_hi[i]);
        dhat[i] = 0.5 * (grid.dist_hi[i] - grid.dist_lo[i]);
    }
    const Matrix D2 = m2.D();

    auto lambda_matrix = [&](double delta) {
        Matrix L(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                L(i, j) = (i == j) ? m2.A(i, i) : std::fabs(m2.A(i, j));
                if (delta != 0.0 && !m2.is_linear())
                    L(i, j) += delta * std::fabs(m2.E(i, 0)) * std::fabs(m2.F(0, j));
            }
        return L;
    };
    std::vector<double> rho(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < D2.cols(); ++j) rho[i] += std::fabs(D2(i, j)) * dhat[j];
    std::vector<double> r_half(d);
    for (std::size_t i = 0; i < d; ++i) r_half[i] = 0.5 * grid.eta[i];

    const double delta_bar = m2.is_linear() ? 0.0 : std::max(std::fabs(m2.phi.a), std::fabs(m2.phi.b));
    const std::vector<double> r_lin = grow_radius(lambda_matrix(0.0), rho, r_half, grid.tau);
    const std::vector<double> r_nl =
        delta_bar > 0 ? grow_radius(lambda_matrix(delta_bar), rho, r_half, grid.tau) : r_lin;

    // phi-argument half range over a cell, for the per-cell slope choice
    double f_half = 0.0;
    if (!m2.is_linear())
        for (std::size_t i = 0; i < d; ++i) f_half += std::fabs(m2.F(0, i)) * r_half[i];
    const bool saturation = m2.phi.kind == SlopeNonlinearity::Kind::saturation;

    TransitionRelation rel(grid);
    const int substeps = std::max(2, static_cast<int>(std::ceil(grid.tau / 0.025)));
    const double h = grid.tau / substeps;

    std::vector<double> u(1), w0;  // dynamics called with stacked d as (v,w) split
    std::vector<double> v_part(m2.q()), w_part(m2.r());
    for (std::size_t j = 0; j < m2.q(); ++j) v_part[j] = dmid[j];
    for (std::size_t j = 0; j < m2.r(); ++j) w_part[j] = dmid[m2.q() + j];

    std::vector<int> lo(d), hi(d);
    std::size_t degenerate = 0;
    for (std::size_t ci = 0; ci < nc; ++ci) {
        const std::vector<double> center = grid.cell_center(ci);
        const std::vector<double>* radius = &r_nl;
        if (saturation) {
            const double fc = dot(m2.F.to_vector(), center);
            // both kinks outside the cell's argument range: secant slope is 0
            if (fc + f_half <= m2.phi.sat_min || fc - f_half >= m2.phi.sat_max) radius = &r_lin;
        } else if (m2.is_linear()) {
            radius = &r_lin;
        }
        for (std::size_t ui = 0; ui < nu; ++ui) {
            u[0] = grid.input_values[ui];
            std::vector<double> x = center;
            for (int s = 0; s < substeps; ++s) {
                const auto k1 = eval_dynamics(m2, x, u, v_part, w_part);
                std::vector<double> t(d);
                for (std::size_t i = 0; i < d; ++i) t[i] = x[i] + 0.5 * h * k1[i];
                const auto k2 = eval_dynamics(m2, t, u, v_part, w_part);
                for (std::size_t i = 0; i < d; ++i) t[i] = x[i] + 0.5 * h * k2[i];
                const auto k3 = eval_dynamics(m2, t, u, v_part, w_part);
                for (std::size_t i = 0; i < d; ++i) t[i] = x[i] + h * k3[i];
                const auto k4 = eval_dynamics(m2, t, u, v_part, w_part);
                for (std::size_t i = 0; i < d; ++i)
                    x[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
            }
            bool ok = true;
            for (std::size_t i = 0; i < d; ++i) {
                const double blo = x[i] - (*radius)[i], bhi = x[i] + (*radius)[i];
                if (blo < grid.lower[i] || bhi > grid.upper[i]) ok = false;
                long cl = static_cast<long>(std::floor((blo - grid.lower[i]) / grid.eta[i]));
                long ch = static_cast<long>(std::floor((bhi - grid.lower[i]) / grid.eta[i]));
                cl = std::clamp(cl, 0L, static_cast<long>(dims[i]) - 1);
                ch = std::clamp(ch, cl, static_cast<long>(dims[i]) - 1);
                lo[i] = static_cast<int>(cl);
                hi[i] = static_cast<int>(ch);
            }
            rel.set(ci, ui, lo, hi, ok);
            if (!ok) ++degenerate;
        }
    }
    if (degenerate == nc * nu)
        throw std::runtime_error("build_abstraction: every (cell,input) leaves the domain; "
                                 "tau or the disturbance box is too large for this grid");
    return rel;
}

namespace {

/// Inclusion-exclusion box-sum over an integral image of the set S.
class BoxCounter {
public:
    BoxCounter(const std::vector<std::size_t>& dims) : dims_(dims) {
        std::size_t n = 1;
        for (std::size_t d : dims_) n *= (d + 1);
        ps_.assign(n, 0);
        stride_.resize(dims_.size());
        std::size_t s = 1;
        for (std::size_t i = dims_.size(); i-- > 0;) {
            stride_[i] = s;
            s *= (dims_[i] + 1);
        }
    }

    void rebuild(const std::vector<uint8_t>& S) {
        const std::size_t d = dims_.size();
        std::fill(ps_.begin(), ps_.end(), 0);
        // write S into the shifted lattice
        std::vector<std::size_t> idx(d, 0);
        std::size_t flat = 0;
        const std::size_t n = S.size();
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t off = 0;
            for (std::size_t i = 0; i < d; ++i) off += (idx[i] + 1) * stride_[i];
            ps_[off] = S[k];
            for (std::size_t i = d; i-- > 0;) {
                if (++idx[i] < dims_[i]) break;
                idx[i] = 0;
            }
            (void)flat;
        }
        // prefix sums along each axis
        for (std::size_t axis = 0; axis < d; ++axis) {
            const std::size_t st = stride_[axis];
            const std::size_t total = ps_.size();
            for (std::size_t base = 0; base < total; ++base) {
                const std::size_t coord = (base / st) % (dims_[axis] + 1);
                if (coord > 0) ps_[base] += ps_[base - st];
            }
        }
    }

    /// Number of set cells inside the inclusive box [lo, hi].
    int64_t count(const std::vector<int>& lo, const std::vector<int>& hi) const {
        const std::size_t d = dims_.size();
        int64_t total = 0;
        for (std::size_t corner = 0; corner < (1u << d); ++corner) {
            std::size_t off = 0;
            int sign = 1;
            for (std::size_t i = 0; i < d; ++i) {
                if (corner & (1u << i)) {
                    off += static_cast<std::size_t>(hi[i] + 1) * stride_[i];
                } else {
                    off += static_cast<std::size_t>(lo[i]) * stride_[i];
                    sign = -sign;
                }
            }
            total += sign * ps_[off];
        }
        return total;
    }

private:
    std::vector<std::size_t> dims_;
    std::vector<std::size_t> stride_;
    std::vector<int64_t> ps_;
};

int64_t box_volume(const std::vector<int>& lo, const std::vector<int>& hi) {
    int64_t v = 1;
    for (std::size_t i = 0; i < lo.size(); ++i) v *= (hi[i] - lo[i] + 1);
    return v;
}

}  // namespace

SynthesisResult synthesize_recurrence(const TransitionRelation& rel,
                                      const std::vector<uint8_t>& target_cells,
                                      const std::vector<uint8_t>& avoid_cells) {
    const GridAbstraction& grid = rel.grid();
    const std::size_t nc = rel.cells(), nu = rel.inputs();
    if (target_cells.size() != nc || avoid_cells.size() != nc)
        throw DimensionError("synthesize_recurrence: set size mismatch");
    const auto dims = grid.cells_per_dim();

    // input order: |u| ascending, negative before positive on ties
    std::vector<uint16_t> uorder(nu);
    std::iota(uorder.begin(), uorder.end(), 0);
    std::sort(uorder.begin(), uorder.end(), [&](uint16_t a, uint16_t b) {
        const double ua = grid.input_values[a], ub = grid.input_values[b];
        if (std::fabs(ua) != std::fabs(ub)) return std::fabs(ua) < std::fabs(ub);
        return ua < ub;
    });

    BoxCounter counter(dims);
    std::vector<int> lo, hi;
    auto pre = [&](const std::vector<uint8_t>& S, std::vector<uint8_t>& out) {
        counter.rebuild(S);
        std::fill(out.begin(), out.end(), 0);
        for (std::size_t ci = 0; ci < nc; ++ci) {
            for (std::size_t ui = 0; ui < nu && !out[ci]; ++ui) {
                if (!rel.valid(ci, ui)) continue;
                rel.successor_box(ci, ui, lo, hi);
                if (counter.count(lo, hi) == box_volume(lo, hi)) out[ci] = 1;
            }
        }
    };

    SynthesisResult res;
    std::vector<uint8_t> Z(nc, 1), Y(nc, 0), goal(nc, 0), preZ(nc, 0), next(nc, 0);
    while (true) {
        ++res.outer_iterations;
        pre(Z, preZ);
        for (std::size_t i = 0; i < nc; ++i) goal[i] = target_cells[i] && preZ[i] && !avoid_cells[i];
        // inner mu: Y = (goal | Pre(Y)) & ~avoid
        std::fill(Y.begin(), Y.end(), 0);
        while (true) {
            ++res.inner_iterations;
            pre(Y, next);
            bool changed = false;
            for (std::size_t i = 0; i < nc; ++i) {
                const uint8_t v = (goal[i] || next[i]) && !avoid_cells[i];
                if (v != Y[i]) {
                    Y[i] = v;
                    changed = true;
                }
            }
            if (!changed) break;
        }
        if (Y == Z) break;
        Z = Y;
        if (std::none_of(Z.begin(), Z.end(), [](uint8_t v) { return v != 0; })) break;
    }

    // Controller extraction on the converged fixed point.
    SymbolicController ctrl;
    ctrl.grid = grid;
    ctrl.mu_rank.assign(nc, -1);
    ctrl.inputs.assign(nc, {});
    const bool nonempty = std::any_of(Z.begin(), Z.end(), [](uint8_t v) { return v != 0; });
    if (nonempty) {
        pre(Z, preZ);
        for (std::size_t i = 0; i < nc; ++i) goal[i] = target_cells[i] && preZ[i] && !avoid_cells[i];
        // goal cells: safety inputs keeping all successors inside Z
        counter.rebuild(Z);
        for (std::size_t ci = 0; ci < nc; ++ci) {
            if (!goal[ci]) continue;
            ctrl.mu_rank[ci] = 0;
            for (uint16_t ui : uorder) {
                if (!rel.valid(ci, ui)) continue;
                rel.successor_box(ci, ui, lo, hi);
                if (counter.count(lo, hi) == box_volume(lo, hi)) ctrl.inputs[ci].push_back(ui);
            }
        }
        // reach layers
        std::vector<uint8_t> Yk = goal;
        int rank = 0;
        while (true) {
            ++rank;
            counter.rebuild(Yk);
            bool grew = false;
            std::vector<std::pair<std::size_t, std::vector<uint16_t>>> added;
            for (std::size_t ci = 0; ci < nc; ++ci) {
                if (Yk[ci] || avoid_cells[ci] || !Z[ci]) continue;
                std::vector<uint16_t> ok_inputs;
                for (uint16_t ui : uorder) {
                    if (!rel.valid(ci, ui)) continue;
                    rel.successor_box(ci, ui, lo, hi);
                    if (counter.count(lo, hi) == box_volume(lo, hi)) ok_inputs.push_back(ui);
                }
                if (!ok_inputs.empty()) {
                    added.emplace_back(ci, std::move(ok_inputs));
                    grew = true;
                }
            }
            for (auto& [ci, ins] : added) {
                Yk[ci] = 1;
                ctrl.mu_rank[ci] = rank;
                ctrl.inputs[ci] = std::move(ins);
            }
            if (!grew) break;
        }
    }
    ctrl.winning_count = static_cast<std::size_t>(
        std::count_if(ctrl.mu_rank.begin(), ctrl.mu_rank.end(), [](int32_t r) { return r >= 0; }));
    res.success = ctrl.winning_count > 0;
    res.controller = std::move(ctrl);
    return res;
}

double control_lookup(const SymbolicController& ctrl, const std::vector<double>& x2) {
    const long ci = ctrl.grid.cell_of(x2);
    if (ci < 0) throw ControlLookupError("control_lookup: state outside the grid box");
    if (!ctrl.winning(static_cast<std::size_t>(ci)))
        throw ControlLookupError("control_lookup: state is in a losing cell");
    return ctrl.grid.input_values[ctrl.inputs[static_cast<std::size_t>(ci)].front()];
}

BandCells classify_output_band(const SystemModel& m2, const GridAbstraction& grid, double t_lo,
                               double t_hi, double a_lo, double a_hi) {
    if (m2.m() != 1) throw std::runtime_error("classify_output_band: single-output model expected");
    const std::size_t nc = grid.cell_count();
    BandCells out;
    out.target.assign(nc, 0);
    out.avoid.assign(nc, 0);
    double half = 0.0;
    for (std::size_t i = 0; i < grid.dim(); ++i) half += std::fabs(m2.C(0, i)) * 0.5 * grid.eta[i];
    const std::vector<double> c = m2.C.block(0, 0, 1, m2.n()).transpose().to_vector();
    for (std::size_t ci = 0; ci < nc; ++ci) {
        const double yc = dot(c, grid.cell_center(ci));
        out.target[ci] = (yc - half >= t_lo && yc + half <= t_hi) ? 1 : 0;
        out.avoid[ci] = (yc - half < a_lo || yc + half > a_hi) ? 1 : 0;
    }
    return out;
}

ClosedLoopResult closed_loop(const SystemModel& m1, const SystemModel& m2,
                             const RsfCertificate& cert, const SymbolicController* ctrl,
                             const Signal& d1_signal, const std::vector<double>& x1_0,
                             const std::vector<double>& x2_0, double horizon, double dt,
                             double u2_constant) {
    cert.validate(m1, m2);
    const double tau = ctrl ? ctrl->grid.tau : 0.1;
    const std::size_t ksub = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(tau / dt)));
    const std::size_t nsteps = static_cast<std::size_t>(std::llround(horizon / dt));

    ClosedLoopResult out;
    out.concrete.dt = dt;
    out.abstract_trace.dt = dt;
    std::vector<double> x1 = x1_0, x2 = x2_0;
    double u2 = ctrl ? 0.0 : u2_constant;

    auto derivs = [&](const std::vector<double>& xs1, const std::vector<double>& xs2, double t,
                      std::vector<double>& dx1, std::vector<double>& dx2, std::vector<double>& u1,
                      std::vector<double>& d2) {
        const std::vector<double> d1 = d1_signal(t, xs1);
        const std::vector<double> u2v{u2};
        u1 = interface_u(cert, m1, xs1, xs2, u2v);
        d2 = interface_d(cert, m1, xs1, xs2, d1);
        const std::vector<double> v1(d1.begin(), d1.begin() + m1.q());
        const std::vector<double> w1(d1.begin() + m1.q(), d1.end());
        dx1 = eval_dynamics(m1, xs1, u1, v1, w1);
        const std::vector<double> v2(d2.begin(), d2.begin() + m2.q());
        const std::vector<double> w2(d2.begin() + m2.q(), d2.end());
        dx2 = eval_dynamics(m2, xs2, u2v, v2, w2);
    };

    std::vector<double> dx1, dx2, u1v, d2v;
    for (std::size_t k = 0; k <= nsteps; ++k) {
        const double t = k * dt;
        if (ctrl && k % ksub == 0) {
            const long ci = ctrl->grid.cell_of(x2);
            if (ci >= 0 && ctrl->winning(static_cast<std::size_t>(ci))) {
                u2 = ctrl->grid.input_values[ctrl->inputs[static_cast<std::size_t>(ci)].front()];
                ++out.report.controller_active_steps;
            } else {
                out.report.stayed_in_winning_set = false;
                u2 = 0.0;
            }
        }
        derivs(x1, x2, t, dx1, dx2, u1v, d2v);

        out.concrete.t.push_back(t);
        out.concrete.x.push_back(x1);
        out.concrete.y.push_back(matvec(m1.C, x1));
        out.concrete.u.push_back(u1v);
        const std::vector<double> d1 = d1_signal(t, x1);
        out.concrete.v.push_back(std::vector<double>(d1.begin(), d1.begin() + m1.q()));
        out.concrete.w.push_back(std::vector<double>(d1.begin() + m1.q(), d1.end()));
        out.abstract_trace.t.push_back(t);
        out.abstract_trace.x.push_back(x2);
        out.abstract_trace.y.push_back(matvec(m2.C, x2));
        out.abstract_trace.u.push_back({u2});
        out.abstract_trace.v.push_back(std::vector<double>(d2v.begin(), d2v.begin() + m2.q()));
        out.abstract_trace.w.push_back(std::vector<double>(d2v.begin() + m2.q(), d2v.end()));

        if (ctrl) {
            for (std::size_t j = 0; j < d2v.size(); ++j)
                if (d2v[j] < ctrl->grid.dist_lo[j] - 1e-9 || d2v[j] > ctrl->grid.dist_hi[j] + 1e-9)
                    out.report.disturbance_in_box = false;
        }
        double mm = 0.0;
        for (std::size_t i = 0; i < out.concrete.y.back().size(); ++i) {
            const double dd = out.concrete.y.back()[i] - out.abstract_trace.y.back()[i];
            mm += dd * dd;
        }
        out.report.max_output_mismatch = std::max(out.report.max_output_mismatch, std::sqrt(mm));
        out.report.max_V = std::max(out.report.max_V, eval_V(cert, x1, x2));
        const double y1 = out.concrete.y.back().front();
        if (k == 0) {
            out.report.min_y1 = out.report.max_y1 = y1;
        } else {
            out.report.min_y1 = std::min(out.report.min_y1, y1);
            out.report.max_y1 = std::max(out.report.max_y1, y1);
        }
        if (k == nsteps) break;

        // coupled RK4 step
        std::vector<double> a1 = x1, a2 = x2, k1a, k1b, k2a, k2b, k3a, k3b, k4a, k4b;
        derivs(x1, x2, t, k1a, k1b, u1v, d2v);
        for (std::size_t i = 0; i < x1.size(); ++i) a1[i] = x1[i] + 0.5 * dt * k1a[i];
        for (std::size_t i = 0; i < x2.size(); ++i) a2[i] = x2[i] + 0.5 * dt * k1b[i];
        derivs(a1, a2, t + 0.5 * dt, k2a, k2b, u1v, d2v);
        for (std::size_t i = 0; i < x1.size(); ++i) a1[i] = x1[i] + 0.5 * dt * k2a[i];
        for (std::size_t i = 0; i < x2.size(); ++i) a2[i] = x2[i] + 0.5 * dt * k2b[i];
        derivs(a1, a2, t + 0.5 * dt, k3a, k3b, u1v, d2v);
        for (std::size_t i = 0; i < x1.size(); ++i) a1[i] = x1[i] + dt * k3a[i];
        for (std::size_t i = 0; i < x2.size(); ++i) a2[i] = x2[i] + dt * k3b[i];
        derivs(a1, a2, t + dt, k4a, k4b, u1v, d2v);
        for (std::size_t i = 0; i < x1.size(); ++i)
            x1[i] += dt / 6.0 * (k1a[i] + 2 * k2a[i] + 2 * k3a[i] + k4a[i]);
        for (std::size_t i = 0; i < x2.size(); ++i)
            x2[i] += dt / 6.0 * (k1b[i] + 2 * k2b[i] + 2 * k3b[i] + k4b[i]);
        for (double xv : x1)
            if (!std::isfinite(xv)) throw SimulationError("closed_loop: diverged", t);
    }
    return out;
}

void save_controller(const std::filesystem::path& path, const SymbolicController& ctrl) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << std::setprecision(17);
    auto line = [&](const char* key, const std::vector<double>& v) {
        f << "# " << key << ":";
        for (double x : v) f << " " << x;
        f << "\n";
    };
    line("lower", ctrl.grid.lower);
    line("upper", ctrl.grid.upper);
    line("eta", ctrl.grid.eta);
    line("inputs", ctrl.grid.input_values);
    line("tau", {ctrl.grid.tau});
    line("dist_lo", ctrl.grid.dist_lo);
    line("dist_hi", ctrl.grid.dist_hi);
    for (std::size_t ci = 0; ci < ctrl.mu_rank.size(); ++ci) {
        if (ctrl.mu_rank[ci] < 0) continue;
        f << ci << ";" << ctrl.mu_rank[ci] << ";";
        for (std::size_t k = 0; k < ctrl.inputs[ci].size(); ++k)
            f << (k ? " " : "") << ctrl.inputs[ci][k];
        f << "\n";
    }
}

SymbolicController load_controller(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    SymbolicController ctrl;
    std::string line;
    auto parse_vals = [](const std::string& s) {
        std::vector<double> v;
        std::stringstream ss(s);
        double x;
        while (ss >> x) v.push_back(x);
        return v;
    };
    std::vector<std::pair<std::size_t, std::string>> body;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto colon = line.find(':');
            const std::string key = line.substr(2, colon - 2);
            const std::vector<double> vals = parse_vals(line.substr(colon + 1));
            if (key == "lower") ctrl.grid.lower = vals;
            else if (key == "upper") ctrl.grid.upper = vals;
            else if (key == "eta") ctrl.grid.eta = vals;
            else if (key == "inputs") ctrl.grid.input_values = vals;
            else if (key == "tau") ctrl.grid.tau = vals.at(0);
            else if (key == "dist_lo") ctrl.grid.dist_lo = vals;
            else if (key == "dist_hi") ctrl.grid.dist_hi = vals;
            continue;
        }
        body.emplace_back(0, line);
    }
    ctrl.mu_rank.assign(ctrl.grid.cell_count(), -1);
    ctrl.inputs.assign(ctrl.grid.cell_count(), {});
    for (auto& [unused, s] : body) {
        std::stringstream ss(s);
        std::string cell_s, rank_s, rest;
        std::getline(ss, cell_s, ';');
        std::getline(ss, rank_s, ';');
        std::getline(ss, rest);
        const std::size_t ci = std::stoul(cell_s);
        ctrl.mu_rank.at(ci) = std::stoi(rank_s);
        std::stringstream rs(rest);
        unsigned v;
        while (rs >> v) ctrl.inputs.at(ci).push_back(static_cast<uint16_t>(v));
        ++ctrl.winning_count;
    }
    return ctrl;
}

}  // namespace rsfkit
