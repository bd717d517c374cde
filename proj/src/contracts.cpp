#include "rsfkit/contracts.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "rsfkit/io.hpp"
#include "rsfkit/pipeline.hpp"

namespace rsfkit {

bool Interval::bounded() const { return std::isfinite(lo) && std::isfinite(hi); }

Contract compose_contracts(const std::vector<Contract>& contracts, const ChannelSources& sources) {
    if (contracts.empty()) throw CompositionError("compose_contracts: no contracts");
    if (sources.size() != contracts.size())
        throw CompositionError("compose_contracts: source map size mismatch");
    for (std::size_t i = 0; i < contracts.size(); ++i) {
        const Contract& c = contracts[i];
        if (sources[i].size() != c.neighbor_assumptions.size())
            throw CompositionError("compose_contracts: channel count mismatch for " + c.name);
        for (std::size_t ch = 0; ch < sources[i].size(); ++ch) {
            const Contract& src = contracts.at(sources[i][ch]);
            if (!c.neighbor_assumptions[ch].contains(src.guarantee))
                throw CompositionError("undischarged internal assumption: " + c.name + " channel " +
                                       std::to_string(ch) + " assumes [" +
                                       std::to_string(c.neighbor_assumptions[ch].lo) + ", " +
                                       std::to_string(c.neighbor_assumptions[ch].hi) + "] but " +
                                       src.name + " only guarantees [" +
                                       std::to_string(src.guarantee.lo) + ", " +
                                       std::to_string(src.guarantee.hi) + "]");
        }
    }
    Contract out;
    out.name = "composed";
    out.d_max = 0.0;
    out.guarantee = contracts.front().guarantee;
    for (const Contract& c : contracts) {
        out.d_max = std::max(out.d_max, c.d_max);
        out.guarantee.lo = std::min(out.guarantee.lo, c.guarantee.lo);
        out.guarantee.hi = std::max(out.guarantee.hi, c.guarantee.hi);
    }
    return out;
}

bool check_refinement(const Contract& c_i, const Contract& c_j) {
    if (c_i.neighbor_assumptions.size() != c_j.neighbor_assumptions.size())
        throw CompositionError("check_refinement: incomparable channel structure");
    if (c_j.d_max > c_i.d_max + 1e-12) return false;
    for (std::size_t ch = 0; ch < c_i.neighbor_assumptions.size(); ++ch)
        if (!c_i.neighbor_assumptions[ch].contains(c_j.neighbor_assumptions[ch])) return false;
    return c_j.guarantee.contains(c_i.guarantee);
}

std::vector<Interval> worst_case_internal(const std::vector<Contract>& neighbors,
                                          const Matrix& gains) {
    if (gains.cols() != neighbors.size())
        throw CompositionError("worst_case_internal: gain columns != neighbor count");
    std::vector<Interval> out(gains.rows());
    for (std::size_t c = 0; c < gains.rows(); ++c) {
        double lo = 0.0, hi = 0.0;
        for (std::size_t j = 0; j < neighbors.size(); ++j) {
            const double g = gains(c, j);
            if (g == 0.0) continue;
            const Interval& band = neighbors[j].guarantee;
            if (!band.bounded())
                throw CompositionError("worst_case_internal: neighbor " + neighbors[j].name +
                                       " has an unbounded guarantee on a needed channel");
            const double a = g * band.lo, b = g * band.hi;
            lo += std::min(a, b);
            hi += std::max(a, b);
        }
        out[c] = {lo, hi};
    }
    return out;
}

namespace {

double sup_d_norm(double v_mag, const std::vector<Interval>& boxes) {
    double s = v_mag * v_mag;
    for (const Interval& b : boxes) {
        const double m = std::max(std::fabs(b.lo), std::fabs(b.hi));
        s += m * m;
    }
    return std::sqrt(s);
}

ChannelSources default_sources(const ScenarioConfig& cfg) {
    // NETS convention: channels of area i are the other areas in ascending order.
    ChannelSources src(cfg.areas.size());
    for (std::size_t i = 0; i < cfg.areas.size(); ++i)
        for (std::size_t j = 0; j < cfg.areas.size(); ++j)
            if (j != i && src[i].size() < cfg.areas[i].contract.neighbor_assumptions.size())
                src[i].push_back(j);
    return src;
}

/// Conversion from the Hz-band contract assumption on channel c to the
/// raw internal-output units of the feeding area: the feeder's delta-f is
/// C_s x and its internal output is C_int,s x, so divide by the output
/// gain at the shared support.
double output_gain(const SystemModel& feeder) {
    const Matrix& ci = feeder.internal_output_map();
    std::size_t kmax = 0;
    for (std::size_t k = 1; k < ci.cols(); ++k)
        if (std::fabs(ci(0, k)) > std::fabs(ci(0, kmax))) kmax = k;
    const double denom = ci(0, kmax);
    if (denom == 0.0 || feeder.C(0, kmax) == 0.0) return 1.0;
    return feeder.C(0, kmax) / denom;
}

void area_epsilon(const ScenarioConfig& cfg, const ChannelSources& sources, std::size_t idx,
                  AreaResult& res) {
    const ScenarioArea& a = cfg.areas[idx];
    std::vector<Interval> w_raw;
    for (std::size_t ch = 0; ch < a.contract.neighbor_assumptions.size(); ++ch) {
        const Interval& hz = a.contract.neighbor_assumptions[ch];
        const double g = output_gain(cfg.areas.at(sources[idx].at(ch)).concrete);
        w_raw.push_back({hz.lo / g, hz.hi / g});
    }
    EpsilonQuery q;
    q.d_max = sup_d_norm(std::max(std::fabs(a.v_step), a.contract.d_max), w_raw);
    double u2max = std::fabs(a.u2_constant);
    if (a.controller)
        for (double u : a.controller->grid.input_values) u2max = std::max(u2max, std::fabs(u));
    q.u2_max = a.u2_enabled ? u2max : 0.0;
    res.epsilon = epsilon_bound(a.cert, a.concrete, a.abstract_model, q);
}

void run_isolated(const ScenarioConfig& cfg, const ChannelSources& sources, ScenarioReport& rep) {
    for (std::size_t ai = 0; ai < cfg.areas.size(); ++ai) {
        const ScenarioArea& a = cfg.areas[ai];
        AreaResult res;
        res.name = a.name;
        const std::size_t nd = a.concrete.q() + a.concrete.r();
        std::vector<double> dval(nd, 0.0);
        for (std::size_t j = 0; j < a.concrete.q(); ++j) dval[j] = a.v_step;
        const Signal d1 = constant_signal(dval);  // coupling zeroed: w = 0
        const SymbolicController* ctrl = (a.u2_enabled && a.controller) ? &*a.controller : nullptr;
        const double u2c = a.u2_enabled ? a.u2_constant : 0.0;
        ClosedLoopResult cl =
            closed_loop(a.concrete, a.abstract_model, a.cert, ctrl, d1,
                        std::vector<double>(a.concrete.n(), 0.0),
                        std::vector<double>(a.abstract_model.n(), 0.0), cfg.horizon, cfg.dt, u2c);
        res.concrete = std::move(cl.concrete);
        res.abstract_trace = std::move(cl.abstract_trace);
        res.max_mismatch = cl.report.max_output_mismatch;
        res.max_V = cl.report.max_V;
        FreqSpec sp;
        sp.v = a.spec;
        sp.name = a.name;
        MonitorContext mc;
        mc.signal_is_deviation = true;
        res.verdict = monitor(res.concrete, sp, mc);
        area_epsilon(cfg, sources, ai, res);
        rep.areas.push_back(std::move(res));
    }
}

void run_compositional(const ScenarioConfig& cfg, const ChannelSources& sources, ScenarioReport& rep) {
    const std::size_t na = cfg.areas.size();
    std::vector<std::size_t> off1(na + 1, 0), off2(na + 1, 0), offw(na + 1, 0), offyi(na + 1, 0);
    for (std::size_t i = 0; i < na; ++i) {
        off1[i + 1] = off1[i] + cfg.areas[i].concrete.n();
        off2[i + 1] = off2[i] + cfg.areas[i].abstract_model.n();
        offw[i + 1] = offw[i] + cfg.areas[i].concrete.r();
        offyi[i + 1] = offyi[i] + cfg.areas[i].concrete.m_int();
    }
    if (cfg.coupling.rows() != offw[na] || cfg.coupling.cols() != offyi[na])
        throw CompositionError("scenario: coupling dimensions do not match the areas");

    std::vector<double> X1(off1[na], 0.0), X2(off2[na], 0.0);
    std::vector<double> u2(na, 0.0);
    const std::size_t nsteps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));

    std::vector<AreaResult> results(na);
    for (std::size_t i = 0; i < na; ++i) {
        results[i].name = cfg.areas[i].name;
        results[i].concrete.dt = cfg.dt;
        results[i].abstract_trace.dt = cfg.dt;
    }

    auto derivs = [&](const std::vector<double>& x1s, const std::vector<double>& x2s,
                      std::vector<double>& dx1, std::vector<double>& dx2, bool record, double t) {
        dx1.assign(off1[na], 0.0);
        dx2.assign(off2[na], 0.0);
        // stacked internal outputs and coupling
        std::vector<double> yint(offyi[na], 0.0);
        for (std::size_t i = 0; i < na; ++i) {
            const SystemModel& m = cfg.areas[i].concrete;
            const std::vector<double> xi(x1s.begin() + off1[i], x1s.begin() + off1[i + 1]);
            const std::vector<double> yi = matvec(m.internal_output_map(), xi);
            std::copy(yi.begin(), yi.end(), yint.begin() + offyi[i]);
        }
        const std::vector<double> wall = matvec(cfg.coupling, yint);
        for (std::size_t i = 0; i < na; ++i) {
            const ScenarioArea& a = cfg.areas[i];
            const std::vector<double> x1i(x1s.begin() + off1[i], x1s.begin() + off1[i + 1]);
            const std::vector<double> x2i(x2s.begin() + off2[i], x2s.begin() + off2[i + 1]);
            std::vector<double> v(a.concrete.q(), a.v_step);
            const std::vector<double> w(wall.begin() + offw[i], wall.begin() + offw[i + 1]);
            std::vector<double> d1(v);
            d1.insert(d1.end(), w.begin(), w.end());
            const std::vector<double> u2i{u2[i]};
            const std::vector<double> u1 = interface_u(a.cert, a.concrete, x1i, x2i, u2i);
            const std::vector<double> d2 = interface_d(a.cert, a.concrete, x1i, x2i, d1);
            const std::vector<double> g1 = eval_dynamics(a.concrete, x1i, u1, v, w);
            const std::vector<double> v2(d2.begin(), d2.begin() + a.abstract_model.q());
            const std::vector<double> w2(d2.begin() + a.abstract_model.q(), d2.end());
            const std::vector<double> g2 = eval_dynamics(a.abstract_model, x2i, u2i, v2, w2);
            std::copy(g1.begin(), g1.end(), dx1.begin() + off1[i]);
            std::copy(g2.begin(), g2.end(), dx2.begin() + off2[i]);
            if (record) {
                AreaResult& res = results[i];
                res.concrete.t.push_back(t);
                res.concrete.x.push_back(x1i);
                res.concrete.y.push_back(matvec(a.concrete.C, x1i));
                res.concrete.u.push_back(u1);
                res.concrete.v.push_back(v);
                res.concrete.w.push_back(w);
                res.abstract_trace.t.push_back(t);
                res.abstract_trace.x.push_back(x2i);
                res.abstract_trace.y.push_back(matvec(a.abstract_model.C, x2i));
                res.abstract_trace.u.push_back(u2i);
                res.abstract_trace.v.push_back(v2);
                res.abstract_trace.w.push_back(w2);
                double mm = 0.0;
                const auto& y1 = res.concrete.y.back();
                const auto& y2 = res.abstract_trace.y.back();
                for (std::size_t kk = 0; kk < y1.size(); ++kk) mm += (y1[kk] - y2[kk]) * (y1[kk] - y2[kk]);
                res.max_mismatch = std::max(res.max_mismatch, std::sqrt(mm));
                res.max_V = std::max(res.max_V, eval_V(a.cert, x1i, x2i));
            }
        }
    };

    std::vector<double> k1a, k1b, k2a, k2b, k3a, k3b, k4a, k4b, t1, t2;
    for (std::size_t k = 0; k <= nsteps; ++k) {
        const double t = k * cfg.dt;
        for (std::size_t i = 0; i < na; ++i) {
            const ScenarioArea& a = cfg.areas[i];
            if (!a.u2_enabled) {
                u2[i] = 0.0;
            } else if (a.controller) {
                const std::size_t ksub = std::max<std::size_t>(
                    1, static_cast<std::size_t>(std::llround(a.controller->grid.tau / cfg.dt)));
                if (k % ksub == 0) {
                    const std::vector<double> x2i(X2.begin() + off2[i], X2.begin() + off2[i + 1]);
                    const long ci = a.controller->grid.cell_of(x2i);
                    u2[i] = (ci >= 0 && a.controller->winning(static_cast<std::size_t>(ci)))
                                ? a.controller->grid.input_values[a.controller->inputs[ci].front()]
                                : 0.0;
                }
            } else {
                u2[i] = a.u2_constant;
            }
        }
        derivs(X1, X2, k1a, k1b, /*record=*/true, t);
        if (k == nsteps) break;
        t1.resize(X1.size());
        t2.resize(X2.size());
        for (std::size_t i = 0; i < X1.size(); ++i) t1[i] = X1[i] + 0.5 * cfg.dt * k1a[i];
        for (std::size_t i = 0; i < X2.size(); ++i) t2[i] = X2[i] + 0.5 * cfg.dt * k1b[i];
        derivs(t1, t2, k2a, k2b, false, t);
        for (std::size_t i = 0; i < X1.size(); ++i) t1[i] = X1[i] + 0.5 * cfg.dt * k2a[i];
        for (std::size_t i = 0; i < X2.size(); ++i) t2[i] = X2[i] + 0.5 * cfg.dt * k2b[i];
        derivs(t1, t2, k3a, k3b, false, t);
        for (std::size_t i = 0; i < X1.size(); ++i) t1[i] = X1[i] + cfg.dt * k3a[i];
        for (std::size_t i = 0; i < X2.size(); ++i) t2[i] = X2[i] + cfg.dt * k3b[i];
        derivs(t1, t2, k4a, k4b, false, t);
        for (std::size_t i = 0; i < X1.size(); ++i)
            X1[i] += cfg.dt / 6.0 * (k1a[i] + 2 * k2a[i] + 2 * k3a[i] + k4a[i]);
        for (std::size_t i = 0; i < X2.size(); ++i)
            X2[i] += cfg.dt / 6.0 * (k1b[i] + 2 * k2b[i] + 2 * k3b[i] + k4b[i]);
        for (double xv : X1)
            if (!std::isfinite(xv)) throw SimulationError("scenario: diverged", t);
    }

    MonitorContext mc;
    mc.signal_is_deviation = true;
    for (std::size_t i = 0; i < na; ++i) {
        AreaResult& res = results[i];
        FreqSpec sp;
        sp.v = cfg.areas[i].spec;
        sp.name = cfg.areas[i].name;
        res.verdict = monitor(res.concrete, sp, mc);
        area_epsilon(cfg, sources, i, res);
        rep.areas.push_back(std::move(res));
    }
}

}  // namespace

ScenarioReport run_scenario(const ScenarioConfig& cfg) {
    if (cfg.areas.empty()) throw std::runtime_error("run_scenario: no areas");
    ScenarioReport rep;
    const ChannelSources sources = default_sources(cfg);
    if (cfg.mode == ScenarioConfig::Mode::isolated)
        run_isolated(cfg, sources, rep);
    else
        run_compositional(cfg, sources, rep);

    rep.all_satisfied = true;
    for (const AreaResult& r : rep.areas)
        if (!r.verdict.satisfied) rep.all_satisfied = false;

    // global verdict: every area stays inside the global band
    {
        MonitorContext mc;
        mc.signal_is_deviation = true;
        Verdict g;
        for (const AreaResult& r : rep.areas) {
            ReachAvoidSpec band;
            band.t_lo = cfg.global_band.lo;
            band.t_hi = cfg.global_band.hi;
            band.b_lo = cfg.global_band.lo;
            band.b_hi = cfg.global_band.hi;
            FreqSpec sp;
            sp.v = band;
            sp.name = r.name + " global band";
            const Verdict v = monitor(r.concrete, sp, mc);
            if (!v.satisfied && (g.satisfied || *v.first_violation < *g.first_violation)) {
                g.satisfied = false;
                g.first_violation = v.first_violation;
                g.witness = sp.name + ": " + v.witness;
            }
        }
        rep.global_verdict = g;
    }

    // contract composition and refinement against the global contract
    try {
        std::vector<Contract> cs;
        for (const ScenarioArea& a : cfg.areas) cs.push_back(a.contract);
        rep.composed = compose_contracts(cs, sources);
        rep.composition_ok = true;
        Contract global;
        global.name = "global";
        global.d_max = rep.composed.d_max;
        global.guarantee = cfg.global_band;
        rep.refines_global = check_refinement(rep.composed, global);
    } catch (const CompositionError& e) {
        rep.composition_ok = false;
        rep.composition_detail = e.what();
    }
    return rep;
}

namespace {

double json_num_or_inf(const nlohmann::json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw ParseError("expected number or inf");
    }
    return j.get<double>();
}

Interval json_interval(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) throw ParseError("interval must be [lo, hi]");
    return {json_num_or_inf(j[0]), json_num_or_inf(j[1])};
}

}  // namespace

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    const nlohmann::json j = load_json(path);
    const auto dir = path.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp = p;
        return fp.is_relative() ? dir / fp : fp;
    };
    ScenarioConfig cfg;
    const std::string mode = j.value("mode", "isolated");
    if (mode == "isolated")
        cfg.mode = ScenarioConfig::Mode::isolated;
    else if (mode == "compositional")
        cfg.mode = ScenarioConfig::Mode::compositional;
    else
        throw ParseError("scenario: mode must be isolated|compositional");
    cfg.horizon = j.value("horizon", 6.0);
    cfg.dt = j.value("dt", 0.005);
    if (j.contains("global_band")) cfg.global_band = json_interval(j.at("global_band"));
    if (j.contains("coupling")) cfg.coupling = matrix_from_json(j, "coupling");

    const bool controllers_on = j.value("controllers_on", true);
    for (const auto& ja : j.at("areas")) {
        ScenarioArea a;
        a.name = ja.value("name", "area");
        a.concrete = load_model(resolve(ja.at("model").get<std::string>()));
        if (ja.contains("construct")) {
            const auto& jc = ja.at("construct");
            AbstractionRecipe recipe;
            recipe.order = jc.value("order", 3);
            recipe.lambda = jc.value("lambda", 1.7);
            for (const auto& pv : jc.at("poles")) recipe.pole_targets.push_back(pv.get<double>());
            recipe.gramian_disturbances = jc.value("gramian_disturbances", true);
            recipe.align_output = jc.value("align_output", true);
            recipe.refit_inputs = jc.value("refit_inputs", true);
            CertifiedAbstraction ca = certify_reduction(a.concrete, recipe);
            a.abstract_model = std::move(ca.abstract_model);
            a.cert = std::move(ca.cert);
        } else {
            a.abstract_model = load_model(resolve(ja.at("abstract").get<std::string>()));
            a.cert = load_certificate(resolve(ja.at("cert").get<std::string>()));
        }
        if (ja.contains("controller"))
            a.controller = load_controller(resolve(ja.at("controller").get<std::string>()));
        a.u2_constant = ja.value("u2", 0.0);
        a.u2_enabled = controllers_on && ja.value("u2_enabled", true);
        a.v_step = ja.value("v", 0.0);
        if (ja.contains("spec")) {
            const FreqSpec sp = spec_from_json(ja.at("spec"));
            if (const auto* ra = std::get_if<ReachAvoidSpec>(&sp.v))
                a.spec = *ra;
            else
                throw ParseError("scenario: area spec must be reach_avoid");
        }
        a.contract.name = a.name;
        if (ja.contains("assumptions")) {
            const auto& jc = ja.at("assumptions");
            a.contract.d_max = jc.value("d_max", 0.0);
            if (jc.contains("neighbors"))
                for (const auto& b : jc.at("neighbors"))
                    a.contract.neighbor_assumptions.push_back(json_interval(b));
        }
        if (ja.contains("guarantee")) {
            a.contract.guarantee = json_interval(ja.at("guarantee"));
        } else {
            // a one-sided monitored band maps to the symmetric contract
            // band at the avoid boundary magnitude
            a.contract.guarantee = {a.spec.b_lo, std::isfinite(a.spec.b_hi) ? a.spec.b_hi
                                                                            : -a.spec.b_lo};
        }
        cfg.areas.push_back(std::move(a));
    }
    if (cfg.mode == ScenarioConfig::Mode::compositional && cfg.coupling.empty())
        throw ParseError("scenario: compositional mode needs a coupling matrix");
    return cfg;
}

}  // namespace rsfkit
