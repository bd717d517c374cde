#include "rsfkit/specs.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "rsfkit/io.hpp"

namespace rsfkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> freq_signal(const Trace& tr, const MonitorContext& ctx) {
    std::vector<double> f(tr.t.size());
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        const double y = tr.y[k].at(ctx.freq_channel);
        f[k] = ctx.signal_is_deviation ? ctx.f0 + y : y;
    }
    return f;
}

std::vector<double> power_signal(const Trace& tr, const MonitorContext& ctx) {
    if (tr.u.empty() || tr.u.front().size() <= ctx.power_channel)
        throw std::runtime_error("monitor: trace has no power channel u" +
                                 std::to_string(ctx.power_channel + 1));
    std::vector<double> p(tr.t.size());
    for (std::size_t k = 0; k < tr.t.size(); ++k) p[k] = tr.u[k].at(ctx.power_channel);
    return p;
}

void flag(Verdict& v, double t, const std::string& clause) {
    if (v.satisfied || t < *v.first_violation) {
        v.satisfied = false;
        v.first_violation = t;
        v.witness = clause;
    }
}

void mark_pending(Verdict& v, const std::string& what) {
    if (v.satisfied && !v.pending) {
        v.pending = true;
        v.witness = "pending: " + what;
    }
}

/// Indices where the predicate switches from false to true (episodes).
template <class Pred>
std::vector<std::size_t> rising_edges(std::size_t n, Pred pred) {
    std::vector<std::size_t> out;
    bool prev = false;
    for (std::size_t k = 0; k < n; ++k) {
        const bool cur = pred(k);
        if (cur && !prev) out.push_back(k);
        prev = cur;
    }
    return out;
}

/// "eventually within `window` of t[k0], `pred` holds"; strong semantics.
template <class Pred>
void check_deadline(Verdict& v, const Trace& tr, std::size_t k0, double window, Pred pred,
                    const std::string& clause) {
    const double t_end = tr.t[k0] + window;
    for (std::size_t k = k0; k < tr.t.size() && tr.t[k] <= t_end + 1e-12; ++k)
        if (pred(k)) return;
    if (tr.t.back() < t_end - 1e-12)
        mark_pending(v, clause);
    else
        flag(v, t_end, clause);
}

/// Once pred holds it must keep holding for `hold` seconds.
template <class Pred>
void check_hold(Verdict& v, const Trace& tr, double hold, Pred pred, const std::string& clause) {
    const std::size_t n = tr.t.size();
    for (std::size_t k = 0; k < n; ++k) {
        if (!pred(k)) continue;
        // scan the maximal interval starting here
        std::size_t e = k;
        while (e + 1 < n && pred(e + 1)) ++e;
        const double span = tr.t[e] - tr.t[k];
        if (span + 1e-12 < hold) {
            if (e + 1 == n)
                mark_pending(v, clause + " (hold window exceeds trace)");
            else
                flag(v, tr.t[e + 1], clause);
        }
        k = e;  // next interval
    }
}

Verdict monitor_reach_avoid(const Trace& tr, const ReachAvoidSpec& s, const MonitorContext& ctx) {
    Verdict v;
    if (!s.feasible) {
        v.satisfied = false;
        v.first_violation = 0.0;
        v.witness = "infeasible specification (empty shrunk target)";
        return v;
    }
    std::vector<double> df(tr.t.size());
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        const double y = tr.y[k].at(ctx.freq_channel);
        df[k] = ctx.signal_is_deviation ? y : y - ctx.f0;
    }
    bool reached = false;
    for (std::size_t k = 0; k < df.size(); ++k) {
        if (df[k] < s.b_lo || df[k] > s.b_hi) {
            flag(v, tr.t[k], df[k] < s.b_lo ? "avoid: below safe band" : "avoid: above safe band");
            break;
        }
        if (df[k] >= s.t_lo && df[k] <= s.t_hi) reached = true;
    }
    if (v.satisfied && !reached) mark_pending(v, "target not yet reached");
    return v;
}

Verdict monitor_normal(const Trace& tr, const StatutoryNormalSpec& s, const MonitorContext& ctx) {
    Verdict v;
    if (ctx.loss_mw > s.loss_limit_mw) return v;  // antecedent false
    const auto f = freq_signal(tr, ctx);
    for (std::size_t k = 0; k < f.size(); ++k)
        if (f[k] < s.s_lo || f[k] > s.s_hi) {
            flag(v, tr.t[k], "statutory band left under normal loss");
            break;
        }
    return v;
}

Verdict monitor_infrequent(const Trace& tr, const InfrequentSpec& s, const MonitorContext& ctx) {
    Verdict v;
    const auto f = freq_signal(tr, ctx);
    for (std::size_t k = 0; k < f.size(); ++k)
        if (f[k] < s.z) {
            flag(v, tr.t[k], "containment limit crossed");
            break;
        }
    if (ctx.loss_mw < s.loss_limit_mw) return v;  // no timed obligation
    for (std::size_t k0 : rising_edges(f.size(), [&](std::size_t k) { return f[k] < s.s_lo; }))
        check_deadline(v, tr, k0, s.deadline_s,
                       [&](std::size_t k) { return f[k] >= s.s_lo && f[k] <= s.s_hi; },
                       "return to statutory band");
    return v;
}

Verdict monitor_shutdown(const Trace& tr, const ShutdownSpec& s, const MonitorContext& ctx) {
    Verdict v;
    const auto f = freq_signal(tr, ctx);
    for (std::size_t k = 0; k < f.size(); ++k)
        if (f[k] < s.lo || f[k] > s.hi) {
            flag(v, tr.t[k], "shutdown limits crossed");
            break;
        }
    return v;
}

Verdict monitor_ffr_primary(const Trace& tr, const FfrPrimarySpec& s, const MonitorContext& ctx) {
    Verdict v;
    const auto f = freq_signal(tr, ctx);
    const auto p = power_signal(tr, ctx);
    const double s_lo = 49.5;
    auto at_max = [&](std::size_t k) { return std::fabs(p[k] - s.p_max) <= ctx.power_tol; };
    for (std::size_t k0 : rising_edges(f.size(), [&](std::size_t k) { return f[k] < s_lo; })) {
        check_deadline(v, tr, k0, s.t_inject, [&](std::size_t k) { return p[k] > 0.0; },
                       "primary power injection");
        check_deadline(v, tr, k0, s.t_max, at_max, "primary max power");
    }
    check_hold(v, tr, s.hold, at_max, "primary delivery hold");
    return v;
}

Verdict monitor_ffr_secondary(const Trace& tr, const FfrSecondarySpec& s, const MonitorContext& ctx) {
    Verdict v;
    const auto f = freq_signal(tr, ctx);
    const auto p = power_signal(tr, ctx);
    auto at_max = [&](std::size_t k) { return std::fabs(p[k] - s.p_max) <= ctx.power_tol; };
    for (std::size_t k0 : rising_edges(f.size(), [&](std::size_t k) { return f[k] < 49.5; }))
        check_deadline(v, tr, k0, s.t_max, at_max, "secondary max power");
    check_hold(v, tr, s.hold, at_max, "secondary delivery hold");
    return v;
}

Verdict monitor_efr(const Trace& tr, const EfrSpec& s, const MonitorContext& ctx) {
    Verdict v;
    const auto f = freq_signal(tr, ctx);
    const auto p = power_signal(tr, ctx);
    auto at_max = [&](std::size_t k) { return std::fabs(std::fabs(p[k]) - s.p_max) <= ctx.power_tol; };
    auto outside_db = [&](std::size_t k) { return f[k] < s.db_lo || f[k] > s.db_hi; };
    for (std::size_t k0 : rising_edges(f.size(), outside_db))
        check_deadline(v, tr, k0, s.t_respond, at_max, "EFR response");
    check_hold(v, tr, s.hold, at_max, "EFR delivery hold");
    // ramp-rate band, checked where f is outside the deadband but inside
    // the envelope
    if (tr.t.size() >= 3) {
        const double dt = tr.t[1] - tr.t[0];
        for (std::size_t k = 1; k + 1 < tr.t.size(); ++k) {
            if (!outside_db(k) || f[k] < s.env_lo || f[k] > s.env_hi) continue;
            const double dfdt = (f[k + 1] - f[k - 1]) / (2 * dt);
            const double dpdt = (p[k + 1] - p[k - 1]) / (2 * dt);
            const double mid = -dfdt / s.k;
            if (dpdt <= s.p_max * (mid - 0.01) || dpdt >= s.p_max * (mid + 0.01)) {
                flag(v, tr.t[k], "EFR ramp-rate band");
                break;
            }
        }
    }
    return v;
}

}  // namespace

ReachAvoidSpec shrink_spec(const ReachAvoidSpec& spec, double eps) {
    ReachAvoidSpec out = spec;
    out.t_lo = spec.t_lo + eps;
    out.t_hi = spec.t_hi - eps;
    out.b_lo = spec.b_lo + eps;
    out.b_hi = spec.b_hi - eps;
    out.feasible = out.t_lo <= out.t_hi;
    return out;
}

Verdict monitor(const Trace& tr, const FreqSpec& spec, const MonitorContext& ctx) {
    if (tr.t.empty()) throw std::runtime_error("monitor: empty trace");
    return std::visit(
        [&](const auto& s) -> Verdict {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ReachAvoidSpec>) return monitor_reach_avoid(tr, s, ctx);
            else if constexpr (std::is_same_v<T, StatutoryNormalSpec>) return monitor_normal(tr, s, ctx);
            else if constexpr (std::is_same_v<T, InfrequentSpec>) return monitor_infrequent(tr, s, ctx);
            else if constexpr (std::is_same_v<T, ShutdownSpec>) return monitor_shutdown(tr, s, ctx);
            else if constexpr (std::is_same_v<T, FfrPrimarySpec>) return monitor_ffr_primary(tr, s, ctx);
            else if constexpr (std::is_same_v<T, FfrSecondarySpec>) return monitor_ffr_secondary(tr, s, ctx);
            else if constexpr (std::is_same_v<T, EfrSpec>) return monitor_efr(tr, s, ctx);
            else {
                const CompositeSpec& c = s;
                Verdict v;
                bool any_sat = false;
                Verdict worst;
                bool have_worst = false;
                for (const auto& mp : c.members) {
                    Verdict mv = monitor(tr, *mp, ctx);
                    if (!mv.witness.empty() && !mp->name.empty())
                        mv.witness = mp->name + ": " + mv.witness;
                    if (c.conjunction) {
                        if (!mv.satisfied && (v.satisfied || *mv.first_violation < *v.first_violation)) {
                            v.satisfied = false;
                            v.first_violation = mv.first_violation;
                            v.witness = mv.witness;
                        }
                        if (mv.pending && v.satisfied) mark_pending(v, mv.witness);
                    } else {
                        if (mv.satisfied) any_sat = true;
                        if (!mv.satisfied &&
                            (!have_worst || *mv.first_violation > *worst.first_violation)) {
                            worst = mv;
                            have_worst = true;
                        }
                    }
                }
                if (!c.conjunction) {
                    if (!any_sat && have_worst) return worst;
                }
                return v;
            }
        },
        spec.v);
}

std::vector<double> rocof(const Trace& tr, const MonitorContext& ctx) {
    if (tr.t.size() < 2) throw std::runtime_error("rocof: need at least two samples");
    const auto f = freq_signal(tr, ctx);
    const double dt = tr.t[1] - tr.t[0];
    std::vector<double> d(f.size());
    d.front() = (f[1] - f[0]) / dt;
    d.back() = (f[f.size() - 1] - f[f.size() - 2]) / dt;
    for (std::size_t k = 1; k + 1 < f.size(); ++k) d[k] = (f[k + 1] - f[k - 1]) / (2 * dt);
    return d;
}

FreqSpec compose_specs(std::vector<FreqSpec> members, bool conjunction) {
    if (members.empty()) throw std::runtime_error("compose_specs: empty member list");
    CompositeSpec c;
    c.conjunction = conjunction;
    for (auto& m : members) c.members.push_back(std::make_shared<FreqSpec>(std::move(m)));
    FreqSpec out;
    out.v = std::move(c);
    out.name = conjunction ? "conjunction" : "disjunction";
    return out;
}

namespace {

double num_or_inf(const nlohmann::json& j, double dflt) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
        throw ParseError("expected number or inf, got '" + s + "'");
    }
    if (j.is_null()) return dflt;
    return j.get<double>();
}

std::pair<double, double> interval(const nlohmann::json& j, const std::string& field) {
    if (!j.contains(field)) throw ParseError("spec: missing interval '" + field + "'");
    const auto& a = j.at(field);
    if (!a.is_array() || a.size() != 2) throw ParseError("spec: '" + field + "' must be [lo, hi]");
    return {num_or_inf(a[0], -kInf), num_or_inf(a[1], kInf)};
}

}  // namespace

FreqSpec spec_from_json(const nlohmann::json& j) {
    FreqSpec out;
    out.name = j.value("name", "");
    const std::string variant = j.value("variant", "");
    if (variant == "reach_avoid") {
        ReachAvoidSpec s;
        std::tie(s.t_lo, s.t_hi) = interval(j, "T");
        std::tie(s.b_lo, s.b_hi) = interval(j, "B");
        out.v = s;
    } else if (variant == "statutory_normal") {
        StatutoryNormalSpec s;
        if (j.contains("S")) std::tie(s.s_lo, s.s_hi) = interval(j, "S");
        s.loss_limit_mw = j.value("L", s.loss_limit_mw);
        out.v = s;
    } else if (variant == "infrequent") {
        InfrequentSpec s;
        if (j.contains("S")) std::tie(s.s_lo, s.s_hi) = interval(j, "S");
        s.z = j.value("Z", s.z);
        s.deadline_s = j.value("deadline", s.deadline_s);
        s.loss_limit_mw = j.value("L", s.loss_limit_mw);
        out.v = s;
    } else if (variant == "shutdown") {
        ShutdownSpec s;
        s.lo = j.value("lo", s.lo);
        s.hi = j.value("hi", s.hi);
        out.v = s;
    } else if (variant == "ffr_primary") {
        FfrPrimarySpec s;
        s.t_inject = j.value("t_inject", s.t_inject);
        s.t_max = j.value("t_max", s.t_max);
        s.hold = j.value("hold", s.hold);
        s.p_max = j.value("P_max", s.p_max);
        out.v = s;
    } else if (variant == "ffr_secondary") {
        FfrSecondarySpec s;
        s.t_max = j.value("t_max", s.t_max);
        s.hold = j.value("hold", s.hold);
        s.p_max = j.value("P_max", s.p_max);
        out.v = s;
    } else if (variant == "efr") {
        EfrSpec s;
        if (j.contains("deadband")) std::tie(s.db_lo, s.db_hi) = interval(j, "deadband");
        if (j.contains("envelope")) std::tie(s.env_lo, s.env_hi) = interval(j, "envelope");
        s.k = j.value("k", s.k);
        s.t_respond = j.value("t_respond", s.t_respond);
        s.hold = j.value("hold", s.hold);
        s.p_max = j.value("P_max", s.p_max);
        out.v = s;
    } else if (variant == "conjunction" || variant == "disjunction") {
        CompositeSpec c;
        c.conjunction = variant == "conjunction";
        for (const auto& m : j.at("members")) c.members.push_back(std::make_shared<FreqSpec>(spec_from_json(m)));
        out.v = c;
    } else {
        throw ParseError("spec: unknown variant '" + variant + "'");
    }
    return out;
}

namespace {

nlohmann::json iv(double lo, double hi) {
    nlohmann::json a = nlohmann::json::array();
    a.push_back(std::isinf(lo) ? nlohmann::json("-inf") : nlohmann::json(lo));
    a.push_back(std::isinf(hi) ? nlohmann::json("inf") : nlohmann::json(hi));
    return a;
}

}  // namespace

nlohmann::json spec_to_json(const FreqSpec& s) {
    nlohmann::json j;
    if (!s.name.empty()) j["name"] = s.name;
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ReachAvoidSpec>) {
                j["variant"] = "reach_avoid";
                j["T"] = iv(v.t_lo, v.t_hi);
                j["B"] = iv(v.b_lo, v.b_hi);
            } else if constexpr (std::is_same_v<T, StatutoryNormalSpec>) {
                j["variant"] = "statutory_normal";
                j["S"] = iv(v.s_lo, v.s_hi);
                j["L"] = v.loss_limit_mw;
            } else if constexpr (std::is_same_v<T, InfrequentSpec>) {
                j["variant"] = "infrequent";
                j["S"] = iv(v.s_lo, v.s_hi);
                j["Z"] = v.z;
                j["deadline"] = v.deadline_s;
                j["L"] = v.loss_limit_mw;
            } else if constexpr (std::is_same_v<T, ShutdownSpec>) {
                j["variant"] = "shutdown";
                j["lo"] = v.lo;
                j["hi"] = v.hi;
            } else if constexpr (std::is_same_v<T, FfrPrimarySpec>) {
                j["variant"] = "ffr_primary";
                j["t_inject"] = v.t_inject;
                j["t_max"] = v.t_max;
                j["hold"] = v.hold;
                j["P_max"] = v.p_max;
            } else if constexpr (std::is_same_v<T, FfrSecondarySpec>) {
                j["variant"] = "ffr_secondary";
                j["t_max"] = v.t_max;
                j["hold"] = v.hold;
                j["P_max"] = v.p_max;
            } else if constexpr (std::is_same_v<T, EfrSpec>) {
                j["variant"] = "efr";
                j["deadband"] = iv(v.db_lo, v.db_hi);
                j["envelope"] = iv(v.env_lo, v.env_hi);
                j["k"] = v.k;
                j["t_respond"] = v.t_respond;
                j["hold"] = v.hold;
                j["P_max"] = v.p_max;
            } else {
                j["variant"] = v.conjunction ? "conjunction" : "disjunction";
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& m : v.members) arr.push_back(spec_to_json(*m));
                j["members"] = arr;
            }
        },
        s.v);
    return j;
}

FreqSpec load_spec(const std::filesystem::path& path) { return spec_from_json(load_json(path)); }

}  // namespace rsfkit
