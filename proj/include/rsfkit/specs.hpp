#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "rsfkit/model.hpp"

#include <nlohmann/json_fwd.hpp>

namespace rsfkit {

/// Reach-avoid on the frequency deviation: always avoid leaving
/// [B_lo, B_hi], always eventually return to [T_lo, T_hi].
struct ReachAvoidSpec {
    double t_lo = 0.0, t_hi = 0.0;  // target band
    double b_lo = 0.0, b_hi = 0.0;  // safe band; avoid = outside
    bool feasible = true;           // false marks an empty shrunk target
};

/// loss <= limit  =>  always f in [s_lo, s_hi].
struct StatutoryNormalSpec {
    double s_lo = 49.5, s_hi = 50.5;
    double loss_limit_mw = 1320.0;
};

/// loss >= limit and f < s_lo  =>  within `deadline` f back in S, and
/// always f >= z.
struct InfrequentSpec {
    double s_lo = 49.5, s_hi = 50.5;
    double z = 49.2;
    double deadline_s = 60.0;
    double loss_limit_mw = 1320.0;
};

struct ShutdownSpec {
    double lo = 47.0, hi = 52.0;
};

/// Primary FFR: on a low-frequency event inject power within t_inject,
/// reach max by t_max, then hold for `hold` once at max.
struct FfrPrimarySpec {
    double t_inject = 2.0, t_max = 10.0, hold = 30.0;
    double p_max = 1.0;
};

struct FfrSecondarySpec {
    double t_max = 30.0, hold = 1800.0;
    double p_max = 1.0;
};

/// EFR: respond within t_respond of leaving the deadband, hold at max,
/// and keep the power ramp inside the RoCoF-proportional band while the
/// frequency is outside the deadband but inside the envelope.
struct EfrSpec {
    double db_lo = 49.95, db_hi = 50.05;
    double k = 0.45;
    double t_respond = 1.0, hold = 900.0;
    double p_max = 1.0;
    double env_lo = 49.5, env_hi = 50.5;
};

struct FreqSpec;

struct CompositeSpec {
    bool conjunction = true;
    std::vector<std::shared_ptr<FreqSpec>> members;
};

struct FreqSpec {
    std::variant<ReachAvoidSpec, StatutoryNormalSpec, InfrequentSpec, ShutdownSpec, FfrPrimarySpec,
                 FfrSecondarySpec, EfrSpec, CompositeSpec>
        v;
    std::string name;
};

struct Verdict {
    bool satisfied = true;
    std::optional<double> first_violation;  // seconds
    std::string witness;                    // violated clause, or "pending: ..."
    bool pending = false;                   // an obligation could not close in-trace
};

struct MonitorContext {
    double loss_mw = 0.0;
    double f0 = 50.0;               // nominal frequency
    bool signal_is_deviation = false;  // trace carries delta-f instead of f
    std::size_t freq_channel = 0;   // index into the trace y columns
    std::size_t power_channel = 0;  // index into the trace u columns
    double power_tol = 1e-9;        // equality tolerance for P == P_max
};

/// eps-shrunk conservative reach-avoid: target shrinks, avoid grows.
/// An empty shrunk target is returned with feasible = false.
ReachAvoidSpec shrink_spec(const ReachAvoidSpec& spec, double eps);

/// Finite-trace bounded-LTL evaluation: deadline operators must resolve
/// in-trace, unbounded always-obligations are satisfied-so-far, and
/// obligations whose window extends past the trace end are pending.
Verdict monitor(const Trace& tr, const FreqSpec& spec, const MonitorContext& ctx = {});

/// Central-difference derivative of the monitored frequency channel,
/// one-sided at the ends.
std::vector<double> rocof(const Trace& tr, const MonitorContext& ctx = {});

FreqSpec compose_specs(std::vector<FreqSpec> members, bool conjunction);

FreqSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const FreqSpec& s);
FreqSpec load_spec(const std::filesystem::path& path);

}  // namespace rsfkit
