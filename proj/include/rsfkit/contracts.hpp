#pragma once

#include <filesystem>

#include "rsfkit/specs.hpp"
#include "rsfkit/symbolic.hpp"

namespace rsfkit {

struct Interval {
    double lo = 0.0, hi = 0.0;
    bool contains(const Interval& other) const { return lo <= other.lo && other.hi <= hi; }
    bool bounded() const;
};

/// Assume-guarantee contract over interval sets: the environment keeps
/// the external disturbance within d_max and each internal channel within
/// its assumption interval; the component keeps its own frequency
/// deviation within the guarantee band.
struct Contract {
    std::string name;
    double d_max = 0.0;
    std::vector<Interval> neighbor_assumptions;  // per internal channel
    Interval guarantee;                          // own delta-f band
};

struct CompositionError : std::runtime_error {
    explicit CompositionError(const std::string& what) : std::runtime_error(what) {}
};

/// channel_source[i][c] = index of the contract whose guarantee feeds
/// channel c of contract i (the coupling topology).
using ChannelSources = std::vector<std::vector<std::size_t>>;

/// Discharge internal assumptions (each feeding guarantee must imply the
/// consuming assumption) and form the composed contract: external bounds
/// only, guarantee = hull of member bands (the global band is as weak as
/// the weakest member).
Contract compose_contracts(const std::vector<Contract>& contracts, const ChannelSources& sources);

/// c_i refines c_j : c_j's assumptions contained in c_i's and c_i's
/// guarantee contained in c_j's.
bool check_refinement(const Contract& c_i, const Contract& c_j);

/// Worst-case internal disturbance boxes: channel c of the consumer is
/// sum_j gains(c, j) * guarantee_band(neighbor j), interval arithmetic.
std::vector<Interval> worst_case_internal(const std::vector<Contract>& neighbors,
                                          const Matrix& gains);

/// One area of a scenario.
struct ScenarioArea {
    std::string name;
    SystemModel concrete;   // with internal channels in compositional mode
    SystemModel abstract_model;
    RsfCertificate cert;
    std::optional<SymbolicController> controller;  // grid controller
    double u2_constant = 0.0;                      // used when no controller
    bool u2_enabled = true;                        // "controllers off" sets u2 = 0
    double v_step = 0.0;                           // external disturbance step at t = 0
    ReachAvoidSpec spec;                           // per-area guarantee spec
    Contract contract;
};

struct ScenarioConfig {
    enum class Mode { isolated, compositional };
    Mode mode = Mode::isolated;
    std::vector<ScenarioArea> areas;
    Matrix coupling;  // compositional: w = coupling * y_int (stacked)
    double horizon = 6.0;
    double dt = 0.005;
    Interval global_band{0.0, 0.0};  // global safety band on every delta-f
};

struct AreaResult {
    std::string name;
    Trace concrete, abstract_trace;
    Verdict verdict;
    double epsilon = 0.0;
    double max_mismatch = 0.0;
    double max_V = 0.0;
};

struct ScenarioReport {
    std::vector<AreaResult> areas;
    bool all_satisfied = false;
    Verdict global_verdict;
    bool composition_ok = false;
    std::string composition_detail;
    bool refines_global = false;
    Contract composed;
};

ScenarioReport run_scenario(const ScenarioConfig& cfg);

/// Scenario JSON: mode, horizon, dt, areas (model/abstract/cert paths,
/// controller path or constant u2, v step, spec), coupling, global band.
ScenarioConfig load_scenario(const std::filesystem::path& path);

}  // namespace rsfkit
