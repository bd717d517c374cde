#pragma once

#include <filesystem>

#include "rsfkit/model.hpp"

namespace rsfkit {
namespace nets {

/// Bundled data directory: RSFKIT_DATA overrides; otherwise the install
/// location baked in at configure time, falling back to ./data.
std::filesystem::path data_dir();

struct CatalogEntry {
    std::string name;
    std::filesystem::path path;
    std::string kind;  // model | interconnection | certificate | spec | scenario | constants
};
std::vector<CatalogEntry> catalog();

/// Case-study constants bundled alongside the matrices.
struct Defaults {
    double f0_hz = 50.0;
    double lambda = 1.7;
    double delta_bar = 1.0;
    double ess_max = 0.5454;
    double ess_min = 0.0;
    double d_max = 1.0;
    double u2_max_poc = 0.5;
    double u2_max_compositional = 1.0;
    double epsilon_poc = 0.1019;
    double epsilon_area3_isolated = 0.1016;
    double epsilon_area1_compositional = 0.1896;
    double epsilon_area3_compositional = 0.1992;
};
Defaults defaults();

/// Row/column extraction of one area out of the interconnected model:
/// area i keeps its 8 local rows/columns plus its coupling-integrator row,
/// and its internal-disturbance columns are the frequency columns of the
/// other two areas.
SystemModel extract_area(const SystemModel& full, int area_id);

/// The area row/column index sets (0-based) used by extract_area.
std::vector<std::size_t> area_indices(int area_id);
std::size_t frequency_column(int area_id);

}  // namespace nets
}  // namespace rsfkit
