#include "rsfkit/nets.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "rsfkit/io.hpp"

#ifndef RSFKIT_DATA_DIR
#define RSFKIT_DATA_DIR "data"
#endif

namespace rsfkit {
namespace nets {

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("RSFKIT_DATA")) return env;
    return RSFKIT_DATA_DIR;
}

std::vector<CatalogEntry> catalog() {
    const auto dir = data_dir();
    std::vector<CatalogEntry> out;
    auto add = [&](const std::string& rel, const std::string& kind) {
        const auto p = dir / rel;
        if (std::filesystem::exists(p)) out.push_back({rel, p, kind});
    };
    add("nets_area1_nonlinear.json", "model");
    add("nets_area1_abstract.json", "model");
    add("nets_area1_cert.json", "certificate");
    add("nets_area1_linear.json", "model");
    add("nets_area1_linear_abstract.json", "model");
    add("nets_area1_linear_cert.json", "certificate");
    add("nets_area1_internal.json", "model");
    add("nets_full.json", "model");
    for (int a = 1; a <= 3; ++a) {
        add("nets_area" + std::to_string(a) + "_extracted.json", "model");
        add("nets_area" + std::to_string(a) + "_isolated.json", "model");
    }
    add("nets_interconnection.json", "interconnection");
    add("nets_defaults.json", "constants");
    if (std::filesystem::exists(dir / "specs"))
        for (const auto& e : std::filesystem::directory_iterator(dir / "specs"))
            out.push_back({"specs/" + e.path().filename().string(), e.path(), "spec"});
    if (std::filesystem::exists(dir / "scenarios"))
        for (const auto& e : std::filesystem::directory_iterator(dir / "scenarios"))
            out.push_back({"scenarios/" + e.path().filename().string(), e.path(), "scenario"});
    return out;
}

Defaults defaults() {
    const nlohmann::json j = load_json(data_dir() / "nets_defaults.json");
    Defaults d;
    d.f0_hz = j.value("f0_hz", d.f0_hz);
    d.lambda = j.value("lambda", d.lambda);
    d.delta_bar = j.value("delta_bar", d.delta_bar);
    d.ess_max = j.value("ess_max", d.ess_max);
    d.ess_min = j.value("ess_min", d.ess_min);
    d.d_max = j.value("d_max", d.d_max);
    d.u2_max_poc = j.value("u2_max_poc", d.u2_max_poc);
    d.u2_max_compositional = j.value("u2_max_compositional", d.u2_max_compositional);
    d.epsilon_poc = j.value("epsilon_poc", d.epsilon_poc);
    d.epsilon_area3_isolated = j.value("epsilon_area3_isolated", d.epsilon_area3_isolated);
    d.epsilon_area1_compositional = j.value("epsilon_area1_compositional", d.epsilon_area1_compositional);
    d.epsilon_area3_compositional = j.value("epsilon_area3_compositional", d.epsilon_area3_compositional);
    return d;
}

std::vector<std::size_t> area_indices(int area_id) {
    if (area_id < 1 || area_id > 3) throw std::runtime_error("area id must be 1, 2 or 3");
    std::vector<std::size_t> idx;
    const std::size_t base = static_cast<std::size_t>(area_id - 1) * 8;
    for (std::size_t k = 0; k < 8; ++k) idx.push_back(base + k);
    idx.push_back(24 + static_cast<std::size_t>(area_id - 1));
    return idx;
}

std::size_t frequency_column(int area_id) {
    return 4 + static_cast<std::size_t>(area_id - 1) * 8;
}

SystemModel extract_area(const SystemModel& full, int area_id) {
    if (full.n() != 27 || full.p() != 3 || full.q() != 3)
        throw DimensionError("extract_area: expected the 27-state interconnected model");
    const auto idx = area_indices(area_id);
    SystemModel m;
    m.name = "area" + std::to_string(area_id) + "_extracted";
    m.A = Matrix(9, 9);
    for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t j = 0; j < 9; ++j) m.A(i, j) = full.A(idx[i], idx[j]);
    const std::size_t col = static_cast<std::size_t>(area_id - 1);
    m.B = Matrix(9, 1);
    m.G = Matrix(9, 1);
    m.C = Matrix(1, 9);
    for (std::size_t i = 0; i < 9; ++i) {
        m.B(i, 0) = full.B(idx[i], col);
        m.G(i, 0) = full.G(idx[i], col);
        m.C(0, i) = full.C(col, idx[i]);
    }
    m.S_int = Matrix(9, 2);
    std::size_t ch = 0;
    for (int other = 1; other <= 3; ++other) {
        if (other == area_id) continue;
        const std::size_t fc = frequency_column(other);
        for (std::size_t i = 0; i < 9; ++i) m.S_int(i, ch) = full.A(idx[i], fc);
        ++ch;
    }
    m.E = Matrix(9, 1);
    m.F = Matrix(1, 9);
    m.C_int = Matrix(1, 9);
    m.C_int(0, 4) = 1.0;  // raw local frequency state feeds the coupling
    m.validate();
    return m;
}

}  // namespace nets
}  // namespace rsfkit
