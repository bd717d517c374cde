#include "rsfkit/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rsfkit {

using nlohmann::json;

json load_json(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return j;
}

void save_json(const std::filesystem::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot write " + path.string());
    f << j.dump(1) << "\n";
}

Matrix matrix_from_json(const json& j, const std::string& field) {
    if (!j.contains(field)) throw ParseError("missing field '" + field + "'");
    const json& v = j.at(field);
    if (!v.is_array()) throw ParseError("field '" + field + "' must be an array of rows");
    Matrix M(v.size(), v.empty() ? 0 : v.front().size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const json& row = v.at(i);
        if (!row.is_array() || row.size() != M.cols())
            throw ParseError("field '" + field + "' row " + std::to_string(i) + " has inconsistent length");
        for (std::size_t k = 0; k < M.cols(); ++k) {
            if (!row.at(k).is_number()) throw ParseError("field '" + field + "': non-numeric entry");
            M(i, k) = row.at(k).get<double>();
        }
    }
    return M;
}

json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (std::size_t i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(row);
    }
    return rows;
}

static SlopeNonlinearity phi_from_json(const json& j) {
    SlopeNonlinearity p;
    if (!j.contains("phi")) return p;
    const json& f = j.at("phi");
    const std::string kind = f.value("kind", "zero");
    if (kind == "zero")
        p.kind = SlopeNonlinearity::Kind::zero;
    else if (kind == "identity")
        p.kind = SlopeNonlinearity::Kind::identity;
    else if (kind == "saturation")
        p.kind = SlopeNonlinearity::Kind::saturation;
    else
        throw ParseError("phi.kind must be zero|identity|saturation, got '" + kind + "'");
    p.a = f.value("a", 0.0);
    p.b = f.value("b", kind == "zero" ? 0.0 : 1.0);
    p.sat_min = f.value("sat_min", 0.0);
    p.sat_max = f.value("sat_max", 0.0);
    p.gain = f.value("gain", 1.0);
    return p;
}

SystemModel model_from_json(const json& j, const std::string& origin) {
    SystemModel m;
    m.name = j.value("name", origin);
    m.A = matrix_from_json(j, "A");
    const std::size_t n = m.A.rows();
    if (m.A.cols() != n) throw ParseError(origin + ": A is not square");
    m.B = j.contains("B") ? matrix_from_json(j, "B") : Matrix(n, 0);
    m.C = j.contains("C") ? matrix_from_json(j, "C") : Matrix::identity(n);
    m.G = j.contains("G") ? matrix_from_json(j, "G") : Matrix(n, 0);
    m.S_int = j.contains("S") ? matrix_from_json(j, "S") : Matrix(n, 0);
    m.E = j.contains("E") ? matrix_from_json(j, "E") : Matrix(n, 1);
    m.F = j.contains("F") ? matrix_from_json(j, "F") : Matrix(1, n);
    if (j.contains("C_int")) m.C_int = matrix_from_json(j, "C_int");
    m.phi = phi_from_json(j);
    for (const char* dim : {"n", "p", "q", "r"}) {
        if (!j.contains(dim)) continue;
        const std::size_t want = j.at(dim).get<std::size_t>();
        const std::size_t got = dim[0] == 'n' ? m.n() : dim[0] == 'p' ? m.p() : dim[0] == 'q' ? m.q() : m.r();
        if (want != got)
            throw ParseError(origin + ": declared " + dim + "=" + std::to_string(want) +
                             " but matrices give " + std::to_string(got));
    }
    try {
        m.validate();
    } catch (const std::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    return m;
}

json model_to_json(const SystemModel& m) {
    json j;
    if (!m.name.empty()) j["name"] = m.name;
    j["n"] = m.n();
    j["p"] = m.p();
    j["q"] = m.q();
    j["r"] = m.r();
    j["A"] = matrix_to_json(m.A);
    j["B"] = matrix_to_json(m.B);
    j["C"] = matrix_to_json(m.C);
    j["G"] = matrix_to_json(m.G);
    if (m.r() > 0) j["S"] = matrix_to_json(m.S_int);
    if (!m.is_linear()) {
        j["E"] = matrix_to_json(m.E);
        j["F"] = matrix_to_json(m.F);
        json f;
        f["kind"] = m.phi.kind == SlopeNonlinearity::Kind::saturation ? "saturation"
                    : m.phi.kind == SlopeNonlinearity::Kind::identity ? "identity"
                                                                      : "zero";
        f["a"] = m.phi.a;
        f["b"] = m.phi.b;
        f["sat_min"] = m.phi.sat_min;
        f["sat_max"] = m.phi.sat_max;
        f["gain"] = m.phi.gain;
        j["phi"] = f;
    }
    if (!m.C_int.empty()) j["C_int"] = matrix_to_json(m.C_int);
    return j;
}

bool is_interconnection_file(const std::filesystem::path& path) {
    return load_json(path).contains("subsystems");
}

SystemModel load_model(const std::filesystem::path& path) {
    const json j = load_json(path);
    if (j.contains("subsystems")) return interconnect(load_interconnection(path));
    return model_from_json(j, path.string());
}

Interconnection load_interconnection(const std::filesystem::path& path) {
    const json j = load_json(path);
    if (!j.contains("subsystems")) throw ParseError(path.string() + ": not an interconnection file");
    Interconnection net;
    for (const json& e : j.at("subsystems")) {
        if (e.is_string()) {
            std::filesystem::path sub = e.get<std::string>();
            if (sub.is_relative()) sub = path.parent_path() / sub;
            net.subsystems.push_back(load_model(sub));
        } else {
            net.subsystems.push_back(model_from_json(e, path.string()));
        }
    }
    net.coupling = matrix_from_json(j, "coupling");
    if (j.contains("T")) net.T = matrix_from_json(j, "T");
    net.validate();
    return net;
}

void save_model(const std::filesystem::path& path, const SystemModel& m) {
    save_json(path, model_to_json(m));
}

void save_trace_csv(const std::filesystem::path& path, const Trace& tr) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot write " + path.string());
    f << "t";
    auto header = [&](const char* base, std::size_t cnt) {
        for (std::size_t i = 1; i <= cnt; ++i) f << "," << base << i;
    };
    const std::size_t n = tr.x.empty() ? 0 : tr.x[0].size();
    const std::size_t m = tr.y.empty() ? 0 : tr.y[0].size();
    const std::size_t p = tr.u.empty() ? 0 : tr.u[0].size();
    const std::size_t q = tr.v.empty() ? 0 : tr.v[0].size();
    const std::size_t r = tr.w.empty() ? 0 : tr.w[0].size();
    header("x", n); header("y", m); header("u", p); header("v", q); header("w", r);
    f << "\n" << std::setprecision(17);
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        f << tr.t[k];
        for (double z : tr.x[k]) f << "," << z;
        for (double z : tr.y[k]) f << "," << z;
        for (double z : tr.u[k]) f << "," << z;
        for (double z : tr.v[k]) f << "," << z;
        for (double z : tr.w[k]) f << "," << z;
        f << "\n";
    }
}

Trace load_trace_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw ParseError(path.string() + ": empty trace file");
    std::size_t n = 0, m = 0, p = 0, q = 0, r = 0;
    {
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) {
            if (col.empty() || col == "t") continue;
            switch (col[0]) {
                case 'x': ++n; break;
                case 'y': ++m; break;
                case 'u': ++p; break;
                case 'v': ++q; break;
                case 'w': ++r; break;
                default: throw ParseError(path.string() + ": unknown column '" + col + "'");
            }
        }
    }
    Trace tr;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != 1 + n + m + p + q + r)
            throw ParseError(path.string() + ": row with wrong column count");
        std::size_t k = 0;
        tr.t.push_back(row[k]); k += 1;
        tr.x.emplace_back(row.begin() + k, row.begin() + k + n); k += n;
        tr.y.emplace_back(row.begin() + k, row.begin() + k + m); k += m;
        tr.u.emplace_back(row.begin() + k, row.begin() + k + p); k += p;
        tr.v.emplace_back(row.begin() + k, row.begin() + k + q); k += q;
        tr.w.emplace_back(row.begin() + k, row.begin() + k + r); k += r;
    }
    if (tr.t.size() >= 2) tr.dt = tr.t[1] - tr.t[0];
    return tr;
}

}  // namespace rsfkit
