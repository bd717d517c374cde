// rsfkit command line: model reduction, RSF certificates, symbolic
// synthesis, closed-loop runs, LTL monitoring and scenario orchestration.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rsfkit/contracts.hpp"
#include "rsfkit/io.hpp"
#include "rsfkit/nets.hpp"
#include "rsfkit/pipeline.hpp"
#include "rsfkit/specs.hpp"
#include "rsfkit/symbolic.hpp"

using namespace rsfkit;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;   // verification / synthesis / monitor failure
constexpr int kUsage = 2;  // bad usage or IO

Matrix load_matrix_csv(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path.string() + ": empty matrix file");
    Matrix M(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != M.cols()) throw ParseError(path.string() + ": ragged matrix rows");
        for (std::size_t j = 0; j < M.cols(); ++j) M(i, j) = rows[i][j];
    }
    return M;
}

void save_matrix_csv(const fs::path& path, const Matrix& M) {
    std::ofstream f(path);
    f << std::setprecision(17);
    for (std::size_t i = 0; i < M.rows(); ++i) {
        for (std::size_t j = 0; j < M.cols(); ++j) f << (j ? "," : "") << M(i, j);
        f << "\n";
    }
}

GridAbstraction grid_from_json(const nlohmann::json& j) {
    GridAbstraction g;
    for (const auto& v : j.at("lower")) g.lower.push_back(v.get<double>());
    for (const auto& v : j.at("upper")) g.upper.push_back(v.get<double>());
    for (const auto& v : j.at("eta")) g.eta.push_back(v.get<double>());
    g.tau = j.value("tau", 0.1);
    if (j.contains("inputs") && j.at("inputs").is_object()) {
        const double umax = j.at("inputs").value("max", 0.5);
        const double step = j.at("inputs").value("step", 0.1);
        for (double u = -umax; u <= umax + 1e-12; u += step) g.input_values.push_back(u);
    } else if (j.contains("inputs")) {
        for (const auto& v : j.at("inputs")) g.input_values.push_back(v.get<double>());
    }
    if (j.contains("dist_box"))
        for (const auto& b : j.at("dist_box")) {
            g.dist_lo.push_back(b.at(0).get<double>());
            g.dist_hi.push_back(b.at(1).get<double>());
        }
    return g;
}

void export_panels(const Trace& tr, const ReachAvoidSpec& band, const fs::path& prefix) {
    {
        std::ofstream f(prefix.string() + "_frequency.csv");
        f << "t,value,band_T_lo,band_T_hi,band_A_lo,band_A_hi\n" << std::setprecision(17);
        for (std::size_t k = 0; k < tr.t.size(); ++k)
            f << tr.t[k] << "," << tr.y[k].front() << "," << band.t_lo << "," << band.t_hi << ","
              << band.b_lo << "," << band.b_hi << "\n";
    }
    {
        std::ofstream f(prefix.string() + "_input.csv");
        f << "t,value\n" << std::setprecision(17);
        for (std::size_t k = 0; k < tr.t.size(); ++k)
            f << tr.t[k] << "," << (tr.u[k].empty() ? 0.0 : tr.u[k].front()) << "\n";
    }
}

int cmd_reduce(const std::string& model_path, std::size_t order, const std::string& out,
               const std::string& proj, bool with_disturbances, bool align) {
    const SystemModel m = load_model(model_path);
    Reduction red = balanced_truncate(m, order, with_disturbances);
    Matrix P = red.P;
    SystemModel m2 = red.reduced;
    if (align) {
        const Matrix G = output_aligned_rotation(m2);
        m2 = change_realization(m2, G, P);
    }
    save_model(out, m2);
    if (!proj.empty()) save_matrix_csv(proj, P);
    std::cout << "hankel:";
    for (double s : red.hankel) std::cout << " " << s;
    std::cout << "\nreduced model written to " << out << "\n";
    if (red.repeated_hankel) std::cout << "warning: repeated Hankel values, balancing not unique\n";
    if (red.rank_warning) std::cout << "warning: order exceeds numerical rank\n";
    return kOk;
}

int cmd_rsf_verify(const std::string& m1p, const std::string& m2p, const std::string& certp,
                   double tol) {
    const SystemModel m1 = load_model(m1p), m2 = load_model(m2p);
    const RsfCertificate cert = load_certificate(certp);
    cert.validate(m1, m2);
    const LmiReport lmi = verify_lmis(cert, m1, m2, tol);
    const EqualityReport eq = verify_equalities(cert, m1, m2, tol);
    std::cout << "lmi_a_margin: " << lmi.lmi_a_margin << "\n"
              << "lmi_b_margin: " << lmi.lmi_b_margin << "\n"
              << "H hurwitz:    " << (lmi.hurwitz ? "yes" : "no") << "\n"
              << "residual C2 - C1 P:        " << eq.res_c2 << "\n"
              << "residual F2 - F1 P:        " << eq.res_f2 << "\n"
              << "residual Sylvester:        " << eq.res_sylv << "\n"
              << "residual nonlinearity map: " << eq.res_e << "\n";
    const bool ok = lmi.pass;
    std::cout << (ok ? "PASS" : "FAIL") << " (tolerance " << tol << ")\n";
    return ok ? kOk : kFail;
}

int cmd_rsf_construct(const std::string& m1p, const std::string& m2p, const std::string& projp,
                      double lambda, const std::vector<double>& poles, const std::string& out,
                      bool refit) {
    const SystemModel m1 = load_model(m1p);
    SystemModel m2 = load_model(m2p);
    const Matrix P = load_matrix_csv(projp);
    CertificateSeed seed;
    RsfCertificate cert = construct_certificate(m1, m2, P, lambda, seed, poles);
    if (refit) {
        refit_abstraction_inputs(cert, m1, m2);
        save_model(m2p, m2);
        std::cout << "abstract input maps refit in place: " << m2p << "\n";
    }
    save_certificate(out, cert);
    const GammaCoefficients g = gamma_coefficients(cert, m1, m2);
    std::cout << "certificate written to " << out << "\n"
              << "gamma coefficients: c1 = " << g.c1 << ", c2 = " << g.c2 << "\n";
    return kOk;
}

int cmd_rsf_epsilon(const std::string& m1p, const std::string& m2p, const std::string& certp,
                    double dmax, double u2max) {
    const SystemModel m1 = load_model(m1p), m2 = load_model(m2p);
    const RsfCertificate cert = load_certificate(certp);
    EpsilonQuery q;
    q.d_max = dmax;
    q.u2_max = u2max;
    const double eps = epsilon_bound(cert, m1, m2, q);
    const GammaCoefficients g = gamma_coefficients(cert, m1, m2);
    std::cout << "c1 = " << g.c1 << ", c2 = " << g.c2 << "\n";
    std::cout << "epsilon = " << eps << "\n";
    return kOk;
}

int cmd_synth(const std::string& modelp, const std::string& gridp, const std::string& specp,
              double eps, const std::string& out) {
    const SystemModel m2 = load_model(modelp);
    const GridAbstraction grid = grid_from_json(load_json(gridp));
    const FreqSpec spec = load_spec(specp);
    const auto* ra = std::get_if<ReachAvoidSpec>(&spec.v);
    if (!ra) {
        std::cerr << "synth: spec must be reach_avoid\n";
        return kUsage;
    }
    const ReachAvoidSpec shrunk = shrink_spec(*ra, eps);
    if (!shrunk.feasible) {
        std::cerr << "synth: shrunk target is empty (epsilon too large)\n";
        return kFail;
    }
    const TransitionRelation rel = build_abstraction(m2, grid);
    const BandCells bands =
        classify_output_band(m2, grid, shrunk.t_lo, shrunk.t_hi, shrunk.b_lo, shrunk.b_hi);
    const SynthesisResult res = synthesize_recurrence(rel, bands.target, bands.avoid);
    std::cout << "winning cells: " << res.controller.winning_count << " / " << grid.cell_count()
              << " (outer iterations " << res.outer_iterations << ")\n";
    if (!res.success) {
        std::cerr << "synth: empty winning set\n";
        return kFail;
    }
    save_controller(out, res.controller);
    std::cout << "controller written to " << out << "\n";
    return kOk;
}

int cmd_closedloop(const std::string& m1p, const std::string& m2p, const std::string& certp,
                   const std::string& ctrlp, double u2, double v, double horizon, double dt,
                   const std::string& outdir) {
    const SystemModel m1 = load_model(m1p), m2 = load_model(m2p);
    const RsfCertificate cert = load_certificate(certp);
    std::optional<SymbolicController> ctrl;
    if (!ctrlp.empty()) ctrl = load_controller(ctrlp);
    std::vector<double> d(m1.q() + m1.r(), 0.0);
    for (std::size_t i = 0; i < m1.q(); ++i) d[i] = v;
    const ClosedLoopResult res =
        closed_loop(m1, m2, cert, ctrl ? &*ctrl : nullptr, constant_signal(d),
                    std::vector<double>(m1.n(), 0.0), std::vector<double>(m2.n(), 0.0), horizon,
                    dt, u2);
    if (!outdir.empty()) {
        fs::create_directories(outdir);
        save_trace_csv(fs::path(outdir) / "concrete.csv", res.concrete);
        save_trace_csv(fs::path(outdir) / "abstract.csv", res.abstract_trace);
    }
    std::cout << "max |y1 - y2| = " << res.report.max_output_mismatch << "\n"
              << "max V         = " << res.report.max_V << "\n"
              << "y1 range      = [" << res.report.min_y1 << ", " << res.report.max_y1 << "]\n";
    if (ctrl) {
        std::cout << "stayed in winning set: " << (res.report.stayed_in_winning_set ? "yes" : "no")
                  << "\n"
                  << "disturbance in box:    " << (res.report.disturbance_in_box ? "yes" : "no")
                  << "\n";
        if (!res.report.stayed_in_winning_set) return kFail;
    }
    return kOk;
}

int cmd_monitor(const std::string& tracep, const std::string& specp, double loss, bool deviation) {
    const Trace tr = load_trace_csv(tracep);
    const FreqSpec spec = load_spec(specp);
    MonitorContext ctx;
    ctx.loss_mw = loss;
    ctx.signal_is_deviation = deviation;
    const Verdict v = monitor(tr, spec, ctx);
    if (v.satisfied) {
        std::cout << "satisfied" << (v.pending ? " (" + v.witness + ")" : "") << "\n";
        return kOk;
    }
    std::cout << "violated at t = " << *v.first_violation << " (" << v.witness << ")\n";
    return kFail;
}

int cmd_scenario(const std::string& configp, const std::string& outdir) {
    const ScenarioConfig cfg = load_scenario(configp);
    const ScenarioReport rep = run_scenario(cfg);
    nlohmann::json j;
    j["all_satisfied"] = rep.all_satisfied;
    j["global_satisfied"] = rep.global_verdict.satisfied;
    j["composition_ok"] = rep.composition_ok;
    j["refines_global"] = rep.refines_global;
    if (!rep.composition_detail.empty()) j["composition_detail"] = rep.composition_detail;
    nlohmann::json areas = nlohmann::json::array();
    for (const AreaResult& r : rep.areas) {
        nlohmann::json a;
        a["name"] = r.name;
        a["satisfied"] = r.verdict.satisfied;
        if (r.verdict.first_violation) a["first_violation"] = *r.verdict.first_violation;
        if (!r.verdict.witness.empty()) a["witness"] = r.verdict.witness;
        a["epsilon"] = r.epsilon;
        a["max_mismatch"] = r.max_mismatch;
        a["max_V"] = r.max_V;
        areas.push_back(a);
        std::cout << r.name << ": " << (r.verdict.satisfied ? "satisfied" : "violated")
                  << "  (mismatch " << r.max_mismatch << ", epsilon " << r.epsilon << ")\n";
    }
    j["areas"] = areas;
    if (!outdir.empty()) {
        fs::create_directories(outdir);
        save_json(fs::path(outdir) / "report.json", j);
        for (const AreaResult& r : rep.areas) {
            save_trace_csv(fs::path(outdir) / (r.name + "_concrete.csv"), r.concrete);
            save_trace_csv(fs::path(outdir) / (r.name + "_abstract.csv"), r.abstract_trace);
        }
        std::cout << "report written to " << outdir << "\n";
    }
    std::cout << "global: " << (rep.global_verdict.satisfied ? "satisfied" : "violated")
              << ", composition " << (rep.composition_ok ? "ok" : "failed") << ", refinement "
              << (rep.refines_global ? "holds" : "fails") << "\n";
    return (rep.all_satisfied && rep.global_verdict.satisfied) ? kOk : kFail;
}

int cmd_export(const std::string& tracep, const std::string& specp, const std::string& prefix) {
    const Trace tr = load_trace_csv(tracep);
    if (tr.t.empty()) {
        std::cerr << "warning: empty trace, nothing exported\n";
        return kOk;
    }
    ReachAvoidSpec band;
    if (!specp.empty()) {
        const FreqSpec spec = load_spec(specp);
        if (const auto* ra = std::get_if<ReachAvoidSpec>(&spec.v)) band = *ra;
    }
    export_panels(tr, band, prefix);
    std::cout << "wrote " << prefix << "_frequency.csv and " << prefix << "_input.csv\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reduced-order abstraction and robust-simulation-function toolkit"};
    app.require_subcommand(1);

    // reduce
    auto* reduce = app.add_subcommand("reduce", "balanced-truncation model reduction");
    std::string r_model, r_out = "reduced.json", r_proj;
    std::size_t r_order = 3;
    bool r_dist = false, r_align = false;
    reduce->add_option("--model", r_model)->required();
    reduce->add_option("--order", r_order);
    reduce->add_option("--out", r_out);
    reduce->add_option("--proj", r_proj);
    reduce->add_flag("--gramian-disturbances", r_dist, "drive the controllability Gramian by [B G S]");
    reduce->add_flag("--align-output", r_align, "rotate the realization onto the output axis");

    // rsf
    auto* rsf = app.add_subcommand("rsf", "certificate operations");
    rsf->require_subcommand(1);
    auto* rverify = rsf->add_subcommand("verify", "check LMIs and equalities");
    std::string v_m1, v_m2, v_cert;
    double v_tol = 0.05;
    rverify->add_option("--m1", v_m1)->required();
    rverify->add_option("--m2", v_m2)->required();
    rverify->add_option("--cert", v_cert)->required();
    rverify->add_option("--tol", v_tol);

    auto* rconstruct = rsf->add_subcommand("construct", "constructive certificate");
    std::string c_m1, c_m2, c_proj, c_out = "cert.json";
    double c_lambda = 1.7;
    std::vector<double> c_poles;
    bool c_refit = false;
    rconstruct->add_option("--m1", c_m1)->required();
    rconstruct->add_option("--m2", c_m2)->required();
    rconstruct->add_option("--proj", c_proj)->required();
    rconstruct->add_option("--lambda", c_lambda);
    rconstruct->add_option("--poles", c_poles)->required()->expected(-1);
    rconstruct->add_option("--out", c_out);
    rconstruct->add_flag("--refit-inputs", c_refit);

    auto* repsilon = rsf->add_subcommand("epsilon", "Theorem-2 closeness bound");
    std::string e_m1, e_m2, e_cert;
    double e_dmax = 1.0, e_u2max = 0.5;
    repsilon->add_option("--m1", e_m1)->required();
    repsilon->add_option("--m2", e_m2)->required();
    repsilon->add_option("--cert", e_cert)->required();
    repsilon->add_option("--dmax", e_dmax);
    repsilon->add_option("--u2max", e_u2max);

    // synth
    auto* synth = app.add_subcommand("synth", "symbolic recurrence synthesis");
    std::string s_model, s_grid, s_spec, s_out = "controller.txt";
    double s_eps = 0.0;
    synth->add_option("--model", s_model)->required();
    synth->add_option("--grid", s_grid)->required();
    synth->add_option("--spec", s_spec)->required();
    synth->add_option("--epsilon", s_eps, "shrink the spec by the certificate epsilon");
    synth->add_option("--out", s_out);

    // closedloop
    auto* cl = app.add_subcommand("closedloop", "sampled-data closed loop");
    std::string l_m1, l_m2, l_cert, l_ctrl, l_out;
    double l_u2 = 0.0, l_v = 1.0, l_T = 6.0, l_dt = 0.005;
    cl->add_option("--m1", l_m1)->required();
    cl->add_option("--m2", l_m2)->required();
    cl->add_option("--cert", l_cert)->required();
    cl->add_option("--ctrl", l_ctrl);
    cl->add_option("--u2", l_u2, "constant abstract input when no controller is given");
    cl->add_option("--v", l_v, "external disturbance step");
    cl->add_option("--horizon", l_T);
    cl->add_option("--dt", l_dt);
    cl->add_option("--out-dir", l_out);

    // monitor
    auto* mon = app.add_subcommand("monitor", "evaluate a spec over a trace");
    std::string m_trace, m_spec;
    double m_loss = 0.0;
    bool m_dev = false;
    mon->add_option("--trace", m_trace)->required();
    mon->add_option("--spec", m_spec)->required();
    mon->add_option("--loss", m_loss, "event loss in MW");
    mon->add_flag("--deviation", m_dev, "trace carries delta-f instead of absolute f");

    // scenario
    auto* scen = app.add_subcommand("scenario", "multi-area scenario runner");
    auto* srun = scen->add_subcommand("run", "run a scenario config");
    std::string sc_cfg, sc_out;
    srun->add_option("--config", sc_cfg)->required();
    srun->add_option("--out", sc_out);

    // export
    auto* exp = app.add_subcommand("export", "plot-ready CSV panels");
    std::string x_trace, x_spec, x_prefix = "panel";
    exp->add_option("--trace", x_trace)->required();
    exp->add_option("--spec", x_spec);
    exp->add_option("--out-prefix", x_prefix);

    // catalog
    auto* cat = app.add_subcommand("catalog", "list bundled data artifacts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*reduce) return cmd_reduce(r_model, r_order, r_out, r_proj, r_dist, r_align);
        if (*rverify) return cmd_rsf_verify(v_m1, v_m2, v_cert, v_tol);
        if (*rconstruct) return cmd_rsf_construct(c_m1, c_m2, c_proj, c_lambda, c_poles, c_out, c_refit);
        if (*repsilon) return cmd_rsf_epsilon(e_m1, e_m2, e_cert, e_dmax, e_u2max);
        if (*synth) return cmd_synth(s_model, s_grid, s_spec, s_eps, s_out);
        if (*cl) return cmd_closedloop(l_m1, l_m2, l_cert, l_ctrl, l_u2, l_v, l_T, l_dt, l_out);
        if (*mon) return cmd_monitor(m_trace, m_spec, m_loss, m_dev);
        if (*srun) return cmd_scenario(sc_cfg, sc_out);
        if (*exp) return cmd_export(x_trace, x_spec, x_prefix);
        if (*cat) {
            for (const auto& e : nets::catalog())
                std::cout << e.kind << "  " << e.name << "\n";
            return kOk;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFail;
    }
    return kUsage;
}
