#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbm/berwald.hpp"
#include "gbm/metric_spec.hpp"

namespace gbm {

inline constexpr const char* kToolName = "gbm";
inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
    exit_ok = 0,
    exit_not_gb = 1,
    exit_inconclusive = 2,
    exit_usage = 3,
    exit_input = 4,
    exit_io = 5,
};

inline int exit_code_for(GlobalVerdict v) {
    switch (v) {
        case GlobalVerdict::riemannian:
        case GlobalVerdict::classical_berwald:
        case GlobalVerdict::generalized_berwald: return exit_ok;
        case GlobalVerdict::not_generalized_berwald: return exit_not_gb;
        case GlobalVerdict::inconclusive: return exit_inconclusive;
    }
    return exit_inconclusive;
}

// Invalid command-line values.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::vector<double> parse_numbers(const std::string& text, char sep, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw UsageError(std::string("malformed ") + what + ": '" + text + "'");
        }
        while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
        if (used != item.size()) throw UsageError(std::string("malformed ") + what + ": '" + text + "'");
        out.push_back(v);
    }
    if (out.empty()) throw UsageError(std::string("empty ") + what);
    return out;
}

inline Vec parse_vector(const std::string& text, const char* what) {
    const auto v = parse_numbers(text, ',', what);
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// "lo:hi,lo:hi@res"
inline Grid parse_grid(const std::string& text) {
    const auto at = text.find('@');
    if (at == std::string::npos) throw UsageError("grid must look like lo:hi,lo:hi@res");
    const auto res = parse_numbers(text.substr(at + 1), ',', "grid resolution");
    if (res.size() != 1 || res[0] != std::floor(res[0]) || res[0] < 2) {
        throw UsageError("grid resolution must be an integer >= 2");
    }
    std::vector<double> lo, hi;
    std::stringstream ss(text.substr(0, at));
    std::string range;
    while (std::getline(ss, range, ',')) {
        const auto b = parse_numbers(range, ':', "grid range");
        if (b.size() != 2 || !(b[0] < b[1])) throw UsageError("grid range must be lo:hi with lo < hi");
        lo.push_back(b[0]);
        hi.push_back(b[1]);
    }
    Grid g;
    g.box.lo = Eigen::Map<const Vec>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    g.box.hi = Eigen::Map<const Vec>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    g.res = static_cast<int>(res[0]);
    return g;
}

// "x,y;x,y;..."
inline std::vector<Vec> parse_polyline(const std::string& text) {
    std::vector<Vec> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) out.push_back(parse_vector(item, "polyline vertex"));
    if (out.size() < 2) throw UsageError("polyline needs at least two vertices");
    return out;
}

struct RunConfig {
    std::string metric_path;
    std::string grid_spec = "0:1,0:1@5";
    int quad_nodes = 0;
    int selection_dirs = 0;
    int random_batch = 32;
    int validation_dirs = 64;
    double tol_contact = 1e-9;
    double tol_res = 1e-7;
    double not_gb_trigger = 1e-3;
    std::uint64_t seed = 1;
    int threads = 0;
    bool transport_check = true;
    std::string out_path;   // empty: stdout
    std::string csv_path;   // empty: no CSV

    void validate() const {
        if (!(tol_contact > 0.0) || !(tol_res > 0.0) || !(not_gb_trigger > 0.0)) {
            throw UsageError("tolerances must be positive");
        }
        if (quad_nodes < 0 || selection_dirs < 0 || random_batch < 0 || validation_dirs < 1) {
            throw UsageError("pool and quadrature sizes must be non-negative");
        }
    }

    DecideOptions decide_options() const {
        DecideOptions o;
        o.quad_nodes = quad_nodes;
        o.selection_dirs = selection_dirs;
        o.random_batch = random_batch;
        o.validation_dirs = validation_dirs;
        o.seed = seed;
        o.tol_contact = tol_contact;
        o.tol_res = tol_res;
        o.not_gb_trigger = not_gb_trigger;
        o.transport_check = transport_check;
        o.threads = threads;
        return o;
    }
};

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

inline std::string fmt17(double v) { return detail::format_number(v); }

// ---------------------------------------------------------------------------
// JSON and CSV.
// ---------------------------------------------------------------------------

using Json = nlohmann::ordered_json;

inline Json to_json(const Vec& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Json to_json(const Mat& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vec(m.row(i).transpose())));
    return a;
}

inline Json to_json(const TorsionTensor& t) {
    Json o = Json::object();
    for (int a = 0; a < t.dim; ++a)
        for (int b = a + 1; b < t.dim; ++b)
            for (int c = 0; c < t.dim; ++c) o[component_label(c, a, b)] = t.at(c, a, b);
    return o;
}

inline Json to_json(const ExtremalDiagnostics& d) {
    Json o;
    o["route"] = to_string(d.route);
    o["chain_length"] = d.chain_length;
    o["orthogonality_defect"] = d.orthogonality_defect;
    o["final_residual"] = d.final_residual;
    o["converged"] = d.converged;
    o["infeasible"] = d.infeasible;
    o["stalled"] = d.stalled;
    o["inconsistency"] = d.inconsistency;
    o["chain_norms"] = d.chain_norms;
    o["monotone"] = d.monotone;
    o["selected"] = d.selected;
    return o;
}

inline Json config_json(const RunConfig& c) {
    Json o;
    o["metric"] = c.metric_path;
    o["grid"] = c.grid_spec;
    o["quad_nodes"] = c.quad_nodes;
    o["selection_dirs"] = c.selection_dirs;
    o["random_batch"] = c.random_batch;
    o["validation_dirs"] = c.validation_dirs;
    o["tol_contact"] = c.tol_contact;
    o["tol_res"] = c.tol_res;
    o["not_gb_trigger"] = c.not_gb_trigger;
    o["seed"] = c.seed;
    o["transport_check"] = c.transport_check;
    return o;
}

inline Json report_json(const ClassificationReport& rep, const MetricFamily& family, const RunConfig& cfg) {
    Json j;
    j["schema"] = 1;
    j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    j["config"] = config_json(cfg);
    j["family"] = family_name(family);
    j["dim"] = family_dim(family);
    j["global_verdict"] = to_string(rep.global);
    j["notes"] = rep.notes;
    j["coverage"] = "compatibility is checked on the sampled grid and sampled directions only";
    j["continuity"] = {{"statistic", rep.continuity.value},
                       {"refined", rep.continuity.refined},
                       {"refined_statistic", rep.continuity.refined_value},
                       {"diverging", rep.continuity.diverging}};
    j["transport"] = {{"checked", rep.transport_checked}, {"max_drift", rep.transport_drift}};
    Json pts = Json::array();
    for (const auto& v : rep.verdicts) {
        Json p;
        p["x"] = to_json(v.p.coords);
        p["route"] = to_string(v.route);
        p["status"] = to_string(v.status);
        p["torsion_chart"] = to_json(v.torsion_chart);
        p["torsion_orthonormal"] = to_json(v.torsion_frame);
        p["residual_max"] = v.residual_max;
        p["ratio_spread"] = v.ratio_spread;
        p["vertical_contacts"] = v.vertical_contacts;
        p["contact_violation"] = v.contact_violation;
        p["agreement"] = v.agreement;
        p["witness"] = {{"base", v.witness},
                        {"refined", v.witness_refined},
                        {"rss_base", v.witness_rss},
                        {"rss_refined", v.witness_rss_refined},
                        {"oracle_gap", v.oracle_gap}};
        p["chain"] = to_json(v.chain_diag);
        pts.push_back(std::move(p));
    }
    j["points"] = std::move(pts);
    return j;
}

// u1..un, T^c_ab (chart components), residual
inline std::string torsion_csv(const ClassificationReport& rep) {
    std::string out;
    const int n = rep.grid.dim();
    for (int i = 0; i < n; ++i) out += "u" + std::to_string(i + 1) + ",";
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            for (int c = 0; c < n; ++c) out += component_label(c, a, b) + ",";
    out += "residual\n";
    for (const auto& v : rep.verdicts) {
        for (int i = 0; i < n; ++i) out += fmt17(v.p.coords(i)) + ",";
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                for (int c = 0; c < n; ++c) out += fmt17(v.torsion_chart.at(c, a, b)) + ",";
        out += fmt17(v.residual_max) + "\n";
    }
    return out;
}

inline MetricFamily load_metric(const std::string& path) { return parse_metric_spec(read_text_file(path)); }

// Full pipeline. Returns the process exit code; diagnostics go to `err`.
inline int run(const RunConfig& cfg, std::ostream& err = std::cerr) {
    try {
        cfg.validate();
        const Grid grid = parse_grid(cfg.grid_spec);
        const MetricFamily family = load_metric(cfg.metric_path);
        if (grid.dim() != family_dim(family)) throw UsageError("grid dimension does not match the metric");
        const ClassificationReport rep = decide(family, grid, cfg.decide_options());
        write_text_file(cfg.out_path, report_json(rep, family, cfg).dump(2) + "\n");
        if (!cfg.csv_path.empty()) write_text_file(cfg.csv_path, torsion_csv(rep));
        return exit_code_for(rep.global);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return exit_usage;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return exit_io;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_input;
    }
}

// ---------------------------------------------------------------------------
// Auxiliary subcommands.
// ---------------------------------------------------------------------------

// γ, Γ* and the orthonormal frame at every grid point.
inline Json average_json(const MetricFamily& family, const Grid& grid, int quad_nodes) {
    const SphereQuadrature quad = default_quadrature(grid.dim(), quad_nodes);
    Json pts = Json::array();
    for (const auto& p : grid.points()) {
        const AveragedMetricData avg = averaged_data(family, p, quad);
        Json c = Json::array();
        for (int k = 0; k < avg.dim(); ++k) {
            Mat m(avg.dim(), avg.dim());
            for (int i = 0; i < avg.dim(); ++i)
                for (int j = 0; j < avg.dim(); ++j) m(i, j) = avg.christoffel(k, i, j);
            c.push_back(to_json(m));
        }
        pts.push_back({{"x", to_json(p.coords)}, {"gamma", to_json(avg.gamma)}, {"frame", to_json(avg.frame)},
                       {"christoffel", c}});
    }
    Json j;
    j["schema"] = 1;
    j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    j["quadrature_nodes"] = quad.size();
    j["points"] = std::move(pts);
    return j;
}

// Single-point solve with the chain trace and the oracle for comparison.
inline Json torsion_json(const MetricFamily& family, const Vec& x, const DecideOptions& opts) {
    const ChartPoint p{x};
    const SphereQuadrature quad = default_quadrature(p.dim(), opts.quad_nodes);
    const AveragedMetricData avg = averaged_data(family, p, quad);
    DirectionSampler sel;
    sel.deterministic = opts.selection_dirs;
    sel.random = opts.random_batch;
    sel.seed = mix_seed(opts.seed);
    const auto pool = build_pool(family, avg, sel.directions(p.dim()), opts.tol_contact);
    const auto val = build_pool(family, avg, validation_sampler(mix_seed(opts.seed + 1), opts.validation_dirs).directions(p.dim()),
                                opts.tol_contact);
    ExtremalOptions eo;
    eo.tol_contact = opts.tol_contact;
    eo.tol_res = opts.tol_res;
    const ExtremalResult r = extremal_torsion(pool, val, eo);
    Json trace = Json::array();
    for (std::size_t k = 0; k < r.state.chain.size(); ++k) {
        const int idx = r.diag.selected[k];
        trace.push_back({{"step", k + 1},
                         {"v", to_json(pool[static_cast<std::size_t>(idx)].block.v.comps)},
                         {"T_norm", r.diag.chain_norms[k]},
                         {"T", to_json(to_chart(r.state.chain[k], avg.frame))}});
    }
    const OracleResult o = oracle_min_norm(std::span<const PooledBlock>(pool));
    Json j;
    j["schema"] = 1;
    j["x"] = to_json(x);
    j["gamma"] = to_json(avg.gamma);
    j["torsion_chart"] = to_json(to_chart(r.torsion, avg.frame));
    j["torsion_orthonormal"] = to_json(r.torsion);
    j["diagnostics"] = to_json(r.diag);
    j["trace"] = std::move(trace);
    j["oracle"] = {{"torsion_chart", to_json(to_chart(o.torsion, avg.frame))},
                   {"max_residual", o.max_residual},
                   {"rss", o.rss}};
    return j;
}

// Transport drift of the reconstructed connection along a polyline.
inline Json validate_json(const MetricFamily& family, const std::vector<Vec>& polyline, const std::vector<Vec>& v0s,
                          const DecideOptions& opts) {
    const int n = family_dim(family);
    for (const Vec& x : polyline)
        if (x.size() != n) throw UsageError("polyline vertex dimension does not match the metric");
    for (const Vec& v : v0s)
        if (v.size() != n) throw UsageError("v0 dimension does not match the metric");
    const SphereQuadrature quad = default_quadrature(n, opts.quad_nodes);
    const AveragedField gf = [&](const Vec& x) { return averaged_data(family, ChartPoint{x}, quad); };
    const TorsionField tf = [&](const Vec& x) { return detail::light_torsion(family, x, quad, opts); };
    const TransportResult r =
        transport(family, make_connection_field(gf, tf), polyline, v0s, opts.transport_steps_per_unit);
    Json fin = Json::array();
    for (const Vec& v : r.final_vectors) fin.push_back(to_json(v));
    Json j;
    j["schema"] = 1;
    j["steps_per_unit"] = opts.transport_steps_per_unit;
    j["max_drift"] = r.max_drift;
    j["final_vectors"] = std::move(fin);
    return j;
}

}  // namespace gbm
