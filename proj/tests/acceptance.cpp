// Acceptance suite: one line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "gbm/cli.hpp"
#include "gbm/gbm.hpp"

using namespace gbm;
namespace fs = std::filesystem;

namespace {

Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

Grid unit_grid(int n, int res) {
    Grid g;
    g.box.lo = Vec::Zero(n);
    g.box.hi = Vec::Ones(n);
    g.res = res;
    return g;
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " FAILED:" << what << ";";
        }
    }
};

struct Named {
    std::string name;
    MetricFamily family;
    GlobalVerdict expected;
};

std::vector<Named> five_families() {
    namespace f = families;
    return {{"euclidean", f::euclidean(), GlobalVerdict::riemannian},
            {"conformal", f::conformal_riemannian(), GlobalVerdict::riemannian},
            {"minkowski_randers", f::minkowski_randers(), GlobalVerdict::classical_berwald},
            {"frame_randers", f::frame_randers(), GlobalVerdict::generalized_berwald},
            {"varying_randers", f::varying_randers(), GlobalVerdict::not_generalized_berwald}};
}

Vec random_vec(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> nd;
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = nd(rng);
    return v;
}

// Consistent synthetic system with full-rank S blocks, F = 1, identity chart map.
std::vector<PooledBlock> synthetic_pool(std::mt19937_64& rng, int n, int blocks) {
    const int N = torsion_size(n);
    const Vec truth = random_vec(rng, N);
    std::vector<PooledBlock> pool;
    for (int k = 0; k < blocks; ++k) {
        PooledBlock pb;
        pb.block.S = Mat::Zero(n, N);
        for (int i = 0; i < n; ++i) pb.block.S.row(i) = random_vec(rng, N).transpose();
        pb.block.rhs = -pb.block.S * truth;
        pb.block.v = TangentVector{ChartPoint{Vec::Zero(n)}, random_vec(rng, n)};
        pb.block.F = 1.0;
        pb.block.frame = FrameTag::orthonormal;
        pb.block.to_chart = Mat::Identity(n, n);
        pb.margin = 1.0;
        pb.hchart = pb.block.rhs;
        pool.push_back(std::move(pb));
    }
    return pool;
}

// A produced chain and the dimension it was produced in.
using Chain = std::pair<int, ExtremalDiagnostics>;

double rel_gap(const TorsionTensor& a, const TorsionTensor& b) {
    const double scale = b.norm();
    const double d = (a.comps - b.comps).norm();
    return scale > 0.0 ? d / scale : d;
}

DecideOptions fast_options() {
    DecideOptions o;
    o.transport_check = false;
    return o;
}

// ---------------------------------------------------------------------------

void averaged_metric_exactness(Outcome& out) {
    const double two_pi = 2.0 * std::numbers::pi;
    const auto quad = circle_rule(256);
    const Mat e = averaged_metric(families::euclidean(), ChartPoint{vec({0.2, -0.4})}, quad);
    const double de = (e - two_pi * Mat::Identity(2, 2)).cwiseAbs().maxCoeff();
    const Mat r = averaged_metric(families::constant_riemannian(), ChartPoint{vec({0.0, 0.0})}, quad);
    Mat want = Mat::Zero(2, 2);
    want(0, 0) = 4.0 * two_pi;
    want(1, 1) = two_pi;
    const double dr = (r - want).cwiseAbs().maxCoeff();
    out.detail << "euclidean err " << sci(de) << ", diag(4,1) err " << sci(dr);
    out.require(de < 1e-10, "euclidean");
    out.require(dr < 1e-8, "diag(4,1)");
}

void riemannian_detection(Outcome& out) {
    for (const auto& nf : five_families()) {
        if (nf.expected != GlobalVerdict::riemannian) continue;
        const ClassificationReport rep = decide(nf.family, unit_grid(2, 5), fast_options());
        out.require(rep.global == GlobalVerdict::riemannian, nf.name + " verdict " + to_string(rep.global));
        int non_vertical = 0;
        double spread = 0.0;
        const auto quad = default_quadrature(2);
        for (const auto& p : rep.grid.points()) {
            const AveragedMetricData avg = averaged_data(nf.family, p, quad);
            LocalMetric local(nf.family, p);
            double lo = 1e300, hi = 0.0;
            for (const Vec& u : equispaced_circle(720)) {
                const Vec y = avg.frame * u;
                const MetricJet j = local.jet(y);
                non_vertical += !is_vertical_contact(j, avg, TangentVector{p, y}, 1e-9);
                const double ratio = j.F / averaged_norm(avg, y);
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
            spread = std::max(spread, (hi - lo) / hi);
        }
        out.detail << nf.name << ": " << to_string(rep.global) << ", non-vertical " << non_vertical
                   << ", F/F* spread " << sci(spread) << "; ";
        out.require(non_vertical == 0, nf.name + " non-vertical directions");
        out.require(spread < 1e-9, nf.name + " ratio spread");
    }
}

void classical_detection(Outcome& out) {
    const auto fam = families::minkowski_randers();
    const ClassificationReport rep = decide(fam, unit_grid(2, 5), fast_options());
    double tmax = 0.0;
    for (const auto& v : rep.verdicts) tmax = std::max(tmax, v.torsion_chart.norm());
    int non_horizontal = 0;
    const auto quad = default_quadrature(2);
    for (const auto& p : rep.grid.points()) {
        const AveragedMetricData avg = averaged_data(fam, p, quad);
        LocalMetric local(fam, p);
        for (const Vec& u : equispaced_circle(720)) {
            const Vec y = avg.frame * u;
            const MetricJet j = local.jet(y);
            non_horizontal += !is_horizontal_contact(horizontal_derivative(j, avg, y), j.F, 1e-9);
        }
    }
    out.detail << to_string(rep.global) << ", max |T| " << sci(tmax) << ", non-horizontal " << non_horizontal;
    out.require(rep.global == GlobalVerdict::classical_berwald, "verdict");
    out.require(tmax < 1e-9, "torsion");
    out.require(non_horizontal == 0, "horizontal contact");
}

void generalized_recovery(Outcome& out) {
    const auto fam = families::frame_randers();
    DecideOptions opts;
    const ClassificationReport rep = decide(fam, unit_grid(2, 5), opts);
    const auto quad = default_quadrature(2);
    double truth_err = 0.0, residual = 0.0;
    for (const auto& v : rep.verdicts) {
        const TorsionTensor truth = frame_ground_truth_torsion(fam, v.p);
        truth_err = std::max(truth_err, (v.torsion_chart.comps - truth.comps).cwiseAbs().maxCoeff());
        // Compatibility of the reconstructed connection, evaluated directly.
        const AveragedMetricData avg = averaged_data(fam, v.p, quad);
        const Tensor3 G = reconstruct_connection(avg, v.torsion_chart);
        LocalMetric local(fam, v.p);
        for (const Vec& u : validation_sampler(opts.seed ^ 0x5eed, opts.validation_dirs).directions(2)) {
            const Vec y = avg.frame * u;
            const MetricJet j = local.jet(y);
            Vec c = j.dFdx;
            for (int i = 0; i < 2; ++i)
                for (int a = 0; a < 2; ++a)
                    for (int k = 0; k < 2; ++k) c(i) -= y(a) * G(k, i, a) * j.dFdy(k);
            residual = std::max(residual, c.cwiseAbs().maxCoeff() / j.F);
        }
    }
    out.detail << to_string(rep.global) << ", truth err " << sci(truth_err) << ", validation residual "
               << sci(residual) << ", transport drift " << sci(rep.transport_drift);
    out.require(rep.global == GlobalVerdict::generalized_berwald, "verdict");
    out.require(truth_err < 1e-6, "ground truth");
    out.require(residual < 1e-7, "validation residual");
    out.require(rep.transport_checked && rep.transport_drift < 1e-6, "transport drift");
}

void negative_control(Outcome& out) {
    const ClassificationReport rep = decide(families::varying_randers(), unit_grid(2, 5), DecideOptions{});
    int witnessed = 0, decreasing = 0;
    double best = 0.0;
    for (const auto& v : rep.verdicts) {
        if (v.witness > 1e-3 && v.witness_refined > 1e-3) ++witnessed;
        if (v.witness_rss_refined < v.witness_rss) ++decreasing;
        best = std::max(best, v.witness);
    }
    out.detail << to_string(rep.global) << ", witnessed points " << witnessed << "/" << rep.verdicts.size()
               << ", max witness " << sci(best) << ", rss decreases " << decreasing;
    out.require(rep.global == GlobalVerdict::not_generalized_berwald, "verdict");
    out.require(witnessed >= 1, "witness");
    out.require(decreasing == 0, "rss monotone");
}

void oracle_equivalence(Outcome& out, std::vector<Chain>& chains) {
    double worst = 0.0;
    const auto fam = families::frame_randers();
    const auto quad = default_quadrature(2);
    for (const auto& p : unit_grid(2, 5).points()) {
        const AveragedMetricData avg = averaged_data(fam, p, quad);
        DirectionSampler sel;
        const ExtremalResult r = extremal_torsion(fam, avg, sel, validation_sampler(3), ExtremalOptions{});
        const auto pool = build_pool(fam, avg, sel.directions(2), 1e-9);
        worst = std::max(worst, rel_gap(r.torsion, oracle_min_norm(std::span<const PooledBlock>(pool)).torsion));
        chains.emplace_back(2, r.diag);
    }
    std::mt19937_64 rng(2024);
    double synth = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = trial % 2 ? 3 : 2;
        const auto pool = synthetic_pool(rng, n, n == 2 ? 1 + trial % 3 : 2 + trial % 4);
        const ExtremalResult r = extremal_torsion(pool, {}, ExtremalOptions{});
        synth = std::max(synth, rel_gap(r.torsion, oracle_min_norm(std::span<const PooledBlock>(pool)).torsion));
        chains.emplace_back(n, r.diag);
    }
    out.detail << "frame family gap " << sci(worst) << ", synthetic gap " << sci(synth);
    out.require(worst < 1e-8, "frame family");
    out.require(synth < 1e-8, "synthetic");
}

void chain_properties(Outcome& out, std::vector<Chain> chains) {
    for (const auto& nf : five_families()) {
        for (const auto& v : decide(nf.family, unit_grid(2, 3), fast_options()).verdicts) chains.emplace_back(2, v.chain_diag);
    }
    for (const auto& v : decide(families::frame_randers_3d(), unit_grid(3, 3), fast_options()).verdicts) {
        chains.emplace_back(3, v.chain_diag);
    }
    double defect = 0.0;
    int too_long = 0, non_monotone = 0, produced = 0;
    for (const auto& [n, d] : chains) {
        if (d.chain_length == 0) continue;
        ++produced;
        defect = std::max(defect, d.orthogonality_defect);
        too_long += d.chain_length > n * n * (n - 1) / 2;
        non_monotone += !d.monotone;
        for (std::size_t k = 1; k < d.chain_norms.size(); ++k) {
            non_monotone += d.chain_norms[k] < d.chain_norms[k - 1] * (1.0 - 1e-12);
        }
    }
    out.detail << produced << " chains, max orthogonality defect " << sci(defect) << ", over length " << too_long
               << ", non-monotone " << non_monotone;
    out.require(produced > 0, "no chains");
    out.require(defect < 1e-8, "orthogonality");
    out.require(too_long == 0, "length");
    out.require(non_monotone == 0, "monotone");
}

void rank_dichotomy(Outcome& out) {
    std::vector<Named> fams = five_families();
    fams.push_back({"frame_randers_3d", families::frame_randers_3d(), GlobalVerdict::generalized_berwald});
    int mismatch = 0, singular = 0, non_contact = 0;
    double min_ratio = 1e300;
    for (const auto& nf : fams) {
        const int n = family_dim(nf.family);
        const auto quad = default_quadrature(n);
        for (const auto& p : unit_grid(n, 3).points()) {
            const AveragedMetricData avg = averaged_data(nf.family, p, quad);
            LocalMetric local(nf.family, p);
            for (const Vec& u : deterministic_directions(n, 720)) {
                const Vec y = avg.frame * u;
                const TangentVector v{p, y};
                const MetricJet j = local.jet(y);
                const bool vertical = is_vertical_contact(j, avg, v, 1e-9);
                const ConstraintBlock blk = sigma(j, avg, v);
                mismatch += vertical != block_vanishes(blk, 1e-9);
                if (vertical) continue;
                ++non_contact;
                const Mat G = blk.S * blk.S.transpose();
                const double smin = Eigen::JacobiSVD<Mat>(G).singularValues().minCoeff();
                if (!(smin > 0.0)) ++singular;
                const double m = contact_margin(j, avg, y);
                min_ratio = std::min(min_ratio, smin / (m * m));
            }
        }
    }
    out.detail << "mismatches " << mismatch << ", non-contact directions " << non_contact << ", singular Gramians "
               << singular << ", min sigma_min/margin^2 " << sci(min_ratio);
    out.require(mismatch == 0, "dichotomy");
    out.require(singular == 0, "gramian");
}

void symmetry_invariance(Outcome& out) {
    const auto axis3 = parse_metric_spec("family = frame_minkowski; dim = 3\n"
                                         "frame = [[1, 0, 0], [0, exp(x1), 0], [0, 0, exp(0.5*x2)]]\n"
                                         "minkowski_b = [0.3, 0, 0]");
    struct Case {
        std::string name;
        MetricFamily family;
        Vec x;
        int axis;
    };
    const std::vector<Case> cases{{"randers_2d", families::minkowski_randers(), vec({0.5, 0.5}), 1},
                                  {"frame_randers", families::frame_randers(), vec({0.4, 0.7}), 1},
                                  {"axis_frame_3d", axis3, vec({0.3, 0.6, 0.1}), 1},
                                  {"axis_frame_3d", axis3, vec({0.3, 0.6, 0.1}), 2}};
    double worst = 0.0;
    int tested = 0;
    for (const auto& c : cases) {
        const int n = family_dim(c.family);
        const AveragedMetricData avg = averaged_data(c.family, ChartPoint{c.x}, default_quadrature(n));
        Mat phi = Mat::Identity(n, n);
        phi(c.axis, c.axis) = -1.0;
        const SymmetryReport rep = symmetry_invariance_check(c.family, avg, phi, deterministic_directions(n, 120));
        worst = std::max({worst, rep.null_space_residual, rep.identity_defect});
        tested += rep.null_dim;
        out.detail << c.name << " null vectors " << rep.null_dim << " residual " << sci(rep.null_space_residual)
                   << "; ";
    }
    out.require(worst < 1e-8, "invariance");
    out.require(tested > 0, "vacuous");
}

void scale_invariance(Outcome& out) {
    int changed = 0;
    double rel = 0.0, abs_small = 0.0;
    for (const auto& nf : five_families()) {
        DecideOptions a = fast_options();
        DecideOptions b = a;
        b.gamma_scale = 1e3;
        const auto ra = decide(nf.family, unit_grid(2, 5), a);
        const auto rb = decide(nf.family, unit_grid(2, 5), b);
        changed += ra.global != rb.global;
        // Residuals are already relative to F. Above tol_res the change is taken
        // relative to the residual; below it the values are rounding level and
        // the change is measured relative to F.
        auto compare = [&](double x, double y) {
            if (x > a.tol_res) {
                rel = std::max(rel, std::abs(x - y) / x);
            } else {
                abs_small = std::max(abs_small, std::abs(x - y));
            }
        };
        for (std::size_t k = 0; k < ra.verdicts.size(); ++k) {
            const auto& va = ra.verdicts[k];
            const auto& vb = rb.verdicts[k];
            compare(va.residual_max, vb.residual_max);
            compare(va.witness, vb.witness);
            compare(va.witness_refined, vb.witness_refined);
        }
    }
    out.detail << "verdict changes " << changed << ", max relative change of residuals above tol_res " << sci(rel)
               << ", max change of rounding-level residuals " << sci(abs_small);
    out.require(changed == 0, "verdicts");
    out.require(rel < 1e-9, "residuals");
    out.require(abs_small < 1e-9, "rounding-level residuals");
}

void determinism(Outcome& out) {
    const fs::path dir = fs::temp_directory_path() / "gbm_acceptance";
    fs::create_directories(dir);
    const std::string metrics = GBM_METRICS_DIR;
    RunConfig cfg;
    cfg.metric_path = metrics + "/frame_randers.gbm";
    cfg.out_path = (dir / "a.json").string();
    std::ostringstream err;
    const int rc1 = run(cfg, err);
    cfg.out_path = (dir / "b.json").string();
    const int rc2 = run(cfg, err);
    const bool same = read_text_file((dir / "a.json").string()) == read_text_file((dir / "b.json").string());
    out.detail << "same-seed reports identical: " << (same ? "yes" : "no") << "; ";
    out.require(rc1 == 0 && rc2 == 0, "exit codes " + std::to_string(rc1) + "," + std::to_string(rc2));
    out.require(same, "byte-identical");

    int disagreements = 0;
    for (const auto& nf : five_families()) {
        for (std::uint64_t seed : {1u, 2u, 99u}) {
            DecideOptions o = fast_options();
            o.seed = seed;
            const GlobalVerdict g = decide(nf.family, unit_grid(2, 5), o).global;
            disagreements += g != nf.expected;
        }
    }
    out.detail << "seed disagreements " << disagreements;
    out.require(disagreements == 0, "seed stability");
}

}  // namespace

int main() {
    std::vector<Chain> chains;
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"averaged-metric exactness", averaged_metric_exactness},
        {"riemannian detection", riemannian_detection},
        {"classical berwald detection", classical_detection},
        {"generalized berwald recovery", generalized_recovery},
        {"negative control", negative_control},
        {"oracle equivalence", [&](Outcome& o) { oracle_equivalence(o, chains); }},
        {"chain properties", [&](Outcome& o) { chain_properties(o, chains); }},
        {"rank dichotomy", rank_dichotomy},
        {"symmetry invariance", symmetry_invariance},
        {"scale invariance", scale_invariance},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome out;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[k].second(out);
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail << " exception: " << e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += !out.pass;
        std::printf("[%s] criterion %zu: %s (%.1fs) %s\n", out.pass ? "PASS" : "FAIL", k + 1,
                    criteria[k].first.c_str(), secs, out.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
