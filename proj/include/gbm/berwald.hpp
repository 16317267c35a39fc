#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "gbm/averaging.hpp"
#include "gbm/chain.hpp"
#include "gbm/metric.hpp"
#include "gbm/quadrature.hpp"
#include "gbm/torsion.hpp"

namespace gbm {

// ---------------------------------------------------------------------------
// Grid over a coordinate box.
// ---------------------------------------------------------------------------

struct Box {
    Vec lo;
    Vec hi;

    bool contains(const Vec& x, double slack = 1e-12) const {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double pad = slack * (1.0 + hi(i) - lo(i));
            if (x(i) < lo(i) - pad || x(i) > hi(i) + pad) return false;
        }
        return true;
    }
};

// Tensor-product grid with `res` points per axis, lexicographic order (first
// coordinate slowest).
struct Grid {
    Box box;
    int res = 5;

    int dim() const { return static_cast<int>(box.lo.size()); }

    int size() const {
        int s = 1;
        for (int i = 0; i < dim(); ++i) s *= res;
        return s;
    }

    std::vector<int> multi_index(int flat) const {
        std::vector<int> idx(static_cast<std::size_t>(dim()));
        for (int i = dim() - 1; i >= 0; --i) {
            idx[static_cast<std::size_t>(i)] = flat % res;
            flat /= res;
        }
        return idx;
    }

    ChartPoint point(int flat) const {
        const auto idx = multi_index(flat);
        Vec x(dim());
        for (int i = 0; i < dim(); ++i) {
            const double t = res > 1 ? static_cast<double>(idx[static_cast<std::size_t>(i)]) / (res - 1) : 0.0;
            x(i) = box.lo(i) + t * (box.hi(i) - box.lo(i));
        }
        return {x};
    }

    std::vector<ChartPoint> points() const {
        std::vector<ChartPoint> out;
        for (int k = 0; k < size(); ++k) out.push_back(point(k));
        return out;
    }

    // Pairs of flat indices that differ by one step along one axis.
    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        for (int k = 0; k < size(); ++k) {
            const auto idx = multi_index(k);
            int stride = 1;
            for (int i = dim() - 1; i >= 0; --i) {
                if (idx[static_cast<std::size_t>(i)] + 1 < res) out.emplace_back(k, k + stride);
                stride *= res;
            }
        }
        return out;
    }

    Grid refined() const { return Grid{box, 2 * res - 1}; }
};

inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Runs body(i) for i in [0, count) on a pool of workers. Results must be
// written to per-index slots; the first exception is rethrown.
inline void parallel_for(int count, int threads, const std::function<void(int)>& body) {
    int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min(workers, std::max(count, 1));
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count || failed.load()) return;
                try {
                    body(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Tangent-space classification.
// ---------------------------------------------------------------------------

struct TangentClassification {
    Route route = Route::chain;
    double ratio_spread = 0.0;   // (max − min)/mean of F/F* over the pool
    bool ratio_constant = false;
};

inline TangentClassification classify_pool(std::span<const PooledBlock> pool, const AveragedMetricData& avg,
                                           double tol) {
    TangentClassification c;
    const bool all_vertical = std::all_of(pool.begin(), pool.end(), [](const PooledBlock& b) { return b.vertical; });
    const bool all_horizontal =
        std::all_of(pool.begin(), pool.end(), [](const PooledBlock& b) { return b.horizontal; });
    c.route = all_vertical ? Route::vertical_contact
                           : (all_horizontal ? Route::horizontal_contact : Route::chain);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    double sum = 0.0;
    for (const auto& pb : pool) {
        const double r = pb.block.F / averaged_norm(avg, pb.block.v.comps);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
        sum += r;
    }
    const double mean = pool.empty() ? 1.0 : sum / static_cast<double>(pool.size());
    c.ratio_spread = pool.empty() ? 0.0 : (hi - lo) / mean;
    c.ratio_constant = c.ratio_spread < tol;
    return c;
}

// Case analysis over a direction pool (orthonormal-frame unit vectors).
inline TangentClassification classify_tangent_space(const MetricFamily& family, const AveragedMetricData& avg,
                                                    const std::vector<Vec>& directions, double tol_contact) {
    const auto pool = build_pool(family, avg, directions, tol_contact);
    return classify_pool(pool, avg, tol_contact);
}

// ---------------------------------------------------------------------------
// Connection from torsion and parallel transport.
// ---------------------------------------------------------------------------

// Γ^r_ij = Γ*^r_ij − ½(T^l_jk γ^{kr} γ_il + T^l_ik γ^{kr} γ_jl − T^r_ij), with
// T in chart components.
inline Tensor3 reconstruct_connection(const AveragedMetricData& avg, const TorsionTensor& torsion_chart) {
    if (torsion_chart.frame != FrameTag::chart) {
        throw Error(ErrorCode::invalid_argument, "connection reconstruction expects chart components");
    }
    const int n = avg.dim();
    const Tensor3 T = to_full(torsion_chart);
    const Mat& g = avg.gamma;
    const Mat& gi = avg.gamma_inv;
    // lowered(i, j, k) = T^l_jk γ_il
    Tensor3 lowered(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                double acc = 0.0;
                for (int l = 0; l < n; ++l) acc += T(l, j, k) * g(i, l);
                lowered(i, j, k) = acc;
            }
    Tensor3 out(n);
    for (int r = 0; r < n; ++r)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int k = 0; k < n; ++k) acc += (lowered(i, j, k) + lowered(j, i, k)) * gi(k, r);
                out(r, i, j) = avg.christoffel(r, i, j) - 0.5 * (acc - T(r, i, j));
            }
    return out;
}

using ConnectionField = std::function<Tensor3(const Vec& x)>;
using AveragedField = std::function<AveragedMetricData(const Vec& x)>;
using TorsionField = std::function<TorsionTensor(const Vec& x)>;

inline ConnectionField make_connection_field(AveragedField gamma_field, TorsionField torsion_field) {
    return [gamma_field = std::move(gamma_field), torsion_field = std::move(torsion_field)](const Vec& x) {
        return reconstruct_connection(gamma_field(x), torsion_field(x));
    };
}

struct TransportResult {
    double max_drift = 0.0;              // max |F(X(t)) − F(v0)| over all v0
    std::vector<Vec> final_vectors;      // X at the end of the curve, one per v0
};

// Integrates (X^k)' = −(c^i)' X^j Γ^k_ij(c) along a polyline with fixed-step
// RK4, ceil(steps_per_unit·length) steps per segment, transporting every v0
// with the same connection evaluations.
inline TransportResult transport(const MetricFamily& family, const ConnectionField& connection,
                                 const std::vector<Vec>& polyline, const std::vector<Vec>& v0s, int steps_per_unit,
                                 const Box* chart = nullptr) {
    if (polyline.size() < 2) throw Error(ErrorCode::invalid_argument, "curve needs at least two vertices");
    for (const Vec& x : polyline) {
        if (chart && !chart->contains(x)) throw Error(ErrorCode::curve_leaves_chart, "curve vertex outside chart");
    }
    const int n = family_dim(family);
    auto F_at = [&](const Vec& x, const Vec& y) { return LocalMetric(family, ChartPoint{x}, false).F(y); };
    std::vector<Vec> X = v0s;
    std::vector<double> F0;
    for (const Vec& v : v0s) F0.push_back(F_at(polyline.front(), v));
    TransportResult out;

    auto rhs = [n](const Tensor3& G, const Vec& dc, const Vec& x) {
        Vec d = Vec::Zero(n);
        for (int k = 0; k < n; ++k) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) acc += dc(i) * x(j) * G(k, i, j);
            d(k) = -acc;
        }
        return d;
    };

    for (std::size_t s = 0; s + 1 < polyline.size(); ++s) {
        const Vec a = polyline[s];
        const Vec dc = polyline[s + 1] - a;
        const int steps = std::max(1, static_cast<int>(std::ceil(steps_per_unit * dc.norm())));
        const double h = 1.0 / steps;
        Tensor3 G0 = connection(a);
        for (int st = 0; st < steps; ++st) {
            const double t = st * h;
            const Tensor3 Gm = connection(a + (t + 0.5 * h) * dc);
            const Tensor3 G1 = connection(a + (t + h) * dc);
            for (std::size_t q = 0; q < X.size(); ++q) {
                const Vec k1 = rhs(G0, dc, X[q]);
                const Vec k2 = rhs(Gm, dc, X[q] + 0.5 * h * k1);
                const Vec k3 = rhs(Gm, dc, X[q] + 0.5 * h * k2);
                const Vec k4 = rhs(G1, dc, X[q] + h * k3);
                X[q] += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                const double drift = std::abs(F_at(a + (t + h) * dc, X[q]) - F0[q]);
                out.max_drift = std::max(out.max_drift, drift);
            }
            G0 = G1;
        }
    }
    out.final_vectors = X;
    return out;
}

// Finslerian length drift of parallel transport along `curve` for the
// connection rebuilt from γ and the torsion field.
inline double validate_connection(const MetricFamily& family, AveragedField gamma_field, TorsionField torsion_field,
                                  const std::vector<Vec>& curve, const Vec& v0, int steps_per_unit,
                                  const Box* chart = nullptr) {
    const auto conn = make_connection_field(std::move(gamma_field), std::move(torsion_field));
    return transport(family, conn, curve, {v0}, steps_per_unit, chart).max_drift;
}

// ---------------------------------------------------------------------------
// Grid decision.
// ---------------------------------------------------------------------------

enum class GlobalVerdict { riemannian, classical_berwald, generalized_berwald, not_generalized_berwald, inconclusive };

inline const char* to_string(GlobalVerdict v) {
    switch (v) {
        case GlobalVerdict::riemannian: return "riemannian";
        case GlobalVerdict::classical_berwald: return "classical_berwald";
        case GlobalVerdict::generalized_berwald: return "generalized_berwald";
        case GlobalVerdict::not_generalized_berwald: return "not_generalized_berwald";
        case GlobalVerdict::inconclusive: return "inconclusive";
    }
    return "?";
}

enum class PointStatus { pass, fail, marginal };

inline const char* to_string(PointStatus s) {
    switch (s) {
        case PointStatus::pass: return "pass";
        case PointStatus::fail: return "fail";
        case PointStatus::marginal: return "marginal";
    }
    return "?";
}

struct DecideOptions {
    int quad_nodes = 0;          // 0: default rule for the dimension
    int selection_dirs = 0;      // 0: 720 (n = 2) or 1026 (n = 3)
    int random_batch = 32;
    int validation_dirs = 64;
    std::uint64_t seed = 1;
    double tol_contact = 1e-9;
    double tol_res = 1e-7;
    double not_gb_trigger = 1e-3;
    double agreement_tol = 1e-6;      // relative disagreement of the two chain runs
    double zero_torsion_tol = 1e-7;   // chart ∞-norm below which torsion counts as zero
    double gamma_scale = 1.0;
    bool transport_check = true;
    int transport_steps_per_unit = 1000;
    bool continuity_refinement = true;
    int threads = 0;
};

struct PointVerdict {
    ChartPoint p;
    Route route = Route::chain;
    PointStatus status = PointStatus::pass;
    TorsionTensor torsion_chart;
    TorsionTensor torsion_frame;
    double residual_max = 0.0;
    ExtremalDiagnostics chain_diag;
    // F/F* spread over the pool (meaningful for the vertical-contact route)
    double ratio_spread = 0.0;
    bool ratio_constant = false;
    // Vertical contact directions found and the largest relative horizontal
    // derivative among them (must vanish for a generalized Berwald metric).
    int vertical_contacts = 0;
    double contact_violation = 0.0;
    bool contact_consistent = true;
    // Second chain run on a disjoint selection pool.
    double agreement = 0.0;
    // Stacked least-squares witness on the base pool and on the refined pool.
    double witness = 0.0;
    double witness_refined = 0.0;
    double witness_rss = 0.0;
    double witness_rss_refined = 0.0;
    double oracle_gap = 0.0;   // ‖T_chain − T_oracle‖ / ‖T_oracle‖
};

struct ContinuityStatistic {
    double value = 0.0;
    double refined_value = 0.0;
    bool refined = false;
    bool diverging = false;
};

struct ClassificationReport {
    std::vector<PointVerdict> verdicts;
    GlobalVerdict global = GlobalVerdict::inconclusive;
    DecideOptions options;
    Grid grid;
    ContinuityStatistic continuity;
    double transport_drift = 0.0;
    bool transport_checked = false;
    std::vector<std::string> notes;
};

// max over grid edges of ‖T(p) − T(q)‖ / |p − q|, chart components.
inline double continuity_probe(const std::vector<TorsionTensor>& torsion, const Grid& grid) {
    double worst = 0.0;
    for (const auto& [i, j] : grid.edges()) {
        const double dist = (grid.point(i).coords - grid.point(j).coords).norm();
        if (dist == 0.0) continue;
        const double diff = (torsion[static_cast<std::size_t>(i)].comps - torsion[static_cast<std::size_t>(j)].comps).norm();
        worst = std::max(worst, diff / dist);
    }
    return worst;
}

inline double continuity_probe(const std::vector<PointVerdict>& verdicts, const Grid& grid) {
    std::vector<TorsionTensor> t;
    for (const auto& v : verdicts) t.push_back(v.torsion_chart);
    return continuity_probe(t, grid);
}

namespace detail {

// Roots of κ(θ) = S(0,0) between consecutive equispaced pool directions on
// S¹ (n = 2), refined by bisection. Pool entries [0, count) must be the
// equispaced lattice.
inline std::vector<Vec> contact_roots_circle(const LocalMetric& local, const AveragedMetricData& avg,
                                             std::span<const PooledBlock> pool, int count, double offset) {
    std::vector<Vec> roots;
    auto kappa_at = [&](double theta) {
        Vec u(2);
        u << std::cos(theta), std::sin(theta);
        const Vec y = avg.frame * u;
        const MetricJet j = local.jet(y);
        const Vec yo = avg.frame.inverse() * y;
        const Vec Fo = avg.frame.transpose() * j.dFdy;
        return (yo(0) * Fo(1) - yo(1) * Fo(0)) / j.F;
    };
    const double step = 2.0 * std::numbers::pi / count;
    for (int k = 0; k < count; ++k) {
        const double k0 = pool[static_cast<std::size_t>(k)].block.S(0, 0);
        const double k1 = pool[static_cast<std::size_t>((k + 1) % count)].block.S(0, 0);
        if (k0 == 0.0) {
            roots.push_back(pool[static_cast<std::size_t>(k)].block.v.comps);
            continue;
        }
        if ((k0 < 0.0) == (k1 < 0.0) || k1 == 0.0) continue;
        double lo = step * (k + offset);
        double hi = lo + step;
        double flo = kappa_at(lo);
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = kappa_at(mid);
            if ((fm < 0.0) == (flo < 0.0)) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        const double th = 0.5 * (lo + hi);
        Vec u(2);
        u << std::cos(th), std::sin(th);
        roots.push_back(avg.frame * u);
    }
    return roots;
}

struct PointWork {
    PointVerdict verdict;
};

inline PointVerdict analyze_point(const MetricFamily& family, const ChartPoint& p, const SphereQuadrature& quad,
                                  const DecideOptions& opts, std::uint64_t seed) {
    const int n = p.dim();
    AveragingOptions aopts;
    aopts.gamma_scale = opts.gamma_scale;
    const AveragedMetricData avg = averaged_data(family, p, quad, aopts);
    LocalMetric local(family, p);

    DirectionSampler selA;
    selA.deterministic = opts.selection_dirs;
    selA.offset = 0.0;
    selA.random = opts.random_batch;
    selA.seed = mix_seed(seed ^ 0xA);
    DirectionSampler selB = selA;
    selB.offset = 0.5;
    selB.seed = mix_seed(seed ^ 0xB);
    const DirectionSampler val = validation_sampler(mix_seed(seed ^ 0xC), opts.validation_dirs);

    const auto dirsA = selA.directions(n);
    const auto dirsB = selB.directions(n);
    const auto poolA = build_pool(family, avg, dirsA, opts.tol_contact);
    const auto poolB = build_pool(family, avg, dirsB, opts.tol_contact);
    const auto poolV = build_pool(family, avg, val.directions(n), opts.tol_contact);

    std::vector<PooledBlock> classified = poolA;
    classified.insert(classified.end(), poolV.begin(), poolV.end());
    const TangentClassification cls = classify_pool(classified, avg, opts.tol_contact);

    PointVerdict v;
    v.p = p;
    v.route = cls.route;
    v.ratio_spread = cls.ratio_spread;
    v.ratio_constant = cls.ratio_constant;
    v.torsion_frame = TorsionTensor(n, FrameTag::orthonormal);

    // Vertical contact directions must be horizontal contact. At such v every
    // torsion gives g(T, v) = X^{h*}F(v), so the residual tolerance applies.
    auto check_contact = [&](const Vec& hchart, double F) {
        ++v.vertical_contacts;
        v.contact_violation = std::max(v.contact_violation, hchart.cwiseAbs().maxCoeff() / F);
    };
    for (const auto* pool : {&poolA, &poolB, &poolV}) {
        for (const auto& pb : *pool) {
            if (pb.vertical) check_contact(pb.hchart, pb.block.F);
        }
    }
    if (n == 2 && cls.route != Route::vertical_contact) {
        const int count = opts.selection_dirs > 0 ? opts.selection_dirs : 720;
        for (const Vec& y : contact_roots_circle(local, avg, poolA, count, 0.0)) {
            const MetricJet j = local.jet(y);
            if (contact_margin(j, avg, y) < opts.tol_contact) check_contact(horizontal_derivative(j, avg, y), j.F);
        }
    }
    v.contact_consistent = v.contact_violation < opts.tol_res;

    ExtremalOptions eopts;
    eopts.tol_contact = opts.tol_contact;
    eopts.tol_res = opts.tol_res;

    std::vector<PooledBlock> refined = classified;
    refined.insert(refined.end(), poolB.begin(), poolB.end());

    if (cls.route == Route::chain) {
        const ExtremalResult ra = extremal_torsion(poolA, poolV, eopts);
        const ExtremalResult rb = extremal_torsion(poolB, poolV, eopts);
        v.torsion_frame = ra.torsion;
        v.chain_diag = ra.diag;
        v.residual_max = std::max(ra.diag.final_residual, rb.diag.final_residual);
        const double scale = std::max({ra.torsion.norm(), rb.torsion.norm(), 1e-300});
        v.agreement = (ra.torsion.comps - rb.torsion.comps).norm() / scale;
        if (ra.torsion.norm() == 0.0 && rb.torsion.norm() == 0.0) v.agreement = 0.0;
        v.chain_diag.converged = ra.diag.converged && rb.diag.converged;
    } else {
        v.chain_diag.route = cls.route;
        v.residual_max = max_relative_residual(classified, v.torsion_frame);
        v.chain_diag.final_residual = v.residual_max;
        v.chain_diag.converged = v.residual_max < opts.tol_res;
    }
    v.torsion_chart = to_chart(v.torsion_frame, avg.frame);

    const OracleResult base = oracle_min_norm(std::span<const PooledBlock>(classified));
    const OracleResult fine = oracle_min_norm(std::span<const PooledBlock>(refined));
    v.witness = base.max_residual;
    v.witness_refined = fine.max_residual;
    v.witness_rss = base.rss;
    v.witness_rss_refined = fine.rss;
    const double on = base.torsion.norm();
    v.oracle_gap = on > 0.0 ? (base.torsion.comps - v.torsion_frame.comps).norm() / on
                            : v.torsion_frame.norm();

    if (!v.contact_consistent) {
        v.status = PointStatus::fail;
    } else if (v.chain_diag.converged && v.agreement < opts.agreement_tol) {
        v.status = PointStatus::pass;
    } else if (v.witness > opts.not_gb_trigger && v.witness_refined > opts.not_gb_trigger) {
        v.status = PointStatus::fail;
    } else {
        v.status = PointStatus::marginal;
    }
    return v;
}

// Light-weight torsion evaluation used along transport curves and on the
// refined continuity grid.
inline TorsionTensor light_torsion(const MetricFamily& family, const Vec& x, const SphereQuadrature& quad,
                                   const DecideOptions& opts) {
    AveragingOptions aopts;
    aopts.gamma_scale = opts.gamma_scale;
    const AveragedMetricData avg = averaged_data(family, ChartPoint{x}, quad, aopts);
    DirectionSampler sel;
    sel.deterministic = avg.dim() == 2 ? 24 : 96;
    sel.random = 0;
    const DirectionSampler val = validation_sampler(opts.seed, 16);
    ExtremalOptions eopts;
    eopts.tol_contact = opts.tol_contact;
    eopts.tol_res = opts.tol_res;
    const ExtremalResult r = extremal_torsion(family, avg, sel, val, eopts);
    return to_chart(r.torsion, avg.frame);
}

}  // namespace detail

inline ClassificationReport decide(const MetricFamily& family, const Grid& grid, const DecideOptions& opts = {}) {
    if (grid.dim() != family_dim(family)) throw Error(ErrorCode::dimension_mismatch, "grid dimension");
    if (grid.res < 2) throw Error(ErrorCode::invalid_argument, "grid resolution must be at least 2");
    const SphereQuadrature quad = default_quadrature(grid.dim(), opts.quad_nodes);
    ClassificationReport rep;
    rep.options = opts;
    rep.grid = grid;
    rep.verdicts.resize(static_cast<std::size_t>(grid.size()));
    parallel_for(grid.size(), opts.threads, [&](int k) {
        rep.verdicts[static_cast<std::size_t>(k)] =
            detail::analyze_point(family, grid.point(k), quad, opts, mix_seed(opts.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(k)));
    });

    const auto& vs = rep.verdicts;
    const bool any_fail = std::any_of(vs.begin(), vs.end(), [](const PointVerdict& v) { return v.status == PointStatus::fail; });
    const bool any_marginal =
        std::any_of(vs.begin(), vs.end(), [](const PointVerdict& v) { return v.status == PointStatus::marginal; });
    const bool all_vertical =
        std::all_of(vs.begin(), vs.end(), [](const PointVerdict& v) { return v.route == Route::vertical_contact; });
    const bool any_vertical =
        std::any_of(vs.begin(), vs.end(), [](const PointVerdict& v) { return v.route == Route::vertical_contact; });
    const bool ratios_constant = std::all_of(vs.begin(), vs.end(), [](const PointVerdict& v) { return v.ratio_constant; });

    if (any_fail) {
        rep.global = GlobalVerdict::not_generalized_berwald;
        if (std::any_of(vs.begin(), vs.end(), [](const PointVerdict& v) { return !v.contact_consistent; })) {
            rep.notes.push_back("vertical contact direction that is not horizontal contact");
        }
    } else if (all_vertical && ratios_constant) {
        rep.global = GlobalVerdict::riemannian;
    } else if (any_marginal || any_vertical) {
        rep.global = GlobalVerdict::inconclusive;
        if (any_vertical) rep.notes.push_back("vertical-contact tangent spaces mixed with others");
    } else {
        double tmax = 0.0;
        for (const auto& v : vs) tmax = std::max(tmax, v.torsion_chart.comps.cwiseAbs().maxCoeff());
        rep.global = tmax < opts.zero_torsion_tol ? GlobalVerdict::classical_berwald : GlobalVerdict::generalized_berwald;
    }

    rep.continuity.value = continuity_probe(rep.verdicts, grid);

    const bool berwald_type =
        rep.global == GlobalVerdict::generalized_berwald || rep.global == GlobalVerdict::classical_berwald;
    if (berwald_type && opts.continuity_refinement) {
        const Grid fine = grid.refined();
        std::vector<TorsionTensor> t(static_cast<std::size_t>(fine.size()));
        parallel_for(fine.size(), opts.threads, [&](int k) {
            t[static_cast<std::size_t>(k)] = detail::light_torsion(family, fine.point(k).coords, quad, opts);
        });
        rep.continuity.refined = true;
        rep.continuity.refined_value = continuity_probe(t, fine);
        rep.continuity.diverging =
            rep.continuity.refined_value > 2.0 * rep.continuity.value + 10.0 * opts.zero_torsion_tol;
        if (rep.continuity.diverging) rep.notes.push_back("torsion difference quotients grow under refinement");
    }

    if (berwald_type && opts.transport_check) {
        const auto edges = grid.edges();
        std::vector<double> drift(edges.size(), 0.0);
        AveragingOptions aopts;
        aopts.gamma_scale = opts.gamma_scale;
        const bool zero_torsion = rep.global == GlobalVerdict::classical_berwald;
        parallel_for(static_cast<int>(edges.size()), opts.threads, [&](int e) {
            const auto [i, j] = edges[static_cast<std::size_t>(e)];
            const Vec a = grid.point(i).coords;
            const Vec b = grid.point(j).coords;
            const AveragedField gf = [&](const Vec& x) { return averaged_data(family, ChartPoint{x}, quad, aopts); };
            const TorsionField tf = [&](const Vec& x) {
                if (zero_torsion) return TorsionTensor(grid.dim(), FrameTag::chart);
                return detail::light_torsion(family, x, quad, opts);
            };
            // Two F-unit starting vectors: first orthonormal axis and a diagonal.
            const AveragedMetricData avg0 = gf(a);
            LocalMetric local(family, ChartPoint{a}, false);
            std::vector<Vec> v0s;
            for (int q = 0; q < 2; ++q) {
                Vec u = Vec::Zero(grid.dim());
                u(0) = 1.0;
                if (q == 1) u.setConstant(1.0 / std::sqrt(static_cast<double>(grid.dim())));
                Vec y = avg0.frame * u;
                y /= local.F(y);
                v0s.push_back(y);
            }
            drift[static_cast<std::size_t>(e)] =
                transport(family, make_connection_field(gf, tf), {a, b}, v0s, opts.transport_steps_per_unit, &grid.box)
                    .max_drift;
        });
        rep.transport_checked = true;
        for (double d : drift) rep.transport_drift = std::max(rep.transport_drift, d);
        if (!(rep.transport_drift < 10.0 * opts.tol_res)) {
            rep.notes.push_back("parallel transport drift exceeds 10·tol_res");
            rep.global = GlobalVerdict::inconclusive;
        }
    }
    return rep;
}

}  // namespace gbm
