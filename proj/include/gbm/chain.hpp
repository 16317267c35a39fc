#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gbm/averaging.hpp"
#include "gbm/quadrature.hpp"
#include "gbm/torsion.hpp"

namespace gbm {

// Progress of the orthogonal-chain algorithm at one point. `chain` holds
// T⁰(v₁), T⁰(v₁,v₂), ...; `current` is its last element (or zero).
struct ChainState {
    TorsionTensor current;
    std::vector<TorsionTensor> chain;
    std::vector<TangentVector> used_refs;

    static ChainState empty(int n) {
        ChainState s;
        s.current = TorsionTensor(n, FrameTag::orthonormal);
        return s;
    }
};

struct ChainOptions {
    double cutoff = 1e-12;          // relative singular-value / pivot cutoff
    double infeasible_tol = 1e-8;   // relative defect of the augmented system
    double zero_residual = 1e-14;   // relative residual treated as zero
    double vertical_tol = 1e-9;
    // Solve for the displacement T − T_current instead of T itself. Both
    // forms give the same point.
    bool displacement_form = false;
};

struct StepResult {
    ChainState state;
    bool unchanged = false;
    bool infeasible = false;
    double inconsistency = 0.0;
};

// Closest point to the origin of A_p(v_m) ∩ {⟨T_k, T − T_current⟩ = 0 for
// every chain element T_k}. With an empty chain this is solve_reference.
inline StepResult chain_step(const ChainState& state, const ConstraintBlock& block, const ChainOptions& opts = {}) {
    StepResult out;
    out.state = state;
    const int n = block.dim();
    if (relative_residual(block, state.current) <= opts.zero_residual) {
        out.unchanged = true;
        return out;
    }
    if (block_vanishes(block, opts.vertical_tol)) {
        throw Error(ErrorCode::vertical_contact, "reference element is a vertical contact point");
    }
    if (state.chain.empty()) {
        const ReferenceSolution ref = solve_reference(block, opts.vertical_tol, opts.cutoff);
        out.state.current = ref.T0;
        out.state.chain.push_back(ref.T0);
        out.state.used_refs.push_back(block.v);
        return out;
    }

    // Rows are scaled to unit size so the rank cutoff treats them alike; the
    // feasible set is unchanged.
    const int m = static_cast<int>(state.chain.size());
    const int N = torsion_size(n);
    Mat A(n + m, N);
    Vec r(n + m);
    const double row_scale = 1.0 / block.F;
    A.topRows(n) = block.S * row_scale;
    const Vec& Tc = state.current.comps;
    if (opts.displacement_form) r.head(n) = -(block.rhs + block.S * Tc) * row_scale;
    else r.head(n) = -block.rhs * row_scale;
    for (int k = 0; k < m; ++k) {
        const Vec& tk = state.chain[static_cast<std::size_t>(k)].comps;
        const double nk = tk.norm();
        A.row(n + k) = tk.transpose() / nk;
        r(n + k) = opts.displacement_form ? 0.0 : tk.dot(Tc) / nk;
    }
    Vec x = min_norm_solve(A, r, opts.cutoff);
    const double defect = (A * x - r).norm();
    const double scale = std::max({r.norm(), A.norm() * x.norm(), 1e-300});
    out.inconsistency = defect / scale;
    if (out.inconsistency > opts.infeasible_tol) {
        out.infeasible = true;
        return out;
    }
    if (opts.displacement_form) x += Tc;
    out.state.current = TorsionTensor(n, x, block.frame);
    out.state.chain.push_back(out.state.current);
    out.state.used_refs.push_back(block.v);
    return out;
}

// Block plus its contact classification.
struct PooledBlock {
    ConstraintBlock block;
    double margin = 0.0;       // vertical-contact margin (log-gradient defect)
    bool vertical = false;
    bool horizontal = false;
    Vec hchart;                // X_i^{h*}F(v), chart components
};

enum class Route { vertical_contact, horizontal_contact, chain };

inline const char* to_string(Route r) {
    switch (r) {
        case Route::vertical_contact: return "vertical_contact";
        case Route::horizontal_contact: return "horizontal_contact";
        case Route::chain: return "chain";
    }
    return "?";
}

struct ExtremalOptions {
    double tol_contact = 1e-9;
    double tol_res = 1e-7;
    int max_steps = 0;   // 0: the torsion-space dimension
    ChainOptions chain;
};

struct ExtremalDiagnostics {
    Route route = Route::chain;
    int chain_length = 0;
    double orthogonality_defect = 0.0;
    double final_residual = 0.0;
    bool converged = false;
    bool infeasible = false;
    bool stalled = false;
    double inconsistency = 0.0;
    std::vector<double> chain_norms;
    bool monotone = true;
    std::vector<int> selected;   // selection-pool indices of v₁, v₂, ...
};

struct ExtremalResult {
    TorsionTensor torsion;   // orthonormal-frame components
    ChainState state;
    ExtremalDiagnostics diag;
};

inline double max_relative_residual(std::span<const PooledBlock> pool, const TorsionTensor& T) {
    double worst = 0.0;
    for (const auto& pb : pool) worst = std::max(worst, relative_residual(pb.block, T));
    return worst;
}

// Largest |⟨ΔT_m, T_k⟩| / (‖ΔT_m‖‖T_k‖) over k < m along a chain.
inline double orthogonality_defect(const std::vector<TorsionTensor>& chain) {
    double worst = 0.0;
    for (std::size_t m = 1; m < chain.size(); ++m) {
        const Vec inc = chain[m].comps - chain[m - 1].comps;
        const double ni = inc.norm();
        if (ni == 0.0) continue;
        for (std::size_t k = 0; k < m; ++k) {
            const double nk = chain[k].norm();
            if (nk == 0.0) continue;
            worst = std::max(worst, std::abs(inc.dot(chain[k].comps)) / (ni * nk));
        }
    }
    return worst;
}

// Pointwise algorithm over given selection and validation pools: route by
// contact type, then grow the orthogonal chain choosing at each step the
// eligible selection element with the largest residual, until the held-out
// validation residual drops below tol_res.
inline ExtremalResult extremal_torsion(std::span<const PooledBlock> selection, std::span<const PooledBlock> validation,
                                       const ExtremalOptions& opts = {}) {
    if (selection.empty()) throw Error(ErrorCode::invalid_argument, "empty selection pool");
    const int n = selection.front().block.dim();
    ExtremalResult res;
    res.state = ChainState::empty(n);
    res.torsion = res.state.current;

    const bool all_vertical =
        std::all_of(selection.begin(), selection.end(), [](const PooledBlock& b) { return b.vertical; }) &&
        std::all_of(validation.begin(), validation.end(), [](const PooledBlock& b) { return b.vertical; });
    const bool all_horizontal =
        std::all_of(selection.begin(), selection.end(), [](const PooledBlock& b) { return b.horizontal; }) &&
        std::all_of(validation.begin(), validation.end(), [](const PooledBlock& b) { return b.horizontal; });
    if (all_vertical || all_horizontal) {
        res.diag.route = all_vertical ? Route::vertical_contact : Route::horizontal_contact;
        res.diag.final_residual =
            std::max(max_relative_residual(selection, res.torsion), max_relative_residual(validation, res.torsion));
        res.diag.converged = res.diag.final_residual < opts.tol_res;
        return res;
    }

    res.diag.route = Route::chain;
    const int max_steps = opts.max_steps > 0 ? opts.max_steps : torsion_size(n);
    auto validation_residual = [&](const TorsionTensor& T) {
        return validation.empty() ? max_relative_residual(selection, T) : max_relative_residual(validation, T);
    };
    for (int step = 0; step < max_steps; ++step) {
        if (validation_residual(res.state.current) < opts.tol_res) break;
        int best = -1;
        double best_score = 0.0;
        for (std::size_t i = 0; i < selection.size(); ++i) {
            const PooledBlock& pb = selection[i];
            if (pb.vertical || pb.margin < 10.0 * opts.tol_contact) continue;
            const double score = relative_residual(pb.block, res.state.current);
            if (score > best_score) {
                best_score = score;
                best = static_cast<int>(i);
            }
        }
        if (best < 0 || best_score <= opts.chain.zero_residual) {
            res.diag.stalled = true;
            break;
        }
        const StepResult sr = chain_step(res.state, selection[static_cast<std::size_t>(best)].block, opts.chain);
        if (sr.infeasible) {
            res.diag.infeasible = true;
            res.diag.inconsistency = sr.inconsistency;
            break;
        }
        if (sr.unchanged) {
            res.diag.stalled = true;
            break;
        }
        res.state = sr.state;
        res.diag.selected.push_back(best);
    }
    res.torsion = res.state.current;
    res.diag.chain_length = static_cast<int>(res.state.chain.size());
    res.diag.orthogonality_defect = orthogonality_defect(res.state.chain);
    for (const auto& t : res.state.chain) res.diag.chain_norms.push_back(t.norm());
    for (std::size_t k = 1; k < res.diag.chain_norms.size(); ++k) {
        if (res.diag.chain_norms[k] < res.diag.chain_norms[k - 1] * (1.0 - 1e-12)) res.diag.monotone = false;
    }
    res.diag.final_residual = validation_residual(res.torsion);
    res.diag.converged = res.diag.final_residual < opts.tol_res;
    return res;
}

// ---------------------------------------------------------------------------
// Pools built from a metric family.
// ---------------------------------------------------------------------------

// Orthonormal-frame directions: `deterministic` lattice points (0 → 720 on
// S¹, 1026 on S²) rotated by `offset`, plus `random` seeded directions.
struct DirectionSampler {
    int deterministic = 0;
    double offset = 0.0;
    int random = 32;
    std::uint64_t seed = 1;

    std::vector<Vec> directions(int dim) const {
        const int count = deterministic > 0 ? deterministic : (dim == 2 ? 720 : 1026);
        std::vector<Vec> out = deterministic >= 0 ? deterministic_directions(dim, count, offset) : std::vector<Vec>{};
        for (auto& u : random_directions(dim, random, seed)) out.push_back(std::move(u));
        return out;
    }
};

inline DirectionSampler validation_sampler(std::uint64_t seed, int count = 64) {
    DirectionSampler s;
    s.deterministic = -1;
    s.random = count;
    s.seed = seed ^ 0x9e3779b97f4a7c15ULL;
    return s;
}

inline PooledBlock pooled_block(const LocalMetric& local, const AveragedMetricData& avg, const Vec& y,
                                double tol_contact) {
    const MetricJet jet = local.jet(y);
    PooledBlock pb;
    pb.block = sigma(jet, avg, TangentVector{avg.p, y});
    pb.hchart = horizontal_derivative(jet, avg, y);
    pb.margin = contact_margin(jet, avg, y);
    pb.vertical = pb.margin < tol_contact;
    pb.horizontal = is_horizontal_contact(pb.hchart, jet.F, tol_contact);
    return pb;
}

// Blocks for orthonormal-frame unit directions u (chart vectors B·u).
inline std::vector<PooledBlock> build_pool(const MetricFamily& family, const AveragedMetricData& avg,
                                           const std::vector<Vec>& directions, double tol_contact) {
    LocalMetric local(family, avg.p);
    std::vector<PooledBlock> pool;
    pool.reserve(directions.size());
    for (const Vec& u : directions) pool.push_back(pooled_block(local, avg, avg.frame * u, tol_contact));
    return pool;
}

inline ExtremalResult extremal_torsion(const MetricFamily& family, const AveragedMetricData& avg,
                                       const DirectionSampler& selection, const DirectionSampler& validation,
                                       const ExtremalOptions& opts = {}) {
    const int n = avg.dim();
    const auto sel = build_pool(family, avg, selection.directions(n), opts.tol_contact);
    const auto val = build_pool(family, avg, validation.directions(n), opts.tol_contact);
    return extremal_torsion(sel, val, opts);
}

// ---------------------------------------------------------------------------
// Independent oracle: stacked pseudo-inverse least squares.
// ---------------------------------------------------------------------------

struct OracleResult {
    TorsionTensor torsion;
    double max_residual = 0.0;   // largest relative residual over the blocks
    double rss = 0.0;            // root of the minimized sum of squares
};

// Minimum-norm least-squares solution of all stacked blocks. Each block is
// weighted into chart covector components relative to F(v), which leaves a
// consistent system's solution set unchanged; rss is then the exact
// minimized objective, so it cannot decrease when blocks are added.
inline OracleResult oracle_min_norm(std::span<const ConstraintBlock> blocks, double cutoff = 1e-12) {
    if (blocks.empty()) throw Error(ErrorCode::invalid_argument, "oracle needs at least one block");
    const int n = blocks.front().dim();
    const int N = torsion_size(n);
    Mat A(static_cast<Eigen::Index>(blocks.size()) * n, N);
    Vec b(A.rows());
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& blk = blocks[k];
        const Mat W = blk.to_chart / blk.F;
        A.middleRows(static_cast<Eigen::Index>(k) * n, n) = W * blk.S;
        b.segment(static_cast<Eigen::Index>(k) * n, n) = -(W * blk.rhs);
    }
    OracleResult out;
    out.torsion = TorsionTensor(n, pseudo_inverse_solve(A, b, cutoff), blocks.front().frame);
    out.rss = (A * out.torsion.comps - b).norm();
    for (const auto& blk : blocks) out.max_residual = std::max(out.max_residual, relative_residual(blk, out.torsion));
    return out;
}

inline OracleResult oracle_min_norm(std::span<const PooledBlock> pool, double cutoff = 1e-12) {
    std::vector<ConstraintBlock> blocks;
    blocks.reserve(pool.size());
    for (const auto& pb : pool) blocks.push_back(pb.block);
    return oracle_min_norm(std::span<const ConstraintBlock>(blocks), cutoff);
}

// ---------------------------------------------------------------------------
// Invariance of the solution space under indicatrix symmetries.
// ---------------------------------------------------------------------------

struct SymmetryReport {
    double identity_defect = 0.0;       // max ‖S(v)(φT) − Qᵀ S(φv) T‖ / (F‖T‖) on random T
    double null_space_residual = 0.0;   // max ‖S(v)(φh)‖ / F over null vectors h of S(φv)
    int null_dim = 0;                   // null vectors tested, summed over samples
};

// φ is given in chart components at p. Requires φᵀγφ = γ and F∘φ = F on the
// sample directions (orthonormal-frame unit vectors).
inline SymmetryReport symmetry_invariance_check(const MetricFamily& family, const AveragedMetricData& avg,
                                                const Mat& phi, const std::vector<Vec>& samples,
                                                double tol = 1e-8, std::uint64_t seed = 7) {
    const int n = avg.dim();
    const double gscale = avg.gamma.cwiseAbs().maxCoeff();
    if ((phi.transpose() * avg.gamma * phi - avg.gamma).cwiseAbs().maxCoeff() > tol * gscale) {
        throw Error(ErrorCode::not_a_symmetry, "map is not orthogonal for the averaged metric");
    }
    LocalMetric local(family, avg.p);
    for (const Vec& u : samples) {
        const Vec y = avg.frame * u;
        const double f = local.F(y);
        if (std::abs(local.F(phi * y) - f) > tol * f) {
            throw Error(ErrorCode::not_a_symmetry, "map does not preserve the Finsler norm");
        }
    }
    const Mat& B = avg.frame;
    const Mat Q = B.inverse() * phi * B;
    const int N = torsion_size(n);

    std::vector<ConstraintBlock> at_v, at_phiv;
    for (const Vec& u : samples) {
        const Vec y = B * u;
        at_v.push_back(sigma(local.jet(y), avg, TangentVector{avg.p, y}));
        const Vec py = phi * y;
        at_phiv.push_back(sigma(local.jet(py), avg, TangentVector{avg.p, py}));
    }

    SymmetryReport rep;
    const auto random_t = random_directions(N, 8, seed);
    for (const Vec& t : random_t) {
        const TorsionTensor T(n, t, FrameTag::orthonormal);
        const TorsionTensor phiT = change_basis(T, Q, FrameTag::orthonormal);
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const Vec lhs = at_v[k].S * phiT.comps;
            const Vec rhs = Q.transpose() * (at_phiv[k].S * T.comps);
            rep.identity_defect = std::max(rep.identity_defect, (lhs - rhs).cwiseAbs().maxCoeff() / at_v[k].F);
        }
    }

    // Residual-free directions at φv: the null space of S(φv). Their images
    // under φ must be residual-free at v.
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const Mat Sk = at_phiv[k].S / at_phiv[k].F;
        Eigen::JacobiSVD<Mat> svd(Sk, Eigen::ComputeFullV);
        const Vec& s = svd.singularValues();
        const double smax = s.size() > 0 ? s(0) : 0.0;
        for (int j = 0; j < N; ++j) {
            const double sj = j < s.size() ? s(j) : 0.0;
            if (sj > 1e-9 * smax) continue;
            ++rep.null_dim;
            const TorsionTensor h(n, svd.matrixV().col(j), FrameTag::orthonormal);
            const TorsionTensor phih = change_basis(h, Q, FrameTag::orthonormal);
            rep.null_space_residual =
                std::max(rep.null_space_residual, (at_v[k].S * phih.comps).cwiseAbs().maxCoeff() / at_v[k].F);
        }
    }
    return rep;
}

}  // namespace gbm
