#pragma once

#include <cmath>
#include <vector>

#include "gbm/averaging.hpp"
#include "gbm/errors.hpp"
#include "gbm/linalg.hpp"
#include "gbm/metric.hpp"
#include "gbm/torsion_tensor.hpp"

namespace gbm {

// One reference element's compatibility equations S·T + rhs = 0, i.e. the
// affine set A_p(v). Row i is σ_i(v) flattened over (a<b, c).
struct ConstraintBlock {
    Mat S;
    Vec rhs;
    TangentVector v;
    double F = 1.0;
    FrameTag frame = FrameTag::orthonormal;
    // Maps a residual in the block's frame to chart covector components.
    Mat to_chart;

    int dim() const { return static_cast<int>(rhs.size()); }
};

// σ coefficients in a γ-orthonormal frame:
// σ^{ab}_{c;i} = ½(δ_ic(y^a F_b − y^b F_a) + δ_ia(y^c F_b − y^b F_c) − δ_ib(y^c F_a − y^a F_c))
inline Mat sigma_orthonormal(const Vec& y, const Vec& Fy) {
    const int n = static_cast<int>(y.size());
    Mat S = Mat::Zero(n, torsion_size(n));
    auto rot = [&](int p, int q) { return y(p) * Fy(q) - y(q) * Fy(p); };
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            const int base = pair_index(a, b, n) * n;
            for (int c = 0; c < n; ++c)
                for (int i = 0; i < n; ++i) {
                    double s = 0.0;
                    if (i == c) s += rot(a, b);
                    if (i == a) s += rot(c, b);
                    if (i == b) s -= rot(c, a);
                    S(i, base + c) = 0.5 * s;
                }
        }
    return S;
}

// Block for the reference element v in the γ-orthonormal frame B of `avg`.
// Vectors transform as y' = B⁻¹y, covectors as F' = Bᵀ∂F/∂y and rhs' = Bᵀ·X^{h*}F.
inline ConstraintBlock sigma(const MetricJet& jet, const AveragedMetricData& avg, const TangentVector& v) {
    if (v.comps.norm() == 0.0) throw Error(ErrorCode::zero_vector, "reference element is zero");
    const Mat& B = avg.frame;
    const Vec y = B.inverse() * v.comps;
    const Vec Fy = B.transpose() * jet.dFdy;
    ConstraintBlock blk;
    blk.S = sigma_orthonormal(y, Fy);
    blk.rhs = B.transpose() * horizontal_derivative(jet, avg, v.comps);
    blk.v = v;
    blk.F = jet.F;
    blk.frame = FrameTag::orthonormal;
    blk.to_chart = B.transpose().inverse();
    return blk;
}

// σ coefficients in chart components with a general γ:
// σ^{ab}_{c;i} = ½((y^aγ^{br} − y^bγ^{ar})F_r γ_ic + (δ_iaγ^{br} − δ_ibγ^{ar})F_r y^jγ_jc − (δ_ia y^b − δ_ib y^a)F_c)
inline ConstraintBlock sigma_general(const MetricJet& jet, const AveragedMetricData& avg, const TangentVector& v) {
    if (v.comps.norm() == 0.0) throw Error(ErrorCode::zero_vector, "reference element is zero");
    const int n = avg.dim();
    const Vec& y = v.comps;
    const Vec& Fy = jet.dFdy;
    const Vec raised = avg.gamma_inv * Fy;   // γ^{br} F_r
    const Vec lowered = avg.gamma * y;       // y^j γ_jc
    ConstraintBlock blk;
    blk.S = Mat::Zero(n, torsion_size(n));
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            const int base = pair_index(a, b, n) * n;
            for (int c = 0; c < n; ++c)
                for (int i = 0; i < n; ++i) {
                    double s = (y(a) * raised(b) - y(b) * raised(a)) * avg.gamma(i, c);
                    if (i == a) s += raised(b) * lowered(c) - y(b) * Fy(c);
                    if (i == b) s += -raised(a) * lowered(c) + y(a) * Fy(c);
                    blk.S(i, base + c) = 0.5 * s;
                }
        }
    blk.rhs = horizontal_derivative(jet, avg, y);
    blk.v = v;
    blk.F = jet.F;
    blk.frame = FrameTag::chart;
    blk.to_chart = Mat::Identity(n, n);
    return blk;
}

inline ConstraintBlock constraint_block(const MetricFamily& family, const AveragedMetricData& avg,
                                        const TangentVector& v) {
    return sigma(eval_jet(family, v), avg, v);
}

// max_i |∂log F/∂y^i − ∂log F*/∂y^i| at v; zero exactly at vertical contact.
inline double contact_margin(const MetricJet& jet, const AveragedMetricData& avg, const Vec& y) {
    const Vec gy = avg.gamma * y;
    const double fstar2 = y.dot(gy);
    return (jet.dFdy / jet.F - gy / fstar2).cwiseAbs().maxCoeff();
}

inline bool is_vertical_contact(const MetricJet& jet, const AveragedMetricData& avg, const TangentVector& v,
                                double tol) {
    if (v.comps.norm() == 0.0) throw Error(ErrorCode::zero_vector, "contact test at the zero vector");
    return contact_margin(jet, avg, v.comps) < tol;
}

// `rhs` holds the chart components X_i^{h*}F(v).
inline bool is_horizontal_contact(const Vec& rhs, double F, double tol) {
    return rhs.cwiseAbs().maxCoeff() < tol * F;
}

// (g_i(T, v))_i in the block's frame.
inline Vec residual(const ConstraintBlock& block, const TorsionTensor& T) { return block.S * T.comps + block.rhs; }

// ‖g(T, v)‖_∞ in chart covector components, relative to F(v). Invariant
// under v → tv and under constant rescaling of γ.
inline double relative_residual(const ConstraintBlock& block, const TorsionTensor& T) {
    return (block.to_chart * residual(block, T)).cwiseAbs().maxCoeff() / block.F;
}

inline bool block_vanishes(const ConstraintBlock& block, double tol) {
    return block.S.cwiseAbs().maxCoeff() < tol * block.F;
}

struct ReferenceSolution {
    TorsionTensor T0;
    Vec lambda;
};

// Closest point of A_p(v) to the origin: G λ = −rhs with G the Gramian of the
// σ rows, T0 = Σ λ_j σ_j. G is factorized rank-revealingly.
inline ReferenceSolution solve_reference(const ConstraintBlock& block, double vertical_tol = 1e-9,
                                         double cutoff = 1e-12) {
    const int n = block.dim();
    if (block_vanishes(block, vertical_tol)) {
        throw Error(ErrorCode::vertical_contact, "reference element is a vertical contact point");
    }
    const Mat G = block.S * block.S.transpose();
    const Vec lambda = min_norm_solve(G, -block.rhs, cutoff);
    const double defect = (G * lambda + block.rhs).norm();
    if (defect > 1e-8 * std::max(block.rhs.norm(), 1e-300) && defect > 1e-14 * block.F) {
        throw Error(ErrorCode::inconsistent, "Gramian system is inconsistent");
    }
    ReferenceSolution sol;
    sol.lambda = lambda;
    sol.T0 = TorsionTensor(n, block.S.transpose() * lambda, block.frame);
    return sol;
}

}  // namespace gbm
