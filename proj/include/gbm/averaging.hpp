#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <vector>

#include "gbm/errors.hpp"
#include "gbm/linalg.hpp"
#include "gbm/metric.hpp"
#include "gbm/quadrature.hpp"

namespace gbm {

// Averaged Riemannian metric γ at p and its Levi-Civita data.
struct AveragedMetricData {
    ChartPoint p;
    Mat gamma;
    Mat gamma_inv;
    Mat frame;                  // columns: γ-orthonormal basis B = γ^{-1/2}
    Tensor3 christoffel;        // Γ*^k_ij
    std::vector<Mat> dgamma;    // ∂_k γ

    int dim() const { return p.dim(); }
};

struct AveragingOptions {
    // Constant factor applied to γ. Everything downstream is invariant under
    // it; it exists to test that invariance.
    double gamma_scale = 1.0;
    // Relative central-difference step for ∂γ when no closed form exists.
    double fd_step = 1e-5;
};

namespace detail {

// Quadrature nodes mapped onto the ellipsoid C·S^{n-1}, C = a(p)^{-1/2} for the
// Riemannian part a of an analytic metric. A black-box metric uses the
// plain-rule γ in place of a. The radial
// parametrization of the indicatrix from any star-shaped surface gives the
// same integral; from this one the integrand is nearly constant, which keeps
// the rule accurate for strongly anisotropic a. C is held fixed when
// differentiating in x.
struct AdaptedRule {
    std::vector<Vec> nodes;
    std::vector<double> weights;
};

inline AdaptedRule adapted_rule(const LocalMetric& local, const SphereQuadrature& quad) {
    const int n = local.dim();
    if (quad.dim != n) throw Error(ErrorCode::dimension_mismatch, "quadrature dimension");
    AdaptedRule r;
    r.nodes = quad.nodes;
    r.weights = quad.weights;
    Mat shape;
    if (local.analytic()) {
        shape = local.a();
    } else {
        shape = Mat::Zero(n, n);
        for (std::size_t k = 0; k < quad.nodes.size(); ++k) {
            const MetricJet j = local.jet_unchecked(quad.nodes[k]);
            const double det = j.g.determinant();
            if (!(det > 0.0)) throw Error(ErrorCode::non_convex, "Riemann-Finsler metric degenerate on the indicatrix");
            shape += (quad.weights[k] * std::sqrt(det) / std::pow(j.F, n)) * j.g;
        }
        shape = 0.5 * (shape + shape.transpose());
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(shape);
    const Mat C = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                  es.eigenvectors().transpose();
    const double detC = 1.0 / std::sqrt(es.eigenvalues().prod());
    for (std::size_t k = 0; k < r.nodes.size(); ++k) {
        r.nodes[k] = C * quad.nodes[k];
        r.weights[k] *= detC;
    }
    return r;
}

}  // namespace detail

// Integral of `integrand` over the indicatrix ∂K_p against the induced volume
// form μ. The indicatrix is parametrized radially, y(u) = u / F(u), over a
// star-shaped surface Σ; the pullback of μ is √det g(u) · F(u)^{-n} ι_u(du).
inline double indicatrix_integral(const LocalMetric& local, const std::function<double(const Vec&)>& integrand,
                                  const SphereQuadrature& quad) {
    const int n = local.dim();
    const detail::AdaptedRule rule = detail::adapted_rule(local, quad);
    double sum = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const Vec& u = rule.nodes[k];
        const MetricJet j = local.jet_unchecked(u);
        const double det = j.g.determinant();
        if (!(det > 0.0)) throw Error(ErrorCode::non_convex, "Riemann-Finsler metric degenerate on the indicatrix");
        sum += rule.weights[k] * integrand(u / j.F) * std::sqrt(det) / std::pow(j.F, n);
    }
    return sum;
}

inline double indicatrix_integral(const MetricFamily& family, const ChartPoint& p,
                                  const std::function<double(const TangentVector&)>& integrand,
                                  const SphereQuadrature& quad) {
    LocalMetric local(family, p);
    return indicatrix_integral(
        local, [&](const Vec& y) { return integrand(TangentVector{p, y}); }, quad);
}

namespace detail {

inline Mat averaged_metric_local(const LocalMetric& local, const SphereQuadrature& quad) {
    const int n = local.dim();
    const AdaptedRule rule = adapted_rule(local, quad);
    Mat gamma = Mat::Zero(n, n);
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const MetricJet j = local.jet_unchecked(rule.nodes[k]);
        const double det = j.g.determinant();
        if (!(det > 0.0)) throw Error(ErrorCode::non_convex, "Riemann-Finsler metric degenerate on the indicatrix");
        gamma += (rule.weights[k] * std::sqrt(det) / std::pow(j.F, n)) * j.g;
    }
    return 0.5 * (gamma + gamma.transpose());
}

// ∂_k γ by differentiating the quadrature sum: each summand g_ij √det g F^{-n}
// is evaluated with a dual part along x^k.
inline std::vector<Mat> averaged_metric_derivatives(const LocalMetric& local, const SphereQuadrature& quad) {
    const int n = local.dim();
    std::vector<Mat> d(static_cast<std::size_t>(n), Mat::Zero(n, n));
    const AdaptedRule rule = adapted_rule(local, quad);
    for (int m = 0; m < n; ++m) {
        Mat& dm = d[static_cast<std::size_t>(m)];
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            Dual F;
            SmallMat<Dual> g;
            local.jet_dx(m, rule.nodes[k], F, g);
            const Dual det = determinant(g);
            Dual w = sqrt(det);
            Dual fpow(1.0);
            for (int r = 0; r < n; ++r) fpow = fpow * F;
            w = w / fpow;
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) dm(i, j) += rule.weights[k] * (g(i, j) * w).d;
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < i; ++j) dm(i, j) = dm(j, i);
    }
    return d;
}

}  // namespace detail

// γ_ij(p) = ∫_{∂K_p} g_ij μ. No normalization: the Euclidean plane gives 2π·I.
inline Mat averaged_metric(const MetricFamily& family, const ChartPoint& p, const SphereQuadrature& quad) {
    return detail::averaged_metric_local(LocalMetric(family, p), quad);
}

// Symmetric inverse square root B = γ^{-1/2}; BᵀγB = I.
inline Mat orthonormal_frame(const Mat& gamma) {
    if (gamma.rows() != gamma.cols()) throw Error(ErrorCode::not_spd, "gamma is not square");
    const double asym = (gamma - gamma.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * gamma.cwiseAbs().maxCoeff()) throw Error(ErrorCode::not_spd, "gamma is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(gamma);
    const Vec& ev = es.eigenvalues();
    if (!(ev(0) > 0.0)) throw Error(ErrorCode::not_spd, "gamma is not positive definite");
    const Mat& v = es.eigenvectors();
    return v * ev.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
}

// Γ*^k_ij = ½ γ^{kl} (∂_i γ_jl + ∂_j γ_il − ∂_l γ_ij)
inline Tensor3 christoffel_from_derivatives(const Mat& gamma_inv, const std::vector<Mat>& dgamma) {
    const int n = static_cast<int>(gamma_inv.rows());
    Tensor3 c(n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int l = 0; l < n; ++l) {
                    const double t = dgamma[static_cast<std::size_t>(i)](j, l) +
                                     dgamma[static_cast<std::size_t>(j)](i, l) -
                                     dgamma[static_cast<std::size_t>(l)](i, j);
                    acc += gamma_inv(k, l) * t;
                }
                c(k, i, j) = 0.5 * acc;
            }
    return c;
}

// ∂_k γ at p: closed form for analytic families, central differences with
// step fd_step·(1 + |x^k|) otherwise.
inline std::vector<Mat> averaged_metric_gradient(const MetricFamily& family, const ChartPoint& p,
                                                 const SphereQuadrature& quad, double fd_step = 1e-5) {
    LocalMetric local(family, p);
    if (local.analytic()) return detail::averaged_metric_derivatives(local, quad);
    const int n = p.dim();
    std::vector<Mat> d(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double h = fd_step * (1.0 + std::abs(p.coords(k)));
        ChartPoint pp = p, pm = p;
        pp.coords(k) += h;
        pm.coords(k) -= h;
        Mat gp, gm;
        try {
            gp = averaged_metric(family, pp, quad);
            gm = averaged_metric(family, pm, quad);
        } catch (const Error& e) {
            throw Error(ErrorCode::stencil_out_of_domain, std::string("finite-difference stencil: ") + e.what());
        }
        d[static_cast<std::size_t>(k)] = (gp - gm) / (2.0 * h);
    }
    return d;
}

inline Tensor3 christoffel_star(const MetricFamily& family, const ChartPoint& p, const SphereQuadrature& quad,
                                double fd_step = 1e-5) {
    const Mat gamma = averaged_metric(family, p, quad);
    return christoffel_from_derivatives(gamma.inverse(), averaged_metric_gradient(family, p, quad, fd_step));
}

inline AveragedMetricData averaged_data(const MetricFamily& family, const ChartPoint& p,
                                        const SphereQuadrature& quad, const AveragingOptions& opts = {}) {
    AveragedMetricData d;
    d.p = p;
    LocalMetric local(family, p);
    d.gamma = opts.gamma_scale * detail::averaged_metric_local(local, quad);
    d.gamma_inv = d.gamma.inverse();
    d.gamma_inv = 0.5 * (d.gamma_inv + d.gamma_inv.transpose());
    d.frame = orthonormal_frame(d.gamma);
    d.dgamma = averaged_metric_gradient(family, p, quad, opts.fd_step);
    for (auto& m : d.dgamma) m *= opts.gamma_scale;
    d.christoffel = christoffel_from_derivatives(d.gamma_inv, d.dgamma);
    return d;
}

// X_i^{h*}F(v) = ∂F/∂x^i − y^j Γ*^k_ij ∂F/∂y^k
inline Vec horizontal_derivative(const MetricJet& jet, const AveragedMetricData& avg, const Vec& y) {
    const int n = avg.dim();
    Vec h = jet.dFdx;
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) acc += y(j) * avg.christoffel(k, i, j) * jet.dFdy(k);
        h(i) -= acc;
    }
    return h;
}

inline Vec horizontal_derivative(const MetricFamily& family, const AveragedMetricData& avg, const TangentVector& v) {
    if (v.comps.norm() == 0.0) throw Error(ErrorCode::zero_vector, "horizontal derivative at the zero vector");
    return horizontal_derivative(eval_jet(family, v), avg, v.comps);
}

// F*(v) = √(γ_p(v, v))
inline double averaged_norm(const AveragedMetricData& avg, const Vec& v) { return std::sqrt(v.dot(avg.gamma * v)); }

}  // namespace gbm
