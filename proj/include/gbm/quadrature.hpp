#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "gbm/errors.hpp"
#include "gbm/linalg.hpp"

namespace gbm {

// Nodes on the Euclidean unit sphere S^{n-1} with positive weights summing to
// its area.
struct SphereQuadrature {
    int dim = 2;
    std::vector<Vec> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }
};

// Equispaced trapezoid rule on S¹; exact for trigonometric polynomials of
// degree below `count`.
inline SphereQuadrature circle_rule(int count) {
    if (count < 3) throw Error(ErrorCode::invalid_argument, "circle rule needs at least 3 nodes");
    SphereQuadrature q;
    q.dim = 2;
    const double w = 2.0 * std::numbers::pi / count;
    for (int k = 0; k < count; ++k) {
        const double t = w * k;
        Vec u(2);
        u << std::cos(t), std::sin(t);
        q.nodes.push_back(u);
        q.weights.push_back(w);
    }
    return q;
}

// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on P_m).
inline void gauss_legendre(int m, std::vector<double>& x, std::vector<double>& w) {
    x.assign(static_cast<std::size_t>(m), 0.0);
    w.assign(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < (m + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = z;
            for (int k = 2; k <= m; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (m == 1) p0 = 1.0;
            dp = m * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[static_cast<std::size_t>(i)] = -z;
        x[static_cast<std::size_t>(m - 1 - i)] = z;
        const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[static_cast<std::size_t>(i)] = wi;
        w[static_cast<std::size_t>(m - 1 - i)] = wi;
    }
}

// Product Gauss-Legendre (in the polar cosine) × trapezoid (in azimuth) on S².
inline SphereQuadrature sphere_rule(int polar, int azimuthal) {
    if (polar < 2 || azimuthal < 3) throw Error(ErrorCode::invalid_argument, "sphere rule too coarse");
    std::vector<double> t, wt;
    gauss_legendre(polar, t, wt);
    SphereQuadrature q;
    q.dim = 3;
    const double dphi = 2.0 * std::numbers::pi / azimuthal;
    for (int i = 0; i < polar; ++i) {
        const double c = t[static_cast<std::size_t>(i)];
        const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        for (int j = 0; j < azimuthal; ++j) {
            const double phi = dphi * (j + 0.5);
            Vec u(3);
            u << c, s * std::cos(phi), s * std::sin(phi);
            q.nodes.push_back(u);
            q.weights.push_back(wt[static_cast<std::size_t>(i)] * dphi);
        }
    }
    return q;
}

// Default rule: 256 nodes on S¹, 32×64 on S². `resolution` overrides the
// node count for n = 2 and the polar count for n = 3 (azimuth = 2·polar).
inline SphereQuadrature default_quadrature(int dim, int resolution = 0) {
    if (dim == 2) return circle_rule(resolution > 0 ? resolution : 256);
    if (dim == 3) {
        const int polar = resolution > 0 ? resolution : 32;
        return sphere_rule(polar, 2 * polar);
    }
    throw Error(ErrorCode::invalid_argument, "quadrature implemented for n = 2 and n = 3");
}

inline double sphere_area(int dim) {
    // 2 π^{n/2} / Γ(n/2)
    return 2.0 * std::pow(std::numbers::pi, dim / 2.0) / std::tgamma(dim / 2.0);
}

// ---------------------------------------------------------------------------
// Direction pools on the unit sphere (used in orthonormal-frame coordinates).
// ---------------------------------------------------------------------------

// `count` equispaced directions on S¹, rotated by offset·(2π/count).
inline std::vector<Vec> equispaced_circle(int count, double offset = 0.0) {
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const double t = 2.0 * std::numbers::pi * (k + offset) / count;
        Vec u(2);
        u << std::cos(t), std::sin(t);
        out.push_back(u);
    }
    return out;
}

// Fibonacci lattice on S²; `offset` shifts the lattice index and the azimuth.
inline std::vector<Vec> fibonacci_sphere(int count, double offset = 0.0) {
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
        const double z = 1.0 - 2.0 * (k + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * (k + offset) + offset;
        Vec u(3);
        u << z, r * std::cos(phi), r * std::sin(phi);
        out.push_back(u);
    }
    return out;
}

inline std::vector<Vec> deterministic_directions(int dim, int count, double offset = 0.0) {
    if (dim == 2) return equispaced_circle(count, offset);
    if (dim == 3) return fibonacci_sphere(count, offset);
    throw Error(ErrorCode::invalid_argument, "direction pools implemented for n = 2 and n = 3");
}

inline std::vector<Vec> random_directions(int dim, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    while (static_cast<int>(out.size()) < count) {
        Vec u(dim);
        for (int i = 0; i < dim; ++i) u(i) = normal(rng);
        const double len = u.norm();
        if (len < 1e-8) continue;
        out.push_back(u / len);
    }
    return out;
}

}  // namespace gbm
