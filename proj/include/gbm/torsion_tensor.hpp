#pragma once

#include <cmath>
#include <string>

#include "gbm/linalg.hpp"

namespace gbm {

enum class FrameTag { chart, orthonormal };

inline int torsion_size(int n) { return n * n * (n - 1) / 2; }

// Position of the pair (a, b), a < b, in lexicographic order.
inline int pair_index(int a, int b, int n) { return a * n - a * (a + 1) / 2 + (b - a - 1); }

// Antisymmetric (1,2)-tensor T^c_{ab}. Only a < b is stored; component
// (a<b, c) lives at pair_index(a, b)·n + c.
struct TorsionTensor {
    int dim = 0;
    Vec comps;
    FrameTag frame = FrameTag::orthonormal;

    TorsionTensor() = default;
    TorsionTensor(int n, FrameTag tag) : dim(n), comps(Vec::Zero(torsion_size(n))), frame(tag) {}
    TorsionTensor(int n, Vec c, FrameTag tag) : dim(n), comps(std::move(c)), frame(tag) {}

    // T^c_{ab} for any a, b (antisymmetry applied).
    double at(int c, int a, int b) const {
        if (a == b) return 0.0;
        if (a < b) return comps(pair_index(a, b, dim) * dim + c);
        return -comps(pair_index(b, a, dim) * dim + c);
    }

    void set(int c, int a, int b, double value) {
        if (a < b) comps(pair_index(a, b, dim) * dim + c) = value;
        else if (b < a) comps(pair_index(b, a, dim) * dim + c) = -value;
    }

    // Squared sum of stored components; the natural norm when the frame is
    // γ-orthonormal.
    double norm() const { return comps.norm(); }
    double dot(const TorsionTensor& o) const { return comps.dot(o.comps); }
};

inline std::string component_label(int c, int a, int b) {
    return "T^" + std::to_string(c + 1) + "_" + std::to_string(a + 1) + std::to_string(b + 1);
}

// Full antisymmetric array T(k, i, j) = T^k_{ij}.
inline Tensor3 to_full(const TorsionTensor& t) {
    Tensor3 full(t.dim);
    for (int k = 0; k < t.dim; ++k)
        for (int i = 0; i < t.dim; ++i)
            for (int j = 0; j < t.dim; ++j) full(k, i, j) = t.at(k, i, j);
    return full;
}

inline TorsionTensor from_full(const Tensor3& full, FrameTag tag) {
    const int n = full.dim();
    TorsionTensor t(n, tag);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            for (int c = 0; c < n; ++c) t.set(c, a, b, full(c, a, b));
    return t;
}

// Change of basis. `basis` holds the new basis vectors as columns in the old
// components: T'^c_{ab} = (basis⁻¹)^c_r T^r_{ij} basis^i_a basis^j_b.
inline TorsionTensor change_basis(const TorsionTensor& t, const Mat& basis, FrameTag tag) {
    const int n = t.dim;
    const Mat inv = basis.inverse();
    const Tensor3 full = to_full(t);
    TorsionTensor out(n, tag);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                double acc = 0.0;
                for (int r = 0; r < n; ++r)
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j) acc += inv(c, r) * full(r, i, j) * basis(i, a) * basis(j, b);
                out.set(c, a, b, acc);
            }
    return out;
}

// Orthonormal-frame components to chart components, for the frame matrix B
// whose columns are the γ-orthonormal vectors.
inline TorsionTensor to_chart(const TorsionTensor& t, const Mat& frame) {
    return change_basis(t, frame.inverse(), FrameTag::chart);
}

inline TorsionTensor to_orthonormal(const TorsionTensor& t, const Mat& frame) {
    return change_basis(t, frame, FrameTag::orthonormal);
}

}  // namespace gbm
