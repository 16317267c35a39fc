#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "gbm/dual.hpp"
#include "gbm/errors.hpp"

namespace gbm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr int kMaxDim = 4;

// Fixed-capacity dense matrix over an arbitrary scalar (double or Dual).
// Only the leading rows×cols block is meaningful.
template <class S>
struct SmallMat {
    int rows = 0;
    int cols = 0;
    std::array<S, kMaxDim * kMaxDim> data{};

    SmallMat() = default;
    SmallMat(int r, int c) : rows(r), cols(c) { data.fill(S(0.0)); }

    S& operator()(int i, int j) { return data[static_cast<std::size_t>(i * kMaxDim + j)]; }
    const S& operator()(int i, int j) const { return data[static_cast<std::size_t>(i * kMaxDim + j)]; }
};

template <class S>
struct SmallVec {
    int size = 0;
    std::array<S, kMaxDim> data{};

    SmallVec() = default;
    explicit SmallVec(int n) : size(n) { data.fill(S(0.0)); }

    S& operator[](int i) { return data[static_cast<std::size_t>(i)]; }
    const S& operator[](int i) const { return data[static_cast<std::size_t>(i)]; }
};

template <class S>
S abs_value(const S& x) {
    return value_of(x) < 0.0 ? -x : x;
}

// Determinant by Gaussian elimination with partial pivoting on the value part.
template <class S>
S determinant(SmallMat<S> m) {
    const int n = m.rows;
    S det(1.0);
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i) {
            if (std::abs(value_of(m(i, k))) > std::abs(value_of(m(piv, k)))) piv = i;
        }
        if (value_of(m(piv, k)) == 0.0) return S(0.0);
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
            det = -det;
        }
        det = det * m(k, k);
        for (int i = k + 1; i < n; ++i) {
            const S f = m(i, k) / m(k, k);
            for (int j = k; j < n; ++j) m(i, j) = m(i, j) - f * m(k, j);
        }
    }
    return det;
}

// Gauss-Jordan inverse. Throws when the value part is numerically singular.
template <class S>
SmallMat<S> inverse(SmallMat<S> m) {
    const int n = m.rows;
    SmallMat<S> inv(n, n);
    for (int i = 0; i < n; ++i) inv(i, i) = S(1.0);
    double scale = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(value_of(m(i, j))));
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i) {
            if (std::abs(value_of(m(i, k))) > std::abs(value_of(m(piv, k)))) piv = i;
        }
        if (std::abs(value_of(m(piv, k))) <= 1e-14 * scale) {
            throw Error(ErrorCode::non_convex, "singular matrix in inversion");
        }
        if (piv != k) {
            for (int j = 0; j < n; ++j) {
                std::swap(m(k, j), m(piv, j));
                std::swap(inv(k, j), inv(piv, j));
            }
        }
        const S d = m(k, k);
        for (int j = 0; j < n; ++j) {
            m(k, j) = m(k, j) / d;
            inv(k, j) = inv(k, j) / d;
        }
        for (int i = 0; i < n; ++i) {
            if (i == k) continue;
            const S f = m(i, k);
            for (int j = 0; j < n; ++j) {
                m(i, j) = m(i, j) - f * m(k, j);
                inv(i, j) = inv(i, j) - f * inv(k, j);
            }
        }
    }
    return inv;
}

template <class S>
SmallMat<S> transpose(const SmallMat<S>& m) {
    SmallMat<S> t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

template <class S>
SmallMat<S> multiply(const SmallMat<S>& a, const SmallMat<S>& b) {
    SmallMat<S> c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            S acc(0.0);
            for (int k = 0; k < a.cols; ++k) acc = acc + a(i, k) * b(k, j);
            c(i, j) = acc;
        }
    return c;
}

template <class S>
SmallVec<S> multiply(const SmallMat<S>& a, const SmallVec<S>& x) {
    SmallVec<S> y(a.rows);
    for (int i = 0; i < a.rows; ++i) {
        S acc(0.0);
        for (int k = 0; k < a.cols; ++k) acc = acc + a(i, k) * x[k];
        y[i] = acc;
    }
    return y;
}

inline Mat to_eigen(const SmallMat<double>& m) {
    Mat out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out(i, j) = m(i, j);
    return out;
}

inline Vec to_eigen(const SmallVec<double>& v) {
    Vec out(v.size);
    for (int i = 0; i < v.size; ++i) out(i) = v[i];
    return out;
}

inline SmallMat<double> from_eigen(const Mat& m) {
    SmallMat<double> out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out(i, j) = m(i, j);
    return out;
}

inline SmallVec<double> from_eigen(const Vec& v) {
    SmallVec<double> out(static_cast<int>(v.size()));
    for (int i = 0; i < out.size; ++i) out[i] = v(i);
    return out;
}

// Rank-3 array indexed (k, i, j), used for connection coefficients Γ^k_ij.
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(int n) : n_(n), v_(static_cast<std::size_t>(n * n * n), 0.0) {}

    int dim() const { return n_; }
    double& operator()(int k, int i, int j) { return v_[idx(k, i, j)]; }
    double operator()(int k, int i, int j) const { return v_[idx(k, i, j)]; }
    const std::vector<double>& values() const { return v_; }

    double max_abs() const {
        double m = 0.0;
        for (double x : v_) m = std::max(m, std::abs(x));
        return m;
    }

private:
    std::size_t idx(int k, int i, int j) const { return static_cast<std::size_t>((k * n_ + i) * n_ + j); }

    int n_ = 0;
    std::vector<double> v_;
};

// Minimum-norm (least-squares) solution of A x = b by a rank-revealing
// complete orthogonal decomposition with relative pivot threshold `cutoff`.
inline Vec min_norm_solve(const Mat& a, const Vec& b, double cutoff = 1e-12) {
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(a);
    cod.setThreshold(cutoff);
    return cod.solve(b);
}

// Minimum-norm least-squares solution through a thin SVD with singular-value
// cutoff `cutoff`·σ_max. Kept separate from min_norm_solve so that oracle
// checks use an independent factorization.
inline Vec pseudo_inverse_solve(const Mat& a, const Vec& b, double cutoff = 1e-12) {
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return Vec::Zero(a.cols());
    const double thresh = cutoff * s(0);
    Vec ub = svd.matrixU().transpose() * b;
    for (Eigen::Index i = 0; i < s.size(); ++i) ub(i) = s(i) > thresh ? ub(i) / s(i) : 0.0;
    return svd.matrixV() * ub;
}

}  // namespace gbm
