#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gbm/dual.hpp"
#include "gbm/errors.hpp"
#include "gbm/expression.hpp"
#include "gbm/linalg.hpp"
#include "gbm/torsion_tensor.hpp"

namespace gbm {

struct ChartPoint {
    Vec coords;

    int dim() const { return static_cast<int>(coords.size()); }
};

struct TangentVector {
    ChartPoint base;
    Vec comps;
};

inline TangentVector tangent(Vec base, Vec comps) { return {{std::move(base)}, std::move(comps)}; }

struct MetricJet {
    double F = 0.0;
    Vec dFdy;
    Vec dFdx;
    Mat g;
};

// Coefficient matrices are row-major n×n lists of expressions over x1..xn.

// F = √(a_ij(x) y^i y^j)
struct RiemannianFamily {
    int dim = 2;
    std::vector<Expression> a;
};

// F = √(a_ij(x) y^i y^j) + b_i(x) y^i with ‖b‖_a < 1.
struct RandersFamily {
    int dim = 2;
    std::vector<Expression> a;
    std::vector<Expression> b;
};

// Randers-type Minkowski norm F₀(z) = √(zᵀ a z) + b·z with constant data.
struct MinkowskiNorm {
    Mat a;
    Vec b;
};

// F(x, y) = F₀(z) where y = z^i E_i(x). frame[k·n + i] is the k-th chart
// component of E_i, i.e. column i of the frame matrix.
struct FrameMinkowskiFamily {
    int dim = 2;
    std::vector<Expression> frame;
    MinkowskiNorm norm;
};

// Black-box F with central-difference derivatives. Steps are relative to the
// magnitude of the differentiated argument.
struct NumericFamily {
    int dim = 2;
    std::function<double(const Vec& x, const Vec& y)> F;
    double grad_step = 1e-6;
    double hess_step = 1e-4;
    double x_step = 1e-6;
};

using MetricFamily = std::variant<RiemannianFamily, RandersFamily, FrameMinkowskiFamily, NumericFamily>;

inline int family_dim(const MetricFamily& f) {
    return std::visit([](const auto& fam) { return fam.dim; }, f);
}

inline bool is_analytic(const MetricFamily& f) { return !std::holds_alternative<NumericFamily>(f); }

inline const char* family_name(const MetricFamily& f) {
    switch (f.index()) {
        case 0: return "riemannian";
        case 1: return "randers";
        case 2: return "frame_minkowski";
        default: return "numeric";
    }
}

inline constexpr double kConvexityFloor = 1e-10;

namespace detail {

// Every analytic family is locally a Randers form √(yᵀ a(x) y) + b(x)·y.
template <class S>
void randers_form(const MetricFamily& family, std::span<const S> x, SmallMat<S>& a, SmallVec<S>& b) {
    const int n = family_dim(family);
    a = SmallMat<S>(n, n);
    b = SmallVec<S>(n);
    auto fill_sym = [&](const std::vector<Expression>& coeffs) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const S aij = coeffs[static_cast<std::size_t>(i * n + j)].template evaluate<S>(x);
                const S aji = coeffs[static_cast<std::size_t>(j * n + i)].template evaluate<S>(x);
                a(i, j) = S(0.5) * (aij + aji);
            }
    };
    if (const auto* r = std::get_if<RiemannianFamily>(&family)) {
        fill_sym(r->a);
    } else if (const auto* rd = std::get_if<RandersFamily>(&family)) {
        fill_sym(rd->a);
        for (int i = 0; i < n; ++i) b[i] = rd->b[static_cast<std::size_t>(i)].template evaluate<S>(x);
    } else if (const auto* fm = std::get_if<FrameMinkowskiFamily>(&family)) {
        SmallMat<S> e(n, n);
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i) e(k, i) = fm->frame[static_cast<std::size_t>(k * n + i)].template evaluate<S>(x);
        SmallMat<S> p;
        try {
            p = inverse(e);
        } catch (const Error&) {
            throw Error(ErrorCode::non_convex, "frame matrix is singular");
        }
        // a = Pᵀ A₀ P, b = Pᵀ b₀
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                S acc(0.0);
                for (int r = 0; r < n; ++r)
                    for (int s = 0; s < n; ++s) acc = acc + p(r, i) * S(fm->norm.a(r, s)) * p(s, j);
                a(i, j) = acc;
            }
            S acc(0.0);
            for (int r = 0; r < n; ++r) acc = acc + p(r, i) * S(fm->norm.b(r));
            b[i] = acc;
        }
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const S s = S(0.5) * (a(i, j) + a(j, i));
                a(i, j) = s;
                a(j, i) = s;
            }
    } else {
        throw Error(ErrorCode::wrong_family, "numeric family has no closed form");
    }
}

// Closed-form value and Riemann-Finsler metric of √(yᵀay) + b·y.
template <class S>
void randers_value_and_metric(const SmallMat<S>& a, const SmallVec<S>& b, std::span<const double> y, S& F,
                              SmallMat<S>* g, SmallVec<S>* dFdy) {
    const int n = a.rows;
    SmallVec<S> ay(n);
    S q(0.0);
    S by(0.0);
    for (int i = 0; i < n; ++i) {
        S acc(0.0);
        for (int j = 0; j < n; ++j) acc = acc + a(i, j) * S(y[static_cast<std::size_t>(j)]);
        ay[i] = acc;
        q = q + acc * S(y[static_cast<std::size_t>(i)]);
        by = by + b[i] * S(y[static_cast<std::size_t>(i)]);
    }
    using std::sqrt;
    const S alpha = sqrt(q);
    F = alpha + by;
    SmallVec<S> Fy(n);
    for (int i = 0; i < n; ++i) Fy[i] = ay[i] / alpha + b[i];
    if (dFdy) *dFdy = Fy;
    if (g) {
        *g = SmallMat<S>(n, n);
        const S ratio = F / alpha;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const S li = ay[i] / alpha;
                const S lj = ay[j] / alpha;
                (*g)(i, j) = ratio * (a(i, j) - li * lj) + Fy[i] * Fy[j];
            }
    }
}

inline void check_strong_convexity(const Mat& g) {
    Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
    const Vec& ev = es.eigenvalues();
    if (!(ev(0) >= kConvexityFloor * ev(ev.size() - 1)) || !(ev(ev.size() - 1) > 0.0)) {
        throw Error(ErrorCode::non_convex, "Riemann-Finsler metric is not positive definite");
    }
}

}  // namespace detail

// The metric restricted to one tangent space T_pM, with the x-derivative data
// needed for horizontal derivatives and Christoffel symbols.
class LocalMetric {
public:
    // Keeps a reference to `family`. With `with_x_derivatives` false only F,
    // ∂F/∂y and g are available (∂F/∂x is reported as zero).
    LocalMetric(const MetricFamily& family, const ChartPoint& p, bool with_x_derivatives = true)
        : family_(&family), x_(p.coords) {
        const int n = family_dim(family);
        if (p.dim() != n) throw Error(ErrorCode::dimension_mismatch, "chart point dimension differs from metric");
        for (int i = 0; i < n; ++i) {
            if (!std::isfinite(x_(i))) throw Error(ErrorCode::invalid_argument, "non-finite chart coordinate");
        }
        if (!is_analytic(family)) return;
        std::vector<double> xs(x_.data(), x_.data() + n);
        detail::randers_form<double>(family, xs, a_, b_);
        da_.assign(static_cast<std::size_t>(n), SmallMat<double>(n, n));
        db_.assign(static_cast<std::size_t>(n), SmallVec<double>(n));
        if (!with_x_derivatives) {
            validate_randers();
            return;
        }
        std::vector<Dual> xd(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            for (int i = 0; i < n; ++i) xd[static_cast<std::size_t>(i)] = Dual(x_(i), i == k ? 1.0 : 0.0);
            SmallMat<Dual> ad;
            SmallVec<Dual> bd;
            detail::randers_form<Dual>(family, xd, ad, bd);
            da_[static_cast<std::size_t>(k)] = SmallMat<double>(n, n);
            db_[static_cast<std::size_t>(k)] = SmallVec<double>(n);
            for (int i = 0; i < n; ++i) {
                db_[static_cast<std::size_t>(k)][i] = bd[i].d;
                for (int j = 0; j < n; ++j) da_[static_cast<std::size_t>(k)](i, j) = ad(i, j).d;
            }
        }
        validate_randers();
    }

    int dim() const { return static_cast<int>(x_.size()); }
    const Vec& x() const { return x_; }
    bool analytic() const { return is_analytic(*family_); }
    const MetricFamily& family() const { return *family_; }

    double F(const Vec& y) const {
        if (analytic()) {
            double f = 0.0;
            detail::randers_value_and_metric<double>(a_, b_, span_of(y), f, nullptr, nullptr);
            return f;
        }
        return std::get<NumericFamily>(*family_).F(x_, y);
    }

    // Jet at y without the convexity eigen-check.
    MetricJet jet_unchecked(const Vec& y) const {
        const int n = dim();
        MetricJet j;
        if (analytic()) {
            SmallMat<double> g;
            SmallVec<double> fy;
            detail::randers_value_and_metric<double>(a_, b_, span_of(y), j.F, &g, &fy);
            j.g = to_eigen(g);
            j.dFdy = to_eigen(fy);
            j.dFdx = Vec(n);
            const double alpha = j.F - b_dot(y);
            for (int k = 0; k < n; ++k) {
                double q = 0.0;
                double by = 0.0;
                for (int r = 0; r < n; ++r) {
                    by += db_[static_cast<std::size_t>(k)][r] * y(r);
                    for (int s = 0; s < n; ++s) q += y(r) * da_[static_cast<std::size_t>(k)](r, s) * y(s);
                }
                j.dFdx(k) = q / (2.0 * alpha) + by;
            }
            return j;
        }
        return numeric_jet(y);
    }

    MetricJet jet(const Vec& y) const {
        if (y.size() != dim()) throw Error(ErrorCode::dimension_mismatch, "tangent vector dimension");
        if (y.norm() == 0.0) throw Error(ErrorCode::zero_vector, "metric jet requested at the zero vector");
        MetricJet j = jet_unchecked(y);
        detail::check_strong_convexity(j.g);
        return j;
    }

    // F and g at y with a dual part equal to their derivative along x^k.
    void jet_dx(int k, const Vec& y, Dual& F, SmallMat<Dual>& g) const {
        const int n = dim();
        SmallMat<Dual> a(n, n);
        SmallVec<Dual> b(n);
        for (int i = 0; i < n; ++i) {
            b[i] = Dual(b_[i], db_[static_cast<std::size_t>(k)][i]);
            for (int j = 0; j < n; ++j) a(i, j) = Dual(a_(i, j), da_[static_cast<std::size_t>(k)](i, j));
        }
        detail::randers_value_and_metric<Dual>(a, b, span_of(y), F, &g, nullptr);
    }

    // Local Randers data (analytic families only).
    Mat a() const { return to_eigen(a_); }
    Vec b() const { return to_eigen(b_); }

private:
    static std::span<const double> span_of(const Vec& y) {
        return {y.data(), static_cast<std::size_t>(y.size())};
    }

    double b_dot(const Vec& y) const {
        double s = 0.0;
        for (int i = 0; i < dim(); ++i) s += b_[i] * y(i);
        return s;
    }

    void validate_randers() const {
        const Mat a = to_eigen(a_);
        Eigen::LLT<Mat> llt(a);
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorCode::non_convex, "quadratic part is not positive definite");
        }
        const Vec b = to_eigen(b_);
        const double bnorm2 = b.dot(llt.solve(b));
        if (!(bnorm2 < 1.0)) throw Error(ErrorCode::non_convex, "Randers one-form has a-norm >= 1");
    }

    MetricJet numeric_jet(const Vec& y) const {
        const auto& fam = std::get<NumericFamily>(*family_);
        const int n = dim();
        MetricJet j;
        j.F = fam.F(x_, y);
        j.dFdy = Vec(n);
        j.dFdx = Vec(n);
        j.g = Mat(n, n);
        const double ny = y.norm();
        const double hy = fam.grad_step * ny;
        for (int i = 0; i < n; ++i) {
            Vec yp = y, ym = y;
            yp(i) += hy;
            ym(i) -= hy;
            j.dFdy(i) = (fam.F(x_, yp) - fam.F(x_, ym)) / (2.0 * hy);
        }
        for (int k = 0; k < n; ++k) {
            const double hx = fam.x_step * (1.0 + std::abs(x_(k)));
            Vec xp = x_, xm = x_;
            xp(k) += hx;
            xm(k) -= hx;
            j.dFdx(k) = (fam.F(xp, y) - fam.F(xm, y)) / (2.0 * hx);
        }
        // Hessian of E = F²/2 by central second differences.
        const double h = fam.hess_step * ny;
        auto E = [&](const Vec& z) {
            const double f = fam.F(x_, z);
            return 0.5 * f * f;
        };
        const double e0 = E(y);
        for (int i = 0; i < n; ++i) {
            Vec yp = y, ym = y;
            yp(i) += h;
            ym(i) -= h;
            j.g(i, i) = (E(yp) - 2.0 * e0 + E(ym)) / (h * h);
            for (int k = i + 1; k < n; ++k) {
                Vec pp = y, pm = y, mp = y, mm = y;
                pp(i) += h; pp(k) += h;
                pm(i) += h; pm(k) -= h;
                mp(i) -= h; mp(k) += h;
                mm(i) -= h; mm(k) -= h;
                const double v = (E(pp) - E(pm) - E(mp) + E(mm)) / (4.0 * h * h);
                j.g(i, k) = v;
                j.g(k, i) = v;
            }
        }
        return j;
    }

    const MetricFamily* family_;
    Vec x_;
    SmallMat<double> a_;
    SmallVec<double> b_;
    std::vector<SmallMat<double>> da_;
    std::vector<SmallVec<double>> db_;
};

inline MetricJet eval_jet(const MetricFamily& family, const TangentVector& v) {
    LocalMetric local(family, v.base);
    return local.jet(v.comps);
}

inline double evaluate_F(const MetricFamily& family, const TangentVector& v) {
    return LocalMetric(family, v.base).F(v.comps);
}

// Larger of the Euler-identity defect |y·∂F/∂y − F|/F and the scaling defect
// |F(2v) − 2F(v)|/F(v).
inline double check_homogeneity(const MetricFamily& family, const TangentVector& v) {
    LocalMetric local(family, v.base);
    const MetricJet j = local.jet(v.comps);
    const double euler = std::abs(v.comps.dot(j.dFdy) - j.F) / j.F;
    const double scaling = std::abs(local.F(2.0 * v.comps) - 2.0 * j.F) / j.F;
    return std::max(euler, scaling);
}

// Frame matrix E(x) of a FrameMinkowski family (column i = E_i) together with
// its x-derivatives dE[k] = ∂E/∂x^k.
inline Mat frame_matrix(const FrameMinkowskiFamily& fam, const Vec& x, std::vector<Mat>* dE = nullptr) {
    const int n = fam.dim;
    Mat e(n, n);
    std::vector<double> xs(x.data(), x.data() + n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i) e(k, i) = fam.frame[static_cast<std::size_t>(k * n + i)](xs);
    if (dE) {
        dE->assign(static_cast<std::size_t>(n), Mat::Zero(n, n));
        std::vector<Dual> xd(static_cast<std::size_t>(n));
        for (int m = 0; m < n; ++m) {
            for (int i = 0; i < n; ++i) xd[static_cast<std::size_t>(i)] = Dual(x(i), i == m ? 1.0 : 0.0);
            for (int k = 0; k < n; ++k)
                for (int i = 0; i < n; ++i)
                    (*dE)[static_cast<std::size_t>(m)](k, i) =
                        fam.frame[static_cast<std::size_t>(k * n + i)].evaluate<Dual>(xd).d;
        }
    }
    return e;
}

// Torsion at p of the connection that makes the frame parallel, in chart
// components: Γ^k_ij = −∂_i E^k_a (E⁻¹)^a_j and T^k_ij = Γ^k_ij − Γ^k_ji.
inline TorsionTensor frame_ground_truth_torsion(const MetricFamily& family, const ChartPoint& p) {
    const auto* fm = std::get_if<FrameMinkowskiFamily>(&family);
    if (!fm) throw Error(ErrorCode::wrong_family, "ground-truth torsion needs a frame_minkowski family");
    const int n = fm->dim;
    std::vector<Mat> dE;
    const Mat e = frame_matrix(*fm, p.coords, &dE);
    const Mat einv = e.inverse();
    Tensor3 gamma(n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int a = 0; a < n; ++a) acc += dE[static_cast<std::size_t>(i)](k, a) * einv(a, j);
                gamma(k, i, j) = -acc;
            }
    TorsionTensor t(n, FrameTag::chart);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int k = 0; k < n; ++k) t.set(k, i, j, gamma(k, i, j) - gamma(k, j, i));
    return t;
}

}  // namespace gbm
