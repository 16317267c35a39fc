#pragma once

#include <cmath>

namespace gbm {

// Forward-mode dual number a + b·ε with ε² = 0. Used to push one directional
// derivative in x through coefficient expressions and closed-form jets.
struct Dual {
    double v = 0.0;
    double d = 0.0;

    constexpr Dual() = default;
    constexpr Dual(double value) : v(value) {}
    constexpr Dual(double value, double deriv) : v(value), d(deriv) {}

    Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
    Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
    Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
    Dual& operator/=(const Dual& o) {
        d = (d * o.v - v * o.d) / (o.v * o.v);
        v /= o.v;
        return *this;
    }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline Dual operator+(const Dual& a) { return a; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }

inline Dual sqrt(const Dual& a) {
    const double s = std::sqrt(a.v);
    return {s, a.d / (2.0 * s)};
}
inline Dual exp(const Dual& a) {
    const double e = std::exp(a.v);
    return {e, a.d * e};
}
inline Dual log(const Dual& a) { return {std::log(a.v), a.d / a.v}; }
inline Dual sin(const Dual& a) { return {std::sin(a.v), a.d * std::cos(a.v)}; }
inline Dual cos(const Dual& a) { return {std::cos(a.v), -a.d * std::sin(a.v)}; }
inline Dual tan(const Dual& a) {
    const double t = std::tan(a.v);
    return {t, a.d * (1.0 + t * t)};
}
inline Dual abs(const Dual& a) { return a.v < 0.0 ? -a : a; }

// a^b. When the exponent carries no derivative the base may be negative.
inline Dual pow(const Dual& a, const Dual& b) {
    if (b.d == 0.0) {
        const double p = std::pow(a.v, b.v);
        const double dp = b.v == 0.0 ? 0.0 : b.v * std::pow(a.v, b.v - 1.0);
        return {p, a.d * dp};
    }
    const double p = std::pow(a.v, b.v);
    return {p, p * (b.d * std::log(a.v) + b.v * a.d / a.v)};
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

}  // namespace gbm
