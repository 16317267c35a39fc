#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gbm/gbm.hpp"

namespace testing_support {

inline gbm::Vec vec(std::initializer_list<double> v) {
    gbm::Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

inline gbm::ChartPoint point(std::initializer_list<double> v) { return {vec(v)}; }

inline std::string metrics_dir() { return GBM_METRICS_DIR; }

// Randers data evaluated through a black-box callback, for the numeric path.
inline gbm::MetricFamily as_numeric(const gbm::MetricFamily& family) {
    gbm::NumericFamily num;
    num.dim = gbm::family_dim(family);
    num.F = [family](const gbm::Vec& x, const gbm::Vec& y) {
        return gbm::LocalMetric(family, gbm::ChartPoint{x}, false).F(y);
    };
    return num;
}

// The five families used for verdicts.
struct NamedFamily {
    std::string name;
    gbm::MetricFamily family;
    gbm::GlobalVerdict expected;
};

inline std::vector<NamedFamily> verdict_families() {
    using gbm::GlobalVerdict;
    namespace f = gbm::families;
    return {{"euclidean", f::euclidean(), GlobalVerdict::riemannian},
            {"conformal", f::conformal_riemannian(), GlobalVerdict::riemannian},
            {"minkowski_randers", f::minkowski_randers(), GlobalVerdict::classical_berwald},
            {"frame_randers", f::frame_randers(), GlobalVerdict::generalized_berwald},
            {"varying_randers", f::varying_randers(), GlobalVerdict::not_generalized_berwald}};
}

inline gbm::Grid unit_grid(int n, int res) {
    gbm::Grid g;
    g.box.lo = gbm::Vec::Zero(n);
    g.box.hi = gbm::Vec::Ones(n);
    g.res = res;
    return g;
}

}  // namespace testing_support
