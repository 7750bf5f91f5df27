#pragma once

// Gluing bounds for the Yamabe invariant under surgery along W.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "psc/error.hpp"

namespace psc {

struct YamabeValue {
    double value = 0.0;
    int n = 3;
};

struct VolumeSplit {
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    // One of the constants is zero: the split is the limit lambda_i -> 0.
    bool degenerate = false;
};

struct GlueBound {
    double bound = 0.0;
    std::string case_label;  // "a": both <= 0, "b": exactly one positive
    std::optional<VolumeSplit> split;
};

namespace detail {

inline void check_n(int n) {
    if (n < 3) throw Error(ErrorCode::OutOfRange, "dimension must be >= 3");
}

}  // namespace detail

/// lambda_i = |a_i|^{n/2} / (|a_1|^{n/2} + |a_2|^{n/2}) for a_1, a_2 <= 0.
/// A zero constant gives the limiting split with degenerate = true; both zero
/// gives (1/2, 1/2).
inline VolumeSplit optimal_split(double a1, double a2, int n) {
    detail::check_n(n);
    if (a1 > 0.0 || a2 > 0.0) throw Error(ErrorCode::OutOfRange, "optimal split needs a1, a2 <= 0");
    VolumeSplit s;
    if (a1 == 0.0 || a2 == 0.0) {
        s.degenerate = true;
        if (a1 == 0.0 && a2 == 0.0) return s;
        s.lambda1 = a1 == 0.0 ? 0.0 : 1.0;
        s.lambda2 = 1.0 - s.lambda1;
        return s;
    }
    const double p = 0.5 * n;
    const double w1 = std::pow(-a1, p);
    const double w2 = std::pow(-a2, p);
    s.lambda1 = w1 / (w1 + w2);
    s.lambda2 = w2 / (w1 + w2);
    return s;
}

/// Theorem 1: (a) Y1, Y2 <= 0 gives -((-Y1)^{n/2} + (-Y2)^{n/2})^{2/n};
/// (b) one of them positive gives the nonpositive one.
inline GlueBound glue_bound(const YamabeValue& y1, const YamabeValue& y2) {
    if (y1.n != y2.n) throw Error(ErrorCode::DimensionMismatch, "Yamabe values of different dimensions");
    const int n = y1.n;
    detail::check_n(n);
    if (!std::isfinite(y1.value) || !std::isfinite(y2.value)) throw Error(ErrorCode::NonFinite, "Yamabe value not finite");
    GlueBound g;
    if (y1.value > 0.0 && y2.value > 0.0) {
        throw Error(ErrorCode::UnsupportedCase, "both Yamabe invariants positive: not covered by the gluing theorem");
    }
    if (y1.value > 0.0 || y2.value > 0.0) {
        g.case_label = "b";
        g.bound = std::min(y1.value, y2.value);
        return g;
    }
    g.case_label = "a";
    const double p = 0.5 * n;
    g.bound = -std::pow(std::pow(-y1.value, p) + std::pow(-y2.value, p), 1.0 / p);
    g.split = optimal_split(y1.value, y2.value, n);
    return g;
}

inline double glue_bound(double y1, double y2, int n) { return glue_bound({y1, n}, {y2, n}).bound; }

/// Y(M, C) >= min(s_g) Vol_g(M)^{2/n} (for Y(M, C) <= 0).
inline double kobayashi_lower_bound(double min_s, double vol, int n) {
    detail::check_n(n);
    if (!(vol > 0.0)) throw Error(ErrorCode::OutOfRange, "volume must be positive");
    return min_s * std::pow(vol, 2.0 / n);
}

struct SplitSearch {
    double lambda = 0.0;
    double value = 0.0;
};

/// Grid search of max over lambda in (0, 1) of min{a1 / lambda^{2/n}, a2 / (1 - lambda)^{2/n}}.
inline SplitSearch brute_force_split(double a1, double a2, int n, double step = 1e-4) {
    detail::check_n(n);
    const double e = 2.0 / n;
    SplitSearch best{0.0, -std::numeric_limits<double>::infinity()};
    const long count = static_cast<long>(std::floor(1.0 / step));
    for (long i = 1; i < count; ++i) {
        const double l = i * step;
        const double v = std::min(a1 / std::pow(l, e), a2 / std::pow(1.0 - l, e));
        if (v > best.value) best = {l, v};
    }
    return best;
}

}  // namespace psc
