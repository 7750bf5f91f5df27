#pragma once

// Metric homotopies t -> g^t on a fixed chart, the B(x, t) correction term of
// the scalar curvature of g^t + a^2 dt^2, and the stretched product metrics.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "psc/certificate.hpp"
#include "psc/models.hpp"

namespace psc {

struct MetricHomotopy {
    int base_dim = 0;
    Box domain;
    std::function<Matrix(const Vector&, double)> field;
    std::function<Matrix(const Vector&, double)> dt_field;
    std::function<Matrix(const Vector&, double)> dtt_field;

    Matrix operator()(const Vector& x, double t) const { return field(x, t); }

    /// g^t frozen as a chart metric.
    MetricField at(double t) const {
        return MetricField{base_dim, domain, [f = field, t](const Vector& x) { return f(x, t); }};
    }
};

namespace detail {

inline void check_same_chart(const MetricField& a, const MetricField& b) {
    if (a.dim != b.dim) throw Error(ErrorCode::DimensionMismatch, "homotopy endpoints have different dimensions");
    if (a.domain.dim() != b.domain.dim() || !a.domain.contains(b.domain) || !b.domain.contains(a.domain)) {
        throw Error(ErrorCode::DimensionMismatch, "homotopy endpoints live on different chart domains");
    }
}

}  // namespace detail

/// g^t = (1 - t) g_start + t g_end, with exact t-derivatives.
inline MetricHomotopy linear_homotopy(const MetricField& g_start, const MetricField& g_end) {
    detail::check_same_chart(g_start, g_end);
    MetricHomotopy h;
    h.base_dim = g_start.dim;
    h.domain = g_start.domain;
    h.field = [g_start, g_end](const Vector& x, double t) { return ((1.0 - t) * g_start(x) + t * g_end(x)).eval(); };
    h.dt_field = [g_start, g_end](const Vector& x, double) { return (g_end(x) - g_start(x)).eval(); };
    h.dtt_field = [n = g_start.dim](const Vector&, double) { return Matrix::Zero(n, n).eval(); };
    return h;
}

inline MetricHomotopy constant_homotopy(const MetricField& g) { return linear_homotopy(g, g); }

/// The family t -> g^{alpha + beta t}.
inline MetricHomotopy affine_reparametrization(const MetricHomotopy& h, double alpha, double beta) {
    MetricHomotopy out = h;
    out.field = [f = h.field, alpha, beta](const Vector& x, double t) { return f(x, alpha + beta * t); };
    out.dt_field = [f = h.dt_field, alpha, beta](const Vector& x, double t) { return (beta * f(x, alpha + beta * t)).eval(); };
    out.dtt_field = [f = h.dtt_field, alpha, beta](const Vector& x, double t) {
        return (beta * beta * f(x, alpha + beta * t)).eval();
    };
    return out;
}

/// B(x, t): the coefficient of 1/a^2 in s(g^t + a^2 dt^2) = s(g^t) + B / a^2,
///   B = 1/4 [tr(A^2) - (tr A)^2] - 1/2 [tr(g^-1 g'') + d/dt tr(A)],  A = g^-1 g',
/// using d/dt tr(A) = tr(g^-1 g'') - tr(A^2).
inline double b_term(const MetricHomotopy& h, const ChartPoint& x, double t) {
    const Matrix ginv = inverse_spd(h(x, t));
    const Matrix a = ginv * h.dt_field(x, t);
    const double tr_a = a.trace();
    const double tr_a2 = (a * a).trace();
    const double tr_gdd = (ginv * h.dtt_field(x, t)).trace();
    const double dt_tr_a = tr_gdd - tr_a2;
    return 0.25 * (tr_a2 - tr_a * tr_a) - 0.5 * (tr_gdd + dt_tr_a);
}

struct HomotopyGrid {
    Box box;                  // where x samples live
    std::vector<int> x_shape; // points per axis
    std::vector<double> t_points;
    double step = kDefaultStep;

    std::vector<Vector> x_points() const { return uniform_grid(box, x_shape); }
    std::size_t size() const {
        std::size_t n = t_points.size();
        for (int c : x_shape) n *= static_cast<std::size_t>(c);
        return n;
    }
};

inline constexpr int kDefaultTPoints = 17;
inline constexpr int kDefaultXPointCap = 4096;

/// Uniform grid: floor(cap^(1/d)) (at least 2) points per x-axis, t_count
/// points on [0, 1] including the endpoints.
inline HomotopyGrid make_grid(const Box& box, int x_cap = kDefaultXPointCap, int t_count = kDefaultTPoints,
                              double step = kDefaultStep) {
    if (t_count < 2) throw Error(ErrorCode::OutOfRange, "need at least 2 t samples");
    HomotopyGrid g;
    g.box = box;
    g.step = step;
    const int d = box.dim();
    const int per_axis = d == 0 ? 1 : std::max(2, static_cast<int>(std::floor(std::pow(static_cast<double>(x_cap), 1.0 / d) + 1e-9)));
    g.x_shape.assign(static_cast<std::size_t>(d), per_axis);
    for (int i = 0; i < t_count; ++i) g.t_points.push_back(static_cast<double>(i) / (t_count - 1));
    return g;
}

struct HomotopyStats {
    double s_min = 0.0;
    double B_max = 0.0;
    double B_min = 0.0;
    // sqrt(max(-B_min, 0) / s_min): the stretch that makes s + B / a^2 > 0 at every sample.
    double a_star = 0.0;
    // sqrt(max(B_max, 0) / s_min), the literal max-based value.
    double a_star_max_rule = 0.0;
    std::size_t samples = 0;
    std::vector<int> x_shape;
    std::size_t t_points = 0;
    Vector s_min_x;
    double s_min_t = 0.0;
    Vector B_min_x;
    double B_min_t = 0.0;
};

/// Grid extrema of s(g^t)(x) and B(x, t). Throws when s_min <= 0.
inline HomotopyStats homotopy_stats(const MetricHomotopy& h, const HomotopyGrid& grid) {
    HomotopyStats st;
    st.s_min = std::numeric_limits<double>::infinity();
    st.B_max = -std::numeric_limits<double>::infinity();
    st.B_min = std::numeric_limits<double>::infinity();
    st.x_shape = grid.x_shape;
    st.t_points = grid.t_points.size();
    const std::vector<Vector> xs = grid.x_points();
    if (xs.empty() || grid.t_points.empty()) throw Error(ErrorCode::OutOfRange, "empty homotopy grid");
    for (double t : grid.t_points) {
        const MetricField g = h.at(t);
        for (const Vector& x : xs) {
            const double s = scalar_curvature(g, x, grid.step);
            const double b = b_term(h, x, t);
            if (s < st.s_min) {
                st.s_min = s;
                st.s_min_x = x;
                st.s_min_t = t;
            }
            if (b < st.B_min) {
                st.B_min = b;
                st.B_min_x = x;
                st.B_min_t = t;
            }
            st.B_max = std::max(st.B_max, b);
            ++st.samples;
        }
    }
    if (!(st.s_min > 0.0)) {
        throw Error(ErrorCode::OutOfRange, "homotopy not positive-scalar-curvature (s_min = " + std::to_string(st.s_min) + ")");
    }
    st.a_star = std::sqrt(std::max(-st.B_min, 0.0) / st.s_min);
    st.a_star_max_rule = std::sqrt(std::max(st.B_max, 0.0) / st.s_min);
    return st;
}

/// Default stretch: 1.1 a_star, or 1 when no stretch is needed.
inline double default_stretch(const HomotopyStats& st, double factor = 1.1) {
    return st.a_star > 0.0 ? factor * st.a_star : 1.0;
}

struct StretchedMetric {
    double a = 0.0;
    MetricField field;  // chart X x [0, a]
};

/// G^_a = g^{t/a} + dt^2 on X x [0, a].
inline StretchedMetric stretched_metric(const MetricHomotopy& h, double a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorCode::OutOfRange, "stretch factor must be positive");
    const int n = h.base_dim;
    StretchedMetric out;
    out.a = a;
    out.field.dim = n + 1;
    out.field.domain = h.domain.times(Box::cube(1, 0.0, a));
    out.field.eval = [f = h.field, n, a](const Vector& p) {
        Matrix g = Matrix::Zero(n + 1, n + 1);
        g.topLeftCorner(n, n) = f(p.head(n), p[n] / a);
        g(n, n) = 1.0;
        return g;
    };
    return out;
}

/// G_a = g^t + a^2 dt^2 on X x [0, 1], the pullback of G^_a under t -> a t.
inline MetricField pulled_back_metric(const MetricHomotopy& h, double a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorCode::OutOfRange, "stretch factor must be positive");
    const int n = h.base_dim;
    MetricField out;
    out.dim = n + 1;
    out.domain = h.domain.times(Box::cube(1, 0.0, 1.0));
    out.eval = [f = h.field, n, a](const Vector& p) {
        Matrix g = Matrix::Zero(n + 1, n + 1);
        g.topLeftCorner(n, n) = f(p.head(n), p[n]);
        g(n, n) = a * a;
        return g;
    };
    return out;
}

/// s(g^t)(x) + B(x, t) / a^2.
inline double stretched_scalar_formula(const MetricHomotopy& h, const ChartPoint& x, double t, double a,
                                       double step = kDefaultStep) {
    return scalar_curvature(h.at(t), x, step) + b_term(h, x, t) / (a * a);
}

/// min over the grid of s(g^t)(x) + B(x, t) / a^2 > 0.
inline CertificateReport verify_positive_scalar(const MetricHomotopy& h, double a, const HomotopyGrid& grid) {
    if (!(a > 0.0)) throw Error(ErrorCode::OutOfRange, "stretch factor must be positive");
    double worst = std::numeric_limits<double>::infinity();
    Vector worst_x;
    double worst_t = 0.0;
    std::size_t count = 0;
    const std::vector<Vector> xs = grid.x_points();
    for (double t : grid.t_points) {
        const MetricField g = h.at(t);
        for (const Vector& x : xs) {
            const double v = scalar_curvature(g, x, grid.step) + b_term(h, x, t) / (a * a);
            ++count;
            if (v < worst) {
                worst = v;
                worst_x = x;
                worst_t = t;
            }
        }
    }
    CertificateReport rep = lower_bound_certificate("stretched scalar curvature > 0", worst, 0.0, count);
    rep.passed = worst > 0.0;
    rep.witness["t"] = worst_t;
    rep.witness["a"] = a;
    for (Eigen::Index i = 0; i < worst_x.size(); ++i) rep.witness["x" + std::to_string(i)] = worst_x[i];
    return rep;
}

struct ProductVolume {
    double bound = 0.0;       // sup_t Vol(g^t) * a
    double sup_volume = 0.0;  // sup over the t grid of Vol(g^t)
    double sup_t = 0.0;
    double quadrature = 0.0;  // Vol of g^{t/a} + dt^2 on X x [0, a]
    double refinement_error = 0.0;
    double slack = 0.0;
    bool passed = false;
};

/// Vol(X x [0, a], G^_a) <= a sup_t Vol(X, g^t), with the left side by direct
/// quadrature over h.domain (which must be a quadrature chart covering X).
inline ProductVolume homotopy_volume_bound(const MetricHomotopy& h, double a, const std::vector<double>& t_points,
                                           const std::vector<int>& x_cells, int t_cells = 16,
                                           double tolerance = 1e-3) {
    if (!(a > 0.0)) throw Error(ErrorCode::OutOfRange, "stretch factor must be positive");
    if (t_points.empty()) throw Error(ErrorCode::OutOfRange, "empty t grid");
    ProductVolume out;
    out.sup_volume = -1.0;
    for (double t : t_points) {
        const double v = volume(h.at(t), h.domain, x_cells).value;
        if (v > out.sup_volume) {
            out.sup_volume = v;
            out.sup_t = t;
        }
    }
    out.bound = out.sup_volume * a;
    const StretchedMetric g = stretched_metric(h, a);
    std::vector<int> cells = x_cells;
    cells.push_back(t_cells);
    const VolumeEstimate q = volume(g.field, g.field.domain, cells);
    out.quadrature = q.value;
    out.refinement_error = q.refinement_error;
    out.slack = out.bound - out.quadrature;
    out.passed = out.quadrature <= out.bound + tolerance;
    return out;
}

/// H^1: g_delta -> g_delta^N on the delta-sphere bundle chart (x, phi).
inline MetricHomotopy h1_homotopy(const ModelManifold& model, double delta,
                                  AngularChart chart = AngularChart::StereoNorth) {
    const EndMetricPair ends = end_metrics(model, delta, chart);
    return linear_homotopy(ends.g_delta.field, ends.g_delta_N.field);
}

/// Target end metric h (+) dE^2(radius).
inline MetricField target_end_metric(const MetricField& h_w, int sphere_dim, double radius, AngularChart chart) {
    return product_metric(h_w, round_sphere_metric(sphere_dim, radius, chart));
}

/// H^2: g|_W (+) dE^2(delta) -> h (+) dE^2(radius). Taking radius < delta folds
/// the shrink of the sphere factor into the same homotopy.
inline MetricHomotopy h2_homotopy(const ModelManifold& model, double delta, const MetricField& h_w, double radius,
                                  AngularChart chart = AngularChart::StereoNorth) {
    if (h_w.dim != model.k) throw Error(ErrorCode::DimensionMismatch, "target metric h must live on W");
    if (!(radius > 0.0)) throw Error(ErrorCode::OutOfRange, "sphere radius must be positive");
    const EndMetricPair ends = end_metrics(model, delta, chart);
    return linear_homotopy(ends.g_delta_N.field, target_end_metric(h_w, model.sphere_dim(), radius, chart));
}

/// Box of (x, phi) sample points for homotopy grids: W shrunk by 0.05 times
/// the angular sample box.
inline Box end_sample_box(const ModelManifold& model, AngularChart chart = AngularChart::StereoNorth) {
    return model.w_box().shrunk(0.05).times(angular_sample_box(chart, model.sphere_dim()));
}

}  // namespace psc
