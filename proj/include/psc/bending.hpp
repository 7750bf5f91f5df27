#pragma once

// The planar bending curve gamma in (t, r) coordinates and the rotation
// hypersurface M^gamma it sweeps out inside N_epsilon x R.
//
// Conventions: arclength s, angle theta measured from the r-axis, so
//   dt/ds = sin(theta),  dr/ds = -cos(theta),  dtheta/ds = kappa.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "psc/certificate.hpp"
#include "psc/models.hpp"

namespace psc {

enum class StageKind { Vertical, Arc, Straight, Horizontal };

inline const char* to_string(StageKind k) {
    switch (k) {
        case StageKind::Vertical: return "vertical";
        case StageKind::Arc: return "arc";
        case StageKind::Straight: return "straight";
        case StageKind::Horizontal: return "horizontal";
    }
    return "unknown";
}

struct BendingParams {
    double r1 = 0.1;
    double eps0 = 0.5;
    double A = 0.0;
    int n = 3;
    int k = 0;
    double s_g_min = 0.0;
    // Coefficient c of the -c (n-k-1) kappa sin(theta) / r term.
    double kappa_coefficient = 1.0;
    // Start of the vertical stage; no vertical stage when <= r1.
    double tube_radius = 0.0;
    // Horizontal stage length; r_f / 10 when unset.
    std::optional<double> horizontal_length;
    // Multiplies every arc curvature (arc length shrinks to keep the same turn).
    double arc_curvature_scale = 1.0;

    int codim() const { return n - k; }

    void validate() const {
        if (!(r1 > 0.0) || !std::isfinite(r1)) throw Error(ErrorCode::OutOfRange, "r1 must be positive");
        if (!(eps0 > 0.0) || !std::isfinite(eps0)) throw Error(ErrorCode::OutOfRange, "eps0 must be positive");
        if (!(A >= 0.0) || !std::isfinite(A)) throw Error(ErrorCode::OutOfRange, "A must be nonnegative");
        if (n < 3 || k < 0 || k > n - 3) throw Error(ErrorCode::OutOfRange, "need n >= 3 and 0 <= k <= n - 3");
        if (!std::isfinite(s_g_min)) throw Error(ErrorCode::NonFinite, "s_g_min must be finite");
        if (!(kappa_coefficient >= 0.0)) throw Error(ErrorCode::OutOfRange, "kappa coefficient must be nonnegative");
        if (!(arc_curvature_scale > 0.0)) throw Error(ErrorCode::OutOfRange, "arc curvature scale must be positive");
        if (horizontal_length && !(*horizontal_length > 0.0)) {
            throw Error(ErrorCode::OutOfRange, "horizontal length must be positive");
        }
    }
};

struct CurvePoint {
    double s = 0.0;
    double t = 0.0;
    double r = 0.0;
    double theta = 0.0;
    double kappa = 0.0;
    std::size_t stage = 0;
};

struct CurveStage {
    StageKind kind = StageKind::Straight;
    double length = 0.0;
    double theta_start = 0.0;
    double theta_end = 0.0;
    double kappa = 0.0;        // realized (constant) curvature
    double kappa_bound = 0.0;  // the schedule's bound for this stage
    double r_start = 0.0;
    double r_end = 0.0;
    double t_start = 0.0;
    double t_end = 0.0;
    double s_start = 0.0;

    // Position at local arclength sigma in [0, length]. The chord is written as
    // sigma * sinc(kappa sigma / 2) so tiny stages lose no relative precision.
    CurvePoint at(double sigma) const {
        const double half = 0.5 * kappa * sigma;
        const double sinc = std::abs(half) < 1e-8 ? 1.0 - half * half / 6.0 : std::sin(half) / half;
        const double chord = sigma * sinc;
        const double mid = theta_start + half;
        CurvePoint p;
        p.s = s_start + sigma;
        p.theta = theta_start + kappa * sigma;
        p.r = r_start - chord * std::cos(mid);
        p.t = t_start + chord * std::sin(mid);
        p.kappa = kappa;
        return p;
    }

    double realized_kappa() const { return (theta_end - theta_start) / length; }
};

struct BendingCurve {
    BendingParams params;
    std::vector<CurveStage> stages;
    double theta0 = 0.0;
    double t_f = 0.0;  // t at the end of the bend (start of the horizontal stage)
    double r_f = 0.0;
    int bends = 0;

    double total_length() const {
        return stages.empty() ? 0.0 : stages.back().s_start + stages.back().length;
    }

    /// Arclength of the graph part (arcs and straights).
    double graph_length() const {
        double L = 0.0;
        for (const CurveStage& st : stages) {
            if (st.kind == StageKind::Arc || st.kind == StageKind::Straight) L += st.length;
        }
        return L;
    }

    std::size_t stage_at(double s) const {
        if (stages.empty()) throw Error(ErrorCode::OutOfRange, "empty curve");
        if (!(s >= 0.0 && s <= total_length())) throw Error(ErrorCode::OutOfRange, "arclength outside the curve");
        auto it = std::upper_bound(stages.begin(), stages.end(), s,
                                   [](double v, const CurveStage& st) { return v < st.s_start; });
        return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - stages.begin()) - 1));
    }

    CurvePoint point_on_stage(std::size_t i, double sigma) const {
        const CurveStage& st = stages.at(i);
        CurvePoint p = st.at(std::clamp(sigma, 0.0, st.length));
        p.stage = i;
        return p;
    }

    CurvePoint at(double s) const {
        const std::size_t i = stage_at(s);
        return point_on_stage(i, s - stages[i].s_start);
    }

    double theta_of_s(double s) const { return at(s).theta; }
    double r_of_s(double s) const { return at(s).r; }
    double t_of_s(double s) const { return at(s).t; }
    double kappa_of_s(double s) const { return at(s).kappa; }

    std::size_t first_graph_stage() const {
        for (std::size_t i = 0; i < stages.size(); ++i) {
            if (stages[i].kind != StageKind::Vertical) return i;
        }
        return stages.size();
    }
};

inline constexpr int kMaxBends = 200;
inline constexpr double kUnderflowRadius = 1e-280;

/// sin(theta0) = eps0 / (2 (A + 4n / r1^2)), theta0 <= pi/4.
inline double choose_theta0(const BendingParams& p) {
    p.validate();
    const double s = p.eps0 / (2.0 * (p.A + 4.0 * p.n / (p.r1 * p.r1)));
    return std::min(std::asin(std::min(s, 1.0)), std::numbers::pi / 4);
}

namespace detail {

inline void push_stage(BendingCurve& c, StageKind kind, double length, double kappa, double kappa_bound,
                       std::optional<double> theta_end = std::nullopt) {
    CurveStage st;
    st.kind = kind;
    st.length = length;
    st.kappa = kappa;
    st.kappa_bound = kappa_bound;
    if (c.stages.empty()) {
        st.r_start = c.params.tube_radius > c.params.r1 ? c.params.tube_radius : c.params.r1;
    } else {
        const CurveStage& prev = c.stages.back();
        st.r_start = prev.r_end;
        st.t_start = prev.t_end;
        st.theta_start = prev.theta_end;
        st.s_start = prev.s_start + prev.length;
    }
    const CurvePoint end = st.at(length);
    st.theta_end = theta_end.value_or(end.theta);
    st.r_end = end.r;
    st.t_end = end.t;
    if (!(st.r_end > 0.0)) throw Error(ErrorCode::Underflow, "curve reached r <= 0");
    c.stages.push_back(st);
}

// Arc raising theta by dtheta with curvature kappa (both before the test-hook scale).
inline void push_arc(BendingCurve& c, double kappa, double dtheta, double bound) {
    const double scale = c.params.arc_curvature_scale;
    const double half_pi = std::numbers::pi / 2;
    const double theta = c.stages.empty() ? 0.0 : c.stages.back().theta_end;
    const double k = kappa * scale;
    if (theta + dtheta >= half_pi) {
        push_stage(c, StageKind::Arc, (half_pi - theta) / k, k, bound, half_pi);
    } else {
        push_stage(c, StageKind::Arc, dtheta / k, k, bound);
    }
}

}  // namespace detail

inline constexpr double kArcMargin = 1e-6;

/// Arcs use kappa = sin(theta) / (D r) with D = max(2, c) (1 + kArcMargin), so
/// the term (n-k-2) sin/r - c kappa stays positive for a calibrated c above 2
/// and is not lost to rounding at the start of an arc.
inline double arc_divisor(const BendingParams& p) { return std::max(2.0, p.kappa_coefficient) * (1.0 + kArcMargin); }

/// The bending schedule: vertical drop to r1, a first arc of length r1/2 to
/// theta0, then alternating straight runs and arcs that each add
/// sin(theta_j)/4 until theta = pi/2, then a horizontal stage.
inline BendingCurve construct_gamma(const BendingParams& params) {
    params.validate();
    BendingCurve c;
    c.params = params;
    c.theta0 = choose_theta0(params);
    const double half_pi = std::numbers::pi / 2;

    if (params.tube_radius > params.r1) {
        detail::push_stage(c, StageKind::Vertical, params.tube_radius - params.r1, 0.0, 0.0);
    }
    const double r1 = params.r1;
    detail::push_arc(c, 2.0 * c.theta0 / r1, c.theta0, 2.0 / r1);

    double r_prev = r1;
    while (c.stages.back().theta_end < half_pi) {
        if (++c.bends > kMaxBends) {
            throw Error(ErrorCode::NonTermination, "bending schedule exceeded " + std::to_string(kMaxBends) + " bends");
        }
        const double theta = c.stages.back().theta_end;
        const double sin_theta = std::sin(theta);
        double target = 0.75 * r_prev;
        if (params.A > 0.0) target = std::min(target, sin_theta / params.A);
        const double r = c.stages.back().r_end;
        const double run = r > target ? (r - target) / std::cos(theta) : r / 100.0;
        detail::push_stage(c, StageKind::Straight, run, 0.0, 0.0);
        const double r_next = c.stages.back().r_end;
        if (!(r_next > kUnderflowRadius)) throw Error(ErrorCode::Underflow, "bending radius underflow");
        detail::push_arc(c, sin_theta / (arc_divisor(params) * r_next), sin_theta / 4.0, sin_theta / (2.0 * r_next));
        r_prev = r_next;
    }
    c.r_f = c.stages.back().r_end;
    c.t_f = c.stages.back().t_end;
    if (!(c.r_f > kUnderflowRadius)) throw Error(ErrorCode::Underflow, "final radius underflow");
    detail::push_stage(c, StageKind::Horizontal, params.horizontal_length.value_or(c.r_f / 10.0), 0.0, 0.0);
    return c;
}

/// A single-stage curve starting at (t = 0, r, theta); used to probe the
/// induced curvature at arbitrary (r, theta, kappa).
inline BendingCurve make_probe_curve(const BendingParams& params, double r, double theta, double kappa, double length) {
    if (!(r > 0.0 && length > 0.0)) throw Error(ErrorCode::OutOfRange, "probe needs r > 0 and length > 0");
    BendingCurve c;
    c.params = params;
    CurveStage st;
    st.kind = kappa == 0.0 ? StageKind::Straight : StageKind::Arc;
    st.length = length;
    st.kappa = kappa;
    st.kappa_bound = kappa;
    st.r_start = r;
    st.theta_start = theta;
    const CurvePoint end = st.at(length);
    st.theta_end = end.theta;
    st.r_end = end.r;
    st.t_end = end.t;
    if (!(st.r_end > 0.0)) throw Error(ErrorCode::OutOfRange, "probe curve leaves r > 0");
    c.stages.push_back(st);
    c.r_f = st.r_end;
    c.t_f = st.t_end;
    return c;
}

/// s_g + O1 sin^2 + (m-1)(m-2) sin^2 / r^2 - c (m-1) kappa sin / r, m = n - k.
inline double tube_curvature_formula(double r, double theta, double kappa, const BendingParams& params, double O1) {
    if (!(r > 0.0)) throw Error(ErrorCode::OutOfRange, "tube curvature formula needs r > 0");
    const double m = params.codim();
    const double s = std::sin(theta);
    // Factored so the bracket vanishes exactly where the two terms balance.
    const double q = s / r;
    return params.s_g_min + O1 * s * s + (m - 1.0) * q * ((m - 2.0) * q - params.kappa_coefficient * kappa);
}

inline double worst_case_formula(const CurvePoint& p, const BendingParams& params) {
    return tube_curvature_formula(p.r, p.theta, p.kappa, params, -params.A);
}

/// Evaluates the worst-case formula (O1 = -A) at `samples` points spread over
/// every stage (endpoints included) and checks min >= s_g_min - eps0.
inline CertificateReport certify_curvature_bound(const BendingCurve& curve, const BendingParams& params,
                                                 std::size_t samples) {
    if (curve.stages.empty()) throw Error(ErrorCode::OutOfRange, "empty curve");
    const std::size_t per_stage = std::max<std::size_t>(3, samples / curve.stages.size());
    double worst = std::numeric_limits<double>::infinity();
    CurvePoint worst_point;
    std::size_t count = 0;
    for (std::size_t i = 0; i < curve.stages.size(); ++i) {
        const double len = curve.stages[i].length;
        for (std::size_t j = 0; j < per_stage; ++j) {
            const CurvePoint p = curve.point_on_stage(i, len * static_cast<double>(j) / static_cast<double>(per_stage - 1));
            const double v = worst_case_formula(p, params);
            ++count;
            if (v < worst) {
                worst = v;
                worst_point = p;
            }
        }
    }
    CertificateReport rep =
        lower_bound_certificate("bend scalar curvature >= s_g_min - eps0", worst, params.s_g_min - params.eps0, count);
    rep.witness = {{"s", worst_point.s},       {"r", worst_point.r},         {"theta", worst_point.theta},
                   {"kappa", worst_point.kappa}, {"stage", static_cast<double>(worst_point.stage)}};
    return rep;
}

struct CurveAudit {
    bool theta_monotone = true;
    bool theta_endpoints = true;     // starts at 0, ends at pi/2
    bool r_monotone = true;          // nonincreasing; strictly decreasing on graph stages
    bool continuous = true;          // joins match to 1e-12 (relative to r)
    bool kappa_within_bound = true;  // realized arc curvature <= recorded bound
    bool radius_decrease = true;     // r_{j-1} - r_j >= r_{j-1} / 4 between bend starts
    bool late_bends = true;          // <= 10 bends once sin(theta) >= 1/2, each adding >= 1/8
    bool t_f_bound = true;           // t_f <= 7 r1
    bool length_bound = true;        // graph arclength <= 7 r1
    double t_f_ratio = 0.0;
    double length_ratio = 0.0;

    bool ok() const {
        return theta_monotone && theta_endpoints && r_monotone && continuous && kappa_within_bound &&
               radius_decrease && late_bends && t_f_bound && length_bound;
    }
};

/// Checks the structural claims of the schedule on a constructed curve.
inline CurveAudit audit_curve(const BendingCurve& c) {
    CurveAudit a;
    const double r1 = c.params.r1;
    const double half_pi = std::numbers::pi / 2;
    a.theta_endpoints = !c.stages.empty() && c.stages.front().theta_start == 0.0 &&
                        std::abs(c.stages.back().theta_end - half_pi) <= 1e-12;
    std::vector<double> bend_starts{r1};
    int late = 0;
    for (std::size_t i = 0; i < c.stages.size(); ++i) {
        const CurveStage& st = c.stages[i];
        if (st.theta_end < st.theta_start) a.theta_monotone = false;
        if (st.r_end > st.r_start) a.r_monotone = false;
        if ((st.kind == StageKind::Arc || st.kind == StageKind::Straight) && !(st.r_end < st.r_start)) {
            a.r_monotone = false;
        }
        if (i > 0) {
            const CurveStage& prev = c.stages[i - 1];
            const double scale = std::max(prev.r_end, 1e-300);
            if (std::abs(prev.r_end - st.r_start) > 1e-12 * scale || prev.theta_end != st.theta_start ||
                std::abs(prev.t_end - st.t_start) > 1e-12 * std::max(r1, prev.t_end)) {
                a.continuous = false;
            }
        }
        if (st.kind == StageKind::Arc) {
            if (st.realized_kappa() > st.kappa_bound * (1.0 + 1e-12)) a.kappa_within_bound = false;
            if (i > 0 && c.stages[i - 1].kind == StageKind::Straight) {
                bend_starts.push_back(st.r_start);
                if (std::sin(st.theta_start) >= 0.5) {
                    ++late;
                    const bool final_arc = std::abs(st.theta_end - half_pi) <= 1e-12;
                    if (!final_arc && st.theta_end - st.theta_start < 0.125) a.late_bends = false;
                }
            }
        }
    }
    if (late > 10) a.late_bends = false;
    for (std::size_t j = 1; j < bend_starts.size(); ++j) {
        if (bend_starts[j - 1] - bend_starts[j] < 0.25 * bend_starts[j - 1] * (1.0 - 1e-12)) a.radius_decrease = false;
    }
    a.t_f_ratio = c.t_f / r1;
    a.length_ratio = c.graph_length() / r1;
    a.t_f_bound = c.t_f <= 7.0 * r1;
    a.length_bound = c.graph_length() <= 7.0 * r1;
    return a;
}

namespace detail {

// Induced metric of M^gamma at tube point (x, rho sigma(phi)) and curve
// velocity (dr, dt) along the last chart axis.
inline Matrix induced_metric_at(const MetricField& tube, int k, int d, AngularChart chart, const Vector& p,
                                double rho, double dr, double dt) {
    const int n = k + d + 1;
    const SphereEmbedding e = sphere_embedding(chart, p.segment(k, d));
    Vector q(n);
    q << p.head(k), rho * e.point;
    Matrix jac = Matrix::Zero(n, n);
    jac.topLeftCorner(k, k).setIdentity();
    jac.block(k, k, d + 1, d) = rho * e.jacobian;
    jac.block(k, n - 1, d + 1, 1) = dr * e.point;
    Matrix g = jac.transpose() * tube(q) * jac;
    g(n - 1, n - 1) += dt * dt;
    return symmetrized(g);
}

inline void check_curve_fits(const BendingCurve& curve, const ModelManifold& model) {
    if (curve.params.n != model.n || curve.params.k != model.k) {
        throw Error(ErrorCode::DimensionMismatch, "curve parameters do not match the model dimensions");
    }
    double r_max = 0.0;
    for (const CurveStage& st : curve.stages) r_max = std::max(r_max, st.r_start);
    if (r_max > model.epsilon) throw Error(ErrorCode::OutOfRange, "curve leaves the tube (r > epsilon)");
}

}  // namespace detail

/// Induced metric of M^gamma in the chart (x, phi, s), s the global arclength.
inline MetricField induced_tube_metric(const BendingCurve& curve, const ModelManifold& model,
                                       AngularChart chart = AngularChart::StereoNorth) {
    detail::check_curve_fits(curve, model);
    const int k = model.k;
    const int d = model.sphere_dim();
    MetricField out;
    out.dim = model.n;
    out.domain = model.w_box().times(angular_domain(chart, d)).times(Box::cube(1, 0.0, curve.total_length()));
    out.eval = [curve, tube = model.tube_chart, k, d, chart](const Vector& p) {
        const CurvePoint c = curve.at(p[k + d]);
        return detail::induced_metric_at(tube, k, d, chart, p, c.r, -std::cos(c.theta), std::sin(c.theta));
    };
    return out;
}

/// Chart length unit of a stage: its starting radius.
inline double stage_scale(const CurveStage& st) { return st.r_start; }

inline constexpr double kStagePad = 1e-2;

/// Induced metric on one stage in the chart (x, phi, u) with sigma = u * r_start,
/// u in [0, length / r_start]. Measuring arclength in units of the local radius
/// keeps every chart axis at the same scale, so finite differences stay well
/// conditioned on stages many orders of magnitude smaller than r1. The domain
/// is padded by the analytic continuation of the stage (a circle arc or a line)
/// so short stages can still be sampled; `exact_domain` drops the padding.
inline MetricField induced_stage_metric(const BendingCurve& curve, std::size_t stage, const ModelManifold& model,
                                        AngularChart chart = AngularChart::StereoNorth, bool exact_domain = false) {
    detail::check_curve_fits(curve, model);
    const CurveStage st = curve.stages.at(stage);
    const int k = model.k;
    const int d = model.sphere_dim();
    const double ell = stage_scale(st);
    const double top = st.kind == StageKind::Vertical || exact_domain ? 0.0 : kStagePad;
    const double bottom = exact_domain ? 0.0 : kStagePad;
    MetricField out;
    out.dim = model.n;
    out.domain = model.w_box().times(angular_domain(chart, d)).times(Box::cube(1, -top, st.length / ell + bottom));
    out.eval = [st, ell, tube = model.tube_chart, k, d, chart](const Vector& p) {
        const CurvePoint c = st.at(p[k + d] * ell);
        return detail::induced_metric_at(tube, k, d, chart, p, c.r, -ell * std::cos(c.theta), ell * std::sin(c.theta));
    };
    return out;
}

/// Scalar curvature of the ambient tube metric at a tube-chart point.
inline double ambient_scalar(const ModelManifold& model, const Vector& q) {
    if (model.name == "flat_torus") return 0.0;
    if (model.name == "sphere_point") return model.n * (model.n - 1.0);
    return scalar_curvature(model.tube_chart, q, 1e-4 * model.epsilon);
}

struct InducedSample {
    std::size_t stage = 0;
    double fraction = 0.0;  // position within the stage, in [0, 1]
    double r = 0.0;
    double theta = 0.0;
    double kappa = 0.0;
    double s_oracle = 0.0;   // finite-difference scalar curvature of M^gamma
    double s_ambient = 0.0;  // s_g at the underlying tube point
};

inline constexpr double kInducedStep = 1e-4;

/// Default sampling point in the W and angular directions.
inline Vector induced_base_point(const ModelManifold& model, AngularChart chart) {
    const int k = model.k;
    const int d = model.sphere_dim();
    Vector p(k + d + 1);
    p.head(k) = model.w_box().center();
    if (k > 0) p[0] += 0.7;
    const Box ang = angular_sample_box(chart, d);
    p.segment(k, d) = ang.center() + 0.35 * (ang.upper - ang.center());
    p[k + d] = 0.5;
    return p;
}

/// Finite-difference scalar curvature of M^gamma at fractional positions of
/// one stage. Samples stay 10 steps away from the joins; a stage too short for
/// that is sampled once, at its midpoint.
inline std::vector<InducedSample> sample_stage_curvature(const BendingCurve& curve, std::size_t stage,
                                                         const ModelManifold& model,
                                                         const std::vector<double>& fractions,
                                                         double step = kInducedStep,
                                                         AngularChart chart = AngularChart::StereoNorth) {
    const MetricField g = induced_stage_metric(curve, stage, model, chart);
    const int k = model.k;
    const int d = model.sphere_dim();
    const CurveStage& st = curve.stages.at(stage);
    const double span = st.length / stage_scale(st);
    const double margin = 10.0 * step;
    std::vector<double> us;
    if (span <= 2.0 * margin) {
        us.push_back(0.5 * span);
    } else {
        for (double f : fractions) {
            if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorCode::OutOfRange, "stage fraction outside [0, 1]");
            us.push_back(std::clamp(f * span, margin, span - margin));
        }
    }
    std::vector<InducedSample> out;
    Vector p = induced_base_point(model, chart);
    for (double u : us) {
        p[k + d] = u;
        const CurvePoint c = curve.point_on_stage(stage, u * stage_scale(st));
        InducedSample s;
        s.stage = stage;
        s.fraction = u / span;
        s.r = c.r;
        s.theta = c.theta;
        s.kappa = c.kappa;
        s.s_oracle = scalar_curvature(g, p, step);
        const SphereEmbedding e = sphere_embedding(chart, p.segment(k, d));
        Vector q(model.n);
        q << p.head(k), c.r * e.point;
        s.s_ambient = ambient_scalar(model, q);
        out.push_back(s);
    }
    return out;
}

/// Samples every stage of the curve at `per_stage` interior positions.
inline std::vector<InducedSample> sample_induced_curvature(const BendingCurve& curve, const ModelManifold& model,
                                                           int per_stage, double step = kInducedStep) {
    std::vector<double> fractions;
    for (int j = 0; j < per_stage; ++j) fractions.push_back((j + 0.5) / per_stage);
    std::vector<InducedSample> out;
    for (std::size_t i = 0; i < curve.stages.size(); ++i) {
        const auto part = sample_stage_curvature(curve, i, model, fractions, step);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

namespace detail {

// y = s_oracle - s_ambient - (m-1)(m-2) sin^2 / r^2 and x = -(m-1) kappa sin / r,
// so that y = c x + O1 sin^2.
inline std::pair<double, double> formula_split(const InducedSample& s, int m) {
    const double sn = std::sin(s.theta);
    const double y = s.s_oracle - s.s_ambient - (m - 1.0) * (m - 2.0) * sn * sn / (s.r * s.r);
    const double x = -(m - 1.0) * s.kappa * sn / s.r;
    return {x, y};
}

// Magnitude of the curvature terms the finite-difference oracle has to cancel:
// its error is a fixed fraction of this, whatever theta is.
inline double formula_scale(const InducedSample& s, int m) {
    return 1.0 + std::abs(s.s_ambient) + (m - 1.0) * std::max(m - 2.0, 1.0) / (s.r * s.r) +
           (m - 1.0) * std::abs(s.kappa) / s.r;
}

}  // namespace detail

struct FormulaFit {
    double kappa_coefficient = 0.0;
    double max_relative_residual = 0.0;  // max |y - c x| / scale
    std::size_t samples = 0;
};

/// Scale-weighted least-squares fit of c in y = c x (no O(1) term), for flat
/// models where the O(1) term vanishes.
inline FormulaFit fit_kappa_coefficient(const std::vector<InducedSample>& samples, int m) {
    double sxx = 0.0, sxy = 0.0;
    for (const InducedSample& s : samples) {
        const auto [x, y] = detail::formula_split(s, m);
        const double w = 1.0 / detail::formula_scale(s, m);
        sxx += w * w * x * x;
        sxy += w * w * x * y;
    }
    if (!(sxx > 0.0)) throw Error(ErrorCode::OutOfRange, "no curved samples to fit the kappa coefficient");
    FormulaFit fit;
    fit.kappa_coefficient = sxy / sxx;
    fit.samples = samples.size();
    for (const InducedSample& s : samples) {
        const auto [x, y] = detail::formula_split(s, m);
        fit.max_relative_residual =
            std::max(fit.max_relative_residual, std::abs(y - fit.kappa_coefficient * x) / detail::formula_scale(s, m));
    }
    return fit;
}

struct FormulaCalibration {
    double kappa_coefficient = 0.0;
    double A = 0.0;  // 1.1 * max |O(1)| over the probes
    std::size_t probes = 0;
};

inline constexpr double kCalibrationMargin = 1.1;

/// Measures c and the O(1) bound on a model with single-stage probe curves at
/// radii 0.3 eps and 0.6 eps, angles in (0, pi/2) and curvatures kappa r in
/// {0, 0.5, 2}: joint least squares of y = c x + a sin^2, then
/// A = 1.1 max |y - c x| / sin^2.
inline FormulaCalibration calibrate_tube_formula(const ModelManifold& model, double step = kInducedStep) {
    BendingParams bp;
    bp.n = model.n;
    bp.k = model.k;
    const int m = model.codim();
    std::vector<InducedSample> samples;
    for (double rf : {0.3, 0.6}) {
        const double r = rf * model.epsilon;
        for (double theta : {0.2, 0.5, 0.9, 1.3}) {
            for (double kr : {0.0, 0.5, 2.0}) {
                const BendingCurve probe = make_probe_curve(bp, r, theta, kr / r, 0.1 * r);
                const auto s = sample_stage_curvature(probe, 0, model, {0.5}, step);
                samples.insert(samples.end(), s.begin(), s.end());
            }
        }
    }
    double sxx = 0.0, sxz = 0.0, szz = 0.0, sxy = 0.0, szy = 0.0;
    for (const InducedSample& s : samples) {
        const auto [x, y] = detail::formula_split(s, m);
        const double z = std::pow(std::sin(s.theta), 2);
        sxx += x * x;
        sxz += x * z;
        szz += z * z;
        sxy += x * y;
        szy += z * y;
    }
    const double det = sxx * szz - sxz * sxz;
    FormulaCalibration cal;
    cal.kappa_coefficient = (sxy * szz - szy * sxz) / det;
    cal.probes = samples.size();
    double worst = 0.0;
    for (const InducedSample& s : samples) {
        const auto [x, y] = detail::formula_split(s, m);
        worst = std::max(worst, std::abs(y - cal.kappa_coefficient * x) / std::pow(std::sin(s.theta), 2));
    }
    cal.A = kCalibrationMargin * worst;
    return cal;
}

struct GammaVolume {
    double bound = 0.0;            // Vol_g(N_r1) + 2 (1 + defect) K t_f
    double quadrature = 0.0;       // Vol of the graph part of M^gamma
    double quadrature_error = 0.0; // summed refinement indicators
    double ball_volume = 0.0;      // Vol_g(N_r1)
    double radial_defect = 0.0;
    double K = 0.0;
    double slack = 0.0;
    bool passed = false;
};

inline double gamma_volume_bound(double ball_volume, double K, double t_f, double radial_defect = 0.0) {
    return ball_volume + 2.0 * (1.0 + radial_defect) * K * t_f;
}

struct VolumeCells {
    int w = 4;
    int angular = 8;
    int radial = 16;       // per stage, along the curve
    int ball_radial = 64;  // along rho for Vol_g(N_r1)
};

/// Quadrature volume of the graph part (arcs, straights) of M^gamma, stage by stage.
inline VolumeEstimate gamma_graph_volume(const BendingCurve& curve, const ModelManifold& model,
                                         const VolumeCells& cells = {}) {
    VolumeEstimate total;
    const int d = model.sphere_dim();
    std::vector<int> per_axis(static_cast<std::size_t>(model.k), cells.w);
    per_axis.insert(per_axis.end(), static_cast<std::size_t>(d), cells.angular);
    per_axis.push_back(cells.radial);
    total.cells = per_axis;
    for (std::size_t i = 0; i < curve.stages.size(); ++i) {
        const StageKind kind = curve.stages[i].kind;
        if (kind != StageKind::Arc && kind != StageKind::Straight) continue;
        const MetricField g = induced_stage_metric(curve, i, model, AngularChart::Hyperspherical, true);
        const VolumeEstimate v = volume(g, g.domain, per_axis);
        total.value += v.value;
        total.refinement_error += v.refinement_error;
    }
    return total;
}

/// Volume estimate for the bend: bound Vol_g(N_r1) + 2 (1 + u) K t_f with u the
/// measured radial defect, checked against direct quadrature of M^gamma.
inline GammaVolume gamma_volume_estimate(const BendingCurve& curve, const ModelManifold& model, double K,
                                         const VolumeCells& cells = {}, double tolerance = 1e-3) {
    if (!(K > 0.0)) throw Error(ErrorCode::OutOfRange, "shell constant must be positive");
    GammaVolume out;
    out.K = K;
    const double r1 = curve.params.r1;
    out.ball_volume = shell_volume(model, 0.0, r1, cells.w, cells.angular, cells.ball_radial).value;
    out.radial_defect = max_radial_defect(model, curve.r_f > 0.0 ? std::max(curve.r_f, 1e-6 * r1) : 1e-6 * r1, r1);
    out.bound = gamma_volume_bound(out.ball_volume, K, curve.t_f, out.radial_defect);
    const VolumeEstimate q = gamma_graph_volume(curve, model, cells);
    out.quadrature = q.value;
    out.quadrature_error = q.refinement_error;
    out.slack = out.bound - out.quadrature;
    out.passed = out.quadrature <= out.bound + tolerance;
    return out;
}

}  // namespace psc
