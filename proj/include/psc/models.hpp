#pragma once

// Explicit (M, g, W) model instances. Every model is written in tube
// coordinates (x_1..x_k on W, y_1..y_{n-k} normal coordinates from an
// orthonormal frame), which is where all of the surgery happens.

#include <cmath>
#include <numbers>
#include <string>

#include "psc/curvature.hpp"

namespace psc {

/// Charts on the unit sphere S^{d} used for the sphere-bundle directions.
/// The stereographic patches are for finite differences (sampled inside
/// |u| <= 0.9); the hyperspherical chart covers the sphere up to a null set
/// and is used for quadrature.
enum class AngularChart { StereoNorth, StereoSouth, Hyperspherical };

inline const char* to_string(AngularChart c) {
    switch (c) {
        case AngularChart::StereoNorth: return "stereo_north";
        case AngularChart::StereoSouth: return "stereo_south";
        case AngularChart::Hyperspherical: return "hyperspherical";
    }
    return "unknown";
}

inline constexpr double kStereoSampleRadius = 0.9;

struct SphereEmbedding {
    Vector point;     // sigma(phi) on S^d in R^{d+1}
    Matrix jacobian;  // (d+1) x d
};

/// Embedding sigma : chart -> S^d in R^{d+1} together with its Jacobian.
inline SphereEmbedding sphere_embedding(AngularChart chart, const Vector& phi) {
    const int d = static_cast<int>(phi.size());
    SphereEmbedding e{Vector::Zero(d + 1), Matrix::Zero(d + 1, d)};
    if (chart == AngularChart::Hyperspherical) {
        // sigma_i = sin(phi_0)...sin(phi_{i-1}) cos(phi_i); the last component has no cosine.
        for (int i = 0; i <= d; ++i) {
            const int lead = std::min(i, d);
            const double tail = i < d ? std::cos(phi[i]) : 1.0;
            double prod = 1.0;
            for (int j = 0; j < lead; ++j) prod *= std::sin(phi[j]);
            e.point[i] = prod * tail;
            for (int l = 0; l < lead; ++l) {
                double v = tail;
                for (int j = 0; j < lead; ++j) v *= (j == l) ? std::cos(phi[j]) : std::sin(phi[j]);
                e.jacobian(i, l) = v;
            }
            if (i < d) e.jacobian(i, i) = -prod * std::sin(phi[i]);
        }
        return e;
    }
    const double sign = chart == AngularChart::StereoNorth ? 1.0 : -1.0;
    const double u2 = phi.squaredNorm();
    const double q = 1.0 + u2;
    for (int i = 0; i < d; ++i) {
        e.point[i] = 2.0 * phi[i] / q;
        for (int j = 0; j < d; ++j) {
            e.jacobian(i, j) = (i == j ? 2.0 / q : 0.0) - 4.0 * phi[i] * phi[j] / (q * q);
        }
        e.jacobian(d, i) = sign * 4.0 * phi[i] / (q * q);
    }
    e.point[d] = sign * (u2 - 1.0) / q;
    return e;
}

inline Box angular_domain(AngularChart chart, int d) {
    if (chart == AngularChart::Hyperspherical) {
        Vector lo = Vector::Zero(d);
        Vector hi = Vector::Constant(d, std::numbers::pi);
        if (d > 0) hi[d - 1] = 2.0 * std::numbers::pi;
        return Box(lo, hi);
    }
    return Box::cube(d, -1.0, 1.0);
}

/// Region of the angular chart used for pointwise sampling.
inline Box angular_sample_box(AngularChart chart, int d) {
    if (chart == AngularChart::Hyperspherical) return angular_domain(chart, d).shrunk(0.1);
    return Box::cube(d, -kStereoSampleRadius / std::sqrt(static_cast<double>(std::max(d, 1))),
                     kStereoSampleRadius / std::sqrt(static_cast<double>(std::max(d, 1))));
}

/// Area of the unit sphere S^d.
inline double unit_sphere_area(int d) {
    const double m = d + 1.0;
    return 2.0 * std::pow(std::numbers::pi, m / 2.0) / std::tgamma(m / 2.0);
}

struct ModelManifold {
    std::string name;
    int n = 0;
    int k = 0;
    double epsilon = 0.0;
    double amplitude = 0.0;
    // Metric on W-coords x D^{n-k}(epsilon) (box [0,2pi]^k x [-eps,eps]^{n-k}).
    MetricField tube_chart;
    // g restricted to W, on [0,2pi]^k.
    MetricField w_metric;
    // Minimum of the ambient scalar curvature over the tube.
    double ambient_scalar_min = 0.0;
    // Vol_g(M). The torus models are flat outside the tube.
    double ambient_volume = 0.0;

    int codim() const { return n - k; }
    int sphere_dim() const { return n - k - 1; }
    Box w_box() const { return Box::cube(k, 0.0, 2.0 * std::numbers::pi); }
};

struct EndMetric {
    double delta = 0.0;
    AngularChart chart = AngularChart::StereoNorth;
    MetricField field;
};

struct EndMetricPair {
    EndMetric g_delta;
    EndMetric g_delta_N;
};

struct RadialDefect {
    ChartPoint point;
    double defect = 0.0;
};

namespace detail {

inline Box tube_box(int k, int m, double epsilon) {
    return Box::cube(k, 0.0, 2.0 * std::numbers::pi).times(Box::cube(m, -epsilon, epsilon));
}

// sin^2(r)/r^2 and (1 - sin^2(r)/r^2)/r^2, with series near r = 0.
inline double sinc2(double r) {
    if (std::abs(r) < 1e-4) return 1.0 - r * r / 3.0;
    const double s = std::sin(r) / r;
    return s * s;
}

inline double sinc2_defect(double r) {
    if (std::abs(r) < 0.1) {
        const double r2 = r * r;
        return 1.0 / 3.0 - r2 * (2.0 / 45.0 - r2 * (1.0 / 315.0 - r2 * 2.0 / 14175.0));
    }
    return (1.0 - sinc2(r)) / (r * r);
}

inline void check_dims(int n, int k, int n_lo, int n_hi) {
    if (n < n_lo || n > n_hi) {
        throw Error(ErrorCode::OutOfRange, "ambient dimension " + std::to_string(n) + " outside [" +
                                               std::to_string(n_lo) + ", " + std::to_string(n_hi) + "]");
    }
    if (k < 0 || k > n - 3) throw Error(ErrorCode::OutOfRange, "need 0 <= k <= n - 3 (codimension >= 3)");
}

}  // namespace detail

/// W = T^k inside the flat torus T^n = (R / 2 pi Z)^n. The tube chart is the
/// identity everywhere, so r(x, y) = |y| exactly and all o(r) terms vanish.
inline ModelManifold flat_torus_model(int n, int k, double epsilon) {
    detail::check_dims(n, k, 3, 6);
    if (!(epsilon > 0.0 && epsilon < 0.25)) throw Error(ErrorCode::OutOfRange, "flat torus needs 0 < epsilon < 1/4");
    ModelManifold m;
    m.name = "flat_torus";
    m.n = n;
    m.k = k;
    m.epsilon = epsilon;
    m.tube_chart = flat_metric(n, detail::tube_box(k, n - k, epsilon));
    m.w_metric = flat_metric(k, m.w_box());
    m.ambient_scalar_min = 0.0;
    m.ambient_volume = std::pow(2.0 * std::numbers::pi, n);
    return m;
}

/// W = point in the unit round S^n; tube chart is dr^2 + sin^2(r) dOmega^2
/// written in Cartesian geodesic normal coordinates.
inline ModelManifold sphere_point_model(int n, double epsilon) {
    if (n < 3 || n > 5) throw Error(ErrorCode::OutOfRange, "sphere_point needs 3 <= n <= 5");
    if (!(epsilon > 0.0 && epsilon < std::numbers::pi / 2)) {
        throw Error(ErrorCode::OutOfRange, "sphere_point needs 0 < epsilon < pi/2");
    }
    ModelManifold m;
    m.name = "sphere_point";
    m.n = n;
    m.k = 0;
    m.epsilon = epsilon;
    m.tube_chart = MetricField{n, detail::tube_box(0, n, epsilon), [n](const Vector& y) {
                                   const double r = y.norm();
                                   // g = f I + (1 - f) y y^T / r^2,  f = sin^2 r / r^2
                                   Matrix g = detail::sinc2(r) * Matrix::Identity(n, n);
                                   g += detail::sinc2_defect(r) * (y * y.transpose());
                                   return g;
                               }};
    m.w_metric = flat_metric(0, Box::cube(0, 0.0, 0.0));
    m.ambient_scalar_min = n * (n - 1.0);
    m.ambient_volume = unit_sphere_area(n);
    return m;
}

/// Flat torus model with cross terms g(d/dx_1, d/dy) = c sin(x_1) R y, where R
/// rotates the (y_1, y_2) plane by 45 degrees. The cross terms vanish linearly
/// in r = |y| and have both radial and tangential parts. Needs k >= 1.
inline ModelManifold perturbed_tube_model(int n, int k, double epsilon, double amplitude) {
    detail::check_dims(n, k, 3, 6);
    if (k < 1) throw Error(ErrorCode::OutOfRange, "perturbed_tube needs k >= 1 (the perturbation lives on x_1)");
    if (!(epsilon > 0.0 && epsilon < 0.25)) throw Error(ErrorCode::OutOfRange, "perturbed_tube needs 0 < epsilon < 1/4");
    ModelManifold m;
    m.name = "perturbed_tube";
    m.n = n;
    m.k = k;
    m.epsilon = epsilon;
    m.amplitude = amplitude;
    const int codim = n - k;
    m.tube_chart = MetricField{n, detail::tube_box(k, codim, epsilon), [n, k, amplitude](const Vector& p) {
                                   Matrix g = Matrix::Identity(n, n);
                                   if (amplitude == 0.0) return g;
                                   const double c = amplitude * std::sin(p[0]);
                                   const double y1 = p[k];
                                   const double y2 = p[k + 1];
                                   const double h = std::numbers::sqrt2 / 2.0;
                                   Vector v = p.tail(n - k);
                                   v[0] = h * (y1 - y2);
                                   v[1] = h * (y1 + y2);
                                   for (int a = 0; a < n - k; ++a) {
                                       g(0, k + a) = c * v[a];
                                       g(k + a, 0) = c * v[a];
                                   }
                                   return g;
                               }};
    m.w_metric = flat_metric(k, m.w_box());

    // Positivity sweep; eigenvalues are 1 +- |c sin(x_1) R y|.
    const Box box = m.tube_chart.domain;
    for (const Vector& p : uniform_grid(box, 5)) {
        if (!(min_eigenvalue(m.tube_chart(p)) > 0.0)) {
            throw Error(ErrorCode::NotPositiveDefinite, "perturbed tube metric is indefinite at a grid point");
        }
    }

    // Ambient scalar curvature over the tube, sampled by the finite-difference oracle.
    double s_min = std::numeric_limits<double>::infinity();
    const Box inner = Box::cube(k, 0.0, 2.0 * std::numbers::pi).shrunk(0.05).times(Box::cube(codim, -0.6 * epsilon, 0.6 * epsilon));
    for (const Vector& p : uniform_grid(inner, 3)) {
        s_min = std::min(s_min, scalar_curvature(m.tube_chart, p, 1e-3 * epsilon));
    }
    m.ambient_scalar_min = s_min;
    m.ambient_volume = std::pow(2.0 * std::numbers::pi, n);
    return m;
}

struct ModelSpec {
    std::string name = "flat_torus";
    int n = 4;
    int k = 1;
    double epsilon = 0.2;
    double amplitude = 0.0;
};

inline ModelManifold make_model(const ModelSpec& spec) {
    if (spec.name == "flat_torus") return flat_torus_model(spec.n, spec.k, spec.epsilon);
    if (spec.name == "sphere_point") return sphere_point_model(spec.n, spec.epsilon);
    if (spec.name == "perturbed_tube") return perturbed_tube_model(spec.n, spec.k, spec.epsilon, spec.amplitude);
    throw Error(ErrorCode::Config, "unknown model '" + spec.name + "'");
}

/// Metric of the tube in polar form: chart (x, phi, rho) -> pullback of the
/// tube chart under y = rho * sigma(phi).
inline MetricField tube_polar_metric(const ModelManifold& model, AngularChart chart) {
    const int k = model.k;
    const int d = model.sphere_dim();
    const int n = model.n;
    MetricField tube = model.tube_chart;
    MetricField out;
    out.dim = n;
    out.domain = model.w_box().times(angular_domain(chart, d)).times(Box::cube(1, 0.0, model.epsilon));
    out.eval = [tube, chart, k, d, n](const Vector& p) {
        const Vector phi = p.segment(k, d);
        const double rho = p[n - 1];
        const SphereEmbedding e = sphere_embedding(chart, phi);
        Vector q(n);
        q << p.head(k), rho * e.point;
        Matrix jac = Matrix::Zero(n, n);
        jac.topLeftCorner(k, k).setIdentity();
        jac.block(k, k, d + 1, d) = rho * e.jacobian;
        jac.block(k, n - 1, d + 1, 1) = e.point;
        return symmetrized(jac.transpose() * tube(q) * jac);
    };
    return out;
}

/// g_delta: the tube metric restricted to the delta-sphere bundle, in the chart
/// (x, phi). Shared by end_metrics and shell areas.
inline MetricField sphere_bundle_metric(const ModelManifold& model, double delta, AngularChart chart) {
    const int k = model.k;
    const int d = model.sphere_dim();
    MetricField tube = model.tube_chart;
    MetricField out;
    out.dim = k + d;
    out.domain = model.w_box().times(angular_domain(chart, d));
    out.eval = [tube, chart, k, d, delta](const Vector& p) {
        const SphereEmbedding e = sphere_embedding(chart, p.tail(d));
        Vector q(k + d + 1);
        q << p.head(k), delta * e.point;
        Matrix jac = Matrix::Zero(k + d + 1, k + d);
        jac.topLeftCorner(k, k).setIdentity();
        jac.bottomRightCorner(d + 1, d) = delta * e.jacobian;
        return symmetrized(jac.transpose() * tube(q) * jac);
    };
    return out;
}

/// Round metric of S^d(radius) in the given angular chart.
inline MetricField round_sphere_metric(int d, double radius, AngularChart chart) {
    return MetricField{d, angular_domain(chart, d), [d, radius, chart](const Vector& phi) {
                           const SphereEmbedding e = sphere_embedding(chart, phi);
                           (void)d;
                           return (radius * radius * (e.jacobian.transpose() * e.jacobian)).eval();
                       }};
}

/// g_delta (restriction of g to S^delta N) and the product g_delta^N = g|_W + dE^2(delta).
inline EndMetricPair end_metrics(const ModelManifold& model, double delta,
                                 AngularChart chart = AngularChart::StereoNorth) {
    if (!(delta > 0.0 && delta < model.epsilon)) throw Error(ErrorCode::OutOfRange, "need 0 < delta < epsilon");
    EndMetricPair out;
    out.g_delta = EndMetric{delta, chart, sphere_bundle_metric(model, delta, chart)};
    out.g_delta_N = EndMetric{delta, chart, product_metric(model.w_metric, round_sphere_metric(model.sphere_dim(), delta, chart))};
    return out;
}

/// |r_* e_1 - 1| at a tube point, where e_1 is the g-unit normal to the level
/// set of r = |y|; equals | |grad r|_g - 1 |.
inline RadialDefect radial_defect(const ModelManifold& model, const ChartPoint& p) {
    const int k = model.k;
    const Vector y = p.tail(model.codim());
    const double r = y.norm();
    if (!(r > 0.0)) throw Error(ErrorCode::OutOfRange, "radial defect is undefined on W (r = 0)");
    Vector dr = Vector::Zero(model.n);
    dr.tail(model.codim()) = y / r;
    (void)k;
    const Matrix ginv = inverse_spd(model.tube_chart(p));
    const double grad = std::sqrt(dr.dot(ginv * dr));
    return RadialDefect{p, std::abs(grad - 1.0)};
}

/// Largest radial defect over a sample grid of the shell rho in [r_lo, r_hi].
inline double max_radial_defect(const ModelManifold& model, double r_lo, double r_hi, int per_axis = 4) {
    const MetricField polar = tube_polar_metric(model, AngularChart::Hyperspherical);
    const Box box = model.w_box().shrunk(0.01).times(angular_sample_box(AngularChart::Hyperspherical, model.sphere_dim()))
                        .times(Box::cube(1, r_lo, r_hi));
    double worst = 0.0;
    for (const Vector& q : uniform_grid(box, per_axis)) {
        const SphereEmbedding e = sphere_embedding(AngularChart::Hyperspherical, q.segment(model.k, model.sphere_dim()));
        Vector p(model.n);
        p << q.head(model.k), q[model.n - 1] * e.point;
        worst = std::max(worst, radial_defect(model, p).defect);
    }
    return worst;
}

/// Vol_g(N_{r_b} - N_{r_a}) by quadrature in the polar chart, with separate
/// cell counts along W, the sphere and rho.
inline VolumeEstimate shell_volume(const ModelManifold& model, double r_a, double r_b, int w_cells, int angular_cells,
                                   int radial_cells) {
    if (!(r_a >= 0.0 && r_b > r_a && r_b <= model.epsilon)) throw Error(ErrorCode::OutOfRange, "need 0 <= r_a < r_b <= epsilon");
    const MetricField polar = tube_polar_metric(model, AngularChart::Hyperspherical);
    const Box box = model.w_box().times(angular_domain(AngularChart::Hyperspherical, model.sphere_dim()))
                        .times(Box::cube(1, r_a, r_b));
    std::vector<int> cells(static_cast<std::size_t>(model.k), w_cells);
    cells.insert(cells.end(), static_cast<std::size_t>(model.sphere_dim()), angular_cells);
    cells.push_back(radial_cells);
    return volume(polar, box, cells);
}

inline VolumeEstimate shell_volume(const ModelManifold& model, double r_a, double r_b, int cells) {
    return shell_volume(model, r_a, r_b, cells, cells, cells);
}

/// (n-1)-area of the sphere bundle S^r N.
inline VolumeEstimate sphere_bundle_area(const ModelManifold& model, double r, int cells) {
    const MetricField g = sphere_bundle_metric(model, r, AngularChart::Hyperspherical);
    return volume(g, g.domain, cells);
}

inline constexpr double kShellSafetyFactor = 1.05;

/// A constant K with Vol(N_{r_b} - N_{r_a}) <= (r_b - r_a) K for 0 < r_a < r_b <= delta:
/// 1.05 times the largest sampled sphere-bundle area over radii in (0, delta].
inline double shell_constant(const ModelManifold& model, double delta, int cells, int radii = 16) {
    if (!(delta > 0.0 && delta < model.epsilon)) throw Error(ErrorCode::OutOfRange, "shell constant needs 0 < delta < epsilon");
    double best = 0.0;
    for (int i = 1; i <= radii; ++i) {
        const double r = delta * i / radii;
        best = std::max(best, sphere_bundle_area(model, r, cells).value);
    }
    return kShellSafetyFactor * best;
}

}  // namespace psc
