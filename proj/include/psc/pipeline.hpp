#pragma once

// End-to-end surgery on a model: bend (Step 1), then the homotopies H^1 and
// H^2 with stretching (Step 2). Every quantitative claim becomes an entry of
// the report's claim list.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "psc/bending.hpp"
#include "psc/homotopy.hpp"
#include "psc/io.hpp"
#include "psc/yamabe.hpp"

namespace psc {

inline constexpr const char* kToolVersion = "0.1.0";

// Oracle tolerance: tol * max(1, kOracleTolScale (m-1) max(m-2, 1) / r^2).
inline constexpr double kOracleTolScale = 1e-4;

/// Metric h on W at the far end: g|_W or factor * g|_W.
struct TargetWMetric {
    std::string kind = "restriction";
    double factor = 1.0;

    bool operator==(const TargetWMetric&) const = default;
};

struct GridSettings {
    int x_points = kDefaultXPointCap;  // cap on x samples per homotopy grid
    int t_points = kDefaultTPoints;
    double step = kDefaultStep;
    int curvature_samples = 10000;
    int oracle_per_stage = 3;
    int oracle_x_points = 64;
    int volume_w_cells = 4;
    int volume_angular_cells = 8;
    int volume_t_cells = 16;
    int crosscheck_samples = 20;
};

struct SurgeryPlan {
    std::string name = "plan";
    ModelSpec model;
    double r1 = 0.05;
    double eps0 = 0.3;
    double delta = 0.02;  // cap on the end radius delta = r_f
    TargetWMetric target;
    std::optional<double> sphere_radius;  // default: delta / 2
    GridSettings grid;
    std::uint64_t seed = 1;
    double arc_curvature_scale = 1.0;
    double tolerance = 1e-3;

    void validate() const {
        if (!(r1 > 0.0 && r1 < model.epsilon)) throw Error(ErrorCode::Config, "need 0 < r1 < epsilon");
        if (!(eps0 > 0.0)) throw Error(ErrorCode::Config, "eps0 must be positive");
        if (!(delta > 0.0)) throw Error(ErrorCode::Config, "delta must be positive");
        if (target.kind != "restriction" && target.kind != "scaled") {
            throw Error(ErrorCode::Config, "target_w_metric.kind must be 'restriction' or 'scaled'");
        }
        if (!(target.factor > 0.0)) throw Error(ErrorCode::Config, "target_w_metric.factor must be positive");
        if (sphere_radius && !(*sphere_radius > 0.0)) throw Error(ErrorCode::Config, "sphere_radius must be positive");
        if (!(arc_curvature_scale > 0.0)) throw Error(ErrorCode::Config, "arc_curvature_scale must be positive");
        if (grid.x_points < 1 || grid.t_points < 2 || grid.curvature_samples < 1 || grid.oracle_per_stage < 1 ||
            grid.oracle_x_points < 1 || grid.volume_w_cells < 2 || grid.volume_angular_cells < 2 ||
            grid.volume_t_cells < 2 || grid.crosscheck_samples < 0 || !(grid.step > 0.0)) {
            throw Error(ErrorCode::Config, "invalid grid settings");
        }
    }
};

/// Multiplies grid densities (sample counts, not cell counts below 2).
inline GridSettings scaled_grid(GridSettings g, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw Error(ErrorCode::Config, "grid scale must be positive");
    auto s = [scale](int v, int floor) { return std::max(floor, static_cast<int>(std::lround(v * scale))); };
    g.x_points = s(g.x_points, 1);
    g.t_points = s(g.t_points, 3);
    g.curvature_samples = s(g.curvature_samples, 100);
    g.oracle_x_points = s(g.oracle_x_points, 1);
    g.crosscheck_samples = s(g.crosscheck_samples, 0);
    return g;
}

/// SURGERY_GRID_SCALE, or 1.
inline double grid_scale_from_env() {
    const char* v = std::getenv("SURGERY_GRID_SCALE");
    if (!v || !*v) return 1.0;
    char* end = nullptr;
    const double s = std::strtod(v, &end);
    if (end == v || *end != '\0' || !(s > 0.0) || !std::isfinite(s)) {
        throw Error(ErrorCode::Config, "SURGERY_GRID_SCALE must be a positive number");
    }
    return s;
}

namespace detail {

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::Config, std::string("bad value for '") + key + "': " + e.what());
    }
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; })) {
            throw Error(ErrorCode::Config, "unknown key '" + it.key() + "' in " + where);
        }
    }
}

}  // namespace detail

inline SurgeryPlan plan_from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "plan must be a JSON object");
    detail::reject_unknown(j, {"name", "model", "r1", "eps0", "delta", "target_w_metric", "sphere_radius", "grid", "seed",
                               "arc_curvature_scale", "tolerance"},
                           "plan");
    SurgeryPlan p;
    detail::read_opt(j, "name", p.name);
    if (!j.contains("model") || !j.at("model").is_object()) throw Error(ErrorCode::Config, "plan needs a model object");
    const Json& m = j.at("model");
    detail::reject_unknown(m, {"name", "n", "k", "epsilon", "amplitude"}, "model");
    detail::read_opt(m, "name", p.model.name);
    detail::read_opt(m, "n", p.model.n);
    detail::read_opt(m, "k", p.model.k);
    detail::read_opt(m, "epsilon", p.model.epsilon);
    detail::read_opt(m, "amplitude", p.model.amplitude);
    detail::read_opt(j, "r1", p.r1);
    detail::read_opt(j, "eps0", p.eps0);
    detail::read_opt(j, "delta", p.delta);
    if (j.contains("target_w_metric")) {
        const Json& t = j.at("target_w_metric");
        detail::reject_unknown(t, {"kind", "factor"}, "target_w_metric");
        detail::read_opt(t, "kind", p.target.kind);
        detail::read_opt(t, "factor", p.target.factor);
        if (p.target.kind == "restriction") p.target.factor = 1.0;
    }
    if (j.contains("sphere_radius") && !j.at("sphere_radius").is_null()) {
        double r = 0.0;
        detail::read_opt(j, "sphere_radius", r);
        p.sphere_radius = r;
    }
    if (j.contains("grid")) {
        const Json& g = j.at("grid");
        detail::reject_unknown(g, {"x_points", "t_points", "step", "curvature_samples", "oracle_per_stage",
                                   "oracle_x_points", "volume_w_cells", "volume_angular_cells", "volume_t_cells",
                                   "crosscheck_samples"},
                               "grid");
        detail::read_opt(g, "x_points", p.grid.x_points);
        detail::read_opt(g, "t_points", p.grid.t_points);
        detail::read_opt(g, "step", p.grid.step);
        detail::read_opt(g, "curvature_samples", p.grid.curvature_samples);
        detail::read_opt(g, "oracle_per_stage", p.grid.oracle_per_stage);
        detail::read_opt(g, "oracle_x_points", p.grid.oracle_x_points);
        detail::read_opt(g, "volume_w_cells", p.grid.volume_w_cells);
        detail::read_opt(g, "volume_angular_cells", p.grid.volume_angular_cells);
        detail::read_opt(g, "volume_t_cells", p.grid.volume_t_cells);
        detail::read_opt(g, "crosscheck_samples", p.grid.crosscheck_samples);
    }
    detail::read_opt(j, "seed", p.seed);
    detail::read_opt(j, "arc_curvature_scale", p.arc_curvature_scale);
    detail::read_opt(j, "tolerance", p.tolerance);
    p.validate();
    return p;
}

inline Json plan_to_json(const SurgeryPlan& p) {
    Json j;
    j["name"] = p.name;
    j["model"] = {{"name", p.model.name}, {"n", p.model.n}, {"k", p.model.k}, {"epsilon", p.model.epsilon},
                  {"amplitude", p.model.amplitude}};
    j["r1"] = p.r1;
    j["eps0"] = p.eps0;
    j["delta"] = p.delta;
    j["target_w_metric"] = {{"kind", p.target.kind}, {"factor", p.target.factor}};
    j["sphere_radius"] = p.sphere_radius ? Json(*p.sphere_radius) : Json(nullptr);
    j["grid"] = {{"x_points", p.grid.x_points},
                 {"t_points", p.grid.t_points},
                 {"step", p.grid.step},
                 {"curvature_samples", p.grid.curvature_samples},
                 {"oracle_per_stage", p.grid.oracle_per_stage},
                 {"oracle_x_points", p.grid.oracle_x_points},
                 {"volume_w_cells", p.grid.volume_w_cells},
                 {"volume_angular_cells", p.grid.volume_angular_cells},
                 {"volume_t_cells", p.grid.volume_t_cells},
                 {"crosscheck_samples", p.grid.crosscheck_samples}};
    j["seed"] = p.seed;
    j["arc_curvature_scale"] = p.arc_curvature_scale;
    j["tolerance"] = p.tolerance;
    return j;
}

inline SurgeryPlan load_plan(const std::filesystem::path& path) {
    return plan_from_json(parse_json(read_file(path), path.string()));
}

inline MetricField target_w_metric(const ModelManifold& model, const TargetWMetric& t) {
    MetricField h = model.w_metric;
    if (t.kind == "scaled") {
        h.eval = [g = model.w_metric, f = t.factor](const Vector& x) { return (f * g(x)).eval(); };
    }
    return h;
}

struct Claim {
    std::string name;
    std::string phase;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
};

struct HomotopySummary {
    double s_min = 0.0;
    double B_max = 0.0;
    double B_min = 0.0;
    double a_star = 0.0;
    double a_star_max_rule = 0.0;
    double a = 0.0;
    double certified_min = 0.0;   // grid min of s + B / a^2
    double s_min_measured = 0.0;  // direct oracle on g^t + a^2 dt^2
    double crosscheck_error = 0.0;
    double volume_bound = 0.0;
    double volume_quadrature = 0.0;
    std::vector<int> x_shape;
    int t_points = 0;

    bool operator==(const HomotopySummary&) const = default;
};

struct BendSummary {
    double theta0 = 0.0;
    double t_f = 0.0;
    double r_f = 0.0;
    int bends = 0;
    int stages = 0;
    double graph_length = 0.0;
    double kappa_coefficient = 0.0;
    double A = 0.0;
    double certified_min = 0.0;
    double s_min_measured = 0.0;  // certified min and oracle samples with r resolved
    double s_min_oracle = 0.0;    // raw oracle min over all samples
    double oracle_ratio = 0.0;    // max deficit / tol(r); the claim is <= 1
    double volume_bound = 0.0;
    double volume_quadrature = 0.0;
    double ball_volume = 0.0;
    double horizontal_volume = 0.0;
    double K = 0.0;

    bool operator==(const BendSummary&) const = default;
};

struct SurgeryReport {
    std::string tool_version = kToolVersion;
    Json plan;
    double grid_scale = 1.0;
    std::string model_name;
    int n = 0;
    int k = 0;
    double s_g_min = 0.0;
    double ambient_volume = 0.0;
    double eps0 = 0.0;
    double delta = 0.0;  // effective end radius (= r_f)
    double sphere_radius = 0.0;
    TargetWMetric target;
    BendSummary bend;
    HomotopySummary h1;
    HomotopySummary h2;
    double s_min_measured = 0.0;
    double volume_measured = 0.0;
    double volume_budget = 0.0;
    double end_form_residual = 0.0;
    double junction_residual = 0.0;
    double tolerance = 1e-3;
    std::vector<Claim> claims;
    bool passed = false;
    std::string failed_phase;
};

namespace detail {

// Deterministic uniform in [0, 1) from a 64-bit engine.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Max over sample points of |a_ij - b_ij| / sqrt(a_ii a_jj).
inline double normalized_residual(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const double scale = std::sqrt(std::abs(a(i, i) * a(j, j)));
            worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / scale);
        }
    }
    return worst;
}

inline Matrix with_unit_line(const Matrix& g) {
    const Eigen::Index n = g.rows();
    Matrix out = Matrix::Zero(n + 1, n + 1);
    out.topLeftCorner(n, n) = g;
    out(n, n) = 1.0;
    return out;
}

}  // namespace detail

inline void add_claim(SurgeryReport& r, std::string phase, std::string name, bool passed, double value,
                      double threshold) {
    r.claims.push_back(Claim{std::move(name), std::move(phase), passed, value, threshold});
}

/// Runs the construction on the plan's model and checks every claim.
/// Certificate failures are recorded in the report, not thrown.
inline SurgeryReport run_surgery_plan(const SurgeryPlan& plan_in, double grid_scale = 1.0) {
    SurgeryPlan plan = plan_in;
    plan.validate();
    plan.grid = scaled_grid(plan.grid, grid_scale);
    const GridSettings& g = plan.grid;
    const double tol = plan.tolerance;
    const double budget = plan.eps0 / 3.0;
    std::mt19937_64 rng(plan.seed);

    const ModelManifold model = make_model(plan.model);
    SurgeryReport rep;
    rep.plan = plan_to_json(plan_in);
    rep.grid_scale = grid_scale;
    rep.model_name = model.name;
    rep.n = model.n;
    rep.k = model.k;
    rep.s_g_min = model.ambient_scalar_min;
    rep.ambient_volume = model.ambient_volume;
    rep.eps0 = plan.eps0;
    rep.target = plan.target;
    rep.tolerance = tol;

    // Step 1: bend.
    const FormulaCalibration cal = calibrate_tube_formula(model);
    BendingParams bp;
    bp.r1 = plan.r1;
    bp.eps0 = budget;
    bp.A = cal.A;
    bp.n = model.n;
    bp.k = model.k;
    bp.s_g_min = model.ambient_scalar_min;
    bp.kappa_coefficient = cal.kappa_coefficient;
    bp.tube_radius = model.epsilon;
    bp.arc_curvature_scale = plan.arc_curvature_scale;
    const BendingCurve curve = construct_gamma(bp);
    const CurveAudit audit = audit_curve(curve);
    const CertificateReport cert = certify_curvature_bound(curve, bp, static_cast<std::size_t>(g.curvature_samples));

    BendSummary& b = rep.bend;
    b.theta0 = curve.theta0;
    b.t_f = curve.t_f;
    b.r_f = curve.r_f;
    b.bends = curve.bends;
    b.stages = static_cast<int>(curve.stages.size());
    b.graph_length = curve.graph_length();
    b.kappa_coefficient = cal.kappa_coefficient;
    b.A = cal.A;
    b.certified_min = cert.measured;
    // Oracle tolerance grows with the 1/r^2 scale of the finite-difference error.
    const double m = model.codim();
    double oracle_ratio = 0.0;
    b.s_min_oracle = std::numeric_limits<double>::infinity();
    b.s_min_measured = cert.measured;
    for (const InducedSample& s : sample_induced_curvature(curve, model, g.oracle_per_stage)) {
        const double scaled = tol * std::max(1.0, kOracleTolScale * (m - 1.0) * std::max(m - 2.0, 1.0) / (s.r * s.r));
        oracle_ratio = std::max(oracle_ratio, (model.ambient_scalar_min - budget - s.s_oracle) / scaled);
        b.s_min_oracle = std::min(b.s_min_oracle, s.s_oracle);
        if (scaled == tol) b.s_min_measured = std::min(b.s_min_measured, s.s_oracle);
    }
    b.oracle_ratio = oracle_ratio;
    const VolumeCells vc{g.volume_w_cells, g.volume_angular_cells, 16, 64};
    b.K = shell_constant(model, plan.r1, g.volume_angular_cells);
    const GammaVolume gv = gamma_volume_estimate(curve, model, b.K, vc, tol);
    b.volume_bound = gv.bound;
    b.volume_quadrature = gv.quadrature;
    b.ball_volume = gv.ball_volume;
    {
        const std::size_t last = curve.stages.size() - 1;
        const MetricField hz = induced_stage_metric(curve, last, model, AngularChart::Hyperspherical, true);
        std::vector<int> cells(static_cast<std::size_t>(model.k), g.volume_w_cells);
        cells.insert(cells.end(), static_cast<std::size_t>(model.sphere_dim()), g.volume_angular_cells);
        cells.push_back(2);
        b.horizontal_volume = volume(hz, hz.domain, cells).value;
    }
    const double sin_theta0 = std::sin(curve.theta0);
    add_claim(rep, "bend", "theta0 condition (A + 4n/r1^2) sin(theta0) < eps0/3",
              (bp.A + 4.0 * bp.n / (bp.r1 * bp.r1)) * sin_theta0 < budget, (bp.A + 4.0 * bp.n / (bp.r1 * bp.r1)) * sin_theta0,
              budget);
    add_claim(rep, "bend", "schedule audit (monotone, continuous, per-stage bounds)", audit.ok(), audit.ok() ? 1.0 : 0.0, 1.0);
    add_claim(rep, "bend", "t_f <= 7 r1", audit.t_f_bound, curve.t_f, 7.0 * plan.r1);
    add_claim(rep, "bend", "graph arclength <= 7 r1", audit.length_bound, curve.graph_length(), 7.0 * plan.r1);
    add_claim(rep, "bend", "certified curvature >= s_g_min - eps0/3", cert.passed, cert.measured, cert.threshold);
    add_claim(rep, "bend", "oracle curvature >= s_g_min - eps0/3 - tol(r)", oracle_ratio <= 1.0, oracle_ratio, 1.0);
    add_claim(rep, "bend", "gamma volume quadrature <= Vol(N_r1) + 2(1+u) K t_f", gv.passed, gv.quadrature, gv.bound + tol);
    const double bend_volume = gv.quadrature - gv.ball_volume + b.horizontal_volume;
    add_claim(rep, "bend", "bend volume change <= eps0/3", bend_volume <= budget + tol, bend_volume, budget + tol);

    // Step 2: homotopies at the end radius delta = r_f.
    const double delta = curve.r_f;
    rep.delta = delta;
    add_claim(rep, "bend", "end radius r_f <= plan delta", delta <= plan.delta, delta, plan.delta);
    const double radius = plan.sphere_radius.value_or(0.5 * delta);
    rep.sphere_radius = radius;
    const MetricField h_w = target_w_metric(model, plan.target);
    const Box box = end_sample_box(model, AngularChart::StereoNorth);

    const MetricHomotopy h1s = h1_homotopy(model, delta, AngularChart::StereoNorth);
    const MetricHomotopy h1q = h1_homotopy(model, delta, AngularChart::Hyperspherical);
    const MetricHomotopy h2s = h2_homotopy(model, delta, h_w, radius, AngularChart::StereoNorth);
    const MetricHomotopy h2q = h2_homotopy(model, delta, h_w, radius, AngularChart::Hyperspherical);

    auto run_phase = [&](const char* phase, const MetricHomotopy& hs, const MetricHomotopy& hq, HomotopySummary& out) {
        const HomotopyGrid grid = make_grid(box, g.x_points, g.t_points, g.step);
        const HomotopyStats st = homotopy_stats(hs, grid);
        const double a = default_stretch(st);
        const CertificateReport stretch = verify_positive_scalar(hs, a, grid);
        out.s_min = st.s_min;
        out.B_max = st.B_max;
        out.B_min = st.B_min;
        out.a_star = st.a_star;
        out.a_star_max_rule = st.a_star_max_rule;
        out.a = a;
        out.certified_min = stretch.measured;
        out.x_shape = grid.x_shape;
        out.t_points = static_cast<int>(grid.t_points.size());

        const MetricField ga = pulled_back_metric(hs, a);
        const HomotopyGrid coarse = make_grid(box, g.oracle_x_points, 2, g.step);
        out.s_min_measured = std::numeric_limits<double>::infinity();
        for (double t : {0.25, 0.5, 0.75}) {
            for (const Vector& x : coarse.x_points()) {
                Vector p(x.size() + 1);
                p << x, t;
                out.s_min_measured = std::min(out.s_min_measured, scalar_curvature(ga, p, g.step));
            }
        }
        for (int i = 0; i < g.crosscheck_samples; ++i) {
            Vector x(box.dim());
            for (int j = 0; j < x.size(); ++j) x[j] = box.lower[j] + detail::unit_uniform(rng) * (box.upper[j] - box.lower[j]);
            const double t = 0.05 + 0.9 * detail::unit_uniform(rng);
            Vector p(x.size() + 1);
            p << x, t;
            const double direct = scalar_curvature(ga, p, g.step);
            const double formula = stretched_scalar_formula(hs, x, t, a, g.step);
            out.crosscheck_error = std::max(out.crosscheck_error, std::abs(direct - formula) / (1.0 + std::abs(direct)));
        }

        std::vector<int> cells(static_cast<std::size_t>(model.k), g.volume_w_cells);
        cells.insert(cells.end(), static_cast<std::size_t>(model.sphere_dim()), g.volume_angular_cells);
        const ProductVolume pv = homotopy_volume_bound(hq, a, grid.t_points, cells, g.volume_t_cells, tol);
        out.volume_bound = pv.bound;
        out.volume_quadrature = pv.quadrature;

        add_claim(rep, phase, "stretched scalar curvature > 0 at a = 1.1 a_star", stretch.passed, stretch.measured, 0.0);
        add_claim(rep, phase, "oracle curvature of g^t + a^2 dt^2 >= s_g_min - eps0/3 - tol",
                  out.s_min_measured >= model.ambient_scalar_min - budget - tol, out.s_min_measured,
                  model.ambient_scalar_min - budget - tol);
        add_claim(rep, phase, "s(G_a) formula matches oracle (relative)", out.crosscheck_error <= tol, out.crosscheck_error, tol);
        add_claim(rep, phase, "product volume <= a sup_t Vol(g^t)", pv.passed, pv.quadrature, pv.bound + tol);
        add_claim(rep, phase, "phase volume <= eps0/3", pv.quadrature <= budget + tol, pv.quadrature, budget + tol);
    };
    run_phase("h1", h1s, h1q, rep.h1);
    run_phase("h2", h2s, h2q, rep.h2);

    // Junctions: bend end vs H^1 start, H^1 end vs H^2 start, H^2 end vs the target form.
    const MetricField tube = model.tube_chart;
    const MetricField target = target_end_metric(h_w, model.sphere_dim(), radius, AngularChart::StereoNorth);
    for (const Vector& x : make_grid(box, 64, 2).x_points()) {
        Vector p(x.size() + 1);
        p << x, 0.0;
        const Matrix bend_end =
            detail::induced_metric_at(tube, model.k, model.sphere_dim(), AngularChart::StereoNorth, p, delta, 0.0, 1.0);
        rep.junction_residual = std::max(rep.junction_residual, detail::normalized_residual(bend_end, detail::with_unit_line(h1s(x, 0.0))));
        rep.junction_residual = std::max(rep.junction_residual,
                                         detail::normalized_residual(detail::with_unit_line(h1s(x, 1.0)), detail::with_unit_line(h2s(x, 0.0))));
        rep.end_form_residual = std::max(rep.end_form_residual,
                                         detail::normalized_residual(detail::with_unit_line(h2s(x, 1.0)), detail::with_unit_line(target(x))));
    }
    add_claim(rep, "glue", "phase junctions match", rep.junction_residual <= tol, rep.junction_residual, tol);

    // Global claims.
    rep.s_min_measured = std::min({b.s_min_measured, rep.h1.s_min_measured, rep.h2.s_min_measured});
    rep.volume_measured = model.ambient_volume + bend_volume + rep.h1.volume_quadrature + rep.h2.volume_quadrature;
    rep.volume_budget = model.ambient_volume + plan.eps0;
    add_claim(rep, "global", "s_min >= s_g_min - eps0 - tol", rep.s_min_measured >= model.ambient_scalar_min - plan.eps0 - tol,
              rep.s_min_measured, model.ambient_scalar_min - plan.eps0 - tol);
    add_claim(rep, "global", "volume <= Vol_g(M) + eps0 + tol", rep.volume_measured <= rep.volume_budget + tol,
              rep.volume_measured, rep.volume_budget + tol);
    add_claim(rep, "global", "end form residual <= tol", rep.end_form_residual <= tol, rep.end_form_residual, tol);
    add_claim(rep, "global", "phase budgets sum to eps0", 3.0 * budget <= plan.eps0 * (1.0 + 1e-15), 3.0 * budget, plan.eps0);

    rep.passed = std::all_of(rep.claims.begin(), rep.claims.end(), [](const Claim& c) { return c.passed; });
    for (const Claim& c : rep.claims) {
        if (!c.passed) {
            rep.failed_phase = c.phase;
            break;
        }
    }
    return rep;
}

inline Json to_json(const HomotopySummary& s) {
    return Json{{"s_min", s.s_min},
                {"B_max", s.B_max},
                {"B_min", s.B_min},
                {"a_star", s.a_star},
                {"a_star_max_rule", s.a_star_max_rule},
                {"a", s.a},
                {"certified_min", s.certified_min},
                {"s_min_measured", s.s_min_measured},
                {"crosscheck_error", s.crosscheck_error},
                {"volume_bound", s.volume_bound},
                {"volume_quadrature", s.volume_quadrature},
                {"grid", {{"x_shape", s.x_shape}, {"t_points", s.t_points}}}};
}

inline Json to_json(const BendSummary& b) {
    return Json{{"theta0", b.theta0},
                {"t_f", b.t_f},
                {"r_f", b.r_f},
                {"bends", b.bends},
                {"stages", b.stages},
                {"graph_length", b.graph_length},
                {"kappa_coefficient", b.kappa_coefficient},
                {"A", b.A},
                {"certified_min", b.certified_min},
                {"s_min_measured", b.s_min_measured},
                {"s_min_oracle", b.s_min_oracle},
                {"oracle_ratio", b.oracle_ratio},
                {"volume_bound", b.volume_bound},
                {"volume_quadrature", b.volume_quadrature},
                {"ball_volume", b.ball_volume},
                {"horizontal_volume", b.horizontal_volume},
                {"K", b.K}};
}

inline Json to_json(const SurgeryReport& r) {
    Json claims = Json::array();
    for (const Claim& c : r.claims) {
        claims.push_back(
            {{"name", c.name}, {"phase", c.phase}, {"passed", c.passed}, {"value", c.value}, {"threshold", c.threshold}});
    }
    return Json{{"tool_version", r.tool_version},
                {"plan", r.plan},
                {"grid_scale", r.grid_scale},
                {"model", {{"name", r.model_name}, {"n", r.n}, {"k", r.k}, {"s_g_min", r.s_g_min}, {"ambient_volume", r.ambient_volume}}},
                {"eps0", r.eps0},
                {"delta", r.delta},
                {"end", {{"sphere_radius", r.sphere_radius}, {"target_w_metric", {{"kind", r.target.kind}, {"factor", r.target.factor}}}}},
                {"bend", to_json(r.bend)},
                {"h1", to_json(r.h1)},
                {"h2", to_json(r.h2)},
                {"s_min_measured", r.s_min_measured},
                {"volume_measured", r.volume_measured},
                {"volume_budget", r.volume_budget},
                {"end_form_residual", r.end_form_residual},
                {"junction_residual", r.junction_residual},
                {"tolerance", r.tolerance},
                {"claims", claims},
                {"passed", r.passed},
                {"failed_phase", r.failed_phase}};
}

namespace detail {

inline double num(const Json& j, const char* key) {
    const Json& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

inline HomotopySummary homotopy_from_json(const Json& j) {
    HomotopySummary s;
    s.s_min = num(j, "s_min");
    s.B_max = num(j, "B_max");
    s.B_min = num(j, "B_min");
    s.a_star = num(j, "a_star");
    s.a_star_max_rule = num(j, "a_star_max_rule");
    s.a = num(j, "a");
    s.certified_min = num(j, "certified_min");
    s.s_min_measured = num(j, "s_min_measured");
    s.crosscheck_error = num(j, "crosscheck_error");
    s.volume_bound = num(j, "volume_bound");
    s.volume_quadrature = num(j, "volume_quadrature");
    s.x_shape = j.at("grid").at("x_shape").get<std::vector<int>>();
    s.t_points = j.at("grid").at("t_points").get<int>();
    return s;
}

inline BendSummary bend_from_json(const Json& j) {
    BendSummary b;
    b.theta0 = num(j, "theta0");
    b.t_f = num(j, "t_f");
    b.r_f = num(j, "r_f");
    b.bends = j.at("bends").get<int>();
    b.stages = j.at("stages").get<int>();
    b.graph_length = num(j, "graph_length");
    b.kappa_coefficient = num(j, "kappa_coefficient");
    b.A = num(j, "A");
    b.certified_min = num(j, "certified_min");
    b.s_min_measured = num(j, "s_min_measured");
    b.s_min_oracle = num(j, "s_min_oracle");
    b.oracle_ratio = num(j, "oracle_ratio");
    b.volume_bound = num(j, "volume_bound");
    b.volume_quadrature = num(j, "volume_quadrature");
    b.ball_volume = num(j, "ball_volume");
    b.horizontal_volume = num(j, "horizontal_volume");
    b.K = num(j, "K");
    return b;
}

}  // namespace detail

inline SurgeryReport report_from_json(const Json& j) {
    try {
        SurgeryReport r;
        r.tool_version = j.at("tool_version").get<std::string>();
        r.plan = j.at("plan");
        r.grid_scale = detail::num(j, "grid_scale");
        const Json& m = j.at("model");
        r.model_name = m.at("name").get<std::string>();
        r.n = m.at("n").get<int>();
        r.k = m.at("k").get<int>();
        r.s_g_min = detail::num(m, "s_g_min");
        r.ambient_volume = detail::num(m, "ambient_volume");
        r.eps0 = detail::num(j, "eps0");
        r.delta = detail::num(j, "delta");
        r.sphere_radius = detail::num(j.at("end"), "sphere_radius");
        r.target.kind = j.at("end").at("target_w_metric").at("kind").get<std::string>();
        r.target.factor = detail::num(j.at("end").at("target_w_metric"), "factor");
        r.bend = detail::bend_from_json(j.at("bend"));
        r.h1 = detail::homotopy_from_json(j.at("h1"));
        r.h2 = detail::homotopy_from_json(j.at("h2"));
        r.s_min_measured = detail::num(j, "s_min_measured");
        r.volume_measured = detail::num(j, "volume_measured");
        r.volume_budget = detail::num(j, "volume_budget");
        r.end_form_residual = detail::num(j, "end_form_residual");
        r.junction_residual = detail::num(j, "junction_residual");
        r.tolerance = detail::num(j, "tolerance");
        for (const Json& c : j.at("claims")) {
            r.claims.push_back(Claim{c.at("name").get<std::string>(), c.at("phase").get<std::string>(),
                                     c.at("passed").get<bool>(), detail::num(c, "value"), detail::num(c, "threshold")});
        }
        r.passed = j.at("passed").get<bool>();
        r.failed_phase = j.at("failed_phase").get<std::string>();
        return r;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::Config, std::string("malformed report: ") + e.what());
    }
}

inline std::string emit_report(const SurgeryReport& r) { return canonical_json(to_json(r)); }

inline void emit_report(const SurgeryReport& r, const std::filesystem::path& path) { atomic_write(path, emit_report(r)); }

inline SurgeryReport load_report(const std::filesystem::path& path) {
    return report_from_json(parse_json(read_file(path), path.string()));
}

struct Theorem1Certificate {
    double Y1 = 0.0;
    double Y2 = 0.0;
    VolumeSplit split;        // the optimal split (possibly degenerate)
    double lambda1 = 0.5;     // the split actually used
    double lambda2 = 0.5;
    double epsilon = 0.0;     // effective slack after rescaling
    double certificate = 0.0; // min(s) Vol^{2/n} of the glued, rescaled metric
    double threshold = 0.0;   // (1 + 2 eps)^{2/n} (min_i Y_i / lambda_i^{2/n} - eps)
    double glue = 0.0;        // glue_bound(Y1, Y2)
    bool passed = false;
};

inline constexpr double kDegenerateSplitFloor = 1e-2;

/// Rescales the two surgered models to base volumes lambda_i and bounds the
/// Yamabe constant of the glued metric via min(s) Vol^{2/n}.
inline Theorem1Certificate theorem1_certificate(const SurgeryReport& r1, const SurgeryReport& r2) {
    if (r1.n != r2.n) throw Error(ErrorCode::DimensionMismatch, "reports have different dimensions");
    if (r1.k != r2.k) throw Error(ErrorCode::EndMetricMismatch, "reports glue along submanifolds of different dimension");
    if (!(r1.target == r2.target)) throw Error(ErrorCode::EndMetricMismatch, "reports end on different metrics h on W");
    if (std::abs(r1.sphere_radius - r2.sphere_radius) > 1e-12 * std::max(r1.sphere_radius, r2.sphere_radius)) {
        throw Error(ErrorCode::EndMetricMismatch, "reports end on spheres of different radii");
    }
    for (const SurgeryReport* r : {&r1, &r2}) {
        if (!(r->end_form_residual <= r->tolerance)) {
            throw Error(ErrorCode::EndMetricMismatch, "end form residual above tolerance");
        }
    }
    const int n = r1.n;
    Theorem1Certificate c;
    c.Y1 = kobayashi_lower_bound(r1.s_g_min, r1.ambient_volume, n);
    c.Y2 = kobayashi_lower_bound(r2.s_g_min, r2.ambient_volume, n);
    if (c.Y1 > 0.0 || c.Y2 > 0.0) throw Error(ErrorCode::UnsupportedCase, "certificate covers Y_i <= 0 only");
    c.glue = glue_bound(c.Y1, c.Y2, n);
    c.split = optimal_split(c.Y1, c.Y2, n);
    c.lambda1 = c.split.lambda1;
    c.lambda2 = c.split.lambda2;
    if (c.split.degenerate && !(c.Y1 == 0.0 && c.Y2 == 0.0)) {
        c.lambda1 = c.Y1 == 0.0 ? kDegenerateSplitFloor : 1.0 - kDegenerateSplitFloor;
        c.lambda2 = 1.0 - c.lambda1;
    }
    const double e = 2.0 / n;
    double s_min = std::numeric_limits<double>::infinity();
    double vol = 0.0;
    double eps_curv = 0.0;
    double base_min = std::numeric_limits<double>::infinity();
    const SurgeryReport* rs[2] = {&r1, &r2};
    const double lambdas[2] = {c.lambda1, c.lambda2};
    for (int i = 0; i < 2; ++i) {
        const SurgeryReport& r = *rs[i];
        const double c2 = std::pow(lambdas[i] / r.ambient_volume, e);  // metric scale factor
        s_min = std::min(s_min, r.s_min_measured / c2);
        vol += r.volume_measured * lambdas[i] / r.ambient_volume;
        eps_curv = std::max(eps_curv, (r.s_g_min - r.s_min_measured) / c2);
        base_min = std::min(base_min, r.s_g_min / c2);
    }
    c.epsilon = std::max({eps_curv, 0.5 * (vol - 1.0), 0.0});
    c.certificate = kobayashi_lower_bound(s_min, vol, n);
    c.threshold = std::pow(1.0 + 2.0 * c.epsilon, e) * (base_min - c.epsilon);
    c.passed = c.certificate >= c.threshold - 1e-12 * std::max(1.0, std::abs(c.threshold));
    return c;
}

}  // namespace psc
