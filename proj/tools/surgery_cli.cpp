// surgery: command-line front end for the bend, homotopy, Yamabe and plan runs.
//
// Exit codes: 0 all claims pass, 2 certificate failure, 1 usage or I/O error.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "psc/pipeline.hpp"

namespace {

struct PlanOverrides {
    std::string config;
    std::optional<std::string> model;
    std::optional<int> n;
    std::optional<int> k;
    std::optional<double> epsilon;
    std::optional<double> amplitude;
    std::optional<double> r1;
    std::optional<double> eps0;
    std::optional<double> delta;
    std::optional<double> arc_scale;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "plan JSON file");
        app->add_option("--model", model, "flat_torus | sphere_point | perturbed_tube");
        app->add_option("--n", n, "manifold dimension");
        app->add_option("--k", k, "dimension of W");
        app->add_option("--epsilon", epsilon, "tube radius");
        app->add_option("--amplitude", amplitude, "perturbation amplitude");
        app->add_option("--r1", r1, "bend start radius");
        app->add_option("--eps0", eps0, "curvature and volume slack");
        app->add_option("--delta", delta, "end radius cap");
        app->add_option("--arc-curvature-scale", arc_scale, "multiplies arc curvatures (test hook)");
        app->add_option("--seed", seed, "seed for randomized cross-checks");
    }

    psc::SurgeryPlan plan() const {
        psc::SurgeryPlan p = config.empty() ? psc::SurgeryPlan{} : psc::load_plan(config);
        if (model) p.model.name = *model;
        if (n) p.model.n = *n;
        if (k) p.model.k = *k;
        if (epsilon) p.model.epsilon = *epsilon;
        if (amplitude) p.model.amplitude = *amplitude;
        if (r1) p.r1 = *r1;
        if (eps0) p.eps0 = *eps0;
        if (delta) p.delta = *delta;
        if (arc_scale) p.arc_curvature_scale = *arc_scale;
        if (seed) p.seed = *seed;
        p.validate();
        return p;
    }
};

void write_or_print(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
    } else {
        psc::atomic_write(path, text);
    }
}

psc::Json certificate_json(const psc::CertificateReport& c) {
    psc::Json w = psc::Json::object();
    for (const auto& [k, v] : c.witness) w[k] = v;
    return {{"claim", c.claim},         {"passed", c.passed}, {"measured", c.measured}, {"threshold", c.threshold},
            {"margin", c.margin},       {"samples", c.samples}, {"witness", w}};
}

int run_gamma(const PlanOverrides& o, const std::string& csv, std::size_t csv_samples, std::size_t samples) {
    const psc::SurgeryPlan plan = o.plan();
    const psc::ModelManifold model = psc::make_model(plan.model);
    const psc::FormulaCalibration cal = psc::calibrate_tube_formula(model);
    psc::BendingParams bp;
    bp.r1 = plan.r1;
    bp.eps0 = plan.eps0 / 3.0;
    bp.A = cal.A;
    bp.n = model.n;
    bp.k = model.k;
    bp.s_g_min = model.ambient_scalar_min;
    bp.kappa_coefficient = cal.kappa_coefficient;
    bp.tube_radius = model.epsilon;
    bp.arc_curvature_scale = plan.arc_curvature_scale;
    const psc::BendingCurve curve = psc::construct_gamma(bp);
    const psc::CurveAudit audit = psc::audit_curve(curve);
    const psc::CertificateReport cert = psc::certify_curvature_bound(curve, bp, samples);
    if (!csv.empty()) psc::export_curve_csv(curve, csv, csv_samples);
    const psc::Json out = {{"theta0", curve.theta0},
                           {"t_f", curve.t_f},
                           {"r_f", curve.r_f},
                           {"bends", curve.bends},
                           {"stages", curve.stages.size()},
                           {"graph_length", curve.graph_length()},
                           {"kappa_coefficient", cal.kappa_coefficient},
                           {"A", cal.A},
                           {"audit_ok", audit.ok()},
                           {"certificate", certificate_json(cert)}};
    std::cout << psc::canonical_json(out);
    return audit.ok() && cert.passed ? 0 : 2;
}

int run_homotopy(const PlanOverrides& o, const std::string& phase, double delta, std::optional<double> radius) {
    const psc::SurgeryPlan plan = o.plan();
    const psc::ModelManifold model = psc::make_model(plan.model);
    const psc::GridSettings g = psc::scaled_grid(plan.grid, psc::grid_scale_from_env());
    const double r = radius.value_or(plan.sphere_radius.value_or(0.5 * delta));
    const psc::MetricField h_w = psc::target_w_metric(model, plan.target);
    const psc::MetricHomotopy h = phase == "h1" ? psc::h1_homotopy(model, delta) : psc::h2_homotopy(model, delta, h_w, r);
    const psc::HomotopyGrid grid = psc::make_grid(psc::end_sample_box(model), g.x_points, g.t_points, g.step);
    const psc::HomotopyStats st = psc::homotopy_stats(h, grid);
    const double a = psc::default_stretch(st);
    const psc::CertificateReport cert = psc::verify_positive_scalar(h, a, grid);
    const psc::Json out = {{"phase", phase},
                           {"delta", delta},
                           {"s_min", st.s_min},
                           {"B_max", st.B_max},
                           {"B_min", st.B_min},
                           {"a_star", st.a_star},
                           {"a_star_max_rule", st.a_star_max_rule},
                           {"a", a},
                           {"samples", st.samples},
                           {"certificate", certificate_json(cert)}};
    std::cout << psc::canonical_json(out);
    return cert.passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scalar-curvature-controlled surgery along W"};
    app.set_version_flag("--version", std::string(psc::kToolVersion));
    app.require_subcommand(1);

    PlanOverrides gamma_opts;
    std::string csv;
    std::size_t csv_samples = 1000;
    std::size_t cert_samples = 10000;
    CLI::App* gamma = app.add_subcommand("gamma", "build the bending curve and certify its curvature");
    gamma_opts.attach(gamma);
    gamma->add_option("--csv", csv, "write curve samples to this CSV file");
    gamma->add_option("--csv-samples", csv_samples, "CSV sample intervals")->check(CLI::PositiveNumber);
    gamma->add_option("--samples", cert_samples, "certificate samples")->check(CLI::PositiveNumber);

    PlanOverrides hom_opts;
    std::string phase = "h1";
    double hom_delta = 0.1;
    std::optional<double> hom_radius;
    CLI::App* homotopy = app.add_subcommand("homotopy", "stretch statistics for H1 or H2 at a given delta");
    hom_opts.attach(homotopy);
    homotopy->add_option("--phase", phase, "h1 or h2")->check(CLI::IsMember({"h1", "h2"}));
    homotopy->add_option("--at-delta", hom_delta, "sphere bundle radius")->check(CLI::PositiveNumber);
    homotopy->add_option("--sphere-radius", hom_radius, "end sphere radius for H2");

    CLI::App* yamabe = app.add_subcommand("yamabe", "Yamabe gluing bounds");
    yamabe->require_subcommand(1);
    double y1 = 0.0, y2 = 0.0;
    int yn = 3;
    CLI::App* glue = yamabe->add_subcommand("glue", "bound for the glued manifold");
    glue->add_option("--y1", y1, "Yamabe invariant of M1")->required();
    glue->add_option("--y2", y2, "Yamabe invariant of M2")->required();
    glue->add_option("--n", yn, "dimension")->required();
    std::string report1, report2;
    CLI::App* cert = yamabe->add_subcommand("certificate", "glue two surgery reports");
    cert->add_option("--report1", report1, "first report JSON")->required();
    cert->add_option("--report2", report2, "second report JSON")->required();

    PlanOverrides plan_opts;
    std::string out_path;
    CLI::App* plan = app.add_subcommand("plan", "run a full surgery plan and emit the report");
    plan_opts.attach(plan);
    plan->add_option("--out", out_path, "report path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gamma) return run_gamma(gamma_opts, csv, csv_samples, cert_samples);
        if (*homotopy) return run_homotopy(hom_opts, phase, hom_delta, hom_radius);
        if (*glue) {
            const psc::GlueBound g = psc::glue_bound(psc::YamabeValue{y1, yn}, psc::YamabeValue{y2, yn});
            psc::Json out = {{"bound", g.bound}, {"case", g.case_label}};
            out["split"] = g.split ? psc::Json{{"lambda1", g.split->lambda1},
                                               {"lambda2", g.split->lambda2},
                                               {"degenerate", g.split->degenerate}}
                                   : psc::Json(nullptr);
            std::cout << psc::canonical_json(out);
            return 0;
        }
        if (*cert) {
            const psc::Theorem1Certificate c =
                psc::theorem1_certificate(psc::load_report(report1), psc::load_report(report2));
            const psc::Json out = {{"Y1", c.Y1},           {"Y2", c.Y2},           {"lambda1", c.lambda1},
                                   {"lambda2", c.lambda2}, {"epsilon", c.epsilon}, {"certificate", c.certificate},
                                   {"threshold", c.threshold}, {"glue_bound", c.glue}, {"passed", c.passed}};
            std::cout << psc::canonical_json(out);
            return c.passed ? 0 : 2;
        }
        if (*plan) {
            const psc::SurgeryReport r = psc::run_surgery_plan(plan_opts.plan(), psc::grid_scale_from_env());
            write_or_print(psc::emit_report(r), out_path);
            if (!r.passed) std::cerr << "certificate failure in phase: " << r.failed_phase << "\n";
            return r.passed ? 0 : 2;
        }
    } catch (const psc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
