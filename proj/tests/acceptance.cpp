#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <future>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "psc/pipeline.hpp"

namespace {

using namespace psc;
namespace fs = std::filesystem;

struct Outcome {
    bool passed = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            passed = false;
            detail << " [failed: " << what << "]";
        }
    }
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
    Vector point(const Box& box) {
        Vector p(box.dim());
        for (int i = 0; i < box.dim(); ++i) p[i] = uniform(box.lower[i], box.upper[i]);
        return p;
    }

private:
    std::mt19937_64 engine_;
};

MetricField scaled(const MetricField& g, double c) {
    return MetricField{g.dim, g.domain, [g, c](const Vector& x) { return (c * g(x)).eval(); }};
}

MetricField round_sphere(int m, double r) { return stereographic_sphere_metric(m, r, Box::cube(m, -1.0, 1.0)); }

MetricHomotopy conformal_family(int m, double c) {
    return linear_homotopy(round_sphere(m, 1.0), scaled(round_sphere(m, 1.0), 1.0 + c));
}

Outcome curvature_oracle() {
    Outcome o;
    const Vector x3 = Vector::Constant(3, 0.1);
    const double flat = std::abs(scalar_curvature(flat_metric(3, Box::cube(3, -1.0, 1.0)), x3));
    o.require(flat <= 1e-6, "flat |s| <= 1e-6");
    double sphere_err = 0.0;
    for (int m : {2, 3}) {
        for (double r : {1.0, 0.5}) {
            const double s = scalar_curvature(round_sphere(m, r), Vector::Constant(m, 0.2));
            sphere_err = std::max(sphere_err, std::abs(s / (m * (m - 1.0) / (r * r)) - 1.0));
        }
    }
    o.require(sphere_err <= 1e-3, "sphere relative error <= 1e-3");
    const MetricField s2 = round_sphere(2, 1.0);
    const MetricField s3 = round_sphere(3, 0.5);
    const Vector p5 = (Vector(5) << 0.2, -0.1, 0.1, 0.3, -0.2).finished();
    const double sum = scalar_curvature(s2, p5.head(2)) + scalar_curvature(s3, p5.tail(3));
    const double prod_err = std::abs(scalar_curvature(product_metric(s2, s3), p5) - sum) / std::abs(sum);
    o.require(prod_err <= 1e-4, "product additivity <= 1e-4");
    // g = diag(1 + x2^2 / 4, 1) has s = -1/2 / (1 + x2^2 / 4)^2.
    const MetricField g{2, Box::cube(2, -1.0, 1.0), [](const Vector& x) {
                            Matrix m = Matrix::Identity(2, 2);
                            m(0, 0) = 1.0 + 0.25 * x[1] * x[1];
                            return m;
                        }};
    const Vector x = (Vector(2) << 0.1, 0.4).finished();
    const double q = 1.0 + 0.25 * x[1] * x[1];
    const double exact = -0.5 / (q * q);
    const double e1 = std::abs(scalar_curvature(g, x, 1e-2) - exact);
    const double e2 = std::abs(scalar_curvature(g, x, 5e-3) - exact);
    const double ratio = e2 / e1;
    o.require(ratio <= 0.35, "step-halving ratio <= 0.35");
    o.detail << "flat |s| " << flat << ", sphere rel err " << sphere_err << ", product err " << prod_err
             << ", convergence ratio " << ratio;
    return o;
}

Outcome stretched_formula() {
    Outcome o;
    struct Family {
        std::string name;
        MetricHomotopy h;
        Box box;
    };
    const ModelManifold pert = perturbed_tube_model(4, 1, 0.2, 0.1);
    const ModelManifold flat = flat_torus_model(4, 1, 0.2);
    const ModelManifold sph = sphere_point_model(3, 0.5);
    std::vector<Family> families{
        {"perturbed H1", h1_homotopy(pert, 0.1), end_sample_box(pert)},
        {"flat H2", h2_homotopy(flat, 0.1, scaled(flat.w_metric, 2.0), 0.05), end_sample_box(flat)},
        {"sphere H1", h1_homotopy(sph, 0.2), end_sample_box(sph)},
        {"conformal S3", conformal_family(3, 1.0), Box::cube(3, -0.8, 0.8)},
    };
    Rng rng(11);
    double worst = 0.0;
    std::size_t samples = 0;
    for (const Family& f : families) {
        for (int i = 0; i < 100; ++i) {
            const Vector x = rng.point(f.box);
            const double t = rng.uniform(0.05, 0.95);
            const double a = rng.uniform(0.2, 3.0);
            Vector p(x.size() + 1);
            p << x, t;
            const double direct = scalar_curvature(pulled_back_metric(f.h, a), p);
            const double formula = stretched_scalar_formula(f.h, x, t, a);
            worst = std::max(worst, std::abs(direct - formula) / std::max(1.0, std::abs(direct)));
            ++samples;
        }
    }
    o.require(worst <= 1e-3, "relative error <= 1e-3");
    o.detail << samples << " samples over " << families.size() << " families, max relative error " << worst;
    return o;
}

Outcome bending_algorithm() {
    Outcome o;
    Rng rng(2024);
    int violations = 0;
    int max_bends = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    double worst_t = 0.0;
    double worst_len = 0.0;
    for (int i = 0; i < 100; ++i) {
        BendingParams p;
        p.r1 = rng.uniform(1e-3, 0.5);
        p.eps0 = rng.uniform(0.05, 1.0);
        p.A = rng.uniform(0.0, 10.0);
        p.k = rng.integer(0, 2);
        p.n = p.k + rng.integer(3, 5);
        const BendingCurve c = construct_gamma(p);
        const CurveAudit a = audit_curve(c);
        const CertificateReport cert = certify_curvature_bound(c, p, 10000);
        bool kappa_ok = true;
        bool first = true;
        for (const CurveStage& st : c.stages) {
            if (st.kind != StageKind::Arc) continue;
            const double bound = first ? 2.0 / p.r1 : std::sin(st.theta_start) / (2.0 * st.r_start);
            if (st.realized_kappa() > bound * (1.0 + 1e-12)) kappa_ok = false;
            first = false;
        }
        const bool ok = c.t_f <= 7 * p.r1 && c.graph_length() <= 7 * p.r1 && a.theta_monotone &&
                        a.theta_endpoints && a.radius_decrease && kappa_ok && cert.passed;
        if (!ok) ++violations;
        max_bends = std::max(max_bends, c.bends);
        worst_margin = std::min(worst_margin, cert.margin);
        worst_t = std::max(worst_t, c.t_f / p.r1);
        worst_len = std::max(worst_len, c.graph_length() / p.r1);
    }
    o.require(violations == 0, "zero violations");
    o.detail << "100 draws, " << violations << " violations, max t_f/r1 " << worst_t << ", max length/r1 "
             << worst_len << ", max bends " << max_bends << ", worst certificate margin " << worst_margin;
    return o;
}

Outcome induced_tube() {
    Outcome o;
    const ModelManifold m = flat_torus_model(3, 0, 0.2);
    const int codim = m.codim();
    const double tol = 1e-3;
    const double eps0 = 0.5;
    std::vector<double> coefficients;
    double worst_resolved = 0.0;
    double worst_scaled = 0.0;
    double min_margin = std::numeric_limits<double>::infinity();
    std::size_t resolved = 0;
    std::size_t total = 0;
    for (double r1 : {0.1, 0.05}) {
        BendingParams p;
        p.n = 3;
        p.k = 0;
        p.r1 = r1;
        p.eps0 = eps0;
        p.kappa_coefficient = 2.0;
        const BendingCurve c = construct_gamma(p);
        const std::vector<InducedSample> samples = sample_induced_curvature(c, m, 3);
        const FormulaFit fit = fit_kappa_coefficient(samples, codim);
        coefficients.push_back(fit.kappa_coefficient);
        for (const InducedSample& s : samples) {
            const double sn = std::sin(s.theta);
            const double formula = (codim - 1.0) * (codim - 2.0) * sn * sn / (s.r * s.r) -
                                   fit.kappa_coefficient * (codim - 1.0) * s.kappa * sn / s.r;
            const double scale = std::max(1.0, kOracleTolScale * (codim - 1.0) * std::max(codim - 2.0, 1.0) / (s.r * s.r));
            const double err = std::abs(s.s_oracle - formula);
            worst_scaled = std::max(worst_scaled, err / (tol * scale));
            if (scale == 1.0) {
                worst_resolved = std::max(worst_resolved, err);
                ++resolved;
            }
            min_margin = std::min(min_margin, s.s_oracle - (-eps0 - tol * scale));
            ++total;
        }
    }
    const double drift = std::abs(coefficients[1] / coefficients[0] - 1.0);
    o.require(worst_resolved <= tol, "absolute error <= 1e-3 where resolved");
    o.require(worst_scaled <= 1.0, "error within the scaled tolerance everywhere");
    o.require(drift <= 0.05, "fitted c stable within 5%");
    o.require(min_margin >= 0.0, "s >= -eps0 - tol");
    o.detail << "c = " << coefficients[0] << ", " << coefficients[1] << " (drift " << drift << "), " << resolved << "/"
             << total << " samples resolved with max error " << worst_resolved << ", max scaled error ratio "
             << worst_scaled << ", min margin over -eps0 " << min_margin;
    return o;
}

Outcome stretch_lemma() {
    Outcome o;
    std::ostringstream ratios;
    double worst_min = std::numeric_limits<double>::infinity();
    double worst_drift = 0.0;
    for (const ModelManifold& m : {flat_torus_model(4, 1, 0.2), perturbed_tube_model(4, 1, 0.2, 0.1)}) {
        const HomotopyGrid grid = make_grid(end_sample_box(m), 1000, 9);
        for (int phase = 1; phase <= 2; ++phase) {
            std::vector<double> scaled_s;
            for (double delta : {0.1, 0.05}) {
                const MetricHomotopy h = phase == 1 ? h1_homotopy(m, delta)
                                                    : h2_homotopy(m, delta, scaled(m.w_metric, 2.0), delta / 2);
                const HomotopyStats st = homotopy_stats(h, grid);
                const CertificateReport rep = verify_positive_scalar(h, default_stretch(st), grid);
                o.require(rep.passed, m.name + " H" + std::to_string(phase) + " positive");
                worst_min = std::min(worst_min, rep.measured);
                if (phase == 1) scaled_s.push_back(st.s_min * delta * delta);
            }
            if (phase == 1) {
                const double drift = std::abs(scaled_s[1] / scaled_s[0] - 1.0);
                worst_drift = std::max(worst_drift, drift);
                o.require(scaled_s[1] > 0.0 && drift <= 0.2, m.name + " s(H1) delta^2 stable");
                ratios << " " << m.name << " " << scaled_s[0] << " -> " << scaled_s[1] << ";";
            }
        }
    }
    o.detail << "min stretched s " << worst_min << ", s(H1) delta^2:" << ratios.str() << " max drift " << worst_drift;
    return o;
}

struct CliRun {
    int exit_code = -1;
    std::string report;
};

CliRun run_cli(const std::string& plan, const fs::path& out) {
    const std::string cmd = std::string(PSC_SURGERY_BIN) + " plan --config " + (fs::path(PSC_PLANS_DIR) / (plan + ".json")).string() +
                            " --out " + out.string() + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (fs::exists(out)) r.report = read_file(out);
    return r;
}

struct CliResults {
    std::map<std::string, std::pair<CliRun, CliRun>> shipped;
    CliRun negative;
};

const CliResults& cli_results() {
    static const CliResults results = [] {
        const fs::path dir = fs::temp_directory_path() / ("psc_acceptance_" + std::to_string(::getpid()));
        fs::create_directories(dir);
        CliResults res;
        std::vector<std::future<void>> jobs;
        for (const std::string plan : {"flat_torus", "perturbed_tube", "sphere_point"}) {
            auto& slot = res.shipped[plan];
            jobs.push_back(std::async(std::launch::async, [&slot, plan, dir] { slot.first = run_cli(plan, dir / (plan + "_a.json")); }));
            jobs.push_back(std::async(std::launch::async, [&slot, plan, dir] { slot.second = run_cli(plan, dir / (plan + "_b.json")); }));
        }
        jobs.push_back(std::async(std::launch::async, [&res, dir] { res.negative = run_cli("negative_control", dir / "negative.json"); }));
        for (auto& j : jobs) j.get();
        fs::remove_all(dir);
        return res;
    }();
    return results;
}

Outcome volume_bounds() {
    Outcome o;
    const ModelManifold pert = perturbed_tube_model(4, 1, 0.2, 0.1);
    const ModelManifold flat = flat_torus_model(4, 1, 0.2);
    struct Family {
        std::string name;
        MetricHomotopy h;
        std::vector<int> cells;
    };
    const std::vector<Family> families{
        {"conformal S2", conformal_family(2, 1.0), {16, 16}},
        {"perturbed H1", h1_homotopy(pert, 0.05, AngularChart::Hyperspherical), {8, 8, 8}},
        {"flat H2", h2_homotopy(flat, 0.05, scaled(flat.w_metric, 2.0), 0.025, AngularChart::Hyperspherical), {8, 8, 8}},
    };
    double min_slack = std::numeric_limits<double>::infinity();
    for (const Family& f : families) {
        for (double a : {0.5, 2.0}) {
            const ProductVolume v = homotopy_volume_bound(f.h, a, {0.0, 0.25, 0.5, 0.75, 1.0}, f.cells, 8);
            o.require(v.passed, f.name + " product volume");
            min_slack = std::min(min_slack, v.slack);
        }
    }
    double shell_ratio = 0.0;
    int shells = 0;
    for (const ModelManifold& m : {flat, pert}) {
        const double delta = 0.1;
        const double K = shell_constant(m, delta, 8);
        for (auto [ra, rb] : {std::pair{0.0, 0.1}, {0.02, 0.05}, {0.05, 0.1}, {0.001, 0.002}}) {
            const double v = shell_volume(m, ra, rb, 6, 8, 8).value;
            shell_ratio = std::max(shell_ratio, v / ((rb - ra) * K));
            ++shells;
        }
    }
    o.require(shell_ratio <= 1.0, "shell volume <= (r_b - r_a) K");
    const CliResults& cli = cli_results();
    double worst_excess = -std::numeric_limits<double>::infinity();
    for (const auto& [name, runs] : cli.shipped) {
        if (runs.first.report.empty()) {
            o.require(false, name + " report written");
            continue;
        }
        const SurgeryReport r = report_from_json(parse_json(runs.first.report, name));
        const double excess = r.volume_measured - (r.ambient_volume + r.eps0 + 1e-3);
        worst_excess = std::max(worst_excess, excess);
        o.require(excess <= 0.0, name + " end-to-end volume");
    }
    o.detail << "product volume min slack " << min_slack << " over 3 families, max shell ratio " << shell_ratio
             << " over " << shells << " shells, end-to-end max Vol - (Vol_g + eps0 + 1e-3) " << worst_excess;
    return o;
}

Outcome theorem1_arithmetic() {
    Outcome o;
    Rng rng(77);
    double split_err = 0.0;
    double value_err = 0.0;
    for (int i = 0; i < 50; ++i) {
        const int n = rng.integer(3, 8);
        const double a1 = -rng.uniform(0.1, 10.0);
        const double a2 = -rng.uniform(0.1, 10.0);
        const SplitSearch b = brute_force_split(a1, a2, n);
        split_err = std::max(split_err, std::abs(b.lambda - optimal_split(a1, a2, n).lambda1));
        value_err = std::max(value_err, std::abs(b.value - glue_bound(a1, a2, n)));
    }
    o.require(split_err <= 2e-4, "split within 2e-4");
    o.require(value_err <= 1e-3, "bound within 1e-3");
    double prop_err = 0.0;
    bool monotone = true;
    for (int i = 0; i < 1000; ++i) {
        const int n = rng.integer(3, 10);
        const double y1 = -rng.uniform(0.0, 50.0);
        const double y2 = -rng.uniform(0.0, 50.0);
        const double y3 = -rng.uniform(0.0, 50.0);
        const double t = rng.uniform(0.01, 10.0);
        const double f = glue_bound(y1, y2, n);
        auto rel = [](double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); };
        prop_err = std::max(prop_err, rel(glue_bound(y2, y1, n), f));
        prop_err = std::max(prop_err, rel(glue_bound(t * y1, t * y2, n), t * f));
        prop_err = std::max(prop_err, rel(glue_bound(y1, 0.0, n), y1));
        const double left = glue_bound(glue_bound(y1, y2, n), y3, n);
        prop_err = std::max(prop_err, rel(glue_bound(y1, glue_bound(y2, y3, n), n), left));
        prop_err = std::max(prop_err, rel(glue_bound(glue_bound(y1, y3, n), y2, n), left));
        const double d = rng.uniform(0.0, 1.0);
        if (glue_bound(std::min(y1 + d, 0.0), y2, n) < f - 1e-10) monotone = false;
    }
    o.require(prop_err <= 1e-10, "properties exact to 1e-10");
    o.require(monotone, "monotone");
    o.detail << "max split error " << split_err << ", max bound error " << value_err << ", max property error "
             << prop_err;
    return o;
}

Outcome determinism() {
    Outcome o;
    const CliResults& cli = cli_results();
    for (const auto& [name, runs] : cli.shipped) {
        o.require(runs.first.exit_code == 0 && runs.second.exit_code == 0, name + " exit 0");
        o.require(!runs.first.report.empty() && runs.first.report == runs.second.report, name + " byte-identical");
        o.detail << name << " exit " << runs.first.exit_code << "/" << runs.second.exit_code
                 << (runs.first.report == runs.second.report ? " identical" : " differ") << ", ";
    }
    o.require(cli.negative.exit_code == 2, "negative control exit 2");
    o.detail << "negative_control exit " << cli.negative.exit_code;
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"curvature oracle", curvature_oracle},
        {"stretched scalar formula", stretched_formula},
        {"bending algorithm", bending_algorithm},
        {"induced tube oracle", induced_tube},
        {"stretch lemma", stretch_lemma},
        {"volume bounds", volume_bounds},
        {"theorem 1 arithmetic", theorem1_arithmetic},
        {"end-to-end determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.passed = false;
            o.detail << "error: " << e.what();
        }
        if (!o.passed) ++failures;
        std::printf("criterion %zu %s: %s: %s\n", i + 1, o.passed ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
