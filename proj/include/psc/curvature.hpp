#pragma once

// Finite-difference Riemannian curvature and midpoint-rule volume for metrics
// given in a single coordinate chart. These routines are the oracle every
// closed-form claim elsewhere in the library is checked against, so they stay
// deliberately plain: fixed central differences, no adaptivity.

#include <cmath>
#include <vector>

#include "psc/chart.hpp"

namespace psc {

inline constexpr double kDefaultStep = 1e-3;

/// Christoffel symbols of the second kind, Gamma^l_ij, stored densely.
class Christoffel {
public:
    explicit Christoffel(int dim) : dim_(dim), data_(static_cast<std::size_t>(dim * dim * dim), 0.0) {}

    int dim() const { return dim_; }
    double operator()(int l, int i, int j) const { return data_[index(l, i, j)]; }
    double& operator()(int l, int i, int j) { return data_[index(l, i, j)]; }

    Christoffel& operator-=(const Christoffel& o) {
        for (std::size_t q = 0; q < data_.size(); ++q) data_[q] -= o.data_[q];
        return *this;
    }
    Christoffel& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    std::size_t index(int l, int i, int j) const {
        return static_cast<std::size_t>((l * dim_ + i) * dim_ + j);
    }

    int dim_;
    std::vector<double> data_;
};

struct CurvatureReport {
    ChartPoint point;
    double scalar = 0.0;
    double step = 0.0;
};

struct VolumeEstimate {
    double value = 0.0;
    // |V(cells) - V(cells/2)|, the successive-refinement error indicator.
    double refinement_error = 0.0;
    std::vector<int> cells;
};

namespace detail {

inline void check_point(const MetricField& metric, const Vector& p, double step, double margin_steps) {
    if (p.size() != metric.dim) {
        throw Error(ErrorCode::DimensionMismatch, "chart point dimension does not match metric");
    }
    if (!p.allFinite()) throw Error(ErrorCode::NonFinite, "chart point has non-finite coordinates");
    if (!(step > 0.0)) throw Error(ErrorCode::OutOfRange, "finite-difference step must be positive");
    if (!metric.domain.contains(p, margin_steps * step)) {
        throw Error(ErrorCode::BoundaryMargin, "point closer than " + std::to_string(margin_steps) +
                                                   " steps to the chart boundary");
    }
}

inline Christoffel christoffel_at(const MetricField& metric, const Vector& p, double h) {
    const int n = metric.dim;
    const Matrix ginv = inverse_spd(metric(p));
    std::vector<Matrix> dg(static_cast<std::size_t>(n));
    Vector q = p;
    for (int k = 0; k < n; ++k) {
        q[k] = p[k] + h;
        const Matrix gp = metric(q);
        q[k] = p[k] - h;
        const Matrix gm = metric(q);
        q[k] = p[k];
        dg[static_cast<std::size_t>(k)] = (gp - gm) / (2.0 * h);
    }
    Christoffel gamma(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            for (int l = 0; l < n; ++l) {
                double sum = 0.0;
                for (int m = 0; m < n; ++m) {
                    const double bracket = dg[static_cast<std::size_t>(i)](j, m) +
                                           dg[static_cast<std::size_t>(j)](i, m) -
                                           dg[static_cast<std::size_t>(m)](i, j);
                    sum += ginv(l, m) * bracket;
                }
                gamma(l, i, j) = 0.5 * sum;
                gamma(l, j, i) = 0.5 * sum;
            }
        }
    }
    return gamma;
}

}  // namespace detail

/// Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij) by central differences.
/// Requires p to sit at least 2*step inside the chart domain.
inline Christoffel christoffel(const MetricField& metric, const ChartPoint& p, double step = kDefaultStep) {
    detail::check_point(metric, p, step, 2.0);
    return detail::christoffel_at(metric, p, step);
}

/// Scalar curvature s = g^ij R_ij with
/// R_ij = d_k G^k_ij - d_i G^k_kj + G^k_kl G^l_ij - G^k_il G^l_kj.
/// Christoffel derivatives are central differences of finite-difference
/// Christoffels (same step), so p needs a 4*step margin.
inline double scalar_curvature(const MetricField& metric, const ChartPoint& p, double step = kDefaultStep) {
    detail::check_point(metric, p, step, 4.0);
    const int n = metric.dim;
    const Matrix ginv = inverse_spd(metric(p));
    const Christoffel gamma = detail::christoffel_at(metric, p, step);

    std::vector<Christoffel> dgamma;
    dgamma.reserve(static_cast<std::size_t>(n));
    Vector q = p;
    for (int k = 0; k < n; ++k) {
        q[k] = p[k] + step;
        Christoffel d = detail::christoffel_at(metric, q, step);
        q[k] = p[k] - step;
        d -= detail::christoffel_at(metric, q, step);
        q[k] = p[k];
        d *= 1.0 / (2.0 * step);
        dgamma.push_back(std::move(d));
    }

    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double gij = ginv(i, j);
            if (gij == 0.0) continue;
            double ric = 0.0;
            for (int k = 0; k < n; ++k) {
                ric += dgamma[static_cast<std::size_t>(k)](k, i, j);
                ric -= dgamma[static_cast<std::size_t>(i)](k, k, j);
                for (int l = 0; l < n; ++l) {
                    ric += gamma(k, k, l) * gamma(l, i, j) - gamma(k, i, l) * gamma(l, k, j);
                }
            }
            s += gij * ric;
        }
    }
    if (!std::isfinite(s)) throw Error(ErrorCode::NonFinite, "scalar curvature is not finite");
    return s;
}

inline CurvatureReport curvature_report(const MetricField& metric, const ChartPoint& p,
                                        double step = kDefaultStep) {
    return CurvatureReport{p, scalar_curvature(metric, p, step), step};
}

namespace detail {

inline double midpoint_volume(const MetricField& metric, const Box& box, const std::vector<int>& cells) {
    double cell_volume = 1.0;
    for (int i = 0; i < box.dim(); ++i) cell_volume *= (box.upper[i] - box.lower[i]) / cells[static_cast<std::size_t>(i)];
    double sum = 0.0;
    for (const Vector& p : uniform_grid(box, cells, /*midpoints=*/true)) sum += sqrt_det_spd(metric(p));
    return sum * cell_volume;
}

}  // namespace detail

/// Midpoint-rule quadrature of sqrt(det g) over `box` with per-axis cell counts.
inline VolumeEstimate volume(const MetricField& metric, const Box& box, const std::vector<int>& cells) {
    if (box.dim() != metric.dim) throw Error(ErrorCode::DimensionMismatch, "box dimension does not match metric");
    if (static_cast<int>(cells.size()) != box.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "cell counts do not match box dimension");
    }
    if (box.empty()) throw Error(ErrorCode::OutOfRange, "empty integration box");
    if (!metric.domain.contains(box)) throw Error(ErrorCode::OutOfRange, "integration box leaves the chart domain");
    for (int c : cells) {
        if (c < 2) throw Error(ErrorCode::OutOfRange, "need at least 2 cells per axis");
    }
    std::vector<int> coarse(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) coarse[i] = std::max(1, cells[i] / 2);

    VolumeEstimate out;
    out.cells = cells;
    out.value = detail::midpoint_volume(metric, box, cells);
    out.refinement_error = std::abs(out.value - detail::midpoint_volume(metric, box, coarse));
    return out;
}

inline VolumeEstimate volume(const MetricField& metric, const Box& box, int cells_per_axis) {
    return volume(metric, box, std::vector<int>(static_cast<std::size_t>(box.dim()), cells_per_axis));
}

/// Spot-checks the MetricField invariants (symmetry to 1e-12, Cholesky succeeds)
/// at the given points. Throws on the first violation.
inline void validate_metric(const MetricField& metric, const std::vector<Vector>& points) {
    if (metric.dim == 0) return;
    for (const Vector& p : points) {
        const Matrix g = metric(p);
        if (g.rows() != metric.dim || g.cols() != metric.dim) {
            throw Error(ErrorCode::DimensionMismatch, "metric returned a matrix of the wrong size");
        }
        if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff())) {
            throw Error(ErrorCode::NotPositiveDefinite, "metric matrix is not symmetric");
        }
        (void)inverse_spd(g);
    }
}

}  // namespace psc
