#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "psc/error.hpp"

namespace psc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Chart coordinates of a point (dimensionless model units).
using ChartPoint = Vector;

/// Axis-aligned box in chart coordinates.
struct Box {
    Vector lower;
    Vector upper;

    Box() = default;
    Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
        if (lower.size() != upper.size()) {
            throw Error(ErrorCode::DimensionMismatch, "box corner dimensions differ");
        }
    }

    static Box cube(int dim, double lo, double hi) {
        return Box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
    }

    int dim() const { return static_cast<int>(lower.size()); }

    bool empty() const {
        for (int i = 0; i < dim(); ++i) {
            if (!(upper[i] > lower[i])) return true;
        }
        return false;
    }

    // True when p sits inside the box with at least `margin` to every face.
    bool contains(const Vector& p, double margin = 0.0) const {
        if (p.size() != lower.size()) return false;
        for (int i = 0; i < dim(); ++i) {
            if (p[i] < lower[i] + margin || p[i] > upper[i] - margin) return false;
        }
        return true;
    }

    bool contains(const Box& other) const {
        if (other.dim() != dim()) return false;
        for (int i = 0; i < dim(); ++i) {
            if (other.lower[i] < lower[i] || other.upper[i] > upper[i]) return false;
        }
        return true;
    }

    Vector center() const { return 0.5 * (lower + upper); }

    Box shrunk(double margin) const {
        return Box((lower.array() + margin).matrix(), (upper.array() - margin).matrix());
    }

    /// Cartesian product: this box's axes first.
    Box times(const Box& other) const {
        Vector lo(dim() + other.dim()), hi(dim() + other.dim());
        lo << lower, other.lower;
        hi << upper, other.upper;
        return Box(lo, hi);
    }
};

/// A Riemannian metric written in a single coordinate chart.
///
/// `eval` must be a pure function returning a symmetric positive-definite
/// dim x dim matrix on the declared domain.
struct MetricField {
    int dim = 0;
    Box domain;
    std::function<Matrix(const Vector&)> eval;

    Matrix operator()(const Vector& p) const { return eval(p); }
};

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Block-diagonal product g1 (+) g2 on the product chart.
inline MetricField product_metric(const MetricField& g1, const MetricField& g2) {
    const int n1 = g1.dim;
    const int n2 = g2.dim;
    MetricField out;
    out.dim = n1 + n2;
    out.domain = g1.domain.times(g2.domain);
    out.eval = [g1, g2, n1, n2](const Vector& p) {
        Matrix g = Matrix::Zero(n1 + n2, n1 + n2);
        if (n1 > 0) g.topLeftCorner(n1, n1) = g1(p.head(n1));
        if (n2 > 0) g.bottomRightCorner(n2, n2) = g2(p.tail(n2));
        return g;
    };
    return out;
}

inline MetricField flat_metric(int dim, const Box& domain) {
    return MetricField{dim, domain, [dim](const Vector&) { return Matrix::Identity(dim, dim).eval(); }};
}

/// Round sphere S^m(radius) in the stereographic chart from one pole:
/// g = 4 radius^2 / (1 + |x|^2)^2 * identity.
inline MetricField stereographic_sphere_metric(int m, double radius, const Box& domain) {
    return MetricField{m, domain, [m, radius](const Vector& x) {
                           const double q = 1.0 + x.squaredNorm();
                           return (4.0 * radius * radius / (q * q) * Matrix::Identity(m, m)).eval();
                       }};
}

/// Cholesky-based inverse. A metric that fails Cholesky is a construction bug
/// upstream and is reported, never regularized.
inline Matrix inverse_spd(const Matrix& g) {
    if (!g.allFinite()) throw Error(ErrorCode::NonFinite, "metric matrix has non-finite entries");
    if (g.rows() == 0) return g;
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::NotPositiveDefinite, "metric matrix failed Cholesky");
    }
    return llt.solve(Matrix::Identity(g.rows(), g.cols()));
}

/// sqrt(det g) via Cholesky.
inline double sqrt_det_spd(const Matrix& g) {
    if (g.rows() == 0) return 1.0;
    if (!g.allFinite()) throw Error(ErrorCode::NonFinite, "metric matrix has non-finite entries");
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::NotPositiveDefinite, "metric matrix failed Cholesky");
    }
    const Matrix& l = llt.matrixLLT();
    double det = 1.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) det *= l(i, i);
    return det;
}

inline double min_eigenvalue(const Matrix& g) {
    if (g.rows() == 0) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(g), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Uniform grid of `per_axis` points per axis over `box` (cell midpoints when
/// `midpoints` is set, otherwise including the faces).
inline std::vector<Vector> uniform_grid(const Box& box, const std::vector<int>& per_axis,
                                        bool midpoints = false) {
    const int d = box.dim();
    if (static_cast<int>(per_axis.size()) != d) {
        throw Error(ErrorCode::DimensionMismatch, "grid axis count does not match box dimension");
    }
    std::vector<Vector> pts;
    if (d == 0) {
        pts.emplace_back(Vector(0));
        return pts;
    }
    std::vector<int> idx(d, 0);
    std::size_t total = 1;
    for (int c : per_axis) {
        if (c < 1) throw Error(ErrorCode::OutOfRange, "grid needs at least one point per axis");
        total *= static_cast<std::size_t>(c);
    }
    pts.reserve(total);
    for (std::size_t n = 0; n < total; ++n) {
        Vector p(d);
        for (int i = 0; i < d; ++i) {
            const double span = box.upper[i] - box.lower[i];
            if (midpoints) {
                p[i] = box.lower[i] + (idx[i] + 0.5) * span / per_axis[i];
            } else if (per_axis[i] == 1) {
                p[i] = box.lower[i] + 0.5 * span;
            } else {
                p[i] = box.lower[i] + idx[i] * span / (per_axis[i] - 1);
            }
        }
        pts.push_back(std::move(p));
        for (int i = d - 1; i >= 0; --i) {
            if (++idx[i] < per_axis[i]) break;
            idx[i] = 0;
        }
    }
    return pts;
}

inline std::vector<Vector> uniform_grid(const Box& box, int per_axis, bool midpoints = false) {
    return uniform_grid(box, std::vector<int>(static_cast<std::size_t>(box.dim()), per_axis), midpoints);
}

}  // namespace psc
