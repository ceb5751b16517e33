#include "fsvd/bspline.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace fsvd {

SplineBasis::SplineBasis(int order, double a, double b, std::vector<double> interior_knots)
    : order_(order), interior_(std::move(interior_knots)) {
    if (order_ < 1) throw DataError("spline order must be >= 1");
    if (!(a < b)) throw DataError("spline interval must have a < b");
    int run = 0;
    for (std::size_t i = 0; i < interior_.size(); ++i) {
        const double t = interior_[i];
        if (!(t > a && t < b)) throw DataError("interior knot outside (a, b)");
        if (i > 0 && t < interior_[i - 1]) throw DataError("interior knots must be nondecreasing");
        run = (i > 0 && t == interior_[i - 1]) ? run + 1 : 1;
        if (run > order_) throw DataError("interior knot multiplicity exceeds order");
    }
    knots_.reserve(interior_.size() + 2 * order_);
    knots_.insert(knots_.end(), order_, a);
    knots_.insert(knots_.end(), interior_.begin(), interior_.end());
    knots_.insert(knots_.end(), order_, b);
}

int SplineBasis::findSpan(double x) const {
    const int p = order_ - 1;
    const int n = dimension() - 1;
    if (x >= knots_[n + 1]) return n;  // closed at the right boundary
    int lo = p, hi = n + 1;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (x < knots_[mid])
            hi = mid;
        else
            lo = mid;
    }
    return lo;
}

Eigen::VectorXd SplineBasis::evaluate(double x, int deriv) const {
    if (deriv < 0) throw DataError("derivative order must be >= 0");
    const int q = dimension();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(q);
    if (x < lower() || x > upper())
        throw DataError("evaluation point outside the basis interval");
    if (deriv >= order_) return out;  // piecewise degree order-1

    const int p = order_ - 1;
    const int span = findSpan(x);

    // Piegl & Tiller A2.3: derivatives of the p+1 nonzero basis functions.
    Eigen::MatrixXd ndu(p + 1, p + 1);
    std::vector<double> left(p + 1), right(p + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - knots_[span + 1 - j];
        right[j] = knots_[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }

    Eigen::VectorXd ders(p + 1);
    if (deriv == 0) {
        for (int j = 0; j <= p; ++j) ders[j] = ndu(j, p);
    } else {
        Eigen::MatrixXd a(2, p + 1);
        for (int r = 0; r <= p; ++r) {
            int s1 = 0, s2 = 1;
            a(0, 0) = 1.0;
            double d = 0.0;
            for (int k = 1; k <= deriv; ++k) {
                d = 0.0;
                const int rk = r - k, pk = p - k;
                if (r >= k) {
                    a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                    d = a(s2, 0) * ndu(rk, pk);
                }
                const int j1 = (rk >= -1) ? 1 : -rk;
                const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
                for (int j = j1; j <= j2; ++j) {
                    a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                    d += a(s2, j) * ndu(rk + j, pk);
                }
                if (r <= pk) {
                    a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                    d += a(s2, k) * ndu(r, pk);
                }
                std::swap(s1, s2);
            }
            ders[r] = d;
        }
        double factor = 1.0;
        for (int k = 0; k < deriv; ++k) factor *= static_cast<double>(p - k);
        ders *= factor;
    }

    for (int j = 0; j <= p; ++j) out[span - p + j] = ders[j];
    return out;
}

Eigen::MatrixXd SplineBasis::evaluate(const Grid& grid, int deriv) const {
    Eigen::MatrixXd B(dimension(), grid.size());
    for (Eigen::Index j = 0; j < grid.size(); ++j) B.col(j) = evaluate(grid[j], deriv);
    return B;
}

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& B, const QuadWeights& w) {
    if (B.cols() != w.size()) throw DataError("gram_matrix: dimension mismatch");
    Eigen::MatrixXd G = B * w.values.asDiagonal() * B.transpose();
    return (G + G.transpose()) / 2.0;
}

InverseSqrt symmetric_inverse_sqrt(const Eigen::MatrixXd& G, double rel_tol) {
    if (G.rows() != G.cols()) throw DataError("symmetric_inverse_sqrt: matrix not square");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((G + G.transpose()) / 2.0);
    if (es.info() != Eigen::Success)
        throw NumericalError("symmetric_inverse_sqrt: eigendecomposition failed");
    const Eigen::VectorXd& lam = es.eigenvalues();
    const double lam_max = std::max(lam.maxCoeff(), 0.0);
    if (lam.minCoeff() < -rel_tol * std::max(lam_max, 1e-300))
        throw NumericalError("symmetric_inverse_sqrt: matrix is not positive semidefinite");
    const double cutoff = rel_tol * lam_max;
    Eigen::VectorXd d = Eigen::VectorXd::Zero(lam.size());
    int rank = 0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam[i] > cutoff) {
            d[i] = 1.0 / std::sqrt(lam[i]);
            ++rank;
        }
    }
    return {es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose(), rank};
}

namespace {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
}

}  // namespace

Eigen::MatrixXd second_derivative_penalty(const SplineBasis& basis) {
    if (basis.order() < 3)
        throw DataError("second_derivative_penalty requires order >= 3");
    const int q = basis.dimension();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(q, q);

    std::vector<double> breaks;
    breaks.push_back(basis.lower());
    for (double t : basis.interiorKnots())
        if (t > breaks.back()) breaks.push_back(t);
    breaks.push_back(basis.upper());

    // Integrand is piecewise polynomial of degree 2*(order-3).
    const int ngauss = std::max(1, basis.order() - 2);
    std::vector<double> gx, gw;
    gauss_legendre(ngauss, gx, gw);

    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double mid = (breaks[i] + breaks[i + 1]) / 2.0;
        const double half = (breaks[i + 1] - breaks[i]) / 2.0;
        for (int g = 0; g < ngauss; ++g) {
            const Eigen::VectorXd d2 = basis.evaluate(mid + half * gx[g], 2);
            P.noalias() += (gw[g] * half) * d2 * d2.transpose();
        }
    }
    return (P + P.transpose()) / 2.0;
}

}  // namespace fsvd
