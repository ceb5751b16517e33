#pragma once

#include <vector>

#include <Eigen/Core>

#include "fsvd/grid.hpp"

namespace fsvd {

// Clamped B-spline basis on [a, b]: boundary knots at full multiplicity,
// interior knots nondecreasing with multiplicity at most `order`.
// Basis dimension q = order + number of interior knots.
class SplineBasis {
public:
    SplineBasis(int order, double a, double b, std::vector<double> interior_knots = {});

    int order() const { return order_; }
    int dimension() const { return static_cast<int>(knots_.size()) - order_; }
    double lower() const { return knots_.front(); }
    double upper() const { return knots_.back(); }
    const std::vector<double>& interiorKnots() const { return interior_; }
    const std::vector<double>& knots() const { return knots_; }

    // Values (or deriv-th derivatives) of all q basis functions at x.
    // Convention: right-continuous at interior knots, closed at b.
    Eigen::VectorXd evaluate(double x, int deriv = 0) const;

    // q x m matrix with B(i, j) = beta_i(grid[j]).
    Eigen::MatrixXd evaluate(const Grid& grid, int deriv = 0) const;

private:
    int findSpan(double x) const;

    int order_;
    std::vector<double> interior_;
    std::vector<double> knots_;  // full clamped knot vector, size q + order
};

// Gamma = B diag(w) B^T, the quadrature Gram matrix of the basis.
Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& B, const QuadWeights& w);

struct InverseSqrt {
    Eigen::MatrixXd matrix;  // G^{-1/2} on the retained eigenspace
    int rank;                // retained rank
};

// Eigendecomposition-based pseudo inverse square root of a symmetric PSD
// matrix; eigenvalues below rel_tol * lambda_max are dropped.
InverseSqrt symmetric_inverse_sqrt(const Eigen::MatrixXd& G, double rel_tol = 1e-10);

// P(i, j) = int beta_i''(s) beta_j''(s) ds, by exact per-interval Gauss
// quadrature. Requires order >= 3.
Eigen::MatrixXd second_derivative_penalty(const SplineBasis& basis);

}  // namespace fsvd
