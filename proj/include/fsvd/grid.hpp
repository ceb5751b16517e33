#pragma once

#include <Eigen/Core>

#include "fsvd/errors.hpp"

namespace fsvd {

// Strictly increasing sequence of evaluation points on a closed interval
// [front(), back()]. Immutable after construction.
class Grid {
public:
    explicit Grid(Eigen::VectorXd points);

    static Grid equispaced(double a, double b, Eigen::Index m);

    Eigen::Index size() const { return points_.size(); }
    double operator[](Eigen::Index i) const { return points_[i]; }
    double front() const { return points_[0]; }
    double back() const { return points_[points_.size() - 1]; }
    double length() const { return back() - front(); }
    const Eigen::VectorXd& points() const { return points_; }

    bool operator==(const Grid& other) const { return points_ == other.points_; }

private:
    Eigen::VectorXd points_;
};

// Trapezoid-rule quadrature weights attached to a grid. Weights are positive
// and sum to the grid interval length.
struct QuadWeights {
    Eigen::VectorXd values;

    Eigen::Index size() const { return values.size(); }
    Eigen::MatrixXd asDiagonal() const { return values.asDiagonal(); }
};

QuadWeights trapezoid_weights(const Grid& grid);

// Sum_j f_j g_j w_j; the discrete realization of every L2 inner product here.
double discrete_inner_product(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                              const QuadWeights& w);

inline double discrete_norm(const Eigen::VectorXd& f, const QuadWeights& w) {
    return std::sqrt(discrete_inner_product(f, f, w));
}

}  // namespace fsvd
