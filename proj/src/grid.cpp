#include "fsvd/grid.hpp"

#include <cmath>

namespace fsvd {

Grid::Grid(Eigen::VectorXd points) : points_(std::move(points)) {
    if (points_.size() < 2)
        throw DataError("grid needs at least 2 points");
    for (Eigen::Index i = 0; i < points_.size(); ++i) {
        if (!std::isfinite(points_[i]))
            throw DataError("grid contains non-finite point");
        if (i > 0 && points_[i] <= points_[i - 1])
            throw DataError("grid points must be strictly increasing");
    }
}

Grid Grid::equispaced(double a, double b, Eigen::Index m) {
    if (m < 2) throw DataError("grid needs at least 2 points");
    Eigen::VectorXd p(m);
    for (Eigen::Index i = 0; i < m; ++i)
        p[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(m - 1);
    p[m - 1] = b;
    return Grid(std::move(p));
}

QuadWeights trapezoid_weights(const Grid& grid) {
    const Eigen::Index m = grid.size();
    Eigen::VectorXd w(m);
    w[0] = (grid[1] - grid[0]) / 2.0;
    for (Eigen::Index j = 1; j + 1 < m; ++j)
        w[j] = (grid[j + 1] - grid[j - 1]) / 2.0;
    w[m - 1] = (grid[m - 1] - grid[m - 2]) / 2.0;
    return QuadWeights{std::move(w)};
}

double discrete_inner_product(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                              const QuadWeights& w) {
    if (f.size() != g.size() || f.size() != w.size())
        throw DataError("discrete_inner_product: length mismatch");
    return (f.array() * g.array() * w.values.array()).sum();
}

}  // namespace fsvd
