#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "fsvd/bspline.hpp"
#include "fsvd/grid.hpp"

namespace fsvd {

// Free parameters of the greedy knot-aggregation search.
struct KnotSearchConfig {
    std::optional<Grid> candidate_grid;  // defaults to the data grid
    int max_knots = 10;
    double rel_improvement_tol = 1e-3;
    bool allow_repeats = true;
};

// Greedy aggregation: starting knotless, repeatedly add the candidate knot
// that maximizes `objective`; stop when the relative improvement drops below
// the tolerance or the budget is exhausted.
SplineBasis greedy_knot_aggregation(const std::function<double(const SplineBasis&)>& objective,
                                    const KnotSearchConfig& config, int order, double a, double b);

struct ComponentFit {
    SplineBasis basis;
    Eigen::VectorXd coef;  // Gamma-normalized
    double eigenvalue;     // constrained leading eigenvalue
};

// One entry per accepted greedy step (entry j has j interior knots).
using GreedyPath = std::vector<ComponentFit>;

// Greedy path for one eigenfunction: objective is the leading eigenvalue of
// the basis-projected kernel, subject to data-grid quadrature orthogonality
// against the columns of prior_values (m x (k-1)).
GreedyPath greedy_component_path(const Eigen::MatrixXd& K, const Grid& grid,
                                 const QuadWeights& w, const Eigen::MatrixXd& prior_values,
                                 int order, const KnotSearchConfig& config,
                                 bool stop_on_tolerance = true);

// kth component under the free-knot search (tolerance-stopped greedy).
ComponentFit fit_component_freeknot(const Eigen::MatrixXd& K, const Grid& grid,
                                    const QuadWeights& w, const Eigen::MatrixXd& prior_values,
                                    const KnotSearchConfig& config, int order);

// Simulation-only oracle: number of knots (0..max_knots along the greedy
// path) minimizing the discrete L2 error against the true eigenfunction,
// up to sign. Ties resolve to the smallest budget.
int select_num_knots_oracle(const Eigen::MatrixXd& K, const Grid& grid, const QuadWeights& w,
                            const Eigen::MatrixXd& prior_values,
                            const Eigen::VectorXd& truth_values, int order,
                            const KnotSearchConfig& config);

// The fixed per-component knot budgets of the SVf protocol.
struct FixedKnotSchedule {
    std::vector<int> phi{3, 5};
    std::vector<int> psi{2, 4};
};

FixedKnotSchedule fixed_knot_protocol();

}  // namespace fsvd
