#include "fsvd/freeknot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "fsvd/errors.hpp"

namespace fsvd {

namespace {

void orient_first_nonzero_positive(Eigen::VectorXd& b) {
    const double scale = b.cwiseAbs().maxCoeff();
    if (scale == 0.0) return;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        if (std::abs(b[i]) > 1e-9 * scale) {
            if (b[i] < 0.0) b = -b;
            return;
        }
    }
}

struct ConstrainedEig {
    double value = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd coef;
    bool ok = false;
};

// Leading eigenvalue of b^T Omega b subject to b^T Gamma b = 1 and
// quadrature orthogonality to the prior component values.
ConstrainedEig constrained_top_eigenpair(const SplineBasis& basis, const Grid& grid,
                                         const QuadWeights& w, const Eigen::MatrixXd& K,
                                         const Eigen::MatrixXd& prior_values) {
    const Eigen::MatrixXd B = basis.evaluate(grid);
    const Eigen::Index q = B.rows();
    const Eigen::Index ncon = prior_values.cols();
    if (q <= ncon)
        throw NumericalError("orthogonality constraints exhaust the spline basis");

    Eigen::MatrixXd N;
    if (ncon == 0) {
        N = Eigen::MatrixXd::Identity(q, q);
    } else {
        const Eigen::MatrixXd C = B * (w.values.asDiagonal() * prior_values);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(C);
        N = Eigen::MatrixXd(qr.householderQ()).rightCols(q - ncon);
    }

    const Eigen::MatrixXd Gamma = gram_matrix(B, w);
    Eigen::MatrixXd Omega = B * w.values.asDiagonal() * K * w.values.asDiagonal() * B.transpose();
    Omega = (Omega + Omega.transpose()) / 2.0;

    const Eigen::MatrixXd Gr = N.transpose() * Gamma * N;
    const Eigen::MatrixXd Or = N.transpose() * Omega * N;
    const InverseSqrt gis = symmetric_inverse_sqrt(Gr);
    if (gis.rank == 0) return {};

    Eigen::MatrixXd W = gis.matrix * Or * gis.matrix;
    W = (W + W.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
    if (es.info() != Eigen::Success) return {};

    ConstrainedEig out;
    out.value = es.eigenvalues()[W.rows() - 1];
    out.coef = N * (gis.matrix * es.eigenvectors().col(W.rows() - 1));
    orient_first_nonzero_positive(out.coef);
    out.ok = std::isfinite(out.value);
    return out;
}

// Candidate knots: candidate-grid points strictly inside (a, b) whose current
// multiplicity still admits another copy.
std::vector<double> admissible_candidates(const Grid& candidates, const std::vector<double>& knots,
                                          int order, bool allow_repeats, double a, double b) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < candidates.size(); ++i) {
        const double t = candidates[i];
        if (!(t > a && t < b)) continue;
        const auto mult = std::count(knots.begin(), knots.end(), t);
        if (mult >= (allow_repeats ? order : 1)) continue;
        out.push_back(t);
    }
    return out;
}

}  // namespace

SplineBasis greedy_knot_aggregation(const std::function<double(const SplineBasis&)>& objective,
                                    const KnotSearchConfig& config, int order, double a, double b) {
    if (!config.candidate_grid)
        throw DataError("greedy_knot_aggregation: candidate grid required");
    if (config.max_knots < 0) throw DataError("max_knots must be >= 0");
    if (!(config.rel_improvement_tol > 0)) throw DataError("rel_improvement_tol must be > 0");

    std::vector<double> knots;
    SplineBasis best(order, a, b);
    double best_value = objective(best);
    if (!std::isfinite(best_value))
        throw NumericalError("greedy_knot_aggregation: objective non-finite at the knotless basis");

    while (static_cast<int>(knots.size()) < config.max_knots) {
        const auto candidates = admissible_candidates(*config.candidate_grid, knots, order,
                                                      config.allow_repeats, a, b);
        if (candidates.empty()) break;

        double step_value = -std::numeric_limits<double>::infinity();
        double step_knot = 0.0;
        bool any_finite = false;
        for (const double t : candidates) {
            std::vector<double> trial = knots;
            trial.insert(std::upper_bound(trial.begin(), trial.end(), t), t);
            const double value = objective(SplineBasis(order, a, b, std::move(trial)));
            if (!std::isfinite(value)) continue;
            any_finite = true;
            if (value > step_value) {
                step_value = value;
                step_knot = t;
            }
        }
        if (!any_finite)
            throw NumericalError("greedy_knot_aggregation: objective non-finite for all " +
                                 std::to_string(candidates.size()) + " candidates at " +
                                 std::to_string(knots.size()) + " knots");

        const double scale = std::max(std::abs(best_value), 1e-300);
        if ((step_value - best_value) / scale < config.rel_improvement_tol) break;

        knots.insert(std::upper_bound(knots.begin(), knots.end(), step_knot), step_knot);
        best = SplineBasis(order, a, b, knots);
        best_value = step_value;
    }
    return best;
}

GreedyPath greedy_component_path(const Eigen::MatrixXd& K, const Grid& grid,
                                 const QuadWeights& w, const Eigen::MatrixXd& prior_values,
                                 int order, const KnotSearchConfig& config,
                                 bool stop_on_tolerance) {
    const Grid& candidates_grid = config.candidate_grid ? *config.candidate_grid : grid;
    const double a = grid.front(), b = grid.back();

    GreedyPath path;
    std::vector<double> knots;
    ConstrainedEig current =
        constrained_top_eigenpair(SplineBasis(order, a, b), grid, w, K, prior_values);
    if (!current.ok)
        throw NumericalError("free-knot search failed at the knotless basis");
    path.push_back({SplineBasis(order, a, b), current.coef, current.value});

    while (static_cast<int>(knots.size()) < config.max_knots) {
        const auto candidates =
            admissible_candidates(candidates_grid, knots, order, config.allow_repeats, a, b);
        if (candidates.empty()) break;

        ConstrainedEig step;
        double step_knot = 0.0;
        bool any_finite = false;
        for (const double t : candidates) {
            std::vector<double> trial = knots;
            trial.insert(std::upper_bound(trial.begin(), trial.end(), t), t);
            SplineBasis basis(order, a, b, std::move(trial));
            ConstrainedEig cand = constrained_top_eigenpair(basis, grid, w, K, prior_values);
            if (!cand.ok) continue;
            any_finite = true;
            if (cand.value > step.value) {
                step = std::move(cand);
                step_knot = t;
            }
        }
        if (!any_finite)
            throw NumericalError("free-knot search: objective non-finite for all candidates at " +
                                 std::to_string(knots.size()) + " knots");

        if (stop_on_tolerance) {
            const double scale = std::max(std::abs(current.value), 1e-300);
            if ((step.value - current.value) / scale < config.rel_improvement_tol) break;
        } else if (!(step.value > current.value)) {
            break;
        }

        knots.insert(std::upper_bound(knots.begin(), knots.end(), step_knot), step_knot);
        current = step;
        path.push_back({SplineBasis(order, a, b, knots), current.coef, current.value});
    }
    return path;
}

ComponentFit fit_component_freeknot(const Eigen::MatrixXd& K, const Grid& grid,
                                    const QuadWeights& w, const Eigen::MatrixXd& prior_values,
                                    const KnotSearchConfig& config, int order) {
    GreedyPath path = greedy_component_path(K, grid, w, prior_values, order, config, true);
    return std::move(path.back());
}

int select_num_knots_oracle(const Eigen::MatrixXd& K, const Grid& grid, const QuadWeights& w,
                            const Eigen::MatrixXd& prior_values,
                            const Eigen::VectorXd& truth_values, int order,
                            const KnotSearchConfig& config) {
    if (truth_values.size() != grid.size())
        throw DataError("select_num_knots_oracle: truth values do not match the grid");
    const GreedyPath path =
        greedy_component_path(K, grid, w, prior_values, order, config, false);

    int best_budget = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < path.size(); ++j) {
        const Eigen::VectorXd vals = path[j].basis.evaluate(grid).transpose() * path[j].coef;
        const double err_plus = discrete_inner_product(vals - truth_values, vals - truth_values, w);
        const Eigen::VectorXd flipped = vals + truth_values;
        const double err_minus = discrete_inner_product(flipped, flipped, w);
        const double err = std::min(err_plus, err_minus);
        if (err < best_err * (1.0 - 1e-12)) {
            best_err = err;
            best_budget = static_cast<int>(j);
        }
    }
    return best_budget;
}

FixedKnotSchedule fixed_knot_protocol() { return {}; }

}  // namespace fsvd
