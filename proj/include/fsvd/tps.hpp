#pragma once

#include <functional>

#include <Eigen/Core>

#include "fsvd/bspline.hpp"
#include "fsvd/core.hpp"
#include "fsvd/grid.hpp"

namespace fsvd {

// Tensor-product penalized cubic spline fit of a mean surface; knots at all
// grid points, one smoothing parameter.
struct TPSFit {
    SplineBasis s_basis;
    SplineBasis t_basis;
    Eigen::MatrixXd coef;  // q_s x q_t
    double theta = 0.0;

    double evaluate(double s, double t) const;
    Eigen::MatrixXd evaluate(const Grid& eval_s, const Grid& eval_t) const;
};

// Caches the bases and the simultaneous diagonalization of (Gamma, P) on
// each axis, so repeated theta probes on the same grids cost O(q^2).
class TPSSolver {
public:
    TPSSolver(const Grid& s_grid, const Grid& t_grid);

    TPSFit fit(const MeanSurface& mean, double theta) const;

    // Data-independent scale for theta grids (design/penalty trace ratio).
    double thetaScale() const { return theta_scale_; }

private:
    struct Axis {
        SplineBasis basis;
        Eigen::MatrixXd B;  // q x m on the data grid
        QuadWeights w;
        Eigen::MatrixXd E;        // joint eigenvectors of (Gamma, Gamma + P)
        Eigen::VectorXd gamma_d;  // E^T Gamma E diagonal
        Eigen::VectorXd pen_d;    // E^T P E diagonal
        double tr_gamma = 0.0;
        double tr_pen = 0.0;
    };
    static Axis makeAxis(const Grid& grid);

    Axis s_, t_;
    double theta_scale_;
};

// Single-shot penalized fit (builds a solver internally).
TPSFit fit_tps(const MeanSurface& mean, double theta);

struct OracleSmoothingResult {
    double theta;
    TPSFit fit;
    double error;        // root-ISE of the selected fit against the truth
    double grid_error;   // best error seen on the log-spaced probe grid
};

// Simulation-only oracle: minimizes the root-ISE against the true mean over
// a log-spaced theta grid, refined by golden-section search in log theta.
OracleSmoothingResult oracle_smoothing(const TPSSolver& solver, const MeanSurface& mean,
                                       const std::function<double(double, double)>& truth);

OracleSmoothingResult oracle_smoothing(const MeanSurface& mean,
                                       const std::function<double(double, double)>& truth);

}  // namespace fsvd
