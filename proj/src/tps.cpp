#include "fsvd/tps.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

namespace fsvd {

double TPSFit::evaluate(double s, double t) const {
    return s_basis.evaluate(s).dot(coef * t_basis.evaluate(t));
}

Eigen::MatrixXd TPSFit::evaluate(const Grid& eval_s, const Grid& eval_t) const {
    return s_basis.evaluate(eval_s).transpose() * coef * t_basis.evaluate(eval_t);
}

namespace {

struct AxisTraces {
    double gamma;
    double pen;
};

}  // namespace

TPSSolver::Axis TPSSolver::makeAxis(const Grid& grid) {
    std::vector<double> interior(grid.points().data() + 1,
                                 grid.points().data() + grid.size() - 1);
    SplineBasis basis(4, grid.front(), grid.back(), std::move(interior));
    Eigen::MatrixXd B = basis.evaluate(grid);
    QuadWeights w = trapezoid_weights(grid);

    const Eigen::MatrixXd Gamma = gram_matrix(B, w);
    const Eigen::MatrixXd P = second_derivative_penalty(basis);

    // Gamma and P have no common null vector, so the pencil regularizer
    // Gamma + P is positive definite and diagonalizes both at once.
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Gamma, Gamma + P);
    if (es.info() != Eigen::Success)
        throw NumericalError("tps: generalized eigendecomposition failed");

    Axis axis{std::move(basis), std::move(B), std::move(w),
              es.eigenvectors(), es.eigenvalues(), Eigen::VectorXd(), 0.0, 0.0};
    axis.gamma_d = axis.gamma_d.cwiseMax(0.0);
    axis.pen_d = (Eigen::VectorXd::Ones(axis.gamma_d.size()) - axis.gamma_d).cwiseMax(0.0);
    axis.tr_gamma = Gamma.trace();
    axis.tr_pen = P.trace();
    return axis;
}

TPSSolver::TPSSolver(const Grid& s_grid, const Grid& t_grid)
    : s_(makeAxis(s_grid)), t_(makeAxis(t_grid)) {
    theta_scale_ = (s_.tr_gamma * t_.tr_gamma) /
                   (s_.tr_pen * t_.tr_gamma + s_.tr_gamma * t_.tr_pen);
}

TPSFit TPSSolver::fit(const MeanSurface& mean, double theta) const {
    if (theta < 0.0) throw DataError("tps: smoothing parameter must be >= 0");
    if (mean.values.rows() != s_.B.cols() || mean.values.cols() != t_.B.cols())
        throw DataError("tps: mean surface does not match the solver grids");

    const Eigen::MatrixXd R = s_.B * s_.w.values.asDiagonal() * mean.values *
                              t_.w.values.asDiagonal() * t_.B.transpose();
    const Eigen::MatrixXd N = s_.E.transpose() * R * t_.E;

    Eigen::MatrixXd D(N.rows(), N.cols());
    double den_max = 0.0;
    for (Eigen::Index a = 0; a < N.rows(); ++a)
        for (Eigen::Index b = 0; b < N.cols(); ++b) {
            const double ga = s_.gamma_d[a], gb = t_.gamma_d[b];
            const double den = ga * gb + theta * (s_.pen_d[a] * gb + ga * t_.pen_d[b]);
            D(a, b) = den;
            den_max = std::max(den_max, den);
        }

    // Modes with a negligible denominator are jointly near-null on both axes,
    // so their numerator is roundoff; drop them (minimum-norm solution). A
    // large numerator there would signal a genuinely inconsistent system.
    const double den_cut = 1e-13 * den_max;
    const double num_cut = 1e-6 * N.cwiseAbs().maxCoeff();
    for (Eigen::Index a = 0; a < N.rows(); ++a)
        for (Eigen::Index b = 0; b < N.cols(); ++b) {
            if (D(a, b) > den_cut) {
                D(a, b) = N(a, b) / D(a, b);
            } else if (std::abs(N(a, b)) > num_cut) {
                throw NumericalError(
                    "tps: singular penalized normal equations; use theta > 0");
            } else {
                D(a, b) = 0.0;
            }
        }

    return {s_.basis, t_.basis, s_.E * D * t_.E.transpose(), theta};
}

TPSFit fit_tps(const MeanSurface& mean, double theta) {
    return TPSSolver(mean.s_grid, mean.t_grid).fit(mean, theta);
}

namespace {

double surface_root_ise(const TPSFit& fit, const Grid& fs, const Grid& ft,
                        const QuadWeights& wv, const QuadWeights& wu,
                        const Eigen::MatrixXd& truth_vals) {
    const Eigen::MatrixXd diff = fit.evaluate(fs, ft) - truth_vals;
    return std::sqrt(
        (wv.values.asDiagonal() * diff.cwiseAbs2() * wu.values.asDiagonal()).sum());
}

}  // namespace

OracleSmoothingResult oracle_smoothing(const TPSSolver& solver, const MeanSurface& mean,
                                       const std::function<double(double, double)>& truth) {
    const Grid fs = Grid::equispaced(mean.s_grid.front(), mean.s_grid.back(), 101);
    const Grid ft = Grid::equispaced(mean.t_grid.front(), mean.t_grid.back(), 101);
    const QuadWeights wv = trapezoid_weights(fs);
    const QuadWeights wu = trapezoid_weights(ft);
    Eigen::MatrixXd truth_vals(fs.size(), ft.size());
    for (Eigen::Index i = 0; i < fs.size(); ++i)
        for (Eigen::Index j = 0; j < ft.size(); ++j) truth_vals(i, j) = truth(fs[i], ft[j]);

    const auto probe = [&](double theta) {
        return surface_root_ise(solver.fit(mean, theta), fs, ft, wv, wu, truth_vals);
    };

    const int nprobe = 40;
    const double lo = std::log(1e-8 * solver.thetaScale());
    const double hi = std::log(1e4 * solver.thetaScale());
    std::vector<double> log_thetas(nprobe), errs(nprobe);
    int best = 0;
    for (int i = 0; i < nprobe; ++i) {
        log_thetas[i] = lo + (hi - lo) * i / (nprobe - 1);
        errs[i] = probe(std::exp(log_thetas[i]));
        if (errs[i] < errs[best]) best = i;
    }
    const double grid_error = errs[best];

    // Golden-section refinement between the probe neighbors of the minimum.
    double a = log_thetas[std::max(best - 1, 0)];
    double b = log_thetas[std::min(best + 1, nprobe - 1)];
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = probe(std::exp(x1)), f2 = probe(std::exp(x2));
    for (int it = 0; it < 40 && (b - a) > 1e-4; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = probe(std::exp(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = probe(std::exp(x2));
        }
    }

    double log_best = log_thetas[best];
    double err_best = grid_error;
    if (f1 < err_best) {
        log_best = x1;
        err_best = f1;
    }
    if (f2 < err_best) {
        log_best = x2;
        err_best = f2;
    }

    const double theta = std::exp(log_best);
    return {theta, solver.fit(mean, theta), err_best, grid_error};
}

OracleSmoothingResult oracle_smoothing(const MeanSurface& mean,
                                       const std::function<double(double, double)>& truth) {
    return oracle_smoothing(TPSSolver(mean.s_grid, mean.t_grid), mean, truth);
}

}  // namespace fsvd
