#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "fsvd/tps.hpp"

using namespace fsvd;

namespace {

MeanSurface surface_from(const Grid& s, const Grid& t,
                         const std::function<double(double, double)>& f) {
    Eigen::MatrixXd values(s.size(), t.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        for (Eigen::Index j = 0; j < t.size(); ++j) values(i, j) = f(s[i], t[j]);
    return {s, t, std::move(values)};
}

double data_residual(const TPSFit& fit, const MeanSurface& mean) {
    const QuadWeights v = trapezoid_weights(mean.s_grid);
    const QuadWeights u = trapezoid_weights(mean.t_grid);
    const Eigen::MatrixXd diff = fit.evaluate(mean.s_grid, mean.t_grid) - mean.values;
    return (v.values.asDiagonal() * diff.cwiseAbs2() * u.values.asDiagonal()).sum();
}

}  // namespace

TEST_CASE("zero smoothing interpolates the surface at the grid points") {
    const Grid s = Grid::equispaced(0.0, 1.0, 8);
    const Grid t = Grid::equispaced(0.0, 1.0, 6);
    const MeanSurface mean = surface_from(
        s, t, [](double a, double b) { return std::sin(3.0 * a) + a * std::cos(2.0 * b); });
    const TPSFit fit = fit_tps(mean, 0.0);
    CHECK((fit.evaluate(s, t) - mean.values).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("bilinear surfaces are fixed points for every smoothing level") {
    const Grid s = Grid::equispaced(0.0, 2.0, 9);
    const Grid t = Grid::equispaced(-1.0, 1.0, 7);
    const MeanSurface mean = surface_from(
        s, t, [](double a, double b) { return 1.5 - 0.5 * a + 2.0 * b + 0.25 * a * b; });
    const TPSSolver solver(s, t);
    for (const double theta : {0.0, 1e-3, 1.0, 1e3, 1e8}) {
        const TPSFit fit = solver.fit(mean, theta * solver.thetaScale());
        const Grid fine_s = Grid::equispaced(0.0, 2.0, 31);
        const Grid fine_t = Grid::equispaced(-1.0, 1.0, 31);
        const MeanSurface truth = surface_from(fine_s, fine_t, [](double a, double b) {
            return 1.5 - 0.5 * a + 2.0 * b + 0.25 * a * b;
        });
        CHECK((fit.evaluate(fine_s, fine_t) - truth.values).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("penalized fit matches a dense Kronecker-system oracle") {
    const Grid s = Grid::equispaced(0.0, 1.0, 7);
    const Grid t = Grid::equispaced(0.0, 1.0, 6);
    const MeanSurface mean = surface_from(s, t, [](double a, double b) {
        return std::exp(a - b) + std::sin(5.0 * a * b);
    });
    const TPSSolver solver(s, t);

    // rebuild the ingredients independently of the solver's diagonalization
    const SplineBasis sb(4, 0.0, 1.0, std::vector<double>(s.points().data() + 1,
                                                          s.points().data() + s.size() - 1));
    const SplineBasis tb(4, 0.0, 1.0, std::vector<double>(t.points().data() + 1,
                                                          t.points().data() + t.size() - 1));
    const Eigen::MatrixXd Bs = sb.evaluate(s), Bt = tb.evaluate(t);
    const QuadWeights v = trapezoid_weights(s), u = trapezoid_weights(t);
    const Eigen::MatrixXd Gs = gram_matrix(Bs, v), Gt = gram_matrix(Bt, u);
    const Eigen::MatrixXd Ps = second_derivative_penalty(sb);
    const Eigen::MatrixXd Pt = second_derivative_penalty(tb);
    const Eigen::MatrixXd R =
        Bs * v.values.asDiagonal() * mean.values * u.values.asDiagonal() * Bt.transpose();

    // with knots at every grid point the minimizer is flat along joint
    // null directions, so the oracle compares the optimality conditions and
    // the achieved objective rather than the coefficient matrices
    const auto objective = [&](const Eigen::MatrixXd& C, double theta) {
        const Eigen::MatrixXd resid = Bs.transpose() * C * Bt - mean.values;
        const double fit_term =
            (v.values.asDiagonal() * resid.cwiseAbs2() * u.values.asDiagonal()).sum();
        const double pen_term = (C.transpose() * Ps * C * Gt).trace() +
                                (C.transpose() * Gs * C * Pt).trace();
        return fit_term + theta * pen_term;
    };

    for (const double rel : {1e-4, 0.3, 50.0}) {
        const double theta = rel * solver.thetaScale();
        const Eigen::MatrixXd A =
            Eigen::kroneckerProduct(Gt, Gs) +
            theta * (Eigen::kroneckerProduct(Gt, Ps) + Eigen::kroneckerProduct(Pt, Gs));
        const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(R.data(), R.size());
        const Eigen::VectorXd cvec =
            A.completeOrthogonalDecomposition().solve(rhs);  // a minimum-norm minimizer
        const Eigen::MatrixXd C =
            Eigen::Map<const Eigen::MatrixXd>(cvec.data(), R.rows(), R.cols());

        const TPSFit fit = solver.fit(mean, theta);
        // the fit satisfies the penalized normal equations...
        const Eigen::MatrixXd stationarity = Gs * fit.coef * Gt +
                                             theta * (Ps * fit.coef * Gt + Gs * fit.coef * Pt) -
                                             R;
        CHECK(stationarity.cwiseAbs().maxCoeff() < 1e-8 * R.cwiseAbs().maxCoeff());
        // ...and achieves the same minimal objective as the dense solution
        CHECK(objective(fit.coef, theta) ==
              doctest::Approx(objective(C, theta)).epsilon(1e-8));
    }
}

TEST_CASE("data residual grows with the smoothing level") {
    const Grid g = Grid::equispaced(0.0, 1.0, 10);
    const MeanSurface mean = surface_from(g, g, [](double a, double b) {
        return std::sin(2.0 * M_PI * a) * std::cos(2.0 * M_PI * b);
    });
    const TPSSolver solver(g, g);
    double prev = -1.0;
    for (const double rel : {1e-6, 1e-3, 1.0, 1e3}) {
        const double res = data_residual(solver.fit(mean, rel * solver.thetaScale()), mean);
        CHECK(res >= prev - 1e-12);
        prev = res;
    }
}

TEST_CASE("fit is linear in the data") {
    const Grid g = Grid::equispaced(0.0, 1.0, 8);
    const MeanSurface m1 = surface_from(g, g, [](double a, double b) { return a * a + b; });
    const MeanSurface m2 =
        surface_from(g, g, [](double a, double b) { return std::cos(a + 2.0 * b); });
    MeanSurface combo = m1;
    combo.values = 2.0 * m1.values - 0.5 * m2.values;
    const TPSSolver solver(g, g);
    const double theta = 0.1 * solver.thetaScale();
    const Eigen::MatrixXd lhs = solver.fit(combo, theta).coef;
    const Eigen::MatrixXd rhs =
        2.0 * solver.fit(m1, theta).coef - 0.5 * solver.fit(m2, theta).coef;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("input validation") {
    const Grid g = Grid::equispaced(0.0, 1.0, 6);
    const MeanSurface mean = surface_from(g, g, [](double a, double b) { return a + b; });
    const TPSSolver solver(g, g);
    CHECK_THROWS_AS(solver.fit(mean, -1.0), DataError);
    MeanSurface wrong = mean;
    wrong.values = Eigen::MatrixXd::Zero(4, 6);
    CHECK_THROWS_AS(solver.fit(wrong, 1.0), DataError);
    CHECK(solver.thetaScale() > 0.0);
}

TEST_CASE("oracle smoothing picks an interior optimum on noisy data") {
    const Grid g = Grid::equispaced(0.0, 1.0, 10);
    const auto truth = [](double a, double b) {
        return std::sin(2.0 * M_PI * a) * std::cos(2.0 * M_PI * b);
    };
    MeanSurface noisy = surface_from(g, g, truth);
    std::mt19937_64 rng(77);
    std::normal_distribution<double> normal(0.0, 0.25);
    for (Eigen::Index i = 0; i < 10; ++i)
        for (Eigen::Index j = 0; j < 10; ++j) noisy.values(i, j) += normal(rng);

    const TPSSolver solver(g, g);
    const OracleSmoothingResult result = oracle_smoothing(solver, noisy, truth);
    CHECK(result.theta > 0.0);
    CHECK(std::isfinite(result.error));
    CHECK(result.error <= result.grid_error + 1e-12);
    CHECK(result.fit.theta == doctest::Approx(result.theta));

    // the refined choice beats both ends of the probe range
    const auto err_at = [&](double theta) {
        const Grid fine = Grid::equispaced(0.0, 1.0, 101);
        const QuadWeights w = trapezoid_weights(fine);
        Eigen::MatrixXd diff = solver.fit(noisy, theta).evaluate(fine, fine);
        for (Eigen::Index i = 0; i < fine.size(); ++i)
            for (Eigen::Index j = 0; j < fine.size(); ++j) diff(i, j) -= truth(fine[i], fine[j]);
        return std::sqrt(
            (w.values.asDiagonal() * diff.cwiseAbs2() * w.values.asDiagonal()).sum());
    };
    CHECK(result.error <= err_at(1e-8 * solver.thetaScale()) + 1e-12);
    CHECK(result.error <= err_at(1e4 * solver.thetaScale()) + 1e-12);
    // smoothing helps on noisy data: strictly better than near-interpolation
    CHECK(result.error < err_at(1e-8 * solver.thetaScale()));
}
