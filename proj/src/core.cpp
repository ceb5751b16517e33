#include "fsvd/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

namespace fsvd {

DataTensor::DataTensor(Grid s, Grid t, std::vector<Eigen::MatrixXd> surf)
    : s_grid(std::move(s)), t_grid(std::move(t)), surfaces(std::move(surf)) {
    if (surfaces.empty()) throw DataError("data tensor has no subjects");
    for (const auto& x : surfaces) {
        if (x.rows() != s_grid.size() || x.cols() != t_grid.size())
            throw DataError("subject surface dimensions do not match the grids");
        if (!x.allFinite()) throw DataError("data tensor contains non-finite values");
    }
}

Eigen::VectorXd ComponentPair::phiValues(const Grid& g) const {
    return phi_basis.evaluate(g).transpose() * phi_coef;
}

Eigen::VectorXd ComponentPair::psiValues(const Grid& g) const {
    return psi_basis.evaluate(g).transpose() * psi_coef;
}

MeanSurface cross_sectional_mean(const DataTensor& data) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(data.s_grid.size(), data.t_grid.size());
    for (const auto& x : data.surfaces) m += x;
    m /= static_cast<double>(data.subjects());
    return {data.s_grid, data.t_grid, std::move(m)};
}

Eigen::MatrixXd kernel_k1(const MeanSurface& mean, const QuadWeights& u) {
    if (u.size() != mean.t_grid.size()) throw DataError("kernel_k1: weight length mismatch");
    Eigen::MatrixXd K = mean.values * u.values.asDiagonal() * mean.values.transpose();
    return (K + K.transpose()) / 2.0;
}

Eigen::MatrixXd kernel_k2(const MeanSurface& mean, const QuadWeights& v) {
    if (v.size() != mean.s_grid.size()) throw DataError("kernel_k2: weight length mismatch");
    Eigen::MatrixXd K = mean.values.transpose() * v.values.asDiagonal() * mean.values;
    return (K + K.transpose()) / 2.0;
}

Eigen::MatrixXd omega_matrix(const Eigen::MatrixXd& B, const QuadWeights& w,
                             const Eigen::MatrixXd& K) {
    if (B.cols() != w.size() || K.rows() != w.size() || K.cols() != w.size())
        throw DataError("omega_matrix: dimension mismatch");
    const Eigen::MatrixXd BW = B * w.values.asDiagonal();
    Eigen::MatrixXd Omega = BW * K * BW.transpose();
    return (Omega + Omega.transpose()) / 2.0;
}

namespace {

// Deterministic orientation before sign alignment.
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

}  // namespace

EigenfunctionSet sequential_eigenfunctions(const Eigen::MatrixXd& Omega,
                                           const Eigen::MatrixXd& Gamma, int p,
                                           double rel_tol) {
    if (Omega.rows() != Gamma.rows() || Omega.cols() != Gamma.cols())
        throw DataError("sequential_eigenfunctions: dimension mismatch");
    const auto inv_sqrt = symmetric_inverse_sqrt(Gamma, rel_tol);
    if (p > inv_sqrt.rank)
        throw NumericalError("requested order exceeds the retained rank of Gamma");

    Eigen::MatrixXd W = inv_sqrt.matrix * Omega * inv_sqrt.matrix;
    W = (W + W.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
    if (es.info() != Eigen::Success)
        throw NumericalError("sequential_eigenfunctions: eigendecomposition failed");

    const Eigen::Index q = W.rows();
    EigenfunctionSet out;
    out.coefficients.resize(q, p);
    out.eigenvalues.resize(p);
    for (int k = 0; k < p; ++k) {
        out.eigenvalues[k] = es.eigenvalues()[q - 1 - k];
        Eigen::VectorXd b = inv_sqrt.matrix * es.eigenvectors().col(q - 1 - k);
        orient_first_nonzero_positive(b);
        out.coefficients.col(k) = b;
    }
    return out;
}

double root_eigenvalue(const Eigen::VectorXd& phi_vals, const Eigen::VectorXd& psi_vals,
                       const MeanSurface& mean, const QuadWeights& v, const QuadWeights& u) {
    if (phi_vals.size() != mean.values.rows() || psi_vals.size() != mean.values.cols() ||
        v.size() != phi_vals.size() || u.size() != psi_vals.size())
        throw DataError("root_eigenvalue: dimension mismatch");
    return (phi_vals.cwiseProduct(v.values)).dot(mean.values * u.values.cwiseProduct(psi_vals));
}

ComponentPair align_signs(ComponentPair pair, const MeanSurface& mean, const QuadWeights& v,
                          const QuadWeights& u) {
    const Eigen::VectorXd phi = pair.phiValues(mean.s_grid);
    const Eigen::VectorXd psi = pair.psiValues(mean.t_grid);
    const double form = root_eigenvalue(phi, psi, mean, v, u);
    if (form < 0.0) {
        pair.psi_coef = -pair.psi_coef;
        pair.root_eigenvalue = -form;
    } else {
        pair.root_eigenvalue = form;
    }
    return pair;
}

MeanSurface Decomposition::truncated_mean(int p, const Grid& eval_s, const Grid& eval_t) const {
    if (p < 0 || p > size()) throw DataError("truncated_mean: order out of range");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(eval_s.size(), eval_t.size());
    for (int k = 0; k < p; ++k) {
        const auto& c = components[k];
        out.noalias() +=
            c.root_eigenvalue * c.phiValues(eval_s) * c.psiValues(eval_t).transpose();
    }
    return {eval_s, eval_t, std::move(out)};
}

MeanSurface Decomposition::individual_predictor(Eigen::Index i, int p, const Grid& eval_s,
                                                const Grid& eval_t) const {
    if (i < 0 || i >= scores.rows()) throw DataError("individual_predictor: subject out of range");
    if (p < 0 || p > size()) throw DataError("individual_predictor: order out of range");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(eval_s.size(), eval_t.size());
    for (int k = 0; k < p; ++k) {
        const auto& c = components[k];
        out.noalias() += scores(i, k) * c.phiValues(eval_s) * c.psiValues(eval_t).transpose();
    }
    return {eval_s, eval_t, std::move(out)};
}

Eigen::MatrixXd scores(const Decomposition& decomp, const DataTensor& data) {
    if (!(decomp.s_grid == data.s_grid) || !(decomp.t_grid == data.t_grid))
        throw DataError("scores: grids do not match the decomposition");
    const QuadWeights v = trapezoid_weights(data.s_grid);
    const QuadWeights u = trapezoid_weights(data.t_grid);
    const int p = decomp.size();
    Eigen::MatrixXd w(data.subjects(), p);
    for (int k = 0; k < p; ++k) {
        const Eigen::VectorXd phi_v =
            decomp.components[k].phiValues(data.s_grid).cwiseProduct(v.values);
        const Eigen::VectorXd psi_u =
            decomp.components[k].psiValues(data.t_grid).cwiseProduct(u.values);
        for (Eigen::Index i = 0; i < data.subjects(); ++i)
            w(i, k) = phi_v.dot(data.surfaces[i] * psi_u);
    }
    return w;
}

SplineBasis saturated_basis(const Grid& grid) {
    std::vector<double> interior(grid.points().data() + 1,
                                 grid.points().data() + grid.size() - 1);
    return SplineBasis(2, grid.front(), grid.back(), std::move(interior));
}

namespace {

// Sequential free-knot (or fixed-budget) fits for one axis; returns the
// basis/coefficient pairs plus the grid values used for orthogonality.
std::vector<ComponentFit> fit_axis(const Eigen::MatrixXd& K, const Grid& grid,
                                   const QuadWeights& w, int p, const FitOptions& options,
                                   const std::vector<int>& budgets) {
    KnotSearchConfig cfg = options.knot_search;
    if (!cfg.candidate_grid) cfg.candidate_grid = grid;
    std::vector<ComponentFit> fits;
    Eigen::MatrixXd prior(grid.size(), 0);
    for (int k = 0; k < p; ++k) {
        KnotSearchConfig cfg_k = cfg;
        if (options.mode == FitOptions::Mode::FixedBudgets) {
            if (k >= static_cast<int>(budgets.size()))
                throw DataError("fixed-budget fit: missing knot budget for a component");
            cfg_k.max_knots = budgets[k];
        }
        ComponentFit fit = fit_component_freeknot(K, grid, w, prior, cfg_k, options.order);
        prior.conservativeResize(Eigen::NoChange, k + 1);
        prior.col(k) = fit.basis.evaluate(grid).transpose() * fit.coef;
        fits.push_back(std::move(fit));
    }
    return fits;
}

}  // namespace

Decomposition fit_decomposition(const DataTensor& data, const FitOptions& options) {
    const int p = options.num_components;
    if (p < 1) throw DataError("fit requires at least one component");

    MeanSurface mean = cross_sectional_mean(data);
    const QuadWeights v = trapezoid_weights(data.s_grid);
    const QuadWeights u = trapezoid_weights(data.t_grid);
    const Eigen::MatrixXd K1 = kernel_k1(mean, u);
    const Eigen::MatrixXd K2 = kernel_k2(mean, v);

    std::vector<ComponentPair> components;
    if (options.mode == FitOptions::Mode::Saturated) {
        const SplineBasis s_basis = saturated_basis(data.s_grid);
        const SplineBasis t_basis = saturated_basis(data.t_grid);
        const Eigen::MatrixXd Bs = s_basis.evaluate(data.s_grid);
        const Eigen::MatrixXd Bt = t_basis.evaluate(data.t_grid);
        const EigenfunctionSet phi =
            sequential_eigenfunctions(omega_matrix(Bs, v, K1), gram_matrix(Bs, v), p);
        const EigenfunctionSet psi =
            sequential_eigenfunctions(omega_matrix(Bt, u, K2), gram_matrix(Bt, u), p);
        for (int k = 0; k < p; ++k)
            components.push_back({s_basis, phi.coefficients.col(k), t_basis,
                                  psi.coefficients.col(k), 0.0, phi.eigenvalues[k]});
    } else {
        const auto phi = fit_axis(K1, data.s_grid, v, p, options, options.phi_budgets);
        const auto psi = fit_axis(K2, data.t_grid, u, p, options, options.psi_budgets);
        for (int k = 0; k < p; ++k)
            components.push_back({phi[k].basis, phi[k].coef, psi[k].basis, psi[k].coef, 0.0,
                                  phi[k].eigenvalue});
    }

    for (auto& c : components) c = align_signs(std::move(c), mean, v, u);

    Decomposition decomp{data.s_grid, data.t_grid, std::move(mean), std::move(components), {}};
    decomp.scores = scores(decomp, data);
    return decomp;
}

int cross_validate_order(const DataTensor& data, int max_p, int folds, std::uint64_t seed,
                         const FitOptions& options) {
    if (max_p < 1) throw DataError("cross_validate_order: max_p must be >= 1");
    if (folds < 2) throw DataError("cross_validate_order: folds must be >= 2");
    const Eigen::Index n = data.subjects();
    if (n < folds) throw DataError("cross_validate_order: fewer subjects than folds");

    std::vector<Eigen::Index> perm(n);
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    const QuadWeights v = trapezoid_weights(data.s_grid);
    const QuadWeights u = trapezoid_weights(data.t_grid);

    FitOptions train_options = options;
    train_options.num_components = max_p;

    Eigen::VectorXd totals = Eigen::VectorXd::Zero(max_p + 1);
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::MatrixXd> train;
        std::vector<Eigen::Index> held;
        for (Eigen::Index idx = 0; idx < n; ++idx) {
            if (static_cast<int>(idx) % folds == f)
                held.push_back(perm[idx]);
            else
                train.push_back(data.surfaces[perm[idx]]);
        }
        const DataTensor train_data(data.s_grid, data.t_grid, std::move(train));
        const Decomposition decomp = fit_decomposition(train_data, train_options);

        for (const Eigen::Index i : held) {
            Eigen::MatrixXd residual = data.surfaces[i];
            totals[0] +=
                (v.values.asDiagonal() * residual.cwiseAbs2() * u.values.asDiagonal()).sum();
            for (int k = 0; k < max_p; ++k) {
                const auto& c = decomp.components[k];
                const Eigen::VectorXd phi = c.phiValues(data.s_grid);
                const Eigen::VectorXd psi = c.psiValues(data.t_grid);
                const double w_ik =
                    phi.cwiseProduct(v.values).dot(data.surfaces[i] * u.values.cwiseProduct(psi));
                residual.noalias() -= w_ik * phi * psi.transpose();
                totals[k + 1] +=
                    (v.values.asDiagonal() * residual.cwiseAbs2() * u.values.asDiagonal()).sum();
            }
        }
    }

    // Ties resolve to the smallest order; the margin is scaled by the raw
    // energy of the held-out data so that machine-zero residuals tie cleanly.
    const double margin = 1e-9 * std::max(totals[0], 1e-300);
    int best = 1;
    for (int p = 2; p <= max_p; ++p)
        if (totals[p] < totals[best] - margin) best = p;
    return best;
}

}  // namespace fsvd
