#pragma once

#include <vector>

#include <Eigen/Core>

#include "fsvd/bspline.hpp"
#include "fsvd/freeknot.hpp"
#include "fsvd/grid.hpp"

namespace fsvd {

// Raw observations x_{ijk} on a complete product grid: n surfaces of size
// m x r (rows follow s_grid, columns follow t_grid). Missing values are
// rejected, not imputed.
struct DataTensor {
    Grid s_grid;
    Grid t_grid;
    std::vector<Eigen::MatrixXd> surfaces;

    DataTensor(Grid s, Grid t, std::vector<Eigen::MatrixXd> surf);
    Eigen::Index subjects() const { return static_cast<Eigen::Index>(surfaces.size()); }
};

struct MeanSurface {
    Grid s_grid;
    Grid t_grid;
    Eigen::MatrixXd values;  // m x r
};

// One (phi_k, psi_k, lambda_k^{1/2}) triple as spline coefficients.
struct ComponentPair {
    SplineBasis phi_basis;
    Eigen::VectorXd phi_coef;
    SplineBasis psi_basis;
    Eigen::VectorXd psi_coef;
    double root_eigenvalue = 0.0;  // sign-aligned bilinear form
    double phi_eigenvalue = 0.0;   // ordering eigenvalue from the phi-side problem

    Eigen::VectorXd phiValues(const Grid& g) const;
    Eigen::VectorXd psiValues(const Grid& g) const;
};

struct Decomposition {
    Grid s_grid;
    Grid t_grid;
    MeanSurface mean;
    std::vector<ComponentPair> components;
    Eigen::MatrixXd scores;  // n x p

    int size() const { return static_cast<int>(components.size()); }

    // mu_hat^(p) evaluated on arbitrary grids within range.
    MeanSurface truncated_mean(int p, const Grid& eval_s, const Grid& eval_t) const;

    // X_hat_i^(p) for subject i.
    MeanSurface individual_predictor(Eigen::Index i, int p, const Grid& eval_s,
                                     const Grid& eval_t) const;
};

MeanSurface cross_sectional_mean(const DataTensor& data);

// k1(s_j, s_j') = sum_k u_k mu(s_j, t_k) mu(s_j', t_k); m x m, symmetric PSD.
Eigen::MatrixXd kernel_k1(const MeanSurface& mean, const QuadWeights& u);

// k2(t_k, t_k') = sum_j v_j mu(s_j, t_k) mu(s_j, t_k'); r x r.
Eigen::MatrixXd kernel_k2(const MeanSurface& mean, const QuadWeights& v);

// Omega = B W K W B^T with B the q x m basis matrix.
Eigen::MatrixXd omega_matrix(const Eigen::MatrixXd& B, const QuadWeights& w,
                             const Eigen::MatrixXd& K);

struct EigenfunctionSet {
    Eigen::MatrixXd coefficients;  // q x p, Gamma-orthonormal columns
    Eigen::VectorXd eigenvalues;   // nonincreasing
};

// b_k = Gamma^{-1/2} c_k with c_k the kth unit-norm eigenvector of the
// whitened matrix Gamma^{-1/2} Omega Gamma^{-1/2}.
EigenfunctionSet sequential_eigenfunctions(const Eigen::MatrixXd& Omega,
                                           const Eigen::MatrixXd& Gamma, int p,
                                           double rel_tol = 1e-10);

// phi(s)^T V Xbar U psi(t); the signed bilinear form behind lambda_k^{1/2}.
double root_eigenvalue(const Eigen::VectorXd& phi_vals, const Eigen::VectorXd& psi_vals,
                       const MeanSurface& mean, const QuadWeights& v, const QuadWeights& u);

// Flips psi so that the bilinear form is nonnegative and stores it as the
// component's root eigenvalue. A zero form keeps the orientation.
ComponentPair align_signs(ComponentPair pair, const MeanSurface& mean, const QuadWeights& v,
                          const QuadWeights& u);

// w_{ik} = phi_k(s)^T V X_i U psi_k(t); column means equal lambda_k^{1/2}.
Eigen::MatrixXd scores(const Decomposition& decomp, const DataTensor& data);

struct FitOptions {
    enum class Mode { FreeKnot, FixedBudgets, Saturated };

    int order = 4;
    int num_components = 2;
    Mode mode = Mode::FreeKnot;
    KnotSearchConfig knot_search;
    std::vector<int> phi_budgets;  // FixedBudgets: per-component knot caps
    std::vector<int> psi_budgets;
};

// Full pipeline: mean, kernels, sequential component fits, sign alignment,
// scores.
Decomposition fit_decomposition(const DataTensor& data, const FitOptions& options);

// Leave-subjects-out cross-validation of the truncation order. Fold
// assignment is a seeded permutation; ties resolve to the smallest p.
int cross_validate_order(const DataTensor& data, int max_p, int folds, std::uint64_t seed,
                         const FitOptions& options);

// Order-2 basis with interior knots at the interior grid points: hat
// functions with B = I, which makes the fit coincide with a weighted SVD.
SplineBasis saturated_basis(const Grid& grid);

}  // namespace fsvd
