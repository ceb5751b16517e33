#include "fsvd/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>

namespace fsvd {

std::string protocol_name(Protocol p) {
    switch (p) {
        case Protocol::TPS: return "TPS";
        case Protocol::SVf: return "SVf";
        case Protocol::SVo: return "SVo";
    }
    return "?";
}

Protocol protocol_from_name(const std::string& name) {
    if (name == "TPS") return Protocol::TPS;
    if (name == "SVf") return Protocol::SVf;
    if (name == "SVo") return Protocol::SVo;
    throw DataError("unknown protocol: " + name);
}

void SimulationConfig::validate() const {
    if (mean_id != 1 && mean_id != 2) throw DataError("mean must be mu1 or mu2");
    if (!(sigma > 0)) throw DataError("sigma must be > 0");
    if (m < 4) throw DataError("grid size must be >= 4");
    if (n < 2) throw DataError("sample size must be >= 2");
    if (replicates < 1) throw DataError("replicates must be >= 1");
    if (protocols.empty()) throw DataError("no protocols selected");
}

double true_phi(int k, double s) { return std::sqrt(2.0) * std::sin(2.0 * k * M_PI * s); }

double true_psi(int k, double t) { return std::sqrt(2.0) * std::cos(2.0 * k * M_PI * t); }

double true_root_eigenvalue(int k) {
    static const double lam[3] = {1.0, 0.5, 1.0 / 32.0};
    if (k < 1 || k > 3) throw DataError("true_root_eigenvalue: k out of range");
    return std::sqrt(lam[k - 1]);
}

double true_mean(int mean_id, double s, double t) {
    if (s < 0.0 || s > 1.0 || t < 0.0 || t > 1.0)
        throw DataError("true_mean: point outside the unit square");
    const int rank = (mean_id == 1) ? 2 : (mean_id == 2) ? 3 : throw DataError("bad mean id");
    double out = 0.0;
    for (int k = 1; k <= rank; ++k)
        out += true_root_eigenvalue(k) * true_phi(k, s) * true_psi(k, t);
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Box-Muller on top of mt19937_64 so draws are identical across platforms.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : eng_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform(), u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        spare_ = radius * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return radius * std::cos(2.0 * M_PI * u2);
    }

private:
    double uniform() { return ((eng_() >> 11) + 1.0) * 0x1.0p-53; }  // (0, 1]

    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace

DataTensor generate_dataset(const SimulationConfig& config, int replicate) {
    config.validate();
    const Grid s_grid = Grid::equispaced(0.0, 1.0, config.m);
    const Grid t_grid = Grid::equispaced(0.0, 1.0, config.m);

    Eigen::MatrixXd mu(config.m, config.m);
    for (int j = 0; j < config.m; ++j)
        for (int k = 0; k < config.m; ++k)
            mu(j, k) = true_mean(config.mean_id, s_grid[j], t_grid[k]);

    NormalSampler normal(splitmix64(config.seed ^ splitmix64(static_cast<std::uint64_t>(replicate))));
    std::vector<Eigen::MatrixXd> surfaces;
    surfaces.reserve(config.n);
    for (int i = 0; i < config.n; ++i) {
        Eigen::MatrixXd x = mu;
        for (int j = 0; j < config.m; ++j)
            for (int k = 0; k < config.m; ++k) x(j, k) += config.sigma * normal();
        surfaces.push_back(std::move(x));
    }
    return DataTensor(s_grid, t_grid, std::move(surfaces));
}

double root_ise(const std::function<double(double, double)>& estimate,
                const std::function<double(double, double)>& truth, const Grid& eval_s,
                const Grid& eval_t) {
    const QuadWeights wv = trapezoid_weights(eval_s);
    const QuadWeights wu = trapezoid_weights(eval_t);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < eval_s.size(); ++i)
        for (Eigen::Index j = 0; j < eval_t.size(); ++j) {
            const double d = estimate(eval_s[i], eval_t[j]) - truth(eval_s[i], eval_t[j]);
            acc += wv.values[i] * wu.values[j] * d * d;
        }
    return std::sqrt(acc);
}

double root_ise(const std::function<double(double, double)>& estimate,
                const std::function<double(double, double)>& truth) {
    return root_ise(estimate, truth, Grid::equispaced(0.0, 1.0, 101),
                    Grid::equispaced(0.0, 1.0, 101));
}

namespace {

double matrix_root_ise(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth,
                       const QuadWeights& wv, const QuadWeights& wu) {
    const Eigen::MatrixXd diff = est - truth;
    return std::sqrt(
        (wv.values.asDiagonal() * diff.cwiseAbs2() * wu.values.asDiagonal()).sum());
}

// Oracle-knot fit of one axis component: run the full greedy path and pick
// the prefix closest (up to sign) to the true eigenfunction. Closeness is
// integrated on a fine grid, since splines with many knots can oscillate
// between the data points without the data-grid norm noticing.
ComponentFit oracle_component_fit(const Eigen::MatrixXd& K, const Grid& grid,
                                  const QuadWeights& w, const Eigen::MatrixXd& prior,
                                  const std::function<double(double)>& truth,
                                  const KnotSearchConfig& config) {
    GreedyPath path = greedy_component_path(K, grid, w, prior, 4, config, false);

    const Grid fine = Grid::equispaced(grid.front(), grid.back(), 101);
    const QuadWeights wf = trapezoid_weights(fine);
    Eigen::VectorXd truth_fine(fine.size());
    for (Eigen::Index j = 0; j < fine.size(); ++j) truth_fine[j] = truth(fine[j]);

    std::size_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < path.size(); ++j) {
        const Eigen::VectorXd vals = path[j].basis.evaluate(fine).transpose() * path[j].coef;
        const Eigen::VectorXd dm = vals - truth_fine, dp = vals + truth_fine;
        const double err = std::min(discrete_inner_product(dm, dm, wf),
                                    discrete_inner_product(dp, dp, wf));
        if (err < best_err * (1.0 - 1e-12)) {
            best_err = err;
            best = j;
        }
    }
    return std::move(path[best]);
}

Decomposition fit_svo(const DataTensor& data, const KnotSearchConfig& config) {
    MeanSurface mean = cross_sectional_mean(data);
    const QuadWeights v = trapezoid_weights(data.s_grid);
    const QuadWeights u = trapezoid_weights(data.t_grid);
    const Eigen::MatrixXd K1 = kernel_k1(mean, u);
    const Eigen::MatrixXd K2 = kernel_k2(mean, v);

    std::vector<ComponentFit> phi, psi;
    Eigen::MatrixXd prior_phi(data.s_grid.size(), 0), prior_psi(data.t_grid.size(), 0);
    for (int k = 1; k <= 2; ++k) {
        const auto phi_truth = [k](double s) { return true_phi(k, s); };
        const auto psi_truth = [k](double t) { return true_psi(k, t); };

        phi.push_back(oracle_component_fit(K1, data.s_grid, v, prior_phi, phi_truth, config));
        psi.push_back(oracle_component_fit(K2, data.t_grid, u, prior_psi, psi_truth, config));

        prior_phi.conservativeResize(Eigen::NoChange, k);
        prior_phi.col(k - 1) = phi.back().basis.evaluate(data.s_grid).transpose() * phi.back().coef;
        prior_psi.conservativeResize(Eigen::NoChange, k);
        prior_psi.col(k - 1) = psi.back().basis.evaluate(data.t_grid).transpose() * psi.back().coef;
    }

    std::vector<ComponentPair> components;
    for (int k = 0; k < 2; ++k)
        components.push_back({phi[k].basis, phi[k].coef, psi[k].basis, psi[k].coef, 0.0,
                              phi[k].eigenvalue});
    for (auto& c : components) c = align_signs(std::move(c), mean, v, u);

    Decomposition decomp{data.s_grid, data.t_grid, std::move(mean), std::move(components), {}};
    decomp.scores = scores(decomp, data);
    return decomp;
}

}  // namespace

double SimulationResult::summary(Protocol p) const {
    const auto it = errors.find(p);
    if (it == errors.end() || it->second.empty())
        throw DataError("no results for protocol " + protocol_name(p));
    double acc = 0.0;
    for (const double e : it->second) acc += e * e;
    return std::sqrt(acc / static_cast<double>(it->second.size()));
}

SimulationResult run_study(const SimulationConfig& config) {
    config.validate();

    const Grid fine_s = Grid::equispaced(0.0, 1.0, 101);
    const Grid fine_t = Grid::equispaced(0.0, 1.0, 101);
    const QuadWeights wv = trapezoid_weights(fine_s);
    const QuadWeights wu = trapezoid_weights(fine_t);
    Eigen::MatrixXd truth_vals(fine_s.size(), fine_t.size());
    for (Eigen::Index i = 0; i < fine_s.size(); ++i)
        for (Eigen::Index j = 0; j < fine_t.size(); ++j)
            truth_vals(i, j) = true_mean(config.mean_id, fine_s[i], fine_t[j]);
    const auto truth_fn = [&](double s, double t) { return true_mean(config.mean_id, s, t); };

    const bool wants_tps =
        std::find(config.protocols.begin(), config.protocols.end(), Protocol::TPS) !=
        config.protocols.end();
    std::optional<TPSSolver> tps_solver;
    if (wants_tps)
        tps_solver.emplace(Grid::equispaced(0.0, 1.0, config.m),
                           Grid::equispaced(0.0, 1.0, config.m));

    FitOptions svf_options;
    svf_options.mode = FitOptions::Mode::FixedBudgets;
    svf_options.num_components = 2;
    const FixedKnotSchedule schedule = fixed_knot_protocol();
    svf_options.phi_budgets = schedule.phi;
    svf_options.psi_budgets = schedule.psi;

    KnotSearchConfig svo_config;  // max 10 knots, candidates = data grid

    SimulationResult result;
    result.config = config;
    for (Protocol p : config.protocols) result.errors[p] = {};

    for (int rep = 0; rep < config.replicates; ++rep) {
        try {
            const DataTensor data = generate_dataset(config, rep);
            for (Protocol p : config.protocols) {
                double err;
                switch (p) {
                    case Protocol::TPS: {
                        const auto oracle =
                            oracle_smoothing(*tps_solver, cross_sectional_mean(data), truth_fn);
                        err = matrix_root_ise(oracle.fit.evaluate(fine_s, fine_t), truth_vals,
                                              wv, wu);
                        break;
                    }
                    case Protocol::SVf: {
                        const Decomposition d = fit_decomposition(data, svf_options);
                        err = matrix_root_ise(d.truncated_mean(2, fine_s, fine_t).values,
                                              truth_vals, wv, wu);
                        break;
                    }
                    case Protocol::SVo: {
                        const Decomposition d = fit_svo(data, svo_config);
                        err = matrix_root_ise(d.truncated_mean(2, fine_s, fine_t).values,
                                              truth_vals, wv, wu);
                        break;
                    }
                }
                result.errors[p].push_back(err);
            }
        } catch (const std::exception&) {
            ++result.failures;
        }
    }

    if (result.failures * 20 > config.replicates)
        throw NumericalError("simulation study: more than 5% of replicates failed");
    return result;
}

}  // namespace fsvd
