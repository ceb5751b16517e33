#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fsvd/core.hpp"
#include "fsvd/tps.hpp"

namespace fsvd {

enum class Protocol { TPS, SVf, SVo };

std::string protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

// One cell of the Monte Carlo factor grid.
struct SimulationConfig {
    int mean_id = 1;  // 1 -> mu_1 (rank 2), 2 -> mu_2 (rank 3)
    double sigma = 1.0;
    int m = 20;  // grid size on both axes
    int n = 10;
    int replicates = 200;
    std::uint64_t seed = 0;
    std::vector<Protocol> protocols = {Protocol::TPS, Protocol::SVf, Protocol::SVo};

    void validate() const;
};

// phi_k(s) = sqrt(2) sin(2 k pi s), psi_k(t) = sqrt(2) cos(2 k pi t),
// lambda = (1, 1/2, 1/32).
double true_phi(int k, double s);
double true_psi(int k, double t);
double true_root_eigenvalue(int k);
double true_mean(int mean_id, double s, double t);

// x_ijk = mu(s_j, t_k) + N(0, sigma^2) noise; reproducible from
// (config.seed, replicate) with a self-contained Box-Muller sampler.
DataTensor generate_dataset(const SimulationConfig& config, int replicate);

// sqrt of the trapezoid-rule double integral of (estimate - truth)^2.
double root_ise(const std::function<double(double, double)>& estimate,
                const std::function<double(double, double)>& truth, const Grid& eval_s,
                const Grid& eval_t);
double root_ise(const std::function<double(double, double)>& estimate,
                const std::function<double(double, double)>& truth);

struct SimulationResult {
    SimulationConfig config;
    std::map<Protocol, std::vector<double>> errors;  // per-replicate root-ISE
    int failures = 0;

    // Root mean integrated squared error, sqrt(mean of squared errors).
    double summary(Protocol p) const;
};

SimulationResult run_study(const SimulationConfig& config);

}  // namespace fsvd
