#include <cstdio>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fsvd/io.hpp"
#include "fsvd/simulation.hpp"

namespace {

struct CliOverrides {
    std::optional<std::string> input, transform, p, out, protocols, mean;
    std::optional<int> order, max_knots, folds, m, n, replicates;
    std::optional<double> sigma;
    std::optional<std::uint64_t> seed;
    std::string config_path;
};

void add_common_flags(CLI::App* cmd, CliOverrides& ov) {
    cmd->add_option("--input", ov.input, "Input dataset (long CSV or .json manifest)");
    cmd->add_option("--config", ov.config_path, "key=value configuration file");
    cmd->add_option("--out", ov.out, "Output directory");
    cmd->add_option("--p", ov.p, "Number of components, or 'cv'");
    cmd->add_option("--order", ov.order, "Spline order (4 = cubic)");
    cmd->add_option("--max-knots", ov.max_knots, "Knot budget for the free-knot search");
    cmd->add_option("--transform", ov.transform, "Input transform: none or log");
    cmd->add_option("--seed", ov.seed, "Random seed");
    cmd->add_option("--replicates", ov.replicates, "Monte Carlo replicates");
    cmd->add_option("--protocols", ov.protocols, "Comma-separated protocols (TPS,SVf,SVo)");
}

fsvd::RunConfig resolve_config(const CliOverrides& ov) {
    fsvd::RunConfig cfg;
    if (!ov.config_path.empty()) cfg = fsvd::load_run_config(ov.config_path);
    if (ov.input) cfg.input = *ov.input;
    if (ov.transform) cfg.transform = *ov.transform;
    if (ov.p) cfg.p = *ov.p;
    if (ov.out) cfg.out = *ov.out;
    if (ov.order) cfg.order = *ov.order;
    if (ov.max_knots) cfg.max_knots = *ov.max_knots;
    if (ov.folds) cfg.folds = *ov.folds;
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.mean) cfg.mean = *ov.mean;
    if (ov.sigma) cfg.sigma = *ov.sigma;
    if (ov.m) cfg.m = *ov.m;
    if (ov.n) cfg.n = *ov.n;
    if (ov.replicates) cfg.replicates = *ov.replicates;
    if (ov.protocols) cfg.protocols = *ov.protocols;
    cfg.validate();
    return cfg;
}

int run_fit(const fsvd::RunConfig& cfg) {
    if (cfg.input.empty()) throw CLI::ValidationError("fit requires --input");
    fsvd::Dataset dataset = fsvd::read_dataset(cfg.input);
    fsvd::apply_transform(dataset, cfg.transform);

    fsvd::FitOptions options;
    options.order = cfg.order;
    options.knot_search.max_knots = cfg.max_knots;

    int p;
    if (cfg.p == "cv") {
        const int max_p = 5;
        p = fsvd::cross_validate_order(dataset.tensor, max_p, cfg.folds, cfg.seed, options);
    } else {
        p = std::stoi(cfg.p);
    }
    options.num_components = p;

    const fsvd::Decomposition decomp = fsvd::fit_decomposition(dataset.tensor, options);
    fsvd::write_fit_artifacts(decomp, dataset, cfg.out);
    std::printf("fit: %d components written to %s\n", p, cfg.out.c_str());
    return 0;
}

int run_predict(const fsvd::RunConfig& cfg) {
    if (cfg.input.empty()) throw CLI::ValidationError("predict requires --input <fit dir>");
    int p = -1;
    if (cfg.p != "cv") p = std::stoi(cfg.p);
    fsvd::write_predictions(cfg.input, cfg.out, p < 0 ? 2 : p);
    std::printf("predict: surfaces written to %s/predictions\n", cfg.out.c_str());
    return 0;
}

int run_scores(const fsvd::RunConfig& cfg) {
    if (cfg.input.empty()) throw CLI::ValidationError("scores requires --input <fit dir>");
    fsvd::write_scores_plotdata(cfg.input, cfg.out);
    std::printf("scores: scatter data written to %s/scores_plot.csv\n", cfg.out.c_str());
    return 0;
}

int run_simulate(const fsvd::RunConfig& cfg) {
    fsvd::SimulationConfig sim;
    sim.mean_id = (cfg.mean == "mu2") ? 2 : 1;
    sim.sigma = cfg.sigma;
    sim.m = cfg.m;
    sim.n = cfg.n;
    sim.replicates = cfg.replicates;
    sim.seed = cfg.seed;
    sim.protocols.clear();
    std::istringstream ss(cfg.protocols);
    std::string token;
    while (std::getline(ss, token, ','))
        if (!token.empty()) sim.protocols.push_back(fsvd::protocol_from_name(token));

    const fsvd::SimulationResult result = fsvd::run_study(sim);

    std::vector<fsvd::StudyTableRow> rows;
    std::vector<std::tuple<std::string, int, double>> raw;
    for (const fsvd::Protocol p : sim.protocols) {
        const auto& errs = result.errors.at(p);
        rows.push_back({cfg.mean, sim.sigma, sim.m, sim.n, fsvd::protocol_name(p),
                        result.summary(p), static_cast<int>(errs.size())});
        for (std::size_t rep = 0; rep < errs.size(); ++rep)
            raw.emplace_back(fsvd::protocol_name(p), static_cast<int>(rep), errs[rep]);
    }
    fsvd::write_study_tables(rows, raw, cfg.out);

    for (const auto& r : rows)
        std::printf("%s sigma=%g m=%d n=%d %s root_mise=%.4f\n", r.mean.c_str(), r.sigma, r.m,
                    r.n, r.protocol.c_str(), r.root_mise);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Functional singular value decomposition of bivariate samples"};
    app.require_subcommand(1);

    CliOverrides ov;
    CLI::App* fit = app.add_subcommand("fit", "Fit the decomposition to a dataset");
    CLI::App* predict = app.add_subcommand("predict", "Per-subject reconstructions from a fit");
    CLI::App* simulate = app.add_subcommand("simulate", "Run a Monte Carlo study cell");
    CLI::App* scores = app.add_subcommand("scores", "Score scatter data with outlier flags");
    for (CLI::App* cmd : {fit, predict, simulate, scores}) add_common_flags(cmd, ov);
    simulate->add_option("--mean", ov.mean, "True mean: mu1 or mu2");
    simulate->add_option("--sigma", ov.sigma, "Noise standard deviation");
    simulate->add_option("--m", ov.m, "Grid size (both axes)");
    simulate->add_option("--n", ov.n, "Sample size");
    fit->add_option("--folds", ov.folds, "Cross-validation folds when --p cv");

    try {
        app.parse(argc, argv);
        const fsvd::RunConfig cfg = resolve_config(ov);
        if (fit->parsed()) return run_fit(cfg);
        if (predict->parsed()) return run_predict(cfg);
        if (simulate->parsed()) return run_simulate(cfg);
        if (scores->parsed()) return run_scores(cfg);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const CLI::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const fsvd::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const fsvd::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
