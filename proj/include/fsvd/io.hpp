#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "fsvd/core.hpp"

namespace fsvd {

struct Dataset {
    DataTensor tensor;
    std::vector<std::string> subject_ids;
};

// Long form: CSV with header `subject,s,t,value`, one row per observation,
// complete product grid required.
Dataset read_long_csv(const std::string& path);

// Matrix form: JSON manifest with the two grid vectors and one matrix CSV
// per subject (rows = s grid, columns = t grid).
Dataset read_matrix_manifest(const std::string& path);

// Dispatch on extension: .json -> manifest, otherwise long CSV.
Dataset read_dataset(const std::string& path);

// Validated run configuration; file keys and CLI flags share these fields.
struct RunConfig {
    std::string input;
    std::string transform = "none";  // none | log
    int order = 4;
    int max_knots = 10;
    std::string p = "2";  // component count, or "cv"
    int folds = 5;        // cross-validation folds when p = cv
    std::string out = "fsvd_out";
    std::uint64_t seed = 0;

    // simulation factors
    std::string mean = "mu1";
    double sigma = 1.0;
    int m = 20;
    int n = 10;
    int replicates = 200;
    std::string protocols = "TPS,SVf,SVo";

    void set(const std::string& key, const std::string& value);  // rejects unknown keys
    void validate() const;
};

RunConfig load_run_config(const std::string& path);

// All numeric output uses 12 significant digits.
std::string format_number(double x);

void apply_transform(Dataset& dataset, const std::string& transform);

// components.csv, eigenvalues.csv, scores.csv, mu_hat_p.csv, knots.json and
// plot_data/ series for each fitted component pair.
void write_fit_artifacts(const Decomposition& decomp, const Dataset& dataset,
                         const std::string& out_dir);

// Reads fit artifacts from `fit_dir` and writes one dense surface CSV per
// subject under out_dir/predictions/.
void write_predictions(const std::string& fit_dir, const std::string& out_dir, int p);

// Reads scores.csv from `fit_dir` and writes scores_plot.csv with robust
// z-score outlier flags (heuristic: any component beyond 3.5 robust z).
void write_scores_plotdata(const std::string& fit_dir, const std::string& out_dir);

struct StudyTableRow {
    std::string mean;
    double sigma;
    int m;
    int n;
    std::string protocol;
    double root_mise;
    int replicates;
};

void write_study_tables(const std::vector<StudyTableRow>& rows,
                        const std::vector<std::tuple<std::string, int, double>>& raw_errors,
                        const std::string& out_dir);

}  // namespace fsvd
