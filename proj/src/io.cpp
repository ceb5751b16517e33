#include "fsvd/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace fs = std::filesystem;

namespace fsvd {

std::string format_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& context) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw DataError(context + ": cannot parse number '" + s + "'");
    }
    if (pos != s.size() || !std::isfinite(v))
        throw DataError(context + ": cannot parse number '" + s + "'");
    return v;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);  // LF endings everywhere
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

Dataset read_long_csv(const std::string& path) {
    std::ifstream in = open_input(path);
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != "subject,s,t,value")
        throw DataError(path + ":1: expected header 'subject,s,t,value'");

    struct Record {
        std::string subject;
        double s, t, value;
    };
    std::vector<Record> records;
    std::vector<double> s_points, t_points;
    std::vector<std::string> ids;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        const std::string context = path + ":" + std::to_string(lineno);
        if (fields.size() != 4) throw DataError(context + ": expected 4 fields");
        Record rec{fields[0], parse_double(fields[1], context), parse_double(fields[2], context),
                   parse_double(fields[3], context)};
        if (std::find(ids.begin(), ids.end(), rec.subject) == ids.end())
            ids.push_back(rec.subject);
        s_points.push_back(rec.s);
        t_points.push_back(rec.t);
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw DataError(path + ": no data rows");

    const auto unique_sorted = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    unique_sorted(s_points);
    unique_sorted(t_points);

    const Grid s_grid{Eigen::Map<Eigen::VectorXd>(s_points.data(), s_points.size())};
    const Grid t_grid{Eigen::Map<Eigen::VectorXd>(t_points.data(), t_points.size())};

    if (records.size() != ids.size() * s_points.size() * t_points.size())
        throw DataError(path + ": incomplete grid (" + std::to_string(records.size()) +
                        " rows for " + std::to_string(ids.size()) + " subjects on a " +
                        std::to_string(s_points.size()) + "x" + std::to_string(t_points.size()) +
                        " grid)");

    std::map<std::string, Eigen::Index> id_index;
    for (std::size_t i = 0; i < ids.size(); ++i) id_index[ids[i]] = static_cast<Eigen::Index>(i);
    const auto find_index = [](const std::vector<double>& v, double x) {
        return static_cast<Eigen::Index>(
            std::lower_bound(v.begin(), v.end(), x) - v.begin());
    };

    std::vector<Eigen::MatrixXd> surfaces(
        ids.size(), Eigen::MatrixXd::Constant(s_grid.size(), t_grid.size(),
                                              std::numeric_limits<double>::quiet_NaN()));
    for (const auto& rec : records) {
        auto& surface = surfaces[id_index[rec.subject]];
        auto& cell = surface(find_index(s_points, rec.s), find_index(t_points, rec.t));
        if (!std::isnan(cell))
            throw DataError(path + ": duplicate observation for subject " + rec.subject);
        cell = rec.value;
    }
    for (std::size_t i = 0; i < surfaces.size(); ++i)
        if (surfaces[i].hasNaN())
            throw DataError(path + ": subject " + ids[i] + " is missing grid cells");

    return {DataTensor(s_grid, t_grid, std::move(surfaces)), std::move(ids)};
}

namespace {

Eigen::MatrixXd read_matrix_csv(const std::string& path, const Grid& s_grid,
                                const Grid& t_grid, const std::string& subject) {
    std::ifstream in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    const auto header = split_csv_line(strip_cr(line));
    if (header.size() != static_cast<std::size_t>(t_grid.size()) + 1 || header[0] != "s")
        throw DataError(path + ": header must be 's,<t values>' for subject " + subject);
    for (Eigen::Index k = 0; k < t_grid.size(); ++k)
        if (parse_double(header[k + 1], path) != t_grid[k])
            throw DataError("subject " + subject + ": t grid in " + path +
                            " does not match the manifest");

    Eigen::MatrixXd values(s_grid.size(), t_grid.size());
    int lineno = 1;
    for (Eigen::Index j = 0; j < s_grid.size(); ++j) {
        if (!std::getline(in, line))
            throw DataError("subject " + subject + ": " + path + " has too few rows");
        ++lineno;
        const auto fields = split_csv_line(strip_cr(line));
        const std::string context = path + ":" + std::to_string(lineno);
        if (fields.size() != static_cast<std::size_t>(t_grid.size()) + 1)
            throw DataError(context + ": expected " + std::to_string(t_grid.size() + 1) +
                            " fields");
        if (parse_double(fields[0], context) != s_grid[j])
            throw DataError("subject " + subject + ": s grid in " + path +
                            " does not match the manifest");
        for (Eigen::Index k = 0; k < t_grid.size(); ++k)
            values(j, k) = parse_double(fields[k + 1], context);
    }
    return values;
}

}  // namespace

Dataset read_matrix_manifest(const std::string& path) {
    std::ifstream in = open_input(path);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const std::exception& e) {
        throw DataError(path + ": invalid JSON: " + e.what());
    }

    const auto grid_from = [&](const char* key) {
        if (!manifest.contains(key) || !manifest[key].is_array())
            throw DataError(path + ": manifest missing array '" + std::string(key) + "'");
        const auto& arr = manifest[key];
        Eigen::VectorXd pts(arr.size());
        for (std::size_t i = 0; i < arr.size(); ++i) pts[i] = arr[i].get<double>();
        return Grid(std::move(pts));
    };
    const Grid s_grid = grid_from("s_grid");
    const Grid t_grid = grid_from("t_grid");

    if (!manifest.contains("subjects") || !manifest["subjects"].is_array())
        throw DataError(path + ": manifest missing array 'subjects'");

    const fs::path base = fs::path(path).parent_path();
    std::vector<std::string> ids;
    std::vector<Eigen::MatrixXd> surfaces;
    for (const auto& entry : manifest["subjects"]) {
        const std::string id = entry.at("id").get<std::string>();
        const fs::path file = base / entry.at("path").get<std::string>();
        ids.push_back(id);
        surfaces.push_back(read_matrix_csv(file.string(), s_grid, t_grid, id));
    }
    return {DataTensor(s_grid, t_grid, std::move(surfaces)), std::move(ids)};
}

Dataset read_dataset(const std::string& path) {
    if (fs::path(path).extension() == ".json") return read_matrix_manifest(path);
    return read_long_csv(path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const std::string context = "config key '" + key + "'";
    if (key == "input") input = value;
    else if (key == "transform") transform = value;
    else if (key == "order") order = static_cast<int>(parse_double(value, context));
    else if (key == "max_knots") max_knots = static_cast<int>(parse_double(value, context));
    else if (key == "p") p = value;
    else if (key == "folds") folds = static_cast<int>(parse_double(value, context));
    else if (key == "out") out = value;
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_double(value, context));
    else if (key == "mean") mean = value;
    else if (key == "sigma") sigma = parse_double(value, context);
    else if (key == "m") m = static_cast<int>(parse_double(value, context));
    else if (key == "n") n = static_cast<int>(parse_double(value, context));
    else if (key == "replicates") replicates = static_cast<int>(parse_double(value, context));
    else if (key == "protocols") protocols = value;
    else throw DataError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
    if (transform != "none" && transform != "log")
        throw DataError("transform must be 'none' or 'log'");
    if (order < 1) throw DataError("order must be >= 1");
    if (max_knots < 0) throw DataError("max_knots must be >= 0");
    if (p != "cv") {
        const int pv = static_cast<int>(parse_double(p, "p"));
        if (pv < 1) throw DataError("p must be >= 1 or 'cv'");
    }
    if (mean != "mu1" && mean != "mu2") throw DataError("mean must be 'mu1' or 'mu2'");
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in = open_input(path);
    RunConfig config;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected key=value");
        config.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return config;
}

void apply_transform(Dataset& dataset, const std::string& transform) {
    if (transform == "none") return;
    if (transform != "log") throw DataError("unknown transform '" + transform + "'");
    std::vector<Eigen::MatrixXd> surfaces;
    surfaces.reserve(dataset.tensor.surfaces.size());
    for (std::size_t i = 0; i < dataset.tensor.surfaces.size(); ++i) {
        const auto& x = dataset.tensor.surfaces[i];
        if ((x.array() <= 0.0).any())
            throw DataError("log transform requires positive values (subject " +
                            dataset.subject_ids[i] + ")");
        surfaces.push_back(x.array().log().matrix());
    }
    dataset.tensor =
        DataTensor(dataset.tensor.s_grid, dataset.tensor.t_grid, std::move(surfaces));
}

void write_fit_artifacts(const Decomposition& decomp, const Dataset& dataset,
                         const std::string& out_dir) {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    const int p = decomp.size();

    {
        std::ofstream f = open_output(dir / "components.csv");
        f << "k,axis,point,value\n";
        for (int k = 0; k < p; ++k) {
            const Eigen::VectorXd phi = decomp.components[k].phiValues(decomp.s_grid);
            for (Eigen::Index j = 0; j < decomp.s_grid.size(); ++j)
                f << k + 1 << ",phi," << format_number(decomp.s_grid[j]) << ','
                  << format_number(phi[j]) << '\n';
            const Eigen::VectorXd psi = decomp.components[k].psiValues(decomp.t_grid);
            for (Eigen::Index j = 0; j < decomp.t_grid.size(); ++j)
                f << k + 1 << ",psi," << format_number(decomp.t_grid[j]) << ','
                  << format_number(psi[j]) << '\n';
        }
    }
    {
        std::ofstream f = open_output(dir / "eigenvalues.csv");
        f << "k,root_eigenvalue\n";
        for (int k = 0; k < p; ++k)
            f << k + 1 << ',' << format_number(decomp.components[k].root_eigenvalue) << '\n';
    }
    {
        std::ofstream f = open_output(dir / "scores.csv");
        f << "subject,k,w\n";
        for (Eigen::Index i = 0; i < decomp.scores.rows(); ++i)
            for (int k = 0; k < p; ++k)
                f << dataset.subject_ids[i] << ',' << k + 1 << ','
                  << format_number(decomp.scores(i, k)) << '\n';
    }
    {
        const MeanSurface mu_p = decomp.truncated_mean(p, decomp.s_grid, decomp.t_grid);
        std::ofstream f = open_output(dir / "mu_hat_p.csv");
        f << "s,t,value\n";
        for (Eigen::Index j = 0; j < decomp.s_grid.size(); ++j)
            for (Eigen::Index k = 0; k < decomp.t_grid.size(); ++k)
                f << format_number(decomp.s_grid[j]) << ',' << format_number(decomp.t_grid[k])
                  << ',' << format_number(mu_p.values(j, k)) << '\n';
    }
    {
        nlohmann::json knots = nlohmann::json::array();
        for (int k = 0; k < p; ++k) {
            const auto& c = decomp.components[k];
            knots.push_back({{"k", k + 1},
                             {"phi",
                              {{"order", c.phi_basis.order()},
                               {"interior_knots", c.phi_basis.interiorKnots()}}},
                             {"psi",
                              {{"order", c.psi_basis.order()},
                               {"interior_knots", c.psi_basis.interiorKnots()}}}});
        }
        std::ofstream f = open_output(dir / "knots.json");
        f << knots.dump(2) << '\n';
    }
    {
        fs::create_directories(dir / "plot_data");
        const Grid fine_s = Grid::equispaced(decomp.s_grid.front(), decomp.s_grid.back(), 201);
        const Grid fine_t = Grid::equispaced(decomp.t_grid.front(), decomp.t_grid.back(), 201);
        for (int k = 0; k < p; ++k) {
            const Eigen::VectorXd phi = decomp.components[k].phiValues(fine_s);
            std::ofstream fp = open_output(dir / "plot_data" /
                                           ("phi_" + std::to_string(k + 1) + ".csv"));
            fp << "x,value\n";
            for (Eigen::Index j = 0; j < fine_s.size(); ++j)
                fp << format_number(fine_s[j]) << ',' << format_number(phi[j]) << '\n';
            const Eigen::VectorXd psi = decomp.components[k].psiValues(fine_t);
            std::ofstream ft = open_output(dir / "plot_data" /
                                           ("psi_" + std::to_string(k + 1) + ".csv"));
            ft << "x,value\n";
            for (Eigen::Index j = 0; j < fine_t.size(); ++j)
                ft << format_number(fine_t[j]) << ',' << format_number(psi[j]) << '\n';
        }
    }
}

namespace {

struct FitArtifacts {
    std::vector<double> s_points, t_points;
    // per component: values on each axis
    std::vector<Eigen::VectorXd> phi, psi;
    std::vector<std::string> subjects;
    Eigen::MatrixXd scores;  // n x p
};

FitArtifacts read_fit_artifacts(const std::string& fit_dir) {
    const fs::path dir(fit_dir);
    FitArtifacts art;

    std::ifstream comp = open_input((dir / "components.csv").string());
    std::string line;
    std::getline(comp, line);
    std::map<int, std::vector<double>> phi_vals, psi_vals;
    while (std::getline(comp, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 4) throw DataError("components.csv: malformed row");
        const int k = static_cast<int>(parse_double(fields[0], "components.csv"));
        const double point = parse_double(fields[2], "components.csv");
        const double value = parse_double(fields[3], "components.csv");
        if (fields[1] == "phi") {
            if (k == 1) art.s_points.push_back(point);
            phi_vals[k].push_back(value);
        } else {
            if (k == 1) art.t_points.push_back(point);
            psi_vals[k].push_back(value);
        }
    }
    for (const auto& [k, vals] : phi_vals)
        art.phi.push_back(Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size()));
    for (const auto& [k, vals] : psi_vals)
        art.psi.push_back(Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size()));
    if (art.phi.empty() || art.phi.size() != art.psi.size())
        throw DataError("components.csv: inconsistent component sets");

    std::ifstream sc = open_input((dir / "scores.csv").string());
    std::getline(sc, line);
    std::vector<std::tuple<std::string, int, double>> rows;
    while (std::getline(sc, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 3) throw DataError("scores.csv: malformed row");
        rows.emplace_back(fields[0], static_cast<int>(parse_double(fields[1], "scores.csv")),
                          parse_double(fields[2], "scores.csv"));
    }
    for (const auto& [id, k, w] : rows)
        if (std::find(art.subjects.begin(), art.subjects.end(), id) == art.subjects.end())
            art.subjects.push_back(id);
    art.scores = Eigen::MatrixXd::Zero(art.subjects.size(), art.phi.size());
    for (const auto& [id, k, w] : rows) {
        const auto i = std::find(art.subjects.begin(), art.subjects.end(), id) -
                       art.subjects.begin();
        if (k < 1 || k > static_cast<int>(art.phi.size()))
            throw DataError("scores.csv: component index out of range");
        art.scores(i, k - 1) = w;
    }
    return art;
}

}  // namespace

void write_predictions(const std::string& fit_dir, const std::string& out_dir, int p) {
    const FitArtifacts art = read_fit_artifacts(fit_dir);
    if (p < 0 || p > static_cast<int>(art.phi.size()))
        throw DataError("predict: p out of range of the fitted components");

    const fs::path dir = fs::path(out_dir) / "predictions";
    fs::create_directories(dir);
    for (std::size_t i = 0; i < art.subjects.size(); ++i) {
        Eigen::MatrixXd surface =
            Eigen::MatrixXd::Zero(art.s_points.size(), art.t_points.size());
        for (int k = 0; k < p; ++k)
            surface.noalias() += art.scores(i, k) * art.phi[k] * art.psi[k].transpose();
        std::ofstream f = open_output(dir / (art.subjects[i] + ".csv"));
        f << "s,t,value\n";
        for (Eigen::Index j = 0; j < surface.rows(); ++j)
            for (Eigen::Index k = 0; k < surface.cols(); ++k)
                f << format_number(art.s_points[j]) << ',' << format_number(art.t_points[k])
                  << ',' << format_number(surface(j, k)) << '\n';
    }
}

void write_scores_plotdata(const std::string& fit_dir, const std::string& out_dir) {
    const FitArtifacts art = read_fit_artifacts(fit_dir);
    const int p = static_cast<int>(art.phi.size());
    if (p < 2) throw DataError("scores plot requires a fit with p >= 2");
    const Eigen::Index n = art.scores.rows();

    // Robust z-score per component: |w - median| / (1.4826 * MAD).
    Eigen::MatrixXd z(n, p);
    for (int k = 0; k < p; ++k) {
        std::vector<double> col(art.scores.col(k).data(), art.scores.col(k).data() + n);
        std::sort(col.begin(), col.end());
        const double med = (n % 2) ? col[n / 2] : (col[n / 2 - 1] + col[n / 2]) / 2.0;
        std::vector<double> dev(n);
        for (Eigen::Index i = 0; i < n; ++i) dev[i] = std::abs(art.scores(i, k) - med);
        std::sort(dev.begin(), dev.end());
        const double mad = (n % 2) ? dev[n / 2] : (dev[n / 2 - 1] + dev[n / 2]) / 2.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = std::abs(art.scores(i, k) - med);
            z(i, k) = (mad > 0) ? d / (1.4826 * mad)
                                : (d > 0 ? std::numeric_limits<double>::infinity() : 0.0);
        }
    }

    fs::create_directories(out_dir);
    std::ofstream f = open_output(fs::path(out_dir) / "scores_plot.csv");
    f << "subject";
    for (int k = 1; k <= p; ++k) f << ",w" << k;
    f << ",outlier\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        f << art.subjects[i];
        for (int k = 0; k < p; ++k) f << ',' << format_number(art.scores(i, k));
        f << ',' << ((z.row(i).maxCoeff() > 3.5) ? 1 : 0) << '\n';
    }
}

void write_study_tables(const std::vector<StudyTableRow>& rows,
                        const std::vector<std::tuple<std::string, int, double>>& raw_errors,
                        const std::string& out_dir) {
    fs::create_directories(out_dir);
    {
        std::ofstream f = open_output(fs::path(out_dir) / "table1.csv");
        f << "mean,sigma,m,n,protocol,root_mise,replicates\n";
        for (const auto& r : rows)
            f << r.mean << ',' << format_number(r.sigma) << ',' << r.m << ',' << r.n << ','
              << r.protocol << ',' << format_number(r.root_mise) << ',' << r.replicates << '\n';
    }
    {
        std::ofstream f = open_output(fs::path(out_dir) / "raw_errors.csv");
        f << "protocol,replicate,root_ise\n";
        for (const auto& [protocol, rep, err] : raw_errors)
            f << protocol << ',' << rep << ',' << format_number(err) << '\n';
    }
}

}  // namespace fsvd
