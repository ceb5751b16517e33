#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fsvd/core.hpp"
#include "fsvd/simulation.hpp"
#include "fsvd/tps.hpp"

namespace py = pybind11;

namespace {

fsvd::Grid make_grid(const Eigen::VectorXd& points) { return fsvd::Grid(points); }

fsvd::DataTensor tensor_from_array(const py::array_t<double>& data,
                                   const Eigen::VectorXd& s_points,
                                   const Eigen::VectorXd& t_points) {
    if (data.ndim() != 3) throw fsvd::DataError("data must have shape (n, m, r)");
    const auto n = data.shape(0), m = data.shape(1), r = data.shape(2);
    const auto view = data.unchecked<3>();
    std::vector<Eigen::MatrixXd> surfaces;
    surfaces.reserve(n);
    for (py::ssize_t i = 0; i < n; ++i) {
        Eigen::MatrixXd x(m, r);
        for (py::ssize_t j = 0; j < m; ++j)
            for (py::ssize_t k = 0; k < r; ++k) x(j, k) = view(i, j, k);
        surfaces.push_back(std::move(x));
    }
    return fsvd::DataTensor(make_grid(s_points), make_grid(t_points), std::move(surfaces));
}

fsvd::Decomposition fit_array(const py::array_t<double>& data, const Eigen::VectorXd& s_points,
                              const Eigen::VectorXd& t_points, int p, int order,
                              const std::string& mode, int max_knots,
                              const std::vector<int>& phi_budgets,
                              const std::vector<int>& psi_budgets) {
    fsvd::FitOptions options;
    options.num_components = p;
    options.order = order;
    options.knot_search.max_knots = max_knots;
    if (mode == "free") {
        options.mode = fsvd::FitOptions::Mode::FreeKnot;
    } else if (mode == "fixed") {
        options.mode = fsvd::FitOptions::Mode::FixedBudgets;
        options.phi_budgets = phi_budgets;
        options.psi_budgets = psi_budgets;
    } else if (mode == "saturated") {
        options.mode = fsvd::FitOptions::Mode::Saturated;
    } else {
        throw fsvd::DataError("mode must be 'free', 'fixed' or 'saturated'");
    }
    return fsvd::fit_decomposition(tensor_from_array(data, s_points, t_points), options);
}

}  // namespace

PYBIND11_MODULE(_fsvd, m) {
    m.doc() = "Functional singular value decomposition of bivariate samples";

    py::register_exception<fsvd::DataError>(m, "DataError");
    py::register_exception<fsvd::NumericalError>(m, "NumericalError");

    m.def(
        "trapezoid_weights",
        [](const Eigen::VectorXd& points) {
            return fsvd::trapezoid_weights(make_grid(points)).values;
        },
        py::arg("points"));

    py::class_<fsvd::SplineBasis>(m, "SplineBasis")
        .def(py::init<int, double, double, std::vector<double>>(), py::arg("order"),
             py::arg("a"), py::arg("b"), py::arg("interior_knots") = std::vector<double>{})
        .def_property_readonly("dimension", &fsvd::SplineBasis::dimension)
        .def_property_readonly("order", &fsvd::SplineBasis::order)
        .def_property_readonly("interior_knots", &fsvd::SplineBasis::interiorKnots)
        .def(
            "evaluate",
            [](const fsvd::SplineBasis& basis, const Eigen::VectorXd& points, int deriv) {
                return basis.evaluate(make_grid(points), deriv);
            },
            py::arg("points"), py::arg("deriv") = 0);

    py::class_<fsvd::Decomposition>(m, "Decomposition")
        .def_property_readonly("num_components", &fsvd::Decomposition::size)
        .def_property_readonly("scores",
                               [](const fsvd::Decomposition& d) { return d.scores; })
        .def_property_readonly("root_eigenvalues",
                               [](const fsvd::Decomposition& d) {
                                   Eigen::VectorXd out(d.size());
                                   for (int k = 0; k < d.size(); ++k)
                                       out[k] = d.components[k].root_eigenvalue;
                                   return out;
                               })
        .def(
            "phi_values",
            [](const fsvd::Decomposition& d, int k, const Eigen::VectorXd& points) {
                return d.components.at(k).phiValues(make_grid(points));
            },
            py::arg("k"), py::arg("points"))
        .def(
            "psi_values",
            [](const fsvd::Decomposition& d, int k, const Eigen::VectorXd& points) {
                return d.components.at(k).psiValues(make_grid(points));
            },
            py::arg("k"), py::arg("points"))
        .def(
            "truncated_mean",
            [](const fsvd::Decomposition& d, int p, const Eigen::VectorXd& s,
               const Eigen::VectorXd& t) {
                return d.truncated_mean(p, make_grid(s), make_grid(t)).values;
            },
            py::arg("p"), py::arg("s_points"), py::arg("t_points"))
        .def(
            "individual_predictor",
            [](const fsvd::Decomposition& d, int i, int p, const Eigen::VectorXd& s,
               const Eigen::VectorXd& t) {
                return d.individual_predictor(i, p, make_grid(s), make_grid(t)).values;
            },
            py::arg("i"), py::arg("p"), py::arg("s_points"), py::arg("t_points"));

    m.def("fit", &fit_array, py::arg("data"), py::arg("s_points"), py::arg("t_points"),
          py::arg("p") = 2, py::arg("order") = 4, py::arg("mode") = "free",
          py::arg("max_knots") = 10, py::arg("phi_budgets") = std::vector<int>{},
          py::arg("psi_budgets") = std::vector<int>{});

    m.def("true_mean", &fsvd::true_mean, py::arg("mean_id"), py::arg("s"), py::arg("t"));

    m.def(
        "run_study",
        [](int mean_id, double sigma, int m_pts, int n, int replicates, std::uint64_t seed,
           const std::vector<std::string>& protocols) {
            fsvd::SimulationConfig config;
            config.mean_id = mean_id;
            config.sigma = sigma;
            config.m = m_pts;
            config.n = n;
            config.replicates = replicates;
            config.seed = seed;
            config.protocols.clear();
            for (const auto& name : protocols)
                config.protocols.push_back(fsvd::protocol_from_name(name));
            const fsvd::SimulationResult result = fsvd::run_study(config);
            py::dict out;
            for (const auto& [protocol, errors] : result.errors) {
                py::dict cell;
                cell["errors"] = errors;
                cell["root_mise"] = result.summary(protocol);
                out[fsvd::protocol_name(protocol).c_str()] = cell;
            }
            return out;
        },
        py::arg("mean_id"), py::arg("sigma"), py::arg("m"), py::arg("n"),
        py::arg("replicates"), py::arg("seed") = 0,
        py::arg("protocols") = std::vector<std::string>{"TPS", "SVf", "SVo"});
}
