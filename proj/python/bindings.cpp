#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "privsim/config.hpp"
#include "privsim/dataset.hpp"
#include "privsim/dp.hpp"
#include "privsim/federation.hpp"
#include "privsim/metrics.hpp"
#include "privsim/objective.hpp"
#include "privsim/runlog.hpp"

namespace py = pybind11;
using namespace privsim;

namespace {

Matrix matrix_from_lists(const std::vector<std::vector<double>>& rows) {
    return Matrix::from_rows(rows);
}

std::vector<std::vector<double>> matrix_to_lists(const Matrix& m) {
    std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
    return out;
}

std::string run_simulation_json(const std::string& config_json) {
    RunConfig cfg = RunConfig::from_json(nlohmann::json::parse(config_json));
    cfg.resolve_and_validate();
    SimulationResult result = run_simulation(cfg);
    nlohmann::ordered_json out;
    out["rounds"] = result.records.size();
    out["final_metric"] = result.records.empty() ? 0.0 : result.records.back().metric;
    out["epochs"] = result.epochs;
    out["digest"] = result.records.empty() ? "" : result.records.back().digest;
    if (result.rounds_to_target) out["rounds_to_target"] = *result.rounds_to_target;
    nlohmann::ordered_json lines = nlohmann::ordered_json::array();
    for (const auto& rec : result.records) lines.push_back(record_to_json(rec, false));
    out["records"] = std::move(lines);
    return out.dump();
}

}  // namespace

PYBIND11_MODULE(_privsim, m) {
    m.doc() = "core operations of the collaborative-learning simulator";

    py::class_<Rng>(m, "Rng")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("uniform01", &Rng::uniform01)
        .def("child", &Rng::child, py::arg("stream_id"));

    py::class_<Matrix>(m, "Matrix")
        .def(py::init(&matrix_from_lists), py::arg("rows"))
        .def_property_readonly("shape",
                               [](const Matrix& m_) { return py::make_tuple(m_.rows(), m_.cols()); })
        .def("tolist", &matrix_to_lists);

    m.def("matmul", &matmul, py::arg("a"), py::arg("b"));
    m.def("laplace_icdf", &laplace_icdf, py::arg("u"), py::arg("scale"));
    m.def("sample_laplace", &sample_laplace, py::arg("rng"), py::arg("scale"));
    m.def("sample_uniform", &sample_uniform, py::arg("rng"), py::arg("lo"), py::arg("hi"));
    m.def("sample_gaussian", &sample_gaussian, py::arg("rng"));

    m.def("taylor_coeffs_regression", [](double y) {
        TaylorCoeffs k = taylor_coeffs_regression(y);
        return py::make_tuple(k.k0, k.k1, k.k2);
    });
    m.def("taylor_coeffs_classification", [](double y) {
        TaylorCoeffs k = taylor_coeffs_classification(y);
        return py::make_tuple(k.k0, k.k1, k.k2);
    });

    m.def(
        "sensitivity",
        [](const std::string& task, std::size_t width, std::size_t classes) {
            Architecture arch;
            arch.input_dim = width;
            arch.hidden = {width};
            if (task == "regression") {
                arch.task = Task::Regression;
                arch.output_dim = 1;
            } else if (task == "classification") {
                arch.task = Task::Classification;
                arch.output_dim = classes;
                arch.featurizer.kind = FeaturizerSpec::Kind::RandomProjection;
                arch.featurizer.width = width;
            } else {
                throw std::invalid_argument("task must be 'regression' or 'classification'");
            }
            return sensitivity(arch).value;
        },
        py::arg("task"), py::arg("width"), py::arg("classes") = 1,
        "coefficient sensitivity of the perturbed objective");

    m.def("utility_sensitivity", [](const std::string& task) {
        return utility_sensitivity(task == "regression" ? Task::Regression
                                                        : Task::Classification);
    });
    m.def("selection_probabilities", &selection_probabilities, py::arg("scores"), py::arg("eps1"),
          py::arg("k"), py::arg("du"));
    m.def("exp_sample", &exp_sample, py::arg("scores"), py::arg("k"), py::arg("eps1"),
          py::arg("du"), py::arg("rng"));

    m.def("mre", &mre, py::arg("predictions"), py::arg("labels"),
          py::arg("y_floor") = kDefaultYFloor);
    m.def("accuracy", &accuracy, py::arg("predicted"), py::arg("truth"));

    m.def("run_simulation_json", &run_simulation_json, py::arg("config_json"),
          "run the protocol from a JSON config string; returns a JSON summary");
}
