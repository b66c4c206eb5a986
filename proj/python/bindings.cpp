#include "graphik/cli.hpp"
#include "graphik/datagen.hpp"
#include "graphik/dataset_io.hpp"
#include "graphik/errors.hpp"
#include "graphik/evaluation.hpp"
#include "graphik/kinematics.hpp"
#include "graphik/mpnn.hpp"
#include "graphik/training.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace graphik;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& v, std::size_t cols) {
    Array out({v.size() / cols, cols});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

py::dict eval_dict(const EvalReport& r) {
    py::dict d;
    d["r2"] = r.r2;
    d["loss"] = r.loss;
    d["joint_r2"] = r.joint_r2;
    d["position_mean"] = r.position_mean;
    d["position_std"] = r.position_std;
    d["orientation_mean"] = r.orientation_mean;
    d["orientation_std"] = r.orientation_std;
    d["theta_pred"] = to_array(r.theta_pred, static_cast<std::size_t>(r.dof));
    d["position_error"] = to_array(r.position_error, 1).attr("ravel")();
    d["orientation_error"] = to_array(r.orientation_error, 1).attr("ravel")();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Inverse kinematics with message passing networks";
    m.attr("__version__") = kToolVersion;

    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
    py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<SaturationError>(m, "SaturationError", PyExc_RuntimeError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<ManipulatorConfig>(m, "ManipulatorConfig")
        .def_property_readonly("dof", &ManipulatorConfig::dof)
        .def_property_readonly("total_length", &ManipulatorConfig::total_length)
        .def("to_json", [](const ManipulatorConfig& c) { return nlohmann::json(c).dump(); })
        .def("__eq__", [](const ManipulatorConfig& a, const ManipulatorConfig& b) { return a == b; });

    m.def("make_config", [](int dof, const std::vector<double>& lengths) { return make_config(dof, lengths); },
          py::arg("dof"), py::arg("lengths"), "Family configuration with the given link lengths in cm");

    m.def(
        "forward_kinematics",
        [](const ManipulatorConfig& c, const std::vector<double>& theta_deg) {
            const auto a = forward_kinematics(c, theta_deg).pose.as_array();
            return std::vector<double>(a.begin(), a.end());
        },
        py::arg("config"), py::arg("theta_deg"), "Pose [x, y, z, Phi, Theta, Psi] for joint angles in degrees");
    m.def(
        "check_collision",
        [](const ManipulatorConfig& c, const std::vector<double>& theta_deg) {
            return to_string(check_collision(c, forward_kinematics(c, theta_deg).frames));
        },
        py::arg("config"), py::arg("theta_deg"));

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("config", &Dataset::config)
        .def_readonly("config_id", &Dataset::config_id)
        .def_readonly("role", &Dataset::role)
        .def_property_readonly("rows", &Dataset::rows)
        .def_property_readonly("dof", &Dataset::dof)
        .def_property_readonly("theta_deg", [](const Dataset& d) { return to_array(d.theta_deg, static_cast<std::size_t>(d.dof())); })
        .def_property_readonly("pose", [](const Dataset& d) { return to_array(d.pose, 6); })
        .def("save", [](const Dataset& d, const std::string& path) { write_dataset(d, path); });

    m.def(
        "generate",
        [](int dof, int configs, int samples, std::uint64_t seed, int threads) {
            py::gil_scoped_release release;
            return generate_dataset(FamilySpec{dof, configs, samples, seed}, GenerationOptions{threads});
        },
        py::arg("dof"), py::arg("configs"), py::arg("samples"), py::arg("seed"), py::arg("threads") = 1,
        "Samples a manipulator family; one Dataset per configuration");
    m.def("load_dataset", &read_dataset, py::arg("path"));

    py::class_<MPNNModel>(m, "Model")
        .def(py::init([](const std::string& variant, int dof, int layers, int neurons, std::uint64_t seed) {
                 return MPNNModel::create(Variant::parse(variant), dof, layers, neurons, seed);
             }),
             py::arg("variant"), py::arg("dof"), py::arg("layers"), py::arg("neurons"), py::arg("seed"))
        .def_property_readonly("name", &MPNNModel::name)
        .def_readonly("dof", &MPNNModel::dof)
        .def_property_readonly("parameter_count", &MPNNModel::parameter_count);

    m.def(
        "train",
        [](const MPNNModel& model, const std::vector<Dataset>& data, int epochs, int batch_size, int patience,
           std::uint64_t seed, int threads) {
            TrainConfig cfg;
            cfg.variant = model.variant;
            cfg.dof = model.dof;
            cfg.layers = model.layers;
            cfg.neurons = model.neurons;
            cfg.max_epochs = epochs;
            cfg.batch_size = batch_size;
            cfg.patience = patience;
            cfg.seed = seed;
            cfg.threads = threads;
            auto r = [&] {
                py::gil_scoped_release release;
                return train(model, data, cfg);
            }();
            return py::make_tuple(r.model, report_to_json(r.report).dump());
        },
        py::arg("model"), py::arg("data"), py::arg("epochs") = 1000, py::arg("batch_size") = 5000,
        py::arg("patience") = 10, py::arg("seed") = 0, py::arg("threads") = 1,
        "Trains with AdamW and early stopping; returns (best model, report JSON)");

    m.def(
        "evaluate",
        [](const MPNNModel& model, const Dataset& data, std::uint64_t reference_seed) {
            return eval_dict(pose_errors(model, data, "test", reference_seed));
        },
        py::arg("model"), py::arg("data"), py::arg("reference_seed"),
        "Predicts every row and returns R2, pose errors and predicted angles (radians)");

    m.def("load_model", [](const std::string& path) { return load_checkpoint(path).model; }, py::arg("path"));

    m.def("r_squared", [](const Array& p, const Array& t) { return r_squared(to_vector(p), to_vector(t)); },
          py::arg("predictions"), py::arg("targets"));
    m.def("convex_angle_distance", py::vectorize(convex_angle_distance), py::arg("a_deg"), py::arg("b_deg"));
    m.def(
        "mann_whitney_less",
        [](const Array& a, const Array& b) {
            const auto r = mann_whitney_less(to_vector(a), to_vector(b));
            return py::make_tuple(r.u, r.z, r.p_value);
        },
        py::arg("a"), py::arg("b"), "One-sided rank test; returns (U, z, p)");

    m.def(
        "run",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "graphik");
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = dispatch(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a CLI subcommand in process; returns (exit code, stdout, stderr)");
}
