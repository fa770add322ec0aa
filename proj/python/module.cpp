#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "dyhsl/checkpoint.hpp"
#include "dyhsl/commands.hpp"
#include "dyhsl/dataio.hpp"
#include "dyhsl/error.hpp"
#include "dyhsl/learning.hpp"
#include "dyhsl/multiscale.hpp"
#include "dyhsl/verify.hpp"

namespace py = pybind11;
using namespace dyhsl;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

py::dict params_to_dict(const ModelParameters& p) {
  py::dict d;
  for_each_param(p, [&](const std::string& name, const Tensor& t) { d[py::str(name)] = to_array(t); });
  return d;
}

ModelParameters params_from_dict(const ModelConfig& config, const py::dict& d) {
  ModelParameters p = zero_parameters(config);
  for_each_param(p, [&](const std::string& name, Tensor& t) {
    if (!d.contains(name)) throw ContractError("parameter dict is missing '" + name + "'");
    t = to_tensor(d[py::str(name)].cast<Array>());
  });
  check_parameter_layout(config, p);
  return p;
}

py::dict report_to_dict(const MetricReport& r) {
  py::dict d;
  d["mae"] = r.mae;
  d["rmse"] = r.rmse;
  d["mape"] = r.mape ? py::cast(*r.mape) : py::none();
  d["count"] = r.count;
  return d;
}

RoadNetwork make_network(std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges) {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (const auto& [s, t, w] : edges) out.push_back({s, t, w});
  return RoadNetwork(n, std::move(out));
}

std::vector<std::tuple<std::size_t, std::size_t, double>> network_edges(const RoadNetwork& net) {
  std::vector<std::tuple<std::size_t, std::size_t, double>> out;
  for (const Edge& e : net.edges()) out.emplace_back(e.src, e.dst, e.weight);
  return out;
}

template <int (*Cmd)(const RunOptions&, std::ostream&)>
std::pair<int, std::string> run(const RunOptions& o) {
  std::ostringstream log;
  const int code = Cmd(o, log);
  return {code, log.str()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dynamic hypergraph structure learning traffic forecaster";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("n_nodes", &ModelConfig::n_nodes)
      .def_readwrite("n_features", &ModelConfig::n_features)
      .def_readwrite("lookback", &ModelConfig::lookback)
      .def_readwrite("horizon", &ModelConfig::horizon)
      .def_readwrite("hidden", &ModelConfig::hidden)
      .def_readwrite("hyperedges", &ModelConfig::hyperedges)
      .def_readwrite("prior_layers", &ModelConfig::prior_layers)
      .def_readwrite("hyper_layers", &ModelConfig::hyper_layers)
      .def_readwrite("mhce_layers", &ModelConfig::mhce_layers)
      .def_readwrite("windows", &ModelConfig::windows)
      .def("validate", &ModelConfig::validate)
      .def("__eq__", [](const ModelConfig& a, const ModelConfig& b) { return a == b; });

  py::class_<RoadNetwork>(m, "RoadNetwork")
      .def(py::init(&make_network), py::arg("n_nodes"), py::arg("edges"))
      .def_property_readonly("n_nodes", &RoadNetwork::n_nodes)
      .def_property_readonly("edges", &network_edges)
      .def("nnz", &RoadNetwork::nnz);
  m.def("read_road_network_csv", &read_road_network_csv, py::arg("path"), py::arg("n_nodes"));
  m.def("write_road_network_csv", &write_road_network_csv, py::arg("path"), py::arg("network"));

  m.def("init_parameters", [](const ModelConfig& c, std::uint64_t seed) { return params_to_dict(init_parameters(c, seed)); },
        py::arg("config"), py::arg("seed"), "Seeded initial parameters as a name -> array dict.");
  m.def("zero_parameters", [](const ModelConfig& c) { return params_to_dict(zero_parameters(c)); }, py::arg("config"));

  py::class_<DyHSLModel>(m, "Model")
      .def(py::init<ModelConfig, RoadNetwork>(), py::arg("config"), py::arg("network"))
      .def_property_readonly("config", &DyHSLModel::config)
      .def(
          "predict",
          [](const DyHSLModel& model, const py::dict& params, const Array& window) {
            return to_array(model.predict(params_from_dict(model.config(), params), to_tensor(window)));
          },
          py::arg("params"), py::arg("window"), "Normalized T' x N forecast for a normalized T x N x F window.")
      .def(
          "incidence",
          [](const DyHSLModel& model, const py::dict& params, const Array& window) {
            ForwardTrace trace;
            model.predict(params_from_dict(model.config(), params), to_tensor(window), &trace);
            std::vector<std::vector<Array>> out;
            for (const auto& scale : trace.incidence) {
              out.emplace_back();
              for (const Tensor& t : scale) out.back().push_back(to_array(t));
            }
            return out;
          },
          py::arg("params"), py::arg("window"), "Incidence matrices per scale and layer.")
      .def(
          "gradients",
          [](const DyHSLModel& model, const py::dict& params, const Array& window, const Array& target) {
            Tape tape;
            const ModelVars vars = bind_parameters(tape, params_from_dict(model.config(), params));
            Var pred = model.forward(tape, vars, to_tensor(window));
            Var loss = mae_loss(pred, tape.constant(to_tensor(target)));
            tape.backward(loss);
            return py::make_tuple(loss.value()[0], params_to_dict(collect_gradients(tape, vars)));
          },
          py::arg("params"), py::arg("window"), py::arg("target"), "MAE loss and its parameter gradients.");

  m.def(
      "synth_generate",
      [](std::size_t nodes, std::size_t communities, std::size_t steps, std::uint64_t seed, double noise) {
        SynthConfig c;
        c.n_nodes = nodes;
        c.n_communities = communities;
        c.t_total = steps;
        c.seed = seed;
        c.noise = noise;
        SynthData d = synth_generate(c);
        return py::make_tuple(to_array(d.signals.values()), network_edges(d.network), d.membership);
      },
      py::arg("nodes") = 30, py::arg("communities") = 3, py::arg("steps") = 4032, py::arg("seed") = 0,
      py::arg("noise") = 5.0, "Returns (signals T x N x 1, edges, membership).");
  m.def(
      "read_signals", [](const std::filesystem::path& p) { return to_array(read_signals(p).values()); },
      py::arg("path"));
  m.def(
      "write_signals",
      [](const std::filesystem::path& p, const Array& values, double interval) {
        if (values.ndim() != 3) throw DimensionError("signals must be T x N x F");
        const SignalMeta meta{static_cast<std::size_t>(values.shape(0)), static_cast<std::size_t>(values.shape(1)),
                              static_cast<std::size_t>(values.shape(2)), interval};
        write_signals(p, SignalTensor(meta, to_tensor(values)));
      },
      py::arg("path"), py::arg("values"), py::arg("interval_minutes") = 5.0);

  m.def(
      "evaluate", [](const Array& pred, const Array& target) { return report_to_dict(evaluate(to_tensor(pred), to_tensor(target))); },
      py::arg("pred"), py::arg("target"), "MAE, RMSE and masked MAPE.");
  m.def(
      "ha_baseline", [](const Array& window, std::size_t horizon) { return to_array(ha_baseline(to_tensor(window), horizon)); },
      py::arg("window"), py::arg("horizon"));

  m.def(
      "run_verification",
      [](std::uint64_t seed, bool corrupt) {
        verify::VerifyOptions o;
        o.seed = seed;
        o.corrupt_w2_gradient = corrupt;
        py::list out;
        for (const auto& r : verify::run_verification(o)) {
          py::dict d;
          d["family"] = r.family;
          d["name"] = r.name;
          d["observed"] = r.observed;
          d["tolerance"] = r.tolerance;
          d["passed"] = r.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 7, py::arg("corrupt_gradient") = false);

  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& p) {
        const Checkpoint c = load_checkpoint(p);
        py::dict norm;
        norm["mean"] = c.stats.mean;
        norm["std"] = c.stats.std;
        return py::make_tuple(c.config, params_to_dict(c.params), norm);
      },
      py::arg("path"), "Returns (config, params, norm stats).");

  py::class_<RunOptions>(m, "RunOptions")
      .def(py::init<>())
      .def_readwrite("data", &RunOptions::data)
      .def_readwrite("edges", &RunOptions::edges)
      .def_readwrite("out", &RunOptions::out)
      .def_readwrite("checkpoint", &RunOptions::checkpoint)
      .def_readwrite("seed", &RunOptions::seed)
      .def_readwrite("epochs", &RunOptions::epochs)
      .def_readwrite("batch_size", &RunOptions::batch_size)
      .def_readwrite("lr", &RunOptions::lr)
      .def_readwrite("d", &RunOptions::d)
      .def_readwrite("hyperedges", &RunOptions::hyperedges)
      .def_readwrite("windows", &RunOptions::windows)
      .def_readwrite("lp", &RunOptions::lp)
      .def_readwrite("lh", &RunOptions::lh)
      .def_readwrite("ls", &RunOptions::ls)
      .def_readwrite("horizon", &RunOptions::horizon)
      .def_readwrite("lookback", &RunOptions::lookback)
      .def_readwrite("workers", &RunOptions::workers)
      .def_readwrite("max_steps", &RunOptions::max_steps)
      .def_readwrite("clip_norm", &RunOptions::clip_norm)
      .def_readwrite("split", &RunOptions::split)
      .def_readwrite("window_index", &RunOptions::window_index)
      .def_readwrite("nodes", &RunOptions::nodes)
      .def_readwrite("communities", &RunOptions::communities)
      .def_readwrite("steps", &RunOptions::steps)
      .def_readwrite("repeats", &RunOptions::repeats);

  // Command entry points return (exit code, log text).
  m.def("train", &run<cmd_train>, py::arg("options"), py::call_guard<py::gil_scoped_release>());
  m.def("eval", &run<cmd_eval>, py::arg("options"), py::call_guard<py::gil_scoped_release>());
  m.def("predict", &run<cmd_predict>, py::arg("options"), py::call_guard<py::gil_scoped_release>());
  m.def("synth", &run<cmd_synth>, py::arg("options"));
  m.def("export_incidence", &run<cmd_export_incidence>, py::arg("options"));
}
