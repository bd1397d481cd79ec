#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <string>
#include <vector>

#include "chatgnn/analysis.hpp"
#include "chatgnn/autodiff.hpp"
#include "chatgnn/data_io.hpp"
#include "chatgnn/errors.hpp"
#include "chatgnn/gradcheck.hpp"
#include "chatgnn/graph.hpp"
#include "chatgnn/layers.hpp"
#include "chatgnn/model.hpp"
#include "chatgnn/trainer.hpp"

namespace py = pybind11;
using namespace chatgnn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-d array, got " + std::to_string(a.ndim()) + "-d");
  Tensor t(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::memcpy(t.data().data(), a.data(), t.size() * sizeof(double));
  return t;
}

Array to_array(const Tensor& t) {
  Array a({t.rows(), t.cols()});
  std::memcpy(a.mutable_data(), t.data().data(), t.size() * sizeof(double));
  return a;
}

ChatLayerParams layer_params(const Array& w1, const Array& w2, const std::optional<Array>& proj_self,
                             const std::optional<Array>& proj_neigh,
                             const std::optional<Array>& ln_gamma, const std::optional<Array>& ln_beta) {
  ChatLayerParams p;
  p.w1 = to_tensor(w1);
  p.w2 = to_tensor(w2);
  if (proj_self) p.proj_self = to_tensor(*proj_self);
  if (proj_neigh) p.proj_neigh = to_tensor(*proj_neigh);
  if (ln_gamma) p.ln_gamma = to_tensor(*ln_gamma);
  if (ln_beta) p.ln_beta = to_tensor(*ln_beta);
  p.validate();
  return p;
}

}  // namespace

PYBIND11_MODULE(_chatgnn, m) {
  m.doc() = "Channel-attentive message passing for node classification";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<IndexError>(m, "NodeIndexError", PyExc_IndexError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  // ---- graphs -------------------------------------------------------------
  py::class_<Graph>(m, "Graph")
      .def(py::init([](std::size_t n, const EdgeList& edges, bool directed) {
             return build_graph(n, edges, directed);
           }),
           py::arg("num_nodes"), py::arg("edges"), py::arg("directed") = false)
      .def_property_readonly("num_nodes", &Graph::num_nodes)
      .def_property_readonly("num_edges", &Graph::num_edges)
      .def_property_readonly("num_arcs", &Graph::num_arcs)
      .def_property_readonly("directed", &Graph::directed)
      .def("degrees", [](const Graph& g) {
        return std::vector<std::size_t>(g.degrees().begin(), g.degrees().end());
      })
      .def("neighbors", [](const Graph& g, NodeId v) {
        if (v >= g.num_nodes()) throw IndexError("node " + std::to_string(v) + " out of range");
        return std::vector<NodeId>(g.neighbors(v).begin(), g.neighbors(v).end());
      })
      .def("has_arc", &Graph::has_arc)
      .def("arcs", &Graph::arcs)
      .def("__eq__", [](const Graph& a, const Graph& b) { return a == b; })
      .def("__repr__", [](const Graph& g) {
        return "<Graph nodes=" + std::to_string(g.num_nodes()) + " edges=" +
               std::to_string(g.num_edges()) + (g.directed() ? " directed>" : ">");
      });
  m.def("grid_graph", &grid_graph, py::arg("rows"), py::arg("cols"));
  m.def("reverse", &reverse);
  m.def("edge_norms", [](const Graph& g) {
    const EdgeArrays e = edge_arrays(g);
    return py::make_tuple(e.src, e.dst, e.norm);
  }, "(src, dst, norm) per stored arc u -> v, in CSR order.");

  // ---- layers -------------------------------------------------------------
  m.def("channel_beta",
        [](const Array& h, const Graph& g, const Array& w1, const Array& w2) {
          NoGradGuard guard;
          return to_array(channel_beta(to_tensor(h), edge_arrays(g),
                                       layer_params(w1, w2, {}, {}, {}, {})));
        },
        py::arg("h"), py::arg("graph"), py::arg("w1"), py::arg("w2"));
  m.def("chat_layer_forward",
        [](const Array& h, const Array& h0, const Graph& g, const Array& w1, const Array& w2,
           const std::optional<Array>& proj_self, const std::optional<Array>& proj_neigh,
           const std::optional<Array>& ln_gamma, const std::optional<Array>& ln_beta) {
          NoGradGuard guard;
          return to_array(chat_layer_forward(to_tensor(h), to_tensor(h0), edge_arrays(g),
                                             layer_params(w1, w2, proj_self, proj_neigh, ln_gamma, ln_beta)));
        },
        py::arg("h"), py::arg("h0"), py::arg("graph"), py::arg("w1"), py::arg("w2"),
        py::arg("proj_self") = py::none(), py::arg("proj_neigh") = py::none(),
        py::arg("ln_gamma") = py::none(), py::arg("ln_beta") = py::none());

  // ---- data ---------------------------------------------------------------
  py::class_<Split>(m, "Split")
      .def_readonly("train", &Split::train)
      .def_readonly("val", &Split::val)
      .def_readonly("test", &Split::test);
  py::class_<Dataset>(m, "Dataset")
      .def_readonly("name", &Dataset::name)
      .def_readonly("graph", &Dataset::graph)
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_readonly("splits", &Dataset::splits)
      .def_property_readonly("num_nodes", &Dataset::num_nodes)
      .def_property_readonly("features", [](const Dataset& d) { return to_array(d.features); });
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("synthetic_dataset",
        [](std::size_t nodes, std::size_t classes, std::size_t features, double homophily,
           double degree, std::size_t splits, std::uint64_t seed) {
          SyntheticSpec spec;
          spec.num_nodes = nodes;
          spec.num_classes = classes;
          spec.num_features = features;
          spec.homophily = homophily;
          spec.average_degree = degree;
          spec.num_splits = splits;
          spec.seed = seed;
          return make_synthetic_dataset(spec);
        },
        py::arg("nodes") = 183, py::arg("classes") = 5, py::arg("features") = 300,
        py::arg("homophily") = 0.1, py::arg("degree") = 3.4, py::arg("splits") = 10,
        py::arg("seed") = 0);
  m.def("row_normalize", [](const Array& x) { return to_array(row_normalize(to_tensor(x))); });

  // ---- model and training -------------------------------------------------
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("in_features", &ModelConfig::in_features)
      .def_readwrite("hidden", &ModelConfig::hidden)
      .def_readwrite("classes", &ModelConfig::classes)
      .def_readwrite("layers", &ModelConfig::layers)
      .def_readwrite("use_layer_norm", &ModelConfig::use_layer_norm)
      .def_readwrite("use_projection", &ModelConfig::use_projection)
      .def_readwrite("directed_mode", &ModelConfig::directed_mode)
      .def_readwrite("seed", &ModelConfig::seed)
      .def_property("layer_kind",
                    [](const ModelConfig& c) { return std::string(to_string(c.layer_kind)); },
                    [](ModelConfig& c, const std::string& s) { c.layer_kind = layer_kind_from_string(s); })
      .def_property("baseline_wrap",
                    [](const ModelConfig& c) { return std::string(to_string(c.baseline_wrap)); },
                    [](ModelConfig& c, const std::string& s) {
                      c.baseline_wrap = baseline_wrap_from_string(s);
                    });

  py::class_<ChatGnnModel>(m, "Model")
      .def(py::init([](const ModelConfig& cfg) { return init_model(cfg); }), py::arg("config"))
      .def_readonly("config", &ChatGnnModel::config)
      .def_property_readonly("parameter_count", &ChatGnnModel::parameter_count)
      .def("parameters", [](const ChatGnnModel& mdl) {
        py::dict out;
        for (const auto& p : mdl.named_parameters()) out[py::str(p.name)] = to_array(p.tensor);
        return out;
      }, "Copies of every parameter, keyed by dotted name.")
      .def("forward", [](const ChatGnnModel& mdl, const Array& x, const Graph& g) {
        NoGradGuard guard;
        return to_array(model_forward(mdl, to_tensor(x), PropagationGraph::from(g)));
      }, py::arg("x"), py::arg("graph"))
      .def("save", [](const ChatGnnModel& mdl, const std::filesystem::path& p) { save_checkpoint(mdl, p); })
      .def_static("load", &load_checkpoint);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("max_epochs", &TrainConfig::max_epochs)
      .def_readwrite("patience", &TrainConfig::patience)
      .def_readwrite("warmup", &TrainConfig::warmup)
      .def_property("metric",
                    [](const TrainConfig& c) { return std::string(to_string(c.test_metric)); },
                    [](TrainConfig& c, const std::string& s) { c.test_metric = metric_from_string(s); });

  py::class_<EpochMetrics>(m, "EpochMetrics")
      .def_readonly("epoch", &EpochMetrics::epoch)
      .def_readonly("train_loss", &EpochMetrics::train_loss)
      .def_readonly("train_accuracy", &EpochMetrics::train_accuracy)
      .def_readonly("val_accuracy", &EpochMetrics::val_accuracy)
      .def_readonly("test_metric", &EpochMetrics::test_metric);
  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("best_model", &TrainResult::best_model)
      .def_readonly("history", &TrainResult::history)
      .def_readonly("best_epoch", &TrainResult::best_epoch)
      .def_readonly("best_val", &TrainResult::best_val)
      .def_readonly("best_test", &TrainResult::best_test);
  m.def("train", [](const ChatGnnModel& mdl, const Dataset& d, std::size_t split, const TrainConfig& cfg) {
    py::gil_scoped_release release;
    return train(mdl, d, split, cfg);
  }, py::arg("model"), py::arg("dataset"), py::arg("split") = 0, py::arg("config") = TrainConfig{});
  m.def("evaluate", [](const ChatGnnModel& mdl, const Dataset& d, const std::vector<NodeId>& mask,
                       const std::string& metric) {
    NoGradGuard guard;
    return evaluate(mdl, d, mask, metric_from_string(metric));
  }, py::arg("model"), py::arg("dataset"), py::arg("mask"), py::arg("metric") = "accuracy");

  // ---- analysis -----------------------------------------------------------
  m.def("dirichlet_energy", [](const Array& x, const Graph& g) { return dirichlet_energy(to_tensor(x), g); });
  m.def("local_variation",
        [](const Array& x, const Graph& g, NodeId v) { return local_variation(to_tensor(x), g, v); });
  m.def("energy_decay",
        [](const std::string& kind, std::size_t layers, std::size_t rows, std::size_t cols,
           std::uint64_t seed) {
          return energy_decay_experiment(layer_kind_from_string(kind), layers, rows, cols, seed)
              .per_layer_energy;
        },
        py::arg("kind"), py::arg("layers"), py::arg("rows") = 10, py::arg("cols") = 10,
        py::arg("seed") = 0);
  m.def("local_variation_violations", [](const Array& h, const Array& msg, const Graph& g) {
    return prop1_check(to_tensor(h), to_tensor(msg), g).violations;
  });
  m.def("collapse_monte_carlo",
        [](std::size_t neighbors, std::size_t width, std::size_t trials,
           const std::vector<double>& support, std::uint64_t seed) {
          const auto f = collapse_monte_carlo(neighbors, width, trials, support, seed);
          return py::make_tuple(f.scalar, f.channel);
        },
        py::arg("neighbors"), py::arg("width"), py::arg("trials"), py::arg("support"),
        py::arg("seed") = 0, "(scalar, channel) fractions of trials with a non-zero bound.");
  m.def("gradcheck", [](std::size_t instances, std::uint64_t seed) {
    py::dict out;
    for (const auto& r : run_gradcheck_suite(instances, seed)) out[py::str(r.name)] = r.worst_error;
    return out;
  }, py::arg("instances") = 10, py::arg("seed") = 0, "Worst relative error per case.");
}
