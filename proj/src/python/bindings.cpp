#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mrforest/boosting.hpp"
#include "mrforest/cli.hpp"
#include "mrforest/error.hpp"
#include "mrforest/io.hpp"

namespace py = pybind11;
using namespace mrf;

namespace {

RunConfig settings(const std::string& json) {
  RunConfig c;
  if (!json.empty()) apply_config_json(c, json);
  return c;
}

RoomModel room_of(const RunConfig& c) {
  return c.room.empty() ? default_room() : room_from_json(read_text_file(c.room));
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "all") return Split::all;
  fail(ErrorCode::invalid_argument, "unknown split '" + s + "'");
}

InferenceResult infer(const MarkovNetwork& net, const Potentials& pot, const std::string& engine,
                      std::optional<Clamp> clamp, double bp_rate, int bp_max_rounds) {
  const Clamp c = clamp ? *clamp : free_clamp(net);
  std::vector<EdgeId> all(net.num_edges());
  for (int e = 0; e < net.num_edges(); ++e) all[e] = e;
  if (engine == "tree") return tree_sum_product(net, all, pot, c);
  if (engine == "tree-max") return tree_max_product(net, all, pot, c);
  if (engine == "chain") return exact_collapsed_chain(net, pot, c);
  if (engine == "chain-max") return exact_collapsed_chain(net, pot, c, true);
  if (engine == "brute-force") return brute_force(net, pot, c);
  if (engine == "loopy" || engine == "loopy-max") {
    LoopyBpOptions opt;
    opt.mode = engine == "loopy" ? BpMode::sum : BpMode::max;
    opt.rate = bp_rate;
    opt.max_rounds = bp_max_rounds;
    return loopy_bp(net, pot, c, opt);
  }
  fail(ErrorCode::invalid_argument, "unknown engine '" + engine + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Boosted spanning-tree CRFs for partially labelled sequences";

  static PyObject* error_type = py::exception<Error>(m, "Error").release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = to_string(e.code());
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  py::class_<MarkovNetwork>(m, "Network")
      .def(py::init([](std::vector<int> sizes, const std::vector<std::pair<int, int>>& edges) {
             std::vector<Edge> es;
             for (auto [a, b] : edges) es.push_back({a, b});
             return MarkovNetwork(std::move(sizes), std::move(es));
           }),
           py::arg("state_sizes"), py::arg("edges"))
      .def_property_readonly("num_nodes", &MarkovNetwork::num_nodes)
      .def_property_readonly("num_edges", &MarkovNetwork::num_edges)
      .def_property_readonly("state_sizes", &MarkovNetwork::state_sizes)
      .def_property_readonly("edges",
                             [](const MarkovNetwork& n) {
                               std::vector<std::pair<int, int>> out;
                               for (int e = 0; e < n.num_edges(); ++e) out.emplace_back(n.edge(e).a, n.edge(e).b);
                               return out;
                             })
      .def_property_readonly("is_grid", [](const MarkovNetwork& n) { return n.grid().has_value(); });
  m.def("grid_network", &build_network, py::arg("levels"), py::arg("slices"), py::arg("state_sizes"),
        "Multi-level grid: a chain per level plus parent-child edges per slice.");

  py::class_<InferenceResult>(m, "InferenceResult")
      .def_readonly("log_partition", &InferenceResult::log_partition)
      .def_readonly("node_marginals", &InferenceResult::node_marginals)
      .def_readonly("edge_marginals", &InferenceResult::edge_marginals)
      .def_readonly("map_assignment", &InferenceResult::map_assignment)
      .def_readonly("converged", &InferenceResult::converged)
      .def_readonly("rounds", &InferenceResult::rounds);
  m.def(
      "infer",
      [](const MarkovNetwork& net, std::vector<std::vector<double>> node, std::vector<std::vector<double>> edge,
         const std::string& engine, std::optional<Clamp> clamp, double bp_rate, int bp_max_rounds) {
        return infer(net, Potentials{std::move(node), std::move(edge)}, engine, std::move(clamp), bp_rate,
                     bp_max_rounds);
      },
      py::arg("network"), py::arg("node_potentials"), py::arg("edge_potentials"), py::arg("engine") = "tree",
      py::arg("clamp") = py::none(), py::arg("bp_rate") = 1e-4, py::arg("bp_max_rounds") = 100,
      "Engines: tree, tree-max, chain, chain-max, brute-force, loopy, loopy-max. Clamp entries of -1 are free.");

  m.def(
      "check_holder_inequality",
      [](const std::vector<std::vector<double>>& a, const std::vector<double>& r) {
        const auto c = check_holder_inequality(a, r);
        return py::make_tuple(c.lhs, c.rhs, c.holds);
      },
      py::arg("a"), py::arg("r"));
  m.def(
      "macro_f1",
      [](const std::vector<int>& truth, const std::vector<int>& pred, int k) { return macro_f1(truth, pred, k).macro_f1; },
      py::arg("truth"), py::arg("predicted"), py::arg("num_classes"));

  py::class_<Sequence>(m, "Sequence")
      .def_readonly("id", &Sequence::id)
      .def_readonly("train", &Sequence::train)
      .def_readonly("activity", &Sequence::activity)
      .def_readonly("channels", &Sequence::channels)
      .def_readonly("top", &Sequence::top)
      .def_readonly("bottom", &Sequence::bottom)
      .def_property_readonly("top_visible",
                             [](const Sequence& s) { return std::vector<int>(s.top_visible.begin(), s.top_visible.end()); })
      .def_property_readonly(
          "bottom_visible", [](const Sequence& s) { return std::vector<int>(s.bottom_visible.begin(), s.bottom_visible.end()); })
      .def("__len__", &Sequence::length);

  m.def(
      "_generate_dataset",
      [](const std::string& json) {
        const RunConfig c = settings(json);
        const RoomModel room = room_of(c);
        const GeneratorConfig g = generator_config(c);
        validate(g, room);
        return generate_dataset(room, g);
      },
      py::arg("settings"));
  m.def("write_dataset", &write_dataset_file, py::arg("path"), py::arg("sequences"));
  m.def(
      "read_dataset", [](const std::string& path, const std::string& split) { return read_dataset_file(path, parse_split(split)); },
      py::arg("path"), py::arg("split") = "all");
  m.def("strip_labels", &strip_labels, py::arg("sequences"));

  py::class_<Model>(m, "Model")
      .def_property_readonly("trainer", [](const Model& md) { return std::string(to_string(md.trainer)); })
      .def_readonly("params", &Model::params)
      .def_readonly("beta", &Model::beta)
      .def_readonly("tree_names", &Model::tree_names)
      .def_property_readonly("alphas",
                             [](const Model& md) {
                               std::vector<double> a;
                               for (const auto& mem : md.members) a.push_back(mem.alpha);
                               return a;
                             })
      .def_property_readonly("member_trees",
                             [](const Model& md) {
                               std::vector<int> t;
                               for (const auto& mem : md.members) t.push_back(mem.tree_id);
                               return t;
                             })
      .def("to_json", &model_to_json)
      .def_static("from_json", &model_from_json, py::arg("text"));

  m.def(
      "_train",
      [](const std::vector<Sequence>& train, const std::string& json) {
        const RunConfig c = settings(json);
        const TrainOptions opt = train_options(c);
        const RoomModel room = room_of(c);
        TrainOutcome out;
        {
          py::gil_scoped_release release;
          out = train_model(room, train, opt);
        }
        std::ostringstream hist;
        write_history(hist, out.history, static_cast<int>(train.size()));
        return py::make_tuple(out.model, hist.str());
      },
      py::arg("sequences"), py::arg("settings"));

  py::class_<Prediction>(m, "Prediction")
      .def(py::init([](int id, std::vector<int> top, std::vector<int> bottom) {
             return Prediction{id, std::move(top), std::move(bottom), true};
           }),
           py::arg("id"), py::arg("top"), py::arg("bottom"))
      .def_readonly("id", &Prediction::id)
      .def_readonly("top", &Prediction::top)
      .def_readonly("bottom", &Prediction::bottom)
      .def_readonly("converged", &Prediction::converged);
  m.def(
      "decode",
      [](const Model& md, const Sequence& s, const std::string& decoder, double bp_rate, int bp_max_rounds) {
        LoopyBpOptions bp;
        bp.rate = bp_rate;
        bp.max_rounds = bp_max_rounds;
        return decode(md, s, parse_decoder(decoder), bp);
      },
      py::arg("model"), py::arg("sequence"), py::arg("decoder") = "loopy", py::arg("bp_rate") = 1e-4,
      py::arg("bp_max_rounds") = 100);
  m.def(
      "_evaluate",
      [](const std::vector<Prediction>& preds, const std::vector<Sequence>& truth) {
        return metrics_to_json(evaluate(preds, truth));
      },
      py::arg("predictions"), py::arg("truth"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"mrforest"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : full) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
