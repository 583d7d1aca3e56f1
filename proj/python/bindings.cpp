#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "ghostcde/epv.hpp"
#include "ghostcde/ghost.hpp"
#include "ghostcde/rfcde.hpp"
#include "ghostcde/synth.hpp"
#include "ghostcde/tracking.hpp"
#include "ghostcde/utility.hpp"

namespace py = pybind11;
using namespace ghostcde;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

rfcde::Matrix to_matrix(const Array& a)
{
  if (a.ndim() == 1) {
    return rfcde::Matrix(static_cast<std::size_t>(a.shape(0)), 1,
                         std::vector<double>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() != 2) {
    throw std::invalid_argument("expected a 1D or 2D array");
  }
  return rfcde::Matrix(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                       std::vector<double>(a.data(), a.data() + a.size()));
}

std::span<const double> as_span(const Array& a)
{
  return {a.data(), static_cast<std::size_t>(a.size())};
}

Array to_array(const std::vector<double>& v)
{
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

rfcde::Grid make_grid(const std::vector<std::vector<double>>& axes)
{
  rfcde::Grid g;
  g.axes = axes;
  g.validate();
  return g;
}

PlayDirection direction(const std::string& d)
{
  return parse_direction(d);
}

} // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Random forest conditional densities and ghost-defender evaluation";

  py::class_<rfcde::Forest>(m, "Forest")
    .def_property_readonly("n_train", &rfcde::Forest::n_train)
    .def_property_readonly("n_features", &rfcde::Forest::n_features)
    .def_property_readonly("response_dim", &rfcde::Forest::response_dim)
    .def_property_readonly("n_trees", [](const rfcde::Forest& f) { return f.trees().size(); })
    .def("leaf_weights",
         [](const rfcde::Forest& f, const Array& x) { return to_array(rfcde::leaf_weights(f, as_span(x)).w); },
         py::arg("x"))
    .def(
      "predict_density",
      [](const rfcde::Forest& f, const Array& x, const std::vector<std::vector<double>>& axes,
         std::optional<std::vector<double>> bandwidth, bool normalize) {
        auto d = rfcde::predict_density(f, as_span(x), make_grid(axes), std::move(bandwidth), normalize);
        Array out = to_array(d.values);
        if (axes.size() == 2) {
          out.resize({static_cast<py::ssize_t>(axes[0].size()), static_cast<py::ssize_t>(axes[1].size())});
        }
        return out;
      },
      py::arg("x"), py::arg("axes"), py::arg("bandwidth") = py::none(), py::arg("normalize") = false)
    .def("save",
         [](const rfcde::Forest& f, const std::filesystem::path& p) {
           std::ofstream out(p, std::ios::binary);
           f.save(out);
         })
    .def_static("load",
                [](const std::filesystem::path& p) {
                  std::ifstream in(p, std::ios::binary);
                  if (!in) {
                    throw std::runtime_error("cannot open " + p.string());
                  }
                  return rfcde::Forest::load(in);
                })
    .def("to_json", &rfcde::Forest::to_json);

  m.def(
    "train",
    [](const Array& X, const Array& Y, std::size_t n_trees, std::size_t min_leaf_size,
       std::size_t features_per_split, std::size_t n_basis, std::optional<std::size_t> max_depth,
       bool bootstrap, std::uint64_t seed, unsigned workers) {
      rfcde::ForestConfig c;
      c.n_trees = n_trees;
      c.min_leaf_size = min_leaf_size;
      c.features_per_split = features_per_split;
      c.n_basis = n_basis;
      c.max_depth = max_depth;
      c.bootstrap = bootstrap;
      c.seed = seed;
      c.workers = workers;
      auto x = to_matrix(X);
      auto y = to_matrix(Y);
      py::gil_scoped_release release;
      return rfcde::train(x, y, c);
    },
    py::arg("X"), py::arg("Y"), py::arg("n_trees") = 500, py::arg("min_leaf_size") = 5,
    py::arg("features_per_split") = 0, py::arg("n_basis") = 15, py::arg("max_depth") = py::none(),
    py::arg("bootstrap") = true, py::arg("seed") = 0, py::arg("workers") = 1);

  m.def(
    "weighted_kde",
    [](const Array& responses, const Array& weights, const std::vector<std::vector<double>>& axes,
       const std::vector<double>& bandwidth) {
      const auto y = to_matrix(responses);
      rfcde::SparseWeights w;
      for (py::ssize_t i = 0; i < weights.size(); ++i) {
        if (weights.data()[i] != 0.0) {
          w.rows.push_back(static_cast<std::uint32_t>(i));
          w.weights.push_back(weights.data()[i]);
        }
      }
      return to_array(rfcde::weighted_kde(y, w, make_grid(axes), bandwidth).values);
    },
    py::arg("responses"), py::arg("weights"), py::arg("axes"), py::arg("bandwidth"));

  m.def(
    "yac_grid",
    [](double catch_x_adj) {
      const auto g = build_yac_grid(catch_x_adj);
      return py::make_tuple(to_array(g.yac), std::vector<bool>(g.touchdown.begin(), g.touchdown.end()));
    },
    py::arg("catch_x_adj"), "YAC values and touchdown mask for a catch at catch_x_adj");

  m.def("expected_value",
        [](const Array& density, const Array& utilities) {
          return expected_value(as_span(density), as_span(utilities));
        },
        py::arg("density"), py::arg("utilities"));

  m.def(
    "play_value",
    [](double ending_x_adj, int down, double yards_to_go, double absolute_yardline,
       const std::string& play_direction, std::optional<std::filesystem::path> ep_table) {
      PlayContext ctx;
      ctx.down = down;
      ctx.yards_to_go = yards_to_go;
      ctx.absolute_yardline = absolute_yardline;
      ctx.play_direction = direction(play_direction);
      const auto table = ep_table ? UtilityTable::from_csv(*ep_table) : UtilityTable::fallback();
      return play_value(ending_x_adj, ctx, table);
    },
    py::arg("ending_x_adj"), py::arg("down"), py::arg("yards_to_go"), py::arg("absolute_yardline"),
    py::arg("play_direction"), py::arg("ep_table") = py::none());

  m.def(
    "adjusted_coordinates",
    [](double x, double y, const std::string& play_direction) {
      const auto p = adjusted_coordinates(x, y, direction(play_direction));
      return py::make_tuple(p.x_adj, p.y_adj);
    },
    py::arg("x"), py::arg("y"), py::arg("play_direction"));

  m.def("angular_difference", &angular_difference, py::arg("a"), py::arg("b"));

  m.def(
    "trajectory_weights",
    [](std::pair<double, double> location, std::pair<double, double> receiver, const Array& distances) {
      return to_array(trajectory_weights({location.first, location.second}, {receiver.first, receiver.second},
                                         as_span(distances)));
    },
    py::arg("location"), py::arg("receiver"), py::arg("distances"));

  m.def(
    "sample_trajectories",
    [](const Array& weights, std::size_t B, std::uint64_t seed) {
      Rng rng(seed);
      return sample_trajectories(as_span(weights), B, rng);
    },
    py::arg("weights"), py::arg("B"), py::arg("seed"));

  m.def(
    "write_synthetic_dataset",
    [](const std::filesystem::path& dir, std::size_t n_plays, int weeks, std::uint64_t seed) {
      synth::SynthConfig c;
      c.n_plays = n_plays;
      c.weeks = weeks;
      c.seed = seed;
      const auto data = synth::generate(c);
      synth::write_dataset(dir, data);
      return data.plays.size();
    },
    py::arg("directory"), py::arg("n_plays") = 200, py::arg("weeks") = 5, py::arg("seed") = 1);

  m.def(
    "load_snapshot_features",
    [](const std::filesystem::path& snapshots_csv, const std::vector<std::string>& roles) {
      std::ifstream in(snapshots_csv);
      if (!in) {
        throw std::runtime_error("cannot open " + snapshots_csv.string());
      }
      const auto snaps = read_snapshot_table(in);
      const auto names = feature_names(roles);
      Array X({static_cast<py::ssize_t>(snaps.size()), static_cast<py::ssize_t>(names.size())});
      Array yac(static_cast<py::ssize_t>(snaps.size()));
      for (std::size_t i = 0; i < snaps.size(); ++i) {
        const auto fv = build_feature_vector(snaps[i], roles);
        std::copy(fv.values.begin(), fv.values.end(), X.mutable_data() + i * names.size());
        yac.mutable_data()[i] = snaps[i].observed_yac;
      }
      return py::make_tuple(X, yac, names);
    },
    py::arg("snapshots_csv"), py::arg("roles") = std::vector<std::string>{"rec", "qb", "def1"});
}
