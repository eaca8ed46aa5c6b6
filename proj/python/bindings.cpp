#include <limits>
#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mimi/bcgd.hpp"
#include "mimi/selection.hpp"
#include "mimi/simulate.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

json parse(const std::string& text) { return text.empty() ? json::object() : json::parse(text); }

mimi::MixedDataFrame frame_from_arrays(const mimi::Matrix& values, const mimi::Mask& mask,
                                       const std::vector<std::string>& names,
                                       const std::vector<std::string>& types) {
  if (names.size() != types.size() || static_cast<Eigen::Index>(names.size()) != values.cols())
    throw mimi::ShapeError("names and types must have one entry per column");
  std::vector<mimi::Column> columns;
  for (std::size_t j = 0; j < names.size(); ++j) {
    const mimi::ColumnType type = mimi::column_type_from_string(types[j]);
    columns.push_back({names[j], type, mimi::default_link(type)});
  }
  return {std::move(columns), values, mask};
}

py::dict fit_dict(const mimi::ModelFit& f) {
  py::dict d;
  d["alpha"] = f.alpha_hat;
  d["L"] = f.L_hat;
  d["X"] = f.X_hat;
  d["objective_trace"] = f.objective_trace;
  d["converged"] = f.converged;
  d["n_iter"] = f.n_iter;
  d["report"] = mimi::fit_report(f).dump();
  return d;
}

mimi::ModelFit run_fit(const mimi::MixedDataFrame& df, const std::string& dictionary,
                       const std::string& config) {
  const mimi::Dictionary dict = mimi::parse_dictionary(parse(dictionary), df.rows(), df.cols());
  const mimi::Links links = df.links();
  return mimi::fit(df, links, dict, mimi::solver_config_from_json(parse(config)));
}

}  // namespace

PYBIND11_MODULE(_mimi, m) {
  auto error = py::register_exception<mimi::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<mimi::InvalidInput>(m, "InvalidInput", error);
  py::register_exception<mimi::ShapeError>(m, "ShapeError", error);
  py::register_exception<mimi::NumericError>(m, "NumericError", error);
  py::register_exception<mimi::IngestionError>(m, "IngestionError", error);
  py::register_exception<mimi::SchemaError>(m, "SchemaError", error);
  py::register_exception<mimi::ConvergenceError>(m, "ConvergenceError", error);
  py::register_exception<mimi::SolverError>(m, "SolverError", error);

  py::class_<mimi::MixedDataFrame>(m, "Frame")
      .def_property_readonly("shape", [](const mimi::MixedDataFrame& df) {
        return py::make_tuple(df.rows(), df.cols());
      })
      .def_property_readonly("names", [](const mimi::MixedDataFrame& df) {
        std::vector<std::string> out;
        for (const auto& c : df.columns()) out.push_back(c.name);
        return out;
      })
      .def_property_readonly("types", [](const mimi::MixedDataFrame& df) {
        std::vector<std::string> out;
        for (const auto& c : df.columns()) out.push_back(mimi::to_string(c.type));
        return out;
      })
      .def_property_readonly("values", [](const mimi::MixedDataFrame& df) {
        return df.filled(std::numeric_limits<double>::quiet_NaN());
      })
      .def_property_readonly("mask", [](const mimi::MixedDataFrame& df) { return df.mask(); })
      .def("to_csv", [](const mimi::MixedDataFrame& df) {
        std::ostringstream out;
        mimi::write_csv(df, out);
        return out.str();
      });

  m.def("frame_from_arrays", &frame_from_arrays, py::arg("values"), py::arg("mask"),
        py::arg("names"), py::arg("types"));
  m.def(
      "read_csv",
      [](const std::string& text, const std::string& schema) {
        std::istringstream in(text);
        if (schema.empty()) return mimi::read_csv(in);
        return mimi::read_csv(in, mimi::parse_schema(json::parse(schema)));
      },
      py::arg("text"), py::arg("schema") = "");

  m.def("lambda_anchors", [](const mimi::MixedDataFrame& df, const std::string& dictionary) {
    const mimi::Dictionary dict = mimi::parse_dictionary(parse(dictionary), df.rows(), df.cols());
    const mimi::Links links = df.links();
    const mimi::LambdaAnchors a = mimi::lambda_anchors(df, links, dict);
    return py::make_tuple(a.lambda1_max, a.lambda2_max);
  });
  m.def("fit", [](const mimi::MixedDataFrame& df, const std::string& dictionary,
                  const std::string& config) { return fit_dict(run_fit(df, dictionary, config)); });
  m.def("impute", [](const mimi::MixedDataFrame& df, const std::string& dictionary,
                     const std::string& config, bool round_binary) {
    const mimi::ModelFit f = run_fit(df, dictionary, config);
    const mimi::Links links = df.links();
    return mimi::impute(f, df, links, round_binary);
  });
  m.def("simulate", [](const std::string& design_json) {
    const mimi::SimDesign design = mimi::sim_design_from_json(parse(design_json));
    const mimi::GroundTruth truth = mimi::gen_ground_truth(design);
    mimi::SimData sim = mimi::gen_observations(truth.X, design, mimi::design_links(design));
    py::dict d;
    d["frame"] = sim.data;
    d["complete"] = sim.complete;
    d["alpha"] = truth.alpha;
    d["L"] = truth.L;
    d["X"] = truth.X;
    d["dictionary"] = mimi::dictionary_to_json(mimi::design_dictionary(design)).dump();
    return d;
  });
}
