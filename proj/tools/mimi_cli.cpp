// mimi: fit, impute, cross-validate, simulate and reproduce from the shell.
//
// Exit codes: 0 converged, 1 usage or input error, 2 finished without
// converging (results are still written).

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mimi/bcgd.hpp"
#include "mimi/dictionary.hpp"
#include "mimi/experiments.hpp"
#include "mimi/mdf.hpp"
#include "mimi/selection.hpp"
#include "mimi/simulate.hpp"
#include "mimi/table.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kConverged = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mimi::InvalidInput("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw mimi::InvalidInput("malformed JSON in " + path + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw mimi::Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_matrix(const fs::path& path, const mimi::Matrix& A) {
  std::ofstream out(path);
  if (!out) throw mimi::Error("cannot write " + path.string());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) out << (j ? "," : "") << mimi::format_double(A(i, j));
    out << '\n';
  }
}

void write_vector(const fs::path& path, const mimi::Vector& v) {
  std::ofstream out(path);
  if (!out) throw mimi::Error("cannot write " + path.string());
  out << "index,value\n";
  for (Eigen::Index k = 0; k < v.size(); ++k) out << k << ',' << mimi::format_double(v(k)) << '\n';
}

// Inputs shared by fit, impute and cv.
struct DataArgs {
  std::string data;
  std::string schema;
  std::string dict;
  std::string config;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--data", data, "CSV file with NA for missing cells")->required()->check(CLI::ExistingFile);
    cmd->add_option("--schema", schema, "column types as JSON")->check(CLI::ExistingFile);
    cmd->add_option("--dict", dict, "dictionary as JSON (default: no main effects)")->check(CLI::ExistingFile);
    cmd->add_option("--config", config, "solver options as JSON")->check(CLI::ExistingFile);
  }
};

struct Loaded {
  mimi::MixedDataFrame data;
  mimi::Links links;
  mimi::Dictionary dict;
  mimi::SolverConfig config;
};

Loaded load(const DataArgs& a) {
  std::optional<mimi::Schema> schema;
  if (!a.schema.empty()) schema = mimi::read_schema(a.schema);
  mimi::MixedDataFrame data = mimi::read_csv(fs::path(a.data), schema);
  mimi::Links links = data.links();
  mimi::Dictionary dict = a.dict.empty() ? mimi::Dictionary::none(data.rows(), data.cols())
                                         : mimi::read_dictionary(a.dict, data.rows(), data.cols());
  mimi::SolverConfig config;
  if (!a.config.empty()) config = mimi::solver_config_from_json(read_json(a.config));
  return {std::move(data), std::move(links), std::move(dict), config};
}

int run_fit(const DataArgs& a, double lambda1, double lambda2, const std::string& out_dir) {
  Loaded in = load(a);
  in.config.lambda1 = lambda1;
  in.config.lambda2 = lambda2;
  const mimi::ModelFit m = mimi::fit(in.data, in.links, in.dict, in.config);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  write_json(dir / "fit_report.json", mimi::fit_report(m));
  write_vector(dir / "alpha.csv", m.alpha_hat);
  write_matrix(dir / "L.csv", m.L_hat);
  std::cout << "objective " << m.objective_trace.back() << " after " << m.n_iter << " iterations"
            << (m.converged ? "" : " (not converged)") << '\n';
  return m.converged ? kConverged : kNotConverged;
}

mimi::CVReport run_cv_report(const Loaded& in, int n1, int n2, int folds, std::uint64_t seed, int threads) {
  const mimi::LambdaGrid grid = mimi::default_grid(in.data, in.links, in.dict, n1, n2);
  return mimi::cross_validate(in.data, in.links, in.dict, grid, folds, seed, in.config, threads);
}

int run_impute(const DataArgs& a, std::optional<double> lambda1, std::optional<double> lambda2, bool auto_lambda,
               int folds, std::uint64_t seed, bool round_binary, const std::string& out, int threads) {
  Loaded in = load(a);
  if (auto_lambda) {
    const mimi::CVReport cv = run_cv_report(in, 4, 4, folds, seed, threads);
    in.config.lambda1 = cv.best().lambda1;
    in.config.lambda2 = cv.best().lambda2;
    std::cerr << "cross-validation chose lambda1 = " << in.config.lambda1 << ", lambda2 = " << in.config.lambda2
              << '\n';
  } else {
    if (!lambda1 || !lambda2) throw mimi::InvalidInput("give --lambda1 and --lambda2, or --auto-lambda");
    in.config.lambda1 = *lambda1;
    in.config.lambda2 = *lambda2;
  }
  const mimi::ModelFit m = mimi::fit(in.data, in.links, in.dict, in.config);
  mimi::write_csv(mimi::impute(m, in.data, in.links, round_binary), fs::path(out));
  return m.converged ? kConverged : kNotConverged;
}

int run_cv(const DataArgs& a, int n1, int n2, int folds, std::uint64_t seed, const std::string& out_json,
           const std::string& out_csv, int threads) {
  const Loaded in = load(a);
  const mimi::CVReport cv = run_cv_report(in, n1, n2, folds, seed, threads);
  write_json(out_json, mimi::cv_report_json(cv));
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw mimi::Error("cannot write " + out_csv);
    mimi::write_cv_csv(cv, out);
  }
  std::cout << "chosen lambda1 " << cv.best().lambda1 << " lambda2 " << cv.best().lambda2 << " error "
            << cv.best().mean_error << '\n';
  return kConverged;
}

int run_simulate(mimi::SimDesign design, const std::string& out_dir) {
  design.validate();
  const mimi::Dictionary dict = mimi::design_dictionary(design);
  const mimi::Links links = mimi::design_links(design);
  const mimi::GroundTruth truth = mimi::gen_ground_truth(design);
  const mimi::SimData sim = mimi::gen_observations(truth.X, design, links);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  mimi::write_csv(sim.data, dir / "data.csv");
  mimi::write_csv(sim.data.completed(sim.complete), dir / "complete.csv");
  write_json(dir / "schema.json", mimi::schema_to_json(sim.data));
  write_json(dir / "dictionary.json", mimi::dictionary_to_json(dict));
  write_json(dir / "design.json", mimi::to_json(design));
  write_vector(dir / "alpha0.csv", truth.alpha);
  write_matrix(dir / "L0.csv", truth.L);
  return kConverged;
}

int run_reproduce(const std::string& study, const std::string& out_dir, std::optional<std::uint64_t> seed,
                  std::optional<int> reps, const std::string& manifest, int threads) {
  json params = manifest.empty() ? json::object() : read_json(manifest);
  if (params.contains("parameters")) params = params["parameters"];
  if (seed) params["seed"] = *seed;
  if (reps) params["n_reps"] = *reps;
  params["threads"] = threads;
  mimi::StudyOutput out;
  if (study == "estimation")
    out = mimi::run_estimation_study(mimi::estimation_study_from_json(params));
  else if (study == "imputation")
    out = mimi::run_imputation_study(mimi::imputation_study_from_json(params));
  else
    out = mimi::run_rate_study(mimi::rate_study_from_json(params));
  out.write(out_dir);
  std::cout << "wrote " << out.rows.size() << " rows to " << out_dir << '\n';
  return kConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Main effects and interactions in mixed and incomplete data frames"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

  DataArgs fit_args;
  double lambda1 = 0.0, lambda2 = 0.0;
  std::string fit_out = ".";
  auto* fit_cmd = app.add_subcommand("fit", "fit the model and write a report with alpha and L");
  fit_args.add_to(fit_cmd);
  fit_cmd->add_option("--lambda1", lambda1, "nuclear-norm penalty")->required()->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--lambda2", lambda2, "l1 penalty on main effects")->required()->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--out", fit_out, "output directory");

  DataArgs imp_args;
  std::optional<double> imp_l1, imp_l2;
  bool auto_lambda = false, round_binary = false;
  int imp_folds = 5;
  std::uint64_t imp_seed = 1;
  std::string imp_out;
  auto* imp_cmd = app.add_subcommand("impute", "fill missing cells with predicted means");
  imp_args.add_to(imp_cmd);
  imp_cmd->add_option("--lambda1", imp_l1)->check(CLI::NonNegativeNumber);
  imp_cmd->add_option("--lambda2", imp_l2)->check(CLI::NonNegativeNumber);
  imp_cmd->add_flag("--auto-lambda", auto_lambda, "choose penalties by cross-validation");
  imp_cmd->add_option("--folds", imp_folds)->check(CLI::Range(2, 100));
  imp_cmd->add_option("--seed", imp_seed);
  imp_cmd->add_flag("--round-binary", round_binary, "round binary probabilities at 0.5");
  imp_cmd->add_option("--out", imp_out, "completed CSV")->required();

  DataArgs cv_args;
  int n1 = 4, n2 = 4, cv_folds = 5;
  std::uint64_t cv_seed = 1;
  std::string cv_json = "cv_report.json", cv_csv;
  auto* cv_cmd = app.add_subcommand("cv", "cross-validate over the default penalty grid");
  cv_args.add_to(cv_cmd);
  cv_cmd->add_option("--n1", n1, "lambda1 grid size")->check(CLI::PositiveNumber);
  cv_cmd->add_option("--n2", n2, "lambda2 grid size")->check(CLI::PositiveNumber);
  cv_cmd->add_option("--folds", cv_folds)->check(CLI::Range(2, 100));
  cv_cmd->add_option("--seed", cv_seed);
  cv_cmd->add_option("--out", cv_json, "report JSON");
  cv_cmd->add_option("--csv", cv_csv, "flat lambda1,lambda2,fold,error CSV");

  mimi::SimDesign design;
  std::string design_file, layout, sim_out = ".";
  std::optional<long> m1, m2, s, r;
  std::optional<double> p_obs, ratio;
  std::optional<std::uint64_t> sim_seed;
  auto* sim_cmd = app.add_subcommand("simulate", "draw a synthetic data frame with known effects");
  sim_cmd->add_option("--design", design_file, "design JSON; flags below override it")->check(CLI::ExistingFile);
  sim_cmd->add_option("--m1", m1);
  sim_cmd->add_option("--m2", m2);
  sim_cmd->add_option("--s", s);
  sim_cmd->add_option("--r", r);
  sim_cmd->add_option("--p-obs", p_obs);
  sim_cmd->add_option("--ratio", ratio);
  sim_cmd->add_option("--layout", layout)->check(CLI::IsMember({"numeric", "mixed"}));
  sim_cmd->add_option("--seed", sim_seed);
  sim_cmd->add_option("--out", sim_out, "output directory");

  std::string study, rep_out, rep_manifest;
  std::optional<std::uint64_t> rep_seed;
  std::optional<int> rep_reps;
  auto* rep_cmd = app.add_subcommand("reproduce", "run a simulation study");
  rep_cmd->add_option("--study", study)->required()->check(CLI::IsMember({"estimation", "imputation", "rates"}));
  rep_cmd->add_option("--out", rep_out, "output directory")->required();
  rep_cmd->add_option("--seed", rep_seed);
  rep_cmd->add_option("--reps", rep_reps)->check(CLI::PositiveNumber);
  rep_cmd->add_option("--manifest", rep_manifest, "study parameters or a previous manifest.json")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kConverged : kInputError;
  }

  try {
    if (*fit_cmd) return run_fit(fit_args, lambda1, lambda2, fit_out);
    if (*imp_cmd)
      return run_impute(imp_args, imp_l1, imp_l2, auto_lambda, imp_folds, imp_seed, round_binary, imp_out, threads);
    if (*cv_cmd) return run_cv(cv_args, n1, n2, cv_folds, cv_seed, cv_json, cv_csv, threads);
    if (*sim_cmd) {
      json j = design_file.empty() ? json::object() : read_json(design_file);
      if (m1) j["m1"] = *m1;
      if (m2) j["m2"] = *m2;
      if (s) j["s"] = *s;
      if (r) j["r"] = *r;
      if (p_obs) j["p_obs"] = *p_obs;
      if (ratio) j["ratio"] = *ratio;
      if (!layout.empty()) j["layout"] = layout;
      if (sim_seed) j["seed"] = *sim_seed;
      return run_simulate(mimi::sim_design_from_json(j), sim_out);
    }
    return run_reproduce(study, rep_out, rep_seed, rep_reps, rep_manifest, threads);
  } catch (const mimi::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const json::exception& e) {
    std::cerr << "error: bad JSON value: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kInputError;
}
