#include "mimi/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <string>

#include "mimi/selection.hpp"

namespace mimi {

namespace fs = std::filesystem;

nlohmann::json to_json(const LambdaPolicy& p) {
  return {{"mode", p.mode == LambdaPolicy::Mode::Scaled ? "scaled" : "cv"},
          {"c1", p.c1},
          {"c2", p.c2},
          {"comparator_scale", p.comparator_scale},
          {"n_folds", p.n_folds},
          {"grid_n1", p.grid_n1},
          {"grid_n2", p.grid_n2}};
}

LambdaPolicy lambda_policy_from_json(const nlohmann::json& j, LambdaPolicy p) {
  if (!j.is_object()) throw InvalidInput("lambda policy must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "mode") {
      const auto s = value.get<std::string>();
      if (s == "scaled") p.mode = LambdaPolicy::Mode::Scaled;
      else if (s == "cv") p.mode = LambdaPolicy::Mode::CrossValidated;
      else throw InvalidInput("lambda mode must be 'scaled' or 'cv'");
    } else if (key == "c1") p.c1 = value.get<double>();
    else if (key == "c2") p.c2 = value.get<double>();
    else if (key == "comparator_scale") p.comparator_scale = value.get<double>();
    else if (key == "n_folds") p.n_folds = value.get<int>();
    else if (key == "grid_n1") p.grid_n1 = value.get<int>();
    else if (key == "grid_n2") p.grid_n2 = value.get<int>();
    else throw InvalidInput("unknown lambda policy field '" + key + "'");
  }
  return p;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Replicate seeds depend on the replicate only, so every cell of a study sees
// the same draws (nested masks across p_obs, common noise across designs).
std::uint64_t replicate_seed(std::uint64_t study_seed, int rep) {
  return splitmix(splitmix(study_seed) ^ static_cast<std::uint64_t>(rep));
}

std::string config_hash(const SolverConfig& c) { return fnv1a_hex(to_json(c).dump()); }

struct Penalties {
  double lambda1;
  double lambda2;
  double comparator;
};

Penalties choose_penalties(const MixedDataFrame& data, const Links& links, const Dictionary& dict,
                           const LambdaPolicy& policy, const SolverConfig& solver, std::uint64_t seed) {
  if (policy.mode == LambdaPolicy::Mode::Scaled) {
    const ScaledLambdas s = scaled_lambdas(data, links, dict, policy.c1, policy.c2);
    return {s.lambda1, s.lambda2, policy.comparator_scale * s.lambda1};
  }
  const LambdaGrid grid = default_grid(data, links, dict, policy.grid_n1, policy.grid_n2);
  const CVReport cv = cross_validate(data, links, dict, grid, policy.n_folds, seed, solver);
  return {cv.best().lambda1, cv.best().lambda2, policy.comparator_scale * cv.best().lambda1};
}

ModelFit fit_with(const MixedDataFrame& data, const Links& links, const Dictionary& dict, SolverConfig solver,
                  const Penalties& pen) {
  solver.lambda1 = pen.lambda1;
  solver.lambda2 = pen.lambda2;
  return fit(data, links, dict, solver);
}

// Squared error of natural-scale predictions on hidden cells, split by type.
std::pair<double, double> hidden_by_type(const Matrix& imputed, const SimData& sim) {
  double sn = 0.0, sb = 0.0;
  long nn = 0, nb = 0;
  for (Eigen::Index j = 0; j < imputed.cols(); ++j) {
    const bool binary = sim.data.column(j).type == ColumnType::Binary;
    for (Eigen::Index i = 0; i < imputed.rows(); ++i) {
      if (sim.data.observed(i, j)) continue;
      const double r = imputed(i, j) - sim.complete(i, j);
      (binary ? sb : sn) += r * r;
      ++(binary ? nb : nn);
    }
  }
  return {nn ? sn / static_cast<double>(nn) : 0.0, nb ? sb / static_cast<double>(nb) : 0.0};
}

// Replicate rows are (keys, method, metrics); metric columns follow "method".
struct Record {
  std::vector<std::string> keys;
  std::string method;
  std::vector<double> metrics;
  bool converged = true;
  int n_iter = 0;
};

ResultTable assemble_rows(const std::vector<std::string>& key_names, const std::vector<std::string>& metric_names,
                          const std::vector<std::vector<Record>>& per_task) {
  std::vector<std::string> header = key_names;
  header.push_back("method");
  header.insert(header.end(), metric_names.begin(), metric_names.end());
  header.push_back("converged");
  header.push_back("n_iter");
  ResultTable t(header);
  for (const auto& task : per_task)
    for (const auto& r : task) {
      std::vector<std::string> row = r.keys;
      row.push_back(r.method);
      for (double v : r.metrics) row.push_back(format_double(v));
      row.push_back(r.converged ? "1" : "0");
      row.push_back(std::to_string(r.n_iter));
      t.add_row(std::move(row));
    }
  return t;
}

// Median and quartiles per (cell keys, method). `cell_keys` are the indices of
// the key columns identifying a cell (replicate-specific keys excluded).
ResultTable summarize(const std::vector<std::string>& key_names, const std::vector<std::size_t>& cell_keys,
                      const std::vector<std::string>& metric_names,
                      const std::vector<std::vector<Record>>& per_task) {
  std::vector<std::string> header;
  for (std::size_t k : cell_keys) header.push_back(key_names[k]);
  header.push_back("method");
  header.push_back("n_reps");
  for (const auto& m : metric_names) {
    header.push_back(m + "_median");
    header.push_back(m + "_q25");
    header.push_back(m + "_q75");
  }
  ResultTable t(header);
  std::vector<std::vector<std::string>> order;
  std::map<std::vector<std::string>, std::vector<std::vector<double>>> groups;
  for (const auto& task : per_task)
    for (const auto& r : task) {
      std::vector<std::string> id;
      for (std::size_t k : cell_keys) id.push_back(r.keys[k]);
      id.push_back(r.method);
      auto [it, fresh] = groups.try_emplace(id, metric_names.size());
      if (fresh) order.push_back(id);
      for (std::size_t m = 0; m < metric_names.size(); ++m) it->second[m].push_back(r.metrics[m]);
    }
  for (const auto& id : order) {
    const auto& values = groups.at(id);
    std::vector<std::string> row = id;
    row.push_back(std::to_string(values.front().size()));
    for (const auto& v : values) {
      row.push_back(format_double(median(v)));
      row.push_back(format_double(quantile(v, 0.25)));
      row.push_back(format_double(quantile(v, 0.75)));
    }
    t.add_row(std::move(row));
  }
  return t;
}

std::vector<std::string> design_keys(const SimDesign& d, const std::string& hash) {
  return {std::to_string(d.m1),        std::to_string(d.m2),  std::to_string(d.n_groups),
          std::to_string(d.s),         std::to_string(d.r),   format_double(d.p_obs),
          format_double(std::round((1.0 - d.p_obs) * 1e12) / 1e12), format_double(d.ratio), d.layout == ColumnLayout::AllNumeric ? "numeric" : "mixed",
          format_double(d.max_abs),    std::to_string(d.seed), hash};
}

const std::vector<std::string> kDesignKeyNames{"m1",    "m2",     "n_groups", "s",       "r",    "p_obs",
                                               "missing_frac", "ratio", "layout", "max_abs", "seed", "config_hash"};

template <class T>
std::vector<T> get_list(const nlohmann::json& v) {
  return v.get<std::vector<T>>();
}

void check_reps(int n_reps, int threads) {
  if (n_reps < 1) throw InvalidInput("n_reps must be at least 1");
  if (threads < 0) throw InvalidInput("threads must be nonnegative");
}

nlohmann::json manifest_base(const char* study, const nlohmann::json& body, const SolverConfig& solver) {
  return {{"study", study},
          {"parameters", body},
          {"config_hash", config_hash(solver)},
          {"missing_convention", "p_obs is the observation probability; missing_frac = 1 - p_obs"}};
}

}  // namespace

nlohmann::json to_json(const EstimationStudy& s) {
  return {{"m1", s.m1},         {"m2", s.m2},       {"n_groups", s.n_groups}, {"s_list", s.s_list},
          {"r_list", s.r_list}, {"p_obs", s.p_obs}, {"ratio", s.ratio}, {"max_abs", s.max_abs}, {"n_reps", s.n_reps},     {"seed", s.seed},
          {"lambdas", to_json(s.lambdas)}, {"solver", to_json(s.solver)}};
}

nlohmann::json to_json(const ImputationStudy& s) {
  return {{"m1", s.m1},
          {"m2", s.m2},
          {"n_groups", s.n_groups},
          {"s", s.s},
          {"r", s.r},
          {"missing_fracs", s.missing_fracs},
          {"ratios", s.ratios},
          {"max_abs", s.max_abs},
          {"n_reps", s.n_reps},
          {"seed", s.seed},
          {"lambdas", to_json(s.lambdas)},
          {"solver", to_json(s.solver)}};
}

nlohmann::json to_json(const RateStudy& s) {
  return {{"sizes", s.sizes},
          {"m2", s.m2},
          {"n_groups", s.n_groups},
          {"s", s.s},
          {"r", s.r},
          {"p_obs", s.p_obs},
          {"ratio", s.ratio},
          {"max_abs", s.max_abs},
          {"halving_sizes", s.halving_sizes},
          {"n_reps", s.n_reps},
          {"n_bootstrap", s.n_bootstrap},
          {"seed", s.seed},
          {"lambdas", to_json(s.lambdas)},
          {"solver", to_json(s.solver)}};
}

EstimationStudy estimation_study_from_json(const nlohmann::json& j) {
  EstimationStudy s;
  for (const auto& [key, v] : j.items()) {
    if (key == "m1") s.m1 = v.get<Eigen::Index>();
    else if (key == "m2") s.m2 = v.get<Eigen::Index>();
    else if (key == "n_groups") s.n_groups = v.get<int>();
    else if (key == "s_list") s.s_list = get_list<Eigen::Index>(v);
    else if (key == "r_list") s.r_list = get_list<Eigen::Index>(v);
    else if (key == "p_obs") s.p_obs = v.get<double>();
    else if (key == "ratio") s.ratio = v.get<double>();
    else if (key == "max_abs") s.max_abs = v.get<double>();
    else if (key == "n_reps") s.n_reps = v.get<int>();
    else if (key == "seed") s.seed = v.get<std::uint64_t>();
    else if (key == "lambdas") s.lambdas = lambda_policy_from_json(v);
    else if (key == "solver") s.solver = solver_config_from_json(v);
    else if (key == "threads") s.threads = v.get<int>();
    else if (key != "study") throw InvalidInput("unknown estimation study field '" + key + "'");
  }
  return s;
}

ImputationStudy imputation_study_from_json(const nlohmann::json& j) {
  ImputationStudy s;
  for (const auto& [key, v] : j.items()) {
    if (key == "m1") s.m1 = v.get<Eigen::Index>();
    else if (key == "m2") s.m2 = v.get<Eigen::Index>();
    else if (key == "n_groups") s.n_groups = v.get<int>();
    else if (key == "s") s.s = v.get<Eigen::Index>();
    else if (key == "r") s.r = v.get<Eigen::Index>();
    else if (key == "missing_fracs") s.missing_fracs = get_list<double>(v);
    else if (key == "ratios") s.ratios = get_list<double>(v);
    else if (key == "max_abs") s.max_abs = v.get<double>();
    else if (key == "n_reps") s.n_reps = v.get<int>();
    else if (key == "seed") s.seed = v.get<std::uint64_t>();
    else if (key == "lambdas") s.lambdas = lambda_policy_from_json(v);
    else if (key == "solver") s.solver = solver_config_from_json(v);
    else if (key == "threads") s.threads = v.get<int>();
    else if (key != "study") throw InvalidInput("unknown imputation study field '" + key + "'");
  }
  return s;
}

RateStudy rate_study_from_json(const nlohmann::json& j) {
  RateStudy s;
  for (const auto& [key, v] : j.items()) {
    if (key == "sizes") s.sizes = get_list<Eigen::Index>(v);
    else if (key == "m2") s.m2 = v.get<Eigen::Index>();
    else if (key == "n_groups") s.n_groups = v.get<int>();
    else if (key == "s") s.s = v.get<Eigen::Index>();
    else if (key == "r") s.r = v.get<Eigen::Index>();
    else if (key == "p_obs") s.p_obs = v.get<double>();
    else if (key == "ratio") s.ratio = v.get<double>();
    else if (key == "max_abs") s.max_abs = v.get<double>();
    else if (key == "halving_sizes") s.halving_sizes = get_list<Eigen::Index>(v);
    else if (key == "n_reps") s.n_reps = v.get<int>();
    else if (key == "n_bootstrap") s.n_bootstrap = v.get<int>();
    else if (key == "seed") s.seed = v.get<std::uint64_t>();
    else if (key == "lambdas") s.lambdas = lambda_policy_from_json(v);
    else if (key == "solver") s.solver = solver_config_from_json(v);
    else if (key == "threads") s.threads = v.get<int>();
    else if (key != "study") throw InvalidInput("unknown rate study field '" + key + "'");
  }
  return s;
}

void StudyOutput::write(const fs::path& dir) const {
  fs::create_directories(dir);
  rows.write_csv(dir / "rows.csv");
  summary.write_csv(dir / "summary.csv");
  long_format().write_csv(dir / "long.csv");
  if (slopes.size() > 0) slopes.write_csv(dir / "slopes.csv");
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

ResultTable StudyOutput::long_format() const {
  const auto& h = rows.header();
  const auto method = std::find(h.begin(), h.end(), "method");
  if (method == h.end()) throw InvalidInput("result rows have no method column");
  const std::size_t mcol = static_cast<std::size_t>(method - h.begin());
  std::vector<std::string> header{"row"};
  header.insert(header.end(), h.begin(), h.begin() + static_cast<std::ptrdiff_t>(mcol) + 1);
  header.push_back("metric");
  header.push_back("value");
  ResultTable t(header);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows.rows()[r];
    for (std::size_t c = mcol + 1; c < h.size(); ++c) {
      std::vector<std::string> line{std::to_string(r)};
      line.insert(line.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(mcol) + 1);
      line.push_back(h[c]);
      line.push_back(row[c]);
      t.add_row(std::move(line));
    }
  }
  return t;
}

namespace {

const std::vector<std::string> kErrorMetricNames{"err_alpha", "err_fU", "err_L", "imputation_mse",
                                                 "imputation_error", "lambda1", "lambda2"};

std::vector<double> metric_values(const ErrorMetrics& e, double l1, double l2) {
  return {e.err_alpha, e.err_fU, e.err_L, e.imputation_mse, e.imputation_error, l1, l2};
}

}  // namespace

StudyOutput run_estimation_study(const EstimationStudy& study) {
  check_reps(study.n_reps, study.threads);
  study.solver.validate();
  const std::string hash = config_hash(study.solver);
  struct Task {
    SimDesign design;
    int rep;
  };
  std::vector<Task> tasks;
  for (Eigen::Index s : study.s_list)
    for (Eigen::Index r : study.r_list)
      for (int rep = 0; rep < study.n_reps; ++rep) {
        SimDesign d;
        d.m1 = study.m1;
        d.m2 = study.m2;
        d.n_groups = study.n_groups;
        d.s = s;
        d.r = r;
        d.p_obs = study.p_obs;
        d.ratio = study.ratio;
        d.max_abs = study.max_abs;
        d.seed = replicate_seed(study.seed, rep);
        d.validate();
        tasks.push_back({d, rep});
      }

  std::vector<std::vector<Record>> out(tasks.size());
  parallel_for(tasks.size(), study.threads, [&](std::size_t t) {
    const SimDesign& d = tasks[t].design;
    const Dictionary dict = design_dictionary(d);
    const Links links = design_links(d);
    const GroundTruth truth = gen_ground_truth(d);
    const SimData sim = gen_observations(truth.X, d, links);
    const Penalties pen = choose_penalties(sim.data, links, dict, study.lambdas, study.solver, d.seed);

    auto keys = design_keys(d, hash);
    keys.push_back(std::to_string(tasks[t].rep));
    const ModelFit m = fit_with(sim.data, links, dict, study.solver, pen);
    out[t].push_back({keys, "mimi", metric_values(error_metrics(m, dict, links, truth, sim), pen.lambda1, pen.lambda2),
                      m.converged, m.n_iter});
    const ModelFit b = baseline_group_mean_then_svt(sim.data, dict, pen.comparator);
    out[t].push_back({keys, "groupmean_svt",
                      metric_values(error_metrics(b.alpha_hat, b.L_hat, b.X_hat, dict, truth, sim), pen.comparator, 0.0),
                      true, 0});
  });

  auto key_names = kDesignKeyNames;
  key_names.push_back("rep");
  StudyOutput o;
  o.rows = assemble_rows(key_names, kErrorMetricNames, out);
  o.summary = summarize(key_names, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 11}, kErrorMetricNames, out);
  o.manifest = manifest_base("estimation", to_json(study), study.solver);
  return o;
}

StudyOutput run_imputation_study(const ImputationStudy& study) {
  check_reps(study.n_reps, study.threads);
  study.solver.validate();
  const std::string hash = config_hash(study.solver);
  struct Task {
    SimDesign design;
    int rep;
  };
  std::vector<Task> tasks;
  for (double ratio : study.ratios)
    for (double miss : study.missing_fracs)
      for (int rep = 0; rep < study.n_reps; ++rep) {
        SimDesign d;
        d.m1 = study.m1;
        d.m2 = study.m2;
        d.n_groups = study.n_groups;
        d.s = study.s;
        d.r = study.r;
        d.p_obs = 1.0 - miss;
        d.ratio = ratio;
        d.max_abs = study.max_abs;
        d.layout = ColumnLayout::MixedGaussianBernoulli;
        d.seed = replicate_seed(study.seed, rep);
        d.validate();
        tasks.push_back({d, rep});
      }

  const std::vector<std::string> metric_names{"imputation_mse", "imputation_error", "numeric_mse", "binary_mse",
                                              "err_alpha",      "err_L",            "lambda1",     "lambda2"};
  std::vector<std::vector<Record>> out(tasks.size());
  parallel_for(tasks.size(), study.threads, [&](std::size_t t) {
    const SimDesign& d = tasks[t].design;
    const Dictionary dict = design_dictionary(d);
    const Links links = design_links(d);
    const GroundTruth truth = gen_ground_truth(d);
    const SimData sim = gen_observations(truth.X, d, links);
    const Penalties pen = choose_penalties(sim.data, links, dict, study.lambdas, study.solver, d.seed);
    auto keys = design_keys(d, hash);
    keys.push_back(std::to_string(tasks[t].rep));

    auto record = [&](const std::string& method, const Vector& a, const Matrix& L, const Matrix& imputed, double l1,
                      double l2, bool converged, int n_iter) {
      const ErrorMetrics e = error_metrics(a, L, imputed, dict, truth, sim);
      const auto [num, bin] = hidden_by_type(imputed, sim);
      out[t].push_back({keys, method, {e.imputation_mse, e.imputation_error, num, bin, e.err_alpha, e.err_L, l1, l2},
                        converged, n_iter});
    };

    const ModelFit m = fit_with(sim.data, links, dict, study.solver, pen);
    record("mimi", m.alpha_hat, m.L_hat, predicted_means(m.X_hat, links), pen.lambda1, pen.lambda2, m.converged,
           m.n_iter);
    const Matrix means = column_mean_impute(sim.data);
    record("column_mean", Vector::Zero(dict.size()), Matrix::Zero(d.m1, d.m2), means, 0.0, 0.0, true, 0);
    const ModelFit b = baseline_group_mean_then_svt(sim.data, dict, pen.comparator);
    record("groupmean_svt", b.alpha_hat, b.L_hat, b.X_hat, pen.comparator, 0.0, true, 0);
  });

  auto key_names = kDesignKeyNames;
  key_names.push_back("rep");
  StudyOutput o;
  o.rows = assemble_rows(key_names, metric_names, out);
  o.summary = summarize(key_names, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 11}, metric_names, out);
  o.manifest = manifest_base("imputation", to_json(study), study.solver);
  return o;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("slope needs at least two paired points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidInput("log-log slope needs positive values");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw InvalidInput("slope needs at least two distinct x values");
  return sxy / sxx;
}

StudyOutput run_rate_study(const RateStudy& study) {
  check_reps(study.n_reps, study.threads);
  study.solver.validate();
  if (study.sizes.size() < 2) throw InvalidInput("rate study needs at least two sizes");
  if (study.n_bootstrap < 0) throw InvalidInput("n_bootstrap must be nonnegative");
  const std::string hash = config_hash(study.solver);
  struct Task {
    SimDesign design;
    int rep;
    bool halved;
  };
  std::vector<Task> tasks;
  auto add = [&](Eigen::Index M, double p, bool halved) {
    for (int rep = 0; rep < study.n_reps; ++rep) {
      SimDesign d;
      d.m1 = M;
      d.m2 = study.m2;
      d.n_groups = study.n_groups;
      d.s = study.s;
      d.r = study.r;
      d.p_obs = p;
      d.ratio = study.ratio;
      d.max_abs = study.max_abs;
      d.seed = replicate_seed(study.seed, rep);
      d.validate();
      tasks.push_back({d, rep, halved});
    }
  };
  for (Eigen::Index M : study.sizes) add(M, study.p_obs, false);
  for (Eigen::Index M : study.halving_sizes) add(M, 0.5 * study.p_obs, true);

  std::vector<std::vector<Record>> out(tasks.size());
  parallel_for(tasks.size(), study.threads, [&](std::size_t t) {
    const SimDesign& d = tasks[t].design;
    const Dictionary dict = design_dictionary(d);
    const Links links = design_links(d);
    const GroundTruth truth = gen_ground_truth(d);
    const SimData sim = gen_observations(truth.X, d, links);
    const Penalties pen = choose_penalties(sim.data, links, dict, study.lambdas, study.solver, d.seed);
    auto keys = design_keys(d, hash);
    keys.push_back(std::to_string(tasks[t].rep));
    keys.push_back(tasks[t].halved ? "1" : "0");
    const ModelFit m = fit_with(sim.data, links, dict, study.solver, pen);
    out[t].push_back({keys, "mimi", metric_values(error_metrics(m, dict, links, truth, sim), pen.lambda1, pen.lambda2),
                      m.converged, m.n_iter});
  });

  auto key_names = kDesignKeyNames;
  key_names.push_back("rep");
  key_names.push_back("halved");
  StudyOutput o;
  o.rows = assemble_rows(key_names, kErrorMetricNames, out);
  o.summary = summarize(key_names, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 11, 13}, kErrorMetricNames, out);

  // per size: replicate values of err_L and err_alpha at the base p_obs
  const std::size_t n_sizes = study.sizes.size();
  const auto reps = static_cast<std::size_t>(study.n_reps);
  std::vector<double> x(n_sizes);
  std::vector<std::vector<double>> errL(n_sizes), errA(n_sizes);
  for (std::size_t k = 0; k < n_sizes; ++k) {
    x[k] = static_cast<double>(study.sizes[k]);
    for (std::size_t r = 0; r < reps; ++r) {
      const Record& rec = out[k * reps + r].front();
      errA[k].push_back(rec.metrics[0]);
      errL[k].push_back(rec.metrics[2]);
    }
  }
  auto slope_of = [&](const std::vector<std::vector<double>>& v) {
    std::vector<double> y;
    for (const auto& reps_v : v) y.push_back(median(reps_v));
    return log_log_slope(x, y);
  };
  std::mt19937_64 boot(splitmix(study.seed ^ 0xB007ULL));
  auto interval = [&](const std::vector<std::vector<double>>& v) -> std::pair<double, double> {
    if (study.n_bootstrap == 0) return {std::nan(""), std::nan("")};
    std::uniform_int_distribution<std::size_t> pick(0, reps - 1);
    std::vector<double> slopes;
    for (int b = 0; b < study.n_bootstrap; ++b) {
      std::vector<double> y;
      for (const auto& reps_v : v) {
        std::vector<double> resample(reps);
        for (auto& e : resample) e = reps_v[pick(boot)];
        y.push_back(median(resample));
      }
      slopes.push_back(log_log_slope(x, y));
    }
    return {quantile(slopes, 0.025), quantile(slopes, 0.975)};
  };

  o.slopes = ResultTable({"quantity", "estimate", "ci_low", "ci_high", "config_hash"});
  const double sL = slope_of(errL), sA = slope_of(errA);
  const auto ciL = interval(errL);
  const auto ciA = interval(errA);
  o.slopes.add_row({"slope_err_L_vs_M", format_double(sL), format_double(ciL.first), format_double(ciL.second), hash});
  o.slopes.add_row({"slope_err_alpha_vs_M", format_double(sA), format_double(ciA.first), format_double(ciA.second),
                    hash});
  for (std::size_t h = 0; h < study.halving_sizes.size(); ++h) {
    const auto pos = std::find(study.sizes.begin(), study.sizes.end(), study.halving_sizes[h]);
    if (pos == study.sizes.end()) continue;
    const std::size_t k = static_cast<std::size_t>(pos - study.sizes.begin());
    std::vector<double> halved;
    for (std::size_t r = 0; r < reps; ++r) halved.push_back(out[(n_sizes + h) * reps + r].front().metrics[2]);
    const double ratio = median(halved) / median(errL[k]);
    o.slopes.add_row({"err_L_ratio_p_halved_M" + std::to_string(study.halving_sizes[h]), format_double(ratio), "",
                      "", hash});
  }
  o.manifest = manifest_base("rates", to_json(study), study.solver);
  return o;
}

}  // namespace mimi
