#include "mimi/bcgd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "mimi/linalg.hpp"

namespace mimi {

void SolverConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw InvalidInput(what);
  };
  need(std::isfinite(lambda1) && lambda1 >= 0.0, "lambda1 must be finite and nonnegative");
  need(std::isfinite(lambda2) && lambda2 >= 0.0, "lambda2 must be finite and nonnegative");
  need(std::isfinite(nu) && nu > 0.0, "nu must be positive");
  need(std::isfinite(tau_init) && tau_init > 0.0, "tau_init must be positive");
  need(backtrack > 0.0 && backtrack < 1.0, "backtrack factor must lie in (0, 1)");
  need(slope > 0.0 && slope < 1.0, "Armijo slope must lie in (0, 1)");
  need(theta >= 0.0 && theta < 1.0, "theta must lie in [0, 1)");
  need(rel_tol > 0.0, "rel_tol must be positive");
  need(max_outer >= 1, "max_outer must be at least 1");
  need(min_step > 0.0, "min_step must be positive");
  need(curvature_floor > 0.0, "curvature_floor must be positive");
  need(!clip_box || *clip_box > 0.0, "clip_box must be positive");
  need(lasso.tol > 0.0 && lasso.max_sweeps >= 1, "invalid Lasso options");
  need(nuclear.tol > 0.0 && nuclear.max_iter >= 1, "invalid EM options");
}

nlohmann::json to_json(const SolverConfig& c) {
  nlohmann::json j = {
      {"lambda1", c.lambda1},
      {"lambda2", c.lambda2},
      {"nu", c.nu},
      {"tau_init", c.tau_init},
      {"backtrack", c.backtrack},
      {"slope", c.slope},
      {"theta", c.theta},
      {"rel_tol", c.rel_tol},
      {"max_outer", c.max_outer},
      {"min_step", c.min_step},
      {"curvature_floor", c.curvature_floor},
      {"gamma_l_form", c.gamma_l_form == GammaLForm::Symmetric ? "symmetric" : "literal"},
      {"update_alpha", c.update_alpha},
      {"update_l", c.update_l},
      {"lasso_tol", c.lasso.tol},
      {"lasso_max_sweeps", c.lasso.max_sweeps},
      {"em_tol", c.nuclear.tol},
      {"em_max_iter", c.nuclear.max_iter},
      {"svd_full_limit", c.nuclear.svd.full_svd_limit},
  };
  j["clip_box"] = c.clip_box ? nlohmann::json(*c.clip_box) : nlohmann::json(nullptr);
  return j;
}

SolverConfig solver_config_from_json(const nlohmann::json& j, SolverConfig c) {
  if (!j.is_object()) throw InvalidInput("solver config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "lambda1") c.lambda1 = value.get<double>();
    else if (key == "lambda2") c.lambda2 = value.get<double>();
    else if (key == "nu") c.nu = value.get<double>();
    else if (key == "tau_init") c.tau_init = value.get<double>();
    else if (key == "backtrack") c.backtrack = value.get<double>();
    else if (key == "slope") c.slope = value.get<double>();
    else if (key == "theta") c.theta = value.get<double>();
    else if (key == "rel_tol") c.rel_tol = value.get<double>();
    else if (key == "max_outer") c.max_outer = value.get<int>();
    else if (key == "min_step") c.min_step = value.get<double>();
    else if (key == "curvature_floor") c.curvature_floor = value.get<double>();
    else if (key == "gamma_l_form") {
      const auto s = value.get<std::string>();
      if (s == "symmetric") c.gamma_l_form = GammaLForm::Symmetric;
      else if (s == "literal") c.gamma_l_form = GammaLForm::Literal;
      else throw InvalidInput("gamma_l_form must be 'symmetric' or 'literal'");
    } else if (key == "update_alpha") c.update_alpha = value.get<bool>();
    else if (key == "update_l") c.update_l = value.get<bool>();
    else if (key == "lasso_tol") c.lasso.tol = value.get<double>();
    else if (key == "lasso_max_sweeps") c.lasso.max_sweeps = value.get<int>();
    else if (key == "em_tol") c.nuclear.tol = value.get<double>();
    else if (key == "em_max_iter") c.nuclear.max_iter = value.get<int>();
    else if (key == "svd_full_limit") c.nuclear.svd.full_svd_limit = value.get<Eigen::Index>();
    else if (key == "clip_box") {
      if (value.is_null()) c.clip_box.reset();
      else c.clip_box = value.get<double>();
    } else {
      throw InvalidInput("unknown solver option '" + key + "'");
    }
  }
  c.validate();
  return c;
}

namespace {

void check_shapes(const MixedDataFrame& data, std::span<const LinkSpec> links, const Dictionary& dict) {
  if (static_cast<Eigen::Index>(links.size()) != data.cols())
    throw ShapeError("expected one link per column");
  if (dict.rows() != data.rows() || dict.cols() != data.cols())
    throw ShapeError("dictionary shape " + std::to_string(dict.rows()) + "x" + std::to_string(dict.cols()) +
                     " differs from data shape " + std::to_string(data.rows()) + "x" +
                     std::to_string(data.cols()));
}

// f at a trial point; an overflowing Poisson exponent counts as +∞ so the line
// search simply shrinks the step.
double smooth_part(const Matrix& X, const Problem& p) {
  try {
    return quasi_loglik_neg(X, p.data, p.links);
  } catch (const NumericError&) {
    return std::numeric_limits<double>::infinity();
  }
}

// A model decrease this small is below the resolution of F itself.
bool negligible(double gamma, double f_scale) {
  return std::abs(gamma) <= 1e-11 * std::max(1.0, std::abs(f_scale));
}

[[noreturn]] void inconsistent(const char* block, double gamma) {
  throw NumericError(std::string(block) + "-step model decrease is nonnegative (" + std::to_string(gamma) +
                     ") for a nonzero direction");
}

[[noreturn]] void stalled(const char* block, double tau) {
  throw NumericError(std::string(block) + "-step line search stalled at step " + std::to_string(tau));
}

}  // namespace

double objective(const Vector& alpha, const Matrix& L, const MixedDataFrame& data,
                 std::span<const LinkSpec> links, const Dictionary& dict, double lambda1,
                 double lambda2) {
  check_shapes(data, links, dict);
  if (L.rows() != data.rows() || L.cols() != data.cols()) throw ShapeError("L has the wrong shape");
  const Matrix X = dict.apply(alpha) + L;
  double F = quasi_loglik_neg(X, data, links);
  if (lambda1 != 0.0) F += lambda1 * nuclear_norm(L);
  if (lambda2 != 0.0) F += lambda2 * alpha.lpNorm<1>();
  return F;
}

BcgdState make_state(const Problem& problem, Vector alpha, Matrix L) {
  check_shapes(problem.data, problem.links, problem.dict);
  if (alpha.size() != problem.dict.size()) throw ShapeError("alpha length differs from the atom count");
  if (L.rows() != problem.data.rows() || L.cols() != problem.data.cols())
    throw ShapeError("L has the wrong shape");
  BcgdState s{std::move(alpha), std::move(L), Matrix()};
  s.X = problem.dict.apply(s.alpha) + s.L;
  return s;
}

AlphaStepResult alpha_step(const Problem& p, const BcgdState& state, const SolverConfig& config) {
  AlphaStepResult out{state.alpha, 0.0, 0.0, false};
  if (p.dict.size() == 0) return out;

  const Matrix w = curvature_weights(state.X, p.data, p.links);
  const Matrix Z = working_responses(state.X, p.data, p.links, config.curvature_floor);
  const Matrix grad = gradient(state.X, p.data, p.links);

  WeightedLassoProblem lasso{&p.dict, w, Z + p.dict.apply(state.alpha), config.nu, state.alpha,
                             config.lambda2};
  const Vector d = solve_weighted_lasso(lasso, config.lasso).alpha - state.alpha;
  if (d.lpNorm<Eigen::Infinity>() == 0.0) return out;

  const Matrix fd = p.dict.apply(d);
  const double l1_old = state.alpha.lpNorm<1>();
  const double gamma = grad.cwiseProduct(fd).sum() + config.theta * w.cwiseProduct(fd.cwiseProduct(fd)).sum() +
                       config.nu * d.squaredNorm() + config.lambda2 * ((state.alpha + d).lpNorm<1>() - l1_old);
  const double base = quasi_loglik_neg(state.X, p.data, p.links) + config.lambda2 * l1_old;
  out.gamma = gamma;
  if (negligible(gamma, base)) {
    out.gamma = 0.0;
    return out;
  }
  if (gamma >= 0.0) inconsistent("alpha", gamma);

  for (double tau = config.tau_init; tau >= config.min_step; tau *= config.backtrack) {
    const Vector trial = state.alpha + tau * d;
    const double value = smooth_part(state.X + tau * fd, p) + config.lambda2 * trial.lpNorm<1>();
    if (value <= base + tau * config.slope * gamma) {
      out.alpha = trial;
      out.tau = tau;
      out.moved = true;
      return out;
    }
  }
  stalled("alpha", config.min_step);
}

LStepResult l_step(const Problem& p, const BcgdState& state, const SolverConfig& config) {
  LStepResult out{state.L, 0.0, 0.0, false};

  const Matrix w = curvature_weights(state.X, p.data, p.links);
  const Matrix Z = working_responses(state.X, p.data, p.links, config.curvature_floor);
  const Matrix grad = gradient(state.X, p.data, p.links);

  const Matrix tilde_w = (w.array() + config.nu).matrix();
  const Matrix target =
      ((w.array() * (Z + state.L).array() + config.nu * state.L.array()) / tilde_w.array()).matrix();
  WeightedNuclearProblem prox{tilde_w, target, config.lambda1};
  const Matrix d = solve_weighted_nuclear(prox, config.nuclear, state.L).L - state.L;
  if (d.lpNorm<Eigen::Infinity>() == 0.0) return out;

  const double nuc_old = config.lambda1 > 0.0 ? nuclear_norm(state.L) : 0.0;
  double gamma = grad.cwiseProduct(d).sum() + config.theta * w.cwiseProduct(d.cwiseProduct(d)).sum();
  if (config.lambda1 > 0.0) {
    const double reference = config.gamma_l_form == GammaLForm::Symmetric ? nuc_old : nuclear_norm(d);
    gamma += config.lambda1 * (nuclear_norm(state.L + d) - reference);
  }
  const double base = quasi_loglik_neg(state.X, p.data, p.links) + config.lambda1 * nuc_old;
  out.gamma = gamma;
  if (negligible(gamma, base)) {
    out.gamma = 0.0;
    return out;
  }
  if (gamma >= 0.0) inconsistent("L", gamma);

  for (double tau = config.tau_init; tau >= config.min_step; tau *= config.backtrack) {
    Matrix trial = state.L + tau * d;
    double value = smooth_part(state.X + tau * d, p);
    if (config.lambda1 > 0.0 && std::isfinite(value)) value += config.lambda1 * nuclear_norm(trial);
    if (value <= base + tau * config.slope * gamma) {
      out.L = std::move(trial);
      out.tau = tau;
      out.moved = true;
      return out;
    }
  }
  stalled("L", config.min_step);
}

ModelFit fit(const MixedDataFrame& data, std::span<const LinkSpec> links, const Dictionary& dict,
             const SolverConfig& config, const std::optional<WarmStart>& warm) {
  config.validate();
  check_shapes(data, links, dict);
  const auto start = std::chrono::steady_clock::now();
  const Problem problem{data, links, dict};

  BcgdState state = warm ? make_state(problem, warm->alpha, warm->L)
                         : make_state(problem, Vector::Zero(dict.size()),
                                      Matrix::Zero(data.rows(), data.cols()));
  ModelFit result;
  result.config = config;
  auto snapshot = [&]() {
    result.alpha_hat = state.alpha;
    result.L_hat = state.L;
    result.X_hat = state.X;
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  double F = objective(state.alpha, state.L, data, links, dict, config.lambda1, config.lambda2);
  result.objective_trace.push_back(F);

  try {
    for (int t = 0; t < config.max_outer; ++t) {
      AlphaStepResult a{state.alpha, 0.0, 0.0, false};
      if (config.update_alpha) {
        a = alpha_step(problem, state, config);
        if (a.moved) state = make_state(problem, std::move(a.alpha), std::move(state.L));
      }
      LStepResult l{state.L, 0.0, 0.0, false};
      if (config.update_l) {
        l = l_step(problem, state, config);
        if (l.moved) state = make_state(problem, std::move(state.alpha), std::move(l.L));
      }
      const double next = objective(state.alpha, state.L, data, links, dict, config.lambda1, config.lambda2);
      result.objective_trace.push_back(next);
      result.step_trace.emplace_back(a.tau, l.tau);
      result.gamma_trace.emplace_back(a.gamma, l.gamma);
      result.n_iter = t + 1;
      if (next > F + 1e-10 * std::max(1.0, std::abs(F)))
        throw NumericError("objective increased from " + std::to_string(F) + " to " + std::to_string(next));
      const double change = std::abs(F - next);
      F = next;
      if (change <= config.rel_tol * std::max(std::abs(F), 1.0)) {
        result.converged = true;
        break;
      }
    }
  } catch (const Error& e) {
    snapshot();
    throw SolverError(std::string("fit aborted after ") + std::to_string(result.n_iter) +
                          " outer iterations: " + e.what(),
                      std::move(result));
  }

  if (config.clip_box) {
    const double a = *config.clip_box;
    state = make_state(problem, state.alpha.cwiseMax(-a).cwiseMin(a), state.L.cwiseMax(-a).cwiseMin(a));
  }
  snapshot();
  return result;
}

MixedDataFrame impute(const ModelFit& fit, const MixedDataFrame& data, std::span<const LinkSpec> links,
                      bool round_binary) {
  if (fit.X_hat.rows() != data.rows() || fit.X_hat.cols() != data.cols())
    throw ShapeError("fit and data differ in shape");
  const Matrix means = predicted_means(fit.X_hat, links);
  Matrix values(data.rows(), data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const bool binary = data.column(j).type == ColumnType::Binary;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      if (data.observed(i, j)) {
        values(i, j) = data.observed_value(i, j);
      } else {
        double v = means(i, j);
        if (binary && round_binary) v = v >= 0.5 ? 1.0 : 0.0;
        values(i, j) = v;
      }
    }
  }
  return MixedDataFrame::predictions(data.columns(), std::move(values));
}

nlohmann::json fit_report(const ModelFit& fit) {
  nlohmann::json j;
  j["config"] = to_json(fit.config);
  j["objective_trace"] = fit.objective_trace;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& [ta, tl] : fit.step_trace) steps.push_back({{"tau_alpha", ta}, {"tau_L", tl}});
  j["step_trace"] = steps;
  nlohmann::json gammas = nlohmann::json::array();
  for (const auto& [ga, gl] : fit.gamma_trace) gammas.push_back({{"gamma_alpha", ga}, {"gamma_L", gl}});
  j["gamma_trace"] = gammas;
  j["converged"] = fit.converged;
  j["n_iter"] = fit.n_iter;
  j["rank_L"] = fit.L_hat.size() ? numerical_rank(fit.L_hat, 1e-7) : 0;
  j["alpha_nnz"] = (fit.alpha_hat.array().abs() > 1e-8).count();
  j["alpha_hat"] = std::vector<double>(fit.alpha_hat.data(), fit.alpha_hat.data() + fit.alpha_hat.size());
  j["final_objective"] = fit.objective_trace.empty() ? 0.0 : fit.objective_trace.back();
  j["wall_seconds"] = fit.wall_seconds;
  return j;
}

}  // namespace mimi
