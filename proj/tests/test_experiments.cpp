#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "mimi/error.hpp"
#include "mimi/experiments.hpp"
#include "mimi/table.hpp"

using namespace mimi;

namespace {

std::string csv(const ResultTable& t) {
  std::ostringstream out;
  t.write_csv(out);
  return out.str();
}

std::set<std::string> distinct(const ResultTable& t, const std::string& column) {
  std::set<std::string> s;
  for (std::size_t r = 0; r < t.size(); ++r) s.insert(t.at(r, column));
  return s;
}

EstimationStudy tiny_estimation() {
  EstimationStudy s;
  s.m1 = 40;
  s.m2 = 8;
  s.n_groups = 4;
  s.s_list = {2, 5};
  s.r_list = {1, 2};
  s.n_reps = 2;
  return s;
}

double median_of(const ResultTable& t, const std::string& method, const std::string& metric) {
  std::vector<double> v;
  for (std::size_t r = 0; r < t.size(); ++r)
    if (t.at(r, "method") == method) v.push_back(std::stod(t.at(r, metric)));
  return median(v);
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("default designs") {
    const EstimationStudy e;
    CHECK(e.s_list.size() * e.r_list.size() == 16);
    CHECK(e.m1 == 300);
    CHECK(e.m2 == 30);
    CHECK(e.n_reps == 20);
    const ImputationStudy i;
    CHECK(i.missing_fracs.size() * i.ratios.size() == 9);
    CHECK(i.m1 == 150);
    CHECK(i.s == 3);
    CHECK(i.r == 2);
    const RateStudy r;
    CHECK(r.sizes == std::vector<Eigen::Index>{100, 200, 400, 800});
    CHECK(r.p_obs == 0.7);
  }

  TEST_CASE("estimation study shape and provenance") {
    const auto o = run_estimation_study(tiny_estimation());
    CHECK(o.rows.size() == 4 * 2 * 2);
    CHECK(o.summary.size() == 4 * 2);
    CHECK(distinct(o.rows, "method") == std::set<std::string>{"mimi", "groupmean_svt"});
    for (const char* col : {"m1", "m2", "s", "r", "p_obs", "seed", "config_hash", "rep", "err_alpha", "err_L"})
      CHECK(std::find(o.rows.header().begin(), o.rows.header().end(), col) != o.rows.header().end());
    CHECK(distinct(o.rows, "config_hash").size() == 1);
    CHECK(o.manifest.at("study") == "estimation");
    const auto lf = o.long_format();
    CHECK(lf.size() == o.rows.size() * 9);
  }

  TEST_CASE("seeded runs are bit-identical") {
    const auto a = run_estimation_study(tiny_estimation());
    EstimationStudy threaded = tiny_estimation();
    threaded.threads = 4;
    const auto b = run_estimation_study(threaded);
    CHECK(csv(a.rows) == csv(b.rows));
    CHECK(csv(a.summary) == csv(b.summary));
    EstimationStudy other = tiny_estimation();
    other.seed = 2;
    CHECK(csv(run_estimation_study(other).rows) != csv(a.rows));
  }

  TEST_CASE("manifest reproduces the study") {
    const auto a = run_estimation_study(tiny_estimation());
    const auto again = estimation_study_from_json(a.manifest.at("parameters"));
    CHECK(csv(run_estimation_study(again).rows) == csv(a.rows));
    CHECK_THROWS_AS(estimation_study_from_json(nlohmann::json::parse(R"({"bogus":1})")), InvalidInput);
  }

  TEST_CASE("imputation study grid") {
    ImputationStudy s;
    s.m1 = 30;
    s.m2 = 8;
    s.n_groups = 3;
    s.n_reps = 1;
    const auto o = run_imputation_study(s);
    CHECK(o.rows.size() == 9 * 3);
    CHECK(distinct(o.rows, "missing_frac") == std::set<std::string>{"0.2", "0.4", "0.6"});
    CHECK(distinct(o.rows, "ratio").size() == 3);
    CHECK(distinct(o.rows, "method") == std::set<std::string>{"mimi", "column_mean", "groupmean_svt"});
    CHECK(csv(run_imputation_study(imputation_study_from_json(o.manifest.at("parameters"))).rows) == csv(o.rows));
  }

  TEST_CASE("rate study slopes table") {
    RateStudy s;
    s.sizes = {40, 80};
    s.halving_sizes = {40};
    s.m2 = 8;
    s.n_groups = 2;
    s.n_reps = 3;
    s.n_bootstrap = 20;
    const auto o = run_rate_study(s);
    CHECK(o.rows.size() == 3 * 3);
    REQUIRE(o.slopes.size() == 3);
    CHECK(o.slopes.at(0, "quantity") == "slope_err_L_vs_M");
    CHECK(o.slopes.at(2, "quantity") == "err_L_ratio_p_halved_M40");
    CHECK(std::stod(o.slopes.at(0, "ci_low")) <= std::stod(o.slopes.at(0, "ci_high")));
  }

  TEST_CASE("log-log slope") {
    CHECK(log_log_slope({1, 2, 4}, {3, 6, 12}) == doctest::Approx(1.0));
    CHECK(log_log_slope({1, 10}, {5, 5}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(log_log_slope({1}, {1}), InvalidInput);
    CHECK_THROWS_AS(log_log_slope({1, 2}, {0, 1}), InvalidInput);
  }

  TEST_CASE("outputs on disk") {
    const auto dir = std::filesystem::temp_directory_path() / "mimi_experiments_test";
    std::filesystem::remove_all(dir);
    run_estimation_study(tiny_estimation()).write(dir);
    for (const char* f : {"rows.csv", "summary.csv", "long.csv", "manifest.json"})
      CHECK(std::filesystem::file_size(dir / f) > 0);
    CHECK_FALSE(std::filesystem::exists(dir / "slopes.csv"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("policies") {
    LambdaPolicy p;
    CHECK(p.c1 == 0.5);
    CHECK(p.c2 == 0.08);
    p.mode = LambdaPolicy::Mode::CrossValidated;
    p.grid_n1 = 2;
    const auto back = lambda_policy_from_json(to_json(p));
    CHECK(to_json(back) == to_json(p));
    CHECK_THROWS_AS(lambda_policy_from_json(nlohmann::json::parse(R"({"mode":"aic"})")), InvalidInput);

    EstimationStudy s = tiny_estimation();
    s.s_list = {2};
    s.r_list = {2};
    s.n_reps = 1;
    s.lambdas.mode = LambdaPolicy::Mode::CrossValidated;
    s.lambdas.grid_n1 = 2;
    s.lambdas.grid_n2 = 2;
    s.lambdas.n_folds = 2;
    CHECK(run_estimation_study(s).rows.size() == 2);
  }

  TEST_CASE("main-effect error stays flat from 150x30 to 1500x300") {
    auto run = [](Eigen::Index m1, Eigen::Index m2) {
      EstimationStudy s;
      s.m1 = m1;
      s.m2 = m2;
      s.s_list = {2};
      s.r_list = {2};
      s.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
      return run_estimation_study(s).rows;
    };
    const auto small = run(150, 30), large = run(1500, 300);
    const double mimi_small = median_of(small, "mimi", "err_alpha");
    const double mimi_large = median_of(large, "mimi", "err_alpha");
    MESSAGE("mimi " << mimi_small << " -> " << mimi_large << ", group-mean+SVT "
                    << median_of(small, "groupmean_svt", "err_alpha") << " -> "
                    << median_of(large, "groupmean_svt", "err_alpha"));
    CHECK(mimi_large < 2.0 * mimi_small);
    CHECK(mimi_small < 2.0 * mimi_large);
    CHECK(median_of(large, "groupmean_svt", "err_alpha") > median_of(small, "groupmean_svt", "err_alpha"));
  }
}
