#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "mimi/mdf.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = MIMI_FIXTURES;

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + MIMI_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mimi_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("fit on the fixture frame") {
    const auto out = scratch("fit");
    CHECK(run("fit --data " + q(kFixtures / "numbers.csv") + " --dict " + q(kFixtures / "numbers_dict.json") +
              " --lambda1 0.5 --lambda2 0.2 --out " + q(out)) == 0);
    const auto report = read_json(out / "fit_report.json");
    CHECK(report.at("converged") == true);
    CHECK(fs::exists(out / "alpha.csv"));
    CHECK(fs::exists(out / "L.csv"));
    CHECK(run("fit --data " + q(kFixtures / "small.csv") + " --schema " + q(kFixtures / "small_schema.json") +
              " --lambda1 1 --lambda2 0 --out " + q(out)) == 0);
  }

  TEST_CASE("exit codes") {
    const auto out = scratch("codes");
    CHECK(run("fit --data " + q(out / "missing.csv") + " --lambda1 1 --lambda2 1") == 1);
    CHECK(run("fit --data " + q(kFixtures / "bad_cell.csv") + " --lambda1 1 --lambda2 1") == 1);
    CHECK(run("fit --data " + q(kFixtures / "numbers.csv") + " --lambda1 -1 --lambda2 1") == 1);
    CHECK(run("frobnicate") == 1);
    std::ofstream(out / "cfg.json") << R"({"max_outer": 1, "rel_tol": 1e-15})";
    CHECK(run("fit --data " + q(kFixtures / "numbers.csv") + " --dict " + q(kFixtures / "numbers_dict.json") +
              " --config " + q(out / "cfg.json") + " --lambda1 0.01 --lambda2 0.01 --out " + q(out)) == 2);
    CHECK(read_json(out / "fit_report.json").at("converged") == false);
  }

  TEST_CASE("penalties at the anchor give no main effects") {
    const auto out = scratch("anchor");
    CHECK(run("cv --data " + q(kFixtures / "numbers.csv") + " --dict " + q(kFixtures / "numbers_dict.json") +
              " --n1 2 --n2 2 --folds 2 --out " + q(out / "cv.json") + " --csv " + q(out / "cv.csv")) == 0);
    const auto cv = read_json(out / "cv.json");
    const double l2max = cv.at("lambda2_max").get<double>();
    CHECK(run("fit --data " + q(kFixtures / "numbers.csv") + " --dict " + q(kFixtures / "numbers_dict.json") +
              " --lambda1 1e6 --lambda2 " + std::to_string(1.01 * l2max) + " --out " + q(out)) == 0);
    CHECK(read_json(out / "fit_report.json").at("alpha_nnz") == 0);
    CHECK(slurp(out / "cv.csv").rfind("lambda1,lambda2,fold,error", 0) == 0);
  }

  TEST_CASE("impute fills every cell") {
    const auto out = scratch("impute");
    CHECK(run("impute --data " + q(kFixtures / "small.csv") + " --schema " + q(kFixtures / "small_schema.json") +
              " --auto-lambda --folds 2 --out " + q(out / "done.csv")) == 0);
    const auto schema = mimi::read_schema(kFixtures / "small_schema.json");
    const auto in = mimi::read_csv(kFixtures / "small.csv", schema);
    const std::string text = slurp(out / "done.csv");
    CHECK(text.find("NA") == std::string::npos);
    std::istringstream lines(text);
    std::string header, line;
    std::getline(lines, header);
    CHECK(header == "income,owner,visits,score");
    for (Eigen::Index i = 0; std::getline(lines, line); ++i) {
      std::vector<double> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
      REQUIRE(cells.size() == 4);
      for (Eigen::Index j = 0; j < 4; ++j)
        if (in.observed(i, j)) CHECK(cells[static_cast<std::size_t>(j)] == in.value(i, j));
      CHECK(cells[1] >= 0.0);
      CHECK(cells[1] <= 1.0);
    }
    CHECK(run("impute --data " + q(kFixtures / "small.csv") + " --schema " + q(kFixtures / "small_schema.json") +
              " --lambda1 1 --lambda2 0 --round-binary --out " + q(out / "rounded.csv")) == 0);
  }

  TEST_CASE("simulate is seeded") {
    const auto a = scratch("sim_a"), b = scratch("sim_b");
    const std::string args = " --m1 30 --m2 6 --s 2 --r 2 --p-obs 0.7 --layout mixed --seed 5 --out ";
    CHECK(run("simulate" + args + q(a)) == 0);
    CHECK(run("simulate" + args + q(b)) == 0);
    for (const char* f : {"data.csv", "complete.csv", "schema.json", "dictionary.json", "design.json", "alpha0.csv",
                          "L0.csv"})
      CHECK(slurp(a / f) == slurp(b / f));
    const auto df = mimi::read_csv(a / "data.csv", mimi::read_schema(a / "schema.json"));
    CHECK(df.rows() == 30);
    CHECK(df.column(5).type == mimi::ColumnType::Binary);
    CHECK(run("fit --data " + q(a / "data.csv") + " --schema " + q(a / "schema.json") + " --dict " +
              q(a / "dictionary.json") + " --lambda1 2 --lambda2 1 --out " + q(a / "fit")) == 0);
  }

  TEST_CASE("reproduce writes seeded study outputs") {
    const auto dir = scratch("reproduce");
    std::ofstream(dir / "est.json") << R"({"m1": 30, "m2": 6, "n_groups": 3, "s_list": [2], "r_list": [1, 2], "n_reps": 2})";
    std::ofstream(dir / "imp.json") << R"({"m1": 24, "m2": 6, "n_groups": 3, "n_reps": 1})";
    std::ofstream(dir / "rate.json") << R"({"sizes": [30, 60], "halving_sizes": [30], "m2": 6, "n_groups": 2, "n_reps": 2, "n_bootstrap": 5})";
    CHECK(run("reproduce --study estimation --manifest " + q(dir / "est.json") + " --out " + q(dir / "e1")) == 0);
    CHECK(run("reproduce --study estimation --manifest " + q(dir / "est.json") + " --out " + q(dir / "e2")) == 0);
    CHECK(slurp(dir / "e1" / "rows.csv") == slurp(dir / "e2" / "rows.csv"));
    CHECK(run("reproduce --study estimation --manifest " + q(dir / "e1" / "manifest.json") + " --out " +
              q(dir / "e3")) == 0);
    CHECK(slurp(dir / "e1" / "rows.csv") == slurp(dir / "e3" / "rows.csv"));
    CHECK(run("reproduce --study imputation --manifest " + q(dir / "imp.json") + " --out " + q(dir / "i")) == 0);
    const std::string rows = slurp(dir / "i" / "rows.csv");
    CHECK(std::count(rows.begin(), rows.end(), '\n') == 1 + 9 * 3);
    CHECK(run("reproduce --study rates --manifest " + q(dir / "rate.json") + " --out " + q(dir / "r")) == 0);
    CHECK(fs::file_size(dir / "r" / "slopes.csv") > 0);
    CHECK(run("reproduce --study everything --out " + q(dir / "x")) == 1);
  }
}
