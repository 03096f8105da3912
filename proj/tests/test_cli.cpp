#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string cli_path() {
  const char* p = std::getenv("FINSLER_CLI");
  REQUIRE(p != nullptr);
  return p;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run(const std::string& args) {
  static int counter = 0;
  std::string out = "/tmp/finsler_cli_out_" + std::to_string(++counter);
  std::string err = out + ".err";
  std::string cmd = cli_path() + " " + args + " > " + out + " 2> " + err;
  int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(rc);
  r.out = slurp(out);
  r.err = slurp(err);
  std::remove(out.c_str());
  std::remove(err.c_str());
  return r;
}

std::string strip_wall_time(std::string s) {
  auto pos = s.find("\"wall_time_seconds\":");
  if (pos == std::string::npos) return s;
  auto end = s.find_first_of(",}", s.find(':', pos) + 1);
  s.erase(pos, end - pos);
  return s;
}

}  // namespace

TEST_CASE("cli: verify pass/fail/usage exit codes") {
  auto ok = run("verify --family euclidean --dim 3 --samples 100 --seed 7");
  CHECK(ok.exit_code == 0);
  auto rep = nlohmann::json::parse(ok.out);
  CHECK(rep["overall_status"] == "pass");
  CHECK(rep["schema_version"] == 1);
  CHECK(rep["config"]["sampler"]["generator"] == "mt19937_64-boxmuller-v1");

  auto fail = run("verify --expr \"y0^2 + y1\" --dim 2 --samples 50 --seed 3");
  CHECK(fail.exit_code == 1);
  auto frep = nlohmann::json::parse(fail.out);
  CHECK(frep["overall_status"] == "fail");
  bool hom_failed = false;
  for (const auto& c : frep["checks"])
    if (c["name"] == "homogeneity_F") hom_failed = c["status"] == "fail";
  CHECK(hom_failed);

  auto usage = run("verify --family no_such_family");
  CHECK(usage.exit_code == 2);
  auto usage2 = run("frobnicate");
  CHECK(usage2.exit_code == 2);
  auto usage3 = run("verify");
  CHECK(usage3.exit_code == 2);
}

TEST_CASE("cli: verify runs the shipped x-dependent Randers example from a config") {
  std::string cfg_path = "/tmp/finsler_cli_randers.json";
  {
    std::ofstream cfg(cfg_path);
    cfg << R"json({
      "version": 1,
      "structure": {
        "family": "randers",
        "dimension": 2,
        "a": [[1, 0], [0, 1]],
        "b": ["0.2 + 0.1*sin(x1)", "0"]
      },
      "sampler": {"count": 100, "seed": 7}
    })json";
  }
  auto r = run("verify --config " + cfg_path);
  CHECK(r.exit_code == 0);
  auto rep = nlohmann::json::parse(r.out);
  CHECK(rep["overall_status"] == "pass");
  std::remove(cfg_path.c_str());
}

TEST_CASE("cli: determinism of verify reports and geodesic CSV") {
  const std::string args = "verify --family poincare_half_plane --samples 60 --seed 11";
  auto a = run(args);
  auto b = run(args);
  CHECK(a.exit_code == 0);
  CHECK(strip_wall_time(a.out) == strip_wall_time(b.out));
  CHECK(a.out.find("wall_time_seconds") != std::string::npos);

  const std::string gargs =
      "geodesic --family poincare_half_plane --x0 0,1 --y0 1,0 --t-end 1 --steps 500 "
      "--output /tmp/finsler_cli_path_";
  auto g1 = run(gargs + "a.csv");
  auto g2 = run(gargs + "b.csv");
  CHECK(g1.exit_code == 0);
  CHECK(g2.exit_code == 0);
  CHECK(slurp("/tmp/finsler_cli_path_a.csv") == slurp("/tmp/finsler_cli_path_b.csv"));
  CHECK(strip_wall_time(g1.out).find("\"csv_path\"") != std::string::npos);
  std::remove("/tmp/finsler_cli_path_a.csv");
  std::remove("/tmp/finsler_cli_path_b.csv");
}

TEST_CASE("cli: geodesic CSV format and summary") {
  auto r = run(
      "geodesic --family poincare_half_plane --x0 0,1 --y0 1,0 --t-end 1 --steps 1000 "
      "--output /tmp/finsler_cli_hp.csv");
  REQUIRE(r.exit_code == 0);
  auto rep = nlohmann::json::parse(r.out);
  CHECK(rep["overall_status"] == "pass");
  double ex = rep["endpoint"]["x"][0].get<double>();
  double ey = rep["endpoint"]["x"][1].get<double>();
  CHECK(std::abs(ex - std::tanh(1.0)) <= 1e-6);
  CHECK(std::abs(ey - 1.0 / std::cosh(1.0)) <= 1e-6);
  CHECK(rep["drift"].get<double>() <= 1e-8);
  CHECK(std::abs(rep["arc_length"].get<double>() - 1.0) <= 1e-6);

  std::ifstream csv("/tmp/finsler_cli_hp.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "t,x0,x1,y0,y1,F");
  std::size_t lines = 1;
  std::string line, last;
  while (std::getline(csv, line))
    if (!line.empty()) ++lines, last = line;
  CHECK(lines == 1002);  // header + 1001 samples
  CHECK(last.substr(0, 2) == "1,");
  std::remove("/tmp/finsler_cli_hp.csv");

  auto bad = run("geodesic --family euclidean --dim 2 --x0 0,0 --y0 1,0 --steps 0");
  CHECK(bad.exit_code == 2);
}

TEST_CASE("cli: geodesic straight line on Euclidean") {
  auto r = run(
      "geodesic --family euclidean --dim 2 --x0 0,0 --y0 1,0 --t-end 1 --steps 100 "
      "--output /tmp/finsler_cli_line.csv");
  REQUIRE(r.exit_code == 0);
  auto rep = nlohmann::json::parse(r.out);
  CHECK(std::abs(rep["endpoint"]["x"][0].get<double>() - 1.0) <= 1e-12);
  CHECK(rep["drift"].get<double>() == 0.0);
  std::remove("/tmp/finsler_cli_line.csv");
}

TEST_CASE("cli: maxwell riemann, finsler, and correspondence modes") {
  auto r = run(
      "maxwell --family minkowski --mode riemann --at 0.3,0.1,0,0 "
      "--potential \"0,0,sin(2*(x0 - x1)),0\"");
  REQUIRE(r.exit_code == 0);
  auto rep = nlohmann::json::parse(r.out);
  for (const auto& comp : rep["current"]["j"])
    CHECK(std::abs(comp.get<double>()) <= 1e-8);
  CHECK(rep["first_equation_residual_max"].get<double>() <= 1e-12);
  CHECK(rep["current"]["convention"] == "paper-riemann");

  auto miss = run("maxwell --family minkowski --mode finsler --at 0,0,0,0 "
                  "--potential \"0,0,0,0\"");
  CHECK(miss.exit_code == 2);

  auto fin = run(
      "maxwell --family minkowski --mode finsler --at 0.3,0.1,0,0 --y 1,0.2,0.1,-0.3 "
      "--potential \"0,0,0,0\"");
  REQUIRE(fin.exit_code == 0);
  auto frep = nlohmann::json::parse(fin.out);
  for (const auto& comp : frep["current"]["j"]) CHECK(comp.get<double>() == 0.0);
  CHECK(frep["current"]["convention"] == "paper-finsler");

  auto corr = run(
      "maxwell --family minkowski --mode correspondence --samples 5 --seed 99 "
      "--potential \"0,0,sin(2*(x0 - x1)),0\"");
  REQUIRE(corr.exit_code == 0);
  auto crep = nlohmann::json::parse(corr.out);
  CHECK(crep["overall_status"] == "pass");

  auto nopot = run("maxwell --family minkowski --mode riemann --at 0,0,0,0");
  CHECK(nopot.exit_code == 2);
}

TEST_CASE("cli: report goes to --output when requested") {
  auto r = run("verify --family euclidean --dim 2 --samples 20 --seed 1 --output "
               "/tmp/finsler_cli_report.json");
  CHECK(r.exit_code == 0);
  CHECK(r.out.empty());
  auto rep = nlohmann::json::parse(slurp("/tmp/finsler_cli_report.json"));
  CHECK(rep["overall_status"] == "pass");
  std::remove("/tmp/finsler_cli_report.json");
}
