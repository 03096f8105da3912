// Command-line surface: identity verification, geodesic tracing, and Maxwell
// evaluation with machine-readable reports.

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "finsler/finsler.hpp"

using nlohmann::json;
using namespace finsler;

namespace {

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t pos = 0;
    double v = std::stod(item, &pos);
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::string entry_to_expr(const json& e) {
  if (e.is_string()) return e.get<std::string>();
  if (e.is_number()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", e.get<double>());
    std::string s = buf;
    return e.get<double>() < 0 ? "(" + s + ")" : s;
  }
  throw ConfigError("matrix/vector entries must be numbers or expression strings");
}

// ---- effective run configuration -------------------------------------------

struct StructureConfig {
  std::string family;      // or "expression"
  int dimension = 0;
  std::vector<std::string> a_entries, b_entries;  // randers
  std::vector<double> matrix;                     // quadratic
  double epsilon = 0.01;
  int direction = 1;
  std::string expression_text;
  std::string kind = "positive";
  std::vector<double> ref_x, ref_y;
};

struct RunConfig {
  StructureConfig structure;
  std::vector<std::string> potential;
  std::string convention;  // empty: per-equation paper default
  double c_light = 1.0;
  SamplerPlan sampler;
  bool box_given = false;
  std::map<std::string, double> tolerances;
  std::optional<double> tol_override;
  std::string output_path;
  std::string format = "json";
};

FinslerStructure build_structure(const StructureConfig& sc) {
  if (sc.family == "euclidean") {
    if (sc.dimension < 2) throw ConfigError("euclidean family needs --dim >= 2");
    return FinslerStructure::euclidean(sc.dimension);
  }
  if (sc.family == "minkowski") return FinslerStructure::minkowski();
  if (sc.family == "poincare_half_plane") return FinslerStructure::poincare_half_plane();
  if (sc.family == "quadratic") {
    int n = sc.dimension;
    if (n < 2 || static_cast<int>(sc.matrix.size()) != n * n)
      throw ConfigError("quadratic family needs dimension and an n*n matrix");
    return FinslerStructure::quadratic_constant(sc.matrix, n);
  }
  if (sc.family == "randers") {
    int n = sc.dimension;
    if (n < 2 || static_cast<int>(sc.a_entries.size()) != n * n ||
        static_cast<int>(sc.b_entries.size()) != n)
      throw ConfigError("randers family needs dimension, an n*n 'a' and an n-vector 'b'");
    return FinslerStructure::randers(MatrixExprField::from_strings(sc.a_entries, n),
                                     VectorExprField::from_strings(sc.b_entries, n),
                                     sc.ref_x);
  }
  if (sc.family == "perturbed_minkowski")
    return FinslerStructure::perturbed_minkowski(sc.epsilon, sc.direction);
  if (sc.family == "expression") {
    if (sc.dimension < 2) throw ConfigError("expression structure needs --dim >= 2");
    if (sc.expression_text.empty()) throw ConfigError("expression structure needs --expr");
    MetricKind kind = sc.kind == "alternating" ? MetricKind::alternating
                                               : MetricKind::positive_definite;
    if (sc.kind != "alternating" && sc.kind != "positive")
      throw ConfigError("kind must be 'positive' or 'alternating'");
    try {
      return FinslerStructure::expression(parse(sc.expression_text, sc.dimension), kind,
                                          sc.ref_x, sc.ref_y);
    } catch (const ParseError& e) {
      throw ConfigError(std::string("bad structure expression: ") + e.what());
    }
  }
  throw ConfigError("unknown structure family '" + sc.family + "'");
}

void load_config_file(const std::string& path, RunConfig& rc) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (j.contains("structure")) {
    const auto& s = j["structure"];
    if (s.contains("expression")) {
      rc.structure.family = "expression";
      rc.structure.expression_text = s["expression"].get<std::string>();
    }
    if (s.contains("family")) rc.structure.family = s["family"].get<std::string>();
    if (s.contains("dimension")) rc.structure.dimension = s["dimension"].get<int>();
    if (s.contains("kind")) rc.structure.kind = s["kind"].get<std::string>();
    if (s.contains("epsilon")) rc.structure.epsilon = s["epsilon"].get<double>();
    if (s.contains("direction")) rc.structure.direction = s["direction"].get<int>();
    if (s.contains("matrix")) {
      rc.structure.matrix.clear();
      for (const auto& row : s["matrix"])
        for (const auto& e : row) rc.structure.matrix.push_back(e.get<double>());
      if (rc.structure.dimension == 0)
        rc.structure.dimension = static_cast<int>(s["matrix"].size());
    }
    if (s.contains("a")) {
      rc.structure.a_entries.clear();
      for (const auto& row : s["a"])
        for (const auto& e : row) rc.structure.a_entries.push_back(entry_to_expr(e));
      if (rc.structure.dimension == 0)
        rc.structure.dimension = static_cast<int>(s["a"].size());
    }
    if (s.contains("b")) {
      rc.structure.b_entries.clear();
      for (const auto& e : s["b"]) rc.structure.b_entries.push_back(entry_to_expr(e));
    }
    if (s.contains("reference_point")) {
      const auto& rp = s["reference_point"];
      if (rp.contains("x")) rc.structure.ref_x = rp["x"].get<std::vector<double>>();
      if (rp.contains("y")) rc.structure.ref_y = rp["y"].get<std::vector<double>>();
    }
  }
  if (j.contains("potential")) {
    const auto& p = j["potential"];
    if (p.contains("components"))
      rc.potential = p["components"].get<std::vector<std::string>>();
    if (p.contains("convention")) rc.convention = p["convention"].get<std::string>();
    if (p.contains("c")) rc.c_light = p["c"].get<double>();
  }
  if (j.contains("sampler")) {
    const auto& sm = j["sampler"];
    if (sm.contains("count")) rc.sampler.count = sm["count"].get<std::size_t>();
    if (sm.contains("seed")) rc.sampler.seed = sm["seed"].get<std::uint64_t>();
    if (sm.contains("y_radius")) rc.sampler.y_radius = sm["y_radius"].get<double>();
    if (sm.contains("box")) {
      rc.sampler.box.clear();
      for (const auto& b : sm["box"])
        rc.sampler.box.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
      rc.box_given = true;
    }
  }
  if (j.contains("tolerances"))
    for (auto it = j["tolerances"].begin(); it != j["tolerances"].end(); ++it)
      rc.tolerances[it.key()] = it.value().get<double>();
  if (j.contains("output")) {
    const auto& o = j["output"];
    if (o.contains("path")) rc.output_path = o["path"].get<std::string>();
    if (o.contains("format")) rc.format = o["format"].get<std::string>();
  }
}

void apply_default_box(RunConfig& rc) {
  // the half-plane's default sampling box must sit inside its domain
  if (!rc.box_given && rc.structure.family == "poincare_half_plane")
    rc.sampler.box = {{-1.0, 1.0}, {0.25, 2.25}};
}

void apply_tolerance_overrides(const RunConfig& rc, std::vector<IdentityCheck>& checks) {
  for (auto& c : checks) {
    auto it = rc.tolerances.find(c.name);
    if (it != rc.tolerances.end()) c.tolerance = it->second;
    else if (rc.tol_override) c.tolerance = *rc.tol_override;
    else continue;
    c.pass = c.samples > 0 && c.max_residual <= c.tolerance;
  }
}

// ---- report plumbing ---------------------------------------------------------

void echo_structure(JsonWriter& w, const RunConfig& rc) {
  w.key("structure").begin_object();
  w.key("family").value(rc.structure.family);
  if (rc.structure.dimension > 0) w.key("dimension").value(rc.structure.dimension);
  if (rc.structure.family == "expression") {
    w.key("expression").value(rc.structure.expression_text);
    w.key("kind").value(rc.structure.kind);
  }
  if (rc.structure.family == "perturbed_minkowski") {
    w.key("epsilon").value(rc.structure.epsilon);
    w.key("direction").value(rc.structure.direction);
  }
  if (!rc.structure.a_entries.empty()) {
    w.key("a").begin_array();
    for (const auto& e : rc.structure.a_entries) w.value(e);
    w.end_array();
    w.key("b").begin_array();
    for (const auto& e : rc.structure.b_entries) w.value(e);
    w.end_array();
  }
  w.end_object();
}

void echo_sampler(JsonWriter& w, const RunConfig& rc) {
  w.key("sampler").begin_object();
  w.key("count").value(rc.sampler.count);
  w.key("seed").value(static_cast<long long>(rc.sampler.seed));
  w.key("y_radius").value(rc.sampler.y_radius);
  w.key("generator").value("mt19937_64-boxmuller-v1");
  if (!rc.sampler.box.empty()) {
    w.key("box").begin_array();
    for (auto [lo, hi] : rc.sampler.box) {
      w.begin_array();
      w.value(lo);
      w.value(hi);
      w.end_array();
    }
    w.end_array();
  }
  w.end_object();
}

void emit(const RunConfig& rc, const std::string& text) {
  if (rc.output_path.empty() || rc.output_path == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(rc.output_path, std::ios::binary);
  if (!out) throw ConfigError("cannot write to '" + rc.output_path + "'");
  out << text << "\n";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- subcommands --------------------------------------------------------------

int cmd_verify(RunConfig rc) {
  auto t0 = std::chrono::steady_clock::now();
  apply_default_box(rc);
  auto s = build_structure(rc.structure);

  auto rep = validate(s, rc.sampler);
  auto conn = connection_validate(s, rc.sampler);
  std::vector<IdentityCheck> checks = rep.checks;
  checks.insert(checks.end(), conn.checks.begin(), conn.checks.end());
  apply_tolerance_overrides(rc, checks);
  std::sort(checks.begin(), checks.end(),
            [](const IdentityCheck& a, const IdentityCheck& b) { return a.name < b.name; });
  bool all_pass = true;
  for (const auto& c : checks) all_pass = all_pass && c.pass;

  JsonWriter w;
  w.begin_object();
  w.key("schema_version").value(kReportSchemaVersion);
  w.key("tool_version").value(kToolVersion);
  w.key("command").value("verify");
  w.key("config").begin_object();
  echo_structure(w, rc);
  echo_sampler(w, rc);
  w.end_object();
  write_checks(w, checks);
  w.key("overall_status").value(all_pass ? "pass" : "fail");
  w.key("wall_time_seconds").value(seconds_since(t0));
  w.end_object();
  emit(rc, w.str());
  return all_pass ? 0 : 1;
}

int cmd_geodesic(RunConfig rc, const std::string& x0s, const std::string& y0s,
                 double t_end, long long steps, double drift_tol) {
  auto t0 = std::chrono::steady_clock::now();
  auto s = build_structure(rc.structure);
  auto x0 = parse_number_list(x0s);
  auto y0 = parse_number_list(y0s);
  if (static_cast<int>(x0.size()) != s.dimension() ||
      static_cast<int>(y0.size()) != s.dimension())
    throw ConfigError("--x0/--y0 must have the structure dimension");
  if (steps < 1) throw ConfigError("--steps must be >= 1");

  IntegratorConfig cfg;
  cfg.steps = static_cast<std::size_t>(steps);
  cfg.drift_tolerance = drift_tol;
  auto path = integrate(s, x0, y0, t_end, cfg);

  std::string csv_path = rc.output_path.empty() ? "geodesic_path.csv" : rc.output_path;
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write to '" + csv_path + "'");
    write_path_csv(out, path, s.dimension());
  }

  JsonWriter w;
  w.begin_object();
  w.key("schema_version").value(kReportSchemaVersion);
  w.key("tool_version").value(kToolVersion);
  w.key("command").value("geodesic");
  w.key("config").begin_object();
  echo_structure(w, rc);
  w.key("x0").number_array(x0);
  w.key("y0").number_array(y0);
  w.key("t_end").value(t_end);
  w.key("steps").value(steps);
  w.key("drift_tolerance").value(drift_tol);
  w.end_object();
  const auto& e = path.endpoint();
  w.key("endpoint").begin_object();
  w.key("t").value(e.t);
  w.key("x").number_array(e.x);
  w.key("y").number_array(e.y);
  w.key("F").value(e.F);
  w.end_object();
  if (path.positive_kind) w.key("arc_length").value(path.arc_length);
  w.key("drift").value(path.drift);
  w.key("flags").begin_object();
  w.key("domain_exit").value(path.domain_exit);
  w.key("drift_exceeded").value(path.drift_exceeded);
  w.end_object();
  w.key("csv_path").value(csv_path);
  w.key("overall_status").value(path.ok() ? "pass" : "warning");
  w.key("wall_time_seconds").value(seconds_since(t0));
  w.end_object();
  std::cout << w.str() << "\n";
  return 0;
}

void write_matrix(JsonWriter& w, const char* name, const std::vector<double>& m) {
  w.key(name).begin_array();
  for (int a = 0; a < 4; ++a) {
    w.begin_array();
    for (int b = 0; b < 4; ++b) w.value(m[a * 4 + b]);
    w.end_array();
  }
  w.end_array();
}

int cmd_maxwell(RunConfig rc, const std::string& mode, const std::string& at,
                const std::string& ys) {
  auto t0 = std::chrono::steady_clock::now();
  if (rc.potential.size() != 4)
    throw ConfigError("maxwell needs a 4-component potential (config or --potential)");
  auto s = build_structure(rc.structure);
  PotentialField A = [&] {
    try {
      return PotentialField::from_strings(rc.potential);
    } catch (const ParseError& e) {
      throw ConfigError(std::string("bad potential expression: ") + e.what());
    }
  }();
  if (!rc.convention.empty() && rc.convention != "paper-riemann" &&
      rc.convention != "paper-finsler")
    throw ConfigError("convention must be paper-riemann or paper-finsler");
  auto conv_or = [&](CurrentConvention dflt) {
    if (rc.convention.empty()) return dflt;
    return rc.convention == "paper-riemann" ? CurrentConvention::paper_riemann
                                            : CurrentConvention::paper_finsler;
  };

  JsonWriter w;
  w.begin_object();
  w.key("schema_version").value(kReportSchemaVersion);
  w.key("tool_version").value(kToolVersion);
  w.key("command").value("maxwell");
  w.key("config").begin_object();
  echo_structure(w, rc);
  w.key("potential").begin_array();
  for (const auto& p : rc.potential) w.value(p);
  w.end_array();
  w.key("convention").value(rc.convention.empty() ? "paper-default" : rc.convention);
  w.key("c").value(rc.c_light);
  w.key("mode").value(mode);
  w.end_object();

  int exit_code = 0;
  if (mode == "riemann" || mode == "finsler") {
    if (at.empty()) throw ConfigError("--at is required for mode " + mode);
    auto x = parse_number_list(at);
    if (x.size() != 4) throw ConfigError("--at needs 4 components");
    std::vector<double> y = ys.empty() ? s.reference_y() : parse_number_list(ys);
    if (mode == "finsler" && ys.empty())
      throw ConfigError("--y is required in finsler mode");
    if (y.size() != 4) throw ConfigError("--y needs 4 components");

    if (mode == "riemann") {
      auto fs = field_strength_riemann(A, s, x, y);
      auto res = first_equation_residual_riemann(A, x);
      double rmax = 0.0;
      for (double v : res) rmax = std::max(rmax, std::abs(v));
      auto cur = source_current_riemann(A, s, x, y, rc.c_light,
                                        conv_or(CurrentConvention::paper_riemann));
      w.key("at").number_array(x);
      write_matrix(w, "f_hh", fs.f_hh);
      write_matrix(w, "f_hh_up", fs.f_hh_up);
      w.key("first_equation_residual_max").value(rmax);
      w.key("current").begin_object();
      w.key("j").number_array(cur.j);
      w.key("convention").value(to_string(cur.convention));
      w.key("c").value(cur.c);
      w.end_object();
    } else {
      auto fs = field_strength_finsler(A, s, x, y);
      auto res = first_equation_residual_finsler(A, s, x, y);
      double rmax = 0.0;
      for (double v : res) rmax = std::max(rmax, std::abs(v));
      auto cur = source_current_finsler(A, s, x, y, rc.c_light,
                                        conv_or(CurrentConvention::paper_finsler));
      w.key("at").number_array(x);
      w.key("y").number_array(y);
      write_matrix(w, "f_hh", fs.f_hh);
      write_matrix(w, "f_hv", fs.f_hv);
      write_matrix(w, "f_hh_up", fs.f_hh_up);
      write_matrix(w, "f_hv_up", fs.f_hv_up);
      w.key("first_equation_residual_max").value(rmax);
      w.key("current").begin_object();
      w.key("j").number_array(cur.j);
      w.key("convention").value(to_string(cur.convention));
      w.key("c").value(cur.c);
      w.end_object();
    }
  } else if (mode == "correspondence") {
    apply_default_box(rc);
    SampleStream stream(rc.sampler, 4);
    std::vector<std::pair<std::vector<double>, std::vector<double>>> samples;
    std::size_t attempts = 0;
    while (samples.size() < rc.sampler.count && attempts < rc.sampler.count * 16 + 64) {
      ++attempts;
      auto [x, y] = stream.next();
      if (!s.in_domain(x, y)) continue;
      samples.emplace_back(std::move(x), std::move(y));
    }
    auto rep = correspondence_report(A, s, samples, rc.c_light);
    double tol = rc.tol_override.value_or(1e-8);
    std::vector<IdentityCheck> checks;
    auto add = [&](const char* name, double res, double tl) {
      checks.push_back({name, tl, res, rep.samples, 0, res <= tl});
    };
    add("corr_current_max_diff", rep.current_max_diff, tol);
    add("corr_f_hh_max_diff", rep.f_hh_max_diff, tol);
    add("corr_f_hv_max_abs", rep.f_hv_max_abs, 1e-12);
    add("corr_residual_finsler_max_abs", rep.residual_finsler_max_abs, tol);
    add("corr_residual_riemann_max_abs", rep.residual_riemann_max_abs, tol);
    for (auto& c : checks) {
      auto it = rc.tolerances.find(c.name);
      if (it != rc.tolerances.end()) {
        c.tolerance = it->second;
        c.pass = c.max_residual <= c.tolerance;
      }
    }
    echo_sampler(w, rc);
    write_checks(w, checks);
    bool all = true;
    for (const auto& c : checks) all = all && c.pass;
    w.key("overall_status").value(all ? "pass" : "fail");
    if (!all) exit_code = 1;
  } else {
    throw ConfigError("mode must be riemann, finsler, or correspondence");
  }

  w.key("wall_time_seconds").value(seconds_since(t0));
  w.end_object();
  emit(rc, w.str());
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finsler geometry and geometrized electrodynamics engine"};
  app.require_subcommand(1);

  RunConfig rc;
  std::string config_path;
  std::string family, expr_text, kind = "positive";
  int dim = 0;
  long long samples = -1, seed = -1;
  double tol = -1.0;
  std::string output, format;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration file");
    cmd->add_option("--family", family, "structure family");
    cmd->add_option("--dim", dim, "structure dimension");
    cmd->add_option("--expr", expr_text, "fundamental function expression");
    cmd->add_option("--kind", kind, "positive|alternating (expression family)");
    cmd->add_option("--samples", samples, "sample count");
    cmd->add_option("--seed", seed, "sampler seed");
    cmd->add_option("--tol", tol, "tolerance override for all checks");
    cmd->add_option("--output", output, "output path (default stdout)");
    cmd->add_option("--format", format, "output format (json; csv for geodesic paths)");
  };

  auto* verify = app.add_subcommand("verify", "run the identity suite for a structure");
  add_common(verify);

  auto* geodesic = app.add_subcommand("geodesic", "trace a geodesic and export CSV");
  add_common(geodesic);
  std::string x0s, y0s;
  double t_end = 1.0, drift_tol = 1e-8;
  long long steps = 1000;
  geodesic->add_option("--x0", x0s, "initial point, comma-separated")->required();
  geodesic->add_option("--y0", y0s, "initial direction, comma-separated")->required();
  geodesic->add_option("--t-end", t_end, "integration time");
  geodesic->add_option("--steps", steps, "RK4 step count");
  geodesic->add_option("--drift-tol", drift_tol, "relative F-drift tolerance");

  auto* maxwell = app.add_subcommand("maxwell", "evaluate the geometrized Maxwell equations");
  add_common(maxwell);
  std::string mode, at, ys, potential_arg, convention_arg;
  double c_light_arg = -1.0;
  maxwell->add_option("--mode", mode, "riemann|finsler|correspondence")->required();
  maxwell->add_option("--at", at, "base point x, comma-separated");
  maxwell->add_option("--y", ys, "direction y, comma-separated");
  maxwell->add_option("--potential", potential_arg,
                      "4 potential components, comma-separated expressions");
  maxwell->add_option("--convention", convention_arg, "paper-riemann|paper-finsler");
  maxwell->add_option("--c", c_light_arg, "speed constant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (!config_path.empty()) load_config_file(config_path, rc);
    if (!family.empty()) rc.structure.family = family;
    if (!expr_text.empty()) {
      rc.structure.family = "expression";
      rc.structure.expression_text = expr_text;
    }
    if (dim > 0) rc.structure.dimension = dim;
    if (!kind.empty()) rc.structure.kind = kind;
    if (samples >= 0) rc.sampler.count = static_cast<std::size_t>(samples);
    if (seed >= 0) rc.sampler.seed = static_cast<std::uint64_t>(seed);
    if (tol > 0) rc.tol_override = tol;
    if (!output.empty()) rc.output_path = output;
    if (!format.empty()) {
      rc.format = format;
      if (format != "json" && format != "csv")
        throw ConfigError("--format must be json or csv");
    }
    if (!potential_arg.empty()) rc.potential = split_commas(potential_arg);
    if (!convention_arg.empty()) rc.convention = convention_arg;
    if (c_light_arg > 0) rc.c_light = c_light_arg;
    if (rc.structure.family.empty())
      throw ConfigError("no structure specified (use --config, --family, or --expr)");

    if (verify->parsed()) return cmd_verify(std::move(rc));
    if (geodesic->parsed())
      return cmd_geodesic(std::move(rc), x0s, y0s, t_end, steps, drift_tol);
    if (maxwell->parsed()) return cmd_maxwell(std::move(rc), mode, at, ys);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << " (offset " << e.diagnostic.offset << ")\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
