#pragma once

// Command dispatch for the regcalc tool: reads a JSON config, runs one
// command and emits a report.

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "regcalc/config.hpp"
#include "regcalc/report.hpp"

namespace regcalc::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { exit_pass = 0, exit_fail = 1, exit_inconclusive = 2, exit_usage = 64, exit_precondition = 65 };

inline constexpr int kFormatVersion = 1;

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"check-algebra", "check-spaces", "check-atlas", "build-partition",
                                              "glue",          "pipeline",     "multiplicity", "residual"};
  return names;
}

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::size_t> grid;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string report_path;
  std::string format = "text";
};

/// Global knobs; command-line flags override the config's "settings" section.
struct Settings {
  std::optional<std::size_t> grid;
  std::optional<double> tolerance;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::size_t samples = 1000;
  std::size_t base_intervals = 0;
  int refinements = 4;
  int levels = 3;

  std::size_t grid_or(std::size_t fallback) const { return grid.value_or(fallback); }
  double tolerance_or(double fallback) const { return tolerance.value_or(fallback); }

  Budget budget() const {
    Budget b;
    b.base_intervals = base_intervals;
    b.refinements = refinements;
    b.levels = levels;
    b.jobs = jobs;
    return b;
  }

  Json to_json() const {
    return Json{{"grid", grid ? Json(*grid) : Json(nullptr)},
                {"tolerance", tolerance ? Json(*tolerance) : Json(nullptr)},
                {"seed", seed},
                {"jobs", jobs},
                {"samples", samples},
                {"base_intervals", base_intervals},
                {"refinements", refinements},
                {"levels", levels}};
  }
};

inline Settings read_settings(const Json& root, const Options& opt) {
  using namespace config;
  Settings s;
  if (const Json* j = optional(root, "settings")) {
    const std::string p = "/settings";
    auto positive = [&](const char* key) -> std::optional<std::int64_t> {
      if (const Json* v = optional(*j, key)) {
        const auto n = read_int(*v, child(p, key));
        if (n < 1) fail(child(p, key), "must be positive");
        return n;
      }
      return std::nullopt;
    };
    if (auto v = positive("grid")) s.grid = static_cast<std::size_t>(*v);
    if (const Json* v = optional(*j, "tolerance")) {
      s.tolerance = read_double(*v, child(p, "tolerance"));
      if (!(*s.tolerance > 0.0)) fail(child(p, "tolerance"), "must be positive");
    }
    if (const Json* v = optional(*j, "seed")) s.seed = static_cast<std::uint64_t>(read_int(*v, child(p, "seed")));
    if (auto v = positive("jobs")) s.jobs = static_cast<int>(*v);
    if (auto v = positive("samples")) s.samples = static_cast<std::size_t>(*v);
    if (auto v = positive("base_intervals")) s.base_intervals = static_cast<std::size_t>(*v);
    if (auto v = positive("refinements")) {
      if (*v < 3) fail(child(p, "refinements"), "at least three grids are needed");
      s.refinements = static_cast<int>(*v);
    }
    if (auto v = positive("levels")) s.levels = static_cast<int>(*v);
  }
  if (opt.grid) s.grid = opt.grid;
  if (opt.tol) s.tolerance = opt.tol;
  if (opt.seed) s.seed = *opt.seed;
  if (opt.jobs) s.jobs = *opt.jobs;
  return s;
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

/// "fail" dominates "inconclusive", which dominates "pass".
inline std::string worst(const std::string& a, const std::string& b) {
  if (a == "fail" || b == "fail") return "fail";
  if (a == "inconclusive" || b == "inconclusive") return "inconclusive";
  return "pass";
}

struct Outcome {
  Json result = Json::object();
  std::string verdict = "pass";
};

// ---------------------------------------------------------------------------
// Commands

namespace detail {

using namespace config;

inline const Json& section(const Json& root, const std::string& key) { return require(root, "", key); }

inline Atlas atlas_of(const Json& root) { return read_atlas(section(root, "atlas"), "/atlas"); }

inline double margin_of(const Json& root) {
  if (const Json* p = optional(root, "partition")) {
    if (const Json* m = optional(*p, "margin")) {
      const double v = read_double(*m, "/partition/margin");
      if (!(v > 0.0)) fail("/partition/margin", "must be positive");
      return v;
    }
  }
  return 0.1;
}

/// Top-level "structure": the B-spec of the manifold, with k from the atlas
/// unless given.
inline RegularitySpec structure_of(const Json& root, const Atlas& atlas, const MapTable& maps) {
  return read_spec(section(root, "structure"), "/structure", maps, atlas.k(), atlas.k_check());
}

inline std::vector<Index> index_list(const Json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected a list of indices");
  std::vector<Index> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_index(j[i], child(path, i)));
  return out;
}

inline Outcome check_algebra(const Json& root, const Settings& st) {
  const Json& sec = section(root, "index_structure");
  const auto ds = read_structure(sec, "/index_structure");
  SampleBudget sb;
  sb.seed = st.seed;
  sb.triples = std::max<std::size_t>(st.samples, 1) * 10;
  const auto laws = check_distributive_laws(ds, sb);
  Outcome out;
  out.result["structure"] = std::string(structure_name(ds.kind()));
  out.result["base"] = ds.base().describe();
  out.result["laws"] = report::laws(laws);
  out.verdict = report::verdict(laws.passed());
  out.result["laws"]["verdict"] = out.verdict;

  if (const Json* g = optional(sec, "gamma_z")) {
    // Gamma_k[z] for integer additive degrees
    if (!g->is_array()) fail("/index_structure/gamma_z", "expected a list");
    Json sets = Json::array();
    for (std::size_t n = 0; n < g->size(); ++n) {
      const auto p = child("/index_structure/gamma_z", n);
      const Order k = read_order(require((*g)[n], p, "k"), child(p, "k"));
      const auto b = read_int(require((*g)[n], p, "beta0_j"), child(p, "beta0_j"));
      const Index z = read_index(require((*g)[n], p, "z"), child(p, "z"));
      const auto set = gamma_z(AdditiveDegreeSet::integers(k), b, z);
      sets.push_back(Json{{"k", k.describe()}, {"beta0_j", b}, {"z", to_string(z)}, {"set", set.describe()}});
    }
    out.result["gamma_z"] = sets;
  }
  if (const Json* g = optional(sec, "glued_indices")) {
    const auto maps = read_maps(root);
    const std::string p = "/index_structure/glued_indices";
    auto m = [&](const char* key) { return lookup_map(maps, require(*g, p, key), child(p, key)); };
    const auto gi = glued_regularity_indices(ds, m("alpha"), m("beta"), m("alpha0"), m("beta0"));
    out.result["glued_indices"] = Json{{"alpha0", to_string(gi.alpha0)}, {"beta0", to_string(gi.beta0)}};
  }
  return out;
}

inline Outcome check_spaces(const Json& root, const Settings& st) {
  const Json& sec = section(root, "spaces");
  const std::string p = "/spaces";
  const auto maps = read_maps(root);
  const auto spec = read_spec(sec, p, maps);
  const auto U = read_domain(require(sec, p, "domain"), child(p, "domain"));
  std::vector<Index> S;
  if (const Json* s = optional(sec, "S"))
    S = index_list(*s, child(p, "S"));
  else
    for (int i = 0; i <= spec.order(); ++i) S.emplace_back(i);
  const auto budget = st.budget();
  Outcome out;
  out.result["family"] = std::string(family_name(spec.kind));
  out.result["k"] = spec.k.describe();
  out.result["domain"] = U.describe();
  Json claims = Json::array();
  if (const Json* fs = optional(sec, "functions")) {
    const auto functions = read_exprs(*fs, child(p, "functions"));
    for (std::size_t n = 0; n < functions.size(); ++n) {
      MembershipClaim claim;
      try {
        claim = check_membership(functions[n], U, spec, S, budget);
      } catch (const ConfigError& e) {
        fail(child(child(p, "functions"), n), e.what());
      }
      out.verdict = worst(out.verdict, report::verdict(claim.verdict));
      claims.push_back(report::membership(claim, true));
    }
  }
  out.result["functions"] = claims;
  const Json* tests = optional(sec, "tests");
  const Json* bumps = optional(sec, "bumps");
  if (tests && bumps) {
    const auto rep = check_bkab_presheaf(spec, U, S, read_exprs(*tests, child(p, "tests")),
                                         read_exprs(*bumps, child(p, "bumps")), budget);
    Json failures = Json::array();
    for (const auto& c : rep.failures)
      failures.push_back(Json{{"bump", c.bump}, {"test", c.test}, {"i", to_string(c.i)}, {"verdict", verdict_name(c.verdict)}});
    out.result["presheaf"] = Json{{"rejected", rep.rejected},
                                  {"cases", rep.cases.size()},
                                  {"failures", failures},
                                  {"verdict", report::verdict(rep.passed())}};
    out.verdict = worst(out.verdict, report::verdict(rep.passed()));
  }
  return out;
}

inline Outcome check_atlas(const Json& root, const Settings& st) {
  const auto atlas = atlas_of(root);
  auto rep = verify_atlas(atlas, st.grid_or(64), st.jobs);
  if (st.tolerance) rep.tolerance = *st.tolerance;
  Outcome out;
  out.result["dim"] = atlas.dim();
  out.result["charts"] = atlas.size();
  out.result["k"] = atlas.k().describe();
  out.result["transitions"] = report::atlas_report(rep);
  out.verdict = report::verdict(rep.passed());
  if (optional(root, "structure")) {
    const auto maps = read_maps(root);
    const auto srep = check_regular_structure(atlas, structure_of(root, atlas, maps), st.budget());
    out.result["structure"] = report::structure_report(srep);
    out.verdict = worst(out.verdict, report::verdict(srep.verdict()));
  }
  return out;
}

inline Outcome build_partition(const Json& root, const Settings& st) {
  const auto atlas = atlas_of(root);
  const auto pou = regcalc::build_partition(atlas, margin_of(root), st.samples);
  const double tol = st.tolerance_or(1e-12);
  const auto rep = verify_partition(pou, st.samples);
  Outcome out;
  Json charts = Json::array();
  for (std::size_t s = 0; s < atlas.size(); ++s) {
    Json supports = Json::array();
    for (const auto& b : pou.support(s)) supports.push_back(report::box(b));
    charts.push_back(Json{{"chart", atlas.chart(s).name}, {"bump", to_string(pou.bump_of(s))}, {"support", supports}});
  }
  out.result["margin"] = pou.margin();
  out.result["charts"] = charts;
  out.result["check"] = report::partition_report(rep, tol);
  out.verdict = report::verdict(rep.passed(tol));
  return out;
}

inline GlueMode mode_of(const Json& sec, const std::string& path) {
  if (const Json* m = optional(sec, "mode")) {
    const auto name = read_string(*m, child(path, "mode"));
    if (name == "symbolic") return GlueMode::symbolic;
    if (name == "grid") return GlueMode::grid;
    fail(child(path, "mode"), "unknown mode '" + name + "' (expected symbolic or grid)");
  }
  return GlueMode::symbolic;
}

inline Outcome glue(const Json& root, const Settings& st) {
  const auto atlas = atlas_of(root);
  const Json& sec = section(root, "connection");
  const auto mode = mode_of(sec, "/connection");
  const auto locals = read_locals(require(sec, "/connection", "locals"), "/connection/locals", atlas, st.budget());
  const auto pou = regcalc::build_partition(atlas, margin_of(root), st.samples);
  const auto g = regcalc::glue(atlas, pou, locals, mode);
  const auto law = verify_connection_law(g, st.grid_or(64), st.tolerance_or(default_law_tolerance(mode)), st.jobs);
  Outcome out;
  out.result["mode"] = std::string(mode_name(mode));
  out.result["provenance"] = g.provenance();
  out.result["law"] = report::transformation(law);
  out.verdict = report::verdict(law.passed());
  return out;
}

inline ConnectiveStructure connective_of(const Json& root, const MapTable& maps) {
  return read_connective(section(root, "connective"), "/connective", maps);
}

inline Outcome pipeline(const Json& root, const Settings& st) {
  const auto maps = read_maps(root);
  const Json& sec = section(root, "pipeline");
  const std::string p = "/pipeline";
  auto map = [&](const char* key) { return lookup_map(maps, require(sec, p, key), child(p, key)); };
  auto atlas = atlas_of(root);
  const Json& conn = section(root, "connection");
  PipelineInput in{atlas,
                   structure_of(root, atlas, maps),
                   read_structure(section(root, "index_structure"), "/index_structure"),
                   map("local_alpha0"),
                   map("local_beta0"),
                   connective_of(root, maps),
                   read_index(require(sec, p, "z"), child(p, "z")),
                   map("theta"),
                   map("vartheta"),
                   read_locals(require(conn, "/connection", "locals"), "/connection/locals", atlas, st.budget()),
                   margin_of(root),
                   {},
                   {},
                   std::nullopt,
                   {},
                   st.budget(),
                   st.grid_or(64),
                   st.tolerance_or(1e-6)};
  if (const Json* t = optional(sec, "tests")) in.tests = read_exprs(*t, child(p, "tests"));
  if (const Json* b = optional(sec, "bumps")) in.bumps = read_exprs(*b, child(p, "bumps"));
  if (const Json* d = optional(sec, "probe_domain")) in.probe_domain = read_domain(*d, child(p, "probe_domain"));
  if (const Json* t = optional(sec, "target_tag")) in.target_tag = read_string(*t, child(p, "target_tag"));
  const auto res = regular_existence_pipeline(in);
  Outcome out;
  out.result["indices"] = Json{{"alpha0", to_string(res.indices.alpha0)}, {"beta0", to_string(res.indices.beta0)}};
  out.result["xi"] = res.xi;
  out.result["law"] = report::transformation(res.law);
  out.result["common_overlaps"] = res.common_overlaps;
  Json reg = Json::array();
  for (const auto& r : res.regularity)
    reg.push_back(Json{{"chart", r.chart},
                       {"domain", report::box(r.domain)},
                       {"coefficient", r.coefficient},
                       {"claim", report::globalized(r.claim)}});
  out.result["regularity"] = reg;
  out.verdict = report::verdict(res.verdict);
  return out;
}

inline Outcome multiplicity(const Json& root, const Settings& st) {
  const auto atlas = atlas_of(root);
  const Json& sec = section(root, "multiplicity");
  const std::string p = "/multiplicity";
  const auto F = read_family(require(sec, p, "F"), child(p, "F"), atlas);
  const auto G = read_family(require(sec, p, "G"), child(p, "G"), atlas);
  WitnessBudget wb;
  wb.intervals = st.grid_or(0);
  wb.jobs = st.jobs;
  wb.refine = static_cast<std::size_t>(value_or<std::int64_t>(sec, p, "refine", 10, read_int));
  wb.seeds = static_cast<std::size_t>(value_or<std::int64_t>(sec, p, "seeds", 64, read_int));
  if (wb.refine < 2) fail(child(p, "refine"), "must be at least 2");
  if (wb.seeds < 1) fail(child(p, "seeds"), "must be positive");
  const auto rep = locally_different(F, G, wb);
  Outcome out;
  out.result["refine"] = wb.refine;
  out.result["seeds"] = wb.seeds;
  out.result["witnesses"] = report::witnesses(rep);
  out.verdict = rep.all_found() ? "pass" : "inconclusive";
  return out;
}

inline Outcome residual(const Json& root, const Settings& st) {
  const auto maps = read_maps(root);
  const auto atlas = atlas_of(root);
  const Json& sec = section(root, "residual");
  const std::string p = "/residual";
  const auto cs = connective_of(root, maps);
  const auto locals = read_locals(require(section(root, "connection"), "/connection", "locals"), "/connection/locals",
                                  atlas, st.budget());
  const auto omega = read_family(require(sec, p, "omega"), child(p, "omega"), atlas);
  const XiKey key{cs.roles().alpha0, cs.roles().beta0,
                  lookup_map(maps, require(sec, p, "theta"), child(p, "theta")).name(),
                  lookup_map(maps, require(sec, p, "vartheta"), child(p, "vartheta")).name()};
  const auto rs = regcalc::residual(locals, cs, key, atlas, omega, margin_of(root), st.grid_or(0));
  const double tol = st.tolerance_or(1e-6);
  double sup = 0.0;
  for (const auto& r : rs) sup = std::isnan(r.sup) ? INFINITY : std::max(sup, r.sup);
  Outcome out;
  out.result["xi"] = key.describe();
  out.result["entries"] = report::residuals(rs);
  out.result["max_sup"] = report::number(sup);
  out.result["tolerance"] = tol;
  out.verdict = report::verdict(sup <= tol);
  return out;
}

inline Outcome dispatch(const std::string& command, const Json& root, const Settings& st) {
  if (command == "check-algebra") return check_algebra(root, st);
  if (command == "check-spaces") return check_spaces(root, st);
  if (command == "check-atlas") return check_atlas(root, st);
  if (command == "build-partition") return build_partition(root, st);
  if (command == "glue") return glue(root, st);
  if (command == "pipeline") return pipeline(root, st);
  if (command == "multiplicity") return multiplicity(root, st);
  if (command == "residual") return residual(root, st);
  throw ConfigError("unknown command '" + command + "'");
}

inline void flatten(const Json& j, const std::string& prefix, std::ostream& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_array() && !j.empty() && (j.front().is_object() || j.front().is_array())) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
  } else {
    out << prefix << ": " << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
  }
}

}  // namespace detail

/// Renders a report. The structured form is JSON with "timings" last; the
/// text form lists every field as a dotted path.
inline std::string render(const Json& report, const std::string& format) {
  if (format == "structured") return report.dump(2) + "\n";
  std::ostringstream out;
  out << "regcalc " << report.value("command", "") << ": " << report.value("verdict", "") << "\n";
  for (const auto& [k, v] : report.items()) {
    if (k == "command" || k == "verdict") continue;
    detail::flatten(v, k, out);
  }
  return out.str();
}

inline int exit_code(const std::string& verdict) {
  if (verdict == "pass") return exit_pass;
  if (verdict == "inconclusive") return exit_inconclusive;
  return exit_fail;
}

/// Runs a command on an already parsed config. Errors are folded into the
/// report; the returned code follows the exit-code contract.
inline int execute(const Options& opt, const std::string& config_text, Json& report) {
  const auto start = std::chrono::steady_clock::now();
  report = Json::object();
  report["format_version"] = kFormatVersion;
  report["command"] = opt.command;
  report["config_sha256"] = sha256_hex(config_text);
  int code = exit_pass;
  try {
    Json root;
    try {
      root = Json::parse(config_text);
    } catch (const Json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("/: the config must be a JSON object");
    const auto st = read_settings(root, opt);
    report["settings"] = st.to_json();
    auto outcome = detail::dispatch(opt.command, root, st);
    report["result"] = std::move(outcome.result);
    report["verdict"] = outcome.verdict;
    code = exit_code(outcome.verdict);
  } catch (const PreconditionError& e) {
    report["verdict"] = "precondition";
    report["error"] = Json{{"kind", "precondition"}, {"hypothesis", e.hypothesis()}, {"message", e.what()}};
    code = exit_precondition;
  } catch (const ConfigError& e) {
    report["verdict"] = "config-error";
    report["error"] = Json{{"kind", "config"}, {"message", e.what()}};
    code = exit_usage;
  } catch (const SyntaxError& e) {
    report["verdict"] = "config-error";
    report["error"] = Json{{"kind", "config"}, {"message", e.what()}};
    code = exit_usage;
  } catch (const std::exception& e) {
    report["verdict"] = "fail";
    report["error"] = Json{{"kind", "error"}, {"message", e.what()}};
    code = exit_fail;
  }
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  report["timings"] = Json{{"total_ms", ms}};
  return code;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Checks and constructions for regular connections on manifolds", "regcalc"};
  Options opt;
  app.add_option("command", opt.command, "Command to run")->required()->check(CLI::IsMember(commands()));
  app.add_option("--config", opt.config_path, "JSON config file")->required();
  app.add_option("--grid", opt.grid, "Sampling intervals per axis")->check(CLI::PositiveNumber);
  app.add_option("--tol", opt.tol, "Tolerance for residual checks")->check(CLI::PositiveNumber);
  app.add_option("--seed", opt.seed, "Seed for sampled checks");
  app.add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--report", opt.report_path, "Write the report to this file instead of stdout");
  app.add_option("--format", opt.format, "Report format")->check(CLI::IsMember({"text", "structured"}));
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_pass;
  } catch (const CLI::ParseError& e) {
    err << "regcalc: " << e.what() << "\n";
    return exit_usage;
  }

  std::ifstream in(opt.config_path, std::ios::binary);
  if (!in) {
    err << "regcalc: cannot read config '" << opt.config_path << "'\n";
    return exit_usage;
  }
  std::ostringstream text;
  text << in.rdbuf();

  Json report;
  const int code = execute(opt, text.str(), report);
  if (report.contains("error")) err << "regcalc: " << report["error"]["message"].get<std::string>() << "\n";
  const std::string rendered = render(report, opt.format);
  if (opt.report_path.empty()) {
    out << rendered;
  } else {
    std::ofstream file(opt.report_path, std::ios::binary);
    if (!file) {
      err << "regcalc: cannot write report '" << opt.report_path << "'\n";
      return exit_usage;
    }
    file << rendered;
    out << "regcalc " << opt.command << ": " << report["verdict"].get<std::string>() << "\n";
  }
  return code;
}

}  // namespace regcalc::cli
