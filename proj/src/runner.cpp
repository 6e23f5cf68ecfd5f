#include "soliton/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "soliton/acceptance.hpp"
#include "soliton/construction.hpp"
#include "soliton/dirichlet.hpp"
#include "soliton/io.hpp"
#include "soliton/profiles.hpp"
#include "soliton/variational.hpp"

namespace soliton {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round_significant(v, 12);
}

json vec(Vec2 p) { return json::array({num(p.x), num(p.y)}); }

// ---------------------------------------------------------------- schema

class Fields {
 public:
  Fields(const json& obj, const std::string& source, const std::string& text, std::string prefix = "")
      : obj_(obj), source_(source), text_(text), prefix_(std::move(prefix)) {
    if (!obj.is_object()) fail("", "expected a JSON object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    std::string where = source_;
    if (!key.empty()) {
      auto pos = text_.find("\"" + key + "\"");
      if (pos != std::string::npos) where += ":" + std::to_string(1 + std::count(text_.begin(), text_.begin() + long(pos), '\n'));
    }
    throw SchemaError(where + ": field '" + prefix_ + key + "': " + what);
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return obj_.at(key);
  }

  double number(const std::string& key, std::optional<double> def, double lo = -HUGE_VAL, double hi = HUGE_VAL,
                bool open_lo = false) {
    used_.insert(key);
    if (!obj_.contains(key)) {
      if (!def) fail(key, "required number is missing");
      return *def;
    }
    const json& v = obj_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    double x = v.get<double>();
    if (!(open_lo ? x > lo : x >= lo) || !(x <= hi))
      fail(key, "value " + format_number(x) + " outside " + (open_lo ? "(" : "[") + format_number(lo) + ", " +
                    format_number(hi) + "]");
    return x;
  }

  long long integer(const std::string& key, std::optional<long long> def, long long lo = LLONG_MIN,
                    long long hi = LLONG_MAX) {
    used_.insert(key);
    if (!obj_.contains(key)) {
      if (!def) fail(key, "required integer is missing");
      return *def;
    }
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    long long x = v.get<long long>();
    if (x < lo || x > hi) fail(key, "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  bool boolean(const std::string& key, bool def) {
    used_.insert(key);
    if (!obj_.contains(key)) return def;
    if (!obj_.at(key).is_boolean()) fail(key, "expected true or false");
    return obj_.at(key).get<bool>();
  }

  std::string string(const std::string& key, std::optional<std::string> def, const std::set<std::string>& allowed = {}) {
    used_.insert(key);
    if (!obj_.contains(key)) {
      if (!def) fail(key, "required string is missing");
      return *def;
    }
    if (!obj_.at(key).is_string()) fail(key, "expected a string");
    std::string s = obj_.at(key).get<std::string>();
    if (!allowed.empty() && !allowed.count(s)) {
      std::string list;
      for (auto& a : allowed) list += (list.empty() ? "" : " | ") + a;
      fail(key, "'" + s + "' is not one of " + list);
    }
    return s;
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> def, std::size_t min_size = 0) {
    used_.insert(key);
    if (!obj_.contains(key)) {
      if (!def) fail(key, "required array of numbers is missing");
      return *def;
    }
    const json& v = obj_.at(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (auto& e : v) {
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    if (out.size() < min_size) fail(key, "needs at least " + std::to_string(min_size) + " entries");
    return out;
  }

  std::vector<Vec2> points(const std::string& key, std::optional<std::vector<Vec2>> def, std::size_t min_size = 0) {
    used_.insert(key);
    if (!obj_.contains(key)) {
      if (!def) fail(key, "required array of [x, y] pairs is missing");
      return *def;
    }
    const json& v = obj_.at(key);
    if (!v.is_array()) fail(key, "expected an array of [x, y] pairs");
    std::vector<Vec2> out;
    for (auto& e : v) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        fail(key, "expected an array of [x, y] pairs");
      out.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    if (out.size() < min_size) fail(key, "needs at least " + std::to_string(min_size) + " entries");
    return out;
  }

  Vec2 point(const std::string& key, Vec2 def) {
    if (!obj_.contains(key)) {
      used_.insert(key);
      return def;
    }
    return points(key, std::nullopt).at(0);
  }

  // rejects keys not read so far
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!used_.count(it.key())) fail(it.key(), "unknown key");
  }

  Fields sub(const std::string& key) {
    used_.insert(key);
    return Fields(obj_.at(key), source_, text_, prefix_ + key + ".");
  }

 private:
  const json& obj_;
  std::string source_;
  const std::string& text_;
  std::string prefix_;
  std::set<std::string> used_;
};

SolverConfig solver_config(Fields& parent) {
  SolverConfig cfg;
  if (!parent.has("solver")) return cfg;
  Fields f = parent.sub("solver");
  cfg.h = f.number("h", cfg.h, 0.0, 1.0, true);
  cfg.sigma_schedule = f.numbers("sigma_schedule", cfg.sigma_schedule, 1);
  if (f.has("theta_cap")) cfg.theta_cap = f.number("theta_cap", std::nullopt, 0.0, 1.0, true);
  cfg.damping = f.number("damping", cfg.damping, 0.0, 1.0, true);
  cfg.tolerance = f.number("tolerance", cfg.tolerance, 0.0, 1.0, true);
  cfg.max_iterations = int(f.integer("max_iterations", cfg.max_iterations, 1, 100000));
  cfg.newton_switch = f.number("newton_switch", cfg.newton_switch, 0.0);
  cfg.linear_tolerance = f.number("linear_tolerance", cfg.linear_tolerance, 0.0, 1.0, true);
  cfg.direct_limit = std::size_t(f.integer("direct_limit", (long long)cfg.direct_limit, 1));
  cfg.grid_sequencing = f.boolean("grid_sequencing", cfg.grid_sequencing);
  cfg.sequencing_start = std::size_t(f.integer("sequencing_start", (long long)cfg.sequencing_start, 1));
  cfg.initial_slope = f.number("initial_slope", cfg.initial_slope, 0.0, 1.0, true);
  cfg.max_nodes = std::size_t(f.integer("max_nodes", (long long)cfg.max_nodes, 1));
  f.finish();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    parent.fail("solver", e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------- outputs

struct Entry {
  std::string command;
  std::uint64_t seed = 0;
  fs::path out;
  int jobs = 1;
  json results = json::object();
  std::vector<std::string> artifacts;
  std::string stage;    // first failing stage
  std::string message;
  bool passed = false;
};

// seed line in front of CSV files, "seed" key in JSON files
void stamp(Entry& e, const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string body = ss.str();
  if (p.extension() == ".json") {
    json j = json::parse(body);
    json k = json::object();
    k["seed"] = e.seed;
    for (auto it = j.begin(); it != j.end(); ++it) k[it.key()] = it.value();
    write_text_atomic(p.string(), k.dump(2) + "\n");
  } else {
    write_text_atomic(p.string(), "# seed=" + std::to_string(e.seed) + "\n" + body);
  }
  e.artifacts.push_back(fs::relative(p, e.out).string());
}

void fail_stage(Entry& e, const std::string& stage, const std::string& msg = "") {
  if (e.stage.empty()) {
    e.stage = stage;
    e.message = msg;
  }
}

// ---------------------------------------------------------------- commands

void cmd_radial(Fields& f, Entry& e) {
  int n = int(f.integer("n", 2, 1, 50));
  double c = f.number("c", 0.0, 0.0);
  double r_max = f.number("r_max", 50.0, 0.0, 1e4, true);
  double h = f.number("h", 1e-2, 0.0, 1.0, true);
  f.finish();
  RadialProfile p = solve_radial_ivp(n, c, r_max, h);
  fs::path csv = e.out / "profile.csv";
  write_profile_csv(p, csv.string());
  stamp(e, csv);
  json& R = e.results;
  R["n"] = n;
  R["c"] = num(c);
  R["r_max"] = num(p.r_max());
  R["psi_r_max"] = num(p.values.back() - p.values.front());
  R["H_r_max"] = num(p.mean_curvature(p.grid.size() - 1));
  std::string inv = p.check_invariants();
  R["invariants"] = inv.empty() ? "ok" : inv;
  if (!inv.empty()) fail_stage(e, "invariants", inv);
  if (c == 0.0) {
    double lo = HUGE_VAL, hi = HUGE_VAL, sl = HUGE_VAL;
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
      double t = p.grid[i], d = p.values[i] - p.values[0];
      lo = std::min(lo, d - (t - n));
      hi = std::min(hi, t - d);
      sl = std::min(sl, p.slopes[i] - t / std::sqrt(double(n) * n + t * t));
    }
    R["bounds"] = {{"lower", num(r_max - n)}, {"upper", num(r_max)}, {"min_slack_lower", num(lo)},
                   {"min_slack_upper", num(hi)}, {"min_slack_slope", num(sl)}};
    if (std::min({lo, hi, sl}) < -1e-8) fail_stage(e, "bounds", "two-sided bound violated");
  } else {
    // growth of psi - r over the last tenth of the range, reported only
    std::size_t i0 = p.grid.size() * 9 / 10, i1 = p.grid.size() - 1;
    double g0 = p.values[i0] - p.grid[i0], g1 = p.values[i1] - p.grid[i1];
    R["tail_growth_rate"] = num((g1 - g0) / (p.grid[i1] - p.grid[i0]));
  }
  try {
    R["gamma"] = num(normalize_at_infinity(p));
  } catch (const std::exception& ex) {
    R["gamma"] = nullptr;
    R["gamma_note"] = ex.what();
  }
}

void cmd_bvp(Fields& f, Entry& e) {
  int n = int(f.integer("n", 2, 2, 50));
  double c = f.number("c", 0.0, 0.0);
  double r = f.number("r", std::nullopt, 0.0, 1e4, true);
  double C = f.number("C", std::nullopt);
  BvpOptions o;
  o.samples = int(f.integer("samples", o.samples, 8, 100000));
  o.eps_ratio = f.number("eps_ratio", o.eps_ratio, 1.0, 100.0, true);
  f.finish();
  if (!(std::abs(C) < r)) f.fail("C", "need |C| < r");
  RadialProfile p = solve_bvp(n, c, r, C, o);
  BvpOptions o2 = o;
  o2.eps_ratio = o.eps_ratio * 1.5;
  RadialProfile q = solve_bvp(n, c, r, C, o2);
  double spread = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) spread = std::max(spread, std::abs(p.values[i] - q.values[i]));
  fs::path csv = e.out / "bvp.csv";
  write_profile_csv(p, csv.string());
  stamp(e, csv);
  json& R = e.results;
  R["n"] = n;
  R["c"] = num(c);
  R["r"] = num(r);
  R["C"] = num(C);
  R["slope_at_0"] = num(p.slopes.front());
  R["schedule_spread"] = num(spread);
  if (spread > 1e-5) fail_stage(e, "eps schedules", "profiles differ by " + format_number(spread));
  // coarse output grid, so the trapezoid check gets a looser tolerance
  std::string inv = p.check_invariants(1e-5 * (1.0 + r));
  R["invariants"] = inv.empty() ? "ok" : inv;
  if (!inv.empty()) fail_stage(e, "invariants", inv);
  if (c == 0.0 && C != 0.0) {
    BvpSandwich s = bvp_sandwich(p, r, C);
    R["sandwich"] = {{"applicable", s.applicable}, {"K", num(s.K)}, {"lower_slack", num(s.lower_slack)},
                     {"upper_slack", num(s.upper_slack)}};
    if (s.applicable && std::min(s.lower_slack, s.upper_slack) < -1e-5) fail_stage(e, "sandwich");
  }
}

void cmd_barrier(Fields& f, Entry& e) {
  auto Ks = f.numbers("K", std::vector<double>{-4, -1, -0.5, 0.5, 1, 4}, 1);
  auto ns = f.numbers("n", std::vector<double>{2, 3}, 1);
  double t0 = f.number("t_min", 0.1, 0.0, 1e4, true);
  double t1 = f.number("t_max", 5.0, 0.0, 1e4, true);
  int m = int(f.integer("samples", 491, 2, 1000000));
  f.finish();
  if (!(t1 > t0)) f.fail("t_max", "must exceed t_min");
  for (double n : ns)
    if (n != std::floor(n) || n < 1) f.fail("n", "entries must be integers >= 1");
  std::vector<double> ts(m);
  for (int i = 0; i < m; ++i) ts[i] = t0 + (t1 - t0) * i / (m - 1);
  std::ostringstream csv;
  csv << "K,n,t,Lw,Lw_tilde_defect\n";
  json rows = json::array();
  double sw = 0.0, st = 0.0;
  for (double K : Ks) {
    if (K == 0.0) f.fail("K", "K = 0 is degenerate");
    for (double n : ns) {
      auto res = barrier_residuals(K, int(n), ts);
      for (int i = 0; i < m; ++i)
        csv << format_number(K) << ',' << int(n) << ',' << format_number(ts[i]) << ',' << format_number(res.w[i]) << ','
            << format_number(res.w_tilde[i]) << '\n';
      rows.push_back({{"K", num(K)}, {"n", int(n)}, {"sup_w", num(res.sup_w)}, {"sup_w_tilde", num(res.sup_w_tilde)}});
      sw = std::max(sw, res.sup_w);
      st = std::max(st, res.sup_w_tilde);
    }
  }
  fs::path p = e.out / "barrier_residuals.csv";
  write_text_atomic(p.string(), csv.str());
  stamp(e, p);
  e.results["cases"] = rows;
  e.results["sup_w"] = num(sw);
  e.results["sup_w_tilde"] = num(st);
  if (sw > 1e-8 || st > 1e-8) fail_stage(e, "barrier identities");
}

std::shared_ptr<const ConvexDomain> read_domain(Fields& f) {
  std::string kind = f.string("domain", std::nullopt, {"disk", "ellipse", "polygon", "cone_level"});
  if (kind == "disk") {
    double R = f.number("R", std::nullopt, 0.0, 1e4, true);
    Vec2 c = f.point("center", {});
    return std::make_shared<const ConvexDomain>(ConvexDomain::disk(R, c));
  }
  if (kind == "ellipse") {
    double a = f.number("a", std::nullopt, 0.0, 1e4, true);
    double b = f.number("b", std::nullopt, 0.0, 1e4, true);
    const int rays = 720;
    std::vector<double> radii(rays), kappa(rays);
    for (int i = 0; i < rays; ++i) {
      double th = 2 * kPi * i / rays;
      radii[i] = a * b / std::hypot(b * std::cos(th), a * std::sin(th));
      double t = std::atan2(a * std::sin(th), b * std::cos(th));
      kappa[i] = a * b / std::pow(a * a * std::sin(t) * std::sin(t) + b * b * std::cos(t) * std::cos(t), 1.5);
    }
    return std::make_shared<const ConvexDomain>(ConvexDomain::radial({}, radii, kappa));
  }
  if (kind == "polygon") {
    auto v = f.points("vertices", std::nullopt, 3);
    try {
      return std::make_shared<const ConvexDomain>(ConvexDomain::polygon(v));
    } catch (const std::invalid_argument& e) {
      f.fail("vertices", e.what());
    }
  }
  auto dirs = f.points("directions", std::nullopt, 2);
  double K = f.number("K", std::nullopt, 0.0, 1e6, true);
  double k = f.number("k", std::nullopt);
  std::optional<double> es;
  if (f.has("eps_start")) es = f.number("eps_start", std::nullopt, 0.0, 1e6, true);
  for (auto& d : dirs) d = d / norm(d);
  auto choice = choose_epsilon(AsymptoticData::cone(dirs, K), k, es);
  return std::make_shared<const ConvexDomain>(std::move(choice.domain));
}

void cmd_dirichlet(Fields& f, Entry& e) {
  auto dom = read_domain(f);
  double c = f.number("c", 0.0, 0.0);
  double b = f.number("boundary_value", 0.0);
  auto fractions = f.numbers("level_fractions", std::vector<double>{0.25, 0.5, 0.75});
  SolverConfig cfg = solver_config(f);
  f.finish();

  fs::path dcsv = e.out / "domain.csv", djson = e.out / "domain.json";
  write_domain_files(*dom, dcsv.string(), djson.string());
  stamp(e, dcsv);
  stamp(e, djson);

  SolveResult s = solve_dirichlet(dom, c, b, cfg);
  json& R = e.results;
  R["c"] = num(c);
  R["boundary_value"] = num(b);
  R["diameter"] = num(dom->diameter());
  R["status"] = to_string(s.status);
  if (!s.message.empty()) R["message"] = s.message;
  R["picard_steps"] = s.picard_steps;
  R["newton_steps"] = s.newton_steps;
  R["linear_iterations"] = s.linear_iterations;
  json st = json::array();
  for (double v : s.sigma_stages) st.push_back(num(v));
  R["sigma_stages"] = st;
  json sp = json::array();
  for (double v : s.level_spacings) sp.push_back(num(v));
  R["grid_spacings"] = sp;
  R["theta_cap"] = num(s.theta_cap);
  R["residual"] = {{"sup", num(s.residual_sup)}, {"l2", num(s.residual_l2)}, {"hessian_sup", num(s.hessian_sup)}};
  if (!s.ok()) {
    fail_stage(e, "solve", to_string(s.status) + (s.message.empty() ? "" : ": " + s.message));
    return;
  }
  auto g = gradient_certificate(s.field);
  R["gradient"] = {{"max_gradient", num(g.max_gradient)}, {"bound_tanh_d", num(g.bound)},
                   {"max_ring", num(g.max_ring)}, {"max_inner", num(g.max_inner)}, {"location", vec(g.location)},
                   {"bound_ok", g.bound_ok}, {"maximum_principle_ok", g.maximum_principle_ok}};
  if (!g.passed()) fail_stage(e, "gradient certificate");
  auto cc = convexity_certificate(s.field);
  bool applies = dom->curvature().empty() || dom->max_curvature() <= 1.0;
  R["convexity"] = {{"min_eigenvalue", num(cc.min_eigenvalue)}, {"tolerance", num(cc.tolerance)},
                    {"location", vec(cc.location)}, {"asserted", applies}, {"passed", cc.passed}};
  if (applies && !cc.passed) fail_stage(e, "convexity certificate");
  double umin = *std::min_element(s.field.values().begin(), s.field.values().end());
  json ls = json::array();
  for (double fr : fractions) {
    double lv = b + fr * (umin - b);
    auto rep = level_set_identity(s.field, lv, c);
    ls.push_back({{"level", num(lv)}, {"samples", rep.samples}, {"skipped_critical", rep.skipped_critical},
                  {"sup_residual", num(rep.sup_residual)}, {"sup_ugg_mismatch", num(rep.sup_ugg_mismatch)}});
  }
  R["level_sets"] = ls;
  auto lap = induced_laplacian_check(s.field, c);
  R["induced_laplacian"] = {{"nodes", lap.nodes}, {"sup_residual", num(lap.sup_residual)}, {"l2_residual", num(lap.l2_residual)}};
  fs::path fcsv = e.out / "field.csv";
  write_field_csv(s.field, c, fcsv.string());
  stamp(e, fcsv);
}

// f(theta) = sum a_m cos(m theta) + b_m sin(m theta), with a_0 the constant term
struct Fourier {
  std::vector<double> a, b;  // b[0] unused
  double eval(double t, int d) const {
    double s = 0.0;
    for (std::size_t m = 0; m < std::max(a.size(), b.size()); ++m) {
      double am = m < a.size() ? a[m] : 0.0, bm = m < b.size() && m > 0 ? b[m] : 0.0;
      double x = double(m) * t, k = std::pow(double(m), d);
      double cs = std::cos(x), sn = std::sin(x);
      // d-th derivative of cos and sin
      double dc = d == 0 ? cs : d == 1 ? -sn : -cs;
      double ds = d == 0 ? sn : d == 1 ? cs : -sn;
      s += k * (am * dc + bm * ds);
    }
    return s;
  }
};

void cmd_construct(Fields& f, Entry& e) {
  std::string mode = f.string("mode", "cone", {"cone", "sphere"});
  auto k_list = f.numbers("k_list", std::nullopt, 1);
  ConstructionConfig cfg;
  cfg.jobs = e.jobs;
  AsymptoticData data;
  double c = 0.0;
  if (mode == "cone") {
    auto dirs = f.points("directions", std::nullopt, 2);
    for (auto& d : dirs) d = d / norm(d);
    double K = f.number("K", std::nullopt, 0.0, 1e6, true);
    c = f.number("c", 0.0, 0.0);
    if (f.has("eps_start")) cfg.eps_start = f.number("eps_start", std::nullopt, 0.0, 1e6, true);
    data = AsymptoticData::cone(dirs, K);
  } else {
    Fourier F{f.numbers("f_cos", std::vector<double>{}), f.numbers("f_sin", std::vector<double>{})};
    cfg.eps0 = f.number("eps0", cfg.eps0, 0.0, 1e6, true);
    cfg.r_min = f.number("r_min", cfg.r_min, 0.0, 1e6, true);
    data = AsymptoticData::sphere([F](double t) { return F.eval(t, 0); }, [F](double t) { return F.eval(t, 1); },
                                  [F](double t) { return F.eval(t, 2); });
  }
  cfg.probe_per_axis = int(f.integer("probe_per_axis", cfg.probe_per_axis, 2, 1000));
  cfg.upper_samples = int(f.integer("upper_samples", cfg.upper_samples, 2, 1000));
  cfg.tolerance_factor = f.number("tolerance_factor", cfg.tolerance_factor, 0.0);
  auto radii = f.numbers("blowdown_radii", std::vector<double>{});
  int ndir = int(f.integer("blowdown_directions", 8, 1, 3600));
  cfg.solver = solver_config(f);
  f.finish();

  ConstructionRun run = mode == "cone" ? construct_blowdown(data, c, k_list, cfg) : construct_c2_data(data, k_list, cfg);
  json& R = e.results;
  R["mode"] = mode;
  R["c"] = num(run.c);
  R["tolerance"] = num(run.tolerance);
  json levels = json::array();
  for (auto& L : run.levels) {
    json l;
    l["k"] = num(L.k);
    l["epsilon"] = num(L.epsilon);
    l["max_curvature"] = num(L.max_curvature);
    l["diameter"] = num(L.domain->diameter());
    l["status"] = L.solve.ok() || !L.failure.empty() ? to_string(L.solve.status) : "not run";
    if (!L.solve.message.empty()) l["message"] = L.solve.message;
    if (L.solve.ok()) {
      l["max_gradient"] = num(L.gradient.max_gradient);
      l["gradient_passed"] = L.gradient.passed();
      l["min_hessian_eigenvalue"] = num(L.convexity.min_eigenvalue);
      l["convexity_passed"] = L.convexity.passed;
      if (mode == "cone") {
        l["lower_margin"] = num(L.lower_margin);
        l["upper_margin"] = num(L.upper_margin);
        l["linear_barrier_margin"] = num(L.barrier_margin);
        l["inf_convolution_margin"] = num(L.inf_conv_margin);
      } else {
        l["boundary_deviation"] = num(L.boundary_deviation);
        l["observed_gap"] = num(L.gap_estimate);
        l["q_lower_margin"] = num(L.q_lower_margin);
        l["q_upper_margin"] = num(L.q_upper_margin);
        json ann = json::array();
        for (std::size_t a = 0; a < L.annulus_radii.size(); ++a)
          ann.push_back({{"r1", num(L.annulus_radii[a])}, {"sup_deviation", num(L.annulus_deviation[a])}});
        l["annuli"] = ann;
      }
      std::string tag = "k" + format_number(L.k);
      fs::path fc = e.out / ("field_" + tag + ".csv");
      write_field_csv(L.solve.field, run.c, fc.string());
      stamp(e, fc);
      fs::path dc = e.out / ("domain_" + tag + ".csv"), dj = e.out / ("domain_" + tag + ".json");
      write_domain_files(*L.domain, dc.string(), dj.string());
      stamp(e, dc);
      stamp(e, dj);
    }
    l["passed"] = L.passed;
    if (!L.failure.empty()) l["failure"] = L.failure;
    levels.push_back(l);
  }
  R["levels"] = levels;
  R["nested"] = run.nested;
  R["cauchy_gap"] = num(run.cauchy_gap);
  R["cauchy_tolerance"] = num(run.cauchy_tolerance);
  if (!run.passed) fail_stage(e, run.failed_stage.empty() ? "construction" : run.failed_stage);

  if (run.passed && !run.levels.empty()) {
    if (radii.empty()) {
      double rin = HUGE_VAL;
      for (Vec2 p : run.levels.back().domain->boundary_samples()) rin = std::min(rin, norm(p));
      radii = {0.25 * rin, 0.5 * rin, 0.75 * rin};
    }
    std::vector<Vec2> dirs;
    for (int i = 0; i < ndir; ++i) dirs.push_back(unit_at(2 * kPi * i / ndir));
    auto b = blowdown_ratio(run, radii, dirs);
    std::ostringstream csv;
    csv << "r,dx,dy,ratio,deviation,skipped\n";
    for (auto& s : b.samples)
      csv << format_number(s.r) << ',' << format_number(s.direction.x) << ',' << format_number(s.direction.y) << ','
          << format_number(s.value) << ',' << format_number(s.deviation) << ',' << int(s.skipped) << '\n';
    fs::path p = e.out / "blowdown.csv";
    write_text_atomic(p.string(), csv.str());
    stamp(e, p);
    R["blowdown"] = {{"sup_deviation", num(b.sup_deviation)}, {"skipped", b.skipped}};
  }
}

void cmd_audit(Fields& f, Entry& e) {
  double R = f.number("R", 2.0, 0.0, 1e4, true);
  double c = f.number("c", 0.0, 0.0);
  double h = f.number("h", 1.0 / 64, 0.0, 1.0, true);
  int trials = int(f.integer("trials", 200, 0, 1000000));
  long long pairs = f.integer("pairs", 1000000, 0);
  f.finish();
  SolverConfig cfg;
  cfg.h = h;
  SolveResult s = solve_dirichlet(ConvexDomain::disk(R), c, 0.0, cfg);
  json& out = e.results;
  out["status"] = to_string(s.status);
  if (!s.ok()) {
    fail_stage(e, "solve", to_string(s.status));
  } else {
    auto rep = maximality_test(s.field, trials, e.seed, c, e.jobs);
    out["maximality"] = {{"F_value", num(rep.F_value)}, {"worst_margin", num(rep.worst_margin)},
                         {"tolerance", num(rep.tolerance)}, {"trials", rep.trials}, {"skipped", rep.skipped},
                         {"spike_margin", num(rep.spike_margin)}, {"passed", rep.passed}};
    if (!rep.passed) fail_stage(e, "maximality");
  }
  auto cs = reversed_cauchy_schwarz_audit(std::size_t(pairs), e.seed);
  out["cauchy_schwarz"] = {{"pairs", cs.pairs}, {"violations", cs.violations}, {"worst_gap", num(cs.worst_gap)}};
  if (cs.violations) fail_stage(e, "cauchy-schwarz");
}

void cmd_acceptance(Fields& f, Entry& e) {
  bool quick = f.boolean("quick", false);
  auto ids = f.numbers("criteria", std::vector<double>{});
  f.finish();
  std::vector<int> which;
  for (double v : ids) {
    if (v != std::floor(v) || v < 1 || v > kCriteria) f.fail("criteria", "entries must be integers in [1, 13]");
    which.push_back(int(v));
  }
  if (which.empty())
    for (int i = 1; i <= kCriteria; ++i) which.push_back(i);
  std::ostringstream table;
  json rows = json::array();
  for (int id : which) {
    auto r = run_criterion(id, quick, e.jobs);
    table << format_result(r) << '\n';
    // timings stay out of the JSON so reruns compare equal
    rows.push_back({{"id", r.id}, {"title", r.title}, {"passed", r.passed}});
    if (!r.passed) fail_stage(e, "criterion " + std::to_string(id), r.detail);
  }
  fs::path p = e.out / "acceptance.txt";
  write_text_atomic(p.string(), table.str());
  stamp(e, p);
  e.results["quick"] = quick;
  e.results["criteria"] = rows;
}

const std::map<std::string, void (*)(Fields&, Entry&)> kCommands = {
    {"radial", cmd_radial}, {"bvp", cmd_bvp},     {"barrier", cmd_barrier},      {"dirichlet", cmd_dirichlet},
    {"construct", cmd_construct}, {"audit", cmd_audit}, {"acceptance", cmd_acceptance}};

void write_summary(const Entry& e, int code) {
  json j;
  j["command"] = e.command;
  j["seed"] = e.seed;
  j["status"] = code == kExitPass ? "pass" : code == kExitNumerical ? "fail" : "error";
  j["exit_code"] = code;
  if (!e.stage.empty()) j["stage"] = e.stage;
  if (!e.message.empty()) j["message"] = e.message;
  j["results"] = e.results;
  j["artifacts"] = e.artifacts;
  write_text_atomic((e.out / "summary.json").string(), j.dump(2) + "\n");
}

// schema problems are thrown before any computation starts
int run_entry(const json& obj, const std::string& source, const std::string& text, const fs::path& default_out,
              bool allow_output, int jobs, std::ostream& log, std::mutex& log_mu) {
  Entry e;
  e.out = default_out;
  e.jobs = jobs;
  int code = kExitPass;
  try {
    Fields f(obj, source, text);
    e.command = f.string("command", std::nullopt, {"radial", "bvp", "barrier", "dirichlet", "construct", "audit", "acceptance"});
    e.seed = std::uint64_t(f.integer("seed", 0, 0));
    std::string output = f.string("output", "");
    if (allow_output && !output.empty()) e.out = output;
    fs::create_directories(e.out);
    kCommands.at(e.command)(f, e);
    e.passed = e.stage.empty();
    code = e.passed ? kExitPass : kExitNumerical;
  } catch (const SchemaError& ex) {
    e.stage = "schema";
    e.message = ex.what();
    code = kExitUsage;
  } catch (const NumericalFailure& ex) {
    e.stage = ex.stage();
    e.message = ex.what();
    code = kExitNumerical;
  } catch (const std::exception& ex) {
    e.stage = "run";
    e.message = ex.what();
    code = kExitNumerical;
  }
  try {
    fs::create_directories(e.out);
    write_summary(e, code);
  } catch (const std::exception& ex) {
    std::lock_guard<std::mutex> lk(log_mu);
    log << "cannot write summary: " << ex.what() << '\n';
    if (code == kExitPass) code = kExitNumerical;
  }
  std::lock_guard<std::mutex> lk(log_mu);
  log << (e.command.empty() ? "?" : e.command) << ": " << (code == 0 ? "pass" : code == 1 ? "FAIL" : "ERROR");
  if (!e.stage.empty()) log << " [" << e.stage << "]";
  if (!e.message.empty()) log << " " << e.message;
  log << " -> " << e.out.string() << '\n';
  return code;
}

}  // namespace

int run_manifest_text(const std::string& text, const std::string& source, const RunOptions& opt, std::ostream& log) {
  std::mutex log_mu;
  json doc;
  fs::path out = opt.out_dir.empty() ? fs::path("out") : fs::path(opt.out_dir);
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& ex) {
    std::size_t line = 1 + std::count(text.begin(), text.begin() + long(std::min(ex.byte, text.size())), '\n');
    Entry e;
    e.out = out;
    e.stage = "schema";
    e.message = source + ":" + std::to_string(line) + ": invalid JSON (" + ex.what() + ")";
    log << e.message << '\n';
    try {
      fs::create_directories(out);
      write_summary(e, kExitUsage);
    } catch (const std::exception&) {
    }
    return kExitUsage;
  }
  if (!doc.is_array()) return run_entry(doc, source, text, out, opt.out_dir.empty(), opt.jobs, log, log_mu);

  // independent entries, each in its own directory
  const std::size_t n = doc.size();
  std::vector<int> codes(n, kExitPass);
  std::atomic<std::size_t> next{0};
  std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::size_t(std::max(1, opt.jobs)), n));
  auto work = [&] {
    for (std::size_t i; (i = next++) < n;) {
      fs::path dir = out / ("entry_" + std::to_string(i));
      codes[i] = run_entry(doc[i], source + "[" + std::to_string(i) + "]", text, dir, false, 1, log, log_mu);
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  json j;
  j["entries"] = json::array();
  int code = kExitPass;
  for (std::size_t i = 0; i < n; ++i) {
    j["entries"].push_back({{"index", i}, {"directory", "entry_" + std::to_string(i)}, {"exit_code", codes[i]}});
    code = std::max(code, codes[i]);
  }
  j["exit_code"] = code;
  fs::create_directories(out);
  write_text_atomic((out / "summary.json").string(), j.dump(2) + "\n");
  return code;
}

int run_manifest_file(const std::string& path, const RunOptions& opt, std::ostream& log) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    log << "cannot read manifest " << path << '\n';
    return kExitUsage;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return run_manifest_text(ss.str(), path, opt, log);
}

}  // namespace soliton
