#include "weyllab/config.hpp"

#include <optional>
#include <set>

#include "weyllab/toml_lite.hpp"

namespace weyllab {

namespace {

using nlohmann::json;

std::string join_errors(const std::vector<std::string>& errors) {
  std::string msg = "invalid config:";
  for (const auto& e : errors) msg += "\n  " + e;
  return msg;
}

json complex_pair(cd v) { return json::array({v.real(), v.imag()}); }

// Typed access to one table; records problems instead of throwing.
class Reader {
 public:
  Reader(const json& table, std::string name, std::vector<std::string>& errors)
      : t_(table), name_(std::move(name)), errors_(errors) {
    if (!t_.is_null() && !t_.is_object()) err("", "expected a table");
  }

  bool has(const std::string& key) const { return t_.is_object() && t_.contains(key); }

  double num(const std::string& key, double fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number()) return err(key, "expected a number"), fallback;
    return v->get<double>();
  }

  std::optional<double> opt_num(const std::string& key) {
    if (!has(key)) {
      seen_.insert(key);
      return std::nullopt;
    }
    return num(key, 0.0);
  }

  long long integer(const std::string& key, long long fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) return err(key, "expected an integer"), fallback;
    return v->get<long long>();
  }

  bool flag(const std::string& key, bool fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) return err(key, "expected true or false"), fallback;
    return v->get<bool>();
  }

  std::string str(const std::string& key, const std::string& fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_string()) return err(key, "expected a string"), fallback;
    return v->get<std::string>();
  }

  std::vector<double> nums(const std::string& key, std::vector<double> fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_array()) return err(key, "expected an array of numbers"), fallback;
    std::vector<double> out;
    for (const auto& x : *v) {
      if (!x.is_number()) return err(key, "expected an array of numbers"), fallback;
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::pair<double, double> range(const std::string& key, std::pair<double, double> fallback) {
    const auto v = nums(key, {fallback.first, fallback.second});
    if (v.size() != 2) return err(key, "expected [lo, hi]"), fallback;
    if (!(v[0] < v[1])) err(key, "expected lo < hi");
    return {v[0], v[1]};
  }

  cd complex(const std::string& key, cd fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (v->is_number()) return {v->get<double>(), 0.0};
    if (v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number()) {
      return {(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
    err(key, "expected a number or [re, im]");
    return fallback;
  }

  json table(const std::string& key) {
    const json* v = get(key);
    if (!v) return json::object();
    if (!v->is_object()) return err(key, "expected a table"), json::object();
    return *v;
  }

  void ignore(const std::string& key) { seen_.insert(key); }

  void err(const std::string& key, const std::string& what) {
    errors_.push_back("[" + name_ + "]" + (key.empty() ? "" : "." + key) + ": " + what);
  }

  // Reports keys that were never read.
  void finish() {
    if (!t_.is_object()) return;
    for (auto it = t_.begin(); it != t_.end(); ++it) {
      if (!seen_.count(it.key())) err(it.key(), "unknown key");
    }
  }

 private:
  const json* get(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return nullptr;
    return &t_.at(key);
  }

  const json& t_;
  std::string name_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

const json& section(const json& raw, const char* name) {
  static const json empty = json::object();
  return raw.contains(name) ? raw.at(name) : empty;
}

ScheduleInput read_schedule(Reader& r, int n, double& tau0, json& out) {
  ScheduleInput in;
  in.n = n;
  const std::string mode = r.str("mode", "lab");
  if (mode != "lab" && mode != "paper") r.err("mode", "expected \"lab\" or \"paper\"");
  in.mode = mode == "paper" ? ScheduleMode::Paper : ScheduleMode::Lab;
  in.kappa = r.num("kappa", in.kappa);
  in.s = r.num("s", in.s);
  in.eps = r.num("eps", in.eps);
  in.M = r.opt_num("M");
  in.Mtilde = r.opt_num("Mtilde");
  in.n2_slack = r.num("n2_slack", in.n2_slack);
  in.delta_rule = r.str("delta_rule", in.delta_rule);
  in.eps_delta = r.num("eps_delta", in.eps_delta);
  in.k_lab = r.num("k_lab", in.k_lab);
  in.L = r.num("L", in.L);
  in.R = r.num("R", in.R);
  in.n1_lab = r.num("n1_lab", in.n1_lab);
  in.n2_lab = r.num("n2_lab", in.n2_lab);
  tau0 = r.num("tau0", 0.5);
  if (!(tau0 > 0.0 && tau0 < 1.0)) r.err("tau0", "expected 0 < tau0 < 1");
  // Derived tables from an earlier echo are recomputed, not read.
  r.ignore("paper");
  r.ignore("lab");
  out = {{"mode", mode},     {"kappa", in.kappa},         {"s", in.s},
         {"eps", in.eps},    {"n2_slack", in.n2_slack},   {"delta_rule", in.delta_rule},
         {"eps_delta", in.eps_delta}, {"k_lab", in.k_lab}, {"L", in.L},
         {"R", in.R},        {"n1_lab", in.n1_lab},       {"n2_lab", in.n2_lab},
         {"tau0", tau0}};
  if (in.M) out["M"] = *in.M;
  if (in.Mtilde) out["Mtilde"] = *in.Mtilde;
  return in;
}

// Paper-mode counterparts of the lab values along an h ladder.
void add_derived_schedule(const ScheduleInput& in, double tau0, const std::vector<double>& hs,
                          json& sched, std::vector<std::string>& errors) {
  const auto v = schedule_violations(in);
  for (const auto& e : v) errors.push_back("[schedule]: violated " + e);
  if (!v.empty()) return;
  const ParameterSchedule ps = build_schedule(in);
  json paper = {{"M", ps.M}, {"Mtilde", ps.Mtilde}, {"N1", ps.N1}, {"N2", ps.N2}};
  json pd = json::array(), pl = json::array(), pr = json::array(), ld = json::array(),
       eps0 = json::array();
  for (double h : hs) {
    pd.push_back(ps.delta_paper(h, tau0));
    pl.push_back(ps.L_paper(h));
    pr.push_back(ps.R_paper(h));
    ld.push_back(ps.delta_lab(h));
    eps0.push_back(ps.eps0(h, tau0));
  }
  paper["h"] = hs;
  paper["delta"] = pd;
  paper["L"] = pl;
  paper["R"] = pr;
  paper["eps0"] = eps0;
  sched["paper"] = paper;
  sched["lab"] = {{"h", hs}, {"delta", ld}, {"L", in.L}, {"R", in.R}};
}

CoefficientLaw read_law(Reader& r, json& out) {
  const std::string kind = r.str("law", "uniform_ball");
  const auto sigmas = r.nums("sigma", {});
  const bool real_only = r.flag("real_only", false);
  CoefficientLaw law;
  out["law"] = kind;
  out["real_only"] = real_only;
  if (kind == "uniform_ball") {
    law = CoefficientLaw::uniform_ball(1.0);
    if (!sigmas.empty()) r.err("sigma", "only used with the truncated_gaussian law");
  } else if (kind == "truncated_gaussian") {
    if (sigmas.empty()) {
      r.err("sigma", "truncated_gaussian needs sigma = [...]");
    } else {
      bool ok = true;
      for (double s : sigmas) ok = ok && s > 0.0;
      if (!ok) {
        r.err("sigma", "sigmas must be positive");
      } else {
        law = CoefficientLaw::truncated_gaussian(sigmas, 1.0);
      }
    }
    out["sigma"] = sigmas;
  } else {
    r.err("law", "expected \"uniform_ball\" or \"truncated_gaussian\"");
  }
  law.real_only = real_only;
  return law;
}

SymbolModel read_model(const json& raw, std::vector<std::string>& errors, json& out) {
  Reader r(section(raw, "model"), "model", errors);
  const std::string name = r.str("name", "schrodinger_cos");
  const json params = r.table("params");
  r.finish();
  try {
    SymbolModel m = make_symbol(name, params);
    // Parameters not consumed by the model are reported.
    for (auto it = params.begin(); it != params.end(); ++it) {
      if (!m.params.contains(it.key())) {
        errors.push_back("[model.params]." + it.key() + ": unknown parameter for " + name);
      }
    }
    out = {{"name", name}, {"params", m.params}};
    return m;
  } catch (const Refusal& e) {
    errors.push_back(std::string("[model]: ") + e.what());
    out = {{"name", name}};
    return {};
  }
}

std::optional<PlanarDomain> read_rect(Reader& r, const char* re_key, const char* im_key,
                                      std::pair<double, double> re_def,
                                      std::pair<double, double> im_def, json& out) {
  const auto re = r.range(re_key, re_def);
  const auto im = r.range(im_key, im_def);
  out[re_key] = {re.first, re.second};
  out[im_key] = {im.first, im.second};
  if (!(re.first < re.second) || !(im.first < im.second)) return std::nullopt;
  return PlanarDomain::rectangle(re.first, re.second, im.first, im.second);
}

void read_weyl(const json& raw, RunPlan& plan, std::vector<std::string>& errors, json& doc) {
  json model_out;
  WeylConfig& w = plan.weyl;
  w.model = read_model(raw, errors, model_out);
  doc["model"] = model_out;

  Reader gr(section(raw, "gamma"), "gamma", errors);
  json gamma_out;
  const auto g = read_rect(gr, "re", "im", {0.37, 2.23}, {-0.46, 0.43}, gamma_out);
  w.kappa_floor = gr.num("kappa_floor", w.kappa_floor);
  w.certify = gr.flag("certify", w.certify);
  gamma_out["kappa_floor"] = w.kappa_floor;
  gamma_out["certify"] = w.certify;
  gr.finish();
  if (g) w.gamma = *g;
  doc["gamma"] = gamma_out;

  Reader dr(section(raw, "draws"), "draws", errors);
  json draws_out;
  const long long count = dr.integer("count", w.n_draws);
  if (count < 0) dr.err("count", "expected count >= 0");
  w.n_draws = static_cast<int>(count);
  w.h_values = dr.nums("h", {0.02});
  if (w.h_values.empty()) dr.err("h", "expected at least one value");
  for (double h : w.h_values) {
    if (!(h > 0.0 && h < 1.0)) dr.err("h", "expected 0 < h < 1");
  }
  w.law = read_law(dr, draws_out);
  w.rel_tolerance = dr.num("rel_tolerance", w.rel_tolerance);
  w.eps_tilde = dr.nums("eps_tilde", {0.001, 0.002, 0.005, 0.01});
  w.r_band = dr.num("r_band", w.r_band);
  if (!(w.r_band > 0.0 && w.r_band < 1.0)) dr.err("r_band", "expected 0 < r_band < 1");
  w.budget_constant = dr.num("budget_constant", w.budget_constant);
  w.s = dr.num("s_norm", w.s);
  dr.finish();
  draws_out["count"] = w.n_draws;
  draws_out["h"] = w.h_values;
  draws_out["rel_tolerance"] = w.rel_tolerance;
  draws_out["eps_tilde"] = w.eps_tilde;
  draws_out["r_band"] = w.r_band;
  draws_out["budget_constant"] = w.budget_constant;
  draws_out["s_norm"] = w.s;
  doc["draws"] = draws_out;

  Reader sr(section(raw, "schedule"), "schedule", errors);
  json sched_out;
  w.schedule = read_schedule(sr, w.model.dim, w.tau0, sched_out);
  sr.finish();
  add_derived_schedule(w.schedule, w.tau0, w.h_values, sched_out, errors);
  doc["schedule"] = sched_out;
  w.seed = plan.seed;
  w.threads = plan.threads;
}

void read_counterexample(const json& raw, RunPlan& plan, std::vector<std::string>& errors,
                         json& doc) {
  CounterexampleConfig& c = plan.counterexample;
  Reader r(section(raw, "counterexample"), "counterexample", errors);
  c.g_mean = r.complex("g_mean", c.g_mean);
  c.g_cos = r.complex("g_cos", c.g_cos);
  c.g_sin = r.complex("g_sin", c.g_sin);
  c.h = r.num("h", c.h);
  const long long size = r.integer("size", c.size);
  if (size < 8 || size > 2048) r.err("size", "expected 8 <= size <= 2048");
  c.size = static_cast<int>(size);
  c.delta = r.num("delta", c.delta);
  c.L = r.num("L", c.L);
  c.R = r.num("R", c.R);
  c.window_fraction = r.num("window_fraction", c.window_fraction);
  if (!(c.window_fraction > 0.0 && c.window_fraction <= 1.0)) {
    r.err("window_fraction", "expected 0 < window_fraction <= 1");
  }
  const long long count = r.integer("count", c.n_draws);
  if (count < 0) r.err("count", "expected count >= 0");
  c.n_draws = static_cast<int>(count);
  c.tolerance = r.num("tolerance", c.tolerance);
  if (!(c.h > 0.0 && c.h < 1.0)) r.err("h", "expected 0 < h < 1");
  if (!(c.L > 0.0)) r.err("L", "expected L > 0");
  if (!(c.R > 0.0)) r.err("R", "expected R > 0");
  r.finish();
  c.seed = plan.seed;
  doc["counterexample"] = {{"g_mean", complex_pair(c.g_mean)},
                           {"g_cos", complex_pair(c.g_cos)},
                           {"g_sin", complex_pair(c.g_sin)},
                           {"h", c.h},
                           {"size", c.size},
                           {"delta", c.delta},
                           {"L", c.L},
                           {"R", c.R},
                           {"window_fraction", c.window_fraction},
                           {"count", c.n_draws},
                           {"tolerance", c.tolerance}};
}

void read_stochastics(const json& raw, RunPlan& plan, std::vector<std::string>& errors,
                      json& doc) {
  StochasticsConfig& c = plan.stochastics;
  json model_out;
  c.model = read_model(raw, errors, model_out);
  doc["model"] = model_out;
  Reader r(section(raw, "stochastics"), "stochastics", errors);
  json out;
  const auto om = read_rect(r, "omega_re", "omega_im", {-0.5, 2.5}, {-0.5, 0.9}, out);
  if (om) c.omega = *om;
  c.z = r.complex("z", cd(1.0, 0.2));
  c.h = r.num("h", c.h);
  if (!(c.h > 0.0 && c.h < 1.0)) r.err("h", "expected 0 < h < 1");
  const long long probes = r.integer("probes", c.n_probes);
  const long long draws = r.integer("draws", c.n_draws);
  if (probes < 0) r.err("probes", "expected probes >= 0");
  if (draws != 0 && draws < 100) r.err("draws", "expected 0 or at least 100 draws");
  c.n_probes = static_cast<int>(probes);
  c.probe_scale = r.num("probe_scale", c.probe_scale);
  if (!(c.probe_scale >= 0.0 && c.probe_scale < 1.0)) r.err("probe_scale", "expected 0 <= probe_scale < 1");
  c.n_draws = static_cast<int>(draws);
  c.eps_tilde = r.nums("eps_tilde", {0.02, 0.04, 0.06, 0.08, 0.1});
  c.small_eps = r.nums("small_eps", {1e-6, 1e-4, 1e-2});
  const auto grid = r.nums("phi_grid", {512, 512});
  if (grid.size() != 2 || grid[0] < 16 || grid[1] < 16) r.err("phi_grid", "expected [nx, nxi] >= 16");
  c.phi_grid = {static_cast<int>(grid.size() > 0 ? grid[0] : 512),
                static_cast<int>(grid.size() > 1 ? grid[1] : 512)};
  c.law = read_law(r, out);
  r.finish();
  if (om && !c.omega.contains(c.z)) errors.push_back("[stochastics].z: must lie inside omega");
  out["z"] = complex_pair(c.z);
  out["h"] = c.h;
  out["probes"] = c.n_probes;
  out["probe_scale"] = c.probe_scale;
  out["draws"] = c.n_draws;
  out["eps_tilde"] = c.eps_tilde;
  out["small_eps"] = c.small_eps;
  out["phi_grid"] = {c.phi_grid.nx, c.phi_grid.nxi};
  doc["stochastics"] = out;

  Reader sr(section(raw, "schedule"), "schedule", errors);
  json sched_out;
  c.schedule = read_schedule(sr, c.model.dim, c.tau0, sched_out);
  sr.finish();
  add_derived_schedule(c.schedule, c.tau0, {c.h}, sched_out, errors);
  doc["schedule"] = sched_out;
  c.seed = plan.seed;
}

void read_renorm(const json& raw, RunPlan& plan, std::vector<std::string>& errors, json& doc) {
  RenormExperimentConfig& c = plan.renorm;
  RenormOptions& o = c.options;
  Reader r(section(raw, "renorm"), "renorm", errors);
  const long long dim = r.integer("dim", c.dim);
  const long long n_small = r.integer("n_small", c.n_small);
  if (dim < 8 || dim > 2048) r.err("dim", "expected 8 <= dim <= 2048");
  if (n_small < 0 || n_small > dim / 4) r.err("n_small", "expected 0 <= n_small <= dim/4");
  c.dim = static_cast<int>(dim);
  c.n_small = static_cast<int>(n_small);
  c.small = r.num("small", c.small);
  o.h = r.num("h", o.h);
  o.tau0 = r.num("tau0", o.tau0);
  o.theta = r.num("theta", o.theta);
  o.n1_lab = r.num("n1_lab", o.n1_lab);
  o.n2_lab = r.num("n2_lab", o.n2_lab);
  o.n_theta = static_cast<int>(r.integer("n_theta", o.n_theta));
  o.C0 = r.num("C0", o.C0);
  o.max_retries = static_cast<int>(r.integer("max_retries", o.max_retries));
  o.L = r.num("L", o.L);
  o.s = r.num("s", o.s);
  o.enabled = r.flag("enabled", o.enabled);
  if (!(o.theta > 0.0 && o.theta < 0.25)) {
    r.err("theta", "violated theta in (0, 1/4) (got " + format_double(o.theta) + ")");
  }
  if (!(o.h > 0.0 && o.h < 1.0)) r.err("h", "expected 0 < h < 1");
  if (!(o.tau0 > 0.0 && o.tau0 < 1.0)) r.err("tau0", "expected 0 < tau0 < 1");
  if (!(c.small > 0.0)) r.err("small", "expected small > 0");
  if (o.max_retries < 0) r.err("max_retries", "expected max_retries >= 0");
  if (!(o.C0 > 0.0)) r.err("C0", "expected C0 > 0");
  r.finish();
  c.seed = plan.seed;
  doc["renorm"] = {{"dim", c.dim},       {"n_small", c.n_small}, {"small", c.small},
                   {"h", o.h},           {"tau0", o.tau0},       {"theta", o.theta},
                   {"n1_lab", o.n1_lab}, {"n2_lab", o.n2_lab},   {"n_theta", o.n_theta},
                   {"C0", o.C0},         {"max_retries", o.max_retries},
                   {"L", o.L},           {"s", o.s},             {"enabled", o.enabled}};
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : Refusal(join_errors(errors)), errors_(std::move(errors)) {}

std::string RunPlan::echo() const { return dump_toml(normalized); }

RunPlan validate_config(const json& raw) {
  std::vector<std::string> errors;
  if (!raw.is_object()) throw ConfigError({"config must be a table"});
  RunPlan plan;
  json doc = json::object();

  Reader run(section(raw, "run"), "run", errors);
  plan.experiment = run.str("experiment", "");
  const long long seed = run.integer("seed", 1);
  if (seed < 0) run.err("seed", "expected a non-negative integer");
  plan.seed = static_cast<std::uint64_t>(seed < 0 ? 0 : seed);
  const long long threads = run.integer("threads", 1);
  if (threads < 1 || threads > 256) run.err("threads", "expected 1 <= threads <= 256");
  plan.threads = static_cast<int>(threads < 1 ? 1 : threads);
  run.finish();
  doc["run"] = {{"experiment", plan.experiment},
                {"seed", static_cast<long long>(plan.seed)},
                {"threads", plan.threads}};

  Reader out(section(raw, "output"), "output", errors);
  plan.output_root = out.str("root", plan.output_root);
  plan.pseudospectrum = out.flag("pseudospectrum", plan.pseudospectrum);
  const auto ps = out.nums("pseudospectrum_size", {64.0, 48.0});
  if (ps.size() != 2 || ps[0] < 2 || ps[1] < 2) {
    out.err("pseudospectrum_size", "expected [n_re, n_im] with both >= 2");
  } else {
    plan.pseudospectrum_re = static_cast<int>(ps[0]);
    plan.pseudospectrum_im = static_cast<int>(ps[1]);
  }
  out.finish();
  doc["output"] = {{"root", plan.output_root},
                   {"pseudospectrum", plan.pseudospectrum},
                   {"pseudospectrum_size", {plan.pseudospectrum_re, plan.pseudospectrum_im}}};

  std::set<std::string> allowed = {"run", "output"};
  if (plan.experiment == "weyl") {
    allowed.insert({"model", "gamma", "draws", "schedule"});
    read_weyl(raw, plan, errors, doc);
  } else if (plan.experiment == "counterexample") {
    allowed.insert("counterexample");
    read_counterexample(raw, plan, errors, doc);
  } else if (plan.experiment == "stochastics") {
    allowed.insert({"model", "stochastics", "schedule"});
    read_stochastics(raw, plan, errors, doc);
  } else if (plan.experiment == "renorm") {
    allowed.insert("renorm");
    read_renorm(raw, plan, errors, doc);
  } else {
    errors.push_back(
        "[run].experiment: expected one of weyl, counterexample, stochastics, renorm");
  }
  for (auto it = raw.begin(); it != raw.end(); ++it) {
    if (!allowed.count(it.key())) {
      errors.push_back("[" + it.key() + "]: not used by experiment '" + plan.experiment + "'");
    }
  }
  if (!errors.empty()) throw ConfigError(errors);
  plan.normalized = doc;
  return plan;
}

RunPlan load_config_text(const std::string& text) {
  json raw;
  try {
    raw = parse_toml(text);
  } catch (const TomlError& e) {
    throw ConfigError({std::string("toml: ") + e.what()});
  }
  return validate_config(raw);
}

RunPlan load_config(const std::string& path) {
  json raw;
  try {
    raw = parse_toml_file(path);
  } catch (const TomlError& e) {
    throw ConfigError({std::string("toml: ") + e.what()});
  }
  return validate_config(raw);
}

}  // namespace weyllab
