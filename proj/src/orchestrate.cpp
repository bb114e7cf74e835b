#include "weyllab/orchestrate.hpp"

#include <cfloat>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "weyllab/errors.hpp"
#include "weyllab/rng.hpp"
#include "weyllab/toml_lite.hpp"

namespace weyllab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

class Sink {
 public:
  explicit Sink(const fs::path& dir)
      : draws_(dir / "draws.jsonl", std::ios::binary), eig_(dir / "eigenvalues.csv", std::ios::binary) {
    if (!draws_ || !eig_) throw std::runtime_error("cannot open run outputs in " + dir.string());
    eig_ << "run,draw,re,im\n";
    eig_.flush();
  }

  void record(const json& j) {
    draws_ << j.dump() << "\n";
    draws_.flush();
  }

  void eigenvalues(int run, int draw, const std::vector<cd>& eigs) {
    for (const cd& z : eigs) eig_ << run << "," << draw << "," << g17(z.real()) << "," << g17(z.imag()) << "\n";
    eig_.flush();
  }

 private:
  std::ofstream draws_;
  std::ofstream eig_;
};

json run_weyl(const RunPlan& plan, const fs::path& dir, Sink& sink, json& constants) {
  const WeylConfig& cfg = plan.weyl;
  auto on_draw = [&](int rung, const DrawRecord& r) {
    json j = r.to_json();
    j["rung"] = rung;
    j["h"] = cfg.h_values[static_cast<std::size_t>(rung)];
    sink.record(j);
    sink.eigenvalues(rung, r.draw, r.eigenvalues);
  };
  const WeylReport rep = weyl_experiment(cfg, on_draw);

  std::ostringstream counts, fail, scaling;
  counts << "rung,h,draw,count,deviation,weyl_term\n";
  fail << "rung,h,eps_tilde,budget,failure_probability\n";
  scaling << "h,weyl_term,median_abs_deviation,scaled_median,fraction_within,control_deviation\n";
  json fractions = json::array();
  for (std::size_t k = 0; k < rep.rungs.size(); ++k) {
    const WeylRung& r = rep.rungs[k];
    counts << k << "," << g17(r.h) << ",-1," << r.control.count << "," << g17(r.control.deviation)
           << "," << g17(r.weyl_term) << "\n";
    for (const auto& d : r.draws) {
      counts << k << "," << g17(r.h) << "," << d.draw << "," << d.count << ","
             << g17(d.deviation) << "," << g17(r.weyl_term) << "\n";
    }
    for (std::size_t e = 0; e < r.budget.size(); ++e) {
      fail << k << "," << g17(r.h) << "," << g17(rep.eps_tilde[e]) << "," << g17(r.budget[e])
           << "," << g17(r.failure_probability[e]) << "\n";
    }
    scaling << g17(r.h) << "," << g17(r.weyl_term) << "," << g17(r.median_abs_deviation) << ","
            << g17(r.scaled_median) << "," << g17(r.fraction_within) << ","
            << g17(r.control.deviation) << "\n";
    fractions.push_back({{"h", r.h}, {"fraction_within", r.fraction_within}});
  }
  write_file(dir / "plotdata" / "counts.csv", counts.str());
  write_file(dir / "plotdata" / "failure_probability.csv", fail.str());
  write_file(dir / "plotdata" / "scaling.csv", scaling.str());

  if (plan.pseudospectrum && !cfg.h_values.empty()) {
    const double h = cfg.h_values.front();
    const SpectralBasis basis = basis_for(cfg.model, cfg.gamma, h);
    const CMat P = discretize(cfg.model, basis).matrix;
    const PlanarDomain box = cfg.gamma.expanded(0.5);
    std::vector<double> re, im;
    for (int a = 0; a < plan.pseudospectrum_re; ++a) {
      re.push_back(box.re_lo() + (box.re_hi() - box.re_lo()) * a / (plan.pseudospectrum_re - 1));
    }
    for (int b = 0; b < plan.pseudospectrum_im; ++b) {
      im.push_back(box.im_lo() + (box.im_hi() - box.im_lo()) * b / (plan.pseudospectrum_im - 1));
    }
    std::ofstream os(dir / "plotdata" / "pseudospectrum.csv", std::ios::binary);
    pseudospectrum_grid(P, re, im).write_csv(os);
  }
  constants["kappa"] = rep.kappa.kappa;
  constants["fraction_within"] = fractions;
  constants["scaling_non_increasing"] = rep.scaling_non_increasing;
  return rep.to_json();
}

json run_counterexample(const RunPlan& plan, const fs::path& dir, Sink& sink, json& constants) {
  const CounterexampleReport rep = counterexample_check(plan.counterexample);
  std::ostringstream dist;
  dist << "draw,predicted_im,max_distance,checked\n";
  for (const auto& d : rep.draws) {
    sink.record({{"draw", d.draw},
                 {"stream_id", d.stream_id},
                 {"predicted_im", d.predicted_im},
                 {"max_distance", d.max_distance},
                 {"checked", d.checked}});
    sink.eigenvalues(0, d.draw, d.eigenvalues);
    dist << d.draw << "," << g17(d.predicted_im) << "," << g17(d.max_distance) << ","
         << d.checked << "\n";
  }
  write_file(dir / "plotdata" / "line_distance.csv", dist.str());
  constants["worst_distance"] = rep.worst_distance;
  return rep.to_json();
}

json run_stochastics(const RunPlan& plan, const fs::path& dir, Sink& sink, json& constants) {
  const StochasticsConfig& cfg = plan.stochastics;
  const StochasticsReport rep = stochastics_experiment(cfg);
  const ModelBundle b = stochastics_bundle(cfg);
  sink.eigenvalues(0, -1, sorted_eigenvalues(b.P0));
  std::ostringstream zeros;
  zeros << "probe,re_w,im_w,log_abs_F\n";
  for (const auto& p : rep.probes) {
    sink.record(p.to_json());
    for (const cd& w : p.line.zeros_in_disc) {
      const CVec alpha = p.line.alpha0 + w * p.line.alpha1;
      zeros << p.probe << "," << g17(w.real()) << "," << g17(w.imag()) << ","
            << g17(normalized_det(alpha, b).log_abs) << "\n";
    }
  }
  write_file(dir / "plotdata" / "zeros.csv", zeros.str());
  std::ostringstream fail;
  fail << "eps_tilde,failures,p,ci_lo,ci_hi\n";
  for (std::size_t i = 0; i < rep.failure.eps_tilde.size(); ++i) {
    fail << g17(rep.failure.eps_tilde[i]) << "," << rep.failure.failures[i] << ","
         << g17(rep.failure.p[i]) << "," << g17(rep.failure.ci[i].lo) << ","
         << g17(rep.failure.ci[i].hi) << "\n";
  }
  write_file(dir / "plotdata" / "failure_probability.csv", fail.str());
  std::ostringstream meas;
  meas << "eps,measure,bound_shape\n";
  for (std::size_t i = 0; i < rep.measure.eps.size(); ++i) {
    meas << g17(rep.measure.eps[i]) << "," << g17(rep.measure.measure[i]) << ","
         << g17(rep.measure.bound_shape[i]) << "\n";
  }
  write_file(dir / "plotdata" / "small_value_measure.csv", meas.str());
  constants["max_jensen_residual"] = rep.max_jensen_residual;
  constants["fit_rate"] = rep.failure.fit_rate;
  constants["fit_r2"] = rep.failure.fit_r2;
  constants["denominator_effect"] = rep.denominator_effect;
  return rep.to_json();
}

json run_renorm_plan(const RunPlan& plan, const fs::path& dir, Sink& sink, json& constants) {
  const RenormExperimentReport rep = renorm_experiment(plan.renorm);
  for (const auto& s : rep.trace.stages) sink.record(s.to_json());
  sink.eigenvalues(0, 0, sorted_eigenvalues(rep.trace.final_matrix));
  sink.eigenvalues(0, -1, sorted_eigenvalues(rep.control.final_matrix));
  std::ostringstream sv;
  sv << "index,t_control,t_final\n";
  for (Eigen::Index i = 0; i < rep.trace.final_t.size(); ++i) {
    sv << i + 1 << "," << g17(rep.control.final_t(i)) << "," << g17(rep.trace.final_t(i)) << "\n";
  }
  write_file(dir / "plotdata" / "singular_values.csv", sv.str());
  constants["band_margins"] = rep.trace.band_margins;
  constants["alpha_total_norm"] = rep.trace.alpha_total_norm;
  return rep.to_json();
}

}  // namespace

std::string config_hash(const RunPlan& plan) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(plan.echo())));
  return buf;
}

std::string create_run_directory(const std::string& root, const std::string& hash,
                                 std::uint64_t seed) {
  fs::create_directories(root);
  const std::string base = hash + "-s" + std::to_string(seed);
  for (int k = 0; k < 10000; ++k) {
    const fs::path p = fs::path(root) / (k == 0 ? base : base + "-" + std::to_string(k));
    if (fs::create_directory(p)) return p.string();
  }
  throw std::runtime_error("no free run directory under " + root);
}

json platform_flags() {
  json j;
#ifdef __VERSION__
  j["compiler"] = __VERSION__;
#endif
#ifdef __FMA__
  j["fma"] = true;
#else
  j["fma"] = false;
#endif
#ifdef __FAST_MATH__
  j["fast_math"] = true;
#else
  j["fast_math"] = false;
#endif
  j["flt_eval_method"] = FLT_EVAL_METHOD;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
  j["long_double_digits"] = LDBL_MANT_DIG;
  return j;
}

RunResult orchestrate(const RunPlan& plan, const std::string& root_override) {
  const std::string root = root_override.empty() ? plan.output_root : root_override;
  const std::string hash = config_hash(plan);
  RunResult res;
  res.run_dir = create_run_directory(root, hash, plan.seed);
  const fs::path dir(res.run_dir);
  fs::create_directory(dir / "plotdata");

  json manifest = {{"config_hash", hash},
                   {"code_version", WEYLLAB_VERSION},
                   {"experiment", plan.experiment},
                   {"seed_root", plan.seed},
                   {"threads", plan.threads},
                   {"platform", platform_flags()},
                   {"started", utc_now()},
                   {"status", "incomplete"}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_file(dir / "config.toml", plan.echo());

  json constants = json::object();
  try {
    Sink sink(dir);
    if (plan.experiment == "weyl") {
      res.report = run_weyl(plan, dir, sink, constants);
    } else if (plan.experiment == "counterexample") {
      res.report = run_counterexample(plan, dir, sink, constants);
    } else if (plan.experiment == "stochastics") {
      res.report = run_stochastics(plan, dir, sink, constants);
    } else if (plan.experiment == "renorm") {
      res.report = run_renorm_plan(plan, dir, sink, constants);
    } else {
      throw Refusal("unknown experiment '" + plan.experiment + "'");
    }
  } catch (const std::exception& e) {
    manifest["error"] = e.what();
    manifest["ended"] = utc_now();
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    throw;
  }
  write_file(dir / "report.json", res.report.dump(2) + "\n");
  manifest["status"] = "complete";
  manifest["ended"] = utc_now();
  manifest["empirical_constants"] = constants;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  res.manifest = manifest;
  return res;
}

json summarize_run(const std::string& run_dir) {
  const fs::path dir(run_dir);
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw Refusal("no manifest.json in " + run_dir);
  json manifest = json::parse(mf);
  json out = {{"run_dir", run_dir},
              {"status", manifest.value("status", "unknown")},
              {"experiment", manifest.value("experiment", "")},
              {"config_hash", manifest.value("config_hash", "")},
              {"seed_root", manifest.value("seed_root", 0)}};
  if (manifest.contains("error")) out["error"] = manifest["error"];
  if (manifest.contains("empirical_constants")) out["constants"] = manifest["empirical_constants"];
  std::ifstream dl(dir / "draws.jsonl");
  int records = 0;
  int malformed = 0;
  for (std::string line; std::getline(dl, line);) {
    if (line.empty()) continue;
    if (json::accept(line)) {
      ++records;
    } else {
      ++malformed;
    }
  }
  out["draw_records"] = records;
  out["malformed_records"] = malformed;
  std::ifstream rf(dir / "report.json");
  out["has_report"] = static_cast<bool>(rf);
  return out;
}

}  // namespace weyllab
