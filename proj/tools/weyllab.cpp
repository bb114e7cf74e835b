#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "weyllab/config.hpp"
#include "weyllab/deltadesign.hpp"
#include "weyllab/errors.hpp"
#include "weyllab/experiments.hpp"
#include "weyllab/grushin.hpp"
#include "weyllab/orchestrate.hpp"
#include "weyllab/rng.hpp"
#include "weyllab/toml_lite.hpp"

using namespace weyllab;

namespace {

struct Check {
  std::string name;
  std::function<bool(std::string&)> run;
};

CMat random_matrix(Stream& s, int n) {
  CMat A(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) A(i, j) = s.complex_normal();
  }
  return A;
}

std::vector<Check> invariant_checks() {
  std::vector<Check> checks;
  checks.push_back({"bordered determinant identity", [](std::string& detail) {
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      Stream s(11, fnv1a("check-grushin"), k);
      const CMat A = random_matrix(s, 6 + k);
      const RVec t = singular_values(A).reverse();
      const double tau0 = 0.5 * (t(1) + t(2));
      const DetIdentity d = det_identity(build_grushin(A, tau0));
      worst = std::max(worst, d.gap);
    }
    detail = "worst relative gap " + format_double(worst);
    return worst <= 1e-8;
  }});
  checks.push_back({"singular value inequalities", [](std::string& detail) {
    int violations = 0;
    for (int k = 0; k < 50; ++k) {
      Stream s(12, fnv1a("check-sv"), k);
      const CMat A = random_matrix(s, 8);
      const CMat B = random_matrix(s, 8);
      violations += sv_inequalities(A, B, 1e-10).violations;
    }
    detail = std::to_string(violations) + " violations";
    return violations == 0;
  }});
  checks.push_back({"delta point certificates", [](std::string& detail) {
    bool ok = true;
    for (int N = 2; N <= 8; ++N) {
      std::vector<int> modes;
      for (int k = -(N / 2); static_cast<int>(modes.size()) < N; ++k) modes.push_back(k);
      const PointSelection sel = select_points(fourier_candidates(modes, 256), N);
      ok = ok && sel.certificate_holds;
    }
    detail = ok ? "all certificates hold" : "a certificate failed";
    return ok;
  }});
  checks.push_back({"counterexample spectrum on the line", [](std::string& detail) {
    CounterexampleConfig cfg;
    cfg.size = 129;
    cfg.n_draws = 3;
    const CounterexampleReport rep = counterexample_check(cfg);
    detail = "worst distance " + format_double(rep.worst_distance);
    return rep.all_on_line;
  }});
  checks.push_back({"config echo is idempotent", [](std::string& detail) {
    const RunPlan a = load_config_text("[run]\nexperiment = \"counterexample\"\nseed = 3\n");
    const RunPlan b = load_config_text(a.echo());
    detail = a.echo() == b.echo() ? "echo stable" : "echo changed";
    return a.echo() == b.echo();
  }});
  return checks;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const Refusal& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 2;
  } catch (const CertificateFailure& e) {
    std::cerr << "certificate failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

const char* kModuleMap =
    "module        role\n"
    "symbols       symbols p(x, xi), the elliptic modification p-tilde, phase-space volumes,\n"
    "              V_z(t) and kappa, the log-integral phi(z) and its Laplacian\n"
    "operators     Fourier collocation quantization, reference operator, Sobolev norms,\n"
    "              relative operator (Pt - z)^-1 (P - z)\n"
    "perturbation  parameter schedule (paper and lab), coefficient laws, admissible potentials\n"
    "deltadesign   greedy delta-point selection, Gram and determinant floors, truncated deltas\n"
    "grushin       bordered problems, determinant identity, singular value inequalities and\n"
    "              transfers, Neumann series for E_-+, capped log-det against phi / h\n"
    "renorm        staged lifting of small singular values with geometric thresholds\n"
    "stochastics   F(alpha) along complex lines: pencil zeros, winding, Jensen, small values,\n"
    "              failure probability\n"
    "experiments   Weyl-law Monte Carlo, scaling ladder, transport counterexample,\n"
    "              pseudospectra, zero counts by the argument principle\n"
    "cli_config    TOML configs, validation, run directories, manifests\n";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weyllab: eigenvalue counts of randomly perturbed non-self-adjoint operators"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_root;
  auto* run = app.add_subcommand("run", "Run the experiment described by a TOML config");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--out", out_root, "Output root (overrides [output].root)");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Validate a config and print its normalized echo");
  validate->add_option("config", validate_path, "Config file")->required();

  auto* check = app.add_subcommand("check-invariants", "Run quick invariant checks");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize a run directory");
  report->add_option("run_dir", report_dir, "Run directory")->required();

  auto* map = app.add_subcommand("paper-map", "Print the module map");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    return guarded([&] {
      const RunPlan plan = load_config(config_path);
      const RunResult r = orchestrate(plan, out_root);
      std::cout << r.run_dir << "\n";
      return 0;
    });
  }
  if (*validate) {
    return guarded([&] {
      std::cout << load_config(validate_path).echo();
      return 0;
    });
  }
  if (*check) {
    return guarded([&] {
      bool all = true;
      for (const auto& c : invariant_checks()) {
        std::string detail;
        bool ok = false;
        try {
          ok = c.run(detail);
        } catch (const std::exception& e) {
          detail = e.what();
        }
        all = all && ok;
        std::printf("%s  %s (%s)\n", ok ? "PASS" : "FAIL", c.name.c_str(), detail.c_str());
      }
      return all ? 0 : 3;
    });
  }
  if (*report) {
    return guarded([&] {
      std::cout << summarize_run(report_dir).dump(2) << "\n";
      return 0;
    });
  }
  if (*map) {
    std::cout << kModuleMap;
    return 0;
  }
  return 0;
}
