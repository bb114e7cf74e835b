#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "weyllab/linalg.hpp"
#include "weyllab/operators.hpp"
#include "weyllab/rng.hpp"

namespace weyllab {

enum class ScheduleMode { Paper, Lab };

/// Inputs of the parameter schedule. M and Mtilde default to their floors.
struct ScheduleInput {
  int n = 1;
  double kappa = 1.0;
  double s = 2.0;
  double eps = 0.5;
  std::optional<double> M;
  std::optional<double> Mtilde;
  double n2_slack = 0.5;
  ScheduleMode mode = ScheduleMode::Lab;
  // Lab-mode perturbation size: "exp" gives exp(-eps_delta / h), "power"
  // gives h^k_lab.
  std::string delta_rule = "exp";
  double eps_delta = 0.15;
  double k_lab = 2.0;
  // Lab-mode cutoffs, held fixed in h.
  double L = 1.0;
  double R = 1.0;
  // Lab exponents for the staged construction.
  double n1_lab = 1.0;
  double n2_lab = 3.0;
};

struct ParameterSchedule {
  ScheduleInput input;
  double M = 0.0;
  double Mtilde = 0.0;
  double N1 = 0.0;
  double N2 = 0.0;

  bool lab() const { return input.mode == ScheduleMode::Lab; }
  double delta_paper(double h, double tau0) const;
  double delta_lab(double h) const;
  double delta(double h, double tau0) const;
  double eps0(double h, double tau0) const;
  double L_paper(double h) const;
  double R_paper(double h) const;
  double L(double h) const;
  double R(double h) const;
  /// Paper and lab values side by side at a given h.
  nlohmann::json snapshot(double h, double tau0) const;
};

double M_floor(int n, double kappa, double s, double eps);
double Mtilde_floor(int n, double kappa, double eps, double M);

/// Constraint violations, each stated as the inequality that failed.
std::vector<std::string> schedule_violations(const ScheduleInput& in);
/// Refuses with the list of violated constraints.
ParameterSchedule build_schedule(const ScheduleInput& in);

/// Random law of the coefficient vector alpha.
struct CoefficientLaw {
  enum class Kind { UniformBall, TruncatedGaussian };
  Kind kind = Kind::UniformBall;
  double R = 1.0;
  std::vector<double> sigmas;  // one entry means the same sigma for every k
  bool real_only = false;

  static CoefficientLaw uniform_ball(double R);
  static CoefficientLaw truncated_gaussian(std::vector<double> sigmas, double R);

  CVec sample(int D, Stream& stream) const;
  /// sup |grad log-density| on the ball; 0 for the uniform law and
  /// R / min sigma^2 for the Gaussian law.
  double gradient_bound() const;
  nlohmann::json to_json() const;
};

/// q = sum_k alpha_k eps_k over reference eigenfunctions with 0 < mu_k <= L.
struct AdmissiblePotential {
  CVec alpha;
  std::vector<int> indices;  // columns of ReferenceOperator::functions
  double L = 0.0;
  CVec node_values;
  double hs_norm = 0.0;
  double sup_norm = 0.0;
  std::uint64_t stream_id = 0;
};

AdmissiblePotential make_potential(const ReferenceOperator& ref,
                                   const std::vector<int>& indices, CVec alpha,
                                   double L, double s);

AdmissiblePotential draw_potential(const CoefficientLaw& law,
                                   const ReferenceOperator& ref, double L, double s,
                                   Stream& stream);

/// Scale c with ||c q||_inf <= 1 for every |alpha| <= R over D modes.
double coupling_constant(double R, int D);

/// sup over u of ||u||_inf / (h^{-1/2} ||u||_{H^s}) on a basis with modes
/// |k| <= K; the constant of the sup-norm estimate.
double sup_norm_constant(double h, double s, int K);

struct NormAudit {
  double sup = 0.0;
  double hs = 0.0;
  double sup_bound = 0.0;    // C h^{-1/2} ||q||_{H^s}
  double hs_bound = 0.0;     // (1 + L^2)^{s/2} R
  bool sup_ok = true;
  bool hs_ok = true;
};

NormAudit potential_norm_audit(const AdmissiblePotential& q, double h, double s,
                               double R, double sup_constant);

}  // namespace weyllab
