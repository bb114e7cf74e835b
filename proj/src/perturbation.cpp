#include "weyllab/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "weyllab/errors.hpp"

namespace weyllab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

double M_floor(int n, double kappa, double s, double eps) {
  return (3.0 * n - kappa) / (s - n / 2.0 - eps);
}

double Mtilde_floor(int n, double kappa, double eps, double M) {
  return 1.5 * n - kappa + (n / 2.0 + eps) * M;
}

std::vector<std::string> schedule_violations(const ScheduleInput& in) {
  std::vector<std::string> errs;
  const double half_n = in.n / 2.0;
  if (in.n < 1) errs.push_back("n >= 1 (got " + std::to_string(in.n) + ")");
  if (!(in.kappa > 0.0 && in.kappa <= 1.0)) {
    errs.push_back("kappa in (0, 1] (got " + fmt(in.kappa) + ")");
  }
  if (!(in.s > half_n)) errs.push_back("s > n/2 (got s=" + fmt(in.s) + ")");
  if (!(in.eps > 0.0 && in.eps < in.s - half_n)) {
    errs.push_back("eps in (0, s-n/2) (got eps=" + fmt(in.eps) + ")");
  }
  if (!errs.empty()) return errs;
  const double mf = M_floor(in.n, in.kappa, in.s, in.eps);
  const double M = in.M.value_or(mf);
  if (M < mf - 1e-12) {
    errs.push_back("M >= (3n-kappa)/(s-n/2-eps) (got M=" + fmt(M) + ", floor " + fmt(mf) + ")");
  }
  const double mtf = Mtilde_floor(in.n, in.kappa, in.eps, M);
  const double Mt = in.Mtilde.value_or(mtf);
  if (Mt < mtf - 1e-12) {
    errs.push_back("Mtilde >= 3n/2 - kappa + (n/2+eps)M (got Mtilde=" + fmt(Mt) +
                   ", floor " + fmt(mtf) + ")");
  }
  if (!(in.n2_slack > 0.0)) errs.push_back("N2 slack > 0 (got " + fmt(in.n2_slack) + ")");
  if (in.delta_rule != "exp" && in.delta_rule != "power") {
    errs.push_back("lab delta rule is 'exp' or 'power' (got '" + in.delta_rule + "')");
  }
  if (!(in.eps_delta > 0.0)) errs.push_back("eps_delta > 0");
  if (!(in.k_lab > 0.0)) errs.push_back("k_lab > 0");
  if (!(in.L > 0.0)) errs.push_back("L > 0");
  if (!(in.R > 0.0)) errs.push_back("R > 0");
  if (!(in.n1_lab > 0.0)) errs.push_back("N1_lab > 0");
  if (!(in.n2_lab > 0.0)) errs.push_back("N2_lab > 0");
  return errs;
}

ParameterSchedule build_schedule(const ScheduleInput& in) {
  const auto errs = schedule_violations(in);
  if (!errs.empty()) {
    std::string msg = "infeasible schedule:";
    for (const auto& e : errs) msg += "\n  violated: " + e;
    throw Refusal(msg);
  }
  ParameterSchedule sch;
  sch.input = in;
  sch.M = in.M.value_or(M_floor(in.n, in.kappa, in.s, in.eps));
  sch.Mtilde = in.Mtilde.value_or(Mtilde_floor(in.n, in.kappa, in.eps, sch.M));
  sch.N1 = sch.Mtilde + in.s * sch.M + in.n / 2.0;
  sch.N2 = 2.0 * (sch.N1 + in.n) + in.n2_slack;
  return sch;
}

double ParameterSchedule::delta_paper(double h, double tau0) const {
  return tau0 * std::pow(h, N1 + input.n);
}

double ParameterSchedule::delta_lab(double h) const {
  if (input.delta_rule == "power") return std::pow(h, input.k_lab);
  return std::exp(-input.eps_delta / h);
}

double ParameterSchedule::delta(double h, double tau0) const {
  return lab() ? delta_lab(h) : delta_paper(h, tau0);
}

double ParameterSchedule::eps0(double h, double tau0) const {
  const double lh = std::log(1.0 / h);
  return (std::pow(h, input.kappa) + std::pow(h, input.n) * lh) *
         (std::log(1.0 / tau0) + lh * lh);
}

double ParameterSchedule::L_paper(double h) const { return std::pow(h, -M); }
double ParameterSchedule::R_paper(double h) const { return std::pow(h, -Mtilde); }
double ParameterSchedule::L(double h) const { return lab() ? input.L : L_paper(h); }
double ParameterSchedule::R(double h) const { return lab() ? input.R : R_paper(h); }

nlohmann::json ParameterSchedule::snapshot(double h, double tau0) const {
  return {
      {"mode", lab() ? "lab" : "paper"},
      {"n", input.n},
      {"kappa", input.kappa},
      {"s", input.s},
      {"eps", input.eps},
      {"M", M},
      {"Mtilde", Mtilde},
      {"N1", N1},
      {"N2", N2},
      {"h", h},
      {"tau0", tau0},
      {"eps0", eps0(h, tau0)},
      {"paper", {{"delta", delta_paper(h, tau0)}, {"L", L_paper(h)}, {"R", R_paper(h)}}},
      {"lab",
       {{"delta", delta_lab(h)},
        {"delta_rule", input.delta_rule},
        {"eps_delta", input.eps_delta},
        {"k_lab", input.k_lab},
        {"L", input.L},
        {"R", input.R},
        {"N1_lab", input.n1_lab},
        {"N2_lab", input.n2_lab}}},
      {"delta_used", delta(h, tau0)},
  };
}

CoefficientLaw CoefficientLaw::uniform_ball(double R) {
  CoefficientLaw law;
  law.kind = Kind::UniformBall;
  law.R = R;
  return law;
}

CoefficientLaw CoefficientLaw::truncated_gaussian(std::vector<double> sigmas, double R) {
  if (sigmas.empty()) throw Refusal("truncated Gaussian law needs at least one sigma");
  for (double s : sigmas) {
    if (!(s > 0.0)) throw Refusal("Gaussian sigmas must be positive");
  }
  CoefficientLaw law;
  law.kind = Kind::TruncatedGaussian;
  law.sigmas = std::move(sigmas);
  law.R = R;
  return law;
}

CVec CoefficientLaw::sample(int D, Stream& stream) const {
  CVec a(D);
  if (D == 0) return a;
  if (kind == Kind::UniformBall) {
    // Gaussian direction, radius R U^{1/dim} with dim the real dimension.
    double norm2 = 0.0;
    for (int k = 0; k < D; ++k) {
      const double re = stream.normal();
      const double im = real_only ? 0.0 : stream.normal();
      a(k) = cd(re, im);
      norm2 += re * re + im * im;
    }
    const double real_dim = real_only ? D : 2.0 * D;
    const double radius = R * std::pow(stream.uniform(), 1.0 / real_dim);
    return a * (radius / std::sqrt(norm2));
  }
  for (int attempt = 0; attempt < 100000; ++attempt) {
    double norm2 = 0.0;
    for (int k = 0; k < D; ++k) {
      const double sigma = sigmas.size() == 1 ? sigmas[0] : sigmas.at(k);
      a(k) = real_only ? cd(sigma * stream.normal(), 0.0)
                       : stream.complex_normal(sigma * sigma);
      norm2 += std::norm(a(k));
    }
    if (norm2 <= R * R) return a;
  }
  throw Refusal("truncated Gaussian law: no sample inside the ball after 1e5 tries");
}

double CoefficientLaw::gradient_bound() const {
  if (kind == Kind::UniformBall) return 0.0;
  const double smin = *std::min_element(sigmas.begin(), sigmas.end());
  return R / (smin * smin);
}

nlohmann::json CoefficientLaw::to_json() const {
  nlohmann::json j = {{"kind", kind == Kind::UniformBall ? "uniform_ball" : "truncated_gaussian"},
                      {"R", R},
                      {"real_only", real_only},
                      {"gradient_bound", gradient_bound()}};
  if (kind == Kind::TruncatedGaussian) j["sigmas"] = sigmas;
  return j;
}

AdmissiblePotential make_potential(const ReferenceOperator& ref,
                                   const std::vector<int>& indices, CVec alpha,
                                   double L, double s) {
  if (static_cast<Eigen::Index>(indices.size()) != alpha.size()) {
    throw Refusal("coefficient count does not match the admissible mode count");
  }
  AdmissiblePotential q;
  q.alpha = std::move(alpha);
  q.indices = indices;
  q.L = L;
  const Eigen::Index n = ref.functions.rows();
  q.node_values = CVec::Zero(n);
  RVec mu(indices.size());
  for (std::size_t c = 0; c < indices.size(); ++c) {
    if (ref.mu(indices[c]) > L) throw Refusal("potential uses a mode above the cutoff L");
    q.node_values += q.alpha(c) * ref.functions.col(indices[c]);
    mu(c) = ref.mu(indices[c]);
  }
  q.hs_norm = hs_norm(q.alpha, mu, s);
  q.sup_norm = q.node_values.size() ? q.node_values.cwiseAbs().maxCoeff() : 0.0;
  return q;
}

AdmissiblePotential draw_potential(const CoefficientLaw& law,
                                   const ReferenceOperator& ref, double L, double s,
                                   Stream& stream) {
  const auto idx = ref.admissible(L);
  CVec alpha = law.sample(static_cast<int>(idx.size()), stream);
  AdmissiblePotential q = make_potential(ref, idx, std::move(alpha), L, s);
  q.stream_id = stream.id();
  return q;
}

double coupling_constant(double R, int D) {
  if (D == 0) return 0.0;
  return 1.0 / (R * std::sqrt(D / kTwoPi));
}

double sup_norm_constant(double h, double s, int K) {
  return std::sqrt(h) * sup_over_hs_worst(h, s, K);
}

NormAudit potential_norm_audit(const AdmissiblePotential& q, double h, double s,
                               double R, double sup_constant) {
  NormAudit a;
  a.sup = q.sup_norm;
  a.hs = q.hs_norm;
  a.sup_bound = sup_constant * std::pow(h, -0.5) * q.hs_norm;
  a.hs_bound = std::pow(1.0 + q.L * q.L, s / 2.0) * R;
  a.sup_ok = a.sup <= a.sup_bound * (1.0 + 1e-12) + 1e-300;
  a.hs_ok = a.hs <= a.hs_bound * (1.0 + 1e-12);
  return a;
}

}  // namespace weyllab
