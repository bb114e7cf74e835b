#include "weyllab/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "weyllab/errors.hpp"
#include "weyllab/rng.hpp"

namespace weyllab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// (u | v) = sum u conj(v)
cd inner(const CVec& u, const CVec& v) { return (v.adjoint() * u)(0); }

CMat pencil_A(const LineProbe& p, const ModelBundle& b) { return b.shifted(p.alpha0); }

CMat pencil_B(const LineProbe& p, const ModelBundle& b) {
  const CVec pot = b.potential(p.alpha1);
  return CMat((b.delta * pot).asDiagonal());
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      const double dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double step = p1 / dp;
      t -= step;
      if (std::abs(step) < 1e-16) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    const double dp = n * (t * p1 - p0) / (t * t - 1.0);
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

}  // namespace

CVec ModelBundle::potential(const CVec& alpha) const { return coupling * (modes * alpha); }

CMat ModelBundle::shifted(const CVec& alpha) const {
  CMat A = P0;
  A.diagonal() += delta * potential(alpha);
  A.diagonal().array() -= z;
  return A;
}

ModelBundle make_bundle(const CMat& P0, const CMat& Ptilde, cd z, double h, double phi,
                        double delta, const ReferenceOperator& ref, double L, double R) {
  ModelBundle b;
  b.P0 = P0;
  b.Ptilde = Ptilde;
  b.z = z;
  b.h = h;
  b.phi = phi;
  b.delta = delta;
  b.R = R;
  const auto idx = ref.admissible(L);
  if (idx.empty()) throw Refusal("make_bundle: no admissible modes below L");
  b.modes.resize(ref.functions.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) {
    b.modes.col(static_cast<Eigen::Index>(c)) = ref.functions.col(idx[c]);
  }
  b.coupling = coupling_constant(R, b.D());
  CMat T = Ptilde;
  T.diagonal().array() -= z;
  if (sigma_min(T) < 1e-8) throw Refusal("make_bundle: Ptilde - z is numerically singular");
  b.tilde_logdet = log_det_lu(T);
  return b;
}

LogF normalized_det(const CVec& alpha, const ModelBundle& b) {
  const LogDet num = log_det_lu(b.shifted(alpha));
  LogF f;
  f.singular = num.singular;
  f.log_abs = num.log_abs - b.tilde_logdet.log_abs - b.phi / b.h;
  f.arg = wrap_angle(num.arg - b.tilde_logdet.arg);
  return f;
}

double log_abs_F_both_perturbed(const CVec& alpha, const ModelBundle& b) {
  const CVec pot = b.potential(alpha);
  CMat T = b.Ptilde;
  T.diagonal() += b.delta * pot;
  T.diagonal().array() -= b.z;
  return log_det_lu(b.shifted(alpha)).log_abs - log_det_lu(T).log_abs - b.phi / b.h;
}

std::vector<cd> pencil_zeros(const CMat& A, const CMat& B) {
  const double nB = B.norm();
  if (!(nB > 0.0)) throw Refusal("pencil_zeros: coupling is zero (B = 0)");
  const double nA = A.norm();
  const GeneralizedEigen ge = generalized_eigenvalues(A, -B);
  std::vector<cd> out;
  for (Eigen::Index i = 0; i < ge.alpha.size(); ++i) {
    const double ab = std::abs(ge.beta(i));
    const double aa = std::abs(ge.alpha(i));
    if (ab <= 1e-13 * nB) {
      if (aa <= 1e-13 * std::max(nA, 1e-300)) {
        throw Refusal("pencil_zeros: singular pencil (alpha and beta both vanish)");
      }
      continue;  // infinite eigenvalue
    }
    out.push_back(ge.alpha(i) / ge.beta(i));
  }
  std::sort(out.begin(), out.end(), [](cd a, cd b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return out;
}

double LineProbe::log_abs_factorized(cd w) const {
  double acc = log_ref;
  for (const cd& wj : zeros) acc += std::log(std::abs(w - wj)) - std::log(std::abs(w_ref - wj));
  return acc;
}

int LineProbe::zeros_within(double radius) const {
  int c = 0;
  for (const cd& wj : zeros) c += std::abs(wj - center) < radius ? 1 : 0;
  return c;
}

nlohmann::json LineProbe::to_json() const {
  nlohmann::json zs = nlohmann::json::array();
  for (const cd& w : zeros_in_disc) zs.push_back({w.real(), w.imag()});
  return {{"center", {center.real(), center.imag()}},
          {"r0", r0},
          {"M", M},
          {"zeros_in_disc", zs},
          {"total_zeros", static_cast<int>(zeros.size())}};
}

LineProbe make_probe(const CVec& alpha0, const CVec& alpha1, double R) {
  if (alpha0.size() != alpha1.size()) throw Refusal("make_probe: size mismatch");
  if (std::abs(alpha1.norm() - R) > 1e-9 * R) throw Refusal("make_probe: |alpha1| must equal R");
  LineProbe p;
  p.alpha0 = alpha0;
  p.alpha1 = alpha1;
  p.R = R;
  const cd beta_u = inner(alpha0 / R, alpha1 / R);
  p.center = -beta_u;
  const double r2 = 1.0 - (alpha0 / R).squaredNorm() + std::norm(beta_u);
  if (!(r2 > 0.0)) throw Refusal("make_probe: alpha0 lies outside the ball of radius R");
  p.r0 = std::sqrt(r2);
  return p;
}

void line_zeros(LineProbe& probe, const ModelBundle& b) {
  const CMat A = pencil_A(probe, b);
  const CMat B = pencil_B(probe, b);
  probe.zeros = pencil_zeros(A, B);
  probe.zeros_in_disc.clear();
  for (const cd& w : probe.zeros) {
    if (std::abs(w - probe.center) < 1.5 * probe.r0) probe.zeros_in_disc.push_back(w);
  }
  probe.M = static_cast<int>(probe.zeros_in_disc.size());
  probe.w_ref = 0.0;
  probe.log_ref = normalized_det(probe.alpha0, b).log_abs;
}

double contour_radius(const LineProbe& probe) {
  std::vector<double> radii;
  for (const cd& w : probe.zeros) radii.push_back(std::abs(w - probe.center));
  const double lo = 0.9 * probe.r0;
  const double hi = probe.r0;
  double best = hi;
  double best_gap = -1.0;
  const int samples = 2001;
  for (int i = 0; i < samples; ++i) {
    const double r = hi - (hi - lo) * i / (samples - 1);
    double gap = std::numeric_limits<double>::infinity();
    for (double rj : radii) gap = std::min(gap, std::abs(r - rj));
    if (gap > best_gap) {
      best_gap = gap;
      best = r;
    }
  }
  return best;
}

WindingResult winding_count(const LineProbe& probe, const ModelBundle& b, double radius) {
  const CMat A = pencil_A(probe, b);
  const CMat B = pencil_B(probe, b);
  WindingResult res;
  res.radius = radius;
  auto arg_at = [&](double theta) {
    ++res.evaluations;
    const cd w = probe.center + std::polar(radius, theta);
    return log_det_lu(A + w * B).arg;
  };
  const int max_depth = 24;
  std::function<double(double, double, double, double, int)> step =
      [&](double ta, double aa, double tb, double ab, int depth) -> double {
    const double d = wrap_angle(ab - aa);
    if (std::abs(d) <= kPi / 2.0) return d;
    if (depth >= max_depth) {
      throw Refusal("winding_count: phase jump above pi/2 at maximal subdivision");
    }
    const double tm = 0.5 * (ta + tb);
    const double am = arg_at(tm);
    return step(ta, aa, tm, am, depth + 1) + step(tm, am, tb, ab, depth + 1);
  };
  const int base = 256;
  std::vector<double> args(base + 1);
  for (int i = 0; i < base; ++i) args[i] = arg_at(kTwoPi * i / base);
  args[base] = args[0];
  double total = 0.0;
  for (int i = 0; i < base; ++i) {
    total += step(kTwoPi * i / base, args[i], kTwoPi * (i + 1) / base, args[i + 1], 0);
  }
  res.winding = static_cast<int>(std::lround(total / kTwoPi));
  res.zeros_inside = probe.zeros_within(radius);
  return res;
}

JensenResult jensen_check(const LineProbe& probe, const ModelBundle& b, double radius) {
  const CMat A = pencil_A(probe, b);
  const CMat B = pencil_B(probe, b);
  auto logabs = [&](cd w) { return log_det_lu(A + w * B).log_abs; };
  JensenResult r;
  r.at_center = logabs(probe.center);
  int n = 512;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += logabs(probe.center + std::polar(radius, kTwoPi * i / n));
  double mean = sum / n;
  while (n < (1 << 16)) {
    double add = 0.0;
    for (int i = 0; i < n; ++i) {
      add += logabs(probe.center + std::polar(radius, kTwoPi * (i + 0.5) / n));
    }
    sum += add;
    n *= 2;
    const double next = sum / n;
    const bool done = std::abs(next - mean) < 1e-7;
    mean = next;
    if (done) break;
  }
  r.points = n;
  r.mean_on_circle = mean;
  for (const cd& w : probe.zeros) {
    const double d = std::abs(w - probe.center);
    if (d < radius) r.zero_sum += std::log(radius / d);
  }
  r.residual = std::abs(r.mean_on_circle - r.at_center - r.zero_sum);
  return r;
}

double cauchy_riemann_residual(const LineProbe& probe, const ModelBundle& b, cd w0,
                               double side) {
  const CMat A = pencil_A(probe, b);
  const CMat B = pencil_B(probe, b);
  std::vector<double> gx, gw;
  gauss_legendre(20, gx, gw);
  const double hs = 0.5 * side;
  const cd corners[5] = {w0 + cd(-hs, -hs), w0 + cd(hs, -hs), w0 + cd(hs, hs),
                         w0 + cd(-hs, hs), w0 + cd(-hs, -hs)};
  cd integral = 0.0;
  double max_abs = 0.0;
  bool first = true;
  double prev_arg = 0.0;
  double unwrapped = 0.0;
  for (int s = 0; s < 4; ++s) {
    const cd a = corners[s];
    const cd d = corners[s + 1] - corners[s];
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const cd w = a + 0.5 * (gx[i] + 1.0) * d;
      const LogDet ld = log_det_lu(A + w * B);
      if (first) {
        unwrapped = ld.arg;
        first = false;
      } else {
        unwrapped += wrap_angle(ld.arg - prev_arg);
      }
      prev_arg = ld.arg;
      const cd logf(ld.log_abs, unwrapped);
      max_abs = std::max(max_abs, std::abs(logf));
      integral += 0.5 * gw[i] * logf * d;
    }
  }
  return std::abs(integral) / (4.0 * side * std::max(max_abs, 1e-300));
}

nlohmann::json SmallValueMeasure::to_json() const {
  return {{"eps", eps}, {"measure", measure}, {"bound_shape", bound_shape}, {"samples", samples}};
}

SmallValueMeasure small_value_measure(const LineProbe& probe, std::vector<double> eps,
                                      double eps0, double h) {
  std::sort(eps.begin(), eps.end());
  SmallValueMeasure out;
  out.eps = eps;
  if (eps.empty()) return out;
  const double log_eps_max = std::log(eps.back());
  struct Cell {
    double a, b, value;
  };
  const int base = 2048;
  std::vector<Cell> cells;
  cells.reserve(base);
  for (int i = 0; i < base; ++i) {
    const double a = probe.r0 * i / base;
    const double bnd = probe.r0 * (i + 1) / base;
    cells.push_back({a, bnd, probe.log_abs_factorized(0.5 * (a + bnd))});
  }
  auto near_zero = [&](const Cell& c) {
    const double width = c.b - c.a;
    for (const cd& w : probe.zeros) {
      if (std::abs(w.imag()) < 2.0 * width && w.real() > c.a - width && w.real() < c.b + width) {
        return true;
      }
    }
    return false;
  };
  for (int pass = 0; pass < 3; ++pass) {
    std::vector<Cell> next;
    next.reserve(cells.size());
    for (const Cell& c : cells) {
      if (c.value < log_eps_max + 2.0 || near_zero(c)) {
        const int sub = 8;
        for (int j = 0; j < sub; ++j) {
          const double a = c.a + (c.b - c.a) * j / sub;
          const double bnd = c.a + (c.b - c.a) * (j + 1) / sub;
          next.push_back({a, bnd, probe.log_abs_factorized(0.5 * (a + bnd))});
        }
      } else {
        next.push_back(c);
      }
    }
    cells.swap(next);
  }
  out.samples = static_cast<int>(cells.size());
  for (double e : eps) {
    const double le = std::log(e);
    double m = 0.0;
    for (const Cell& c : cells) m += c.value < le ? c.b - c.a : 0.0;
    out.measure.push_back(m);
    out.bound_shape.push_back(eps0 / h * std::exp(h * le / eps0));
  }
  return out;
}

WilsonInterval wilson_interval(int k, int n, double zscore) {
  if (n <= 0) return {0.0, 1.0};
  const double p = static_cast<double>(k) / n;
  const double z2 = zscore * zscore;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = zscore * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

nlohmann::json FailureCurve::to_json() const {
  nlohmann::json ci_json = nlohmann::json::array();
  for (const auto& c : ci) ci_json.push_back({c.lo, c.hi});
  return {{"eps_tilde", eps_tilde},
          {"failures", failures},
          {"p", p},
          {"wilson95", ci_json},
          {"n_draws", n_draws},
          {"log_abs_F", log_abs_F},
          {"non_increasing", non_increasing},
          {"fit_intercept", fit_intercept},
          {"fit_rate", fit_rate},
          {"fit_r2", fit_r2},
          {"fit_points", fit_points}};
}

FailureCurve failure_probability_mc(const ModelBundle& b, const CoefficientLaw& law,
                                    std::vector<double> eps_tilde, int n_draws,
                                    std::uint64_t root_seed, std::uint64_t key) {
  if (n_draws < 100) throw Refusal("failure_probability_mc needs at least 100 draws");
  std::sort(eps_tilde.begin(), eps_tilde.end());
  FailureCurve fc;
  fc.eps_tilde = eps_tilde;
  fc.n_draws = n_draws;
  for (int i = 0; i < n_draws; ++i) {
    Stream stream(root_seed, key, static_cast<std::uint64_t>(i));
    const CVec alpha = law.sample(b.D(), stream);
    fc.log_abs_F.push_back(normalized_det(alpha, b).log_abs);
  }
  for (double e : eps_tilde) {
    const double threshold = -e / b.h;
    int k = 0;
    for (double v : fc.log_abs_F) k += v < threshold ? 1 : 0;
    fc.failures.push_back(k);
    fc.p.push_back(static_cast<double>(k) / n_draws);
    fc.ci.push_back(wilson_interval(k, n_draws));
  }
  fc.non_increasing = true;
  for (std::size_t i = 1; i < fc.p.size(); ++i) {
    if (fc.p[i] > fc.p[i - 1]) fc.non_increasing = false;
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < fc.p.size(); ++i) {
    if (fc.failures[i] > 0) {
      xs.push_back(eps_tilde[i]);
      ys.push_back(std::log(fc.p[i]));
    }
  }
  fc.fit_points = static_cast<int>(xs.size());
  if (xs.size() >= 3) {
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    const double slope = sxy / sxx;
    fc.fit_rate = -slope;
    fc.fit_intercept = my - slope * mx;
    fc.fit_r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  }
  return fc;
}

}  // namespace weyllab
