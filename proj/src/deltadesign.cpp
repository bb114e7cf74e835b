#include "weyllab/deltadesign.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "weyllab/errors.hpp"

namespace weyllab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int cutoff_index(double L, double h) {
  return static_cast<int>(std::floor(L / h * (1.0 + 1e-12)));
}

// sum_{k > k0} (1 + (h k)^2)^-s: direct summation followed by an asymptotic
// tail integral from k_end + 1/2.
double one_sided_tail(double h, double s, int k0) {
  const long long direct = 200000;
  double acc = 0.0;
  // Summing from the far end keeps the small terms from being swamped.
  for (long long k = k0 + direct; k > k0; --k) {
    const double x = h * static_cast<double>(k);
    acc += std::pow(1.0 + x * x, -s);
  }
  const double x0 = static_cast<double>(k0 + direct) + 0.5;
  const double hx = h * x0;
  // int_{x0}^inf (h x)^{-2s} (1 - s (h x)^{-2}) dx
  const double lead = x0 * std::pow(hx, -2.0 * s) / (2.0 * s - 1.0);
  const double corr = s * x0 * std::pow(hx, -2.0 * s - 2.0) / (2.0 * s + 1.0);
  return acc + lead - corr;
}

// Fourier coefficients I_n(B) of exp(B cos y), n = 0..nmax, truncated once
// they drop below 1e-34 of the peak.
std::vector<double> bessel_coeffs(double B, int min_count) {
  std::vector<double> c;
  const double peak = std::cyl_bessel_i(0.0, B);
  for (int n = 0;; ++n) {
    const double v = std::cyl_bessel_i(static_cast<double>(n), B);
    c.push_back(v);
    if (n >= min_count && v < 1e-34 * peak) break;
    if (n > 100000) break;
  }
  return c;
}

double hs_weight(double h, int n, double s) {
  const double x = h * n;
  return std::pow(1.0 + x * x, s);
}

}  // namespace

CandidateSet fourier_candidates(const std::vector<int>& modes, int grid) {
  if (grid < 1) throw Refusal("candidate grid must be non-empty");
  CandidateSet c;
  c.volume = kTwoPi;
  c.points.resize(grid);
  c.values.resize(grid, static_cast<Eigen::Index>(modes.size()));
  const double norm = 1.0 / std::sqrt(kTwoPi);
  for (int i = 0; i < grid; ++i) {
    const double x = kTwoPi * i / grid;
    c.points[i] = x;
    for (std::size_t j = 0; j < modes.size(); ++j) {
      long long r = (static_cast<long long>(modes[j]) * i) % grid;
      if (r < 0) r += grid;
      const double ang = kTwoPi * static_cast<double>(r) / grid;
      c.values(i, static_cast<Eigen::Index>(j)) = norm * cd(std::cos(ang), std::sin(ang));
    }
  }
  return c;
}

CandidateSet node_candidates(const SpectralBasis& basis, const CMat& functions) {
  if (functions.rows() != basis.size()) {
    throw Refusal("node_candidates: function rows do not match the basis size");
  }
  CandidateSet c;
  c.volume = kTwoPi;
  c.values = functions;
  c.points.resize(basis.size());
  for (int i = 0; i < basis.size(); ++i) c.points[i] = basis.node(i);
  return c;
}

PointSelection select_points(const CandidateSet& cand, int n_points) {
  const Eigen::Index G = cand.values.rows();
  const int N = cand.dimension();
  if (n_points != N) {
    throw Refusal("select_points: the number of points must equal the vector dimension");
  }
  if (N < 1 || G < N) throw Refusal("select_points: grid smaller than the dimension");
  const double w = cand.weight();
  const double vol = cand.volume;

  PointSelection sel;
  sel.volume = vol;
  const CMat gram = w * (cand.values.adjoint() * cand.values);  // conjugate Gramian
  Eigen::SelfAdjointEigenSolver<CMat> es(gram, Eigen::EigenvaluesOnly);
  sel.gram_eigs = es.eigenvalues();
  sel.gram_deviation = (gram - CMat::Identity(N, N)).jacobiSvd().singularValues()(0);
  sel.ledger.resize(N);
  for (int M = 1; M <= N; ++M) {
    double acc = 0.0;
    for (int j = 0; j < N - M + 1; ++j) acc += std::max(sel.gram_eigs(j), 0.0);
    sel.ledger(M - 1) = acc;
  }

  CMat residual = cand.values;
  RVec dist2 = residual.rowwise().squaredNorm();
  sel.achieved.resize(N);
  sel.step_floor.resize(N);
  sel.E.resize(N, N);
  std::vector<char> taken(G, 0);
  for (int M = 1; M <= N; ++M) {
    Eigen::Index best = -1;
    double best_val = -1.0;
    for (Eigen::Index x = 0; x < G; ++x) {
      if (!taken[x] && dist2(x) > best_val) {
        best_val = dist2(x);
        best = x;
      }
    }
    const double floor2 = sel.ledger(M - 1) / vol;
    if (best_val < floor2 * (1.0 - 1e-9) - 1e-14) {
      throw std::logic_error("select_points: greedy step " + std::to_string(M) +
                             " below its Gramian floor");
    }
    taken[best] = 1;
    sel.candidate_index.push_back(static_cast<int>(best));
    sel.points.push_back(cand.points[best]);
    sel.E.col(M - 1) = cand.values.row(best).transpose();
    const double c = std::sqrt(best_val);
    sel.achieved(M - 1) = c;
    sel.step_floor(M - 1) = std::sqrt(floor2);
    // New orthonormal direction; rows are updated by subtracting their
    // component along it, so dist2 stays the squared residual norm.
    const CVec nu = residual.row(best).transpose() / c;
    const CVec coef = residual * nu.conjugate();
    residual -= coef * nu.transpose();
    dist2 = residual.rowwise().squaredNorm();
  }

  sel.log_det_E = log_det_lu(sel.E).log_abs;
  double lf = 0.0;
  for (int M = 0; M < N; ++M) lf += 0.5 * std::log(sel.ledger(M));
  sel.log_det_floor = lf - 0.5 * N * std::log(vol);
  sel.certificate_holds = sel.log_det_E >= sel.log_det_floor - 1e-12;
  return sel;
}

nlohmann::json PointSelection::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    pts.push_back({{"index", candidate_index[i]},
                   {"point", points[i]},
                   {"achieved", achieved(static_cast<Eigen::Index>(i))},
                   {"floor", step_floor(static_cast<Eigen::Index>(i))}});
  }
  return {{"points", pts},
          {"volume", volume},
          {"gram_deviation", gram_deviation},
          {"log_det_E", log_det_E},
          {"log_det_floor", log_det_floor},
          {"certificate_holds", certificate_holds}};
}

void PointSelection::write_csv(std::ostream& os) const {
  os << "index,point,achieved_distance,floor\n";
  os.precision(17);
  for (std::size_t i = 0; i < points.size(); ++i) {
    os << candidate_index[i] << ',' << points[i] << ','
       << achieved(static_cast<Eigen::Index>(i)) << ','
       << step_floor(static_cast<Eigen::Index>(i)) << '\n';
  }
}

CMat mq_matrix(const CVec& q, const CMat& e, const CMat& f, double weight) {
  if (e.cols() != f.cols() || e.rows() != f.rows() || q.size() != e.rows()) {
    throw Refusal("mq_matrix: shape mismatch");
  }
  return weight * (f.adjoint() * q.asDiagonal() * e);
}

CVec point_mass_potential(int grid, const std::vector<int>& nodes, double weight) {
  CVec q = CVec::Zero(grid);
  for (int i : nodes) q(i) += 1.0 / weight;
  return q;
}

double log_det_M_floor(const PointSelection& sel) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < sel.ledger.size(); ++j) acc += std::log(sel.ledger(j));
  return acc - sel.ledger.size() * std::log(sel.volume);
}

double mq_s1_floor(const PointSelection& sel) {
  return std::exp(log_det_M_floor(sel) / static_cast<double>(sel.ledger.size()));
}

std::vector<double> mq_singular_floors(const PointSelection& sel, double s1) {
  // s_1^{k-1} s_k^{N-k+1} >= |det M| >= prod E_j / vol^N
  const int N = static_cast<int>(sel.ledger.size());
  const double logdet = log_det_M_floor(sel);
  std::vector<double> out(N);
  for (int k = 1; k <= N; ++k) {
    out[k - 1] = std::exp((logdet - (k - 1) * std::log(s1)) / (N - k + 1));
  }
  return out;
}

CVec DeltaApproximation::node_values(const ReferenceOperator& ref) const {
  CVec v = CVec::Zero(ref.functions.rows());
  for (std::size_t c = 0; c < indices.size(); ++c) {
    v += alpha(static_cast<Eigen::Index>(c)) * ref.functions.col(indices[c]);
  }
  return v;
}

double DeltaApproximation::value_at_target() const {
  return static_cast<double>(indices.size()) / kTwoPi;
}

double delta_remainder_norm(double h, double L, double s) {
  if (!(s > 0.5)) throw Refusal("delta remainder needs s > n/2");
  const int K = cutoff_index(L, h);
  return std::sqrt(2.0 * one_sided_tail(h, s, K) / kTwoPi);
}

DeltaApproximation approximate_delta(double a, const ReferenceOperator& ref, double L,
                                     double s) {
  if (!std::isfinite(a)) throw Refusal("approximate_delta: target is not finite");
  DeltaApproximation d;
  d.target = a;
  d.L = L;
  d.h = ref.h;
  d.s = s;
  for (Eigen::Index i = 0; i < ref.mu.size(); ++i) {
    if (ref.mu(i) <= L) d.indices.push_back(static_cast<int>(i));
  }
  d.alpha.resize(static_cast<Eigen::Index>(d.indices.size()));
  const double norm = 1.0 / std::sqrt(kTwoPi);
  for (std::size_t c = 0; c < d.indices.size(); ++c) {
    const int k = ref.modes[d.indices[c]];
    d.alpha(static_cast<Eigen::Index>(c)) = norm * std::polar(1.0, -k * a);
  }
  d.remainder_norm = delta_remainder_norm(ref.h, L, s);
  return d;
}

SmoothFrame SmoothFrame::random(int n, double beta_lo, double beta_hi, Stream& stream) {
  SmoothFrame f;
  for (int j = 0; j < n; ++j) {
    f.beta.push_back(beta_lo + (beta_hi - beta_lo) * stream.uniform());
    f.theta.push_back(kTwoPi * stream.uniform());
  }
  return f;
}

double SmoothFrame::scale(int j) const {
  return 1.0 / std::sqrt(kTwoPi * std::cyl_bessel_i(0.0, 2.0 * beta[j]));
}

double SmoothFrame::value(int j, double x) const {
  return scale(j) * std::exp(beta[j] * std::cos(x - theta[j]));
}

CMat SmoothFrame::node_values(const SpectralBasis& basis) const {
  CMat v(basis.size(), size());
  for (int i = 0; i < basis.size(); ++i) {
    for (int j = 0; j < size(); ++j) v(i, j) = value(j, basis.node(i));
  }
  return v;
}

double SmoothFrame::hs_frame_constant(double h, double s) const {
  const int N = size();
  std::vector<std::vector<double>> coeffs(N);
  std::size_t nmax = 0;
  for (int j = 0; j < N; ++j) {
    coeffs[j] = bessel_coeffs(beta[j], 8);
    nmax = std::max(nmax, coeffs[j].size());
  }
  CMat G = CMat::Zero(N, N);
  for (int j = 0; j < N; ++j) {
    for (int k = 0; k < N; ++k) {
      cd acc = 0.0;
      for (int n = -static_cast<int>(nmax) + 1; n < static_cast<int>(nmax); ++n) {
        const std::size_t an = static_cast<std::size_t>(std::abs(n));
        const double cj = an < coeffs[j].size() ? coeffs[j][an] : 0.0;
        const double ck = an < coeffs[k].size() ? coeffs[k][an] : 0.0;
        acc += hs_weight(h, n, s) * cj * ck * std::polar(1.0, -n * (theta[j] - theta[k]));
      }
      G(j, k) = kTwoPi * scale(j) * scale(k) * acc;
    }
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(G, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
}

namespace {

// e_j e_k = c_j c_k exp(B cos(x - T)) with B e^{iT} = beta_j e^{i theta_j} + beta_k e^{i theta_k}.
void product_phasor(const SmoothFrame& f, int j, int k, double& B, double& T) {
  const cd z = std::polar(f.beta[j], f.theta[j]) + std::polar(f.beta[k], f.theta[k]);
  B = std::abs(z);
  T = std::arg(z);
}

}  // namespace

double SmoothFrame::product_hs_norm(double h, double s) const {
  double total = 0.0;
  for (int j = 0; j < size(); ++j) {
    for (int k = 0; k < size(); ++k) {
      double B = 0.0, T = 0.0;
      product_phasor(*this, j, k, B, T);
      const auto c = bessel_coeffs(B, 8);
      double acc = hs_weight(h, 0, s) * c[0] * c[0];
      for (std::size_t n = 1; n < c.size(); ++n) {
        acc += 2.0 * hs_weight(h, static_cast<int>(n), s) * c[n] * c[n];
      }
      const double cc = scale(j) * scale(k);
      total += kTwoPi * cc * cc * acc;
    }
  }
  return std::sqrt(total);
}

double mq_perturbation_bound(double r_norm, double h, double constant) {
  return constant * std::pow(h, -0.5) * r_norm;
}

MqRemainderCheck mq_remainder_check(const SmoothFrame& frame, double a, double L,
                                    double s, double h) {
  const int N = frame.size();
  const int K = cutoff_index(L, h);
  // M_r(j, k) = <r, e_k e_j> is the Fourier tail of e_j e_k at a, |n| > K.
  CMat Mr(N, N);
  for (int j = 0; j < N; ++j) {
    for (int k = 0; k < N; ++k) {
      double B = 0.0, T = 0.0;
      product_phasor(frame, j, k, B, T);
      const auto c = bessel_coeffs(B, K + 2);
      // Sum small terms first.
      double acc = 0.0;
      for (std::size_t n = c.size() - 1; n > static_cast<std::size_t>(K); --n) {
        acc += 2.0 * c[n] * std::cos(static_cast<double>(n) * (a - T));
      }
      Mr(j, k) = frame.scale(j) * frame.scale(k) * acc;
    }
  }
  MqRemainderCheck out;
  out.r_norm = delta_remainder_norm(h, L, s);
  out.constant = frame.product_hs_norm(h, s) * std::sqrt(h);
  out.bound = mq_perturbation_bound(out.r_norm, h, out.constant);
  out.actual = N ? op_norm(Mr) : 0.0;
  out.ok = out.actual <= out.bound * (1.0 + 1e-12);
  return out;
}

}  // namespace weyllab
