#include "weyllab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "weyllab/errors.hpp"

namespace weyllab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// exp(2 pi i r / n) with the residue reduced first, so equal residues give
// bit-identical values.
cd root_of_unity(long long r, int n) {
  r %= n;
  if (r < 0) r += n;
  const double angle = kTwoPi * static_cast<double>(r) / n;
  return {std::cos(angle), std::sin(angle)};
}

double max_abs_row_sum_hermitian(const CMat& A) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      row += std::abs(0.5 * (A(i, j) + std::conj(A(j, i))));
    }
    best = std::max(best, row);
  }
  return best;
}

}  // namespace

SpectralBasis::SpectralBasis(int size, double h) : size_(size), h_(h) {
  if (size < 1) throw Refusal("spectral basis size must be positive");
  if (!(h > 0.0)) throw Refusal("semiclassical parameter h must be positive");
  const int lo = -(size / 2);
  modes_.resize(size);
  for (int i = 0; i < size; ++i) modes_[i] = lo + i;
}

SpectralBasis SpectralBasis::resolving(double xi_needed, double h) {
  const int K = static_cast<int>(std::ceil(2.0 * xi_needed / h));
  return SpectralBasis(2 * std::max(K, 1) + 1, h);
}

double SpectralBasis::node(int j) const { return kTwoPi * j / size_; }

int SpectralBasis::max_mode() const {
  return std::max(std::abs(modes_.front()), std::abs(modes_.back()));
}

double SpectralBasis::weight() const { return kTwoPi / size_; }

CMat SpectralBasis::fourier_matrix() const {
  CMat F(size_, size_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(size_));
  for (int j = 0; j < size_; ++j) {
    for (int k = 0; k < size_; ++k) {
      F(j, k) = scale * root_of_unity(static_cast<long long>(modes_[k]) * j, size_);
    }
  }
  return F;
}

CVec SpectralBasis::to_modes(const CVec& node_values) const {
  return fourier_matrix().adjoint() * node_values;
}

CVec SpectralBasis::to_nodes(const CVec& mode_values) const {
  return fourier_matrix() * mode_values;
}

nlohmann::json SpectralBasis::to_json() const {
  return {{"kind", "fourier_torus"},
          {"size", size_},
          {"h", h_},
          {"mode_min", modes_.front()},
          {"mode_max", modes_.back()}};
}

CMat xi_multiplier(const SpectralBasis& basis, const std::function<cd(double)>& b) {
  const int n = basis.size();
  std::vector<cd> symbol(n);
  for (int k = 0; k < n; ++k) symbol[k] = b(basis.h() * basis.mode(k));
  // First column of the circulant: c[m] = (1/n) sum_k b_k exp(2 pi i k m / n).
  std::vector<cd> c(n);
  for (int m = 0; m < n; ++m) {
    cd acc = 0.0;
    for (int k = 0; k < n; ++k) {
      acc += symbol[k] * root_of_unity(static_cast<long long>(basis.mode(k)) * m, n);
    }
    c[m] = acc / static_cast<double>(n);
  }
  CMat B(n, n);
  for (int j = 0; j < n; ++j) {
    for (int l = 0; l < n; ++l) B(j, l) = c[((j - l) % n + n) % n];
  }
  return B;
}

CMat x_multiplier(const SpectralBasis& basis, const std::function<cd(double)>& a) {
  const int n = basis.size();
  CMat X = CMat::Zero(n, n);
  for (int j = 0; j < n; ++j) X(j, j) = a(basis.node(j));
  return X;
}

DiscretizedOperator make_operator(CMat matrix, const SpectralBasis& basis,
                                  std::string source) {
  DiscretizedOperator op;
  op.hermitian_part_bound = max_abs_row_sum_hermitian(matrix);
  op.matrix = std::move(matrix);
  op.basis = basis;
  op.source = std::move(source);
  return op;
}

DiscretizedOperator discretize(const SymbolModel& sym, const SpectralBasis& basis) {
  const int n = basis.size();
  CMat A = CMat::Zero(n, n);
  for (const auto& term : sym.terms) {
    if (!term.x_factor && !term.xi_factor) {
      A += CMat::Identity(n, n);
    } else if (!term.xi_factor) {
      A += x_multiplier(basis, term.x_factor);
    } else if (!term.x_factor) {
      A += xi_multiplier(basis, term.xi_factor);
    } else {
      const CMat X = x_multiplier(basis, term.x_factor);
      const CMat B = xi_multiplier(basis, term.xi_factor);
      A += 0.5 * (X * B + B * X);
    }
  }
  return make_operator(std::move(A), basis,
                       sym.name + " h=" + std::to_string(basis.h()));
}

DiscretizedOperator discretize(const TildeSymbol& tilde, const SpectralBasis& basis) {
  DiscretizedOperator op = discretize(tilde.base, basis);
  op.matrix += xi_multiplier(basis, [&](double xi) { return tilde.shift(0.0, xi); });
  return make_operator(std::move(op.matrix), basis,
                       tilde.base.name + "~ h=" + std::to_string(basis.h()));
}

int ReferenceOperator::count_below(double L) const {
  int c = 0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) c += mu(i) <= L ? 1 : 0;
  return c;
}

std::vector<int> ReferenceOperator::admissible(double L) const {
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (mu(i) > 0.0 && mu(i) <= L) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

ReferenceOperator reference_eigenbasis(const SpectralBasis& basis, int n_keep) {
  const int n = basis.size();
  if (n_keep < 0 || n_keep > n) throw Refusal("n_keep exceeds the basis size");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const int ka = basis.mode(a);
    const int kb = basis.mode(b);
    if (std::abs(ka) != std::abs(kb)) return std::abs(ka) < std::abs(kb);
    return ka < kb;
  });
  ReferenceOperator ref;
  ref.h = basis.h();
  ref.weight = basis.weight();
  ref.modes.resize(n_keep);
  ref.mu.resize(n_keep);
  ref.functions.resize(n, n_keep);
  const double norm = 1.0 / std::sqrt(kTwoPi);
  for (int c = 0; c < n_keep; ++c) {
    const int k = basis.mode(order[c]);
    ref.modes[c] = k;
    ref.mu(c) = basis.h() * std::abs(k);
    for (int j = 0; j < n; ++j) {
      ref.functions(j, c) = norm * root_of_unity(static_cast<long long>(k) * j, n);
    }
  }
  return ref;
}

double hs_norm(const CVec& coeffs, const RVec& mu, double s) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    acc += std::pow(1.0 + mu(i) * mu(i), s) * std::norm(coeffs(i));
  }
  return std::sqrt(acc);
}

double sup_over_hs_worst(double h, double s, int K) {
  double acc = 0.0;
  for (int k = -K; k <= K; ++k) acc += std::pow(1.0 + (h * k) * (h * k), -s);
  return std::sqrt(acc / kTwoPi);
}

double TrigPoly::hs_norm(double s, double h) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const double mu = h * (kmin + static_cast<int>(i));
    acc += std::pow(1.0 + mu * mu, s) * std::norm(coeffs[i]);
  }
  return std::sqrt(acc);
}

cd TrigPoly::eval(double x) const {
  cd acc = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    acc += coeffs[i] * std::polar(1.0, (kmin + static_cast<int>(i)) * x);
  }
  return acc / std::sqrt(kTwoPi);
}

TrigPoly TrigPoly::product(const TrigPoly& other) const {
  // e_j e_k = e_{j+k} / sqrt(2 pi) for the normalized exponentials.
  TrigPoly out;
  if (coeffs.empty() || other.coeffs.empty()) return out;
  out.kmin = kmin + other.kmin;
  out.coeffs.assign(coeffs.size() + other.coeffs.size() - 1, cd(0.0));
  const double scale = 1.0 / std::sqrt(kTwoPi);
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    for (std::size_t j = 0; j < other.coeffs.size(); ++j) {
      out.coeffs[i + j] += scale * coeffs[i] * other.coeffs[j];
    }
  }
  return out;
}

ProductProbe product_inequality_probe(const TrigPoly& u, const TrigPoly& v,
                                      double s, double h) {
  if (!(s > 0.5)) throw Refusal("product inequality needs s > n/2");
  ProductProbe p;
  p.u_norm = u.hs_norm(s, h);
  p.v_norm = v.hs_norm(s, h);
  p.uv_norm = u.product(v).hs_norm(s, h);
  const double denom = std::pow(h, -0.5) * p.u_norm * p.v_norm;
  p.ratio = denom > 0 ? p.uv_norm / denom : 0.0;
  return p;
}

DiscretizedOperator relative_operator(const DiscretizedOperator& P,
                                      const DiscretizedOperator& Pt, cd z) {
  const Eigen::Index n = P.matrix.rows();
  const CMat I = CMat::Identity(n, n);
  const CMat denom = Pt.matrix - z * I;
  const double smin = sigma_min(denom);
  if (smin < 1e-8) {
    throw Refusal("relative_operator: sigma_min(Pt - z) = " + std::to_string(smin) +
                  " < 1e-8");
  }
  CMat rel = denom.partialPivLu().solve(P.matrix - z * I);
  return make_operator(std::move(rel), P.basis, "relative(" + P.source + ")");
}

std::vector<cd> sorted_eigenvalues(const CMat& A) {
  const CVec ev = eigenvalues(A);
  std::vector<cd> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end(), [](cd a, cd b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return out;
}

}  // namespace weyllab
