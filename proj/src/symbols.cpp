#include "weyllab/symbols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "weyllab/errors.hpp"

namespace weyllab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
const cd kI(0.0, 1.0);

cd json_complex(const nlohmann::json& params, const char* key, cd fallback) {
  if (!params.contains(key)) return fallback;
  const auto& v = params.at(key);
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2) return {v[0].get<double>(), v[1].get<double>()};
  throw Refusal(std::string("symbol parameter '") + key +
                "' must be a number or a [re, im] pair");
}

nlohmann::json complex_json(cd v) { return nlohmann::json::array({v.real(), v.imag()}); }

// Per-term factor tables on a tensor grid, so p(x_i, xi_j) is a short sum.
struct FactorTable {
  std::vector<std::vector<cd>> a;
  std::vector<std::vector<cd>> b;

  FactorTable(const SymbolModel& sym, const std::vector<double>& xs,
              const std::vector<double>& xis) {
    for (const auto& term : sym.terms) {
      std::vector<cd> av(xs.size(), cd(1.0));
      std::vector<cd> bv(xis.size(), cd(1.0));
      if (term.x_factor) {
        for (std::size_t i = 0; i < xs.size(); ++i) av[i] = term.x_factor(xs[i]);
      }
      if (term.xi_factor) {
        for (std::size_t j = 0; j < xis.size(); ++j) bv[j] = term.xi_factor(xis[j]);
      }
      a.push_back(std::move(av));
      b.push_back(std::move(bv));
    }
  }

  cd operator()(std::size_t i, std::size_t j) const {
    cd acc = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) acc += a[t][i] * b[t][j];
    return acc;
  }
};

std::vector<double> midpoints(double lo, double hi, int n) {
  std::vector<double> out(n);
  const double step = (hi - lo) / n;
  for (int i = 0; i < n; ++i) out[i] = lo + (i + 0.5) * step;
  return out;
}

double truncation_radius(const SymbolModel& sym, double level) {
  if (!sym.is_coercive()) {
    throw Refusal("truncation not certifiable: symbol '" + sym.name +
                  "' is not declared coercive in xi");
  }
  return sym.coercive_radius(level);
}

double segment_distance(cd z, cd a, cd b) {
  const cd d = b - a;
  const double len2 = std::norm(d);
  double t = len2 > 0 ? ((z - a) * std::conj(d)).real() / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::abs(z - (a + t * d));
}

// Midpoint count of the predicate. Cells whose value differs from a neighbor
// are resampled on a 233-point Fibonacci lattice, which avoids the resonance
// between a tensor sub-grid and the level set.
template <class Pred>
double predicate_volume(const SymbolModel& sym, double xi_radius, int nx, int nxi,
                        Pred&& pred, bool* leak) {
  constexpr int kLattice = 233;
  constexpr int kStride = 144;
  const auto xs = midpoints(0.0, kTwoPi, nx);
  const auto xis = midpoints(-xi_radius, xi_radius, nxi);
  const double dx = kTwoPi / nx;
  const double dxi = 2.0 * xi_radius / nxi;
  FactorTable table(sym, xs, xis);
  std::vector<char> hit(static_cast<std::size_t>(nx) * nxi);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nxi; ++j) {
      hit[static_cast<std::size_t>(i) * nxi + j] = pred(table(i, j)) ? 1 : 0;
    }
  }
  auto at = [&](int i, int j) { return hit[static_cast<std::size_t>((i + nx) % nx) * nxi + j]; };
  double cells = 0.0;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nxi; ++j) {
      const char c = at(i, j);
      if (c && leak && (j == 0 || j == nxi - 1)) *leak = true;
      const bool edge = at(i - 1, j) != c || at(i + 1, j) != c ||
                        (j > 0 && at(i, j - 1) != c) || (j + 1 < nxi && at(i, j + 1) != c);
      if (!edge) {
        cells += c;
        continue;
      }
      int sub_hits = 0;
      for (int a = 0; a < kLattice; ++a) {
        const double u = (a + 0.5) / kLattice;
        const double v = std::fmod((a * kStride + 0.5) / kLattice, 1.0);
        sub_hits += pred(sym.eval(xs[i] + (u - 0.5) * dx, xis[j] + (v - 0.5) * dxi)) ? 1 : 0;
      }
      cells += static_cast<double>(sub_hits) / kLattice;
    }
  }
  return cells * dx * dxi;
}

}  // namespace

cd SymbolModel::eval(double x, double xi) const {
  cd acc = 0.0;
  for (const auto& term : terms) {
    const cd a = term.x_factor ? term.x_factor(x) : cd(1.0);
    const cd b = term.xi_factor ? term.xi_factor(xi) : cd(1.0);
    acc += a * b;
  }
  return acc;
}

double SymbolModel::xi_asymmetry(int nx, int nxi, double xi_max) const {
  double worst = 0.0;
  for (double x : midpoints(0.0, period, nx)) {
    for (double xi : midpoints(0.0, xi_max, nxi)) {
      worst = std::max(worst, std::abs(eval(x, xi) - eval(x, -xi)));
    }
  }
  return worst;
}

SymbolModel schrodinger_cos(double coupling) {
  SymbolModel m;
  m.name = "schrodinger_cos";
  m.symmetric_in_xi = true;
  m.terms.push_back({{}, [](double xi) { return cd(xi * xi); }});
  m.terms.push_back({[coupling](double x) { return kI * coupling * std::cos(x); }, {}});
  const double vmax = std::abs(coupling);
  m.coercive_radius = [vmax](double level) { return std::sqrt(std::max(level + vmax, 0.0)); };
  m.params = {{"coupling", coupling}};
  return m;
}

SymbolModel schrodinger_trig(cd a, cd b) {
  SymbolModel m;
  m.name = "schrodinger_trig";
  m.symmetric_in_xi = true;
  m.terms.push_back({{}, [](double xi) { return cd(xi * xi); }});
  m.terms.push_back({[a, b](double x) { return a * std::cos(x) + b * std::sin(x); }, {}});
  const double vmax = std::abs(a) + std::abs(b);
  m.coercive_radius = [vmax](double level) { return std::sqrt(std::max(level + vmax, 0.0)); };
  m.params = {{"a", complex_json(a)}, {"b", complex_json(b)}};
  return m;
}

SymbolModel transport(cd mean, cd gc, cd gs) {
  SymbolModel m;
  m.name = "transport";
  m.symmetric_in_xi = false;
  m.terms.push_back({{}, [](double xi) { return cd(xi); }});
  m.terms.push_back(
      {[mean, gc, gs](double x) { return mean + gc * std::cos(x) + gs * std::sin(x); }, {}});
  const double gmax = std::abs(mean) + std::abs(gc) + std::abs(gs);
  m.coercive_radius = [gmax](double level) { return std::max(level + gmax, 0.0); };
  m.params = {{"mean", complex_json(mean)}, {"gc", complex_json(gc)}, {"gs", complex_json(gs)}};
  return m;
}

SymbolModel free_xi() {
  SymbolModel m;
  m.name = "free_xi";
  m.symmetric_in_xi = false;
  m.terms.push_back({{}, [](double xi) { return cd(xi); }});
  m.coercive_radius = [](double level) { return std::max(level, 0.0); };
  return m;
}

SymbolModel free_xi2() {
  SymbolModel m;
  m.name = "free_xi2";
  m.symmetric_in_xi = true;
  m.terms.push_back({{}, [](double xi) { return cd(xi * xi); }});
  m.coercive_radius = [](double level) { return std::sqrt(std::max(level, 0.0)); };
  return m;
}

std::vector<std::string> registered_symbols() {
  return {"schrodinger_cos", "schrodinger_trig", "transport", "free_xi", "free_xi2"};
}

SymbolModel make_symbol(const std::string& name, const nlohmann::json& params) {
  if (name == "schrodinger_cos") {
    return schrodinger_cos(params.value("coupling", 1.0));
  }
  if (name == "schrodinger_trig") {
    return schrodinger_trig(json_complex(params, "a", cd(0, 1)),
                            json_complex(params, "b", cd(0)));
  }
  if (name == "transport") {
    return transport(json_complex(params, "mean", cd(0)),
                     json_complex(params, "gc", cd(1)),
                     json_complex(params, "gs", cd(0)));
  }
  if (name == "free_xi") return free_xi();
  if (name == "free_xi2") return free_xi2();
  throw Refusal("unknown symbol model '" + name + "'");
}

PlanarDomain PlanarDomain::rectangle(double re_lo, double re_hi, double im_lo,
                                     double im_hi) {
  if (!(re_lo < re_hi) || !(im_lo < im_hi)) {
    throw Refusal("rectangle needs re_lo < re_hi and im_lo < im_hi");
  }
  PlanarDomain d;
  d.vertices_ = {cd(re_lo, im_lo), cd(re_hi, im_lo), cd(re_hi, im_hi), cd(re_lo, im_hi)};
  d.rectangle_ = true;
  d.re_lo_ = re_lo;
  d.re_hi_ = re_hi;
  d.im_lo_ = im_lo;
  d.im_hi_ = im_hi;
  return d;
}

PlanarDomain PlanarDomain::polygon(std::vector<cd> vertices) {
  if (vertices.size() < 3) throw Refusal("polygon needs at least 3 vertices");
  double area2 = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const cd a = vertices[i];
    const cd b = vertices[(i + 1) % vertices.size()];
    area2 += a.real() * b.imag() - b.real() * a.imag();
  }
  if (area2 < 0) std::reverse(vertices.begin(), vertices.end());
  PlanarDomain d;
  d.vertices_ = std::move(vertices);
  d.re_lo_ = d.im_lo_ = std::numeric_limits<double>::infinity();
  d.re_hi_ = d.im_hi_ = -std::numeric_limits<double>::infinity();
  for (cd v : d.vertices_) {
    d.re_lo_ = std::min(d.re_lo_, v.real());
    d.re_hi_ = std::max(d.re_hi_, v.real());
    d.im_lo_ = std::min(d.im_lo_, v.imag());
    d.im_hi_ = std::max(d.im_hi_, v.imag());
  }
  return d;
}

bool PlanarDomain::contains(cd z) const {
  if (rectangle_) {
    return z.real() >= re_lo_ && z.real() <= re_hi_ && z.imag() >= im_lo_ &&
           z.imag() <= im_hi_;
  }
  if (boundary_distance(z) <= 1e-14) return true;
  bool inside = false;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const cd a = vertices_[i];
    const cd b = vertices_[j];
    if ((a.imag() > z.imag()) != (b.imag() > z.imag())) {
      const double x_cross = a.real() + (z.imag() - a.imag()) * (b.real() - a.real()) /
                                            (b.imag() - a.imag());
      if (z.real() < x_cross) inside = !inside;
    }
  }
  return inside;
}

double PlanarDomain::boundary_distance(cd z) const {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, segment_distance(z, vertices_[i], vertices_[(i + 1) % n]));
  }
  return best;
}

double PlanarDomain::perimeter() const {
  double p = 0.0;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    p += std::abs(vertices_[(i + 1) % vertices_.size()] - vertices_[i]);
  }
  return p;
}

std::vector<cd> PlanarDomain::boundary_samples(int k) const {
  std::vector<cd> out;
  if (k <= 0) return out;
  const double total = perimeter();
  out.reserve(k);
  std::size_t edge = 0;
  double edge_start = 0.0;
  for (int s = 0; s < k; ++s) {
    const double target = total * s / k;
    while (true) {
      const cd a = vertices_[edge];
      const cd b = vertices_[(edge + 1) % vertices_.size()];
      const double len = std::abs(b - a);
      if (target <= edge_start + len || edge + 1 == vertices_.size()) {
        const double t = len > 0 ? std::clamp((target - edge_start) / len, 0.0, 1.0) : 0.0;
        out.push_back(a + t * (b - a));
        break;
      }
      edge_start += len;
      ++edge;
    }
  }
  return out;
}

PlanarDomain PlanarDomain::expanded(double margin) const {
  if (!rectangle_) throw Refusal("expanded() is defined for rectangles only");
  return rectangle(re_lo_ - margin, re_hi_ + margin, im_lo_ - margin, im_hi_ + margin);
}

double PlanarDomain::diameter() const {
  double d = 0.0;
  for (cd a : vertices_) {
    for (cd b : vertices_) d = std::max(d, std::abs(a - b));
  }
  return d;
}

double PlanarDomain::max_abs() const {
  double m = 0.0;
  for (cd v : vertices_) m = std::max(m, std::abs(v));
  return m;
}

nlohmann::json PlanarDomain::to_json() const {
  if (rectangle_) {
    return {{"shape", "rectangle"},
            {"re", {re_lo_, re_hi_}},
            {"im", {im_lo_, im_hi_}}};
  }
  nlohmann::json verts = nlohmann::json::array();
  for (cd v : vertices_) verts.push_back({v.real(), v.imag()});
  return {{"shape", "polygon"}, {"vertices", verts}};
}

double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

double TildeSymbol::chi(double xi) const {
  return 1.0 - smooth_step((std::abs(xi) - plateau) / ramp);
}

cd TildeSymbol::shift(double /*x*/, double xi) const {
  return kI * amplitude * chi(xi);
}

TildeSymbol build_tilde(const SymbolModel& sym, const PlanarDomain& omega,
                        const TildeOptions& opt) {
  TildeSymbol t;
  t.base = sym;
  t.omega = omega;
  const double level = omega.max_abs() + opt.level_margin;
  t.plateau = truncation_radius(sym, level);
  t.ramp = opt.ramp;
  t.amplitude = 2.0 * omega.diameter() + opt.amplitude_floor;

  // Certify min |p-tilde - z| on a sample grid of phase space and of Omega.
  const double xi_max = t.support_radius() + 1.0;
  const auto xs = midpoints(0.0, kTwoPi, opt.sample_nx);
  const auto xis = midpoints(-xi_max, xi_max, opt.sample_nxi);
  FactorTable table(sym, xs, xis);
  std::vector<cd> zs = omega.boundary_samples(8 * opt.sample_nz);
  for (int a = 0; a < opt.sample_nz; ++a) {
    for (int b = 0; b < opt.sample_nz; ++b) {
      const cd z(omega.re_lo() + (a + 0.5) * (omega.re_hi() - omega.re_lo()) / opt.sample_nz,
                 omega.im_lo() + (b + 0.5) * (omega.im_hi() - omega.im_lo()) / opt.sample_nz);
      if (omega.contains(z)) zs.push_back(z);
    }
  }
  std::vector<cd> shift(xis.size());
  for (std::size_t j = 0; j < xis.size(); ++j) shift[j] = t.shift(0.0, xis[j]);
  double floor = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < xis.size(); ++j) {
      const cd pt = table(i, j) + shift[j];
      for (cd z : zs) floor = std::min(floor, std::abs(pt - z));
    }
  }
  t.ellipticity_floor = floor;
  if (!(floor > 1e-8)) {
    throw Refusal("p-tilde is not elliptic on Omega: sampled min |p-tilde - z| = " +
                  std::to_string(floor));
  }
  return t;
}

VolumeEstimate weyl_volume(const SymbolModel& sym, const PlanarDomain& gamma,
                           const PhaseGrid& grid) {
  VolumeEstimate out;
  out.xi_radius = truncation_radius(sym, gamma.max_abs()) + 0.5;
  auto member = [&](cd p) { return gamma.contains(p); };
  bool leak = false;
  out.value = predicate_volume(sym, out.xi_radius, grid.nx, grid.nxi, member, &leak);
  if (leak) throw Refusal("volume leak: gamma reaches the xi-truncation");
  const double coarse = predicate_volume(sym, out.xi_radius, std::max(1, grid.nx / 2),
                                         std::max(1, grid.nxi / 2), member, nullptr);
  out.error_estimate = std::abs(out.value - coarse);
  return out;
}

VolumeEstimate boundary_band_volume(const SymbolModel& sym,
                                    const PlanarDomain& gamma, double r,
                                    const PhaseGrid& grid) {
  VolumeEstimate out;
  out.xi_radius = truncation_radius(sym, gamma.max_abs() + r) + 0.5;
  auto member = [&](cd p) { return gamma.boundary_distance(p) <= r; };
  bool leak = false;
  out.value = predicate_volume(sym, out.xi_radius, grid.nx, grid.nxi, member, &leak);
  if (leak) throw Refusal("volume leak: boundary band reaches the xi-truncation");
  const double coarse = predicate_volume(sym, out.xi_radius, std::max(1, grid.nx / 2),
                                         std::max(1, grid.nxi / 2), member, nullptr);
  out.error_estimate = std::abs(out.value - coarse);
  return out;
}

std::vector<double> vz_profile(const SymbolModel& sym, cd z,
                               const std::vector<double>& t_values,
                               const VzGrid& grid) {
  if (t_values.empty()) return {};
  for (std::size_t k = 0; k < t_values.size(); ++k) {
    if (!(t_values[k] > 0.0) || t_values[k] > 0.5 ||
        (k > 0 && !(t_values[k] > t_values[k - 1]))) {
      throw Refusal("vz_profile: t-values must be positive, increasing and <= 1/2");
    }
  }
  const double t_max = t_values.back();
  const double R = truncation_radius(sym, std::abs(z) + 1.0) + 0.1;
  const int nx = grid.nx;
  const int nxi = grid.nxi;
  const double dx = kTwoPi / nx;
  const double dxi = 2.0 * R / nxi;
  std::vector<double> xs(nx + 1), xis(nxi + 1);
  for (int i = 0; i <= nx; ++i) xs[i] = i * dx;
  for (int j = 0; j <= nxi; ++j) xis[j] = -R + j * dxi;
  FactorTable corners(sym, xs, xis);
  std::vector<double> s((nx + 1) * (nxi + 1));
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= nxi; ++j) s[i * (nxi + 1) + j] = std::norm(corners(i, j) - z);
  }
  std::vector<long long> hist(t_values.size(), 0);
  const int m = grid.sub;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nxi; ++j) {
      const double c[4] = {s[i * (nxi + 1) + j], s[(i + 1) * (nxi + 1) + j],
                           s[i * (nxi + 1) + j + 1], s[(i + 1) * (nxi + 1) + j + 1]};
      const double cmin = *std::min_element(c, c + 4);
      const double cmax = *std::max_element(c, c + 4);
      if (cmin > t_max + 2.0 * (cmax - cmin)) continue;
      for (int a = 0; a < m; ++a) {
        const double x = xs[i] + (a + 0.5) * dx / m;
        for (int b = 0; b < m; ++b) {
          const double xi = xis[j] + (b + 0.5) * dxi / m;
          const double val = std::norm(sym.eval(x, xi) - z);
          const auto it = std::lower_bound(t_values.begin(), t_values.end(), val);
          if (it != t_values.end()) ++hist[it - t_values.begin()];
        }
      }
    }
  }
  const double cell = dx * dxi / (static_cast<double>(m) * m);
  std::vector<double> out(t_values.size());
  long long acc = 0;
  for (std::size_t k = 0; k < t_values.size(); ++k) {
    acc += hist[k];
    out[k] = static_cast<double>(acc) * cell;
  }
  return out;
}

std::vector<double> log_ladder(double t_lo, double t_hi, int count) {
  std::vector<double> out(count);
  for (int k = 0; k < count; ++k) {
    const double f = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
    out[k] = std::exp(std::log(t_lo) + f * (std::log(t_hi) - std::log(t_lo)));
  }
  return out;
}

KappaFit fit_kappa(const std::vector<double>& t_values,
                   const std::vector<double>& v_values) {
  KappaFit fit;
  if (t_values.size() != v_values.size() || t_values.empty()) {
    fit.refused = true;
    fit.reason = "mismatched or empty profile";
    return fit;
  }
  std::vector<std::size_t> resolved;
  for (std::size_t k = 0; k < t_values.size(); ++k) {
    if (v_values[k] > 0.0) resolved.push_back(k);
  }
  if (resolved.empty()) {
    fit.refused = true;
    fit.reason = "all-zero profile (z far from the range of p)";
    return fit;
  }
  const double first = v_values[resolved.front()];
  bool constant = true;
  for (std::size_t k : resolved) constant = constant && v_values[k] == first;
  if (constant) {
    fit.refused = true;
    fit.reason = "degenerate profile (V constant over the resolved range)";
    return fit;
  }
  double lo = std::log10(t_values[resolved.front()]);
  double hi = std::log10(t_values[resolved.back()]);
  if (hi - lo > 2.0) {
    const double mid = 0.5 * (lo + hi);
    lo = mid - 1.0;
    hi = mid + 1.0;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t k : resolved) {
    const double lt = std::log10(t_values[k]);
    if (lt < lo - 1e-12 || lt > hi + 1e-12) continue;
    const double lv = std::log10(v_values[k]);
    sx += lt;
    sy += lv;
    sxx += lt * lt;
    sxy += lt * lv;
    ++n;
  }
  if (n < 3 || sxx * n - sx * sx <= 0.0) {
    fit.refused = true;
    fit.reason = "fewer than 3 resolved points in the fit window";
    return fit;
  }
  fit.kappa = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.t_lo = std::pow(10.0, lo);
  fit.t_hi = std::pow(10.0, hi);
  fit.points_used = n;
  return fit;
}

PhiEvaluator::PhiEvaluator(const TildeSymbol& tilde, const PhaseGrid& grid)
    : tilde_(tilde), grid_(grid), xi_max_(tilde.support_radius()) {
  xs_ = midpoints(0.0, kTwoPi, grid.nx);
  xis_ = midpoints(-xi_max_, xi_max_, grid.nxi);
  chi_.resize(xis_.size());
  for (std::size_t j = 0; j < xis_.size(); ++j) chi_[j] = tilde.chi(xis_[j]);
  FactorTable table(tilde.base, xs_, xis_);
  const int nx = grid.nx;
  const int nxi = grid.nxi;
  p_.resize(static_cast<std::size_t>(nx) * nxi);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nxi; ++j) p_[i * nxi + j] = table(i, j);
  }
  spread_.resize(p_.size());
  for (int i = 0; i < nx; ++i) {
    const int ip = (i + 1) % nx;
    const int im = (i + nx - 1) % nx;
    for (int j = 0; j < nxi; ++j) {
      const int jp = std::min(j + 1, nxi - 1);
      const int jm = std::max(j - 1, 0);
      const double vx = std::abs(p_[ip * nxi + j] - p_[im * nxi + j]) / 2.0;
      const double vxi = std::abs(p_[i * nxi + jp] - p_[i * nxi + jm]) / (jp - jm);
      spread_[i * nxi + j] = vx + vxi;
    }
  }
}

double PhiEvaluator::integrate(cd z, int* jittered) const {
  const int nx = grid_.nx;
  const int nxi = grid_.nxi;
  const double dx = kTwoPi / nx;
  const double dxi = 2.0 * xi_max_ / nxi;
  const double amp = tilde_.amplitude;
  constexpr int kSub = 4;
  double total = 0.0;
  for (int i = 0; i < nx; ++i) {
    double row = 0.0;
    for (int j = 0; j < nxi; ++j) {
      if (chi_[j] == 0.0) continue;
      const cd p = p_[i * nxi + j];
      const cd shift = kI * amp * chi_[j];
      const double dist = std::abs(p - z);
      if (dist < 2.0 * spread_[i * nxi + j]) {
        double acc = 0.0;
        for (int a = 0; a < kSub; ++a) {
          for (int b = 0; b < kSub; ++b) {
            double x = xs_[i] + ((a + 0.5) / kSub - 0.5) * dx;
            const double xi = xis_[j] + ((b + 0.5) / kSub - 0.5) * dxi;
            cd ps = tilde_.base.eval(x, xi);
            if (std::abs(ps - z) < 1e-300) {
              x += 1e-3 * dx / kSub;
              ps = tilde_.base.eval(x, xi);
              if (jittered) ++*jittered;
            }
            acc += std::log(std::abs(ps - z)) -
                   std::log(std::abs(ps + kI * amp * tilde_.chi(xi) - z));
          }
        }
        row += acc / (kSub * kSub);
      } else {
        row += std::log(dist) - std::log(std::abs(p + shift - z));
      }
    }
    total += row;
  }
  return total * dx * dxi / kTwoPi;
}

PhiValue PhiEvaluator::operator()(cd z) const {
  PhiValue out;
  out.value = integrate(z, &out.jittered);
  return out;
}

PhiValue PhiEvaluator::with_error(cd z) const {
  PhiValue out = (*this)(z);
  PhiEvaluator coarse(tilde_, {std::max(2, grid_.nx / 2), std::max(2, grid_.nxi / 2)});
  out.error_estimate = std::abs(out.value - coarse(z).value);
  return out;
}

PhiValue phi_density(const TildeSymbol& tilde, cd z, const PhaseGrid& grid) {
  if (!(tilde.ellipticity_floor > 0.0)) {
    throw Refusal("phi_density: p-tilde ellipticity floor is not positive");
  }
  return PhiEvaluator(tilde, grid).with_error(z);
}

namespace {

struct CellGeometry {
  double hx, hy;
  double x0, y0;
  cd center(int a, int b) const { return {x0 + (a + 0.5) * hx, y0 + (b + 0.5) * hy}; }
};

CellGeometry cell_geometry(const PlanarDomain& gamma, int m) {
  if (!gamma.is_rectangle()) throw Refusal("z-cell sums need a rectangular gamma");
  if (m < 1) throw Refusal("z-cell count must be positive");
  return {(gamma.re_hi() - gamma.re_lo()) / m, (gamma.im_hi() - gamma.im_lo()) / m,
          gamma.re_lo(), gamma.im_lo()};
}

}  // namespace

double laplacian_cell_sum(const std::function<double(cd)>& f,
                          const PlanarDomain& gamma, int m) {
  const CellGeometry g = cell_geometry(gamma, m);
  std::vector<double> v((m + 2) * (m + 2));
  auto at = [&](int a, int b) -> double& { return v[(a + 1) * (m + 2) + (b + 1)]; };
  for (int a = -1; a <= m; ++a) {
    for (int b = -1; b <= m; ++b) at(a, b) = f(g.center(a, b));
  }
  double sum = 0.0;
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      const double lap = (at(a + 1, b) - 2 * at(a, b) + at(a - 1, b)) / (g.hx * g.hx) +
                         (at(a, b + 1) - 2 * at(a, b) + at(a, b - 1)) / (g.hy * g.hy);
      sum += lap * g.hx * g.hy;
    }
  }
  return sum;
}

double laplacian_flux_sum(const std::function<double(cd)>& f,
                          const PlanarDomain& gamma, int m) {
  const CellGeometry g = cell_geometry(gamma, m);
  double sum = 0.0;
  for (int b = 0; b < m; ++b) {
    sum += (g.hy / g.hx) * ((f(g.center(m, b)) - f(g.center(m - 1, b))) +
                            (f(g.center(-1, b)) - f(g.center(0, b))));
  }
  for (int a = 0; a < m; ++a) {
    sum += (g.hx / g.hy) * ((f(g.center(a, m)) - f(g.center(a, m - 1))) +
                            (f(g.center(a, -1)) - f(g.center(a, 0))));
  }
  return sum;
}

PushforwardReport pushforward_check(const TildeSymbol& tilde,
                                    const PlanarDomain& gamma,
                                    const PhaseGrid& grid, int z_cells) {
  const CellGeometry g = cell_geometry(gamma, z_cells);
  // The stencil reaches one cell outside gamma; p-tilde must be certified there.
  for (int a = -1; a <= z_cells; ++a) {
    for (int b : {-1, z_cells}) {
      if (!tilde.omega.contains(g.center(a, b)) || !tilde.omega.contains(g.center(b, a))) {
        throw Refusal("pushforward stencil leaves the region where p-tilde is certified");
      }
    }
  }
  PhiEvaluator phi(tilde, grid);
  PushforwardReport rep;
  rep.grid = grid;
  rep.z_cells = z_cells;
  rep.lhs = laplacian_flux_sum([&](cd z) { return phi(z).value; }, gamma, z_cells) /
            kTwoPi;
  const VolumeEstimate vol = weyl_volume(tilde.base, gamma, grid);
  rep.rhs = vol.value / kTwoPi;
  rep.volume_error_estimate = vol.error_estimate / kTwoPi;
  const double diff = std::abs(rep.lhs - rep.rhs);
  rep.gap = rep.rhs > 0 ? diff / rep.rhs : diff;
  return rep;
}

}  // namespace weyllab
