#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "weyllab/linalg.hpp"

namespace weyllab {

/// One separable term a(x) * b(xi) of a symbol. An empty factor means 1.
struct SymbolTerm {
  std::function<cd(double)> x_factor;
  std::function<cd(double)> xi_factor;
};

/// A semiclassical symbol p(x, xi) on the torus R / (2 pi Z), written as a
/// finite sum of separable terms so that it can be quantized exactly.
struct SymbolModel {
  std::string name;
  int dim = 1;
  double period = 2.0 * 3.14159265358979323846;
  bool symmetric_in_xi = false;
  std::vector<SymbolTerm> terms;
  /// Returns R such that |p(x, xi)| > level whenever |xi| > R. Empty when the
  /// symbol is not coercive in xi.
  std::function<double(double)> coercive_radius;
  nlohmann::json params = nlohmann::json::object();

  cd eval(double x, double xi) const;
  bool is_coercive() const { return static_cast<bool>(coercive_radius); }
  /// Largest |p(x, xi) - p(x, -xi)| over a sample grid with |xi| <= xi_max.
  double xi_asymmetry(int nx, int nxi, double xi_max) const;
};

/// p = xi^2 + i c cos x.
SymbolModel schrodinger_cos(double coupling = 1.0);
/// p = xi^2 + V(x) with V(x) = a cos x + b sin x (a, b complex).
SymbolModel schrodinger_trig(cd a, cd b);
/// p = xi + g(x) with g(x) = mean + gc cos x + gs sin x. Not even in xi.
SymbolModel transport(cd mean, cd gc, cd gs);
/// p = xi.
SymbolModel free_xi();
/// p = xi^2.
SymbolModel free_xi2();

/// Builds a registered model from its name and a parameter object.
SymbolModel make_symbol(const std::string& name, const nlohmann::json& params);
std::vector<std::string> registered_symbols();

/// A polygon in the complex plane (vertices counter-clockwise).
class PlanarDomain {
 public:
  PlanarDomain() = default;
  static PlanarDomain rectangle(double re_lo, double re_hi, double im_lo,
                                double im_hi);
  static PlanarDomain polygon(std::vector<cd> vertices);

  bool contains(cd z) const;
  double boundary_distance(cd z) const;
  /// k points equally spaced in arc length along the boundary.
  std::vector<cd> boundary_samples(int k) const;
  /// Membership in the band {z : dist(z, boundary) <= r}.
  bool in_dilated_boundary(cd z, double r) const {
    return boundary_distance(z) <= r;
  }
  PlanarDomain expanded(double margin) const;  // rectangles only

  const std::vector<cd>& vertices() const { return vertices_; }
  bool is_rectangle() const { return rectangle_; }
  double re_lo() const { return re_lo_; }
  double re_hi() const { return re_hi_; }
  double im_lo() const { return im_lo_; }
  double im_hi() const { return im_hi_; }
  double perimeter() const;
  double diameter() const;
  double max_abs() const;
  nlohmann::json to_json() const;

 private:
  std::vector<cd> vertices_;
  bool rectangle_ = false;
  double re_lo_ = 0, re_hi_ = 0, im_lo_ = 0, im_hi_ = 0;
};

/// p-tilde = p + i A chi(xi), with chi a smooth step equal to 1 for
/// |xi| <= plateau and 0 for |xi| >= plateau + ramp.
struct TildeSymbol {
  SymbolModel base;
  PlanarDomain omega;
  double amplitude = 0.0;
  double plateau = 0.0;
  double ramp = 1.0;
  double ellipticity_floor = 0.0;

  double chi(double xi) const;
  cd shift(double x, double xi) const;
  cd eval(double x, double xi) const { return base.eval(x, xi) + shift(x, xi); }
  double support_radius() const { return plateau + ramp; }
};

struct TildeOptions {
  double level_margin = 1.0;
  double amplitude_floor = 1.0;
  double ramp = 1.0;
  int sample_nx = 96;
  int sample_nxi = 384;
  int sample_nz = 9;
};

/// Builds p-tilde for a region Omega and certifies min |p-tilde - z| > 0 on a
/// sample grid (z over Omega's boundary and interior). Refuses otherwise.
TildeSymbol build_tilde(const SymbolModel& sym, const PlanarDomain& omega,
                        const TildeOptions& opt = {});

/// C-infinity step: 0 for t <= 0, 1 for t >= 1.
double smooth_step(double t);

struct PhaseGrid {
  int nx = 512;
  int nxi = 512;
};

struct VolumeEstimate {
  double value = 0.0;
  double error_estimate = 0.0;
  double xi_radius = 0.0;
};

/// vol{(x, xi) : p(x, xi) in gamma} by the tensor midpoint rule.
VolumeEstimate weyl_volume(const SymbolModel& sym, const PlanarDomain& gamma,
                           const PhaseGrid& grid = {});

/// vol{(x, xi) : dist(p(x, xi), boundary of gamma) <= r}.
VolumeEstimate boundary_band_volume(const SymbolModel& sym,
                                    const PlanarDomain& gamma, double r,
                                    const PhaseGrid& grid = {});

struct VzGrid {
  int nx = 256;
  int nxi = 256;
  int sub = 32;
};

/// V_z(t) = vol{|p - z|^2 <= t} for each t (t in (0, 1/2], increasing).
std::vector<double> vz_profile(const SymbolModel& sym, cd z,
                               const std::vector<double>& t_values,
                               const VzGrid& grid = {});

struct KappaFit {
  bool refused = false;
  std::string reason;
  double kappa = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  int points_used = 0;
};

/// Least-squares slope of log V against log t over the middle two decades of
/// the resolved t-range.
KappaFit fit_kappa(const std::vector<double>& t_values,
                   const std::vector<double>& v_values);

/// Geometric ladder of t-values in [t_lo, t_hi].
std::vector<double> log_ladder(double t_lo, double t_hi, int count);

struct PhiValue {
  double value = 0.0;
  double error_estimate = 0.0;
  int jittered = 0;
};

/// Evaluates phi(z) = (2 pi)^-1 * integral of ln|p - z| - ln|p-tilde - z| over
/// the support of the shift. Grid data of p are cached, so repeated calls for
/// many z are cheap.
class PhiEvaluator {
 public:
  PhiEvaluator(const TildeSymbol& tilde, const PhaseGrid& grid);

  /// Midpoint quadrature with one 4x4 refinement pass in cells where |p - z|
  /// is comparable to the local variation of p.
  PhiValue operator()(cd z) const;
  /// Same value plus an error estimate from the half-resolution grid.
  PhiValue with_error(cd z) const;

  const TildeSymbol& tilde() const { return tilde_; }
  const PhaseGrid& grid() const { return grid_; }

 private:
  double integrate(cd z, int* jittered) const;

  TildeSymbol tilde_;
  PhaseGrid grid_;
  double xi_max_;
  std::vector<double> xs_, xis_, chi_;
  std::vector<cd> p_;       // nx * nxi, row-major in x
  std::vector<double> spread_;  // local variation of p per cell
};

PhiValue phi_density(const TildeSymbol& tilde, cd z, const PhaseGrid& grid = {});

struct PushforwardReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;  // |lhs - rhs| / rhs, or |lhs - rhs| when rhs == 0
  int z_cells = 0;
  PhaseGrid grid;
  double volume_error_estimate = 0.0;
};

/// Compares (2 pi)^-1 * sum over z-cells of the 5-point Laplacian of phi with
/// (2 pi)^-1 vol(p^-1(gamma)). The cell sum telescopes to boundary fluxes, so
/// phi is only evaluated on the rings of cell centers just inside and just
/// outside gamma.
PushforwardReport pushforward_check(const TildeSymbol& tilde,
                                    const PlanarDomain& gamma,
                                    const PhaseGrid& grid, int z_cells);

/// Full 5-point Laplacian cell sum over gamma (every cell), used to cross-check
/// the telescoped flux form.
double laplacian_cell_sum(const std::function<double(cd)>& f,
                          const PlanarDomain& gamma, int z_cells);
double laplacian_flux_sum(const std::function<double(cd)>& f,
                          const PlanarDomain& gamma, int z_cells);

}  // namespace weyllab
