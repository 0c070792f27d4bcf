#pragma once

// First-order mechanics on T*M and TT*M in standard coordinates.

#include <vector>

#include "gradmech/expr.hpp"
#include "gradmech/numerics.hpp"
#include "gradmech/system.hpp"

namespace gradmech {

struct PhasePoint {
  std::vector<double> x;
  std::vector<double> p;
};

/// A point (x, p, xdot, pdot) of TT*M.
struct DoublePoint {
  std::vector<double> x;
  std::vector<double> p;
  std::vector<double> xdot;
  std::vector<double> pdot;
};

/// A point (x, xdot, pdot, p) of T*TM.
struct AlphaImage {
  std::vector<double> x;
  std::vector<double> xdot;
  std::vector<double> pdot;
  std::vector<double> p;
};

AlphaImage alpha(const DoublePoint& d);
DoublePoint alpha_inverse(const AlphaImage& a);

/// Matrix of alpha acting on the stacked vector (x, p, xdot, pdot).
Matrix alpha_matrix(int m);

/// Coordinate names of the first-order chart: "x", "xdot", "xddot", "p",
/// "pdot", with component suffixes 1..m when m > 1.
struct FirstOrderNames {
  std::vector<std::string> x, xdot, xddot, p, pdot;
};
FirstOrderNames first_order_names(int m);

/// Chart with x -> xdot -> xddot and p -> pdot chains.
Chart first_order_chart(int m);

/// Residuals p - dL/dxdot (Legendre), pdot - dL/dx (force) and the
/// Euler-Lagrange rows dL/dx - d/dt dL/dxdot; momenta hold the Legendre
/// map. An explicit form over (x, xdot, p) is attached when L is regular.
ELSystem lagrangian_dynamics(const Expr& L, int m);

/// Residuals xdot - dH/dp and pdot + dH/dx, with the explicit Hamiltonian
/// vector field over (x, p) and H as the conserved quantity.
ELSystem hamiltonian_dynamics(const Expr& H, int m);

/// Hamiltonian vector field of the Legendre transform of L on (x, p),
/// evaluated pointwise: xdot = v with dL/dxdot(x, v) = p found by Newton,
/// pdot = dL/dx(x, v).
class LegendreHamiltonianField {
 public:
  LegendreHamiltonianField(const Expr& L, int m);

  void operator()(std::span<const double> xp, std::span<double> rate) const;
  /// Velocity with dL/dxdot(x, v) = p, starting from `guess`.
  std::vector<double> velocity(std::span<const double> x, std::span<const double> p,
                               std::vector<double> guess) const;
  /// H(x, p) = p v - L(x, v).
  double hamiltonian(std::span<const double> xp) const;

 private:
  int m_;
  Program momentum_;  // dL/dxdot and its Jacobian over (x, xdot)
  Program force_;     // dL/dx over (x, xdot)
  Program value_;     // L over (x, xdot)
};

}  // namespace gradmech
