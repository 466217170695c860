#pragma once

// Contour-integral square root of a positive matrix, evaluated by graded
// composite Gauss-Legendre quadrature on a rectangle in the right half-plane.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "freeharm/spectral.hpp"

namespace freeharm {

struct ContourOptions {
  // A panel is accepted once its length is at most panel_scale times its
  // distance to the singular set {0} ∪ [L^-2, L^2]. Halving it roughly
  // doubles the node density.
  double panel_scale = 0.5;
  int gauss_points = 16;
  std::size_t min_nodes = 512;
};

struct QuadratureNode {
  Complex z;
  Complex weight;  // includes dz, so  ∮ f(z) dz ≈ Σ weight * f(z)
};

/// Measured values behind the five contour clauses.
struct ContourClauses {
  double min_real_part = 0.0;          // (i)   > 0
  bool encloses_interval = false;      // (ii)
  double min_distance = 0.0;           // (iii) >= L^-2 / 2
  double max_modulus = 0.0;            // (iv)  <= 2 L^2
  double length = 0.0;                 // (v)   <= 10 L^2
  double L = 0.0;

  bool clause_i() const { return min_real_part > 0.0; }
  bool clause_ii() const { return encloses_interval; }
  bool clause_iii() const { return min_distance >= 0.5 / (L * L) * (1.0 - 1e-12); }
  bool clause_iv() const { return max_modulus <= 2.0 * L * L; }
  bool clause_v() const { return length <= 10.0 * L * L; }
  bool all() const { return clause_i() && clause_ii() && clause_iii() && clause_iv() && clause_v(); }
};

namespace detail {

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(static_cast<std::size_t>(n), 0.0);
  w.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double wt = 2.0 / ((1.0 - z * z) * dp * dp);
    x[static_cast<std::size_t>(i)] = -z;
    x[static_cast<std::size_t>(n - 1 - i)] = z;
    w[static_cast<std::size_t>(i)] = wt;
    w[static_cast<std::size_t>(n - 1 - i)] = wt;
  }
}

inline double point_segment_distance(Complex p, Complex a, Complex b) {
  const Complex ab = b - a;
  const double len2 = std::norm(ab);
  if (len2 == 0.0) return std::abs(p - a);
  double t = ((p - a) * std::conj(ab)).real() / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::abs(p - (a + t * ab));
}

inline double cross(Complex u, Complex v) { return u.real() * v.imag() - u.imag() * v.real(); }

inline bool segments_intersect(Complex a, Complex b, Complex c, Complex d) {
  const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

inline double segment_segment_distance(Complex a, Complex b, Complex c, Complex d) {
  if (segments_intersect(a, b, c, d)) return 0.0;
  return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d), point_segment_distance(c, a, b),
                   point_segment_distance(d, a, b)});
}

}  // namespace detail

/// A closed counterclockwise polygonal contour with quadrature nodes.
class Contour {
 public:
  /// The default rectangle for scale L >= 1: left edge Re z = L^-2/2,
  /// right edge Re z = 1.7 L^2, half-height L^2.
  static Contour rectangle(double L, const ContourOptions& opts = {}) {
    if (!(L >= 1.0)) throw ContourError("contour scale L must be >= 1");
    const double inv = 1.0 / (L * L);
    const double left = 0.5 * inv, right = 1.7 * L * L, half = L * L;
    Contour c;
    c.L_ = L;
    c.vertices_ = {Complex(left, -half), Complex(right, -half), Complex(right, half), Complex(left, half)};
    c.build_nodes(opts);
    return c;
  }

  double scale() const noexcept { return L_; }
  const std::vector<Complex>& vertices() const noexcept { return vertices_; }
  const std::vector<QuadratureNode>& nodes() const noexcept { return nodes_; }

  double length() const {
    double s = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) s += std::abs(vertices_[(i + 1) % vertices_.size()] - vertices_[i]);
    return s;
  }

  /// Distance from z to the interval [L^-2, L^2].
  double distance_to_interval(Complex z) const {
    return detail::point_segment_distance(z, Complex(1.0 / (L_ * L_), 0.0), Complex(L_ * L_, 0.0));
  }

  ContourClauses verify() const {
    ContourClauses cl;
    cl.L = L_;
    const Complex lo(1.0 / (L_ * L_), 0.0), hi(L_ * L_, 0.0);
    cl.min_real_part = std::numeric_limits<double>::infinity();
    cl.min_distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      const Complex a = vertices_[i], b = vertices_[(i + 1) % vertices_.size()];
      cl.min_real_part = std::min({cl.min_real_part, a.real(), b.real()});
      cl.min_distance = std::min(cl.min_distance, detail::segment_segment_distance(a, b, lo, hi));
      cl.max_modulus = std::max(cl.max_modulus, std::abs(a));
    }
    for (const auto& n : nodes_) {
      cl.min_real_part = std::min(cl.min_real_part, n.z.real());
      cl.min_distance = std::min(cl.min_distance, distance_to_interval(n.z));
      cl.max_modulus = std::max(cl.max_modulus, std::abs(n.z));
    }
    cl.length = length();
    cl.encloses_interval = winding_number(lo) == 1 && winding_number(hi) == 1 &&
                           winding_number(0.5 * (lo + hi)) == 1;
    return cl;
  }

  /// Winding number of the polygon around p (0 or ±1 for a simple polygon).
  int winding_number(Complex p) const {
    int wn = 0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      const Complex a = vertices_[i], b = vertices_[(i + 1) % vertices_.size()];
      if (a.imag() <= p.imag()) {
        if (b.imag() > p.imag() && detail::cross(b - a, p - a) > 0) ++wn;
      } else if (b.imag() <= p.imag() && detail::cross(b - a, p - a) < 0) {
        --wn;
      }
    }
    return wn;
  }

 private:
  double singular_distance(Complex a, Complex b) const {
    const Complex lo(1.0 / (L_ * L_), 0.0), hi(L_ * L_, 0.0);
    return std::min(detail::segment_segment_distance(a, b, lo, hi), detail::point_segment_distance(0.0, a, b));
  }

  void subdivide(Complex a, Complex b, double max_len, double tau, int depth, std::vector<std::pair<Complex, Complex>>& out) const {
    const double len = std::abs(b - a);
    if (depth > 60 || (len <= max_len && len <= tau * singular_distance(a, b))) {
      out.emplace_back(a, b);
      return;
    }
    const Complex m = 0.5 * (a + b);
    subdivide(a, m, max_len, tau, depth + 1, out);
    subdivide(m, b, max_len, tau, depth + 1, out);
  }

  void build_nodes(const ContourOptions& opts) {
    if (opts.gauss_points < 1 || !(opts.panel_scale > 0)) throw ContourError("invalid quadrature options");
    std::vector<double> gx, gw;
    detail::gauss_legendre(opts.gauss_points, gx, gw);
    const std::size_t min_panels = (opts.min_nodes + static_cast<std::size_t>(opts.gauss_points) - 1) /
                                   static_cast<std::size_t>(opts.gauss_points);
    const double max_len = length() / static_cast<double>(std::max<std::size_t>(min_panels, 1));
    std::vector<std::pair<Complex, Complex>> panels;
    for (std::size_t i = 0; i < vertices_.size(); ++i)
      subdivide(vertices_[i], vertices_[(i + 1) % vertices_.size()], max_len, opts.panel_scale, 0, panels);
    nodes_.clear();
    nodes_.reserve(panels.size() * gx.size());
    for (const auto& [a, b] : panels) {
      const Complex half = 0.5 * (b - a), mid = 0.5 * (a + b);
      for (std::size_t k = 0; k < gx.size(); ++k) nodes_.push_back({mid + gx[k] * half, gw[k] * half});
    }
  }

  double L_ = 1.0;
  std::vector<Complex> vertices_;
  std::vector<QuadratureNode> nodes_;
};

/// (1 / 2πi) ∮ z^{1/2} (zI - M)^{-1} dz with the principal branch.
inline HermitianMatrix contour_sqrt(const HermitianMatrix& m, const Contour& c) {
  const double L2 = c.scale() * c.scale();
  const SpectralInterval s = spec_interval(m);
  const double slack = 1e-12 * L2;
  if (s.lo < 1.0 / L2 - slack || s.hi > L2 + slack) {
    std::ostringstream os;
    os << "spectrum [" << s.lo << ", " << s.hi << "] escapes [" << 1.0 / L2 << ", " << L2 << "]";
    throw ContourError(os.str());
  }
  const Eigen::Index n = m.dim();
  const CMatrix id = CMatrix::Identity(n, n);
  CMatrix acc = CMatrix::Zero(n, n);
  for (const auto& node : c.nodes()) {
    Eigen::PartialPivLU<CMatrix> lu(node.z * id - m.matrix());
    acc += (node.weight * std::sqrt(node.z)) * lu.inverse();
  }
  acc /= Complex(0.0, 2.0 * std::numbers::pi);
  return HermitianMatrix::hermitian_part(acc);
}

}  // namespace freeharm
