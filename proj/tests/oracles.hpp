#pragma once

// Reference values computed independently of the library: adaptive Simpson
// quadrature and closed forms.

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace oracle {

inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                          double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  // Stop at round-off level too; halving tol forever would never terminate.
  const bool refined = depth < 26;  // at least four levels below the panel
  if (depth <= 0 ||
      (refined && (std::abs(delta) <= 15.0 * tol || std::abs(delta) <= 1e-15 * std::abs(left + right))))
    return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

/// Adaptive Simpson on [a, b] to relative tolerance `rel`, split into
/// `pieces` panels first so narrow features are not skipped.
inline double integrate(const std::function<double(double)>& f, double a, double b, double rel = 1e-13,
                        int pieces = 64) {
  const double h = (b - a) / pieces;
  std::vector<double> fl(pieces), fm(pieces), fh(pieces), whole(pieces);
  double scale = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + i * h;
    fl[i] = f(lo);
    fm[i] = f(lo + 0.5 * h);
    fh[i] = f(lo + h);
    whole[i] = h / 6.0 * (fl[i] + 4.0 * fm[i] + fh[i]);
    scale += std::abs(whole[i]);
  }
  const double tol = std::max(rel * scale, 1e-300) / pieces;
  double total = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + i * h;
    total += simpson_rec(f, lo, lo + h, fl[i], fm[i], fh[i], whole[i], tol, 30);
  }
  return total;
}

/// int_a^b exp(-i w t) x(t) dt.
inline std::complex<double> fourier(const std::function<double(double)>& x, double w, double a, double b) {
  const double re = integrate([&](double t) { return std::cos(w * t) * x(t); }, a, b);
  const double im = integrate([&](double t) { return -std::sin(w * t) * x(t); }, a, b);
  return {re, im};
}

/// Physicists' Hermite polynomial H_k(t); d^k/dt^k exp(-t^2) = (-1)^k H_k(t) exp(-t^2).
inline double hermite(int k, double t) {
  double h0 = 1.0, h1 = 2.0 * t;
  if (k == 0) return h0;
  for (int n = 1; n < k; ++n) {
    const double h2 = 2.0 * t * h1 - 2.0 * n * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

}  // namespace oracle
