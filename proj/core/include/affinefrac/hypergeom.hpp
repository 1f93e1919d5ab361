// Gauss hypergeometric evaluation on the ranges this project needs, and
// the bubble-tail envelope profiles whose Fourier transforms are
// Bessel-K kernels in closed form.
#pragma once

#include "affinefrac/params.hpp"

namespace affinefrac {

// 2F1(a, b; c; x) for x in (-inf, 1).  Series for moderate arguments,
// Pfaff transformation for x < 0, and the (1-x) connection formula near
// x = 1 (valid here because c-a-b is never an integer for s in (0,1)).
double hyp2f1(double a, double b, double c, double x);

// Tail envelope profiles tau_{ell,j}(r), j in {0,1}:
//   tau_{ell,j}(r) = G_{ell,j} r^ell 2F1((ell+n)/2, (ell+n-2s)/2 + j; ell+n/2; -r^2)
// normalized so that the field tau_{ell,j}(r) Y_{ell,m}(omega) has the
// exact Fourier transform
//   (2*pi)^{n/2} (-i)^ell  rho^{-s}  K_s(rho)      Y_{ell,m}(theta)   (j = 0)
//   (2*pi)^{n/2} (-i)^ell  rho^{1-s} K_{1-s}(rho)  Y_{ell,m}(theta)   (j = 1).
// For ell = 0 these reduce to multiples of (1+r^2)^{-(n-2s)/2} and
// (1+r^2)^{-(n-2s)/2-1}.  tau_{ell,0} decays like r^{-(n-2s)}.
double tail_envelope(const Params& p, int ell, int j, double r);

// Leading tail coefficient:  tau_{ell,0}(r) ~ tail_envelope_infinity * r^{-(n-2s)}.
double tail_envelope_infinity(const Params& p, int ell);

}  // namespace affinefrac
