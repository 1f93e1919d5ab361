// Real spherical harmonics on S^{n-1}, n = 2, 3, normalized so that the
// spherical mean of Y^2 is 1.
#pragma once

#include <array>

namespace affinefrac {

// Number of degree-ell harmonics: n=2: 1 (ell=0) or 2; n=3: 2*ell+1.
int harmonic_count(int n, int ell);

// idx enumerates the degree-ell basis:
//   n=2: idx 0 -> sqrt(2) cos(ell*phi), idx 1 -> sqrt(2) sin(ell*phi)
//   n=3: idx 0 -> zonal (m=0, along e_z); idx 2m-1 / 2m -> cos/sin m-phi pair.
double eval_harmonic(int n, int ell, int idx, const std::array<double, 3>& omega);

// Associated Legendre P_ell^m(x) (no Condon–Shortley phase).
double assoc_legendre(int ell, int m, double x);

// Number of harmonics of degree <= ell_max.
int harmonic_count_upto(int n, int ell_max);

// Evaluate all harmonics of degree 0..ell_max at once (recurrence-shared);
// layout: degree-major, idx-minor, same idx order as eval_harmonic.
void eval_harmonics_upto(int n, int ell_max, const std::array<double, 3>& omega,
                         double* out);

}  // namespace affinefrac
