#pragma once

#include "cdlc/types.hpp"

namespace cdlc {

/// Column means and unbiased sample covariance (divide by N-1) of a feature
/// matrix. Requires N >= 2.
GaussianStats gaussian_stats(const LatentMatrix& features);

/// Validates symmetry (1e-8) and positive semidefiniteness (eigenvalues
/// above -1e-6) of the covariance.
void validate_stats(const GaussianStats& s);

/// ||mu_a - mu_b||^2 + tr(Sigma_a + Sigma_b - 2 (Sigma_a Sigma_b)^{1/2}).
/// The matrix square root comes from the symmetric eigendecomposition of
/// Sigma_a^{1/2} Sigma_b Sigma_a^{1/2}; eigenvalues below -1e-6 raise
/// NotPSD, values in [-1e-6, 0] clamp to 0, and the result clamps to >= 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

} // namespace cdlc
