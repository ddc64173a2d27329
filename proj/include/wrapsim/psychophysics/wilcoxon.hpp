#pragma once

#include <cstddef>
#include <span>

namespace wrapsim::psychophysics {

struct WilcoxonResult {
  std::size_t n = 0;      ///< non-zero differences
  std::size_t zeros = 0;  ///< dropped zero differences
  double w_plus = 0.0;
  double w_minus = 0.0;
  double mean = 0.0;  ///< of W+ under the null
  double sd = 0.0;    ///< tie-corrected
  /// (W+ - mean) / sd, no continuity correction.
  double z = 0.0;
  /// Two-sided p: continuity-corrected normal approximation with an
  /// Edgeworth (kurtosis) term, which stays close to the exact
  /// distribution for small n.
  double p = 1.0;
  /// Two-sided p from the plain normal approximation, 2 * (1 - Phi(|z|)).
  double p_normal = 1.0;
};

inline constexpr std::size_t kWilcoxonMinPairs = 5;

/// Signed-rank test on paired samples (x_i - y_i). Zero differences are
/// dropped and tied magnitudes get average ranks. Throws Degenerate when
/// every difference is zero and InvalidInput for fewer than five non-zero
/// differences or unequal lengths.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences);

/// Exact two-sided p of the observed W+ under the sign-flip null, using the
/// same tie-averaged ranks. Counts by dynamic programming, so n up to a
/// few hundred is fine.
double wilcoxon_exact_p(std::span<const double> differences);

}  // namespace wrapsim::psychophysics
