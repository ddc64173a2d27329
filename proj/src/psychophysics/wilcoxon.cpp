#include "wrapsim/psychophysics/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "wrapsim/error.hpp"

namespace wrapsim::psychophysics {

namespace {

struct Ranked {
  std::vector<long> doubled_ranks;  // 2 * average rank, always an integer
  std::vector<bool> positive;
  std::size_t zeros = 0;
};

Ranked rank(std::span<const double> d) {
  Ranked out;
  std::vector<double> mags;
  std::vector<bool> signs;
  for (double v : d) {
    if (!std::isfinite(v)) throw InvalidInput("differences must be finite");
    if (v == 0.0) {
      ++out.zeros;
      continue;
    }
    mags.push_back(std::abs(v));
    signs.push_back(v > 0.0);
  }
  std::vector<std::size_t> order(mags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mags[a] < mags[b]; });
  out.doubled_ranks.assign(mags.size(), 0);
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && mags[order[j + 1]] == mags[order[i]]) ++j;
    // Ranks i+1 .. j+1 share their average; doubled: (i + 1) + (j + 1).
    const long doubled = static_cast<long>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) out.doubled_ranks[order[k]] = doubled;
    i = j + 1;
  }
  out.positive = std::move(signs);
  return out;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("paired samples differ in length");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  return wilcoxon_signed_rank(d);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences) {
  const Ranked r = rank(differences);
  if (r.doubled_ranks.empty()) throw Degenerate("all paired differences are zero");
  if (r.doubled_ranks.size() < kWilcoxonMinPairs) {
    throw InvalidInput("need at least 5 non-zero differences");
  }
  WilcoxonResult out;
  out.n = r.doubled_ranks.size();
  out.zeros = r.zeros;
  double sum_r = 0.0, sum_r2 = 0.0, sum_r4 = 0.0;
  for (std::size_t i = 0; i < out.n; ++i) {
    const double rk = 0.5 * static_cast<double>(r.doubled_ranks[i]);
    (r.positive[i] ? out.w_plus : out.w_minus) += rk;
    sum_r += rk;
    sum_r2 += rk * rk;
    sum_r4 += rk * rk * rk * rk;
  }
  out.mean = sum_r / 2.0;
  out.sd = std::sqrt(sum_r2 / 4.0);
  out.z = (out.w_plus - out.mean) / out.sd;
  out.p_normal = std::min(1.0, 2.0 * normal_sf(std::abs(out.z)));

  // W+ is a sum of independent +-r/2 terms; its excess kurtosis is
  // -2 sum r^4 / (sum r^2)^2.
  const double g2 = -2.0 * sum_r4 / (sum_r2 * sum_r2);
  const double zc = std::max(std::abs(out.w_plus - out.mean) - 0.5, 0.0) / out.sd;
  const double tail = normal_sf(zc) + normal_pdf(zc) * g2 / 24.0 * (zc * zc * zc - 3.0 * zc);
  out.p = std::clamp(2.0 * tail, 0.0, 1.0);
  return out;
}

double wilcoxon_exact_p(std::span<const double> differences) {
  const Ranked r = rank(differences);
  if (r.doubled_ranks.empty()) throw Degenerate("all paired differences are zero");
  long total = 0;
  long observed = 0;
  for (std::size_t i = 0; i < r.doubled_ranks.size(); ++i) {
    total += r.doubled_ranks[i];
    if (r.positive[i]) observed += r.doubled_ranks[i];
  }
  // counts[s]: sign assignments whose positive doubled ranks sum to s,
  // as probabilities to avoid overflow.
  std::vector<double> prob(static_cast<std::size_t>(total) + 1, 0.0);
  prob[0] = 1.0;
  long reach = 0;
  for (long rk : r.doubled_ranks) {
    reach += rk;
    for (long s = reach; s >= 0; --s) {
      const double keep = prob[static_cast<std::size_t>(s)];
      const double add = s >= rk ? prob[static_cast<std::size_t>(s - rk)] : 0.0;
      prob[static_cast<std::size_t>(s)] = 0.5 * (keep + add);
    }
  }
  const long extreme = std::abs(2 * observed - total);
  double p = 0.0;
  for (long s = 0; s <= total; ++s) {
    if (std::abs(2 * s - total) >= extreme) p += prob[static_cast<std::size_t>(s)];
  }
  return std::min(1.0, p);
}

}  // namespace wrapsim::psychophysics
