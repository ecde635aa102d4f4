#include "sphmix/distance.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sphmix/rng.hpp"

namespace sphmix {
namespace {

// Caps individual Monte-Carlo terms so the variance accumulator stays
// finite even when a sampled point lies far into g's bulk but in f's tail.
// The cap only binds when the estimate is far above the reporting clamp.
constexpr double kTermCap = 1e150;

double mc_term(const Mixture& f, const Mixture& g, const double* x) {
  const double lf = f.log_pdf(x);
  const double lg = g.log_pdf(x);
  const double ratio = std::exp(lg - lf);
  if (std::isnan(ratio)) return 0.0;  // both densities underflowed to zero
  const double term = std::abs(1.0 - ratio);
  return std::min(term, kTermCap);
}

struct QuadBudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Adaptive Simpson on [a, b] with Richardson correction. `depth_floor`
// forces a few splits before accepting so symmetric cancellation in the
// first estimate cannot end refinement early. Underflowed endpoints are
// exact zeros and cost nothing extra.
template <typename F>
double adapt_simpson(const F& eval, long& evals, long max_evals, double a,
                     double fa, double m, double fm, double b, double fb,
                     double whole, double tol, int depth_floor, int depth) {
  if (depth > 64) {
    throw QuadBudgetError("quadrature: recursion limit before tolerance");
  }
  if (evals + 2 > max_evals) {
    throw QuadBudgetError("quadrature: evaluation budget exhausted");
  }
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = eval(lm);
  const double frm = eval(rm);
  evals += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth >= depth_floor && std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  const double half_tol = 0.5 * tol;
  return adapt_simpson(eval, evals, max_evals, a, fa, lm, flm, m, fm, left,
                       half_tol, depth_floor, depth + 1) +
         adapt_simpson(eval, evals, max_evals, m, fm, rm, frm, b, fb, right,
                       half_tol, depth_floor, depth + 1);
}

template <typename F>
double integrate_panel(const F& eval, long& evals, long max_evals, double a,
                       double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = eval(a);
  const double fm = eval(m);
  const double fb = eval(b);
  evals += 3;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adapt_simpson(eval, evals, max_evals, a, fa, m, fm, b, fb, whole, tol,
                       /*depth_floor=*/4, /*depth=*/0);
}

// Union of the 12-sigma component windows of the given mixtures, merged
// into disjoint intervals. Density mass outside is below exp(-72) per
// component, far under any tolerance used here.
std::vector<std::pair<double, double>> merged_windows(
    const std::vector<const Mixture*>& ms) {
  std::vector<std::pair<double, double>> win;
  for (const Mixture* m : ms) {
    for (std::size_t c = 0; c < m->k(); ++c) {
      const double mu = m->mean(c)[0];
      const double s = std::sqrt(m->variance(c));
      win.emplace_back(mu - 12.0 * s, mu + 12.0 * s);
    }
  }
  std::sort(win.begin(), win.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& w : win) {
    if (!merged.empty() && w.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, w.second);
    } else {
      merged.push_back(w);
    }
  }
  return merged;
}

double smallest_sigma(const std::vector<const Mixture*>& ms) {
  double s = std::numeric_limits<double>::infinity();
  for (const Mixture* m : ms) {
    for (std::size_t c = 0; c < m->k(); ++c) {
      s = std::min(s, std::sqrt(m->variance(c)));
    }
  }
  return s;
}

template <typename F>
double integrate_windows(const F& eval, const std::vector<const Mixture*>& ms,
                         double abs_tol) {
  if (abs_tol <= 0.0) throw std::invalid_argument("quadrature: abs_tol <= 0");
  const auto windows = merged_windows(ms);
  double total_len = 0.0;
  for (const auto& w : windows) total_len += w.second - w.first;
  if (total_len <= 0.0) return 0.0;

  // Pre-split each window on a grid no coarser than half the narrowest
  // component so every peak is resolved before the error estimate is
  // trusted; the budget covers the worst case with a wide margin.
  const double min_sigma = smallest_sigma(ms);
  long evals = 0;
  const long max_evals = 8L * 1000 * 1000;
  double total = 0.0;
  for (const auto& w : windows) {
    const double len = w.second - w.first;
    const double window_tol = abs_tol * (len / total_len);
    const auto panels = static_cast<std::size_t>(std::min(
        512.0, std::max(1.0, std::ceil(len / (0.5 * min_sigma)))));
    const double panel_tol = window_tol / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
      const double a =
          w.first + len * static_cast<double>(p) / static_cast<double>(panels);
      const double b = w.first + len * static_cast<double>(p + 1) /
                                     static_cast<double>(panels);
      total += integrate_panel(eval, evals, max_evals, a, b, panel_tol);
    }
  }
  return total;
}

}  // namespace

L1Estimate l1_mc(const Mixture& f, const Mixture& g, std::size_t n_mc,
                 std::uint64_t seed) {
  if (n_mc == 0) throw std::invalid_argument("l1_mc: n_mc must be positive");
  if (f.dim() != g.dim()) {
    throw std::invalid_argument("l1_mc: dimension mismatch");
  }
  const Dataset data = f.sample(n_mc, derive_stream(seed, "l1-mc"));
  std::vector<double> terms(n_mc);
  double sum = 0.0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    terms[i] = mc_term(f, g, data.row(i));
    sum += terms[i];
  }
  const double mean = sum / static_cast<double>(n_mc);
  L1Estimate out;
  out.n_mc = n_mc;
  out.value = std::min(mean, 2.0);
  if (n_mc >= 2) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
      const double dlt = terms[i] - mean;
      ss += dlt * dlt;
    }
    // Jackknife variance of the sample mean collapses to s^2 / n.
    out.std_error =
        std::sqrt(ss / (static_cast<double>(n_mc - 1) * static_cast<double>(n_mc)));
  }
  return out;
}

double l1_quadrature_1d(const Mixture& f, const Mixture& g, double abs_tol) {
  if (f.dim() != 1 || g.dim() != 1) {
    throw std::invalid_argument("l1_quadrature_1d: mixtures must be 1-D");
  }
  const auto eval = [&f, &g](double x) {
    return std::abs(std::exp(f.log_pdf(&x)) - std::exp(g.log_pdf(&x)));
  };
  return integrate_windows(eval, {&f, &g}, abs_tol);
}

double pdf_mass_1d(const Mixture& f, double abs_tol) {
  if (f.dim() != 1) {
    throw std::invalid_argument("pdf_mass_1d: mixture must be 1-D");
  }
  const auto eval = [&f](double x) { return std::exp(f.log_pdf(&x)); };
  return integrate_windows(eval, {&f}, abs_tol);
}

double bhattacharyya_1d(double mu1, double var1, double mu2, double var2) {
  if (var1 <= 0.0 || var2 <= 0.0) {
    throw std::invalid_argument("bhattacharyya_1d: variances must be positive");
  }
  const double vs = var1 + var2;
  const double x = (mu1 - mu2) * (mu1 - mu2) / (4.0 * vs);
  const double y = std::sqrt(2.0 * std::sqrt(var1) * std::sqrt(var2) / vs);
  return y * std::exp(-x);
}

double l1_upper_bound_product(const std::vector<double>& mu1,
                              const std::vector<double>& var1,
                              const std::vector<double>& mu2,
                              const std::vector<double>& var2) {
  const std::size_t d = mu1.size();
  if (mu2.size() != d || var1.size() != d || var2.size() != d) {
    throw std::invalid_argument("l1_upper_bound_product: length mismatch");
  }
  if (d == 0) {
    throw std::invalid_argument("l1_upper_bound_product: empty coordinates");
  }
  double gap = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    gap += 1.0 - bhattacharyya_1d(mu1[i], var1[i], mu2[i], var2[i]);
  }
  return std::min(2.0, std::sqrt(8.0 * gap));
}

}  // namespace sphmix
