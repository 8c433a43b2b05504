#include "cpe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace cpe {

void validate(const JudgmentRecord& r) {
  if (r.model_id.empty() || r.baseline_id.empty())
    throw ConfigError("judgment.model_id", "ids must be non-empty");
  if (r.model_id == r.baseline_id)
    throw ConfigError("judgment.baseline_id", "model and baseline must differ");
  if (r.len_model <= 0 || r.len_baseline <= 0)
    throw ConfigError("judgment.len", "lengths must be positive");
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double length_feature(double len_model, double len_baseline, double length_std) {
  if (!(length_std > 0.0))
    throw ConfigError("length_std", "must be positive");
  return std::tanh((len_model - len_baseline) / length_std);
}

const PairFit& GlmFit::pair(const std::string& model, const std::string& baseline) const {
  auto it = pairs.find({model, baseline});
  if (it == pairs.end())
    throw KeyError("no fit for pair (" + model + ", " + baseline + ")");
  return it->second;
}

double GlmFit::theta(const std::string& model, const std::string& baseline) const {
  return pair(model, baseline).theta;
}

double GlmFit::phi(const std::string& model, const std::string& baseline) const {
  return pair(model, baseline).phi;
}

namespace {

struct PairData {
  std::vector<double> features;
  std::vector<double> wins;
  double length_std = 0.0;
};

// Regularized log-likelihood for one pair. Objective, gradient and Hessian
// are kept on the per-record (mean) scale so the convergence tolerance does
// not depend on the number of records.
double objective(const PairData& d, double theta, double phi, double lambda) {
  double ll = 0.0;
  for (std::size_t i = 0; i < d.wins.size(); ++i) {
    const double eta = theta + phi * d.features[i];
    // log sigma(eta) if win else log(1 - sigma(eta)), in a stable form
    const double log1p_exp = eta > 0 ? eta + std::log1p(std::exp(-eta))
                                     : std::log1p(std::exp(eta));
    ll += d.wins[i] * eta - log1p_exp;
  }
  return (ll - lambda * (theta * theta + phi * phi)) /
         static_cast<double>(d.wins.size());
}

PairFit fit_pair(const PairData& d, double lambda, double tol, int max_iter) {
  double theta = 0.0, phi = 0.0;
  double best_obj = objective(d, theta, phi, lambda);
  PairFit fit;
  fit.length_std = d.length_std;
  fit.num_records = static_cast<int>(d.wins.size());
  const double inv_n = 1.0 / static_cast<double>(d.wins.size());

  for (int iter = 0; iter < max_iter; ++iter) {
    double g0 = -2.0 * lambda * theta, g1 = -2.0 * lambda * phi;
    double h00 = -2.0 * lambda, h01 = 0.0, h11 = -2.0 * lambda;
    for (std::size_t i = 0; i < d.wins.size(); ++i) {
      const double t = d.features[i];
      const double p = logistic(theta + phi * t);
      const double r = d.wins[i] - p;
      g0 += r;
      g1 += r * t;
      const double wpp = p * (1.0 - p);
      h00 -= wpp;
      h01 -= wpp * t;
      h11 -= wpp * t * t;
    }
    g0 *= inv_n;
    g1 *= inv_n;
    h00 *= inv_n;
    h01 *= inv_n;
    h11 *= inv_n;
    fit.iterations = iter + 1;
    if (std::max(std::abs(g0), std::abs(g1)) < tol) {
      fit.converged = true;
      break;
    }
    // Newton step: solve H d = -g (2x2).
    const double det = h00 * h11 - h01 * h01;
    double d0, d1;
    if (std::abs(det) > 1e-300) {
      d0 = (-g0 * h11 + g1 * h01) / det;
      d1 = (-h00 * g1 + h01 * g0) / det;
    } else {
      d0 = g0;  // fall back to gradient ascent
      d1 = g1;
    }
    // Backtracking keeps the objective monotone across accepted steps.
    double alpha = 1.0;
    bool accepted = false;
    for (int back = 0; back < 40; ++back) {
      const double cand_obj =
          objective(d, theta + alpha * d0, phi + alpha * d1, lambda);
      if (cand_obj > best_obj) {
        theta += alpha * d0;
        phi += alpha * d1;
        best_obj = cand_obj;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // no ascent direction left at this scale
  }
  fit.theta = theta;
  fit.phi = phi;
  // Reported on the total scale (sum over records, regularizer included).
  fit.log_likelihood = best_obj * static_cast<double>(d.wins.size());
  return fit;
}

}  // namespace

GlmFit fit_lc_glm(std::span<const JudgmentRecord> records, double lambda, double tol,
                  int max_iter) {
  lambda = std::max(lambda, 1e-6);
  if (records.empty()) throw StateError("fit_lc_glm needs at least one record");

  std::map<std::pair<std::string, std::string>, std::vector<const JudgmentRecord*>>
      by_pair;
  for (const auto& r : records) {
    validate(r);
    by_pair[{r.model_id, r.baseline_id}].push_back(&r);
  }

  GlmFit fit;
  for (const auto& [key, rows] : by_pair) {
    PairData d;
    d.features.reserve(rows.size());
    d.wins.reserve(rows.size());
    double sum = 0.0, sum_sq = 0.0;
    for (const auto* r : rows) {
      const double diff = r->len_model - r->len_baseline;
      sum += diff;
      sum_sq += diff * diff;
    }
    const double n = static_cast<double>(rows.size());
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    d.length_std = std::sqrt(var);
    if (!(d.length_std > 0.0)) throw DegenerateFeatureError(key.first, key.second);
    for (const auto* r : rows) {
      d.features.push_back(
          length_feature(r->len_model, r->len_baseline, d.length_std));
      d.wins.push_back(r->model_won ? 1.0 : 0.0);
    }
    PairFit pf = fit_pair(d, lambda, tol, max_iter);
    fit.log_likelihood += pf.log_likelihood;
    fit.converged = fit.converged && pf.converged;
    fit.pairs.emplace(key, std::move(pf));
  }
  return fit;
}

double lc_winrate(const GlmFit& fit, const std::string& model,
                  const std::string& baseline) {
  return logistic(fit.pair(model, baseline).theta);
}

double raw_winrate(std::span<const JudgmentRecord> records, const std::string& model,
                   const std::string& baseline) {
  int total = 0, wins = 0;
  for (const auto& r : records) {
    if (r.model_id == model && r.baseline_id == baseline) {
      ++total;
      wins += r.model_won ? 1 : 0;
    }
  }
  if (total == 0)
    throw KeyError("no records for pair (" + model + ", " + baseline + ")");
  return static_cast<double>(wins) / total;
}

namespace {

template <typename T>
double kappa_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw Error("cohens_kappa: length mismatch");
  if (a.empty()) throw Error("cohens_kappa: empty input");
  const double n = static_cast<double>(a.size());

  std::map<T, double> freq_a, freq_b;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    freq_a[a[i]] += 1.0;
    freq_b[b[i]] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [label, ca] : freq_a) {
    auto it = freq_b.find(label);
    if (it != freq_b.end()) p_e += (ca / n) * (it->second / n);
  }
  if (p_e >= 1.0) {
    // Both raters constant with the same label: agreement is exact by
    // construction; anything else cannot reach p_e = 1.
    if (p_o == 1.0) return 1.0;
    throw Error("cohens_kappa: undefined (chance agreement is 1)");
  }
  return (p_o - p_e) / (1.0 - p_e);
}

}  // namespace

double cohens_kappa(std::span<const std::string> a, std::span<const std::string> b) {
  return kappa_impl(a, b);
}

double cohens_kappa(std::span<const int> a, std::span<const int> b) {
  return kappa_impl(a, b);
}

namespace {

// Natural cubic spline through (x, y): second derivatives at the knots by a
// tridiagonal solve, zero curvature at both ends.
struct NaturalSpline {
  std::vector<double> x, y, m;  // m: second derivatives

  static NaturalSpline fit(std::vector<double> xs, std::vector<double> ys) {
    NaturalSpline s;
    s.x = std::move(xs);
    s.y = std::move(ys);
    const int n = static_cast<int>(s.x.size());
    s.m.assign(n, 0.0);
    if (n < 3) return s;  // two knots: straight line, zero curvature

    std::vector<double> diag(n - 2), rhs(n - 2), upper(n - 2, 0.0);
    for (int i = 1; i <= n - 2; ++i) {
      const double h0 = s.x[i] - s.x[i - 1];
      const double h1 = s.x[i + 1] - s.x[i];
      diag[i - 1] = (h0 + h1) / 3.0;
      if (i <= n - 3) upper[i - 1] = h1 / 6.0;
      rhs[i - 1] = (s.y[i + 1] - s.y[i]) / h1 - (s.y[i] - s.y[i - 1]) / h0;
    }
    // Thomas algorithm (symmetric: lower diagonal equals the upper one).
    for (int i = 1; i < n - 2; ++i) {
      const double w = upper[i - 1] / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    for (int i = n - 3; i >= 0; --i) {
      const double up = (i < n - 3) ? upper[i] * s.m[i + 2] : 0.0;
      s.m[i + 1] = (rhs[i] - up) / diag[i];
    }
    return s;
  }

  double eval(double t) const {
    const int n = static_cast<int>(x.size());
    if (n == 1) return y[0];
    int i = static_cast<int>(std::upper_bound(x.begin(), x.end(), t) - x.begin()) - 1;
    i = std::clamp(i, 0, n - 2);
    const double h = x[i + 1] - x[i];
    const double a = (x[i + 1] - t) / h;
    const double b = (t - x[i]) / h;
    return a * y[i] + b * y[i + 1] +
           ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0;
  }
};

}  // namespace

double SmoothCurve::eval(double x) const {
  NaturalSpline s;
  s.x = bin_centers;
  s.y = bin_means;
  s.m = second_derivs;
  return s.eval(x);
}

SmoothCurve binned_smooth(std::span<const double> xs, std::span<const double> ys,
                          int n_bins) {
  if (xs.size() != ys.size()) throw Error("binned_smooth: length mismatch");
  if (n_bins < 2) throw ConfigError("n_bins", "must be >= 2");
  const auto [min_it, max_it] = std::minmax_element(xs.begin(), xs.end());
  if (xs.size() < 2 || *min_it == *max_it)
    throw Error("binned_smooth: needs at least 2 distinct x values");
  const double x_min = *min_it, x_max = *max_it;
  const double width = (x_max - x_min) / n_bins;

  // Canonical accumulation order makes the result independent of input order.
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return xs[a] != xs[b] ? xs[a] < xs[b] : ys[a] < ys[b];
  });

  std::vector<double> bin_sum(n_bins, 0.0);
  std::vector<int> bin_count(n_bins, 0);
  for (std::size_t i : order) {
    int b = static_cast<int>((xs[i] - x_min) / width);
    b = std::clamp(b, 0, n_bins - 1);
    bin_sum[b] += ys[i];
    ++bin_count[b];
  }

  SmoothCurve curve;
  for (int b = 0; b < n_bins; ++b) {
    if (bin_count[b] == 0) continue;
    curve.bin_centers.push_back(x_min + (b + 0.5) * width);
    curve.bin_means.push_back(bin_sum[b] / bin_count[b]);
  }

  const NaturalSpline spline = NaturalSpline::fit(curve.bin_centers, curve.bin_means);
  curve.second_derivs = spline.m;
  const double lo = curve.bin_centers.front();
  const double hi = curve.bin_centers.back();
  constexpr int kGridPoints = 200;
  curve.grid_x.reserve(kGridPoints);
  curve.grid_y.reserve(kGridPoints);
  for (int i = 0; i < kGridPoints; ++i) {
    const double t =
        curve.bin_centers.size() == 1
            ? lo
            : lo + (hi - lo) * static_cast<double>(i) / (kGridPoints - 1);
    curve.grid_x.push_back(t);
    curve.grid_y.push_back(spline.eval(t));
  }

  if (curve.bin_centers.size() == 1) {
    if (curve.bin_means.front() == 0.0) curve.x_intercept = curve.bin_centers.front();
    return curve;
  }

  for (int i = 0; i + 1 < kGridPoints; ++i) {
    const double ya = curve.grid_y[i], yb = curve.grid_y[i + 1];
    if (ya == 0.0) {
      curve.x_intercept = curve.grid_x[i];
      break;
    }
    if (ya * yb < 0.0) {
      double a = curve.grid_x[i], b = curve.grid_x[i + 1];
      double fa = ya;
      while (b - a > 1e-6) {
        const double mid = 0.5 * (a + b);
        const double fm = spline.eval(mid);
        if (fm == 0.0) {
          a = b = mid;
          break;
        }
        if ((fa < 0.0) != (fm < 0.0)) {
          b = mid;
        } else {
          a = mid;
          fa = fm;
        }
      }
      curve.x_intercept = 0.5 * (a + b);
      break;
    }
  }
  if (!curve.x_intercept && curve.grid_y.back() == 0.0)
    curve.x_intercept = curve.grid_x.back();
  return curve;
}

}  // namespace cpe
