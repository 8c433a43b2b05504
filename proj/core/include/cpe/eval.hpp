#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpe/errors.hpp"

namespace cpe {

// One pairwise judgment of a model against a fixed baseline.
struct JudgmentRecord {
  std::string instruction_id;
  std::string model_id;
  std::string baseline_id;
  bool model_won = false;
  int len_model = 0;     // tokens, > 0
  int len_baseline = 0;  // tokens, > 0

  bool operator==(const JudgmentRecord&) const = default;
};

void validate(const JudgmentRecord& r);

// tanh of the standardized length difference.
double length_feature(double len_model, double len_baseline, double length_std);

struct PairFit {
  double theta = 0.0;       // ability difference vs the baseline (anchored 0)
  double phi = 0.0;         // length-effect coefficient
  double length_std = 0.0;  // population std of length differences
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  int num_records = 0;
};

// Fitted length-controlled model, one independent 2-parameter logistic fit
// per (model, baseline) pair.
struct GlmFit {
  std::map<std::pair<std::string, std::string>, PairFit> pairs;
  double log_likelihood = 0.0;
  bool converged = true;

  const PairFit& pair(const std::string& model, const std::string& baseline) const;
  double theta(const std::string& model, const std::string& baseline) const;
  double phi(const std::string& model, const std::string& baseline) const;
};

// Maximizes the L2-regularized Bernoulli log-likelihood of
// logistic(theta + phi * tanh_feature) by damped Newton steps per pair,
// stopping when the per-record gradient norm drops below tol. lambda is
// floored at 1e-6 to keep separated data finite. A pair whose length
// differences have zero variance raises DegenerateFeatureError.
GlmFit fit_lc_glm(std::span<const JudgmentRecord> records, double lambda = 1e-4,
                  double tol = 1e-8, int max_iter = 100);

// logistic(theta_m - theta_b), the win probability with the length effect
// removed. Throws KeyError for a pair absent from the fit.
double lc_winrate(const GlmFit& fit, const std::string& model,
                  const std::string& baseline);

// Fraction of records the model won. Throws KeyError when the pair has none.
double raw_winrate(std::span<const JudgmentRecord> records, const std::string& model,
                   const std::string& baseline);

double logistic(double x);

// Inter-rater agreement. Throws Error on length mismatch or empty input.
// Both raters constant and identical yields 1.0.
double cohens_kappa(std::span<const std::string> labels_a,
                    std::span<const std::string> labels_b);
double cohens_kappa(std::span<const int> labels_a, std::span<const int> labels_b);

struct SmoothCurve {
  std::vector<double> bin_centers;  // nonempty bins only
  std::vector<double> bin_means;
  std::vector<double> second_derivs;  // natural-spline curvature at the knots
  std::vector<double> grid_x;  // 200-point evaluation grid
  std::vector<double> grid_y;
  std::optional<double> x_intercept;  // first sign change, bisected to 1e-6

  // Spline value at x (clamped extrapolation outside the knot range).
  double eval(double x) const;
};

// Equal-width binning of (xs, ys) followed by a natural cubic spline through
// the bin means. Input order does not matter. Requires >= 2 distinct xs and
// n_bins >= 2.
SmoothCurve binned_smooth(std::span<const double> xs, std::span<const double> ys,
                          int n_bins = 15);

}  // namespace cpe
