#pragma once

// Median-of-means over independent estimator copies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cvsketch/error.hpp"
#include "cvsketch/random.hpp"

namespace cvsketch {

/// Median; an even count averages the two central values. Input is copied.
inline double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "median of an empty set");
  const std::size_t mid = values.size() / 2;
  const auto mid_it = values.begin() + static_cast<std::ptrdiff_t>(mid);
  std::nth_element(values.begin(), mid_it, values.end());
  const double upper = *mid_it;
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid_it);
  return 0.5 * (lower + upper);
}

struct MoMPlan {
  std::size_t groups = 1;
  std::size_t per_group = 1;
  double epsilon = 0.0;
  double delta = 0.0;

  std::size_t total() const noexcept { return groups * per_group; }
};

/// Constant in groups = ceil(C ln(1/delta)).
inline constexpr double kMedianGroupConstant = 8.0;

/// Grouping used by the repeated-trial experiments: 20 groups of 50.
inline constexpr MoMPlan kExperimentPlan{20, 50, 0.0, 0.0};

inline MoMPlan plan_from_guarantee(double epsilon, double delta, double var_over_mean_sq) {
  if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) || !(var_over_mean_sq >= 0.0) ||
      !std::isfinite(var_over_mean_sq)) {
    throw Error(ErrorKind::InvalidArgument,
                "need epsilon > 0, 0 < delta < 1 and a finite non-negative variance ratio");
  }
  MoMPlan plan;
  plan.epsilon = epsilon;
  plan.delta = delta;
  plan.per_group = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(3.0 * var_over_mean_sq / (epsilon * epsilon))));
  plan.groups = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(kMedianGroupConstant * std::log(1.0 / delta))));
  return plan;
}

/// Contiguous groups in input order, mean per group, median of the means.
inline double median_of_means(std::span<const double> estimates, const MoMPlan& plan) {
  if (plan.groups < 1 || plan.per_group < 1) {
    throw Error(ErrorKind::InvalidArgument, "plan needs at least one group of one");
  }
  if (estimates.size() != plan.total()) {
    throw Error(ErrorKind::LengthMismatch, "expected " + std::to_string(plan.total()) +
                                               " estimates, got " +
                                               std::to_string(estimates.size()));
  }
  std::vector<double> means(plan.groups);
  for (std::size_t g = 0; g < plan.groups; ++g) {
    double sum = 0.0;
    for (std::size_t i = 0; i < plan.per_group; ++i) sum += estimates[g * plan.per_group + i];
    means[g] = sum / static_cast<double>(plan.per_group);
  }
  return median(std::move(means));
}

/// Median-of-means after a seeded shuffle of the estimates.
inline double shuffled_median_of_means(std::span<const double> estimates, const MoMPlan& plan,
                                       std::uint64_t shuffle_seed) {
  std::vector<double> copy(estimates.begin(), estimates.end());
  Rng rng(shuffle_seed);
  shuffle(std::span<double>(copy), rng);
  return median_of_means(copy, plan);
}

}  // namespace cvsketch
