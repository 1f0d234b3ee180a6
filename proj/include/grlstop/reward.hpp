#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace grlstop {

// Shape of the stopping reward. before_exp bends the reward earned while
// approaching the target batch, after_exp bends the penalty accrued past it.
// (1, 1) balances the two objectives; (4, 0.25) favours reaching the target
// even at extra reviewing cost; (0.25, 4) favours stopping early.
struct RewardShape {
  double before_exp = 1.0;
  double after_exp = 1.0;
};

struct RewardParams {
  RewardShape shape;
  int num_batches = 0;   // total batches in the episode
  int target_batch = 0;  // batch at which the target recall is reached

  void validate() const {
    if (!(shape.before_exp > 0.0) || !(shape.after_exp > 0.0))
      throw std::invalid_argument("RewardParams: exponents must be positive");
    if (num_batches < 1)
      throw std::invalid_argument("RewardParams: need at least one batch");
    if (target_batch < 1 || target_batch > num_batches)
      throw std::invalid_argument(
          "RewardParams: target batch " + std::to_string(target_batch) +
          " outside [1, " + std::to_string(num_batches) + "]");
  }
};

inline void check_batch_index(const RewardParams& p, int i) {
  p.validate();
  if (i < 1 || i > p.num_batches)
    throw std::out_of_range("batch index " + std::to_string(i) +
                            " outside [1, " + std::to_string(p.num_batches) +
                            "]");
}

// Per-state reward. Positive up to the target batch, negative beyond it.
// Consecutive values telescope, so summing them over an episode yields
// cumulative_reward of the stop batch.
inline double step_reward(const RewardParams& p, int i) {
  check_batch_index(p, i);
  const double m = p.shape.before_exp;
  const double n = p.shape.after_exp;
  const int b = p.num_batches;
  const int t = p.target_batch;
  if (i <= t) {
    return (std::pow(static_cast<double>(i), m) -
            std::pow(static_cast<double>(i - 1), m)) /
           std::pow(static_cast<double>(t), m);
  }
  // t == b never reaches this branch: i > t is excluded by the range check.
  return (std::pow(static_cast<double>(b - i), n) -
          std::pow(static_cast<double>(b - i + 1), n)) /
         std::pow(static_cast<double>(b - t), n);
}

// Episode return for an episode that stops at batch i. Peaks at exactly 1
// when i equals the target batch and falls to 0 at the final batch.
inline double cumulative_reward(const RewardParams& p, int i) {
  check_batch_index(p, i);
  if (i <= p.target_batch) {
    return std::pow(static_cast<double>(i) / p.target_batch,
                    p.shape.before_exp);
  }
  return std::pow(
      static_cast<double>(p.num_batches - i) / (p.num_batches - p.target_batch),
      p.shape.after_exp);
}

}  // namespace grlstop
