#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "grlstop/common.hpp"
#include "grlstop/corpus.hpp"

namespace grlstop {

struct StopDecision {
  std::string method;
  int stop_rank = 0;
  std::optional<int> stop_batch;  // set when the decision is batch-aligned
  long long examined_count = 0;   // documents actually reviewed
  bool exhausted = false;         // no stopping point found before the end
};

// Stops at the rank of the k-th relevant document, k = ceil(target * R):
// the earliest rank at which the target recall is met or exceeded.
inline StopDecision oracle_stop(const RankedTopic& topic,
                                const TargetSpec& spec) {
  const long long total = topic.num_relevant;
  if (total < 1)
    throw std::invalid_argument("oracle_stop: topic " + topic.topic_id +
                                " has no relevant documents");
  const long long needed = (spec.num * total + spec.den - 1) / spec.den;
  long long found = 0;
  for (int r = 1; r <= topic.size(); ++r) {
    if (topic.docs[static_cast<std::size_t>(r - 1)].relevant &&
        ++found == needed) {
      StopDecision d;
      d.method = "oracle";
      d.stop_rank = r;
      d.examined_count = r;
      return d;
    }
  }
  throw std::logic_error("oracle_stop: ran past the last relevant document");
}

struct KneeParams {
  // Minimum before/after slope ratio that counts as a knee. Not part of the
  // published method description; exposed so callers can tighten or relax it.
  double slope_ratio_threshold = 6.0;
};

// Walks the gain curve over growing prefixes. For a prefix of length s the
// detected knee is the split point k maximizing
//   (gain(k) / k) / ((gain(s) - gain(k) + 1) / (s - k))
// (add-one smoothing keeps the after-slope positive on flat tails); review
// stops at the first prefix whose knee reaches the threshold. judged_prefix
// bounds how far judgments extend; if no knee qualifies by then the whole
// ranking is reviewed and the decision is flagged exhausted.
inline StopDecision knee_stop(const RankedTopic& topic, int judged_prefix,
                              const KneeParams& params = {}) {
  const int n = topic.size();
  if (judged_prefix < 1 || judged_prefix > n)
    throw std::invalid_argument("knee_stop: judged prefix outside [1, N]");
  std::vector<int> gain(static_cast<std::size_t>(judged_prefix) + 1, 0);
  int found = 0;
  for (int r = 1; r <= judged_prefix; ++r) {
    if (topic.docs[static_cast<std::size_t>(r - 1)].relevant) ++found;
    gain[static_cast<std::size_t>(r)] = found;
  }
  if (found == 0)
    throw std::invalid_argument(
        "knee_stop: no relevant document within the judged prefix");

  StopDecision d;
  d.method = "knee";
  for (int s = 2; s <= judged_prefix; ++s) {
    double best_ratio = 0.0;
    for (int k = 1; k < s; ++k) {
      if (gain[static_cast<std::size_t>(k)] == 0) continue;
      const double before =
          static_cast<double>(gain[static_cast<std::size_t>(k)]) / k;
      const double after =
          (static_cast<double>(gain[static_cast<std::size_t>(s)] -
                               gain[static_cast<std::size_t>(k)]) +
           1.0) /
          (s - k);
      best_ratio = std::max(best_ratio, before / after);
    }
    if (best_ratio >= params.slope_ratio_threshold) {
      d.stop_rank = s;
      d.examined_count = s;
      return d;
    }
  }
  d.stop_rank = n;
  d.examined_count = n;
  d.exhausted = true;
  return d;
}

inline StopDecision knee_stop(const RankedTopic& topic,
                              const KneeParams& params = {}) {
  return knee_stop(topic, topic.size(), params);
}

// Draws a seeded uniform permutation of the collection and reviews it until
// required_relevant relevant documents have been seen. The stopping rank in
// the ranking is the deepest original rank among those sampled relevant
// documents; examined_count records how many sampled documents were
// reviewed. The required count is a caller-supplied configuration input.
inline StopDecision target_method_stop(const RankedTopic& topic,
                                       const TargetSpec& /*spec*/,
                                       int required_relevant,
                                       std::uint64_t seed) {
  if (required_relevant < 1)
    throw std::invalid_argument(
        "target_method_stop: required relevant count must be >= 1");
  const int n = topic.size();
  StopDecision d;
  d.method = "tm";
  if (topic.num_relevant < required_relevant) {
    d.stop_rank = n;
    d.examined_count = n;
    d.exhausted = true;
    return d;
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i + 1;
  Rng rng(seed, 0x7a72);
  for (std::size_t j = perm.size(); j > 1; --j)
    std::swap(perm[j - 1], perm[rng.below(j)]);

  int seen_relevant = 0;
  int deepest_rank = 0;
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    const int rank = perm[pos];
    if (topic.docs[static_cast<std::size_t>(rank - 1)].relevant) {
      deepest_rank = std::max(deepest_rank, rank);
      if (++seen_relevant == required_relevant) {
        d.stop_rank = deepest_rank;
        d.examined_count = static_cast<long long>(pos) + 1;
        return d;
      }
    }
  }
  throw std::logic_error("target_method_stop: permutation exhausted early");
}

}  // namespace grlstop
