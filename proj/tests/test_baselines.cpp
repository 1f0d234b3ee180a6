#include "grlstop/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "grlstop/common.hpp"
#include "grlstop/corpus.hpp"
#include "gtest/gtest.h"

namespace {

using grlstop::KneeParams;
using grlstop::RankedDoc;
using grlstop::RankedTopic;
using grlstop::Rng;
using grlstop::StopDecision;
using grlstop::TargetSpec;

RankedTopic topic_with_relevant_at(int n, const std::vector<int>& ranks) {
  std::vector<bool> rel(static_cast<std::size_t>(n) + 1, false);
  for (const int r : ranks) rel[static_cast<std::size_t>(r)] = true;
  std::vector<RankedDoc> docs;
  for (int r = 1; r <= n; ++r)
    docs.push_back({"d" + std::to_string(r), rel[static_cast<std::size_t>(r)],
                    ""});
  return RankedTopic::make("t", std::move(docs));
}

RankedTopic random_topic(Rng& rng, int max_docs) {
  const int n = rng.uniform_int(2, max_docs);
  std::vector<int> ranks;
  for (int r = 1; r <= n; ++r)
    if (rng.uniform() < 0.25) ranks.push_back(r);
  if (ranks.empty()) ranks.push_back(rng.uniform_int(1, n));
  return topic_with_relevant_at(n, ranks);
}

TEST(OracleStop, SevenRelevantAtTargetPointEight) {
  // 7 relevant documents, target 0.8: stop at the 6th, recall 6/7.
  const auto topic =
      topic_with_relevant_at(50, {2, 5, 9, 14, 20, 33, 49});
  const auto d = grlstop::oracle_stop(topic, TargetSpec::from_double(0.8));
  EXPECT_EQ(d.stop_rank, 33);
  int found = 0;
  for (int r = 1; r <= d.stop_rank; ++r)
    found += topic.docs[static_cast<std::size_t>(r - 1)].relevant ? 1 : 0;
  EXPECT_EQ(found, 6);
  EXPECT_NEAR(static_cast<double>(found) / 7.0, 6.0 / 7.0, 1e-15);
}

TEST(OracleStop, FullRecallStopsAtTheLastRelevantDocument) {
  const auto topic = topic_with_relevant_at(40, {3, 17, 25});
  const auto d = grlstop::oracle_stop(topic, TargetSpec::from_double(1.0));
  EXPECT_EQ(d.stop_rank, 25);
}

TEST(OracleStop, MatchesExhaustiveScanOnRandomRankings) {
  Rng rng(31, 0);
  const double targets[] = {0.7, 0.8, 0.9, 1.0};
  for (int trial = 0; trial < 100; ++trial) {
    const auto topic = random_topic(rng, 80);
    for (const double t : targets) {
      const auto spec = TargetSpec::from_double(t);
      const auto d = grlstop::oracle_stop(topic, spec);
      // independent scan: earliest rank whose recall meets the target
      int expected = -1;
      int found = 0;
      for (int r = 1; r <= topic.size(); ++r) {
        found += topic.docs[static_cast<std::size_t>(r - 1)].relevant ? 1 : 0;
        if (spec.reached(found, topic.num_relevant)) {
          expected = r;
          break;
        }
      }
      ASSERT_EQ(d.stop_rank, expected) << "target " << t;
      // quantization: overshoot is below one document's worth of recall
      int k = 0;
      for (int r = 1; r <= d.stop_rank; ++r)
        k += topic.docs[static_cast<std::size_t>(r - 1)].relevant ? 1 : 0;
      ASSERT_LT(static_cast<double>(k) / topic.num_relevant - t,
                1.0 / topic.num_relevant + 1e-12);
    }
  }
}

TEST(OracleStop, NoRelevantDocumentsIsAnError) {
  std::vector<RankedDoc> docs = {{"a", false, ""}};
  EXPECT_THROW(grlstop::oracle_stop(RankedTopic::make("t", docs),
                                    TargetSpec::from_double(0.8)),
               std::invalid_argument);
}

TEST(KneeStop, RisingThenFlatCurveStops) {
  // 5 relevant up front, then a long flat tail
  const auto topic = topic_with_relevant_at(200, {1, 2, 3, 4, 5});
  const auto d = grlstop::knee_stop(topic);
  EXPECT_FALSE(d.exhausted);
  EXPECT_LT(d.stop_rank, 60);
  EXPECT_GE(d.stop_rank, 5);
}

TEST(KneeStop, LinearGainCurveIsExhausted) {
  std::vector<int> all;
  for (int r = 1; r <= 50; ++r) all.push_back(r);
  const auto topic = topic_with_relevant_at(50, all);
  const auto d = grlstop::knee_stop(topic);
  EXPECT_TRUE(d.exhausted);
  EXPECT_EQ(d.stop_rank, 50);
}

TEST(KneeStop, NoRelevantInJudgedPrefixIsAnError) {
  const auto topic = topic_with_relevant_at(50, {40});
  EXPECT_THROW(grlstop::knee_stop(topic, 10), std::invalid_argument);
}

// Independent brute-force evaluation of the slope ratio over every
// (prefix, split) pair, kept deliberately naive.
int brute_force_knee(const RankedTopic& topic, double threshold) {
  const int n = topic.size();
  for (int s = 2; s <= n; ++s) {
    double best = 0.0;
    for (int k = 1; k < s; ++k) {
      int gain_k = 0, gain_s = 0;
      for (int r = 1; r <= s; ++r) {
        if (topic.docs[static_cast<std::size_t>(r - 1)].relevant) {
          if (r <= k) ++gain_k;
          ++gain_s;
        }
      }
      if (gain_k == 0) continue;
      const double before = static_cast<double>(gain_k) / k;
      const double after =
          (static_cast<double>(gain_s - gain_k) + 1.0) / (s - k);
      best = std::max(best, before / after);
    }
    if (best >= threshold) return s;
  }
  return n;
}

TEST(KneeStop, ConcentratedRelevanceStopsInTheTopOfTheRanking) {
  grlstop::SyntheticSpec spec;
  spec.num_docs = 500;
  spec.prevalence = 0.04;
  spec.quality = 40.0;  // relevant mass within the top tenth
  spec.with_text = false;
  for (int seed = 1; seed <= 5; ++seed) {
    spec.seed = static_cast<std::uint64_t>(seed);
    const auto topic = grlstop::generate_synthetic(spec)[0];
    const auto d = grlstop::knee_stop(topic);
    EXPECT_FALSE(d.exhausted);
    EXPECT_LE(d.stop_rank, 100) << "seed " << seed;  // top 20% of 500
    EXPECT_EQ(d.stop_rank, brute_force_knee(topic, 6.0)) << "seed " << seed;
  }
}

TEST(KneeStop, ThresholdIsConfigurable) {
  const auto topic = topic_with_relevant_at(200, {1, 2, 3, 4, 5});
  const auto strict = grlstop::knee_stop(topic, KneeParams{40.0});
  const auto loose = grlstop::knee_stop(topic, KneeParams{3.0});
  EXPECT_GT(strict.stop_rank, loose.stop_rank);
}

TEST(TargetMethod, SamplingAllRelevantReachesFullRecall) {
  const auto topic = topic_with_relevant_at(60, {4, 9, 44});
  const auto d = grlstop::target_method_stop(
      topic, TargetSpec::from_double(1.0), 3, 5);
  EXPECT_EQ(d.stop_rank, 44);  // deepest relevant rank
  EXPECT_FALSE(d.exhausted);
}

TEST(TargetMethod, ExpectedSampleCountMatchesUniformPositionLaw) {
  // one relevant document: its position in a uniform permutation averages
  // (N+1)/2
  const int n = 101;
  const auto topic = topic_with_relevant_at(n, {1});
  double total = 0.0;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s)
    total += static_cast<double>(
        grlstop::target_method_stop(topic, TargetSpec::from_double(0.5), 1,
                                    static_cast<std::uint64_t>(s))
            .examined_count);
  const double mean = total / seeds;
  // SE of the mean is about (n/sqrt(12))/sqrt(seeds) = 0.29
  EXPECT_NEAR(mean, (n + 1) / 2.0, 1.5);
}

TEST(TargetMethod, DeterministicGivenSeed) {
  Rng rng(8, 0);
  const auto topic = random_topic(rng, 70);
  const auto a = grlstop::target_method_stop(
      topic, TargetSpec::from_double(0.8), 2, 99);
  const auto b = grlstop::target_method_stop(
      topic, TargetSpec::from_double(0.8), 2, 99);
  EXPECT_EQ(a.stop_rank, b.stop_rank);
  EXPECT_EQ(a.examined_count, b.examined_count);
}

TEST(TargetMethod, TooFewRelevantDocumentsExhausts) {
  const auto topic = topic_with_relevant_at(30, {5});
  const auto d = grlstop::target_method_stop(
      topic, TargetSpec::from_double(0.9), 5, 1);
  EXPECT_TRUE(d.exhausted);
  EXPECT_EQ(d.stop_rank, 30);
}

// No rule that actually reaches the target can stop earlier than the oracle.
TEST(BaselineProperties, OracleDominatesEveryTargetReachingDecision) {
  Rng rng(77, 0);
  const double targets[] = {0.7, 0.9, 1.0};
  for (int trial = 0; trial < 60; ++trial) {
    const auto topic = random_topic(rng, 50);
    for (const double t : targets) {
      const auto spec = TargetSpec::from_double(t);
      const auto oracle = grlstop::oracle_stop(topic, spec);
      const auto knee = grlstop::knee_stop(topic);
      const auto tm = grlstop::target_method_stop(
          topic, spec, std::max(1, topic.num_relevant / 2),
          static_cast<std::uint64_t>(trial));
      for (const auto& d : {knee, tm}) {
        int found = 0;
        for (int r = 1; r <= d.stop_rank; ++r)
          found += topic.docs[static_cast<std::size_t>(r - 1)].relevant;
        if (spec.reached(found, topic.num_relevant))
          ASSERT_GE(d.stop_rank, oracle.stop_rank) << d.method;
      }
      ASSERT_GE(oracle.stop_rank, 1);
      ASSERT_LE(oracle.stop_rank, topic.size());
    }
  }
}

}  // namespace
