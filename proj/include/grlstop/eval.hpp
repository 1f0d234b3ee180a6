#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "grlstop/baselines.hpp"
#include "grlstop/common.hpp"
#include "grlstop/corpus.hpp"

namespace grlstop {

struct TopicResult {
  std::string topic_id;
  std::string method;
  TargetSpec target;
  int stop_rank = 0;
  int collection_size = 0;
  double recall_at_stop = 0.0;
  int reliability = 0;     // target recall reached at the stopping point
  double cost = 0.0;       // fraction of the collection examined
  double cost_diff = 0.0;  // cost minus the oracle's cost for this target
};

// recall / reliability / cost / cost-difference for one stopping decision.
// Reliability compares exact counts (k/R >= target as integers), so boundary
// recalls such as 6/7 against 0.857... never misclassify.
inline TopicResult score_topic(const RankedTopic& topic,
                               const TargetSpec& spec,
                               const StopDecision& decision) {
  if (topic.num_relevant < 1)
    throw std::invalid_argument("score_topic: topic " + topic.topic_id +
                                " has no relevant documents");
  if (decision.stop_rank < 1 || decision.stop_rank > topic.size())
    throw std::invalid_argument("score_topic: stop rank " +
                                std::to_string(decision.stop_rank) +
                                " outside [1, " +
                                std::to_string(topic.size()) + "]");
  long long found = 0;
  for (int r = 1; r <= decision.stop_rank; ++r)
    if (topic.docs[static_cast<std::size_t>(r - 1)].relevant) ++found;

  TopicResult res;
  res.topic_id = topic.topic_id;
  res.method = decision.method;
  res.target = spec;
  res.stop_rank = decision.stop_rank;
  res.collection_size = topic.size();
  res.recall_at_stop = static_cast<double>(found) / topic.num_relevant;
  res.reliability = spec.reached(found, topic.num_relevant) ? 1 : 0;
  res.cost = static_cast<double>(decision.stop_rank) / topic.size();
  const auto oracle = oracle_stop(topic, spec);
  res.cost_diff =
      res.cost - static_cast<double>(oracle.stop_rank) / topic.size();
  return res;
}

struct SummaryRow {
  std::string method;
  double target = 0.0;
  int topics = 0;
  double recall = 0.0;
  double reliability = 0.0;
  double cost = 0.0;
  double cost_diff = 0.0;
};

// Unweighted means per (method, target) group, in sorted group order.
inline std::vector<SummaryRow> aggregate(
    const std::vector<TopicResult>& results) {
  if (results.empty())
    throw std::invalid_argument("aggregate: no results to aggregate");
  std::map<std::pair<std::string, double>, SummaryRow> groups;
  for (const auto& r : results) {
    auto& row = groups[{r.method, r.target.value}];
    row.method = r.method;
    row.target = r.target.value;
    ++row.topics;
    row.recall += r.recall_at_stop;
    row.reliability += r.reliability;
    row.cost += r.cost;
    row.cost_diff += r.cost_diff;
  }
  std::vector<SummaryRow> rows;
  rows.reserve(groups.size());
  for (auto& [key, row] : groups) {
    row.recall /= row.topics;
    row.reliability /= row.topics;
    row.cost /= row.topics;
    row.cost_diff /= row.topics;
    rows.push_back(row);
  }
  return rows;
}

inline void sort_results(std::vector<TopicResult>& results) {
  std::sort(results.begin(), results.end(),
            [](const TopicResult& a, const TopicResult& b) {
              return std::tie(a.method, a.target.value, a.topic_id) <
                     std::tie(b.method, b.target.value, b.topic_id);
            });
}

inline void write_results_csv(const std::string& path,
                              std::vector<TopicResult> results) {
  sort_results(results);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write results: " + path);
  out << "topic_id,method,target,stop_rank,recall,reliability,cost,cost_diff\n";
  for (const auto& r : results) {
    out << r.topic_id << ',' << r.method << ',' << format_double(r.target.value)
        << ',' << r.stop_rank << ',' << format_fixed(r.recall_at_stop) << ','
        << r.reliability << ',' << format_fixed(r.cost) << ','
        << format_fixed(r.cost_diff) << '\n';
  }
}

inline void write_summary_csv(const std::string& path,
                              const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary: " + path);
  out << "method,target,topics,recall,reliability,cost,cost_diff\n";
  for (const auto& r : rows) {
    out << r.method << ',' << format_double(r.target) << ',' << r.topics << ','
        << format_fixed(r.recall) << ',' << format_fixed(r.reliability) << ','
        << format_fixed(r.cost) << ',' << format_fixed(r.cost_diff) << '\n';
  }
}

// Two-column rank/recall export for external plotting.
inline void write_recall_curve_csv(const std::string& path,
                                   const RankedTopic& topic) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write curve: " + path);
  out << "rank,recall\n";
  for (const auto& p : recall_curve(topic))
    out << p.rank << ',' << format_fixed(p.recall) << '\n';
}

}  // namespace grlstop
