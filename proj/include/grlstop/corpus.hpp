#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "grlstop/common.hpp"

namespace grlstop {

struct RankedDoc {
  std::string id;
  bool relevant = false;
  std::string text;  // empty when no text is available
};

// One topic's ranking with simulated reviewer judgments. Immutable once
// built; rank 1 is docs.front().
struct RankedTopic {
  std::string topic_id;
  std::vector<RankedDoc> docs;
  int num_relevant = 0;

  int size() const { return static_cast<int>(docs.size()); }

  static RankedTopic make(std::string topic_id, std::vector<RankedDoc> docs) {
    RankedTopic t;
    t.topic_id = std::move(topic_id);
    t.docs = std::move(docs);
    std::unordered_set<std::string> seen;
    seen.reserve(t.docs.size());
    for (const auto& d : t.docs) {
      if (!seen.insert(d.id).second)
        throw std::invalid_argument("topic " + t.topic_id +
                                    ": duplicate doc id " + d.id);
      if (d.relevant) ++t.num_relevant;
    }
    return t;
  }
};

// Desired fraction of relevant documents, kept as an exact fraction so that
// boundary recalls (6/7 vs 0.857...) compare without floating-point error.
struct TargetSpec {
  double value = 0.0;
  long long num = 0;
  long long den = 1;

  static TargetSpec from_fraction(long long num, long long den) {
    if (den <= 0 || num <= 0 || num > den)
      throw std::invalid_argument("target recall must lie in (0, 1]");
    TargetSpec t;
    t.num = num;
    t.den = den;
    t.value = static_cast<double>(num) / static_cast<double>(den);
    return t;
  }

  // Decimal doubles up to nine places round-trip exactly.
  static TargetSpec from_double(double v) {
    if (!(v > 0.0) || v > 1.0)
      throw std::invalid_argument("target recall must lie in (0, 1]");
    return from_fraction(std::llround(v * 1e9), 1000000000LL);
  }

  static TargetSpec parse(const std::string& s) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad target recall: '" + s + "'");
    }
    if (pos != s.size())
      throw std::invalid_argument("bad target recall: '" + s + "'");
    return from_double(v);
  }

  // recall of k out of total meets the target?
  bool reached(long long k, long long total) const {
    return k * den >= num * total;
  }
};

struct BatchBounds {
  int begin_rank = 0;  // 1-based, inclusive
  int end_rank = 0;    // 1-based, inclusive
};

// A topic partitioned into fixed-size batches. When N is not divisible by
// the requested count, the batch size is ceil(N/B), the final batch takes
// the remainder and the effective count is recorded here. N < B collapses
// to one document per batch.
struct BatchedRanking {
  RankedTopic topic;
  int num_batches = 0;  // effective batch count
  int batch_size = 0;   // size of every batch except possibly the last
  std::vector<BatchBounds> bounds;
  std::vector<int> batch_rel_counts;
  std::vector<int> cum_rel;

  int batch_doc_count(int batch) const {
    const auto& b = bounds.at(static_cast<std::size_t>(batch - 1));
    return b.end_rank - b.begin_rank + 1;
  }
  double batch_rel_proportion(int batch) const {
    return static_cast<double>(
               batch_rel_counts.at(static_cast<std::size_t>(batch - 1))) /
           batch_doc_count(batch);
  }
};

inline BatchedRanking make_batches(RankedTopic topic, int requested_batches) {
  const int n = topic.size();
  if (n == 0) throw std::invalid_argument("make_batches: empty topic");
  if (requested_batches < 1)
    throw std::invalid_argument("make_batches: batch count must be >= 1");

  BatchedRanking br;
  br.batch_size = (n + requested_batches - 1) / requested_batches;
  br.num_batches = (n + br.batch_size - 1) / br.batch_size;
  br.bounds.reserve(static_cast<std::size_t>(br.num_batches));
  br.batch_rel_counts.assign(static_cast<std::size_t>(br.num_batches), 0);
  br.cum_rel.assign(static_cast<std::size_t>(br.num_batches), 0);

  int running = 0;
  for (int b = 0; b < br.num_batches; ++b) {
    const int begin = b * br.batch_size + 1;
    const int end = std::min(n, (b + 1) * br.batch_size);
    br.bounds.push_back({begin, end});
    int rel = 0;
    for (int r = begin; r <= end; ++r)
      if (topic.docs[static_cast<std::size_t>(r - 1)].relevant) ++rel;
    running += rel;
    br.batch_rel_counts[static_cast<std::size_t>(b)] = rel;
    br.cum_rel[static_cast<std::size_t>(b)] = running;
  }
  br.topic = std::move(topic);
  return br;
}

// Earliest batch whose cumulative recall meets the target.
inline int target_batch(const BatchedRanking& br, const TargetSpec& spec) {
  const long long total = br.topic.num_relevant;
  if (total < 1)
    throw std::invalid_argument("target_batch: topic " + br.topic.topic_id +
                                " has no relevant documents");
  for (int b = 1; b <= br.num_batches; ++b)
    if (spec.reached(br.cum_rel[static_cast<std::size_t>(b - 1)], total))
      return b;
  return br.num_batches;  // unreachable: cum_rel ends at num_relevant
}

struct RecallPoint {
  int rank = 0;
  double recall = 0.0;
};

inline std::vector<RecallPoint> recall_curve(const RankedTopic& topic) {
  if (topic.num_relevant < 1)
    throw std::invalid_argument("recall_curve: topic " + topic.topic_id +
                                " has no relevant documents");
  std::vector<RecallPoint> curve;
  curve.reserve(topic.docs.size());
  int found = 0;
  for (int r = 1; r <= topic.size(); ++r) {
    if (topic.docs[static_cast<std::size_t>(r - 1)].relevant) ++found;
    curve.push_back({r, static_cast<double>(found) / topic.num_relevant});
  }
  return curve;
}

// Normalized area under the recall curve: the mean recall over all ranks.
inline double aurc(const RankedTopic& topic) {
  if (topic.num_relevant < 1)
    throw std::invalid_argument("aurc: topic " + topic.topic_id +
                                " has no relevant documents");
  double sum = 0.0;
  int found = 0;
  for (const auto& d : topic.docs) {
    if (d.relevant) ++found;
    sum += static_cast<double>(found) / topic.num_relevant;
  }
  return sum / topic.size();
}

// ---------------------------------------------------------------------------
// TREC-style exchange formats.
//
// Run file:   topic Q0 docid rank score tag
// Qrels file: topic 0 docid rel        (rel > 0 means relevant)
// Text file:  docid <TAB> space-joined tokens
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string f;
  while (in >> f) fields.push_back(std::move(f));
  return fields;
}

inline int parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(where + ": expected integer, got '" + s + "'");
  }
}

}  // namespace detail

inline std::vector<RankedTopic> load_run_and_qrels(
    const std::string& run_path, const std::string& qrels_path,
    std::ostream* warnings = &std::cerr) {
  std::ifstream qrels(qrels_path);
  if (!qrels)
    throw std::runtime_error("cannot open qrels file: " + qrels_path);
  std::unordered_map<std::string, std::unordered_set<std::string>> relevant;
  std::string line;
  int line_no = 0;
  while (std::getline(qrels, line)) {
    ++line_no;
    const auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    const std::string where = qrels_path + ":" + std::to_string(line_no);
    if (fields.size() != 4)
      throw std::runtime_error(where + ": expected 4 fields, got " +
                               std::to_string(fields.size()));
    if (detail::parse_int(fields[3], where) > 0)
      relevant[fields[0]].insert(fields[2]);
  }

  std::ifstream run(run_path);
  if (!run) throw std::runtime_error("cannot open run file: " + run_path);
  struct Entry {
    int rank;
    RankedDoc doc;
  };
  std::vector<std::string> topic_order;
  std::unordered_map<std::string, std::vector<Entry>> per_topic;
  std::unordered_set<std::string> seen_pairs;
  line_no = 0;
  while (std::getline(run, line)) {
    ++line_no;
    const auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    const std::string where = run_path + ":" + std::to_string(line_no);
    if (fields.size() != 6)
      throw std::runtime_error(where + ": expected 6 fields, got " +
                               std::to_string(fields.size()));
    const std::string& topic = fields[0];
    const std::string& docid = fields[2];
    if (!seen_pairs.insert(topic + "\x1f" + docid).second)
      throw std::runtime_error(where + ": duplicate document '" + docid +
                               "' for topic '" + topic + "'");
    const int rank = detail::parse_int(fields[3], where);
    if (per_topic.find(topic) == per_topic.end()) topic_order.push_back(topic);
    Entry e;
    e.rank = rank;
    e.doc.id = docid;
    const auto rel_it = relevant.find(topic);
    e.doc.relevant = rel_it != relevant.end() && rel_it->second.count(docid);
    per_topic[topic].push_back(std::move(e));
  }

  std::vector<RankedTopic> topics;
  topics.reserve(topic_order.size());
  for (const auto& id : topic_order) {
    auto& entries = per_topic[id];
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) {
                       return a.rank < b.rank;
                     });
    std::vector<RankedDoc> docs;
    docs.reserve(entries.size());
    for (auto& e : entries) docs.push_back(std::move(e.doc));
    auto topic = RankedTopic::make(id, std::move(docs));
    if (topic.num_relevant == 0 && warnings)
      *warnings << "warning: topic " << id
                << " has no relevant documents in the run\n";
    topics.push_back(std::move(topic));
  }
  return topics;
}

inline void save_run_and_qrels(const std::vector<RankedTopic>& topics,
                               const std::string& run_path,
                               const std::string& qrels_path,
                               const std::string& tag = "grlstop") {
  std::ofstream run(run_path);
  if (!run) throw std::runtime_error("cannot write run file: " + run_path);
  std::ofstream qrels(qrels_path);
  if (!qrels)
    throw std::runtime_error("cannot write qrels file: " + qrels_path);
  for (const auto& t : topics) {
    for (int r = 1; r <= t.size(); ++r) {
      const auto& d = t.docs[static_cast<std::size_t>(r - 1)];
      run << t.topic_id << " Q0 " << d.id << ' ' << r << ' '
          << (t.size() - r + 1) << ' ' << tag << '\n';
      qrels << t.topic_id << " 0 " << d.id << ' ' << (d.relevant ? 1 : 0)
            << '\n';
    }
  }
}

inline std::unordered_map<std::string, std::string> load_texts(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open text file: " + path);
  std::unordered_map<std::string, std::string> texts;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 'docid<TAB>tokens'");
    texts[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return texts;
}

inline void save_texts(const std::vector<RankedTopic>& topics,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write text file: " + path);
  for (const auto& t : topics)
    for (const auto& d : t.docs) out << d.id << '\t' << d.text << '\n';
}

inline void attach_texts(
    std::vector<RankedTopic>& topics,
    const std::unordered_map<std::string, std::string>& texts,
    bool require_all = false) {
  for (auto& t : topics)
    for (auto& d : t.docs) {
      const auto it = texts.find(d.id);
      if (it != texts.end()) {
        d.text = it->second;
      } else if (require_all) {
        throw std::runtime_error("no text for document " + d.id +
                                 " (topic " + t.topic_id + ")");
      }
    }
}

// ---------------------------------------------------------------------------
// Synthetic rankings.
//
// Relevant documents are assigned ranks by weighted sampling without
// replacement, weight exp(-quality * (rank-1) / N). quality = 0 scatters
// them uniformly; large values pile them onto the top ranks. Token text is
// drawn from a shared signal pool (frequent in relevant documents) plus a
// background pool, enough structure for a linear model to pick up.
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  int num_topics = 1;
  int num_docs = 1000;
  double prevalence = 0.02;
  double quality = 10.0;
  std::uint64_t seed = 0;
  bool with_text = true;

  int signal_vocab = 40;
  int background_vocab = 220;
  int min_tokens = 12;
  int max_tokens = 28;
  double signal_frac_relevant = 0.70;
  double signal_frac_background = 0.05;
};

namespace detail {

inline std::vector<int> sample_relevant_ranks(int num_docs, int num_relevant,
                                              double quality, Rng& rng) {
  // Weighted reservoir keys: pick the num_relevant smallest -log(u)/w.
  // Underflowed weights give infinite keys; the index tiebreak then fills
  // remaining slots from the top of the ranking, so an extreme quality
  // degenerates to "all relevant documents first".
  std::vector<std::pair<double, int>> keys;
  keys.reserve(static_cast<std::size_t>(num_docs));
  for (int r = 1; r <= num_docs; ++r) {
    const double w =
        std::exp(-quality * static_cast<double>(r - 1) / num_docs);
    const double e = -std::log(rng.uniform_pos());
    const double key = w > 0.0
                           ? e / w
                           : std::numeric_limits<double>::infinity();
    keys.emplace_back(key, r);
  }
  std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  std::vector<int> ranks;
  ranks.reserve(static_cast<std::size_t>(num_relevant));
  for (int i = 0; i < num_relevant; ++i)
    ranks.push_back(keys[static_cast<std::size_t>(i)].second);
  std::sort(ranks.begin(), ranks.end());
  return ranks;
}

inline std::string synth_tokens(const SyntheticSpec& spec, bool relevant,
                                Rng& rng) {
  const int len = rng.uniform_int(spec.min_tokens, spec.max_tokens);
  const double signal_frac =
      relevant ? spec.signal_frac_relevant : spec.signal_frac_background;
  std::string text;
  for (int i = 0; i < len; ++i) {
    if (i) text.push_back(' ');
    if (rng.uniform() < signal_frac) {
      text += "sig" + std::to_string(rng.below(
                          static_cast<std::uint64_t>(spec.signal_vocab)));
    } else {
      text += "bg" + std::to_string(rng.below(
                         static_cast<std::uint64_t>(spec.background_vocab)));
    }
  }
  return text;
}

}  // namespace detail

inline std::vector<RankedTopic> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_topics < 1 || spec.num_docs < 1)
    throw std::invalid_argument("generate_synthetic: need topics and docs");
  if (!(spec.prevalence > 0.0) || !(spec.prevalence < 1.0))
    throw std::invalid_argument(
        "generate_synthetic: prevalence must lie in (0, 1)");
  if (!(spec.quality >= 0.0))
    throw std::invalid_argument("generate_synthetic: quality must be >= 0");
  const int num_relevant =
      static_cast<int>(std::llround(spec.prevalence * spec.num_docs));
  if (num_relevant < 1)
    throw std::invalid_argument(
        "generate_synthetic: prevalence * num_docs is below one document");

  std::vector<RankedTopic> topics;
  topics.reserve(static_cast<std::size_t>(spec.num_topics));
  for (int ti = 0; ti < spec.num_topics; ++ti) {
    Rng rng(spec.seed, static_cast<std::uint64_t>(ti) + 1);
    const auto rel_ranks = detail::sample_relevant_ranks(
        spec.num_docs, num_relevant, spec.quality, rng);
    std::vector<bool> is_rel(static_cast<std::size_t>(spec.num_docs) + 1,
                             false);
    for (const int r : rel_ranks) is_rel[static_cast<std::size_t>(r)] = true;

    char topic_id[32];
    std::snprintf(topic_id, sizeof(topic_id), "synth%03d", ti + 1);
    std::vector<RankedDoc> docs;
    docs.reserve(static_cast<std::size_t>(spec.num_docs));
    for (int r = 1; r <= spec.num_docs; ++r) {
      RankedDoc d;
      char id[48];
      std::snprintf(id, sizeof(id), "%s-d%05d", topic_id, r);
      d.id = id;
      d.relevant = is_rel[static_cast<std::size_t>(r)];
      if (spec.with_text) d.text = detail::synth_tokens(spec, d.relevant, rng);
      docs.push_back(std::move(d));
    }
    topics.push_back(RankedTopic::make(topic_id, std::move(docs)));
  }
  return topics;
}

// Finds a quality value whose expected AURC (over a probe ensemble) is close
// to the requested level. Bisection; the expectation is monotone in quality.
inline double calibrate_quality(int num_docs, double prevalence,
                                double target_aurc, std::uint64_t seed,
                                int probe_topics = 32) {
  if (!(target_aurc > 0.5) || !(target_aurc < 1.0))
    throw std::invalid_argument(
        "calibrate_quality: target AURC must lie in (0.5, 1)");
  SyntheticSpec probe;
  probe.num_topics = probe_topics;
  probe.num_docs = num_docs;
  probe.prevalence = prevalence;
  probe.seed = seed;
  probe.with_text = false;  // labels alone determine AURC

  const auto mean_aurc = [&](double quality) {
    probe.quality = quality;
    const auto topics = generate_synthetic(probe);
    double sum = 0.0;
    for (const auto& t : topics) sum += aurc(t);
    return sum / static_cast<double>(topics.size());
  };

  double lo = 0.0;
  double hi = 8.0;
  while (mean_aurc(hi) < target_aurc) {
    hi *= 2.0;
    if (hi > 1e7)
      throw std::runtime_error("calibrate_quality: target AURC unreachable");
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mean_aurc(mid) < target_aurc)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace grlstop
