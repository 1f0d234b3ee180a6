#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "grlstop/common.hpp"
#include "grlstop/corpus.hpp"

namespace grlstop {

// Sparse row vector, entries sorted by column index.
struct SparseVec {
  std::vector<std::pair<int, double>> entries;
};

// TF-IDF with smoothed idf: idf(t) = ln((1+D)/(1+df(t))) + 1. Rows are
// L2-normalized at transform time. Vocabulary indices are dense and
// lexicographically ordered.
struct TfidfModel {
  std::unordered_map<std::string, int> vocabulary;
  std::vector<double> idf;
  int fitted_on = 0;

  SparseVec transform(const std::vector<std::string>& tokens) const {
    std::map<int, double> counts;
    for (const auto& tok : tokens) {
      const auto it = vocabulary.find(tok);
      if (it != vocabulary.end()) counts[it->second] += 1.0;
    }
    SparseVec v;
    v.entries.reserve(counts.size());
    double norm_sq = 0.0;
    for (const auto& [col, tf] : counts) {
      const double x = tf * idf[static_cast<std::size_t>(col)];
      v.entries.emplace_back(col, x);
      norm_sq += x * x;
    }
    if (norm_sq > 0.0) {
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (auto& [col, x] : v.entries) x *= inv;
    }
    return v;
  }
};

inline TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& docs) {
  std::map<std::string, int> df;  // ordered: gives lexicographic indices
  for (const auto& doc : docs) {
    std::unordered_map<std::string, bool> seen;
    for (const auto& tok : doc)
      if (!std::exchange(seen[tok], true)) ++df[tok];
  }
  if (df.empty())
    throw std::invalid_argument("fit_tfidf: all documents are empty");

  TfidfModel model;
  model.fitted_on = static_cast<int>(docs.size());
  model.idf.reserve(df.size());
  int col = 0;
  for (const auto& [tok, count] : df) {
    model.vocabulary.emplace(tok, col++);
    model.idf.push_back(
        std::log((1.0 + model.fitted_on) / (1.0 + count)) + 1.0);
  }
  return model;
}

// Logistic relevance model with per-class cost weighting. The relevant
// (minority) class gets weight 1 and the non-relevant class the
// minority/majority count ratio, clamped to (0, 1]. Single-class training
// data degenerates to a constant predictor of the class present.
struct RelevanceModel {
  std::vector<double> weights;
  double bias = 0.0;
  double w_relevant = 1.0;
  double w_nonrelevant = 1.0;
  bool degenerate = false;
  bool degenerate_label = false;

  double decision(const SparseVec& x) const {
    if (degenerate) return degenerate_label ? 1.0 : -1.0;
    double z = bias;
    for (const auto& [col, v] : x.entries)
      z += weights[static_cast<std::size_t>(col)] * v;
    return z;
  }
  double predict_prob(const SparseVec& x) const {
    return 1.0 / (1.0 + std::exp(-decision(x)));
  }
  bool predict_label(const SparseVec& x) const { return decision(x) >= 0.0; }
};

struct LabeledVec {
  SparseVec x;
  bool relevant = false;
};

// Weighted mean logistic loss and its analytic gradient, exposed separately
// so the gradient can be checked against finite differences.
inline double weighted_logistic_loss(const std::vector<double>& weights,
                                     double bias,
                                     const std::vector<LabeledVec>& data,
                                     double w_relevant, double w_nonrelevant) {
  double loss = 0.0;
  double total_weight = 0.0;
  for (const auto& d : data) {
    double z = bias;
    for (const auto& [col, v] : d.x.entries)
      z += weights[static_cast<std::size_t>(col)] * v;
    const double c = d.relevant ? w_relevant : w_nonrelevant;
    // log(1 + exp(-y z)) with y in {-1, +1}, stable form
    const double yz = (d.relevant ? 1.0 : -1.0) * z;
    loss += c * (yz > 0 ? std::log1p(std::exp(-yz))
                        : -yz + std::log1p(std::exp(yz)));
    total_weight += c;
  }
  return loss / total_weight;
}

inline void weighted_logistic_grad(const std::vector<double>& weights,
                                   double bias,
                                   const std::vector<LabeledVec>& data,
                                   double w_relevant, double w_nonrelevant,
                                   std::vector<double>& grad_w,
                                   double& grad_b) {
  grad_w.assign(weights.size(), 0.0);
  grad_b = 0.0;
  double total_weight = 0.0;
  for (const auto& d : data) {
    double z = bias;
    for (const auto& [col, v] : d.x.entries)
      z += weights[static_cast<std::size_t>(col)] * v;
    const double c = d.relevant ? w_relevant : w_nonrelevant;
    const double p = 1.0 / (1.0 + std::exp(-z));
    const double residual = c * (p - (d.relevant ? 1.0 : 0.0));
    for (const auto& [col, v] : d.x.entries)
      grad_w[static_cast<std::size_t>(col)] += residual * v;
    grad_b += residual;
    total_weight += c;
  }
  const double inv = 1.0 / total_weight;
  for (auto& g : grad_w) g *= inv;
  grad_b *= inv;
}

struct FitOptions {
  int max_iterations = 1000;
  double loss_tolerance = 1e-4;  // stop when an iteration improves less
};

// Full-batch gradient descent with backtracking line search. warm, when
// given, seeds the weights (used when refitting after each newly examined
// batch). Deterministic: no randomness anywhere in the fit.
inline RelevanceModel fit_relevance(int dimensions,
                                    const std::vector<LabeledVec>& examined,
                                    const RelevanceModel* warm = nullptr,
                                    const FitOptions& opts = {}) {
  if (examined.empty())
    throw std::invalid_argument("fit_relevance: no training documents");
  long long num_rel = 0;
  for (const auto& d : examined) num_rel += d.relevant ? 1 : 0;
  const long long num_nonrel =
      static_cast<long long>(examined.size()) - num_rel;

  RelevanceModel model;
  if (num_rel == 0 || num_nonrel == 0) {
    model.degenerate = true;
    model.degenerate_label = num_rel > 0;
    model.weights.assign(static_cast<std::size_t>(dimensions), 0.0);
    return model;
  }

  model.w_relevant = 1.0;
  model.w_nonrelevant = std::min(
      1.0, static_cast<double>(num_rel) / static_cast<double>(num_nonrel));
  if (warm && !warm->degenerate &&
      warm->weights.size() == static_cast<std::size_t>(dimensions)) {
    model.weights = warm->weights;
    model.bias = warm->bias;
  } else {
    model.weights.assign(static_cast<std::size_t>(dimensions), 0.0);
  }

  std::vector<double> grad_w;
  double grad_b = 0.0;
  std::vector<double> trial_w(model.weights.size());
  double step = 1.0;
  double loss = weighted_logistic_loss(model.weights, model.bias, examined,
                                       model.w_relevant, model.w_nonrelevant);
  for (int it = 0; it < opts.max_iterations; ++it) {
    weighted_logistic_grad(model.weights, model.bias, examined,
                           model.w_relevant, model.w_nonrelevant, grad_w,
                           grad_b);
    double grad_sq = grad_b * grad_b;
    for (const double g : grad_w) grad_sq += g * g;
    if (grad_sq == 0.0) break;

    // Backtracking (Armijo) from the last accepted step, allowed to grow.
    step *= 2.0;
    double trial_loss = loss;
    double trial_b = model.bias;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t i = 0; i < trial_w.size(); ++i)
        trial_w[i] = model.weights[i] - step * grad_w[i];
      trial_b = model.bias - step * grad_b;
      trial_loss = weighted_logistic_loss(trial_w, trial_b, examined,
                                          model.w_relevant,
                                          model.w_nonrelevant);
      if (trial_loss <= loss - 1e-4 * step * grad_sq) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double improvement = loss - trial_loss;
    model.weights.swap(trial_w);
    model.bias = trial_b;
    loss = trial_loss;
    if (improvement < opts.loss_tolerance) break;
  }
  return model;
}

// Token-level convenience overload matching the loader's document shape.
inline RelevanceModel fit_relevance(
    const TfidfModel& tfidf,
    const std::vector<std::pair<std::vector<std::string>, bool>>& examined,
    const FitOptions& opts = {}) {
  std::vector<LabeledVec> data;
  data.reserve(examined.size());
  for (const auto& [tokens, label] : examined)
    data.push_back({tfidf.transform(tokens), label});
  return fit_relevance(static_cast<int>(tfidf.idf.size()), data, nullptr,
                       opts);
}

// Per-topic feature cache: the TF-IDF model is fit once on the topic's full
// document text (labels play no part), every document vector is transformed
// up front and reused by each refit of the logistic layer.
struct TopicFeatures {
  TfidfModel tfidf;
  std::vector<SparseVec> doc_vecs;  // by rank - 1

  static TopicFeatures build(const RankedTopic& topic) {
    std::vector<std::vector<std::string>> docs;
    docs.reserve(topic.docs.size());
    for (const auto& d : topic.docs) docs.push_back(tokenize(d.text));
    TopicFeatures f;
    f.tfidf = fit_tfidf(docs);
    f.doc_vecs.reserve(docs.size());
    for (const auto& d : docs) f.doc_vecs.push_back(f.tfidf.transform(d));
    return f;
  }

  int dimensions() const { return static_cast<int>(tfidf.idf.size()); }
};

// Predicted fraction of relevant documents for each batch from from_batch
// (1-based) through the last, using hard labels at the 0.5 threshold.
inline std::vector<double> estimate_batches(const RelevanceModel& model,
                                            const TopicFeatures& features,
                                            const BatchedRanking& br,
                                            int from_batch) {
  if (from_batch < 1 || from_batch > br.num_batches)
    throw std::out_of_range("estimate_batches: batch index out of range");
  std::vector<double> estimates;
  estimates.reserve(static_cast<std::size_t>(br.num_batches - from_batch + 1));
  for (int b = from_batch; b <= br.num_batches; ++b) {
    const auto& bounds = br.bounds[static_cast<std::size_t>(b - 1)];
    int predicted = 0;
    for (int r = bounds.begin_rank; r <= bounds.end_rank; ++r)
      if (model.predict_label(features.doc_vecs[static_cast<std::size_t>(r - 1)]))
        ++predicted;
    estimates.push_back(static_cast<double>(predicted) /
                        (bounds.end_rank - bounds.begin_rank + 1));
  }
  return estimates;
}

}  // namespace grlstop
