#include "grlstop/classifier.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "grlstop/common.hpp"
#include "grlstop/corpus.hpp"
#include "gtest/gtest.h"

namespace {

using grlstop::fit_relevance;
using grlstop::fit_tfidf;
using grlstop::LabeledVec;
using grlstop::RelevanceModel;
using grlstop::Rng;
using grlstop::SparseVec;
using grlstop::TfidfModel;

TEST(Tfidf, SingleDocSingleToken) {
  const auto model = fit_tfidf({{"alpha"}});
  const auto v = model.transform({"alpha"});
  ASSERT_EQ(v.entries.size(), 1u);
  EXPECT_DOUBLE_EQ(v.entries[0].second, 1.0);
}

TEST(Tfidf, TokenInEveryDocumentHasMinimalIdf) {
  const auto model = fit_tfidf({{"common", "x"}, {"common", "y"}, {"common"}});
  EXPECT_DOUBLE_EQ(model.idf[static_cast<std::size_t>(
                       model.vocabulary.at("common"))],
                   1.0);
}

TEST(Tfidf, ThreeDocToyMatchesHandComputedValues) {
  // docs: {a b}, {a c}, {a}. D = 3, df(a) = 3, df(b) = df(c) = 1.
  // idf(a) = ln(4/4)+1 = 1; idf(b) = idf(c) = ln(4/2)+1 = 1+ln2.
  const auto model = fit_tfidf({{"a", "b"}, {"a", "c"}, {"a"}});
  const double idf_a = model.idf[static_cast<std::size_t>(model.vocabulary.at("a"))];
  const double idf_b = model.idf[static_cast<std::size_t>(model.vocabulary.at("b"))];
  EXPECT_NEAR(idf_a, 1.0, 1e-12);
  EXPECT_NEAR(idf_b, 1.0 + std::log(2.0), 1e-12);

  const auto v = model.transform({"a", "b"});
  const double norm = std::sqrt(1.0 + (1.0 + std::log(2.0)) * (1.0 + std::log(2.0)));
  ASSERT_EQ(v.entries.size(), 2u);
  EXPECT_NEAR(v.entries[0].second, 1.0 / norm, 1e-12);          // a
  EXPECT_NEAR(v.entries[1].second, (1.0 + std::log(2.0)) / norm, 1e-12);  // b

  double l2 = 0.0;
  for (const auto& [col, x] : v.entries) l2 += x * x;
  EXPECT_NEAR(l2, 1.0, 1e-12);
}

TEST(Tfidf, AllEmptyDocumentsIsAnError) {
  EXPECT_THROW(fit_tfidf({{}, {}}), std::invalid_argument);
}

TEST(Tfidf, UnknownTokensAreDropped) {
  const auto model = fit_tfidf({{"a"}, {"b"}});
  EXPECT_TRUE(model.transform({"zzz"}).entries.empty());
}

std::vector<LabeledVec> separable_toy(int per_class) {
  // relevant docs carry the "sig" token, non-relevant the "bg" token
  std::vector<std::vector<std::string>> docs;
  std::vector<bool> labels;
  for (int i = 0; i < per_class; ++i) {
    docs.push_back({"sig", "shared"});
    labels.push_back(true);
    docs.push_back({"bg", "shared"});
    labels.push_back(false);
  }
  const auto tfidf = fit_tfidf(docs);
  std::vector<LabeledVec> data;
  for (std::size_t i = 0; i < docs.size(); ++i)
    data.push_back({tfidf.transform(docs[i]), labels[i]});
  return data;
}

TEST(FitRelevance, SeparableToyReachesPerfectTrainingAccuracy) {
  const auto data = separable_toy(10);
  const auto model = fit_relevance(3, data);
  EXPECT_FALSE(model.degenerate);
  for (const auto& d : data)
    EXPECT_EQ(model.predict_label(d.x), d.relevant);
}

TEST(FitRelevance, BalancedClassesGetEqualWeight) {
  const auto model = fit_relevance(3, separable_toy(8));
  EXPECT_DOUBLE_EQ(model.w_relevant, 1.0);
  EXPECT_DOUBLE_EQ(model.w_nonrelevant, 1.0);
}

TEST(FitRelevance, ImbalanceWeightIsTheClassRatio) {
  std::vector<std::vector<std::string>> docs;
  std::vector<bool> labels;
  for (int i = 0; i < 5; ++i) {
    docs.push_back({"sig"});
    labels.push_back(true);
  }
  for (int i = 0; i < 50; ++i) {
    docs.push_back({"bg"});
    labels.push_back(false);
  }
  const auto tfidf = fit_tfidf(docs);
  std::vector<LabeledVec> data;
  for (std::size_t i = 0; i < docs.size(); ++i)
    data.push_back({tfidf.transform(docs[i]), labels[i]});
  const auto model = fit_relevance(2, data);
  EXPECT_DOUBLE_EQ(model.w_nonrelevant, 0.1);
}

TEST(FitRelevance, SingleClassDegeneratesToConstantPredictor) {
  std::vector<LabeledVec> all_rel = {{SparseVec{{{0, 1.0}}}, true},
                                     {SparseVec{{{1, 1.0}}}, true}};
  const auto model = fit_relevance(2, all_rel);
  EXPECT_TRUE(model.degenerate);
  EXPECT_TRUE(model.predict_label(SparseVec{{{0, 0.5}}}));

  std::vector<LabeledVec> none_rel = {{SparseVec{{{0, 1.0}}}, false}};
  const auto none = fit_relevance(2, none_rel);
  EXPECT_TRUE(none.degenerate);
  EXPECT_FALSE(none.predict_label(SparseVec{{{0, 0.5}}}));
}

TEST(FitRelevance, EmptyTrainingSetIsAnError) {
  EXPECT_THROW(fit_relevance(2, {}), std::invalid_argument);
}

TEST(FitRelevance, DeterministicOnFixedData) {
  const auto data = separable_toy(6);
  const auto a = fit_relevance(3, data);
  const auto b = fit_relevance(3, data);
  ASSERT_EQ(a.weights.size(), b.weights.size());
  for (std::size_t i = 0; i < a.weights.size(); ++i)
    EXPECT_EQ(a.weights[i], b.weights[i]);
  EXPECT_EQ(a.bias, b.bias);
}

TEST(GradientCheck, AnalyticMatchesCentralFiniteDifferences) {
  Rng rng(2024, 0);
  for (int instance = 0; instance < 50; ++instance) {
    const int dims = rng.uniform_int(2, 6);
    const int count = rng.uniform_int(2, 12);
    std::vector<LabeledVec> data;
    for (int i = 0; i < count; ++i) {
      SparseVec v;
      for (int d = 0; d < dims; ++d)
        if (rng.uniform() < 0.7) v.entries.emplace_back(d, rng.normal());
      data.push_back({std::move(v), rng.uniform() < 0.5});
    }
    bool has_rel = false, has_nonrel = false;
    for (const auto& d : data) (d.relevant ? has_rel : has_nonrel) = true;
    if (!has_rel) data[0].relevant = true;
    if (!has_nonrel) data.back().relevant = false;

    std::vector<double> w(static_cast<std::size_t>(dims));
    for (auto& x : w) x = rng.normal();
    const double b = rng.normal();
    const double w_rel = 1.0;
    const double w_nonrel = 0.25 + 0.75 * rng.uniform();

    std::vector<double> grad_w;
    double grad_b = 0.0;
    grlstop::weighted_logistic_grad(w, b, data, w_rel, w_nonrel, grad_w,
                                    grad_b);

    const double h = 1e-6;
    for (int d = 0; d < dims; ++d) {
      auto wp = w, wm = w;
      wp[static_cast<std::size_t>(d)] += h;
      wm[static_cast<std::size_t>(d)] -= h;
      const double fd = (grlstop::weighted_logistic_loss(wp, b, data, w_rel,
                                                         w_nonrel) -
                         grlstop::weighted_logistic_loss(wm, b, data, w_rel,
                                                         w_nonrel)) /
                        (2 * h);
      const double g = grad_w[static_cast<std::size_t>(d)];
      ASSERT_NEAR(fd, g, 1e-5 * (1.0 + std::abs(g)))
          << "instance " << instance << " dim " << d;
    }
    const double fdb =
        (grlstop::weighted_logistic_loss(w, b + h, data, w_rel, w_nonrel) -
         grlstop::weighted_logistic_loss(w, b - h, data, w_rel, w_nonrel)) /
        (2 * h);
    ASSERT_NEAR(fdb, grad_b, 1e-5 * (1.0 + std::abs(grad_b)));
  }
}

grlstop::RankedTopic synthetic_topic(std::uint64_t seed) {
  grlstop::SyntheticSpec spec;
  spec.num_topics = 1;
  spec.num_docs = 400;
  spec.prevalence = 0.08;
  spec.quality = 12.0;
  spec.seed = seed;
  return grlstop::generate_synthetic(spec)[0];
}

TEST(EstimateBatches, ConstantPredictorsProduceConstantEstimates) {
  const auto topic = synthetic_topic(3);
  const auto br = grlstop::make_batches(topic, 20);
  const auto features = grlstop::TopicFeatures::build(topic);
  RelevanceModel all_rel;
  all_rel.degenerate = true;
  all_rel.degenerate_label = true;
  for (const double e : grlstop::estimate_batches(all_rel, features, br, 1))
    EXPECT_DOUBLE_EQ(e, 1.0);
  RelevanceModel none;
  none.degenerate = true;
  none.degenerate_label = false;
  for (const double e : grlstop::estimate_batches(none, features, br, 5))
    EXPECT_DOUBLE_EQ(e, 0.0);
}

double estimation_mae(const grlstop::BatchedRanking& br,
                      const grlstop::TopicFeatures& features, int examined) {
  std::vector<LabeledVec> train;
  const int examined_docs =
      br.bounds[static_cast<std::size_t>(examined - 1)].end_rank;
  for (int r = 1; r <= examined_docs; ++r)
    train.push_back({features.doc_vecs[static_cast<std::size_t>(r - 1)],
                     br.topic.docs[static_cast<std::size_t>(r - 1)].relevant});
  const auto model = fit_relevance(features.dimensions(), train);
  const auto est =
      grlstop::estimate_batches(model, features, br, examined + 1);
  double mae = 0.0;
  for (int b = examined + 1; b <= br.num_batches; ++b)
    mae += std::abs(est[static_cast<std::size_t>(b - examined - 1)] -
                    br.batch_rel_proportion(b));
  return mae / static_cast<double>(br.num_batches - examined);
}

TEST(EstimateBatches, SeparableSyntheticEstimatesTrackTrueProportions) {
  const auto topic = synthetic_topic(11);
  const auto br = grlstop::make_batches(topic, 40);
  const auto features = grlstop::TopicFeatures::build(topic);
  EXPECT_LE(estimation_mae(br, features, 4), 0.1);
}

TEST(EstimateBatches, MoreExaminedBatchesNeverHurtsMuch) {
  const auto topic = synthetic_topic(23);
  const auto br = grlstop::make_batches(topic, 20);
  const auto features = grlstop::TopicFeatures::build(topic);
  double prev = estimation_mae(br, features, 1);
  for (int examined = 2; examined <= 10; ++examined) {
    const double mae = estimation_mae(br, features, examined);
    EXPECT_LE(mae, prev + 0.02) << "examined " << examined;
    prev = mae;
  }
}

}  // namespace
