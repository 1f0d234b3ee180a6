#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "grlstop/classifier.hpp"
#include "grlstop/common.hpp"
#include "grlstop/corpus.hpp"
#include "grlstop/reward.hpp"

namespace grlstop {

enum class Action { Stop, Continue };

// Slot used for unexamined batches when no classifier is attached.
inline constexpr double kUnexaminedSlot = -1.0;

struct EnvConfig {
  int num_batches = 100;  // B; observations have length B + 2
  RewardShape shape;
  bool use_classifier = true;
  std::vector<TargetSpec> targets;  // one entry = fixed target

  void validate() const {
    if (num_batches < 2)
      throw std::invalid_argument("EnvConfig: need at least two batches");
    if (targets.empty())
      throw std::invalid_argument("EnvConfig: no target recalls configured");
  }
};

// observation layout: [0, B) per-batch relevant proportions (examined) or
// classifier estimates / -1 (unexamined); [B] examined count normalized by
// B; [B+1] the target recall.
struct EnvState {
  std::vector<double> observation;
  int examined = 1;  // batches examined so far
  TargetSpec target;
  bool terminal = false;
  std::optional<int> stop_batch;
};

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
};

// One topic's stopping episode. The agent sees batch-level relevance
// proportions as they are examined; a relevance classifier (retrained after
// every newly examined batch, on examined documents only) fills in the
// unexamined slots, or the dummy value -1 when disabled. An episode ends on
// STOP or on reaching the final batch; arrival at the final batch is itself
// terminal and its state reward is folded into that last transition, so the
// emitted rewards always sum to cumulative_reward(stop batch).
class StoppingEnv {
 public:
  // ranking (and features, when the classifier is enabled) must outlive the
  // environment. features may be null iff cfg.use_classifier is false.
  StoppingEnv(EnvConfig cfg, const BatchedRanking& ranking,
              const TopicFeatures* features = nullptr)
      : cfg_(std::move(cfg)), ranking_(&ranking), features_(features) {
    cfg_.validate();
    if (ranking.num_batches != cfg_.num_batches)
      throw std::invalid_argument(
          "StoppingEnv: ranking has " + std::to_string(ranking.num_batches) +
          " batches, config expects " + std::to_string(cfg_.num_batches));
    if (cfg_.use_classifier && !features_)
      throw std::invalid_argument(
          "StoppingEnv: classifier enabled but no features supplied");
  }

  const EnvConfig& config() const { return cfg_; }
  const BatchedRanking& ranking() const { return *ranking_; }
  const EnvState& state() const { return state_; }
  int observation_size() const { return cfg_.num_batches + 2; }

  // Target batch of the current episode; empty on topics with no relevant
  // documents (inference only — such episodes emit zero rewards).
  std::optional<int> episode_target_batch() const { return target_batch_; }

  const EnvState& reset(const TargetSpec& target) {
    begin_episode(target);
    return state_;
  }

  // Samples the target uniformly from the configured set.
  const EnvState& reset(Rng& rng) {
    const auto& ts = cfg_.targets;
    return reset(ts[static_cast<std::size_t>(rng.below(ts.size()))]);
  }

  StepOutcome step(Action action) {
    if (state_.terminal)
      throw std::logic_error("StoppingEnv::step: episode already ended");
    const int b = cfg_.num_batches;
    StepOutcome out;
    out.reward = state_reward(state_.examined);
    if (action == Action::Stop) {
      finish_episode(state_.examined);
    } else {
      advance_to(state_.examined + 1);
      if (state_.examined == b) {
        // No decision is possible at the final batch; terminate and credit
        // its state reward to this transition.
        out.reward += state_reward(b);
        finish_episode(b);
      }
    }
    out.done = state_.terminal;
    return out;
  }

  // Rank of the last document covered by the stopping decision.
  int stopping_rank() const {
    if (!state_.terminal)
      throw std::logic_error("StoppingEnv::stopping_rank: episode still open");
    return ranking_->bounds[static_cast<std::size_t>(*state_.stop_batch - 1)]
        .end_rank;
  }

 private:
  void begin_episode(const TargetSpec& target) {
    const int b = cfg_.num_batches;
    state_.observation.assign(static_cast<std::size_t>(b) + 2, 0.0);
    state_.examined = 1;
    state_.target = target;
    state_.terminal = false;
    state_.stop_batch.reset();
    classifier_ = RelevanceModel{};

    if (ranking_->topic.num_relevant >= 1) {
      target_batch_ = grlstop::target_batch(*ranking_, target);
      reward_.shape = cfg_.shape;
      reward_.num_batches = b;
      reward_.target_batch = *target_batch_;
    } else {
      target_batch_.reset();
    }

    state_.observation[0] = ranking_->batch_rel_proportion(1);
    refresh_unexamined();
    state_.observation[static_cast<std::size_t>(b)] = 1.0 / b;
    state_.observation[static_cast<std::size_t>(b) + 1] = target.value;
  }

  double state_reward(int batch) const {
    return target_batch_ ? step_reward(reward_, batch) : 0.0;
  }

  void advance_to(int examined) {
    state_.examined = examined;
    state_.observation[static_cast<std::size_t>(examined - 1)] =
        ranking_->batch_rel_proportion(examined);
    refresh_unexamined();
    state_.observation[static_cast<std::size_t>(cfg_.num_batches)] =
        static_cast<double>(examined) / cfg_.num_batches;
  }

  void finish_episode(int stop_batch) {
    state_.terminal = true;
    state_.stop_batch = stop_batch;
  }

  // Re-estimates every unexamined slot. The classifier only ever sees
  // judgments from examined batches, so nothing about unexamined labels can
  // leak into the observation.
  void refresh_unexamined() {
    const int b = cfg_.num_batches;
    const int examined = state_.examined;
    if (examined >= b) return;
    if (!cfg_.use_classifier) {
      for (int j = examined; j < b; ++j)
        state_.observation[static_cast<std::size_t>(j)] = kUnexaminedSlot;
      return;
    }
    const int examined_docs =
        ranking_->bounds[static_cast<std::size_t>(examined - 1)].end_rank;
    std::vector<LabeledVec> train;
    train.reserve(static_cast<std::size_t>(examined_docs));
    for (int r = 1; r <= examined_docs; ++r)
      train.push_back(
          {features_->doc_vecs[static_cast<std::size_t>(r - 1)],
           ranking_->topic.docs[static_cast<std::size_t>(r - 1)].relevant});
    classifier_ = fit_relevance(features_->dimensions(), train, &classifier_);
    const auto estimates =
        estimate_batches(classifier_, *features_, *ranking_, examined + 1);
    for (int j = examined; j < b; ++j)
      state_.observation[static_cast<std::size_t>(j)] =
          estimates[static_cast<std::size_t>(j - examined)];
  }

  EnvConfig cfg_;
  const BatchedRanking* ranking_;
  const TopicFeatures* features_;
  EnvState state_;
  std::optional<int> target_batch_;
  RewardParams reward_;
  RelevanceModel classifier_;  // warm start across steps of one episode
};

}  // namespace grlstop
