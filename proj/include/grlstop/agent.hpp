#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "grlstop/common.hpp"
#include "grlstop/environment.hpp"
#include "grlstop/nets.hpp"

namespace grlstop {

// Actor (observation -> action distribution) and critic (observation ->
// state value), both two-hidden-layer tanh networks. Output index 0 is
// STOP, index 1 is CONTINUE.
struct PolicyNetwork {
  Mlp actor;
  Mlp critic;
  int obs_size = 0;
  int hidden = 0;

  static PolicyNetwork create(int obs_size, int hidden, std::uint64_t seed) {
    PolicyNetwork net;
    net.obs_size = obs_size;
    net.hidden = hidden;
    net.actor = Mlp({obs_size, hidden, hidden, 2});
    net.critic = Mlp({obs_size, hidden, hidden, 1});
    Rng rng(seed, 7);
    orthogonal_init(net.actor, std::sqrt(2.0), 0.01, rng);
    orthogonal_init(net.critic, std::sqrt(2.0), 1.0, rng);
    return net;
  }

  // P(STOP), P(CONTINUE)
  std::pair<double, double> action_probs(std::span<const double> obs) const {
    const auto logits = actor.forward(obs);
    double p0 = 0.0, p1 = 0.0;
    softmax2(logits[0], logits[1], p0, p1);
    return {p0, p1};
  }

  double value(std::span<const double> obs) const {
    return critic.forward(obs)[0];
  }
};

enum class ActionMode { Sample, Greedy };

// Greedy mode breaks exact ties in favour of STOP.
inline Action act(const PolicyNetwork& net, std::span<const double> obs,
                  ActionMode mode, Rng* rng = nullptr) {
  if (static_cast<int>(obs.size()) != net.obs_size)
    throw std::invalid_argument("act: observation has " +
                                std::to_string(obs.size()) +
                                " entries, policy expects " +
                                std::to_string(net.obs_size));
  const auto [p_stop, p_continue] = net.action_probs(obs);
  if (mode == ActionMode::Greedy)
    return p_stop >= p_continue ? Action::Stop : Action::Continue;
  if (!rng)
    throw std::invalid_argument("act: sampling requires a generator");
  return rng->uniform() < p_stop ? Action::Stop : Action::Continue;
}

// Hyperparameters. The first block mirrors the published configuration;
// rollout_steps_per_env and entropy_coef carry the classifier-on values and
// switch to 100 / 0.001 when the classifier is disabled (see
// apply_classifier_defaults). The second block holds conventional
// companions the original description leaves unstated.
struct TrainerConfig {
  int epochs_per_update = 10;
  double discount = 0.99;
  double learning_rate = 3e-4;
  int hidden_width = 64;
  int rollout_steps_per_env = 10;
  double entropy_coef = 0.1;
  double clip_range = 0.1;
  int early_stop_patience = 10;
  int n_parallel_envs = 0;  // 0: one per supplied environment
  std::uint64_t seed = 0;

  double gae_lambda = 0.95;
  double value_coef = 0.5;
  int minibatch_size = 64;
  long long step_budget = 200000;
  double max_grad_norm = 0.5;
  double improvement_tol = 1e-4;
  int worker_threads = 1;

  void validate() const {
    if (epochs_per_update < 1 || rollout_steps_per_env < 1 ||
        hidden_width < 1 || early_stop_patience < 1 || minibatch_size < 1 ||
        step_budget < 1)
      throw std::invalid_argument("TrainerConfig: counts must be positive");
    if (!(discount > 0.0) || !(learning_rate > 0.0) || !(clip_range > 0.0) ||
        !(entropy_coef > 0.0) || !(gae_lambda > 0.0) || !(value_coef > 0.0))
      throw std::invalid_argument("TrainerConfig: rates must be positive");
  }
};

inline void apply_classifier_defaults(TrainerConfig& cfg, bool use_classifier,
                                      bool rollout_explicit,
                                      bool entropy_explicit) {
  if (!use_classifier) {
    if (!rollout_explicit) cfg.rollout_steps_per_env = 100;
    if (!entropy_explicit) cfg.entropy_coef = 0.001;
  }
}

// ---------------------------------------------------------------------------
// PPO loss (clipped surrogate + value + entropy) over a flat sample batch.
// Exposed as loss / loss-with-gradient pair so the analytic gradient can be
// verified against finite differences.
// ---------------------------------------------------------------------------

struct PpoBatch {
  std::vector<std::vector<double>> obs;
  std::vector<int> actions;  // 0 = STOP, 1 = CONTINUE
  std::vector<double> old_logp;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return obs.size(); }
};

struct PpoSettings {
  double clip_range = 0.1;
  double entropy_coef = 0.1;
  double value_coef = 0.5;
};

struct PpoLossTerms {
  double policy = 0.0;   // clipped surrogate (minimized)
  double value = 0.0;    // mean squared value error
  double entropy = 0.0;  // mean action entropy
  double total = 0.0;    // policy + value_coef * value - entropy_coef * entropy
};

namespace detail {

struct SampleForward {
  double logits[2];
  double p[2];
  double logp[2];
  double value;
};

inline void ppo_forward_sample(const PolicyNetwork& net,
                               std::span<const double> obs, Mlp::Cache& ca,
                               Mlp::Cache& cc, SampleForward& f) {
  net.actor.forward(obs, ca);
  f.logits[0] = ca.activations.back()[0];
  f.logits[1] = ca.activations.back()[1];
  softmax2(f.logits[0], f.logits[1], f.p[0], f.p[1]);
  const double m = std::max(f.logits[0], f.logits[1]);
  const double lse =
      m + std::log(std::exp(f.logits[0] - m) + std::exp(f.logits[1] - m));
  f.logp[0] = f.logits[0] - lse;
  f.logp[1] = f.logits[1] - lse;
  net.critic.forward(obs, cc);
  f.value = cc.activations.back()[0];
}

}  // namespace detail

inline PpoLossTerms ppo_loss(const PolicyNetwork& net, const PpoBatch& batch,
                             const PpoSettings& s,
                             std::span<double> grad_actor = {},
                             std::span<double> grad_critic = {}) {
  const std::size_t count = batch.size();
  if (count == 0) throw std::invalid_argument("ppo_loss: empty batch");
  const bool with_grad = !grad_actor.empty();
  if (with_grad && (grad_actor.size() != net.actor.param_count() ||
                    grad_critic.size() != net.critic.param_count()))
    throw std::invalid_argument("ppo_loss: gradient buffers have wrong size");
  if (with_grad) {
    std::fill(grad_actor.begin(), grad_actor.end(), 0.0);
    std::fill(grad_critic.begin(), grad_critic.end(), 0.0);
  }

  PpoLossTerms terms;
  Mlp::Cache ca, cc;
  detail::SampleForward f;
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t k = 0; k < count; ++k) {
    detail::ppo_forward_sample(net, batch.obs[k], ca, cc, f);
    const int a = batch.actions[k];
    const double adv = batch.advantages[k];
    const double ratio = std::exp(f.logp[a] - batch.old_logp[k]);
    const double clipped =
        std::clamp(ratio, 1.0 - s.clip_range, 1.0 + s.clip_range);
    const double unclipped_obj = ratio * adv;
    const double clipped_obj = clipped * adv;
    const bool unclipped_active = unclipped_obj <= clipped_obj;
    terms.policy += -std::min(unclipped_obj, clipped_obj) * inv;

    const double entropy = -(f.p[0] * f.logp[0] + f.p[1] * f.logp[1]);
    terms.entropy += entropy * inv;

    const double verr = f.value - batch.returns[k];
    terms.value += verr * verr * inv;

    if (!with_grad) continue;

    const double d_logp_a = unclipped_active ? -adv * ratio * inv : 0.0;
    double dz[2];
    for (int j = 0; j < 2; ++j) {
      const double indicator = j == a ? 1.0 : 0.0;
      dz[j] = d_logp_a * (indicator - f.p[j]) +
              s.entropy_coef * f.p[j] * (f.logp[j] + entropy) * inv;
    }
    net.actor.backward(ca, std::span<const double>(dz, 2), grad_actor);

    const double dv = s.value_coef * 2.0 * verr * inv;
    net.critic.backward(cc, std::span<const double>(&dv, 1), grad_critic);
  }
  terms.total = terms.policy + s.value_coef * terms.value -
                s.entropy_coef * terms.entropy;
  return terms;
}

// ---------------------------------------------------------------------------
// Checkpoints: text header (format version, shapes, configs) followed by the
// raw little-endian float64 parameter arrays in declaration order.
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

struct PolicyCheckpoint {
  int version = kCheckpointVersion;
  EnvConfig env;
  TrainerConfig trainer;
  int rollouts_completed = 0;
  long long env_steps = 0;
  PolicyNetwork net;
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline void write_array_entry(std::ostream& out, const std::string& name,
                              const Mlp& mlp, std::size_t layer) {
  const int in = mlp.dims()[layer];
  const int out_dim = mlp.dims()[layer + 1];
  out << "array " << name << "." << layer << ".weight " << out_dim << ' ' << in
      << '\n';
  out << "array " << name << "." << layer << ".bias " << out_dim << '\n';
}

inline std::string join_targets(const std::vector<TargetSpec>& targets) {
  std::string s;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (i) s += ',';
    s += format_double(targets[i].value);
  }
  return s;
}

}  // namespace detail

inline void save_checkpoint(const PolicyCheckpoint& ckpt,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << "GRLSTOP-CKPT " << ckpt.version << '\n';
  out << "num_batches " << ckpt.env.num_batches << '\n';
  out << "use_classifier " << (ckpt.env.use_classifier ? 1 : 0) << '\n';
  out << "before_exp " << format_double(ckpt.env.shape.before_exp) << '\n';
  out << "after_exp " << format_double(ckpt.env.shape.after_exp) << '\n';
  out << "targets " << detail::join_targets(ckpt.env.targets) << '\n';
  const TrainerConfig& t = ckpt.trainer;
  out << "epochs_per_update " << t.epochs_per_update << '\n';
  out << "discount " << format_double(t.discount) << '\n';
  out << "learning_rate " << format_double(t.learning_rate) << '\n';
  out << "hidden_width " << t.hidden_width << '\n';
  out << "rollout_steps_per_env " << t.rollout_steps_per_env << '\n';
  out << "entropy_coef " << format_double(t.entropy_coef) << '\n';
  out << "clip_range " << format_double(t.clip_range) << '\n';
  out << "early_stop_patience " << t.early_stop_patience << '\n';
  out << "gae_lambda " << format_double(t.gae_lambda) << '\n';
  out << "value_coef " << format_double(t.value_coef) << '\n';
  out << "minibatch_size " << t.minibatch_size << '\n';
  out << "step_budget " << t.step_budget << '\n';
  out << "max_grad_norm " << format_double(t.max_grad_norm) << '\n';
  out << "improvement_tol " << format_double(t.improvement_tol) << '\n';
  out << "seed " << t.seed << '\n';
  out << "rollouts_completed " << ckpt.rollouts_completed << '\n';
  out << "env_steps " << ckpt.env_steps << '\n';
  out << "arrays " << 2 * (ckpt.net.actor.layer_count() +
                           ckpt.net.critic.layer_count())
      << '\n';
  for (std::size_t l = 0; l < ckpt.net.actor.layer_count(); ++l)
    detail::write_array_entry(out, "actor", ckpt.net.actor, l);
  for (std::size_t l = 0; l < ckpt.net.critic.layer_count(); ++l)
    detail::write_array_entry(out, "critic", ckpt.net.critic, l);
  out << "data\n";
  const auto dump = [&](const Mlp& mlp) {
    const auto p = mlp.params();
    out.write(reinterpret_cast<const char*>(p.data()),
              static_cast<std::streamsize>(p.size() * sizeof(double)));
  };
  dump(ckpt.net.actor);
  dump(ckpt.net.critic);
  if (!out) throw std::runtime_error("failed while writing checkpoint: " + path);
}

inline PolicyCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "GRLSTOP-CKPT")
    throw std::runtime_error(path + ": not a policy checkpoint");
  if (version != kCheckpointVersion)
    throw std::runtime_error(
        path + ": checkpoint format version " + std::to_string(version) +
        ", this build reads version " + std::to_string(kCheckpointVersion));

  PolicyCheckpoint ckpt;
  ckpt.version = version;
  std::string key;
  int arrays_expected = -1;
  while (in >> key && key != "data") {
    if (key == "num_batches") in >> ckpt.env.num_batches;
    else if (key == "use_classifier") {
      int v; in >> v; ckpt.env.use_classifier = v != 0;
    } else if (key == "before_exp") in >> ckpt.env.shape.before_exp;
    else if (key == "after_exp") in >> ckpt.env.shape.after_exp;
    else if (key == "targets") {
      std::string list;
      in >> list;
      std::stringstream ss(list);
      std::string item;
      while (std::getline(ss, item, ','))
        ckpt.env.targets.push_back(TargetSpec::parse(item));
    } else if (key == "epochs_per_update") in >> ckpt.trainer.epochs_per_update;
    else if (key == "discount") in >> ckpt.trainer.discount;
    else if (key == "learning_rate") in >> ckpt.trainer.learning_rate;
    else if (key == "hidden_width") in >> ckpt.trainer.hidden_width;
    else if (key == "rollout_steps_per_env")
      in >> ckpt.trainer.rollout_steps_per_env;
    else if (key == "entropy_coef") in >> ckpt.trainer.entropy_coef;
    else if (key == "clip_range") in >> ckpt.trainer.clip_range;
    else if (key == "early_stop_patience")
      in >> ckpt.trainer.early_stop_patience;
    else if (key == "gae_lambda") in >> ckpt.trainer.gae_lambda;
    else if (key == "value_coef") in >> ckpt.trainer.value_coef;
    else if (key == "minibatch_size") in >> ckpt.trainer.minibatch_size;
    else if (key == "step_budget") in >> ckpt.trainer.step_budget;
    else if (key == "max_grad_norm") in >> ckpt.trainer.max_grad_norm;
    else if (key == "improvement_tol") in >> ckpt.trainer.improvement_tol;
    else if (key == "seed") in >> ckpt.trainer.seed;
    else if (key == "rollouts_completed") in >> ckpt.rollouts_completed;
    else if (key == "env_steps") in >> ckpt.env_steps;
    else if (key == "arrays") in >> arrays_expected;
    else if (key == "array") {
      std::string rest;
      std::getline(in, rest);  // shapes are implied by the config fields
    } else {
      throw std::runtime_error(path + ": unknown checkpoint field '" + key +
                               "'");
    }
    if (!in) throw std::runtime_error(path + ": truncated checkpoint header");
  }
  if (key != "data")
    throw std::runtime_error(path + ": checkpoint has no data section");
  in.get();  // newline after "data"

  const int obs_size = ckpt.env.num_batches + 2;
  ckpt.net = PolicyNetwork::create(obs_size, ckpt.trainer.hidden_width, 0);
  const auto slurp = [&](Mlp& mlp) {
    auto p = mlp.params();
    in.read(reinterpret_cast<char*>(p.data()),
            static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (in.gcount() !=
        static_cast<std::streamsize>(p.size() * sizeof(double)))
      throw std::runtime_error(path + ": truncated checkpoint data");
  };
  slurp(ckpt.net.actor);
  slurp(ckpt.net.critic);
  return ckpt;
}

// ---------------------------------------------------------------------------
// Training loop: vectorized rollouts over per-topic environments, GAE,
// clipped-surrogate updates, early stopping on the rolling mean episode
// return, best-so-far weights returned.
// ---------------------------------------------------------------------------

struct RolloutLogRow {
  int rollout = 0;
  long long env_steps = 0;
  int episodes = 0;
  double mean_return = 0.0;
  double best_return = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  PolicyNetwork net;  // best-so-far weights
  std::vector<RolloutLogRow> log;
  int rollouts_completed = 0;
  long long env_steps = 0;
  double best_return = 0.0;
  bool early_stopped = false;
};

inline TrainResult train(std::vector<StoppingEnv>& envs,
                         const TrainerConfig& cfg,
                         const PolicyNetwork* resume_from = nullptr,
                         int rollout_offset = 0,
                         long long step_offset = 0) {
  cfg.validate();
  if (envs.empty()) throw std::invalid_argument("train: no environments");
  const int obs_size = envs.front().observation_size();
  for (const auto& e : envs) {
    if (e.observation_size() != obs_size)
      throw std::invalid_argument("train: environments disagree on batch count");
    if (e.ranking().topic.num_relevant < 1)
      throw std::invalid_argument("train: topic " + e.ranking().topic.topic_id +
                                  " has no relevant documents");
  }
  const int n_envs = static_cast<int>(envs.size());
  if (cfg.n_parallel_envs != 0 && cfg.n_parallel_envs != n_envs)
    throw std::invalid_argument("train: n_parallel_envs does not match the " +
                                std::to_string(n_envs) +
                                " supplied environments");

  PolicyNetwork net = resume_from
                          ? *resume_from
                          : PolicyNetwork::create(obs_size, cfg.hidden_width,
                                                  cfg.seed);
  if (net.obs_size != obs_size)
    throw std::invalid_argument("train: checkpoint observation size " +
                                std::to_string(net.obs_size) +
                                " does not match environments (" +
                                std::to_string(obs_size) + ")");
  Adam adam_actor(net.actor.param_count(), cfg.learning_rate);
  Adam adam_critic(net.critic.param_count(), cfg.learning_rate);

  std::vector<Rng> env_rngs;
  env_rngs.reserve(static_cast<std::size_t>(n_envs));
  for (int i = 0; i < n_envs; ++i)
    env_rngs.emplace_back(cfg.seed, 1000 + static_cast<std::uint64_t>(i));
  Rng shuffle_rng(cfg.seed, 999);

  for (int i = 0; i < n_envs; ++i)
    envs[static_cast<std::size_t>(i)].reset(env_rngs[static_cast<std::size_t>(i)]);
  std::vector<double> episode_return(static_cast<std::size_t>(n_envs), 0.0);

  const int steps = cfg.rollout_steps_per_env;
  const std::size_t samples =
      static_cast<std::size_t>(n_envs) * static_cast<std::size_t>(steps);
  PpoBatch batch;
  batch.obs.assign(samples, {});
  batch.actions.assign(samples, 0);
  batch.old_logp.assign(samples, 0.0);
  batch.advantages.assign(samples, 0.0);
  batch.returns.assign(samples, 0.0);
  std::vector<double> values(samples, 0.0);
  std::vector<double> rewards(samples, 0.0);
  std::vector<std::uint8_t> dones(samples, 0);
  std::vector<Action> pending(static_cast<std::size_t>(n_envs), Action::Stop);
  std::vector<StepOutcome> outcomes(static_cast<std::size_t>(n_envs));

  TrainResult result;
  result.best_return = -std::numeric_limits<double>::infinity();
  PolicyNetwork best_net = net;
  int rollouts_without_improvement = 0;
  long long steps_done = 0;

  std::vector<double> grad_actor(net.actor.param_count(), 0.0);
  std::vector<double> grad_critic(net.critic.param_count(), 0.0);
  const PpoSettings settings{cfg.clip_range, cfg.entropy_coef, cfg.value_coef};

  int rollout = rollout_offset;
  while (steps_done < cfg.step_budget) {
    ++rollout;
    const PolicyNetwork rollout_net = net;  // policy that collects this data
    std::vector<double> finished_returns;

    for (int t = 0; t < steps; ++t) {
      for (int i = 0; i < n_envs; ++i) {
        const std::size_t k = static_cast<std::size_t>(i) * steps +
                              static_cast<std::size_t>(t);
        auto& env = envs[static_cast<std::size_t>(i)];
        batch.obs[k] = env.state().observation;
        const auto logits = net.actor.forward(batch.obs[k]);
        double p0 = 0.0, p1 = 0.0;
        softmax2(logits[0], logits[1], p0, p1);
        const bool stop =
            env_rngs[static_cast<std::size_t>(i)].uniform() < p0;
        pending[static_cast<std::size_t>(i)] =
            stop ? Action::Stop : Action::Continue;
        batch.actions[k] = stop ? 0 : 1;
        batch.old_logp[k] = std::log(stop ? p0 : p1);
        values[k] = net.value(batch.obs[k]);
      }
      parallel_for(n_envs, cfg.worker_threads, [&](int i) {
        outcomes[static_cast<std::size_t>(i)] =
            envs[static_cast<std::size_t>(i)].step(
                pending[static_cast<std::size_t>(i)]);
      });
      for (int i = 0; i < n_envs; ++i) {
        const std::size_t k = static_cast<std::size_t>(i) * steps +
                              static_cast<std::size_t>(t);
        const auto& out = outcomes[static_cast<std::size_t>(i)];
        rewards[k] = out.reward;
        dones[k] = out.done ? 1 : 0;
        episode_return[static_cast<std::size_t>(i)] += out.reward;
        if (out.done) {
          finished_returns.push_back(
              episode_return[static_cast<std::size_t>(i)]);
          episode_return[static_cast<std::size_t>(i)] = 0.0;
          envs[static_cast<std::size_t>(i)].reset(
              env_rngs[static_cast<std::size_t>(i)]);
        }
      }
    }
    steps_done += static_cast<long long>(samples);

    // Generalized advantage estimation per environment stream.
    for (int i = 0; i < n_envs; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * steps;
      double next_value =
          net.value(envs[static_cast<std::size_t>(i)].state().observation);
      double gae = 0.0;
      for (int t = steps - 1; t >= 0; --t) {
        const std::size_t k = base + static_cast<std::size_t>(t);
        const double nonterminal = dones[k] ? 0.0 : 1.0;
        const double delta =
            rewards[k] + cfg.discount * next_value * nonterminal - values[k];
        gae = delta + cfg.discount * cfg.gae_lambda * nonterminal * gae;
        batch.advantages[k] = gae;
        batch.returns[k] = gae + values[k];
        next_value = values[k];
      }
    }
    if (samples > 1) {
      double mean = 0.0;
      for (const double a : batch.advantages) mean += a;
      mean /= static_cast<double>(samples);
      double var = 0.0;
      for (const double a : batch.advantages) var += (a - mean) * (a - mean);
      const double sd = std::sqrt(var / static_cast<double>(samples - 1));
      for (auto& a : batch.advantages) a = (a - mean) / (sd + 1e-8);
    }

    // Clipped-surrogate updates over shuffled minibatches.
    double sum_policy = 0.0, sum_value = 0.0, sum_entropy = 0.0;
    int updates = 0;
    std::vector<std::size_t> order(samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    PpoBatch mini;
    for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
      for (std::size_t j = samples; j > 1; --j)
        std::swap(order[j - 1], order[shuffle_rng.below(j)]);
      for (std::size_t start = 0; start < samples;
           start += static_cast<std::size_t>(cfg.minibatch_size)) {
        const std::size_t stop_idx = std::min(
            samples, start + static_cast<std::size_t>(cfg.minibatch_size));
        const std::size_t mb = stop_idx - start;
        mini.obs.resize(mb);
        mini.actions.resize(mb);
        mini.old_logp.resize(mb);
        mini.advantages.resize(mb);
        mini.returns.resize(mb);
        for (std::size_t j = 0; j < mb; ++j) {
          const std::size_t k = order[start + j];
          mini.obs[j] = batch.obs[k];
          mini.actions[j] = batch.actions[k];
          mini.old_logp[j] = batch.old_logp[k];
          mini.advantages[j] = batch.advantages[k];
          mini.returns[j] = batch.returns[k];
        }
        const auto terms =
            ppo_loss(net, mini, settings, grad_actor, grad_critic);
        if (!std::isfinite(terms.total))
          throw std::runtime_error(
              "train: loss diverged (non-finite) at rollout " +
              std::to_string(rollout));
        double norm_sq = 0.0;
        for (const double g : grad_actor) norm_sq += g * g;
        for (const double g : grad_critic) norm_sq += g * g;
        const double norm = std::sqrt(norm_sq);
        if (norm > cfg.max_grad_norm) {
          const double scale = cfg.max_grad_norm / norm;
          for (auto& g : grad_actor) g *= scale;
          for (auto& g : grad_critic) g *= scale;
        }
        adam_actor.step(net.actor.params(), grad_actor);
        adam_critic.step(net.critic.params(), grad_critic);
        sum_policy += terms.policy;
        sum_value += terms.value;
        sum_entropy += terms.entropy;
        ++updates;
      }
    }

    RolloutLogRow row;
    row.rollout = rollout;
    row.env_steps = step_offset + steps_done;
    row.episodes = static_cast<int>(finished_returns.size());
    row.mean_return =
        finished_returns.empty()
            ? std::numeric_limits<double>::quiet_NaN()
            : std::accumulate(finished_returns.begin(),
                              finished_returns.end(), 0.0) /
                  static_cast<double>(finished_returns.size());
    row.policy_loss = sum_policy / updates;
    row.value_loss = sum_value / updates;
    row.entropy = sum_entropy / updates;

    if (!finished_returns.empty()) {
      if (row.mean_return > result.best_return + cfg.improvement_tol) {
        result.best_return = row.mean_return;
        best_net = rollout_net;
        rollouts_without_improvement = 0;
      } else {
        ++rollouts_without_improvement;
      }
    }
    row.best_return = result.best_return;
    result.log.push_back(row);

    if (rollouts_without_improvement >= cfg.early_stop_patience) {
      result.early_stopped = true;
      break;
    }
  }

  result.net = std::isfinite(result.best_return) ? best_net : net;
  result.rollouts_completed = rollout;
  result.env_steps = step_offset + steps_done;
  return result;
}

}  // namespace grlstop
