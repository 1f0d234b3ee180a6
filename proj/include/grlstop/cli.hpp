#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "grlstop/agent.hpp"
#include "grlstop/baselines.hpp"
#include "grlstop/classifier.hpp"
#include "grlstop/common.hpp"
#include "grlstop/corpus.hpp"
#include "grlstop/environment.hpp"
#include "grlstop/eval.hpp"
#include "grlstop/reward.hpp"

namespace grlstop {

namespace detail {

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

inline void persist_effective_config(const std::filesystem::path& out_dir,
                                     const std::string& dump) {
  if (!dump.empty()) write_text_file(out_dir / "effective_config.ini", dump);
}

inline std::vector<TargetSpec> parse_targets(const std::vector<double>& raw) {
  std::vector<TargetSpec> targets;
  targets.reserve(raw.size());
  for (const double v : raw) targets.push_back(TargetSpec::from_double(v));
  return targets;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// synth: write a synthetic corpus (run + qrels + token text) and report the
// per-topic AURC.
// ---------------------------------------------------------------------------

struct SynthOptions {
  int topics = 10;
  int docs = 2000;
  double prevalence = 0.02;
  double quality = 10.0;
  std::optional<double> target_aurc;  // overrides quality via calibration
  std::uint64_t seed = 0;
  std::string out_dir;
  bool overwrite = false;
  std::string effective_config;
};

inline void cmd_synth(const SynthOptions& opts, std::ostream& log) {
  namespace fs = std::filesystem;
  if (opts.out_dir.empty())
    throw std::invalid_argument("synth: output directory required");
  const fs::path dir(opts.out_dir);
  fs::create_directories(dir);
  const fs::path run = dir / "run.txt";
  const fs::path qrels = dir / "qrels.txt";
  const fs::path texts = dir / "texts.tsv";
  if (!opts.overwrite)
    for (const auto& p : {run, qrels, texts})
      if (fs::exists(p))
        throw std::runtime_error("synth: " + p.string() +
                                 " exists (use --overwrite to replace)");

  SyntheticSpec spec;
  spec.num_topics = opts.topics;
  spec.num_docs = opts.docs;
  spec.prevalence = opts.prevalence;
  spec.seed = opts.seed;
  spec.quality = opts.target_aurc
                     ? calibrate_quality(opts.docs, opts.prevalence,
                                         *opts.target_aurc, opts.seed)
                     : opts.quality;
  const auto topics = generate_synthetic(spec);
  save_run_and_qrels(topics, run.string(), qrels.string());
  save_texts(topics, texts.string());
  detail::persist_effective_config(dir, opts.effective_config);

  double sum = 0.0;
  for (const auto& t : topics) {
    const double a = aurc(t);
    sum += a;
    log << t.topic_id << " aurc " << format_fixed(a) << '\n';
  }
  log << "mean aurc " << format_fixed(sum / static_cast<double>(topics.size()))
      << " (quality " << format_double(spec.quality) << ")\n";
}

// ---------------------------------------------------------------------------
// train: one generalised model over every usable topic and the configured
// target recalls.
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string run_path;
  std::string qrels_path;
  std::string texts_path;  // required when the classifier is enabled
  int num_batches = 100;
  RewardShape shape;
  std::vector<double> targets = {0.7, 0.8, 0.9, 1.0};
  bool use_classifier = true;
  TrainerConfig trainer;
  bool rollout_steps_explicit = false;
  bool entropy_coef_explicit = false;
  std::string resume_path;
  std::string out_dir;
  std::string effective_config;
};

struct TrainOutputs {
  std::string checkpoint_path;
  std::string log_path;
  TrainResult result;
};

inline void write_training_log(const std::string& path,
                               const std::vector<RolloutLogRow>& rows,
                               bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::out);
  if (!out) throw std::runtime_error("cannot write training log: " + path);
  if (!append)
    out << "rollout,env_steps,episodes,mean_return,best_return,policy_loss,"
           "value_loss,entropy\n";
  for (const auto& r : rows) {
    out << r.rollout << ',' << r.env_steps << ',' << r.episodes << ','
        << format_double(r.mean_return) << ',' << format_double(r.best_return)
        << ',' << format_double(r.policy_loss) << ','
        << format_double(r.value_loss) << ',' << format_double(r.entropy)
        << '\n';
  }
}

inline TrainOutputs cmd_train(const TrainOptions& opts, std::ostream& log) {
  namespace fs = std::filesystem;
  if (opts.out_dir.empty())
    throw std::invalid_argument("train: output directory required");
  if (opts.targets.empty())
    throw std::invalid_argument("train: at least one target recall required");

  auto topics = load_run_and_qrels(opts.run_path, opts.qrels_path, &log);
  if (opts.use_classifier) {
    if (opts.texts_path.empty())
      throw std::invalid_argument(
          "train: the classifier needs document text (--texts)");
    attach_texts(topics, load_texts(opts.texts_path), /*require_all=*/true);
  }

  std::vector<RankedTopic> usable;
  for (auto& t : topics) {
    if (t.num_relevant < 1) {
      log << "warning: excluding topic " << t.topic_id
          << " from training (no relevant documents)\n";
      continue;
    }
    usable.push_back(std::move(t));
  }
  if (usable.empty())
    throw std::runtime_error("train: no topic has relevant documents");

  EnvConfig env_cfg;
  env_cfg.num_batches = opts.num_batches;
  env_cfg.shape = opts.shape;
  env_cfg.use_classifier = opts.use_classifier;
  env_cfg.targets = detail::parse_targets(opts.targets);

  std::vector<BatchedRanking> rankings;
  rankings.reserve(usable.size());
  for (auto& t : usable) {
    auto br = make_batches(std::move(t), opts.num_batches);
    if (br.num_batches != opts.num_batches)
      throw std::runtime_error(
          "train: topic " + br.topic.topic_id + " has only " +
          std::to_string(br.topic.size()) + " documents, which yields " +
          std::to_string(br.num_batches) + " batches instead of " +
          std::to_string(opts.num_batches));
    rankings.push_back(std::move(br));
  }
  std::vector<TopicFeatures> features;
  if (opts.use_classifier) {
    features.resize(rankings.size());
    parallel_for(static_cast<int>(rankings.size()),
                 opts.trainer.worker_threads, [&](int i) {
                   features[static_cast<std::size_t>(i)] = TopicFeatures::build(
                       rankings[static_cast<std::size_t>(i)].topic);
                 });
  }

  TrainerConfig trainer = opts.trainer;
  apply_classifier_defaults(trainer, opts.use_classifier,
                            opts.rollout_steps_explicit,
                            opts.entropy_coef_explicit);

  std::vector<StoppingEnv> envs;
  envs.reserve(rankings.size());
  for (std::size_t i = 0; i < rankings.size(); ++i)
    envs.emplace_back(env_cfg, rankings[i],
                      opts.use_classifier ? &features[i] : nullptr);

  std::optional<PolicyCheckpoint> resume;
  if (!opts.resume_path.empty()) {
    resume = load_checkpoint(opts.resume_path);
    if (resume->env.num_batches != opts.num_batches)
      throw std::runtime_error(
          "train: resume checkpoint was trained with " +
          std::to_string(resume->env.num_batches) + " batches, requested " +
          std::to_string(opts.num_batches));
    if (resume->trainer.hidden_width != trainer.hidden_width)
      throw std::runtime_error("train: resume checkpoint hidden width " +
                               std::to_string(resume->trainer.hidden_width) +
                               " differs from requested " +
                               std::to_string(trainer.hidden_width));
  }

  TrainOutputs outputs;
  outputs.result =
      resume ? train(envs, trainer, &resume->net, resume->rollouts_completed,
                     resume->env_steps)
             : train(envs, trainer);

  fs::create_directories(opts.out_dir);
  const fs::path dir(opts.out_dir);
  outputs.checkpoint_path = (dir / "policy.ckpt").string();
  outputs.log_path = (dir / "training_log.csv").string();

  PolicyCheckpoint ckpt;
  ckpt.env = env_cfg;
  ckpt.trainer = trainer;
  ckpt.rollouts_completed = outputs.result.rollouts_completed;
  ckpt.env_steps = outputs.result.env_steps;
  ckpt.net = outputs.result.net;
  save_checkpoint(ckpt, outputs.checkpoint_path);
  write_training_log(outputs.log_path, outputs.result.log, /*append=*/false);
  detail::persist_effective_config(dir, opts.effective_config);

  log << "trained " << outputs.result.rollouts_completed << " rollouts, "
      << outputs.result.env_steps << " env steps, best mean return "
      << format_double(outputs.result.best_return)
      << (outputs.result.early_stopped ? " (early stop)\n" : "\n");
  return outputs;
}

// ---------------------------------------------------------------------------
// eval / compare: run the policy (greedily) and any requested baseline over
// each (topic, target) pair, score everything, emit CSVs.
// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string checkpoint_path;  // may be empty when only baselines run
  std::string run_path;
  std::string qrels_path;
  std::string texts_path;
  int num_batches = 0;  // 0: follow the checkpoint
  std::vector<double> targets;  // empty: follow the checkpoint
  std::vector<std::string> methods = {"policy"};
  double knee_threshold = 6.0;
  int tm_required = 10;
  std::uint64_t tm_seed = 0;
  bool export_curves = false;
  int worker_threads = 1;
  std::string out_dir;
  std::string effective_config;
};

struct EvalOutputs {
  std::string results_path;
  std::string summary_path;
  std::vector<TopicResult> results;
  std::vector<SummaryRow> summary;
};

inline EvalOutputs cmd_eval(const EvalOptions& opts, std::ostream& log) {
  namespace fs = std::filesystem;
  if (opts.out_dir.empty())
    throw std::invalid_argument("eval: output directory required");
  if (opts.methods.empty())
    throw std::invalid_argument("eval: no methods requested");

  const bool wants_policy =
      std::find(opts.methods.begin(), opts.methods.end(), "policy") !=
      opts.methods.end();
  for (const auto& m : opts.methods)
    if (m != "policy" && m != "oracle" && m != "knee" && m != "tm")
      throw std::invalid_argument("eval: unknown method '" + m + "'");

  std::optional<PolicyCheckpoint> ckpt;
  if (wants_policy) {
    if (opts.checkpoint_path.empty())
      throw std::invalid_argument("eval: the policy method needs --checkpoint");
    ckpt = load_checkpoint(opts.checkpoint_path);
    if (opts.num_batches != 0 && opts.num_batches != ckpt->env.num_batches)
      throw std::runtime_error(
          "eval: requested " + std::to_string(opts.num_batches) +
          " batches but the checkpoint was trained with " +
          std::to_string(ckpt->env.num_batches));
  }

  std::vector<TargetSpec> targets;
  if (!opts.targets.empty()) {
    targets = detail::parse_targets(opts.targets);
  } else if (ckpt) {
    targets = ckpt->env.targets;
  } else {
    throw std::invalid_argument("eval: no target recalls given");
  }

  auto topics = load_run_and_qrels(opts.run_path, opts.qrels_path, &log);
  const bool need_text = ckpt && ckpt->env.use_classifier;
  if (need_text) {
    if (opts.texts_path.empty())
      throw std::invalid_argument(
          "eval: this checkpoint uses the classifier; document text required "
          "(--texts)");
    attach_texts(topics, load_texts(opts.texts_path), /*require_all=*/true);
  }
  std::vector<RankedTopic> usable;
  for (auto& t : topics) {
    if (t.num_relevant < 1) {
      log << "warning: skipping topic " << t.topic_id
          << " (no relevant documents to score against)\n";
      continue;
    }
    usable.push_back(std::move(t));
  }
  if (usable.empty()) throw std::runtime_error("eval: nothing to evaluate");

  std::vector<BatchedRanking> rankings;
  std::vector<TopicFeatures> features;
  if (wants_policy) {
    rankings.reserve(usable.size());
    for (const auto& t : usable) {
      auto br = make_batches(t, ckpt->env.num_batches);
      if (br.num_batches != ckpt->env.num_batches)
        throw std::runtime_error(
            "eval: topic " + t.topic_id + " yields " +
            std::to_string(br.num_batches) + " batches, checkpoint needs " +
            std::to_string(ckpt->env.num_batches));
      rankings.push_back(std::move(br));
    }
    if (need_text) {
      features.resize(usable.size());
      parallel_for(static_cast<int>(usable.size()), opts.worker_threads,
                   [&](int i) {
                     features[static_cast<std::size_t>(i)] =
                         TopicFeatures::build(
                             usable[static_cast<std::size_t>(i)]);
                   });
    }
  }

  struct Job {
    std::size_t topic_idx;
    TargetSpec target;
    std::string method;
  };
  std::vector<Job> jobs;
  for (const auto& method : opts.methods)
    for (std::size_t ti = 0; ti < usable.size(); ++ti)
      for (const auto& t : targets) jobs.push_back({ti, t, method});

  std::vector<TopicResult> results(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), opts.worker_threads, [&](int j) {
    const Job& job = jobs[static_cast<std::size_t>(j)];
    const RankedTopic& topic = usable[job.topic_idx];
    StopDecision decision;
    if (job.method == "policy") {
      StoppingEnv env(ckpt->env, rankings[job.topic_idx],
                      need_text ? &features[job.topic_idx] : nullptr);
      env.reset(job.target);
      while (!env.state().terminal)
        env.step(act(ckpt->net, env.state().observation, ActionMode::Greedy));
      decision.method = "grlstop";
      decision.stop_batch = env.state().stop_batch;
      decision.stop_rank = env.stopping_rank();
      decision.examined_count = decision.stop_rank;
    } else if (job.method == "oracle") {
      decision = oracle_stop(topic, job.target);
    } else if (job.method == "knee") {
      decision = knee_stop(topic, KneeParams{opts.knee_threshold});
    } else {
      decision = target_method_stop(topic, job.target, opts.tm_required,
                                    opts.tm_seed +
                                        static_cast<std::uint64_t>(
                                            job.topic_idx));
    }
    results[static_cast<std::size_t>(j)] =
        score_topic(topic, job.target, decision);
  });

  fs::create_directories(opts.out_dir);
  const fs::path dir(opts.out_dir);
  EvalOutputs out;
  out.results_path = (dir / "results.csv").string();
  out.summary_path = (dir / "summary.csv").string();
  out.results = std::move(results);
  sort_results(out.results);
  out.summary = aggregate(out.results);
  write_results_csv(out.results_path, out.results);
  write_summary_csv(out.summary_path, out.summary);
  if (opts.export_curves) {
    const fs::path curves = dir / "curves";
    fs::create_directories(curves);
    for (const auto& t : usable)
      write_recall_curve_csv((curves / (t.topic_id + ".csv")).string(), t);
  }
  detail::persist_effective_config(dir, opts.effective_config);

  for (const auto& row : out.summary)
    log << row.method << " target " << format_double(row.target) << ": recall "
        << format_fixed(row.recall) << " reliability "
        << format_fixed(row.reliability) << " cost " << format_fixed(row.cost)
        << " cost_diff " << format_fixed(row.cost_diff) << " (" << row.topics
        << " topics)\n";
  return out;
}

inline void cmd_inspect_checkpoint(const std::string& path,
                                   std::ostream& log) {
  const auto ckpt = load_checkpoint(path);
  log << "checkpoint version " << ckpt.version << '\n'
      << "batches " << ckpt.env.num_batches << '\n'
      << "classifier " << (ckpt.env.use_classifier ? "on" : "off") << '\n'
      << "reward exponents " << format_double(ckpt.env.shape.before_exp)
      << " / " << format_double(ckpt.env.shape.after_exp) << '\n';
  log << "targets";
  for (const auto& t : ckpt.env.targets) log << ' ' << format_double(t.value);
  log << '\n'
      << "hidden width " << ckpt.trainer.hidden_width << '\n'
      << "seed " << ckpt.trainer.seed << '\n'
      << "rollouts completed " << ckpt.rollouts_completed << '\n'
      << "env steps " << ckpt.env_steps << '\n'
      << "actor parameters " << ckpt.net.actor.param_count() << '\n'
      << "critic parameters " << ckpt.net.critic.param_count() << '\n';
}

}  // namespace grlstop
