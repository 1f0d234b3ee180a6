// grlstop command line: synthetic corpora, policy training, evaluation and
// baseline comparison. Every command accepts --config FILE (key=value
// lines); command-line flags override the file, unknown keys are rejected,
// and the merged configuration is written next to the outputs.
//
// Each command is parsed by its own root CLI::App: CLI11 only processes
// config files on a root app, and per-command apps keep the config keys
// flat.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "grlstop/cli.hpp"

namespace {

void configure_common(CLI::App& app) {
  app.set_config("--config", "", "key=value configuration file");
  app.allow_config_extras(CLI::config_extras_mode::error);
}

void add_trainer_options(CLI::App& app, grlstop::TrainerConfig& t) {
  app.add_option("--epochs", t.epochs_per_update,
                 "optimizer epochs per rollout")
      ->capture_default_str();
  app.add_option("--gamma", t.discount, "discount factor")
      ->capture_default_str();
  app.add_option("--lr", t.learning_rate, "learning rate")
      ->capture_default_str();
  app.add_option("--hidden", t.hidden_width, "hidden layer width")
      ->capture_default_str();
  app.add_option("--rollout-steps", t.rollout_steps_per_env,
                 "steps per environment per rollout (default 10 with the "
                 "classifier, 100 without)")
      ->capture_default_str();
  app.add_option("--entropy-coef", t.entropy_coef,
                 "entropy bonus coefficient (default 0.1 with the "
                 "classifier, 0.001 without)")
      ->capture_default_str();
  app.add_option("--clip", t.clip_range, "surrogate clipping range")
      ->capture_default_str();
  app.add_option("--patience", t.early_stop_patience,
                 "rollouts without improvement before stopping")
      ->capture_default_str();
  app.add_option("--gae-lambda", t.gae_lambda, "advantage estimation lambda")
      ->capture_default_str();
  app.add_option("--value-coef", t.value_coef, "value loss coefficient")
      ->capture_default_str();
  app.add_option("--minibatch", t.minibatch_size, "minibatch size")
      ->capture_default_str();
  app.add_option("--steps", t.step_budget, "total environment step budget")
      ->capture_default_str();
  app.add_option("--max-grad-norm", t.max_grad_norm, "gradient clipping norm")
      ->capture_default_str();
  app.add_option("--threads", t.worker_threads,
                 "worker threads for rollout collection")
      ->capture_default_str();
}

int run_synth(int argc, char** argv) {
  CLI::App app{"generate a synthetic ranked corpus", "grlstop synth"};
  configure_common(app);
  grlstop::SynthOptions opts;
  double target_aurc = 0.0;
  app.add_option("--topics", opts.topics, "number of topics")
      ->capture_default_str();
  app.add_option("--docs", opts.docs, "documents per topic")
      ->capture_default_str();
  app.add_option("--prevalence", opts.prevalence,
                 "fraction of relevant documents")
      ->capture_default_str();
  app.add_option("--quality", opts.quality,
                 "ranking quality knob (0 = random order)")
      ->capture_default_str();
  auto* aurc_opt = app.add_option(
      "--target-aurc", target_aurc,
      "calibrate the quality knob to this mean AURC instead");
  app.add_option("--seed", opts.seed, "generation seed")->required();
  app.add_option("--out", opts.out_dir, "output directory")->required();
  app.add_flag("--overwrite", opts.overwrite, "replace existing corpus files");
  CLI11_PARSE(app, argc, argv);
  if (aurc_opt->count()) opts.target_aurc = target_aurc;
  opts.effective_config = app.config_to_str(true, false);
  grlstop::cmd_synth(opts, std::cout);
  return 0;
}

int run_train(int argc, char** argv) {
  CLI::App app{"train a generalised stopping policy", "grlstop train"};
  configure_common(app);
  grlstop::TrainOptions opts;
  app.add_option("--run", opts.run_path, "TREC run file")->required();
  app.add_option("--qrels", opts.qrels_path, "TREC qrels file")->required();
  app.add_option("--texts", opts.texts_path,
                 "document token file (docid<TAB>tokens)");
  app.add_option("--b", opts.num_batches, "batches per ranking")
      ->capture_default_str();
  app.add_option("-m,--reward-before-exp", opts.shape.before_exp,
                 "reward exponent before the target batch")
      ->capture_default_str();
  app.add_option("-n,--reward-after-exp", opts.shape.after_exp,
                 "reward exponent after the target batch")
      ->capture_default_str();
  app.add_option("--targets", opts.targets,
                 "target recalls sampled during training")
      ->delimiter(',')
      ->capture_default_str();
  app.add_flag("--classifier,!--no-classifier", opts.use_classifier,
               "estimate unexamined batches with a classifier (disable for "
               "the dummy -1 encoding)");
  app.add_option("--seed", opts.trainer.seed, "training seed")->required();
  app.add_option("--resume", opts.resume_path, "checkpoint to continue from");
  app.add_option("--out", opts.out_dir, "output directory")->required();
  add_trainer_options(app, opts.trainer);
  CLI11_PARSE(app, argc, argv);
  opts.rollout_steps_explicit = app.count("--rollout-steps") > 0;
  opts.entropy_coef_explicit = app.count("--entropy-coef") > 0;
  opts.effective_config = app.config_to_str(true, false);
  grlstop::cmd_train(opts, std::cout);
  return 0;
}

int run_eval(int argc, char** argv, bool compare) {
  CLI::App app{compare
                   ? "policy and baseline stopping rules on one table"
                   : "evaluate a trained policy (and optional baselines)",
               compare ? "grlstop compare" : "grlstop eval"};
  configure_common(app);
  grlstop::EvalOptions opts;
  if (compare) opts.methods = {"policy", "oracle", "knee", "tm"};
  app.add_option("--checkpoint", opts.checkpoint_path,
                 "trained policy checkpoint");
  app.add_option("--run", opts.run_path, "TREC run file")->required();
  app.add_option("--qrels", opts.qrels_path, "TREC qrels file")->required();
  app.add_option("--texts", opts.texts_path,
                 "document token file (needed by classifier checkpoints)");
  app.add_option("--b", opts.num_batches,
                 "batches per ranking (must match the checkpoint)");
  app.add_option("--targets", opts.targets,
                 "target recalls to evaluate (default: checkpoint's)")
      ->delimiter(',');
  app.add_option("--methods", opts.methods, "any of: policy,oracle,knee,tm")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--knee-threshold", opts.knee_threshold,
                 "knee slope-ratio threshold")
      ->capture_default_str();
  app.add_option("--tm-k", opts.tm_required,
                 "relevant documents the target method must sample")
      ->capture_default_str();
  app.add_option("--tm-seed", opts.tm_seed, "target method sampling seed")
      ->capture_default_str();
  app.add_flag("--export-curves", opts.export_curves,
               "write per-topic rank/recall CSVs");
  app.add_option("--threads", opts.worker_threads,
                 "worker threads across topics")
      ->capture_default_str();
  app.add_option("--out", opts.out_dir, "output directory")->required();
  CLI11_PARSE(app, argc, argv);
  opts.effective_config = app.config_to_str(true, false);
  grlstop::cmd_eval(opts, std::cout);
  return 0;
}

int run_inspect(int argc, char** argv) {
  CLI::App app{"print checkpoint metadata", "grlstop inspect-checkpoint"};
  std::string path;
  app.add_option("checkpoint", path, "checkpoint file")->required();
  CLI11_PARSE(app, argc, argv);
  grlstop::cmd_inspect_checkpoint(path, std::cout);
  return 0;
}

void print_usage(std::ostream& out) {
  out << "grlstop: reinforcement-learning stopping policies for ranked "
         "document review\n\n"
         "usage: grlstop <command> [options]\n\n"
         "commands:\n"
         "  synth               generate a synthetic ranked corpus\n"
         "  train               train a generalised stopping policy\n"
         "  eval                evaluate a trained policy (and baselines)\n"
         "  compare             policy and baselines on one table\n"
         "  inspect-checkpoint  print checkpoint metadata\n\n"
         "run 'grlstop <command> --help' for the command's options\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    print_usage(std::cerr);
    return 1;
  }
  const std::string command = argv[1];
  if (command == "-h" || command == "--help") {
    print_usage(std::cout);
    return 0;
  }
  try {
    if (command == "synth") return run_synth(argc - 1, argv + 1);
    if (command == "train") return run_train(argc - 1, argv + 1);
    if (command == "eval") return run_eval(argc - 1, argv + 1, false);
    if (command == "compare") return run_eval(argc - 1, argv + 1, true);
    if (command == "inspect-checkpoint")
      return run_inspect(argc - 1, argv + 1);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << "error: unknown command '" << command << "'\n";
  print_usage(std::cerr);
  return 1;
}
