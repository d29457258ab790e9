// Command-line harness: plan | train | evaluate | study.
//
// Substream allocation (all phases derive from the config seed):
//   weight init   (WeightInit, level, 0)
//   batch data    (TrainData, level, step * batch + sample)
//   pilot         (Pilot, level, sample)
//   test points   (Evaluation, 0, point)
//   studies       (Study, level, purpose index)
// Exit status: 0 success, 1 validation error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mlmc/io.hpp"
#include "mlmc/oracle.hpp"
#include "mlmc/planner.hpp"
#include "mlmc/trainer.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_override;
  std::string seed_override;
  int threads_override = -1;
};

mlmc::ExperimentConfig load_config(const CommonFlags& flags) {
  mlmc::ExperimentConfig config = mlmc::parse_config_file(flags.config_path);
  if (!flags.out_override.empty()) config.out_dir = flags.out_override;
  if (!flags.seed_override.empty())
    config.seed = std::stoull(flags.seed_override);
  if (flags.threads_override > 0) config.threads = flags.threads_override;
  std::filesystem::create_directories(config.out_dir);
  return config;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config file")
      ->required();
  cmd->add_option("--out", flags.out_override, "output directory override");
  cmd->add_option("--seed", flags.seed_override, "seed override");
  cmd->add_option("--threads", flags.threads_override,
                  "worker threads (never changes results)");
}

mlmc::PlanRequest plan_request(const mlmc::ExperimentConfig& config) {
  mlmc::PlanRequest req;
  req.planner.epsilon = config.epsilon;
  req.planner.n_pilot = config.pilot;
  req.planner.refinement = config.refinement;
  req.planner.base_steps = config.base_steps;
  req.planner.alpha = config.alpha;
  req.planner.level_cap = config.level_cap;
  req.planner.seed = config.seed;
  req.planner.n_threads = config.threads;
  req.point = config.resolved_plan_point();
  req.m0 = config.m0;
  req.k0 = config.k0;
  if (!config.k_table.empty()) {
    req.steps_mode = mlmc::StepsMode::Table;
    req.k_table = config.k_table;
  }
  if (config.plan_mode == "box_average") {
    req.average_over_box = true;
    req.box = config.box;
  }
  return req;
}

int cmd_plan(const CommonFlags& flags) {
  mlmc::ExperimentConfig config = load_config(flags);
  mlmc::AllocationPlan plan = mlmc::make_plan(plan_request(config));
  std::string path = config.resolved_plan_file();
  mlmc::write_plan_csv_file(path, plan);
  mlmc::write_plan_csv(std::cout, plan);
  std::cerr << "plan written to " << path << "\n";
  return 0;
}

void report_evaluation(const mlmc::ExperimentConfig& config,
                       const mlmc::Evaluator& approx, const std::string& csv_path) {
  mlmc::ErrorReport report = mlmc::measure_error(approx, config.box, config.n_test,
                                                 config.seed, config.threads);
  mlmc::write_error_report_csv(csv_path, report);
  std::cout << "n_test=" << report.n_test << " linf=" << mlmc::format_real(report.linf)
            << " l1=" << mlmc::format_real(report.l1) << "\n";
  auto p = report.argmax_point.as_array();
  std::cout << "argmax at (mu,sigma,s0,T,K) = (";
  for (int i = 0; i < mlmc::kParamDim; ++i)
    std::cout << (i ? "," : "") << mlmc::format_real(p[static_cast<std::size_t>(i)]);
  std::cout << ")\n";
}

int cmd_train(const CommonFlags& flags, const std::string& mode) {
  mlmc::ExperimentConfig config = load_config(flags);
  mlmc::TrainConfig train = mlmc::to_train_config(config);

  try {
    if (mode == "single") {
      mlmc::TrainedNet net = mlmc::train_single_level(train);
      std::string weights_path = config.out_dir + "/net_single.txt";
      mlmc::save_networks(weights_path, {net});
      mlmc::write_training_log_csv(
          config.out_dir + "/train_log_l" + std::to_string(train.level_spec.level) +
              ".csv",
          net.log);
      std::cerr << "weights written to " << weights_path << "\n";
      report_evaluation(config,
                        [&](const mlmc::ParamVector& y) { return net.evaluate(y); },
                        config.out_dir + "/error_report.csv");
      return 0;
    }
    if (mode == "multilevel") {
      mlmc::AllocationPlan plan = mlmc::read_plan_csv(config.resolved_plan_file());
      mlmc::MultilevelNet net = mlmc::train_multilevel(
          plan, train, [&](int level, const mlmc::TrainedNet& trained) {
            mlmc::write_training_log_csv(
                config.out_dir + "/train_log_l" + std::to_string(level) + ".csv",
                trained.log);
          });
      std::string weights_path = config.out_dir + "/net_multilevel.txt";
      mlmc::save_networks(weights_path, net.nets);
      std::cerr << "weights written to " << weights_path << "\n";
      report_evaluation(
          config,
          [&](const mlmc::ParamVector& y) { return mlmc::evaluate_multilevel(net, y); },
          config.out_dir + "/error_report.csv");
      return 0;
    }
  } catch (const mlmc::TrainingError& e) {
    // Keep whatever the aborted run logged before rethrowing for exit code 2.
    mlmc::write_training_log_csv(config.out_dir + "/train_log_l" +
                                     std::to_string(e.level) + ".partial.csv",
                                 e.partial_log);
    throw;
  }
  throw std::invalid_argument("train: --mode must be single or multilevel");
}

int cmd_evaluate(const CommonFlags& flags, const std::string& weights_path) {
  mlmc::ExperimentConfig config = load_config(flags);
  std::vector<mlmc::TrainedNet> nets = mlmc::load_networks(weights_path);
  mlmc::MultilevelNet net{std::move(nets),
                          {config.level, config.refinement, config.base_steps}};
  report_evaluation(
      config,
      [&](const mlmc::ParamVector& y) { return mlmc::evaluate_multilevel(net, y); },
      config.out_dir + "/error_report.csv");
  return 0;
}

int cmd_study(const CommonFlags& flags, const std::string& which) {
  mlmc::ExperimentConfig config = load_config(flags);
  mlmc::TrainConfig train = mlmc::to_train_config(config);
  std::ostringstream table;

  if (which == "batch_convergence") {
    auto rows = mlmc::batch_convergence_study(config.box, config.study_batches,
                                              config.study_reps, train, config.n_test);
    mlmc::write_batch_study_csv(table, rows);
  } else if (which == "variance_reduction") {
    auto report = mlmc::variance_reduction_study(config.box, config.batch,
                                                 config.study_reps, train,
                                                 config.n_test);
    mlmc::write_variance_study_csv(table, report);
  } else if (which == "slope_fits") {
    auto report = mlmc::slope_fit_study(config.resolved_plan_point(), config.pilot,
                                        config.pilot, config.seed, config.threads);
    mlmc::write_slope_study_csv(table, report);
  } else {
    throw std::invalid_argument(
        "study: --which must be batch_convergence, variance_reduction or slope_fits");
  }

  std::string path = config.out_dir + "/study_" + which + ".csv";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write study file: " + path);
  out << table.str();
  std::cout << table.str();
  std::cerr << "study written to " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multilevel Monte Carlo learning harness"};
  app.require_subcommand(1);

  CommonFlags plan_flags, train_flags, eval_flags, study_flags;
  std::string train_mode = "single";
  std::string weights_path;
  std::string study_which;

  CLI::App* plan = app.add_subcommand("plan", "estimate level stats and write the allocation plan");
  add_common(plan, plan_flags);

  CLI::App* train = app.add_subcommand("train", "train the surrogate network(s)");
  add_common(train, train_flags);
  train->add_option("--mode", train_mode, "single | multilevel");

  CLI::App* evaluate = app.add_subcommand("evaluate", "measure a stored network against the closed form");
  add_common(evaluate, eval_flags);
  evaluate->add_option("--weights", weights_path, "weights file")->required();

  CLI::App* study = app.add_subcommand("study", "run a canned study and write its table");
  add_common(study, study_flags);
  study->add_option("--which", study_which,
                    "batch_convergence | variance_reduction | slope_fits")
      ->required();

  try {
    app.parse(argc, argv);
    if (plan->parsed()) return cmd_plan(plan_flags);
    if (train->parsed()) return cmd_train(train_flags, train_mode);
    if (evaluate->parsed()) return cmd_evaluate(eval_flags, weights_path);
    if (study->parsed()) return cmd_study(study_flags, study_which);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
