#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mlmc/oracle.hpp"
#include "mlmc/planner.hpp"
#include "mlmc/trainer.hpp"

namespace mlmc {

// Flat key=value experiment configuration ('#' comments, no nesting).
// serialize_config writes every key in a fixed order with 17-significant-digit
// reals, so parse -> serialize -> parse is a fixed point.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int threads = 1;

  std::vector<int> hidden = {50, 50};
  double lr_initial = 0.01;
  double lr_decay = 0.1;
  long lr_step_rate = 40000;
  std::string optimizer = "sgd";  // sgd | adam

  long steps = 150000;
  long batch = 125000;
  int level = 0;
  int refinement = 2;
  int base_steps = 1;
  std::string data_mode = "single_path";  // single_path | importance_sampled | inner_mean
  int inner_samples = 1;
  long log_every = 1000;

  TrainingBox box;

  double epsilon = 0.01;
  long long m0 = 75000;
  long long k0 = 150000;
  long pilot = 100000;
  int level_cap = 12;
  double alpha = 1.0;
  std::vector<long long> k_table;           // empty -> constant k0
  ParamVector plan_point;                   // defaults to the box midpoint
  bool plan_point_set = false;
  std::string plan_mode = "point";          // point | box_average
  std::string plan_file;                    // defaults to <out_dir>/plan.csv

  long n_test = 100000;
  std::vector<long long> study_batches = {1000, 4000, 16000};
  int study_reps = 5;

  ParamVector resolved_plan_point() const;
  std::string resolved_plan_file() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& config);

TrainConfig to_train_config(const ExperimentConfig& config);

// Weights file, line-oriented text:
//   MLMCNET 1
//   per net: structure line "input_dim h1 h2 ...", box line of 10 reals
//   (lower/upper per coordinate), then one weight per line in flat layout
//   order, all reals rendered with 17 significant digits.
void save_networks(const std::string& path, const std::vector<TrainedNet>& nets);
std::vector<TrainedNet> load_networks(const std::string& path);

void write_plan_csv(std::ostream& out, const AllocationPlan& plan);
void write_plan_csv_file(const std::string& path, const AllocationPlan& plan);
AllocationPlan read_plan_csv(const std::string& path);

void write_training_log_csv(const std::string& path,
                            const std::vector<TrainLogEntry>& log);
void write_error_report_csv(const std::string& path, const ErrorReport& report);
void write_batch_study_csv(std::ostream& out, const std::vector<BatchStudyRow>& rows);
void write_variance_study_csv(std::ostream& out, const VarianceReductionReport& report);
void write_slope_study_csv(std::ostream& out, const SlopeFitReport& report);

// Canonical shortest-round-trip rendering used by every writer.
std::string format_real(double v);

}  // namespace mlmc
