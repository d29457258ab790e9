#include "mlmc/io.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mlmc {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_real(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid real for " + what + ": '" + s + "'");
  }
}

long long parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid integer for " + what + ": '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid unsigned integer for " + what + ": '" + s + "'");
  }
}

Interval parse_interval(const std::string& s, const std::string& what) {
  auto parts = split(s, ',');
  if (parts.size() != 2)
    throw std::invalid_argument(what + " needs 'lower,upper', got '" + s + "'");
  return {parse_real(parts[0], what), parse_real(parts[1], what)};
}

std::string interval_text(const Interval& iv) {
  return format_real(iv.lo) + "," + format_real(iv.hi);
}

}  // namespace

ParamVector ExperimentConfig::resolved_plan_point() const {
  if (plan_point_set) return plan_point;
  auto ivs = box.as_array();
  std::array<double, kParamDim> mid{};
  for (int i = 0; i < kParamDim; ++i) mid[static_cast<std::size_t>(i)] = 0.5 * (ivs[i].lo + ivs[i].hi);
  return ParamVector::from_array(mid);
}

std::string ExperimentConfig::resolved_plan_file() const {
  if (!plan_file.empty()) return plan_file;
  return out_dir + "/plan.csv";
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (kv.count(key))
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    kv[key] = value;
  }

  static const std::set<std::string> known = {
      "seed", "out_dir", "threads", "hidden", "lr_initial", "lr_decay",
      "lr_step_rate", "optimizer", "steps", "batch", "level", "refinement",
      "base_steps", "data_mode", "inner_samples", "log_every", "box_mu",
      "box_sigma", "box_s0", "box_maturity", "box_strike", "epsilon", "m0",
      "k0", "pilot", "level_cap", "alpha", "k_table", "plan_point",
      "plan_mode", "plan_file", "n_test", "study_batches", "study_reps"};
  for (const auto& [key, value] : kv)
    if (!known.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "'");

  static const char* required[] = {"seed",   "out_dir",  "hidden", "lr_initial",
                                   "lr_decay", "lr_step_rate", "steps", "batch",
                                   "box_mu", "box_sigma", "box_s0", "box_maturity",
                                   "box_strike", "epsilon", "m0", "k0", "pilot",
                                   "n_test"};
  for (const char* key : required)
    if (!kv.count(key))
      throw std::invalid_argument(std::string("config: missing required field '") +
                                  key + "'");

  ExperimentConfig c;
  auto get = [&](const char* key) -> const std::string& { return kv.at(key); };
  auto has = [&](const char* key) { return kv.count(key) != 0; };

  c.seed = parse_u64(get("seed"), "seed");
  c.out_dir = get("out_dir");
  if (has("threads")) c.threads = static_cast<int>(parse_int(get("threads"), "threads"));

  c.hidden.clear();
  for (const auto& part : split(get("hidden"), ','))
    c.hidden.push_back(static_cast<int>(parse_int(part, "hidden")));
  c.lr_initial = parse_real(get("lr_initial"), "lr_initial");
  c.lr_decay = parse_real(get("lr_decay"), "lr_decay");
  c.lr_step_rate = parse_int(get("lr_step_rate"), "lr_step_rate");
  if (has("optimizer")) c.optimizer = get("optimizer");
  if (c.optimizer != "sgd" && c.optimizer != "adam")
    throw std::invalid_argument("config: optimizer must be sgd or adam");

  c.steps = parse_int(get("steps"), "steps");
  c.batch = parse_int(get("batch"), "batch");
  if (has("level")) c.level = static_cast<int>(parse_int(get("level"), "level"));
  if (has("refinement"))
    c.refinement = static_cast<int>(parse_int(get("refinement"), "refinement"));
  if (has("base_steps"))
    c.base_steps = static_cast<int>(parse_int(get("base_steps"), "base_steps"));
  if (has("data_mode")) c.data_mode = get("data_mode");
  if (c.data_mode != "single_path" && c.data_mode != "importance_sampled" &&
      c.data_mode != "inner_mean")
    throw std::invalid_argument("config: data_mode must be single_path, "
                                "importance_sampled or inner_mean");
  if (has("inner_samples"))
    c.inner_samples = static_cast<int>(parse_int(get("inner_samples"), "inner_samples"));
  if (has("log_every")) c.log_every = parse_int(get("log_every"), "log_every");

  c.box.mu = parse_interval(get("box_mu"), "box_mu");
  c.box.sigma = parse_interval(get("box_sigma"), "box_sigma");
  c.box.s0 = parse_interval(get("box_s0"), "box_s0");
  c.box.maturity = parse_interval(get("box_maturity"), "box_maturity");
  c.box.strike = parse_interval(get("box_strike"), "box_strike");

  c.epsilon = parse_real(get("epsilon"), "epsilon");
  c.m0 = parse_int(get("m0"), "m0");
  c.k0 = parse_int(get("k0"), "k0");
  c.pilot = parse_int(get("pilot"), "pilot");
  if (has("level_cap"))
    c.level_cap = static_cast<int>(parse_int(get("level_cap"), "level_cap"));
  if (has("alpha")) c.alpha = parse_real(get("alpha"), "alpha");
  if (has("k_table") && !get("k_table").empty())
    for (const auto& part : split(get("k_table"), ','))
      c.k_table.push_back(parse_int(part, "k_table"));
  if (has("plan_point")) {
    auto parts = split(get("plan_point"), ',');
    if (parts.size() != kParamDim)
      throw std::invalid_argument("config: plan_point needs 5 reals");
    std::array<double, kParamDim> vals{};
    for (int i = 0; i < kParamDim; ++i)
      vals[static_cast<std::size_t>(i)] = parse_real(parts[static_cast<std::size_t>(i)], "plan_point");
    c.plan_point = ParamVector::from_array(vals);
    c.plan_point_set = true;
  }
  if (has("plan_mode")) c.plan_mode = get("plan_mode");
  if (c.plan_mode != "point" && c.plan_mode != "box_average")
    throw std::invalid_argument("config: plan_mode must be point or box_average");
  if (has("plan_file")) c.plan_file = get("plan_file");

  c.n_test = parse_int(get("n_test"), "n_test");
  if (has("study_batches")) {
    c.study_batches.clear();
    for (const auto& part : split(get("study_batches"), ','))
      c.study_batches.push_back(parse_int(part, "study_batches"));
  }
  if (has("study_reps"))
    c.study_reps = static_cast<int>(parse_int(get("study_reps"), "study_reps"));

  validate_box(c.box);
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "seed=" << c.seed << "\n";
  out << "out_dir=" << c.out_dir << "\n";
  out << "threads=" << c.threads << "\n";
  out << "hidden=";
  for (std::size_t i = 0; i < c.hidden.size(); ++i)
    out << (i ? "," : "") << c.hidden[i];
  out << "\n";
  out << "lr_initial=" << format_real(c.lr_initial) << "\n";
  out << "lr_decay=" << format_real(c.lr_decay) << "\n";
  out << "lr_step_rate=" << c.lr_step_rate << "\n";
  out << "optimizer=" << c.optimizer << "\n";
  out << "steps=" << c.steps << "\n";
  out << "batch=" << c.batch << "\n";
  out << "level=" << c.level << "\n";
  out << "refinement=" << c.refinement << "\n";
  out << "base_steps=" << c.base_steps << "\n";
  out << "data_mode=" << c.data_mode << "\n";
  out << "inner_samples=" << c.inner_samples << "\n";
  out << "log_every=" << c.log_every << "\n";
  out << "box_mu=" << interval_text(c.box.mu) << "\n";
  out << "box_sigma=" << interval_text(c.box.sigma) << "\n";
  out << "box_s0=" << interval_text(c.box.s0) << "\n";
  out << "box_maturity=" << interval_text(c.box.maturity) << "\n";
  out << "box_strike=" << interval_text(c.box.strike) << "\n";
  out << "epsilon=" << format_real(c.epsilon) << "\n";
  out << "m0=" << c.m0 << "\n";
  out << "k0=" << c.k0 << "\n";
  out << "pilot=" << c.pilot << "\n";
  out << "level_cap=" << c.level_cap << "\n";
  out << "alpha=" << format_real(c.alpha) << "\n";
  out << "k_table=";
  for (std::size_t i = 0; i < c.k_table.size(); ++i)
    out << (i ? "," : "") << c.k_table[i];
  out << "\n";
  if (c.plan_point_set) {
    auto vals = c.plan_point.as_array();
    out << "plan_point=";
    for (int i = 0; i < kParamDim; ++i)
      out << (i ? "," : "") << format_real(vals[static_cast<std::size_t>(i)]);
    out << "\n";
  }
  out << "plan_mode=" << c.plan_mode << "\n";
  if (!c.plan_file.empty()) out << "plan_file=" << c.plan_file << "\n";
  out << "n_test=" << c.n_test << "\n";
  out << "study_batches=";
  for (std::size_t i = 0; i < c.study_batches.size(); ++i)
    out << (i ? "," : "") << c.study_batches[i];
  out << "\n";
  out << "study_reps=" << c.study_reps << "\n";
  return out.str();
}

TrainConfig to_train_config(const ExperimentConfig& c) {
  TrainConfig t;
  t.structure.input_dim = kParamDim;
  t.structure.hidden = c.hidden;
  if (!t.structure.hidden.empty() && t.structure.hidden.back() == 1)
    t.structure.hidden.pop_back();  // accept the (50,50,1) convention
  t.schedule = {c.lr_initial, c.lr_decay, c.lr_step_rate};
  t.steps = c.steps;
  t.batch_size = c.batch;
  t.level_spec = {c.level, c.refinement, c.base_steps};
  t.box = c.box;
  t.seed = c.seed;
  if (c.data_mode == "importance_sampled") t.data_mode = DataMode::ImportanceSampled;
  else if (c.data_mode == "inner_mean") t.data_mode = DataMode::InnerMean;
  else t.data_mode = DataMode::SinglePath;
  t.inner_samples = c.inner_samples;
  t.optimizer = c.optimizer == "adam" ? OptimizerKind::Adam : OptimizerKind::Sgd;
  t.n_threads = c.threads;
  t.log_every = c.log_every;
  return t;
}

// ---------------------------------------------------------------------------
// Weights files
// ---------------------------------------------------------------------------

void save_networks(const std::string& path, const std::vector<TrainedNet>& nets) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write weights file: " + path);
  out << "MLMCNET 1\n";
  for (const auto& net : nets) {
    out << net.structure.input_dim;
    for (int w : net.structure.hidden) out << " " << w;
    out << "\n";
    auto ivs = net.box.as_array();
    for (int i = 0; i < kParamDim; ++i)
      out << (i ? " " : "") << format_real(ivs[i].lo) << " " << format_real(ivs[i].hi);
    out << "\n";
    for (double w : net.weights) out << format_real(w) << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<TrainedNet> load_networks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open weights file: " + path);
  std::string line;
  long lineno = 0;
  auto fail = [&](const std::string& what) -> std::runtime_error {
    return std::runtime_error(path + ":" + std::to_string(lineno) + ": " + what);
  };
  auto next_line = [&](const std::string& what) {
    if (!std::getline(in, line)) throw fail("unexpected end of file, expected " + what);
    ++lineno;
  };

  next_line("magic");
  if (line != "MLMCNET 1") throw fail("bad magic or unsupported version: '" + line + "'");

  std::vector<TrainedNet> nets;
  while (true) {
    if (!std::getline(in, line)) break;
    ++lineno;
    if (trim(line).empty()) continue;

    TrainedNet net;
    {
      std::istringstream ss(line);
      int dim;
      if (!(ss >> dim)) throw fail("bad structure line");
      net.structure.input_dim = dim;
      int w;
      while (ss >> w) net.structure.hidden.push_back(w);
      if (!ss.eof()) throw fail("bad structure line");
    }
    next_line("box line");
    {
      std::istringstream ss(line);
      std::array<Interval, kParamDim> ivs{};
      for (int i = 0; i < kParamDim; ++i)
        if (!(ss >> ivs[static_cast<std::size_t>(i)].lo >> ivs[static_cast<std::size_t>(i)].hi))
          throw fail("bad box line (needs 10 reals)");
      net.box = TrainingBox::from_array(ivs);
    }
    const std::size_t count = net.structure.parameter_count();
    net.weights.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      next_line("weight " + std::to_string(k));
      try {
        std::size_t pos = 0;
        net.weights.push_back(std::stod(line, &pos));
        if (trim(line.substr(pos)).size())
          throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw fail("bad weight value: '" + line + "'");
      }
    }
    nets.push_back(std::move(net));
  }
  if (nets.empty()) throw fail("file contains no networks");
  return nets;
}

// ---------------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------------

void write_plan_csv(std::ostream& out, const AllocationPlan& plan) {
  out << "level,h_l,variance,N_l,M_l,K_l\n";
  for (int l = 0; l <= plan.levels; ++l) {
    auto i = static_cast<std::size_t>(l);
    out << l << "," << format_real(plan.step_widths[i]) << ","
        << format_real(plan.variances[i]) << "," << plan.samples[i] << ","
        << plan.batch_sizes[i] << "," << plan.train_steps[i] << "\n";
  }
}

void write_plan_csv_file(const std::string& path, const AllocationPlan& plan) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write plan file: " + path);
  write_plan_csv(out, plan);
}

AllocationPlan read_plan_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open plan file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty plan file");
  if (trim(line) != "level,h_l,variance,N_l,M_l,K_l")
    throw std::runtime_error(path + ": unexpected plan header '" + line + "'");
  AllocationPlan plan;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto parts = split(line, ',');
    if (parts.size() != 6)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 6 columns");
    std::string at = "plan line " + std::to_string(lineno);
    long long level = parse_int(parts[0], at);
    if (level != static_cast<long long>(plan.samples.size()))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": levels must be consecutive from 0");
    plan.step_widths.push_back(parse_real(parts[1], at));
    plan.variances.push_back(parse_real(parts[2], at));
    plan.samples.push_back(parse_int(parts[3], at));
    plan.batch_sizes.push_back(parse_int(parts[4], at));
    plan.train_steps.push_back(parse_int(parts[5], at));
  }
  if (plan.samples.empty()) throw std::runtime_error(path + ": no levels in plan");
  plan.levels = static_cast<int>(plan.samples.size()) - 1;
  return plan;
}

void write_training_log_csv(const std::string& path,
                            const std::vector<TrainLogEntry>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write training log: " + path);
  out << "step,loss,learning_rate\n";
  for (const auto& e : log)
    out << e.step << "," << format_real(e.loss) << "," << format_real(e.rate) << "\n";
}

void write_error_report_csv(const std::string& path, const ErrorReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write error report: " + path);
  out << "n_test,linf,l1,argmax_mu,argmax_sigma,argmax_s0,argmax_maturity,"
         "argmax_strike,seed\n";
  auto p = report.argmax_point.as_array();
  out << report.n_test << "," << format_real(report.linf) << ","
      << format_real(report.l1);
  for (int i = 0; i < kParamDim; ++i) out << "," << format_real(p[static_cast<std::size_t>(i)]);
  out << "," << report.seed << "\n";
}

void write_batch_study_csv(std::ostream& out, const std::vector<BatchStudyRow>& rows) {
  out << "batch_size,mean_linf,std_linf,reduction\n";
  for (const auto& r : rows) {
    out << r.batch_size << "," << format_real(r.mean_linf) << ","
        << format_real(r.std_linf) << ",";
    if (std::isfinite(r.reduction)) out << format_real(r.reduction);
    out << "\n";
  }
}

void write_variance_study_csv(std::ostream& out, const VarianceReductionReport& r) {
  out << "mean_linf_plain,mean_linf_is,error_ratio,variance_ratio_lo,"
         "variance_ratio_hi\n";
  out << format_real(r.mean_linf_plain) << "," << format_real(r.mean_linf_is) << ","
      << format_real(r.error_ratio) << "," << format_real(r.variance_ratio_lo) << ","
      << format_real(r.variance_ratio_hi) << "\n";
}

void write_slope_study_csv(std::ostream& out, const SlopeFitReport& r) {
  out << "quantity,value\n";
  out << "weak_error_slope," << format_real(r.weak_error_slope) << "\n";
  out << "level_variance_slope," << format_real(r.level_variance_slope) << "\n";
  for (std::size_t i = 0; i < r.weak_h.size(); ++i)
    out << "weak_bias_h=" << format_real(r.weak_h[i]) << ","
        << format_real(r.weak_bias[i]) << "\n";
  for (std::size_t i = 0; i < r.var_h.size(); ++i)
    out << "level_variance_h=" << format_real(r.var_h[i]) << ","
        << format_real(r.var_value[i]) << "\n";
}

}  // namespace mlmc
