#include "training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "errors.hpp"
#include "text_format.hpp"

namespace lumpfit::training {

namespace {

constexpr std::uint32_t kSplitTag = 0x5350;
constexpr std::uint32_t kInitTag = 0x494e;
constexpr std::uint32_t kShiftTag = 0x5348;

std::mt19937_64 derived_stream(std::uint64_t seed, std::uint64_t index, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), tag};
  return std::mt19937_64(seq);
}

/// Reads `values` at fractional index `k - shift_samples`, holding the ends.
double shifted_sample(const std::vector<double>& values, double pos) {
  const double last = static_cast<double>(values.size() - 1);
  if (pos <= 0.0) return values.front();
  if (pos >= last) return values.back();
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double w = pos - static_cast<double>(i);
  if (w == 0.0) return values[i];
  return (1.0 - w) * values[i] + w * values[i + 1];
}

}  // namespace

void TrainConfig::validate() const {
  if (adam_epochs < 0) fail(ErrorCode::invalid_argument, "adam_epochs must be >= 0");
  if (!(adam_lr > 0.0)) fail(ErrorCode::invalid_argument, "adam_lr must be > 0");
  if (lbfgs_memory < 1) fail(ErrorCode::invalid_argument, "lbfgs_memory must be >= 1");
  if (!(rel_loss_tol > 0.0)) fail(ErrorCode::invalid_argument, "rel_loss_tol must be > 0");
  if (max_iters < 0) fail(ErrorCode::invalid_argument, "max_iters must be >= 0");
  if (copies_per_run < 0) fail(ErrorCode::invalid_argument, "copies_per_run must be >= 0");
  if (!(max_shift_s >= 0.0)) fail(ErrorCode::invalid_argument, "max_shift_s must be >= 0");
  if (!(dt_resample > 0.0)) fail(ErrorCode::invalid_argument, "dt_resample must be > 0");
  if (substeps < 1) fail(ErrorCode::invalid_argument, "substeps must be >= 1");
  if (!(initial_capacitance > 0.0)) fail(ErrorCode::invalid_argument, "initial_capacitance must be > 0");
}

ode::SolverConfig TrainConfig::solver() const {
  ode::SolverConfig cfg;
  cfg.method = ode::Method::fixed_rk4;
  cfg.substeps_per_interval = substeps;
  return cfg;
}

TrainConfig read_config(std::istream& is, TrainConfig c) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string_view::npos) fail(ErrorCode::malformed_row, where + ": expected key = value");
    const std::string key(trim(body.substr(0, eq)));
    const double v = parse_double(body.substr(eq + 1), key);
    auto as_int = [&](int& slot) {
      if (v != std::floor(v) || std::abs(v) > 1e9) fail(ErrorCode::malformed_row, where + ": " + key + " must be an integer");
      slot = static_cast<int>(v);
    };
    if (key == "adam_epochs") as_int(c.adam_epochs);
    else if (key == "adam_lr") c.adam_lr = v;
    else if (key == "lbfgs_memory") as_int(c.lbfgs_memory);
    else if (key == "rel_loss_tol") c.rel_loss_tol = v;
    else if (key == "max_iters") as_int(c.max_iters);
    else if (key == "copies_per_run") as_int(c.copies_per_run);
    else if (key == "max_shift_s") c.max_shift_s = v;
    else if (key == "dt_resample") c.dt_resample = v;
    else if (key == "substeps") as_int(c.substeps);
    else if (key == "initial_capacitance") c.initial_capacitance = v;
    else if (key == "seed") {
      if (v < 0 || v != std::floor(v)) fail(ErrorCode::malformed_row, where + ": seed must be a non-negative integer");
      c.seed = static_cast<std::uint64_t>(v);
    } else {
      fail(ErrorCode::malformed_row, where + ": unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

void write_config(std::ostream& os, const TrainConfig& c) {
  os << "adam_epochs = " << c.adam_epochs << '\n'
     << "adam_lr = " << format_double(c.adam_lr) << '\n'
     << "lbfgs_memory = " << c.lbfgs_memory << '\n'
     << "rel_loss_tol = " << format_double(c.rel_loss_tol) << '\n'
     << "max_iters = " << c.max_iters << '\n'
     << "copies_per_run = " << c.copies_per_run << '\n'
     << "max_shift_s = " << format_double(c.max_shift_s) << '\n'
     << "dt_resample = " << format_double(c.dt_resample) << '\n'
     << "substeps = " << c.substeps << '\n'
     << "initial_capacitance = " << format_double(c.initial_capacitance) << '\n'
     << "seed = " << c.seed << '\n';
}

std::vector<ExperimentRun> augment_time_shift(const ExperimentRun& run,
                                              std::span<const double> shifts) {
  run.validate();
  std::vector<ExperimentRun> out;
  out.reserve(shifts.size() + 1);
  out.push_back(run);
  for (std::size_t c = 0; c < shifts.size(); ++c) {
    const double s = shifts[c];
    if (!std::isfinite(s)) fail(ErrorCode::invalid_argument, "shift must be finite");
    const double samples = s / run.grid.dt;
    ExperimentRun copy;
    copy.id = run.id + "+shift" + std::to_string(c + 1);
    copy.grid = run.grid;
    copy.temperatures.resize(run.size());
    copy.powers.resize(run.size());
    for (std::size_t k = 0; k < run.size(); ++k) {
      const double pos = static_cast<double>(k) - samples;
      copy.temperatures[k] = shifted_sample(run.temperatures, pos);
      copy.powers[k] = shifted_sample(run.powers, pos);
    }
    out.push_back(std::move(copy));
  }
  return out;
}

ExperimentRun translate_time(const ExperimentRun& run, double offset) {
  ExperimentRun out = run;
  out.grid = ode::TimeGrid::with_points(run.grid.t_start + offset, run.grid.dt, run.grid.n_points);
  return out;
}

std::vector<ExperimentRun> augment_runs(std::span<const ExperimentRun> runs,
                                        const TrainConfig& config, std::uint64_t stream) {
  std::vector<ExperimentRun> out;
  auto rng = derived_stream(config.seed, stream, kShiftTag);
  std::uniform_real_distribution<double> u(-config.max_shift_s, config.max_shift_s);
  for (const auto& run : runs) {
    std::vector<double> shifts(static_cast<std::size_t>(config.copies_per_run));
    for (double& s : shifts) s = std::round(u(rng) / run.grid.dt) * run.grid.dt;
    auto aug = augment_time_shift(run, shifts);
    for (auto& r : aug) out.push_back(std::move(r));
  }
  return out;
}

std::vector<Split> shuffle_split(std::size_t n_runs, std::size_t n_trials, std::size_t n_train,
                                 std::uint64_t seed) {
  if (n_train == 0 || n_train >= n_runs) {
    fail(ErrorCode::invalid_argument, "n_train must be in [1, n_runs)");
  }
  std::vector<Split> out;
  out.reserve(n_trials);
  for (std::size_t trial = 0; trial < n_trials; ++trial) {
    auto rng = derived_stream(seed, trial, kSplitTag);
    std::vector<std::size_t> idx(n_runs);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Fisher-Yates with an explicit draw so the result does not depend on
    // the standard library's shuffle.
    for (std::size_t i = n_runs - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
      std::swap(idx[i], idx[j]);
    }
    Split s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    out.push_back(std::move(s));
  }
  return out;
}

FitResult fit(std::span<const ExperimentRun> train_runs, const TrainConfig& config,
              std::uint64_t stream) {
  config.validate();
  if (train_runs.empty()) fail(ErrorCode::invalid_argument, "fit needs at least one training run");
  const auto runs = augment_runs(train_runs, config, stream);

  model::ModelDefaults defaults = config.model;
  defaults.initial_capacitance = config.initial_capacitance;
  auto init_rng = derived_stream(config.seed, stream, kInitTag);
  model::LumpedModelParams params = model::make_model(defaults, init_rng());

  LossSpec spec;
  spec.solver = config.solver();
  model::LumpedModelParams probe = params;
  optim::Objective objective = [&](std::span<const double> x, std::span<double> g) {
    probe.assign(x);
    auto [loss, grad] = loss_and_gradient(probe, runs, spec);
    std::copy(grad.begin(), grad.end(), g.begin());
    return loss;
  };

  FitResult result;
  optim::AdamOptions adam_opt;
  adam_opt.iterations = config.adam_epochs;
  adam_opt.learning_rate = config.adam_lr;
  const auto a = optim::adam(objective, params.flatten(), adam_opt, &result.history);

  optim::LbfgsOptions lb_opt;
  lb_opt.memory = config.lbfgs_memory;
  lb_opt.max_iterations = config.max_iters;
  lb_opt.rel_loss_tol = config.rel_loss_tol;
  const auto b = optim::lbfgs(objective, a.x, lb_opt, &result.history);

  const bool take_b = b.loss <= a.loss;
  params.assign(take_b ? b.x : a.x);
  result.params = std::move(params);
  result.train_loss = take_b ? b.loss : a.loss;
  result.stop_reason = take_b ? b.stop_reason : "adam";
  return result;
}

TrialReport evaluate(const model::LumpedModelParams& params, std::span<const ExperimentRun> test_runs,
                     const TrainConfig& config, int trial) {
  LossSpec spec;
  spec.solver = config.solver();
  const auto b = loss_breakdown(params, test_runs, spec);
  TrialReport r;
  r.trial = trial;
  r.test_loss = b.loss;
  r.test_rmse = b.rmse;
  r.capacitance = params.capacitance();
  return r;
}

std::vector<TrialOutcome> run_protocol(std::span<const ExperimentRun> runs,
                                       const TrainConfig& config, std::size_t n_trials,
                                       std::size_t n_train, unsigned jobs) {
  config.validate();
  const auto splits = shuffle_split(runs.size(), n_trials, n_train, config.seed);
  std::vector<TrialOutcome> out(n_trials);
  std::vector<std::exception_ptr> errors(n_trials);

  auto do_trial = [&](std::size_t t) {
    try {
      std::vector<ExperimentRun> train, test;
      for (auto i : splits[t].train) train.push_back(runs[i]);
      for (auto i : splits[t].test) test.push_back(runs[i]);
      auto f = fit(train, config, t);
      auto rep = evaluate(f.params, test, config, static_cast<int>(t + 1));
      LossSpec spec;
      spec.solver = config.solver();
      const auto tb = loss_breakdown(f.params, train, spec);
      rep.train_loss = tb.loss;
      rep.train_rmse = tb.rmse;
      out[t] = TrialOutcome{splits[t], std::move(f), rep};
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n_trials)));
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_trials; ++t) do_trial(t);
  } else {
    std::mutex m;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t t;
          {
            std::lock_guard<std::mutex> lock(m);
            if (next >= n_trials) return;
            t = next++;
          }
          do_trial(t);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t t = 0; t < n_trials; ++t) {
    if (!errors[t]) continue;
    try {
      std::rethrow_exception(errors[t]);
    } catch (const Error& e) {
      fail(e.code(), "trial " + std::to_string(t + 1) + ": " + e.what());
    }
  }
  return out;
}

void write_report_csv(std::ostream& os, std::span<const TrialReport> rows) {
  os << "trial,train_loss,test_loss,capacitance\n";
  for (const auto& r : rows) {
    os << r.trial << ',' << format_double(r.train_loss) << ',' << format_double(r.test_loss) << ','
       << format_double(r.capacitance) << '\n';
  }
}

std::vector<TrialReport> read_report_csv(std::istream& is, const std::string& source) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line) || trim(line) != "trial,train_loss,test_loss,capacitance") {
    fail(ErrorCode::bad_schema, source + ":1: expected header trial,train_loss,test_loss,capacitance");
  }
  std::vector<TrialReport> rows;
  while (std::getline(is, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
      const auto comma = body.find(',', start);
      cells.push_back(body.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    const std::string where = source + ":" + std::to_string(line_no);
    if (cells.size() != 4) fail(ErrorCode::malformed_row, where + ": expected 4 fields");
    TrialReport r;
    const double trial = parse_double(cells[0], where + " trial");
    if (trial != std::floor(trial)) fail(ErrorCode::malformed_row, where + ": trial must be an integer");
    r.trial = static_cast<int>(trial);
    r.train_loss = parse_double(cells[1], where + " train_loss");
    r.test_loss = parse_double(cells[2], where + " test_loss");
    r.capacitance = parse_double(cells[3], where + " capacitance");
    rows.push_back(r);
  }
  return rows;
}

void write_history_csv(std::ostream& os, std::span<const optim::HistoryEntry> history) {
  os << "phase,iteration,loss\n";
  for (const auto& h : history) os << h.phase << ',' << h.iteration << ',' << format_double(h.loss) << '\n';
}

std::string format_sig3(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  if (v == 0.0) return "0";
  int exponent = static_cast<int>(std::floor(std::log10(std::abs(v))));
  double scale = std::pow(10.0, exponent - 2);
  double rounded = std::round(v / scale) * scale;
  // Rounding can carry into a new decade (999.6 -> 1000).
  exponent = static_cast<int>(std::floor(std::log10(std::abs(rounded))));
  scale = std::pow(10.0, exponent - 2);
  rounded = std::round(v / scale) * scale;
  const int decimals = std::max(0, 2 - exponent);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  return buf;
}

std::string render_table(std::span<const TrialReport> rows) {
  std::ostringstream os;
  auto best = [&](double TrialReport::*field) {
    std::size_t k = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].*field < rows[k].*field) k = i;
    }
    return k;
  };
  const std::size_t best_train = rows.empty() ? 0 : best(&TrialReport::train_loss);
  const std::size_t best_test = rows.empty() ? 0 : best(&TrialReport::test_loss);

  os << "| Trial No. |";
  for (const auto& r : rows) os << ' ' << r.trial << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < rows.size(); ++i) os << "---|";
  auto row = [&](const char* label, double TrialReport::*field, std::size_t mark, bool bold) {
    os << "\n| " << label << " |";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string cell = format_sig3(rows[i].*field);
      if (bold && i == mark) os << " **" << cell << "** |";
      else os << ' ' << cell << " |";
    }
  };
  row("Train", &TrialReport::train_loss, best_train, true);
  row("Test", &TrialReport::test_loss, best_test, true);
  row("C", &TrialReport::capacitance, 0, false);
  os << '\n';
  return os.str();
}

}  // namespace lumpfit::training
