#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "loss.hpp"
#include "lumped_model.hpp"
#include "optim.hpp"
#include "run.hpp"

namespace lumpfit::training {

struct TrainConfig {
  int adam_epochs = 200;
  double adam_lr = 1e-3;
  int lbfgs_memory = 10;
  double rel_loss_tol = 1e-8;
  int max_iters = 500;
  int copies_per_run = 3;
  double max_shift_s = 20.0;
  std::uint64_t seed = 0;
  double dt_resample = 1.0;
  int substeps = 5;
  double initial_capacitance = 1.0;
  model::ModelDefaults model{};

  void validate() const;
  ode::SolverConfig solver() const;
};

/// `key = value` lines; keys match the TrainConfig field names.
TrainConfig read_config(std::istream& is, TrainConfig base = {});
void write_config(std::ostream& os, const TrainConfig& config);

/// The original run followed by one copy per shift. A copy reads the
/// original traces at t - shift on the same grid, holding the boundary
/// sample where that falls outside the record.
std::vector<ExperimentRun> augment_time_shift(const ExperimentRun& run,
                                              std::span<const double> shifts);

/// Same samples with the whole time axis moved by `offset` seconds.
ExperimentRun translate_time(const ExperimentRun& run, double offset);

/// Original runs plus `copies_per_run` shifted copies of each, shifts drawn
/// uniformly from [-max_shift_s, max_shift_s] and rounded to the run's grid.
std::vector<ExperimentRun> augment_runs(std::span<const ExperimentRun> runs,
                                        const TrainConfig& config, std::uint64_t stream);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// `n_trials` independent random partitions of run indices 0..n_runs-1.
std::vector<Split> shuffle_split(std::size_t n_runs, std::size_t n_trials, std::size_t n_train,
                                 std::uint64_t seed);

struct FitResult {
  model::LumpedModelParams params;
  double train_loss = 0.0;
  std::vector<optim::HistoryEntry> history;
  std::string stop_reason;
};

/// Augments `train_runs`, then Adam followed by L-BFGS on the
/// identification loss. `stream` selects the RNG stream for init and shifts.
FitResult fit(std::span<const ExperimentRun> train_runs, const TrainConfig& config,
              std::uint64_t stream = 0);

struct TrialReport {
  int trial = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double capacitance = 0.0;
  double train_rmse = 0.0;
  double test_rmse = 0.0;
};

/// Loss on held-out runs plus the fitted capacitance. `train_loss` is left
/// for the caller to fill.
TrialReport evaluate(const model::LumpedModelParams& params, std::span<const ExperimentRun> test_runs,
                     const TrainConfig& config, int trial = 0);

struct TrialOutcome {
  Split split;
  FitResult fit;
  TrialReport report;
};

/// The full shuffle-split protocol. Trials run on up to `jobs` threads and
/// the outcome does not depend on the thread count.
std::vector<TrialOutcome> run_protocol(std::span<const ExperimentRun> runs,
                                       const TrainConfig& config, std::size_t n_trials,
                                       std::size_t n_train, unsigned jobs = 1);

void write_report_csv(std::ostream& os, std::span<const TrialReport> rows);
std::vector<TrialReport> read_report_csv(std::istream& is, const std::string& source);
void write_history_csv(std::ostream& os, std::span<const optim::HistoryEntry> history);

/// Three significant figures in plain notation, e.g. 820, 3110, 3.97, 17.4.
std::string format_sig3(double v);

/// Trial-major table: a `Trial No.` header row, then Train, Test and C rows.
/// The smallest train and test losses are wrapped in `**`.
std::string render_table(std::span<const TrialReport> rows);

}  // namespace lumpfit::training
