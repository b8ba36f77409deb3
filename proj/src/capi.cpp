#include "lumpfit/lumpfit.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "control.hpp"
#include "data_io.hpp"
#include "errors.hpp"
#include "lumped_model.hpp"
#include "synth.hpp"
#include "text_format.hpp"
#include "training.hpp"

namespace fs = std::filesystem;
using namespace lumpfit;

struct lf_model {
  model::LumpedModelParams params;
};

struct lf_runs {
  std::vector<ExperimentRun> runs;
};

struct lf_config {
  training::TrainConfig config;
  bool seed_given = false;
};

struct lf_protocol {
  std::vector<training::TrialOutcome> trials;
};

struct lf_control_result {
  control::ControlResult result;
};

namespace {

thread_local std::string last_error;

lf_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return LF_ERR_INVALID_ARGUMENT;
    case ErrorCode::dimension_mismatch: return LF_ERR_DIMENSION_MISMATCH;
    case ErrorCode::non_finite_state: return LF_ERR_NON_FINITE_STATE;
    case ErrorCode::step_limit_exceeded: return LF_ERR_STEP_LIMIT_EXCEEDED;
    case ErrorCode::out_of_range: return LF_ERR_OUT_OF_RANGE;
    case ErrorCode::non_finite_gradient: return LF_ERR_NON_FINITE_GRADIENT;
    case ErrorCode::diverged_fit: return LF_ERR_DIVERGED_FIT;
    case ErrorCode::malformed_row: return LF_ERR_MALFORMED_ROW;
    case ErrorCode::non_monotone_time: return LF_ERR_NON_MONOTONE_TIME;
    case ErrorCode::empty_run: return LF_ERR_EMPTY_RUN;
    case ErrorCode::span_too_short: return LF_ERR_SPAN_TOO_SHORT;
    case ErrorCode::bad_schema: return LF_ERR_BAD_SCHEMA;
    case ErrorCode::io: return LF_ERR_IO;
  }
  return LF_ERR_INTERNAL;
}

/// Runs `body`, translating exceptions into a status and the thread's last error.
template <class F>
lf_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return LF_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return LF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return LF_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) fail(ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::io, "cannot open " + path.string());
  return is;
}

void finish(std::ofstream& os, const fs::path& path) {
  os.flush();
  if (!os) fail(ErrorCode::io, "write failed for " + path.string());
}

const training::TrialOutcome& trial_at(const lf_protocol* p, size_t index) {
  require(p, "protocol");
  if (index >= p->trials.size()) fail(ErrorCode::out_of_range, "trial index out of range");
  return p->trials[index];
}

}  // namespace

extern "C" {

const char* lf_version(void) { return "0.1.0"; }

const char* lf_last_error(void) { return last_error.c_str(); }

const char* lf_status_name(lf_status status) {
  switch (status) {
    case LF_OK: return "Ok";
    case LF_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case LF_ERR_DIMENSION_MISMATCH: return "DimensionMismatch";
    case LF_ERR_NON_FINITE_STATE: return "NonFiniteState";
    case LF_ERR_STEP_LIMIT_EXCEEDED: return "StepLimitExceeded";
    case LF_ERR_OUT_OF_RANGE: return "OutOfRange";
    case LF_ERR_NON_FINITE_GRADIENT: return "NonFiniteGradient";
    case LF_ERR_DIVERGED_FIT: return "DivergedFit";
    case LF_ERR_MALFORMED_ROW: return "MalformedRow";
    case LF_ERR_NON_MONOTONE_TIME: return "NonMonotoneTime";
    case LF_ERR_EMPTY_RUN: return "EmptyRun";
    case LF_ERR_SPAN_TOO_SHORT: return "SpanTooShort";
    case LF_ERR_BAD_SCHEMA: return "BadSchema";
    case LF_ERR_IO: return "IoError";
    case LF_ERR_INTERNAL: return "Internal";
  }
  return "Unknown";
}

lf_status lf_synth_write(const char* spec_path, const char* out_dir, size_t n_runs, uint64_t seed) {
  return guarded([&] {
    require(out_dir, "out_dir");
    if (n_runs == 0) fail(ErrorCode::invalid_argument, "need at least one run");
    synth::GroundTruthSpec spec;
    if (spec_path) {
      auto is = open_input(spec_path);
      spec = synth::read_spec(is);
    }
    const auto runs = synth::generate_ensemble(spec, n_runs, seed);
    const fs::path dir(out_dir);
    for (const auto& run : runs) {
      const auto path = dir / (run.id + ".csv");
      auto os = io::open_output(path);
      io::write_run_csv(os, run);
      finish(os, path);
    }
    const auto spec_file = dir / "spec.txt";
    auto os = io::open_output(spec_file);
    synth::write_spec(os, spec, seed);
    finish(os, spec_file);
  });
}

lf_status lf_runs_load(const char* path, double dt, lf_runs** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<lf_runs>();
    for (const auto& rec : io::load_runs(path)) handle->runs.push_back(io::resample(rec, dt));
    *out = handle.release();
  });
}

size_t lf_runs_count(const lf_runs* runs) { return runs ? runs->runs.size() : 0; }

void lf_runs_free(lf_runs* runs) { delete runs; }

lf_status lf_config_load(const char* path, lf_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<lf_config>();
    if (path) {
      auto is = open_input(path);
      std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
      std::istringstream body(text);
      handle->config = training::read_config(body);
      std::istringstream scan(text);
      std::string line;
      while (std::getline(scan, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos && trim(std::string_view(line).substr(0, eq)) == "seed") {
          handle->seed_given = true;
        }
      }
    }
    *out = handle.release();
  });
}

lf_status lf_config_set(lf_config* config, const char* key, double value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    std::istringstream line(std::string(key) + " = " + format_double(value));
    config->config = training::read_config(line, config->config);
  });
}

lf_status lf_config_get(const lf_config* config, const char* key, double* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    std::ostringstream os;
    training::write_config(os, config->config);
    std::istringstream is(os.str());
    std::string line;
    while (std::getline(is, line)) {
      const auto eq = line.find('=');
      if (trim(std::string_view(line).substr(0, eq)) == key) {
        *value = parse_double(std::string_view(line).substr(eq + 1), key);
        return;
      }
    }
    fail(ErrorCode::invalid_argument, std::string("unknown config key '") + key + "'");
  });
}

int lf_config_seed_given(const lf_config* config) { return config && config->seed_given ? 1 : 0; }

void lf_config_free(lf_config* config) { delete config; }

lf_status lf_protocol_run(const lf_runs* runs, const lf_config* config, size_t n_trials,
                          size_t n_train, unsigned jobs, lf_protocol** out) {
  return guarded([&] {
    require(runs, "runs");
    require(config, "config");
    require(out, "out");
    *out = nullptr;
    if (n_trials == 0) fail(ErrorCode::invalid_argument, "need at least one trial");
    auto handle = std::make_unique<lf_protocol>();
    handle->trials = training::run_protocol(runs->runs, config->config, n_trials, n_train, jobs);
    *out = handle.release();
  });
}

size_t lf_protocol_trial_count(const lf_protocol* protocol) {
  return protocol ? protocol->trials.size() : 0;
}

lf_status lf_protocol_report(const lf_protocol* protocol, size_t index, lf_trial_report* out) {
  return guarded([&] {
    require(out, "out");
    const auto& r = trial_at(protocol, index).report;
    *out = lf_trial_report{r.trial, r.train_loss, r.test_loss, r.capacitance, r.train_rmse, r.test_rmse};
  });
}

lf_status lf_protocol_model(const lf_protocol* protocol, size_t index, lf_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    *out = new lf_model{trial_at(protocol, index).fit.params};
  });
}

lf_status lf_protocol_write_report(const lf_protocol* protocol, const char* csv_path) {
  return guarded([&] {
    require(protocol, "protocol");
    require(csv_path, "csv_path");
    std::vector<training::TrialReport> rows;
    for (const auto& t : protocol->trials) rows.push_back(t.report);
    auto os = io::open_output(csv_path);
    training::write_report_csv(os, rows);
    finish(os, csv_path);
  });
}

lf_status lf_protocol_write_history(const lf_protocol* protocol, size_t index, const char* csv_path) {
  return guarded([&] {
    require(csv_path, "csv_path");
    const auto& t = trial_at(protocol, index);
    auto os = io::open_output(csv_path);
    training::write_history_csv(os, t.fit.history);
    finish(os, csv_path);
  });
}

void lf_protocol_free(lf_protocol* protocol) { delete protocol; }

lf_status lf_model_load(const char* path, lf_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto is = open_input(path);
    *out = new lf_model{model::read_model(is)};
  });
}

lf_status lf_model_save(const lf_model* m, const char* path) {
  return guarded([&] {
    require(m, "model");
    require(path, "path");
    auto os = io::open_output(path);
    model::write_model(os, m->params);
    finish(os, path);
  });
}

double lf_model_capacitance(const lf_model* m) { return m ? m->params.capacitance() : 0.0; }

lf_status lf_model_heat_input(const lf_model* m, double temperature, double power, double* out) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    *out = model::heat_input(m->params, temperature, power);
  });
}

void lf_model_free(lf_model* m) { delete m; }

lf_status lf_predict(const lf_model* m, const char* run_path, double dt, int substeps,
                     const char* out_csv, double* loss) {
  return guarded([&] {
    require(m, "model");
    require(run_path, "run_path");
    require(out_csv, "out_csv");
    const auto records = io::load_runs(run_path);
    if (records.size() != 1) {
      fail(ErrorCode::invalid_argument, "expected exactly one run in " + std::string(run_path));
    }
    const auto run = io::resample(records.front(), dt);
    training::LossSpec spec;
    spec.solver.substeps_per_interval = substeps;
    spec.solver.validate();
    const auto traj = model::simulate(m->params, run.power_signal(), run.temperatures.front(), run.grid,
                                      spec.solver);
    if (loss) *loss = training::mse_loss(m->params, std::span(&run, 1), spec);
    auto os = io::open_output(out_csv);
    io::write_columns_csv(os, {"t", "measured", "predicted"},
                          {traj.times, run.temperatures, traj.states});
    finish(os, out_csv);
  });
}

lf_status lf_surface_write(const lf_model* m, double t_min, double t_max, double p_min, double p_max,
                           size_t resolution, const char* out_csv) {
  return guarded([&] {
    require(m, "model");
    require(out_csv, "out_csv");
    const auto surface = model::heat_surface(m->params, t_min, t_max, p_min, p_max, resolution, resolution);
    auto os = io::open_output(out_csv);
    model::write_surface_csv(os, surface);
    finish(os, out_csv);
  });
}

lf_control_problem lf_control_problem_default(void) {
  const control::ControlProblem d;
  return lf_control_problem{d.t_set, d.p_max, d.horizon, d.t_init, d.dt};
}

lf_control_options lf_control_options_default(void) {
  const control::ControlConfig d;
  return lf_control_options{d.adam_epochs, d.adam_lr, d.lbfgs_memory, d.rel_loss_tol,
                            d.max_iters, d.substeps, d.seed};
}

lf_status lf_control_run(const lf_model* m, const lf_control_problem* problem,
                         const lf_control_options* options, lf_control_result** out) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    *out = nullptr;
    const lf_control_problem p = problem ? *problem : lf_control_problem_default();
    const lf_control_options o = options ? *options : lf_control_options_default();
    control::ControlProblem cp{p.t_set, p.p_max, p.horizon, p.t_init, p.dt};
    control::ControlConfig cc{o.adam_epochs, o.adam_lr, o.lbfgs_memory, o.rel_loss_tol,
                              o.max_iters, o.substeps, o.seed};
    auto handle = std::make_unique<lf_control_result>();
    handle->result = control::synthesize_control(m->params, cp, cc);
    *out = handle.release();
  });
}

size_t lf_control_result_size(const lf_control_result* r) { return r ? r->result.times.size() : 0; }

double lf_control_result_loss(const lf_control_result* r) { return r ? r->result.loss : 0.0; }

lf_status lf_control_result_series(const lf_control_result* r, double* times, double* power,
                                   double* temperature) {
  return guarded([&] {
    require(r, "result");
    const auto& res = r->result;
    if (times) std::copy(res.times.begin(), res.times.end(), times);
    if (power) std::copy(res.power.begin(), res.power.end(), power);
    if (temperature) std::copy(res.temperature.begin(), res.temperature.end(), temperature);
  });
}

lf_status lf_control_result_write(const lf_control_result* r, const char* out_dir) {
  return guarded([&] {
    require(r, "result");
    require(out_dir, "out_dir");
    const fs::path dir(out_dir);
    const auto& res = r->result;
    auto write = [&](const fs::path& path, const char* column, const std::vector<double>& values) {
      auto os = io::open_output(path);
      io::write_columns_csv(os, {"t_seconds", column}, {res.times, values});
      finish(os, path);
    };
    write(dir / "profile.csv", "power_W", res.power);
    write(dir / "trajectory.csv", "temperature_C", res.temperature);
    const auto hist = dir / "history.csv";
    auto os = io::open_output(hist);
    training::write_history_csv(os, res.history);
    finish(os, hist);
  });
}

void lf_control_result_free(lf_control_result* r) { delete r; }

lf_status lf_report_aggregate(const char* reports_dir, const char* out_path) {
  return guarded([&] {
    require(reports_dir, "reports_dir");
    require(out_path, "out_path");
    const fs::path dir(reports_dir);
    if (!fs::is_directory(dir)) fail(ErrorCode::io, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<training::TrialReport> rows;
    std::size_t reports = 0;
    for (const auto& f : files) {
      auto is = open_input(f);
      std::string header;
      std::getline(is, header);
      if (trim(header) != "trial,train_loss,test_loss,capacitance") continue;  // histories, profiles
      is.seekg(0);
      for (const auto& r : training::read_report_csv(is, f.string())) rows.push_back(r);
      ++reports;
    }
    if (reports == 0) fail(ErrorCode::io, "no report CSV files in " + dir.string());
    auto os = io::open_output(out_path);
    os << training::render_table(rows);
    finish(os, out_path);
  });
}

}  // extern "C"
