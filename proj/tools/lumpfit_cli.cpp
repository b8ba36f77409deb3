// Command-line front end. Talks to the library only through lumpfit.h.

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lumpfit/lumpfit.h"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int report_failure(lf_status st, const std::string& context) {
  std::cerr << "lumpfit: " << context << ": " << lf_status_name(st) << ": " << lf_last_error() << '\n';
  return kRuntime;
}

/// --seed when given, then a seed from the config file, then LUMPFIT_SEED, then 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::optional<std::uint64_t> file) {
  if (flag) return *flag;
  if (file) return *file;
  if (const char* env = std::getenv("LUMPFIT_SEED"); env && *env) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || env[0] == '-') throw UsageError("LUMPFIT_SEED must be a non-negative integer");
    return v;
  }
  return 0;
}

template <class T>
struct Handle {
  T* ptr = nullptr;
  void (*release)(T*);
  explicit Handle(void (*r)(T*)) : release(r) {}
  ~Handle() { release(ptr); }
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
};

std::string trial_suffix(std::size_t trial) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "trial%02zu", trial);
  return buf;
}

struct SynthArgs {
  std::string spec, out;
  std::size_t runs = 7;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a) {
  const std::uint64_t seed = resolve_seed(a.seed, std::nullopt);
  const lf_status st = lf_synth_write(a.spec.empty() ? nullptr : a.spec.c_str(), a.out.c_str(), a.runs, seed);
  if (st != LF_OK) return report_failure(st, "synth");
  std::cout << "wrote " << a.runs << " runs to " << a.out << '\n';
  return kOk;
}

struct FitArgs {
  std::string data, config, out;
  std::size_t trials = 10;
  std::size_t train = 4;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
};

int cmd_fit(const FitArgs& a) {
  Handle<lf_config> cfg(lf_config_free);
  lf_status st = lf_config_load(a.config.empty() ? nullptr : a.config.c_str(), &cfg.ptr);
  if (st != LF_OK) return report_failure(st, "config");
  std::optional<std::uint64_t> file_seed;
  if (lf_config_seed_given(cfg.ptr)) {
    double v = 0;
    lf_config_get(cfg.ptr, "seed", &v);
    file_seed = static_cast<std::uint64_t>(v);
  }
  const std::uint64_t seed = resolve_seed(a.seed, file_seed);
  if ((st = lf_config_set(cfg.ptr, "seed", static_cast<double>(seed))) != LF_OK) return report_failure(st, "config");

  double dt = 1.0;
  lf_config_get(cfg.ptr, "dt_resample", &dt);
  Handle<lf_runs> runs(lf_runs_free);
  if ((st = lf_runs_load(a.data.c_str(), dt, &runs.ptr)) != LF_OK) return report_failure(st, "load " + a.data);

  Handle<lf_protocol> proto(lf_protocol_free);
  st = lf_protocol_run(runs.ptr, cfg.ptr, a.trials, a.train, a.jobs, &proto.ptr);
  if (st != LF_OK) return report_failure(st, "fit");

  const fs::path out(a.out);
  const fs::path dir = out.parent_path();
  const std::string stem = out.stem().string();
  const std::string ext = out.extension().string();
  std::size_t best = 0;
  double best_test = 0.0;
  for (std::size_t i = 0; i < lf_protocol_trial_count(proto.ptr); ++i) {
    lf_trial_report r{};
    lf_protocol_report(proto.ptr, i, &r);
    std::cout << "trial " << r.trial << ": train " << r.train_loss << ", test " << r.test_loss
              << ", C " << r.capacitance << ", test rmse " << r.test_rmse << '\n';
    if (i == 0 || r.test_loss < best_test) {
      best = i;
      best_test = r.test_loss;
    }
    Handle<lf_model> m(lf_model_free);
    if ((st = lf_protocol_model(proto.ptr, i, &m.ptr)) != LF_OK) return report_failure(st, "fit");
    const fs::path model_path = dir / (stem + "." + trial_suffix(i + 1) + ext);
    if ((st = lf_model_save(m.ptr, model_path.string().c_str())) != LF_OK) return report_failure(st, "write");
    const fs::path hist = dir / (stem + "." + trial_suffix(i + 1) + ".history.csv");
    if ((st = lf_protocol_write_history(proto.ptr, i, hist.string().c_str())) != LF_OK) {
      return report_failure(st, "write");
    }
  }
  Handle<lf_model> m(lf_model_free);
  lf_protocol_model(proto.ptr, best, &m.ptr);
  if ((st = lf_model_save(m.ptr, a.out.c_str())) != LF_OK) return report_failure(st, "write");
  const fs::path report = dir / (stem + ".report.csv");
  if ((st = lf_protocol_write_report(proto.ptr, report.string().c_str())) != LF_OK) {
    return report_failure(st, "write");
  }
  std::cout << "report: " << report.string() << "\nmodel (lowest test loss, trial " << best + 1
            << "): " << a.out << '\n';
  return kOk;
}

struct PredictArgs {
  std::string model, run, out;
  double dt = 1.0;
  int substeps = 5;
};

int cmd_predict(const PredictArgs& a) {
  Handle<lf_model> m(lf_model_free);
  lf_status st = lf_model_load(a.model.c_str(), &m.ptr);
  if (st != LF_OK) return report_failure(st, "load " + a.model);
  double loss = 0.0;
  st = lf_predict(m.ptr, a.run.c_str(), a.dt, a.substeps, a.out.c_str(), &loss);
  if (st == LF_ERR_BAD_SCHEMA) {
    std::cerr << "lumpfit: predict: " << lf_last_error() << '\n';
    return kUsage;
  }
  if (st != LF_OK) return report_failure(st, "predict");
  std::cout << "loss " << loss << '\n';
  return kOk;
}

struct ControlArgs {
  std::string model, out;
  lf_control_problem problem = lf_control_problem_default();
  std::optional<std::uint64_t> seed;
};

int cmd_control(ControlArgs a) {
  if (!(a.problem.t_set > 23.0)) throw UsageError("--tset must exceed 23");
  if (!(a.problem.p_max > 0.0)) throw UsageError("--pmax must be > 0");
  if (!(a.problem.horizon > 0.0)) throw UsageError("--horizon must be > 0");
  Handle<lf_model> m(lf_model_free);
  lf_status st = lf_model_load(a.model.c_str(), &m.ptr);
  if (st != LF_OK) return report_failure(st, "load " + a.model);
  lf_control_options opt = lf_control_options_default();
  opt.seed = resolve_seed(a.seed, std::nullopt);
  Handle<lf_control_result> r(lf_control_result_free);
  st = lf_control_run(m.ptr, &a.problem, &opt, &r.ptr);
  if (st == LF_ERR_INVALID_ARGUMENT) {
    std::cerr << "lumpfit: control: " << lf_last_error() << '\n';
    return kUsage;
  }
  if (st != LF_OK) return report_failure(st, "control");
  if ((st = lf_control_result_write(r.ptr, a.out.c_str())) != LF_OK) return report_failure(st, "write");
  std::cout << "tracking loss " << lf_control_result_loss(r.ptr) << "; wrote " << a.out << '\n';
  return kOk;
}

struct SurfaceArgs {
  std::string model, out;
  double tmin = 0, tmax = 1000, pmin = 0, pmax = 4000;
  std::size_t res = 100;
};

int cmd_surface(const SurfaceArgs& a) {
  if (!(a.tmax >= a.tmin) || !(a.pmax >= a.pmin)) throw UsageError("empty temperature or power range");
  if (a.res == 0) throw UsageError("--res must be >= 1");
  Handle<lf_model> m(lf_model_free);
  lf_status st = lf_model_load(a.model.c_str(), &m.ptr);
  if (st != LF_OK) return report_failure(st, "load " + a.model);
  st = lf_surface_write(m.ptr, a.tmin, a.tmax, a.pmin, a.pmax, a.res, a.out.c_str());
  if (st != LF_OK) return report_failure(st, "surface");
  return kOk;
}

struct ReportArgs {
  std::string reports, out;
};

int cmd_report(const ReportArgs& a) {
  const lf_status st = lf_report_aggregate(a.reports.c_str(), a.out.c_str());
  if (st != LF_OK) return report_failure(st, "report");
  return kOk;
}

void add_version(CLI::App& app) { app.set_version_flag("--version", std::string("lumpfit ") + lf_version()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural lumped-parameter thermal model: fit, predict and control"};
  add_version(app);
  app.require_subcommand(1, 1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic run ensemble");
  add_version(*s);
  s->add_option("--spec", synth.spec, "Ground-truth spec file (key = value)")->check(CLI::ExistingFile);
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--runs", synth.runs, "Number of runs")->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.seed, "Seed (falls back to LUMPFIT_SEED)");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Run the shuffle-split identification protocol");
  add_version(*f);
  f->add_option("--data", fit.data, "Run CSV file or directory")->required()->check(CLI::ExistingPath);
  f->add_option("--config", fit.config, "Training config (key = value)")->check(CLI::ExistingFile);
  f->add_option("--out", fit.out, "Model file; per-trial files and reports go beside it")->required();
  f->add_option("--trials", fit.trials, "Number of trials")->check(CLI::PositiveNumber);
  f->add_option("--train", fit.train, "Training runs per trial")->check(CLI::PositiveNumber);
  f->add_option("--seed", fit.seed, "Seed (overrides the config file)");
  f->add_option("--jobs", fit.jobs, "Trials run in parallel")->check(CLI::PositiveNumber);

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "Simulate a model under a run's recorded power");
  add_version(*p);
  p->add_option("--model", pred.model, "Model file")->required()->check(CLI::ExistingFile);
  p->add_option("--run", pred.run, "Run CSV")->required()->check(CLI::ExistingFile);
  p->add_option("--out", pred.out, "Output CSV (t,measured,predicted)")->required();
  p->add_option("--dt", pred.dt, "Resampling interval in seconds")->check(CLI::PositiveNumber);
  p->add_option("--substeps", pred.substeps, "RK4 substeps per interval")->check(CLI::PositiveNumber);

  ControlArgs ctl;
  auto* c = app.add_subcommand("control", "Synthesize an open-loop power profile");
  add_version(*c);
  c->add_option("--model", ctl.model, "Model file")->required()->check(CLI::ExistingFile);
  c->add_option("--tset", ctl.problem.t_set, "Set temperature (C)");
  c->add_option("--pmax", ctl.problem.p_max, "Maximum power (W)");
  c->add_option("--horizon", ctl.problem.horizon, "Horizon (s)");
  c->add_option("--tinit", ctl.problem.t_init, "Initial temperature (C)");
  c->add_option("--dt", ctl.problem.dt, "Collocation interval (s)");
  c->add_option("--seed", ctl.seed, "Seed (falls back to LUMPFIT_SEED)");
  c->add_option("--out", ctl.out, "Output directory")->required();

  SurfaceArgs surf;
  auto* u = app.add_subcommand("surface", "Export the learned heat-input surface");
  add_version(*u);
  u->add_option("--model", surf.model, "Model file")->required()->check(CLI::ExistingFile);
  u->add_option("--tmin", surf.tmin, "Lowest temperature (C)");
  u->add_option("--tmax", surf.tmax, "Highest temperature (C)");
  u->add_option("--pmin", surf.pmin, "Lowest power (W)");
  u->add_option("--pmax", surf.pmax, "Highest power (W)");
  u->add_option("--res", surf.res, "Samples per axis");
  u->add_option("--out", surf.out, "Output CSV")->required();

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Aggregate report CSVs into one table");
  add_version(*r);
  r->add_option("--reports", rep.reports, "Directory of report CSVs")->required();
  r->add_option("--out", rep.out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*f) return cmd_fit(fit);
    if (*p) return cmd_predict(pred);
    if (*c) return cmd_control(ctl);
    if (*u) return cmd_surface(surf);
    if (*r) return cmd_report(rep);
  } catch (const UsageError& e) {
    std::cerr << "lumpfit: " << e.what() << '\n' << app.help();
    return kUsage;
  }
  return kUsage;
}
