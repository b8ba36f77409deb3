#pragma once

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "run.hpp"

namespace lumpfit::io {

/// Raw (t, temperature, power) rows as acquired, not necessarily uniform.
struct RawRecord {
  std::string id;
  std::vector<double> t;
  std::vector<double> temperature;
  std::vector<double> power;

  std::size_t size() const { return t.size(); }
  void validate() const;
};

/// Parses the run CSV schema: header `t,temperature,power`, or
/// `run_id,t,temperature,power` for several runs in one file. Errors carry
/// `source:line`.
std::vector<RawRecord> parse_runs(std::istream& is, const std::string& source);

/// A single CSV file, or every `*.csv` in a directory (sorted by name).
/// Runs without a run_id column take the file stem as id.
std::vector<RawRecord> load_runs(const std::filesystem::path& path);

/// Linear interpolation onto a uniform grid anchored at the first timestamp.
ExperimentRun resample(const RawRecord& record, double dt);

RawRecord to_record(const ExperimentRun& run);

void write_run_csv(std::ostream& os, const ExperimentRun& run);
void write_runs_csv(std::ostream& os, std::span<const ExperimentRun> runs);

/// Writes `header` then one row per index across equally long columns.
void write_columns_csv(std::ostream& os, const std::vector<std::string>& header,
                       const std::vector<std::span<const double>>& columns);

/// Opens for writing (creating parent directories) or throws IoError.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace lumpfit::io
