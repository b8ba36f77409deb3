#include "data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "errors.hpp"
#include "text_format.hpp"

namespace lumpfit::io {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

}  // namespace

void RawRecord::validate() const {
  if (t.size() < 2) fail(ErrorCode::empty_run, "run '" + id + "' needs at least 2 rows");
  if (temperature.size() != t.size() || power.size() != t.size()) {
    fail(ErrorCode::dimension_mismatch, "run '" + id + "' has ragged columns");
  }
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!std::isfinite(t[k]) || !std::isfinite(temperature[k]) || !std::isfinite(power[k])) {
      fail(ErrorCode::malformed_row, "run '" + id + "' has non-finite values");
    }
    if (k > 0 && !(t[k] > t[k - 1])) {
      fail(ErrorCode::non_monotone_time, "run '" + id + "': time not strictly increasing at row " +
                                             std::to_string(k + 1));
    }
  }
}

std::vector<RawRecord> parse_runs(std::istream& is, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool multi = false;
  while (!have_header && std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!fields.empty() && fields[0].size() >= 3 && fields[0].substr(0, 3) == "\xEF\xBB\xBF") {
      fields[0].remove_prefix(3);
    }
    if (fields.size() == 3 && fields[0] == "t" && fields[1] == "temperature" &&
        fields[2] == "power") {
      multi = false;
    } else if (fields.size() == 4 && fields[0] == "run_id" && fields[1] == "t" &&
               fields[2] == "temperature" && fields[3] == "power") {
      multi = true;
    } else {
      fail(ErrorCode::bad_schema, where(source, line_no) +
                                      ": expected header 't,temperature,power' or "
                                      "'run_id,t,temperature,power', got '" + line + "'");
    }
    have_header = true;
  }
  if (!have_header) fail(ErrorCode::empty_run, source + ": no header and no data");

  std::vector<RawRecord> records;
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> last_line;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    const std::size_t expected = multi ? 4 : 3;
    if (fields.size() != expected) {
      fail(ErrorCode::malformed_row, where(source, line_no) + ": expected " +
                                         std::to_string(expected) + " fields, got " +
                                         std::to_string(fields.size()));
    }
    const std::size_t off = multi ? 1 : 0;
    const std::string id = multi ? std::string(fields[0]) : std::string();
    if (multi && id.empty()) fail(ErrorCode::malformed_row, where(source, line_no) + ": empty run_id");

    double vals[3];
    static constexpr const char* names[3] = {"t", "temperature", "power"};
    for (int c = 0; c < 3; ++c) {
      try {
        vals[c] = parse_double(fields[off + c], names[c]);
      } catch (const Error& e) {
        fail(ErrorCode::malformed_row, where(source, line_no) + ": " + e.what());
      }
      if (!std::isfinite(vals[c])) {
        fail(ErrorCode::malformed_row, where(source, line_no) + ": non-finite " + names[c]);
      }
    }

    auto [it, inserted] = index.try_emplace(id, records.size());
    if (inserted) {
      records.push_back(RawRecord{id, {}, {}, {}});
      last_line.push_back(0);
    }
    RawRecord& rec = records[it->second];
    if (!rec.t.empty() && !(vals[0] > rec.t.back())) {
      fail(ErrorCode::non_monotone_time,
           where(source, line_no) + ": time " + format_double(vals[0]) +
               " does not increase past " + format_double(rec.t.back()) + " (line " +
               std::to_string(last_line[it->second]) + ")");
    }
    rec.t.push_back(vals[0]);
    rec.temperature.push_back(vals[1]);
    rec.power.push_back(vals[2]);
    last_line[it->second] = line_no;
  }
  if (records.empty()) fail(ErrorCode::empty_run, source + ": no data rows");
  for (const auto& rec : records) {
    if (rec.size() < 2) {
      fail(ErrorCode::empty_run, source + ": run '" + rec.id + "' needs at least 2 rows");
    }
  }
  return records;
}

std::vector<RawRecord> load_runs(const fs::path& path) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorCode::io, "no .csv files in " + path.string());
  } else {
    files.push_back(path);
  }

  std::vector<RawRecord> all;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) fail(ErrorCode::io, "cannot open " + file.string());
    auto recs = parse_runs(in, file.string());
    for (auto& r : recs) {
      if (r.id.empty()) r.id = file.stem().string();
      all.push_back(std::move(r));
    }
  }
  return all;
}

ExperimentRun resample(const RawRecord& record, double dt) {
  record.validate();
  if (!(dt > 0.0)) fail(ErrorCode::invalid_argument, "resample dt must be > 0");
  const double t0 = record.t.front();
  const double t_last = record.t.back();
  const double span = t_last - t0;
  if (span < dt * (1.0 - 1e-9)) {
    fail(ErrorCode::span_too_short, "run '" + record.id + "' spans " + format_double(span) +
                                        " s, shorter than dt " + format_double(dt));
  }
  const auto grid = ode::TimeGrid::make(t0, t_last, dt);
  ExperimentRun run;
  run.id = record.id;
  run.grid = grid;
  run.temperatures.resize(grid.n_points);
  run.powers.resize(grid.n_points);

  const double end_slack = 1e-9 * dt;
  std::size_t k = 0;
  for (std::size_t j = 0; j < grid.n_points; ++j) {
    const double t = grid.at(j);
    if (t >= t_last - end_slack) {
      run.temperatures[j] = record.temperature.back();
      run.powers[j] = record.power.back();
      continue;
    }
    while (k + 2 < record.size() && record.t[k + 1] <= t) ++k;
    if (t == record.t[k]) {
      run.temperatures[j] = record.temperature[k];
      run.powers[j] = record.power[k];
      continue;
    }
    const double w = (t - record.t[k]) / (record.t[k + 1] - record.t[k]);
    run.temperatures[j] = record.temperature[k] + w * (record.temperature[k + 1] - record.temperature[k]);
    run.powers[j] = record.power[k] + w * (record.power[k + 1] - record.power[k]);
  }
  return run;
}

RawRecord to_record(const ExperimentRun& run) {
  return RawRecord{run.id, run.grid.times(), run.temperatures, run.powers};
}

void write_run_csv(std::ostream& os, const ExperimentRun& run) {
  os << "t,temperature,power\n";
  for (std::size_t j = 0; j < run.size(); ++j) {
    os << format_double(run.grid.at(j)) << ',' << format_double(run.temperatures[j]) << ','
       << format_double(run.powers[j]) << '\n';
  }
}

void write_runs_csv(std::ostream& os, std::span<const ExperimentRun> runs) {
  os << "run_id,t,temperature,power\n";
  for (const auto& run : runs) {
    for (std::size_t j = 0; j < run.size(); ++j) {
      os << run.id << ',' << format_double(run.grid.at(j)) << ','
         << format_double(run.temperatures[j]) << ',' << format_double(run.powers[j]) << '\n';
    }
  }
}

void write_columns_csv(std::ostream& os, const std::vector<std::string>& header,
                       const std::vector<std::span<const double>>& columns) {
  if (header.size() != columns.size()) fail(ErrorCode::dimension_mismatch, "header/column count");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != rows) fail(ErrorCode::dimension_mismatch, "columns differ in length");
  }
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  os << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      os << (c ? "," : "") << format_double(columns[c][r]);
    }
    os << '\n';
  }
}

std::ofstream open_output(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  return out;
}

}  // namespace lumpfit::io
