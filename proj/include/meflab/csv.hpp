#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "meflab/attacks.hpp"
#include "meflab/io.hpp"

namespace meflab {

// One metric observation. sample_id / step are -1 where the dimension does
// not apply (aggregates, single-shot metrics).
struct ResultRow {
  std::string experiment;
  std::string method;
  std::uint64_t seed = 0;
  std::int64_t sample_id = -1;
  std::int64_t step = -1;
  std::string metric;
  double value = 0;
  std::string units;
};

namespace csv {

// Locale-independent, 9 significant digits, '.' decimal separator. This is
// the single float->text choke point for all persisted results.
inline std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
  require(ec == std::errc(), "csv: float formatting failed");
  return std::string(buf, p);
}

inline double parse_double(const std::string& s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && p == s.data() + s.size(), "csv: bad numeric field '" + s + "'");
  return v;
}

// Field values stay plain (no quoting layer); reject content that would
// need one instead of silently corrupting the table.
inline const std::string& plain(const std::string& s) {
  require(s.find_first_of(",\"\n\r") == std::string::npos,
          "csv: field contains a delimiter: '" + s + "'");
  return s;
}

}  // namespace csv

inline const char* kResultHeader = "experiment,method,seed,sample_id,step,metric,value,units";

inline void emit_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::string out;
  out += kResultHeader;
  out += '\n';
  for (const ResultRow& r : rows) {
    out += csv::plain(r.experiment);
    out += ',';
    out += csv::plain(r.method);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += std::to_string(r.sample_id);
    out += ',';
    out += std::to_string(r.step);
    out += ',';
    out += csv::plain(r.metric);
    out += ',';
    out += csv::fmt(r.value);
    out += ',';
    out += csv::plain(r.units);
    out += '\n';
  }
  io::write_file(path, out);
}

inline std::vector<ResultRow> parse_result_csv(const std::string& path) {
  std::string bytes = io::read_file(path);
  std::vector<ResultRow> rows;
  std::size_t pos = 0;
  bool first = true;
  while (pos < bytes.size()) {
    std::size_t nl = bytes.find('\n', pos);
    require(nl != std::string::npos, "csv '" + path + "': missing trailing newline");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (first) {
      require(line == kResultHeader, "csv '" + path + "': unexpected header '" + line + "'");
      first = false;
      continue;
    }
    std::vector<std::string> f;
    std::size_t at = 0;
    while (true) {
      std::size_t c = line.find(',', at);
      if (c == std::string::npos) {
        f.push_back(line.substr(at));
        break;
      }
      f.push_back(line.substr(at, c - at));
      at = c + 1;
    }
    require(f.size() == 8, "csv '" + path + "': expected 8 fields, got " +
                               std::to_string(f.size()));
    ResultRow r;
    r.experiment = f[0];
    r.method = f[1];
    r.seed = static_cast<std::uint64_t>(std::stoull(f[2]));
    r.sample_id = static_cast<std::int64_t>(std::stoll(f[3]));
    r.step = static_cast<std::int64_t>(std::stoll(f[4]));
    r.metric = f[5];
    r.value = csv::parse_double(f[6]);
    r.units = f[7];
    rows.push_back(std::move(r));
  }
  require(!first, "csv '" + path + "': empty file");
  return rows;
}

// Same rows as a JSON array with identical field names.
inline void emit_json(const std::vector<ResultRow>& rows, const std::string& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ResultRow& r : rows)
    arr.push_back({{"experiment", r.experiment},
                   {"method", r.method},
                   {"seed", r.seed},
                   {"sample_id", r.sample_id},
                   {"step", r.step},
                   {"metric", r.metric},
                   {"value", r.value},
                   {"units", r.units}});
  io::write_file(path, arr.dump(2) + "\n");
}

// Per-iteration attack telemetry. Wall time is intentionally left out: these
// files must be byte-identical across reruns.
template <typename T>
void write_telemetry_csv(const AttackResult<T>& res, const std::string& path) {
  std::string out = "sample_id,t,loss,update_cos_sim,bp_count\n";
  for (std::size_t i = 0; i < res.telemetry.size(); ++i)
    for (const TelemetryRow& row : res.telemetry[i]) {
      out += std::to_string(i);
      out += ',';
      out += std::to_string(row.t);
      out += ',';
      out += csv::fmt(row.loss);
      out += ',';
      out += csv::fmt(row.update_cos_sim);
      out += ',';
      out += std::to_string(row.bp_count);
      out += '\n';
    }
  io::write_file(path, out);
}

}  // namespace meflab
