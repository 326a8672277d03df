#ifndef SIDESLIP_LOG_HPP
#define SIDESLIP_LOG_HPP

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "sideslip/types.hpp"

namespace sideslip {

/// Malformed log or trace file. `frame` is the 0-based data row when known.
class LogError : public std::runtime_error {
 public:
  explicit LogError(const std::string& what, std::optional<std::size_t> frame = std::nullopt)
      : std::runtime_error(frame ? "frame " + std::to_string(*frame) + ": " + what : what),
        frame_(frame) {}
  std::optional<std::size_t> frame() const { return frame_; }

 private:
  std::optional<std::size_t> frame_;
};

/// Ground-truth columns carried by simulated logs.
struct LogTruth {
  double beta = 0.0;
  double v_y = 0.0;
  double phi = 0.0;
  double d = 0.0;

  bool operator==(const LogTruth&) const = default;
};

struct SensorLog {
  std::vector<SensorSample> samples;
  std::optional<std::vector<LogTruth>> truth;
};

inline constexpr std::array<std::string_view, 6> kSensorColumns = {"t", "ax", "ay_sen", "r", "vx",
                                                                   "delta_f"};
inline constexpr std::array<std::string_view, 4> kTruthColumns = {"beta_true", "vy_true",
                                                                  "phi_true", "d_true"};

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline void write_log(std::ostream& os, const SensorLog& log) {
  const bool with_truth = log.truth.has_value();
  if (with_truth && log.truth->size() != log.samples.size()) {
    throw LogError("write_log: truth length differs from sample count");
  }
  std::string line;
  for (std::size_t i = 0; i < kSensorColumns.size(); ++i) {
    if (i) line += ',';
    line += kSensorColumns[i];
  }
  if (with_truth) {
    for (auto c : kTruthColumns) {
      line += ',';
      line += c;
    }
  }
  os << line << '\n';
  for (std::size_t i = 0; i < log.samples.size(); ++i) {
    const SensorSample& s = log.samples[i];
    line = format_double(s.t);
    for (double v : {s.a_x, s.a_y_sen, s.r, s.v_x, s.delta_f}) {
      line += ',';
      line += format_double(v);
    }
    if (with_truth) {
      const LogTruth& g = (*log.truth)[i];
      for (double v : {g.beta, g.v_y, g.phi, g.d}) {
        line += ',';
        line += format_double(v);
      }
    }
    os << line << '\n';
  }
}

inline void write_log_file(const std::string& path, const SensorLog& log) {
  std::ofstream os(path);
  if (!os) throw LogError("cannot open " + path + " for writing");
  write_log(os, log);
  if (!os) throw LogError("write failed: " + path);
}

/// Parse and validate a sensor log. Columns are located by name; extra
/// columns are ignored. When `expected_dt` is given, every interval must lie
/// within 10% of it.
inline SensorLog read_log(std::istream& is, std::optional<double> expected_dt = std::nullopt) {
  std::string header;
  if (!std::getline(is, header)) throw LogError("empty log: missing header row");
  const auto names = split_csv_line(header);
  auto find = [&](std::string_view col) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (trim(names[i]) == col) return i;
    }
    return std::nullopt;
  };

  std::array<std::size_t, 6> idx{};
  for (std::size_t c = 0; c < kSensorColumns.size(); ++c) {
    const auto i = find(kSensorColumns[c]);
    if (!i) throw LogError("schema error: missing column '" + std::string(kSensorColumns[c]) + "'");
    idx[c] = *i;
  }
  std::array<std::optional<std::size_t>, 4> tidx{};
  std::size_t truth_found = 0;
  for (std::size_t c = 0; c < kTruthColumns.size(); ++c) {
    tidx[c] = find(kTruthColumns[c]);
    if (tidx[c]) ++truth_found;
  }
  if (truth_found != 0 && truth_found != kTruthColumns.size()) {
    for (std::size_t c = 0; c < kTruthColumns.size(); ++c) {
      if (!tidx[c]) {
        throw LogError("schema error: missing column '" + std::string(kTruthColumns[c]) + "'");
      }
    }
  }

  SensorLog out;
  if (truth_found) out.truth.emplace();
  std::string line;
  std::size_t frame = 0;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != names.size()) {
      throw LogError("expected " + std::to_string(names.size()) + " fields, got " +
                         std::to_string(cells.size()),
                     frame);
    }
    auto cell = [&](std::size_t col, std::string_view name) {
      const auto v = parse_double(cells[col]);
      if (!v) {
        throw LogError("unparsable value '" + std::string(trim(cells[col])) + "' in column " +
                           std::string(name),
                       frame);
      }
      if (!std::isfinite(*v)) throw LogError("non-finite value in column " + std::string(name), frame);
      return *v;
    };
    SensorSample s;
    s.t = cell(idx[0], kSensorColumns[0]);
    s.a_x = cell(idx[1], kSensorColumns[1]);
    s.a_y_sen = cell(idx[2], kSensorColumns[2]);
    s.r = cell(idx[3], kSensorColumns[3]);
    s.v_x = cell(idx[4], kSensorColumns[4]);
    s.delta_f = cell(idx[5], kSensorColumns[5]);
    if (!out.samples.empty()) {
      const double step = s.t - out.samples.back().t;
      if (!(step > 0.0)) throw LogError("non-monotone timestamp", frame);
      if (expected_dt && std::abs(step - *expected_dt) > 0.1 * *expected_dt) {
        throw LogError("sample interval " + format_double(step) + " deviates more than 10% from dt " +
                           format_double(*expected_dt),
                       frame);
      }
    }
    out.samples.push_back(s);
    if (out.truth) {
      LogTruth g;
      g.beta = cell(*tidx[0], kTruthColumns[0]);
      g.v_y = cell(*tidx[1], kTruthColumns[1]);
      g.phi = cell(*tidx[2], kTruthColumns[2]);
      g.d = cell(*tidx[3], kTruthColumns[3]);
      out.truth->push_back(g);
    }
    ++frame;
  }
  if (out.samples.empty()) throw LogError("log has no data rows");
  return out;
}

inline SensorLog read_log_file(const std::string& path,
                               std::optional<double> expected_dt = std::nullopt) {
  std::ifstream is(path);
  if (!is) throw LogError("cannot open " + path);
  return read_log(is, expected_dt);
}

}  // namespace sideslip

#endif  // SIDESLIP_LOG_HPP
