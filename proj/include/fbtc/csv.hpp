#pragma once

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fbtc/error.hpp"
#include "fbtc/trajectory.hpp"

namespace fbtc {

/// Doubles are serialized with 17 significant digits so a write/read
/// round-trip is lossless.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Writes content to `path` atomically: a sibling temp file is written in
/// full and then renamed over the target.
inline void atomic_write_file(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) raise(Errc::io_error, "cannot open '" + tmp + "' for writing");
    os << content;
    if (!os) raise(Errc::io_error, "write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    raise(Errc::io_error, "cannot rename '" + tmp + "' to '" + path + "'");
}

namespace detail {

/// Splits one CSV record. Handles double-quoted fields with "" escapes;
/// trailing \r is stripped by the caller.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted)
    raise(Errc::parse_error, "line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(cur);
  return fields;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n\xEF\xBB\xBF");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& s, std::size_t line_no, const std::string& col) {
  const std::string t = trim(s);
  if (t.empty())
    raise(Errc::parse_error,
          "line " + std::to_string(line_no) + ": empty " + col + " field");
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    raise(Errc::parse_error, "line " + std::to_string(line_no) + ": cannot parse " + col +
                                 " value '" + t + "'");
  return v;
}

}  // namespace detail

/// Trajectories plus optional per-trajectory labels, aligned by index.
struct Dataset {
  std::vector<Trajectory> trajectories;
  bool has_labels = false;
  std::vector<int> labels;
};

/// Long-format reader: header `id,time,value[,label]`, one observation per
/// row. Rows are grouped by id (trajectory order follows first appearance),
/// sorted by time within each id, and validated; validation failures are
/// aggregated across trajectories into one error.
inline Dataset load_long_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) raise(Errc::parse_error, "empty input");
  ++line_no;
  auto header = detail::split_csv_line(line, line_no);
  int id_col = -1, time_col = -1, value_col = -1, label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string h = detail::trim(header[c]);
    for (char& ch : h) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (h == "id") id_col = static_cast<int>(c);
    else if (h == "time") time_col = static_cast<int>(c);
    else if (h == "value") value_col = static_cast<int>(c);
    else if (h == "label") label_col = static_cast<int>(c);
  }
  if (id_col < 0 || time_col < 0 || value_col < 0)
    raise(Errc::parse_error, "header must contain id, time and value columns");

  struct Rows {
    std::vector<double> times, values;
    std::optional<std::string> label;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Rows> grouped;

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line, line_no);
    auto need = static_cast<std::size_t>(std::max({id_col, time_col, value_col, label_col})) + 1;
    if (fields.size() < need)
      raise(Errc::parse_error, "line " + std::to_string(line_no) + ": expected at least " +
                                   std::to_string(need) + " fields, got " +
                                   std::to_string(fields.size()));
    std::string id = detail::trim(fields[id_col]);
    if (id.empty())
      raise(Errc::parse_error, "line " + std::to_string(line_no) + ": empty id");
    auto [it, inserted] = grouped.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.times.push_back(detail::parse_double(fields[time_col], line_no, "time"));
    it->second.values.push_back(detail::parse_double(fields[value_col], line_no, "value"));
    if (label_col >= 0) {
      std::string label = detail::trim(fields[label_col]);
      if (it->second.label && *it->second.label != label)
        raise(Errc::parse_error, "line " + std::to_string(line_no) + ": id '" + id +
                                     "' has inconsistent labels");
      it->second.label = label;
    }
  }
  if (order.empty()) raise(Errc::parse_error, "no data rows");

  Dataset out;
  std::string problems;
  std::optional<Errc> first_code;
  for (const auto& id : order) {
    auto& rows = grouped[id];
    // sort observations by time; duplicate times surface as a validation error
    std::vector<std::size_t> perm(rows.times.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a, std::size_t b) { return rows.times[a] < rows.times[b]; });
    std::vector<double> t(perm.size()), v(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      t[i] = rows.times[perm[i]];
      v[i] = rows.values[perm[i]];
    }
    try {
      out.trajectories.push_back(validate_trajectory(id, std::move(t), std::move(v)));
    } catch (const Error& e) {
      if (!first_code) first_code = e.code();
      if (!problems.empty()) problems += "; ";
      problems += e.what();
      continue;
    }
  }
  if (first_code) raise(*first_code, "invalid trajectories: " + problems);

  if (label_col >= 0) {
    // Integer labels are used as-is; other strings are enumerated by first
    // appearance starting at 1.
    out.has_labels = true;
    std::map<std::string, int> assigned;
    int next = 1;
    for (const auto& traj : out.trajectories) {
      const auto& label = grouped[traj.id].label;
      std::string text = label ? *label : "";
      char* end = nullptr;
      long v = std::strtol(text.c_str(), &end, 10);
      if (!text.empty() && end == text.c_str() + text.size()) {
        out.labels.push_back(static_cast<int>(v));
      } else {
        auto [it, inserted] = assigned.try_emplace(text, next);
        if (inserted) ++next;
        out.labels.push_back(it->second);
      }
    }
  }
  return out;
}

/// Wide-format reader: header `id,<t1>,<t2>,...` with one shared, strictly
/// increasing time grid; each row is one trajectory.
inline Dataset load_wide_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) raise(Errc::parse_error, "empty input");
  ++line_no;
  auto header = detail::split_csv_line(line, line_no);
  if (header.size() < 4 || detail::trim(header[0]) != "id")
    raise(Errc::parse_error, "wide header must be: id,<time>,<time>,... with >= 3 times");
  std::vector<double> times;
  for (std::size_t c = 1; c < header.size(); ++c)
    times.push_back(detail::parse_double(header[c], line_no, "time header"));
  for (std::size_t c = 0; c + 1 < times.size(); ++c)
    if (!(times[c] < times[c + 1]))
      raise(Errc::parse_error, "wide header times must be strictly increasing");

  Dataset out;
  std::string problems;
  std::optional<Errc> first_code;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line, line_no);
    if (fields.size() != header.size())
      raise(Errc::parse_error, "line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(header.size()) + " fields, got " +
                                   std::to_string(fields.size()));
    std::string id = detail::trim(fields[0]);
    std::vector<double> values;
    for (std::size_t c = 1; c < fields.size(); ++c)
      values.push_back(detail::parse_double(fields[c], line_no, "value"));
    try {
      out.trajectories.push_back(validate_trajectory(id, times, std::move(values)));
    } catch (const Error& e) {
      if (!first_code) first_code = e.code();
      if (!problems.empty()) problems += "; ";
      problems += e.what();
    }
  }
  if (out.trajectories.empty() && !first_code) raise(Errc::parse_error, "no data rows");
  if (first_code) raise(*first_code, "invalid trajectories: " + problems);
  return out;
}

/// Loads a trajectory file, detecting the format from the header: a header
/// containing id/time/value columns is long format, a header of id followed
/// by numeric times is wide format.
inline Dataset load_trajectories_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot open '" + path + "'");
  std::string first;
  if (!std::getline(in, first)) raise(Errc::parse_error, "'" + path + "' is empty");
  in.seekg(0);
  auto header = detail::split_csv_line(first, 1);
  bool has_time = false, has_value = false;
  for (auto& h : header) {
    std::string t = detail::trim(h);
    for (char& ch : t) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (t == "time") has_time = true;
    if (t == "value") has_value = true;
  }
  try {
    if (has_time && has_value) return load_long_csv(in);
    return load_wide_csv(in);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

/// Writes a dataset in long format (id,time,value[,label]), one observation
/// per row, 17-significant-digit numbers.
inline std::string long_csv_string(const Dataset& data) {
  std::ostringstream os;
  os << "id,time,value";
  if (data.has_labels) os << ",label";
  os << '\n';
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    const auto& traj = data.trajectories[i];
    for (int j = 0; j < traj.size(); ++j) {
      os << traj.id << ',' << format_double(traj.times[j]) << ','
         << format_double(traj.values[j]);
      if (data.has_labels) os << ',' << data.labels[i];
      os << '\n';
    }
  }
  return os.str();
}

inline void write_long_csv(const std::string& path, const Dataset& data) {
  atomic_write_file(path, long_csv_string(data));
}

/// Reads per-id labels for evaluation. Accepts an assignments file
/// (id,cluster,...), a labeled long file (id,...,label), or any two-column
/// id,<label> file; repeated ids must agree.
inline std::vector<std::pair<std::string, int>> load_labels_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) raise(Errc::parse_error, path + ": empty input");
  ++line_no;
  auto header = detail::split_csv_line(line, line_no);
  int id_col = -1, label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string h = detail::trim(header[c]);
    for (char& ch : h) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (h == "id") id_col = static_cast<int>(c);
    if (h == "cluster" || h == "label") label_col = static_cast<int>(c);
  }
  if (id_col < 0)
    raise(Errc::parse_error, path + ": no id column");
  if (label_col < 0) {
    if (header.size() != 2)
      raise(Errc::parse_error, path + ": no cluster/label column");
    label_col = 1 - id_col;
  }

  std::vector<std::pair<std::string, int>> out;
  std::map<std::string, int> seen;
  std::map<std::string, int> mapped;
  int next = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line, line_no);
    if (fields.size() <= static_cast<std::size_t>(std::max(id_col, label_col)))
      raise(Errc::parse_error, path + ": line " + std::to_string(line_no) + ": too few fields");
    std::string id = detail::trim(fields[id_col]);
    std::string text = detail::trim(fields[label_col]);
    char* end = nullptr;
    long v = std::strtol(text.c_str(), &end, 10);
    int label;
    if (!text.empty() && end == text.c_str() + text.size()) {
      label = static_cast<int>(v);
    } else {
      auto [it, inserted] = mapped.try_emplace(text, next);
      if (inserted) ++next;
      label = it->second;
    }
    auto [it, inserted] = seen.try_emplace(id, label);
    if (!inserted) {
      if (it->second != label)
        raise(Errc::parse_error,
              path + ": line " + std::to_string(line_no) + ": id '" + id +
                  "' has conflicting labels");
      continue;
    }
    out.emplace_back(id, label);
  }
  if (out.empty()) raise(Errc::parse_error, path + ": no label rows");
  return out;
}

}  // namespace fbtc
