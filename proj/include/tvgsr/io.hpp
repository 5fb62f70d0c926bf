// CSV readers and writers for signal matrices, masks and dynamic graphs.
//
// Matrices are n rows x p columns without a header, doubles written in the
// shortest form that parses back to the same value. Graph files carry the
// header `t,i,j,w` and one row per undirected edge per slot.

#pragma once

#include "tvgsr/graph_core.hpp"
#include "tvgsr/recovery.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace tvgsr::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError("not a number: '" + std::string(s) + "'");
  return x;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "': file not found or unreadable");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

inline Matrix read_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    for (auto field : split(line)) row.push_back(parse_double(field));
    if (!rows.empty() && row.size() != rows.front().size()) throw FormatError("ragged matrix CSV");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("empty matrix CSV");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

inline Matrix read_matrix(const std::string& path) {
  auto in = open_in(path);
  return read_matrix(in);
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

inline void write_matrix(const std::string& path, const Matrix& m) {
  auto out = open_out(path);
  write_matrix(out, m);
}

/// Mask files hold 1 for observed and 0 for missing entries.
inline Mask read_mask(const std::string& path) {
  const Matrix m = read_matrix(path);
  Mask mask(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (m(i, j) != 0.0 && m(i, j) != 1.0) throw FormatError("mask entries must be 0 or 1");
      mask(i, j) = m(i, j) == 1.0;
    }
  }
  return mask;
}

inline void write_mask(const std::string& path, const Mask& mask) { write_matrix(path, mask.cast<double>().matrix()); }

inline void write_graphs(std::ostream& out, const DynamicGraphSequence& graphs) {
  out << "t,i,j,w\n";
  for (Index t = 0; t < graphs.p(); ++t) {
    const WeightedGraph g = graphs[t].graph();
    for (const auto& e : g.edges()) {
      out << t << ',' << e.i << ',' << e.j << ',' << format_double(e.w) << '\n';
    }
  }
}

inline void write_graphs(const std::string& path, const DynamicGraphSequence& graphs) {
  auto out = open_out(path);
  write_graphs(out, graphs);
}

/// Reads a `t,i,j,w` file over n vertices. Slots without rows get an empty
/// graph; p is the largest slot index + 1 unless given explicitly.
inline DynamicGraphSequence read_graphs(std::istream& in, Index n, Index p = 0) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty graph CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,i,j,w") throw FormatError("graph CSV must start with header t,i,j,w");
  std::map<Index, std::vector<Edge>> slots;
  Index max_t = -1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 4) throw FormatError("graph CSV rows need 4 fields: " + line);
    const auto t = static_cast<Index>(parse_double(f[0]));
    const auto i = static_cast<Index>(parse_double(f[1]));
    const auto j = static_cast<Index>(parse_double(f[2]));
    if (t < 0) throw FormatError("negative time slot in graph CSV");
    slots[t].push_back({i, j, parse_double(f[3])});
    max_t = std::max(max_t, t);
  }
  if (p == 0) p = max_t + 1;
  if (p < 1) throw FormatError("graph CSV has no edges and no slot count was given");
  if (max_t >= p) throw FormatError("graph CSV slot index exceeds the signal length");
  std::vector<Laplacian> ls;
  for (Index t = 0; t < p; ++t) {
    auto it = slots.find(t);
    ls.emplace_back(WeightedGraph(n, it == slots.end() ? std::vector<Edge>{} : std::move(it->second)));
  }
  return DynamicGraphSequence(std::move(ls));
}

inline DynamicGraphSequence read_graphs(const std::string& path, Index n, Index p = 0) {
  auto in = open_in(path);
  return read_graphs(in, n, p);
}

}  // namespace tvgsr::io
