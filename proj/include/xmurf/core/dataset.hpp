#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace xmurf {

using FeatureVector = std::vector<double>;

/// M rows of Q real-valued features, stored row-major, with one id per row.
struct Dataset {
  std::vector<std::string> ids;
  std::vector<std::string> feature_names;
  std::vector<double> values;

  std::size_t rows() const noexcept { return ids.size(); }
  std::size_t cols() const noexcept { return feature_names.size(); }

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols(), cols()};
  }
  double at(std::size_t i, std::size_t q) const { return values[i * cols() + q]; }

  void append(std::string id, std::span<const double> x) {
    if (x.size() != cols())
      throw InvariantError("row '" + id + "' has " + std::to_string(x.size()) +
                           " values, expected " + std::to_string(cols()));
    ids.push_back(std::move(id));
    values.insert(values.end(), x.begin(), x.end());
  }

  bool operator==(const Dataset&) const = default;
};

/// Dataset plus one class label per row.
struct LabeledDataset {
  Dataset base;
  std::vector<std::string> labels;

  std::size_t rows() const noexcept { return base.rows(); }

  /// Sorted distinct labels; class index c refers to label_set()[c].
  std::vector<std::string> label_set() const {
    std::vector<std::string> s(labels);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }

  bool operator==(const LabeledDataset&) const = default;
};

/// Symmetric M x M similarity matrix with unit diagonal and entries in (0, 1].
struct ProximityMatrix {
  std::vector<std::string> ids;
  std::vector<double> values;

  ProximityMatrix() = default;
  explicit ProximityMatrix(std::vector<std::string> row_ids)
      : ids(std::move(row_ids)), values(ids.size() * ids.size(), 0.0) {}

  std::size_t size() const noexcept { return ids.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * size() + j]; }

  bool operator==(const ProximityMatrix&) const = default;
};

/// Throws InvariantError if the dataset shape or contents are inconsistent.
inline void validate(const Dataset& d) {
  if (d.values.size() != d.rows() * d.cols())
    throw InvariantError("dataset value count does not match rows x cols");
  std::unordered_set<std::string_view> seen;
  for (const auto& id : d.ids)
    if (!seen.insert(id).second) throw InvariantError("duplicate id '" + id + "'");
  for (std::size_t i = 0; i < d.rows(); ++i)
    for (std::size_t q = 0; q < d.cols(); ++q)
      if (!std::isfinite(d.at(i, q)))
        throw InvariantError("non-finite value at row " + std::to_string(i) + ", column '" +
                             d.feature_names[q] + "'");
}

/// Throws InvariantError naming the first offending (i, j).
inline void validate(const ProximityMatrix& p) {
  const std::size_t m = p.size();
  if (p.values.size() != m * m) throw InvariantError("proximity matrix is not square");
  for (std::size_t i = 0; i < m; ++i) {
    if (p(i, i) != 1.0)
      throw InvariantError("diagonal entry (" + std::to_string(i) + "," + std::to_string(i) +
                           ") is not 1");
    for (std::size_t j = 0; j < m; ++j) {
      const double v = p(i, j);
      if (!(v > 0.0 && v <= 1.0))
        throw InvariantError("entry (" + std::to_string(i) + "," + std::to_string(j) +
                             ") outside (0,1]");
      if (v != p(j, i))
        throw InvariantError("entry (" + std::to_string(i) + "," + std::to_string(j) +
                             ") breaks symmetry");
    }
  }
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline double parse_cell(std::string_view cell, std::size_t row, std::string_view column) {
  double v = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  auto where = [&] {
    return "row " + std::to_string(row) + ", column '" + std::string(column) + "'";
  };
  if (ec != std::errc() || ptr != last || cell.empty())
    throw ParseError(where() + ": non-numeric value '" + std::string(cell) + "'");
  if (!std::isfinite(v))
    throw ParseError(where() + ": non-finite value '" + std::string(cell) + "'");
  return v;
}

inline std::string format_double(double v) {
  char buf[40];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

// Parses "id[,label],f1,...,fQ" tables; `label_column` selects the variant.
inline void parse_table(const std::string& path, bool label_column, Dataset& d,
                        std::vector<std::string>* labels) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front().empty()) throw ParseError("'" + path + "': no header");
  const auto header = split_csv_line(lines.front());
  const std::size_t lead = label_column ? 2 : 1;
  if (header.size() < lead || header[0] != "id" || (label_column && header[1] != "label"))
    throw ParseError("'" + path + "': header must start with 'id'" +
                     std::string(label_column ? ",label" : ""));
  for (std::size_t c = lead; c < header.size(); ++c) d.feature_names.emplace_back(header[c]);
  if (d.feature_names.empty()) throw ParseError("'" + path + "': empty schema");

  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    if (cells.size() != header.size())
      throw ParseError("'" + path + "': row " + std::to_string(r) + " has " +
                       std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(header.size()));
    std::string id(cells[0]);
    if (id.empty()) throw ParseError("'" + path + "': row " + std::to_string(r) + ": empty id");
    if (!seen.insert(id).second)
      throw ParseError("'" + path + "': row " + std::to_string(r) + ": duplicate id '" + id +
                       "'");
    d.ids.push_back(std::move(id));
    if (labels) labels->emplace_back(cells[1]);
    for (std::size_t c = lead; c < cells.size(); ++c)
      d.values.push_back(parse_cell(cells[c], r, header[c]));
  }
}

}  // namespace detail

/// Reads a CSV whose header is `id,<feature names...>`. Row order is kept.
inline Dataset load_dataset(const std::string& path) {
  Dataset d;
  detail::parse_table(path, false, d, nullptr);
  return d;
}

/// Writes `d` as CSV with 17 significant digits, so load_dataset round-trips exactly.
inline void save_dataset(const Dataset& d, const std::string& path) {
  if (d.cols() == 0) throw ConfigError("empty schema");
  validate(d);
  std::string out = "id";
  for (const auto& name : d.feature_names) out += "," + name;
  out += '\n';
  for (std::size_t i = 0; i < d.rows(); ++i) {
    out += d.ids[i];
    for (double v : d.row(i)) out += "," + detail::format_double(v);
    out += '\n';
  }
  detail::write_file(path, out);
}

/// CSV with header `id,label,<feature names...>`.
inline LabeledDataset load_labeled_dataset(const std::string& path) {
  LabeledDataset ld;
  detail::parse_table(path, true, ld.base, &ld.labels);
  return ld;
}

inline void save_labeled_dataset(const LabeledDataset& ld, const std::string& path) {
  const Dataset& d = ld.base;
  if (d.cols() == 0) throw ConfigError("empty schema");
  if (ld.labels.size() != d.rows()) throw InvariantError("label count does not match rows");
  validate(d);
  std::string out = "id,label";
  for (const auto& name : d.feature_names) out += "," + name;
  out += '\n';
  for (std::size_t i = 0; i < d.rows(); ++i) {
    out += d.ids[i] + "," + ld.labels[i];
    for (double v : d.row(i)) out += "," + detail::format_double(v);
    out += '\n';
  }
  detail::write_file(path, out);
}

enum class MatrixFormat { csv, raw };

inline std::string raw_sidecar_path(const std::string& path) { return path + ".json"; }

/// csv: id header line then M rows of M values.
/// raw: row-major little-endian float64 (8*M*M bytes) plus `<path>.json` = {M, ids}.
inline void save_matrix(const ProximityMatrix& p, const std::string& path, MatrixFormat format) {
  validate(p);
  const std::size_t m = p.size();
  if (format == MatrixFormat::csv) {
    std::string out;
    for (std::size_t j = 0; j < m; ++j) out += (j ? "," : "") + p.ids[j];
    out += '\n';
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) out += (j ? "," : "") + detail::format_double(p(i, j));
      out += '\n';
    }
    detail::write_file(path, out);
    return;
  }
  std::string bytes(8 * m * m, '\0');
  for (std::size_t k = 0; k < m * m; ++k) {
    auto bits = std::bit_cast<std::uint64_t>(p.values[k]);
    for (int b = 0; b < 8; ++b) bytes[8 * k + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  detail::write_file(path, bytes);
  nlohmann::json meta = {{"M", m}, {"ids", p.ids}};
  detail::write_file(raw_sidecar_path(path), meta.dump(2) + "\n");
}

inline ProximityMatrix load_matrix(const std::string& path, MatrixFormat format) {
  ProximityMatrix p;
  if (format == MatrixFormat::csv) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw ParseError("'" + path + "': no header");
    for (auto id : detail::split_csv_line(lines.front())) p.ids.emplace_back(id);
    const std::size_t m = p.ids.size();
    if (lines.size() != m + 1)
      throw ParseError("'" + path + "': expected " + std::to_string(m) + " matrix rows");
    for (std::size_t r = 1; r <= m; ++r) {
      const auto cells = detail::split_csv_line(lines[r]);
      if (cells.size() != m)
        throw ParseError("'" + path + "': row " + std::to_string(r) + " is ragged");
      for (std::size_t c = 0; c < m; ++c) p.values.push_back(detail::parse_cell(cells[c], r, p.ids[c]));
    }
  } else {
    std::ifstream meta_in(raw_sidecar_path(path));
    if (!meta_in) throw IoError("cannot open '" + raw_sidecar_path(path) + "'");
    nlohmann::json meta;
    try {
      meta_in >> meta;
      p.ids = meta.at("ids").get<std::vector<std::string>>();
      if (meta.at("M").get<std::size_t>() != p.ids.size())
        throw ParseError("sidecar M does not match id count");
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("'" + raw_sidecar_path(path) + "': " + e.what());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t m = p.ids.size();
    if (bytes.size() != 8 * m * m)
      throw ParseError("'" + path + "': expected " + std::to_string(8 * m * m) + " bytes, got " +
                       std::to_string(bytes.size()));
    p.values.resize(m * m);
    for (std::size_t k = 0; k < m * m; ++k) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 * k + b])) << (8 * b);
      p.values[k] = std::bit_cast<double>(bits);
    }
  }
  validate(p);
  return p;
}

}  // namespace xmurf
