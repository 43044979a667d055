#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../core/dataset.hpp"

namespace xmurf::ordering {

using Permutation = std::vector<std::size_t>;

/// Throws ConfigError unless perm is a bijection on [0, m).
inline void validate_permutation(const Permutation& perm, std::size_t m) {
  if (perm.size() != m)
    throw ConfigError("permutation has " + std::to_string(perm.size()) + " entries, expected " +
                      std::to_string(m));
  std::vector<char> seen(m, 0);
  for (std::size_t k = 0; k < m; ++k) {
    if (perm[k] >= m || seen[perm[k]]++)
      throw ConfigError("permutation entry " + std::to_string(k) + " is out of range or repeated");
  }
}

inline Permutation inverse(const Permutation& perm) {
  validate_permutation(perm, perm.size());
  Permutation inv(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) inv[perm[k]] = k;
  return inv;
}

/// P_o[i][j] = P[perm[i]][perm[j]]; ids follow the rows.
inline ProximityMatrix reorder(const ProximityMatrix& p, const Permutation& perm) {
  const std::size_t m = p.size();
  validate_permutation(perm, m);
  std::vector<std::string> ids(m);
  for (std::size_t i = 0; i < m; ++i) ids[i] = p.ids[perm[i]];
  ProximityMatrix out(std::move(ids));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = p(perm[i], perm[j]);
  return out;
}

/// Mean of P over consecutive positions of an order.
inline double mean_adjacent_similarity(const ProximityMatrix& p, const Permutation& order) {
  if (order.size() < 2) return 1.0;
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < order.size(); ++k) s += p(order[k], order[k + 1]);
  return s / static_cast<double>(order.size() - 1);
}

inline nlohmann::json permutation_to_json(const Permutation& perm, const std::vector<std::string>& ids) {
  return {{"order", perm}, {"ids", ids}};
}

inline void save_permutation(const Permutation& perm, const std::vector<std::string>& ids,
                             const std::string& path) {
  xmurf::detail::write_file(path, permutation_to_json(perm, ids).dump() + "\n");
}

/// Reads {"order": [...], "ids": [...]} (or a bare list).
inline Permutation load_permutation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  Permutation perm;
  try {
    const auto j = nlohmann::json::parse(in);
    perm = (j.is_array() ? j : j.at("order")).get<Permutation>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  validate_permutation(perm, perm.size());
  return perm;
}

/// A block of seriated positions [start, end] (inclusive) carrying one label.
struct ClusterRange {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string label;
  bool operator==(const ClusterRange&) const = default;
};

using ClusterRanges = std::vector<ClusterRange>;

/// Throws ConfigError on reversed, out-of-range or overlapping ranges.
inline void validate(const ClusterRanges& ranges, std::size_t m) {
  std::vector<const ClusterRange*> sorted;
  for (const auto& r : ranges) {
    if (r.start > r.end) throw ConfigError("range '" + r.label + "' has start > end");
    if (r.end >= m)
      throw ConfigError("range '" + r.label + "' ends at " + std::to_string(r.end) +
                        ", outside [0, " + std::to_string(m) + ")");
    if (r.label.empty()) throw ConfigError("range with empty label");
    sorted.push_back(&r);
  }
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->start < b->start; });
  for (std::size_t k = 1; k < sorted.size(); ++k)
    if (sorted[k]->start <= sorted[k - 1]->end)
      throw ConfigError("ranges '" + sorted[k - 1]->label + "' and '" + sorted[k]->label + "' overlap");
}

inline ClusterRanges cluster_ranges_from_json(const nlohmann::json& j) {
  ClusterRanges out;
  try {
    for (const auto& r : j) {
      const auto start = r.at("start").get<long long>();
      const auto end = r.at("end").get<long long>();
      if (start < 0 || end < 0) throw ConfigError("negative range index");
      const auto& lab = r.at("label");
      out.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(end),
                     lab.is_string() ? lab.get<std::string>() : lab.dump()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("cluster ranges: ") + e.what());
  }
  return out;
}

inline ClusterRanges load_cluster_ranges(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return cluster_ranges_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Row perm[i] gets the label of the range holding seriated position i.
/// Uncovered rows are left out; labeled rows keep their original order.
inline LabeledDataset apply_cluster_ranges(const Dataset& data, const Permutation& perm,
                                           const ClusterRanges& ranges) {
  const std::size_t m = data.rows();
  validate_permutation(perm, m);
  validate(ranges, m);
  if (ranges.empty()) warn("apply_cluster_ranges: no ranges given, result is empty");
  std::vector<const std::string*> label_of(m, nullptr);
  for (const auto& r : ranges)
    for (std::size_t pos = r.start; pos <= r.end; ++pos) label_of[perm[pos]] = &r.label;
  LabeledDataset out;
  out.base.feature_names = data.feature_names;
  for (std::size_t i = 0; i < m; ++i) {
    if (!label_of[i]) continue;
    out.base.append(data.ids[i], data.row(i));
    out.labels.push_back(*label_of[i]);
  }
  return out;
}

/// Mean off-diagonal similarity inside seriated block [start, end] of P_o.
inline double block_mean_similarity(const ProximityMatrix& ordered, std::size_t start, std::size_t end) {
  if (start > end || end >= ordered.size()) throw ConfigError("block outside the matrix");
  if (start == end) return 1.0;
  double s = 0.0;
  for (std::size_t i = start; i <= end; ++i)
    for (std::size_t j = start; j <= end; ++j)
      if (i != j) s += ordered(i, j);
  const auto n = static_cast<double>(end - start + 1);
  return s / (n * (n - 1.0));
}

/// One line per range: label, bounds, size and mean in-block similarity.
inline std::string describe_blocks(const ProximityMatrix& ordered, const ClusterRanges& ranges) {
  validate(ranges, ordered.size());
  std::ostringstream os;
  for (const auto& r : ranges)
    os << r.label << " [" << r.start << ", " << r.end << "] n=" << (r.end - r.start + 1)
       << " mean_similarity=" << block_mean_similarity(ordered, r.start, r.end) << "\n";
  return os.str();
}

}  // namespace xmurf::ordering
