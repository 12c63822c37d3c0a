#pragma once

#include "feattrans/affinity.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace feattrans {

struct MstEdge {
  std::string a;  // a < b
  std::string b;
  double weight = 0.0;

  bool operator==(const MstEdge&) const = default;
};

struct MstResult {
  std::vector<std::string> nodes;
  std::vector<MstEdge> edges;  // in the order Kruskal accepted them
  double total_weight = 0.0;

  bool operator==(const MstResult&) const = default;
};

/// Disjoint-set forest with path compression and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n);
  std::size_t find(std::size_t x);
  // False when x and y were already connected.
  bool unite(std::size_t x, std::size_t y);

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

/// Kruskal over the complete graph whose edge (i, j) weighs U[i][j]. Ties are broken by
/// the lexicographic name pair, so the result does not depend on node order.
MstResult kruskal(const AffinityMatrix& u);

enum class ExportFormat { Dot, Json };

std::string to_dot(const MstResult& mst);
std::string to_json(const MstResult& mst);
MstResult mst_from_json(const std::string& text);
void export_mst(const MstResult& mst, ExportFormat format, const std::filesystem::path& path);

}  // namespace feattrans
