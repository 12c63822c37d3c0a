#include "feattrans/mst.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <tuple>
#include <utility>

namespace feattrans {

namespace {

std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + '"';
}

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t UnionFind::find(std::size_t x) {
  std::size_t root = x;
  while (parent_[root] != root) root = parent_[root];
  while (parent_[x] != root) x = std::exchange(parent_[x], root);
  return root;
}

bool UnionFind::unite(std::size_t x, std::size_t y) {
  x = find(x);
  y = find(y);
  if (x == y) return false;
  if (size_[x] < size_[y]) std::swap(x, y);
  parent_[y] = x;
  size_[x] += size_[y];
  return true;
}

MstResult kruskal(const AffinityMatrix& u) {
  const std::size_t n = u.names.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "MST needs at least 2 nodes");
  if (u.values.rows() != Eigen::Index(n) || u.values.cols() != Eigen::Index(n)) {
    throw Error(ErrorCode::DimMismatch, "matrix shape does not match its names");
  }
  if (!u.values.allFinite()) throw Error(ErrorCode::NonFinite, "affinity matrix");
  if (!is_symmetric(u)) throw Error(ErrorCode::NotUndirected, "affinity matrix is not symmetric");
  {
    auto sorted = u.names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw Error(ErrorCode::DuplicateId, "repeated node name");
    }
  }

  struct Candidate {
    double weight;
    std::size_t i, j;  // names[i] < names[j]
  };
  std::vector<Candidate> candidates;
  candidates.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool ordered = u.names[i] < u.names[j];
      candidates.push_back({u.values(Eigen::Index(i), Eigen::Index(j)), ordered ? i : j, ordered ? j : i});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& x, const Candidate& y) {
    return std::tie(x.weight, u.names[x.i], u.names[x.j]) < std::tie(y.weight, u.names[y.i], u.names[y.j]);
  });

  MstResult out;
  out.nodes = u.names;
  std::sort(out.nodes.begin(), out.nodes.end());
  UnionFind forest(n);
  for (const auto& c : candidates) {
    if (!forest.unite(c.i, c.j)) continue;
    out.edges.push_back({u.names[c.i], u.names[c.j], c.weight});
    out.total_weight += c.weight;
    if (out.edges.size() == n - 1) break;
  }
  return out;
}

std::string to_dot(const MstResult& mst) {
  std::string out = "graph mst {\n";
  for (const auto& node : mst.nodes) out += "  " + dot_quote(node) + ";\n";
  for (const auto& e : mst.edges) {
    out += "  " + dot_quote(e.a) + " -- " + dot_quote(e.b) + " [len=" + format_double("%.17g", e.weight) +
           ", label=\"" + format_double("%.3f", e.weight) + "\"];\n";
  }
  out += "}\n";
  return out;
}

std::string to_json(const MstResult& mst) {
  nlohmann::ordered_json j;
  j["nodes"] = mst.nodes;
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : mst.edges) j["edges"].push_back({{"a", e.a}, {"b", e.b}, {"w", e.weight}});
  j["total_weight"] = mst.total_weight;
  return j.dump(2) + "\n";
}

MstResult mst_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MstResult out;
    out.nodes = j.at("nodes").get<std::vector<std::string>>();
    for (const auto& e : j.at("edges")) {
      out.edges.push_back({e.at("a").get<std::string>(), e.at("b").get<std::string>(), e.at("w").get<double>()});
    }
    out.total_weight = j.at("total_weight").get<double>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("MST JSON: ") + e.what());
  }
}

void export_mst(const MstResult& mst, ExportFormat format, const std::filesystem::path& path) {
  const std::string text = format == ExportFormat::Dot ? to_dot(mst) : to_json(mst);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

}  // namespace feattrans
