#pragma once

// Independent reference computations used to check the library. None of these call into
// the code paths they verify.

#include "feattrans/feature_io.hpp"
#include "feattrans/nn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using feattrans::Matrix;

// Central differences of `loss` over every entry of `param`, restoring it afterwards.
inline Matrix finite_difference(Matrix& param, const std::function<double()>& loss, double h = 1e-5) {
  Matrix g(param.rows(), param.cols());
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    double& x = param.data()[i];
    const double saved = x;
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double relative_error(const Matrix& a, const Matrix& b) {
  const double denom = a.norm() + b.norm();
  return denom == 0.0 ? 0.0 : (a - b).norm() / denom;
}

inline double plain_distance(const Matrix& a, Eigen::Index ra, const Matrix& b, Eigen::Index rb) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double d = a(ra, c) - b(rb, c);
    s += d * d;
  }
  return std::sqrt(s);
}

// AP by enumeration: rank of every relevant item is counted directly, no sorting.
inline double brute_force_ap(const feattrans::FeatureSet& queries, std::size_t q,
                             const feattrans::FeatureSet& refs, const std::set<std::string>& relevant) {
  const std::string& qid = queries.ids[q];
  std::vector<double> dist(refs.size());
  for (std::size_t j = 0; j < refs.size(); ++j) dist[j] = plain_distance(queries.vectors, Eigen::Index(q), refs.vectors, Eigen::Index(j));
  auto position = [&](std::size_t r) {
    std::size_t before = 0;
    for (std::size_t j = 0; j < refs.size(); ++j) {
      if (j == r || refs.ids[j] == qid) continue;
      if (dist[j] < dist[r] || (dist[j] == dist[r] && refs.ids[j] < refs.ids[r])) ++before;
    }
    return before + 1;
  };
  std::vector<std::size_t> ranks;
  for (std::size_t j = 0; j < refs.size(); ++j) {
    if (refs.ids[j] != qid && relevant.contains(refs.ids[j])) ranks.push_back(position(j));
  }
  double sum = 0.0;
  for (std::size_t r : ranks) {
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [&](std::size_t o) { return o <= r; });
    sum += double(hits) / double(r);
  }
  return sum / double(relevant.size());
}

// Minimum spanning-tree weight over all (n-1)-edge subsets of the complete graph.
// The chosen weights are summed in ascending order.
inline double brute_force_mst_weight(const Matrix& w) {
  const int n = int(w.rows());
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  const int m = int(edges.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(std::size_t(m), 0);
  std::fill(pick.end() - (n - 1), pick.end(), 1);
  do {
    // connectivity by repeated relaxation
    std::vector<int> seen(std::size_t(n), 0);
    seen[0] = 1;
    for (bool grew = true; grew;) {
      grew = false;
      for (int e = 0; e < m; ++e) {
        if (!pick[std::size_t(e)]) continue;
        auto [a, b] = edges[std::size_t(e)];
        if (seen[std::size_t(a)] != seen[std::size_t(b)]) {
          seen[std::size_t(a)] = seen[std::size_t(b)] = 1;
          grew = true;
        }
      }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) continue;
    std::vector<double> ws;
    for (int e = 0; e < m; ++e) {
      if (pick[std::size_t(e)]) ws.push_back(w(edges[std::size_t(e)].first, edges[std::size_t(e)].second));
    }
    std::sort(ws.begin(), ws.end());
    best = std::min(best, std::accumulate(ws.begin(), ws.end(), 0.0));
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * double(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = double(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxx == 0 || syy == 0 ? 0.0 : sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle
