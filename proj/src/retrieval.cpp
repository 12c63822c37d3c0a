#include "feattrans/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <unordered_map>

namespace feattrans {

RankingList rank(const Vector& query, const FeatureSet& refs, const std::string& query_id,
                 bool exclude_self) {
  if (query.size() != refs.dim()) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(query.size()) + ", refs dim " +
                                            std::to_string(refs.dim()));
  }
  const Vector dist = (refs.vectors.rowwise() - query.transpose()).rowwise().norm();

  std::vector<std::size_t> order;
  order.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (exclude_self && refs.ids[i] == query_id) continue;
    order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = dist(Eigen::Index(a)), db = dist(Eigen::Index(b));
    if (da != db) return da < db;
    return refs.ids[a] < refs.ids[b];
  });

  RankingList out;
  out.query_id = query_id;
  out.ids.reserve(order.size());
  out.distances.reserve(order.size());
  for (auto i : order) {
    out.ids.push_back(refs.ids[i]);
    out.distances.push_back(dist(Eigen::Index(i)));
  }
  return out;
}

double average_precision(const RankingList& ranking, const std::set<std::string>& relevant) {
  if (relevant.empty()) throw Error(ErrorCode::InvalidArgument, "empty relevant set for " + ranking.query_id);
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < ranking.ids.size(); ++k) {
    if (relevant.contains(ranking.ids[k])) {
      ++hits;
      sum += double(hits) / double(k + 1);
    }
  }
  if (hits != relevant.size()) {
    for (const auto& id : relevant) {
      if (std::find(ranking.ids.begin(), ranking.ids.end(), id) == ranking.ids.end()) {
        throw Error(ErrorCode::UnknownRelevantId, id + " (query " + ranking.query_id + ")");
      }
    }
  }
  return sum / double(relevant.size());
}

EvalResult evaluate(const FeatureSet& queries, const FeatureSet& refs, const GroundTruth& gt,
                    std::size_t jobs) {
  if (queries.dim() != refs.dim()) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(queries.dim()) + ", refs dim " +
                                            std::to_string(refs.dim()));
  }
  if (gt.relevant.empty()) throw Error(ErrorCode::EmptyInput, "ground truth has no queries");

  std::unordered_map<std::string, Eigen::Index> query_row, ref_row;
  for (std::size_t i = 0; i < queries.size(); ++i) query_row.emplace(queries.ids[i], Eigen::Index(i));
  for (std::size_t i = 0; i < refs.size(); ++i) ref_row.emplace(refs.ids[i], Eigen::Index(i));

  std::vector<const std::pair<const std::string, std::set<std::string>>*> items;
  for (const auto& entry : gt.relevant) {
    if (!query_row.contains(entry.first)) throw Error(ErrorCode::UnknownQueryId, entry.first);
    for (const auto& id : entry.second) {
      if (!ref_row.contains(id)) throw Error(ErrorCode::UnknownRelevantId, id + " (query " + entry.first + ")");
      if (id == entry.first) {
        throw Error(ErrorCode::UnreachableRelevant,
                    "query " + id + " lists itself as relevant but is excluded from its own ranking");
      }
    }
    items.push_back(&entry);
  }

  std::vector<double> ap(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    const auto& [query, relevant] = *items[i];
    const Vector q = queries.vectors.row(query_row.at(query)).transpose();
    ap[i] = average_precision(rank(q, refs, query, true), relevant);
  });

  EvalResult result;
  result.n_queries = items.size();
  for (std::size_t i = 0; i < items.size(); ++i) result.per_query_ap.emplace(items[i]->first, 100.0 * ap[i]);
  result.map = 100.0 * std::accumulate(ap.begin(), ap.end(), 0.0) / double(ap.size());
  return result;
}

EvalResult cross_feature_evaluate(const TranslatorModel& model, const FeatureSet& source_refs,
                                  const FeatureSet& target_queries, const GroundTruth& gt,
                                  std::size_t jobs) {
  if (target_queries.dim() != model.target_dim()) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(target_queries.dim()) +
                                            ", model target dim " + std::to_string(model.target_dim()));
  }
  return evaluate(target_queries, translate(model, source_refs), gt, jobs);
}

void write_eval_csv(const EvalResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << std::setprecision(17) << "query_id,ap\n";
  for (const auto& [query, ap] : result.per_query_ap) out << query << ',' << ap << '\n';
  out << "mAP," << result.map << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

}  // namespace feattrans
