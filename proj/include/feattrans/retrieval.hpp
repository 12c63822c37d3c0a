#pragma once

#include "feattrans/feature_io.hpp"
#include "feattrans/translator.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace feattrans {

/// References ordered by ascending Euclidean distance to the query, ties by id.
struct RankingList {
  std::string query_id;
  std::vector<std::string> ids;
  std::vector<double> distances;
};

struct EvalResult {
  double map = 0.0;  // percent
  std::map<std::string, double> per_query_ap;  // percent, so `map` is their mean
  std::size_t n_queries = 0;
};

RankingList rank(const Vector& query, const FeatureSet& refs, const std::string& query_id = {},
                 bool exclude_self = false);

/// Non-interpolated AP over the full list.
double average_precision(const RankingList& ranking, const std::set<std::string>& relevant);

/// mAP over every query in `gt`. A query id that also appears among the references is
/// removed from its own ranking.
EvalResult evaluate(const FeatureSet& queries, const FeatureSet& refs, const GroundTruth& gt,
                    std::size_t jobs = 1);

/// Translates the source-side references with `model`, then scores target-side queries
/// against them.
EvalResult cross_feature_evaluate(const TranslatorModel& model, const FeatureSet& source_refs,
                                  const FeatureSet& target_queries, const GroundTruth& gt,
                                  std::size_t jobs = 1);

/// `query_id,ap` rows followed by a `mAP,<value>` summary line.
void write_eval_csv(const EvalResult& result, const std::filesystem::path& path);

}  // namespace feattrans
