#pragma once

#include "feattrans/common.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace feattrans {

/// One feature type over one image set. Row i of `vectors` belongs to `ids[i]`.
///
/// Files store 32-bit floats; everything in memory is 64-bit.
struct FeatureSet {
  std::string name;
  std::vector<std::string> ids;
  Matrix vectors;
  bool normalized = false;

  Eigen::Index dim() const { return vectors.cols(); }
  std::size_t size() const { return ids.size(); }
};

/// Source and target rows for the same images, in the same order.
struct PairedSet {
  FeatureSet source;
  FeatureSet target;
  std::size_t dropped = 0;  // ids present in only one of the inputs

  const std::vector<std::string>& ids() const { return source.ids; }
  std::size_t size() const { return source.ids.size(); }
};

/// query id -> relevant reference ids
struct GroundTruth {
  std::map<std::string, std::set<std::string>> relevant;
};

// Throws on any broken invariant: row count, duplicate ids, non-finite values, and
// unit norms when `fs.normalized` is set.
void validate(const FeatureSet& fs);

FeatureSet load_feature_set(const std::filesystem::path& vec_path,
                            const std::filesystem::path& ids_path, const std::string& name);
void save_feature_set(const FeatureSet& fs, const std::filesystem::path& vec_path,
                      const std::filesystem::path& ids_path);

// Raw record-file access. Every record is `u32 dim` followed by `dim` little-endian f32.
Matrix read_vector_file(const std::filesystem::path& path);
void write_vector_file(const Matrix& rows, const std::filesystem::path& path);

std::vector<std::string> read_ids_file(const std::filesystem::path& path);
void write_ids_file(std::span<const std::string> ids, const std::filesystem::path& path);

FeatureSet l2_normalize(const FeatureSet& fs);

PairedSet align_pairs(const FeatureSet& src, const FeatureSet& tgt);

// Rows of `fs` for `ids`, in the order given.
FeatureSet subset(const FeatureSet& fs, std::span<const std::string> ids);

GroundTruth load_ground_truth(const std::filesystem::path& path);
void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);

// Keeps queries in `query_ids`, drops relevant ids outside `ref_ids` and the query's own id,
// then drops queries left with nothing relevant.
GroundTruth restrict_ground_truth(const GroundTruth& gt, std::span<const std::string> query_ids,
                                  std::span<const std::string> ref_ids);

}  // namespace feattrans
