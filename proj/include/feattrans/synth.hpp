#pragma once

#include "feattrans/feature_io.hpp"

#include <span>
#include <string>
#include <vector>

namespace feattrans {

/// How a synthetic feature type is derived.
///
///  - OrthogonalLinear: the shared latent through a seeded matrix with orthonormal columns.
///    Two such members over the same latent form a homologous pair.
///  - NonlinearMlp: the shared latent through a fixed random two-layer ReLU map.
///  - Independent: its own latent draw around its own class centers (same classes as the
///    ground truth), through its own orthogonal map. The centers span only
///    `independent_rank` latent coordinates, so some classes crowd together and the member
///    separates a different subset of classes than the shared latent does.
enum class Family { OrthogonalLinear, NonlinearMlp, Independent };

const char* to_string(Family family);
Family parse_family(const std::string& text);

struct MemberSpec {
  std::string name;
  Family family = Family::OrthogonalLinear;
};

struct SynthSpec {
  std::size_t n_vectors = 1000;
  Eigen::Index latent_dim = 16;
  Eigen::Index output_dim = 32;
  std::vector<MemberSpec> members;
  double noise_sigma = 0.01;
  std::size_t n_clusters = 5;
  double cluster_spread = 0.04;  // per-coordinate std-dev around a unit-norm center
  Eigen::Index independent_rank = 2;  // span of an independent member's centers; 0 = latent_dim
  std::uint64_t seed = 0;
};

struct SynthData {
  std::vector<FeatureSet> members;        // L2-normalized, one per MemberSpec
  GroundTruth ground_truth;               // same-cluster ids, self excluded
  Matrix latent;                          // shared unit-norm latent, one row per id
  std::vector<std::size_t> cluster_of;    // shared cluster label per id
};

/// Id of row i, zero-padded so that lexicographic order equals row order.
std::string synth_id(std::size_t i);

struct IdSplit {
  std::vector<std::string> train;  // both sorted
  std::vector<std::string> test;
};

/// Seeded random holdout of round(fraction * |ids|) ids.
IdSplit split_holdout(std::span<const std::string> ids, double fraction, std::uint64_t seed);

/// Deterministic in `spec`. Streams come from std::mt19937_64 seeded through derive_seed().
SynthData generate(const SynthSpec& spec);

}  // namespace feattrans
