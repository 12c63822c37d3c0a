#pragma once

#include "feattrans/affinity.hpp"
#include "feattrans/retrieval.hpp"
#include "feattrans/synth.hpp"
#include "feattrans/translator.hpp"

#include <map>
#include <string>
#include <thread>
#include <vector>

namespace fixture {

using namespace feattrans;

// Hyperparameters for desk-scale synthetic runs. The default learning rate (1e-5) needs far
// more steps than a 1000-vector fixture provides.
inline TrainConfig synthetic_train_config(std::uint64_t seed = 3) {
  TrainConfig cfg;
  cfg.lr = 3e-3;
  cfg.batch_size = 32;
  cfg.max_epochs = 200;
  cfg.patience = 20;
  cfg.val_fraction = 0.1;
  cfg.seed = seed;
  return cfg;
}

/// Synthetic feature types with a train/test split of the ids. Ground truth covers the test
/// ids only, which act as both queries and references.
struct SyntheticData {
  SynthData data;
  IdSplit split;
  GroundTruth test_gt;

  const FeatureSet& member(const std::string& name) const {
    for (const auto& m : data.members) {
      if (m.name == name) return m;
    }
    throw Error(ErrorCode::InvalidArgument, "no member " + name);
  }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& m : data.members) out.push_back(m.name);
    return out;
  }
  PairedSet train_pair(const std::string& s, const std::string& t) const {
    return align_pairs(subset(member(s), split.train), subset(member(t), split.train));
  }
  PairedSet test_pair(const std::string& s, const std::string& t) const {
    return align_pairs(subset(member(s), split.test), subset(member(t), split.test));
  }
};

inline SyntheticData make_data(const SynthSpec& spec, double holdout = 0.2) {
  SyntheticData out;
  out.data = generate(spec);
  out.split = split_holdout(out.data.members.front().ids, holdout, spec.seed);
  out.test_gt = restrict_ground_truth(out.data.ground_truth, out.split.test, out.split.test);
  return out;
}

/// 1000 vectors, dim 32, 5 clusters, noise 0.01; two homologous members (h1, h2 over the
/// shared latent) and two independent ones (i1, i2) with their own class geometry.
inline SynthSpec four_family_spec(std::uint64_t seed = 7) {
  SynthSpec spec;
  spec.n_vectors = 1000;
  spec.latent_dim = 16;
  spec.output_dim = 32;
  spec.n_clusters = 5;
  spec.noise_sigma = 0.01;
  spec.seed = seed;
  spec.members = {{"h1", Family::OrthogonalLinear},
                  {"h2", Family::OrthogonalLinear},
                  {"i1", Family::Independent},
                  {"i2", Family::Independent}};
  return spec;
}

// Twice as many classes as four_family_spec(). Independent members crowd theirs into a
// rank-2 subspace, so each heterogeneous member resolves a different set of class pairs.
inline SynthSpec grid_spec(std::uint64_t seed = 7) {
  auto spec = four_family_spec(seed);
  spec.n_clusters = 10;
  return spec;
}

// Same members without observation noise: h1 -> h2 is then an exact rotation.
inline SynthSpec rotation_spec(std::uint64_t seed = 7) {
  auto spec = four_family_spec(seed);
  spec.noise_sigma = 0.0;
  return spec;
}

inline TrainResult train_pair(const SyntheticData& d, const std::string& s, const std::string& t,
                              ModelKind kind = ModelKind::Hae, std::uint64_t seed = 1,
                              const TrainConfig& cfg = synthetic_train_config()) {
  const auto paired = d.train_pair(s, t);
  BuildOptions opts;
  opts.kind = kind;
  opts.seed = seed;
  opts.source_name = s;
  opts.target_name = t;
  auto model = build(paired.source.dim(), paired.target.dim(), opts);
  return train(std::move(model), paired, cfg);
}

/// Every ordered pair of members, diagonal included.
struct Grid {
  std::vector<std::string> names;
  std::map<NamePair, TranslatorModel> models;
  std::map<NamePair, PairedSet> test_pairs;
};

inline Grid train_grid(const SyntheticData& d, std::size_t jobs = std::thread::hardware_concurrency()) {
  Grid grid;
  grid.names = d.names();
  std::vector<NamePair> order;
  for (const auto& s : grid.names)
    for (const auto& t : grid.names) order.emplace_back(s, t);
  std::vector<TranslatorModel> trained(order.size());
  parallel_for(order.size(), jobs, [&](std::size_t k) {
    trained[k] = train_pair(d, order[k].first, order[k].second, ModelKind::Hae, 1 + k).model;
  });
  for (std::size_t k = 0; k < order.size(); ++k) {
    grid.models.emplace(order[k], std::move(trained[k]));
    grid.test_pairs.emplace(order[k], d.test_pair(order[k].first, order[k].second));
  }
  return grid;
}

}  // namespace fixture
