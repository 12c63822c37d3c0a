#include "feattrans/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

namespace feattrans {

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, sigma);
  Matrix m(rows, cols);
  // Fill row by row so the stream order does not depend on Eigen's storage order.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

void normalize_in_place(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n == 0.0) throw Error(ErrorCode::NumericFailure, "synthetic row collapsed to zero");
    m.row(i) /= n;
  }
}

// output_dim x latent_dim with orthonormal columns.
Matrix orthonormal_columns(Eigen::Index out, Eigen::Index in, std::mt19937_64& rng) {
  const Matrix g = gaussian(out, in, 1.0, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(out, in);
  // Fix column signs so the result is a deterministic function of g.
  const Matrix r = qr.matrixQR().topRows(in).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < in; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

// Unit-norm cluster centers plus isotropic spread, renormalized. Centers span the first
// `rank` latent coordinates.
Matrix clustered_latent(const SynthSpec& spec, std::span<const std::size_t> labels, Eigen::Index rank,
                        std::mt19937_64& rng) {
  Matrix centers = Matrix::Zero(Eigen::Index(spec.n_clusters), spec.latent_dim);
  centers.leftCols(rank) = gaussian(Eigen::Index(spec.n_clusters), rank, 1.0, rng);
  normalize_in_place(centers);
  Matrix z = gaussian(Eigen::Index(spec.n_vectors), spec.latent_dim, spec.cluster_spread, rng);
  for (std::size_t i = 0; i < spec.n_vectors; ++i) z.row(Eigen::Index(i)) += centers.row(Eigen::Index(labels[i]));
  normalize_in_place(z);
  return z;
}

void check_spec(const SynthSpec& spec) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, "synth: " + what); };
  if (spec.n_vectors == 0) fail("n_vectors must be positive");
  if (spec.n_clusters == 0 || spec.n_vectors % spec.n_clusters != 0) fail("n_clusters must divide n_vectors");
  if (spec.latent_dim < 1 || spec.output_dim < 1) fail("dims must be >= 1");
  if (!(spec.noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (!(spec.cluster_spread >= 0.0)) fail("cluster_spread must be >= 0");
  if (spec.members.empty()) fail("no members");
  std::set<std::string> names;
  for (const auto& m : spec.members) {
    if (m.name.empty() || !names.insert(m.name).second) fail("member names must be unique and non-empty");
    if (m.family != Family::NonlinearMlp && spec.output_dim < spec.latent_dim) {
      fail("orthogonal maps need output_dim >= latent_dim");
    }
  }
}

}  // namespace

const char* to_string(Family family) {
  switch (family) {
    case Family::OrthogonalLinear: return "orthogonal_linear";
    case Family::NonlinearMlp: return "nonlinear_mlp";
    case Family::Independent: return "independent";
  }
  return "unknown";
}

Family parse_family(const std::string& text) {
  if (text == "orthogonal_linear") return Family::OrthogonalLinear;
  if (text == "nonlinear_mlp") return Family::NonlinearMlp;
  if (text == "independent") return Family::Independent;
  throw Error(ErrorCode::InvalidArgument, "unknown synth family '" + text + "'");
}

std::string synth_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img%06zu", i);
  return buf;
}

IdSplit split_holdout(std::span<const std::string> ids, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorCode::InvalidArgument, "holdout fraction must lie in (0, 1)");
  std::vector<std::string> shuffled(ids.begin(), ids.end());
  std::mt19937_64 rng(derive_seed(seed, 3));
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto n_test = std::size_t(std::llround(fraction * double(ids.size())));
  if (n_test == 0 || n_test == ids.size()) throw Error(ErrorCode::InvalidArgument, "holdout leaves an empty side");
  IdSplit split;
  split.test.assign(shuffled.begin(), shuffled.begin() + std::ptrdiff_t(n_test));
  split.train.assign(shuffled.begin() + std::ptrdiff_t(n_test), shuffled.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

SynthData generate(const SynthSpec& spec) {
  check_spec(spec);
  const std::size_t n = spec.n_vectors;

  SynthData data;
  data.cluster_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) data.cluster_of[i] = i % spec.n_clusters;

  std::mt19937_64 latent_rng(derive_seed(spec.seed, 0));
  data.latent = clustered_latent(spec, data.cluster_of, spec.latent_dim, latent_rng);

  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = synth_id(i);

  for (std::size_t k = 0; k < spec.members.size(); ++k) {
    const auto& member = spec.members[k];
    std::mt19937_64 map_rng(derive_seed(spec.seed, 10 + k));
    Matrix x;
    switch (member.family) {
      case Family::OrthogonalLinear:
        x = data.latent * orthonormal_columns(spec.output_dim, spec.latent_dim, map_rng).transpose();
        break;
      case Family::NonlinearMlp: {
        const Eigen::Index hidden = 2 * spec.latent_dim;
        const Matrix w1 = gaussian(hidden, spec.latent_dim, 1.0 / std::sqrt(double(spec.latent_dim)), map_rng);
        const Matrix b1 = gaussian(1, hidden, 0.1, map_rng);
        const Matrix w2 = gaussian(spec.output_dim, hidden, 1.0 / std::sqrt(double(hidden)), map_rng);
        Matrix h = data.latent * w1.transpose();
        h.rowwise() += b1.row(0);
        x = h.cwiseMax(0.0) * w2.transpose();
        break;
      }
      case Family::Independent: {
        const Eigen::Index rank = spec.independent_rank > 0 ? std::min(spec.independent_rank, spec.latent_dim) : spec.latent_dim;
        const Matrix own = clustered_latent(spec, data.cluster_of, rank, map_rng);
        x = own * orthonormal_columns(spec.output_dim, spec.latent_dim, map_rng).transpose();
        break;
      }
    }
    if (spec.noise_sigma > 0.0) {
      std::mt19937_64 noise_rng(derive_seed(spec.seed, 1000 + k));
      x += gaussian(x.rows(), x.cols(), spec.noise_sigma, noise_rng);
    }
    normalize_in_place(x);
    data.members.push_back(FeatureSet{member.name, ids, std::move(x), true});
  }

  std::vector<std::vector<std::string>> by_cluster(spec.n_clusters);
  for (std::size_t i = 0; i < n; ++i) by_cluster[data.cluster_of[i]].push_back(ids[i]);
  for (std::size_t i = 0; i < n; ++i) {
    std::set<std::string> rel;
    for (const auto& id : by_cluster[data.cluster_of[i]]) {
      if (id != ids[i]) rel.insert(id);
    }
    if (!rel.empty()) data.ground_truth.relevant.emplace(ids[i], std::move(rel));
  }
  return data;
}

}  // namespace feattrans
