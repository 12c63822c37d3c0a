#include "feattrans/translator.hpp"

#include "fixtures.hpp"
#include "scratch_dir.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace feattrans;
namespace fs = std::filesystem;

namespace {

std::vector<Eigen::Index> dims_of(const nn::LayerStack<double>& s) {
  std::vector<Eigen::Index> d{s.in_dim()};
  for (const auto& l : s.layers) d.push_back(l.out_dim());
  return d;
}

using V = std::vector<Eigen::Index>;

FeatureSet random_unit_set(Eigen::Index n, Eigen::Index d, std::uint64_t seed, const std::string& name) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  FeatureSet fs;
  fs.name = name;
  fs.vectors.resize(n, d);
  for (Eigen::Index i = 0; i < fs.vectors.size(); ++i) fs.vectors.data()[i] = dist(rng);
  for (Eigen::Index i = 0; i < n; ++i) fs.ids.push_back(synth_id(std::size_t(i)));
  return l2_normalize(fs);
}

// One shared self-translation run; several checks read from it.
const TrainResult& self_translation_run() {
  static const auto data = fixture::make_data(fixture::rotation_spec());
  static const TrainResult run = fixture::train_pair(data, "h1", "h1");
  return run;
}

}  // namespace

TEST_CASE("build follows the width rule") {
  SUBCASE("2048 -> 2048") {
    BuildOptions o;
    o.latent_dim = 510;
    const auto m = build(2048, 2048, o);
    CHECK(dims_of(m.encoder_s) == V{2048, 2048, 2048, 2048, 510});
    CHECK(dims_of(m.encoder_t) == V{2048, 2048, 2048, 2048, 510});
    CHECK(dims_of(m.decoder) == V{510, 2048, 2048, 2048, 2048});
    CHECK(m.decoder.final_l2_normalize);
    CHECK(m.decoder.layers.back().activation == nn::Activation::Linear);
    CHECK(m.encoder_s.layers.back().activation == nn::Activation::Linear);
    CHECK(m.encoder_s.layers.front().activation == nn::Activation::Relu);
  }
  SUBCASE("512 -> 512") {
    const auto m = build(512, 512, BuildOptions{});
    CHECK(dims_of(m.encoder_s) == V{512, 512, 512, 510});
    CHECK(dims_of(m.decoder) == V{510, 512, 512, 512});
  }
  SUBCASE("mixed dims: decoder mirrors the target-side encoder") {
    const auto m = build(2048, 512, BuildOptions{});
    CHECK(dims_of(m.encoder_s) == V{2048, 2048, 2048, 2048, 510});
    CHECK(dims_of(m.encoder_t) == V{512, 512, 512, 510});
    CHECK(dims_of(m.decoder) == V{510, 512, 512, 512});
  }
  SUBCASE("mlp baseline is one 2048-2048-2048 regression network") {
    BuildOptions o;
    o.kind = ModelKind::MlpBaseline;
    const auto m = build(2048, 2048, o);
    auto all = dims_of(m.encoder_s);
    const auto dec = dims_of(m.decoder);
    all.insert(all.end(), dec.begin() + 1, dec.end());
    CHECK(all == V{2048, 2048, 2048, 2048});
    CHECK(m.encoder_t.empty());
    CHECK(m.decoder.final_l2_normalize);
  }
  SUBCASE("latent relu switch") {
    BuildOptions o;
    o.latent_relu = true;
    const auto m = build(64, 64, o);
    CHECK(m.encoder_s.layers.back().activation == nn::Activation::Relu);
  }
  SUBCASE("seeded") {
    BuildOptions o;
    o.seed = 9;
    CHECK(serialize_model(build(16, 8, o)) == serialize_model(build(16, 8, o)));
    BuildOptions p = o;
    p.seed = 10;
    CHECK(serialize_model(build(16, 8, o)) != serialize_model(build(16, 8, p)));
  }
}

TEST_CASE("translate and reconstruct contracts") {
  BuildOptions o;
  o.latent_dim = 12;
  o.source_name = "A";
  o.target_name = "B";
  const auto model = build(24, 16, o);

  const auto one = random_unit_set(1, 24, 1, "A");
  const auto many = random_unit_set(33, 24, 2, "A");
  const auto t1 = translate(model, one);
  const auto t33 = translate(model, many);
  CHECK(t1.dim() == 16);
  CHECK(t33.dim() == 16);
  CHECK(t33.ids == many.ids);
  CHECK(t33.name == "A2B");
  CHECK((t33.vectors.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-9);
  CHECK(translate(model, many).vectors == t33.vectors);
  CHECK_THROWS_AS(translate(model, random_unit_set(3, 16, 3, "B")), Error);

  const auto rec = reconstruct(model, random_unit_set(20, 16, 4, "B"));
  CHECK(rec.vectors.allFinite());
  CHECK((rec.vectors.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-9);

  BuildOptions mlp = o;
  mlp.kind = ModelKind::MlpBaseline;
  try {
    reconstruct(build(24, 16, mlp), random_unit_set(2, 16, 5, "B"));
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedForBaseline);
  }
}

TEST_CASE("train rejects bad inputs") {
  const auto model = build(4, 4, BuildOptions{});
  PairedSet p;
  p.source = random_unit_set(10, 4, 1, "s");
  p.target = random_unit_set(10, 4, 2, "t");
  TrainConfig cfg;
  cfg.max_epochs = 1;

  PairedSet wrong = p;
  wrong.source = random_unit_set(10, 5, 1, "s");
  CHECK_THROWS_AS(train(model, wrong, cfg), Error);

  PairedSet raw = p;
  raw.target.vectors *= 3.0;
  CHECK_THROWS_AS(train(model, raw, cfg), Error);

  PairedSet empty;
  empty.source.vectors.resize(0, 4);
  empty.target.vectors.resize(0, 4);
  CHECK_THROWS_AS(train(model, empty, cfg), Error);

  TrainConfig bad = cfg;
  bad.val_fraction = 1.0;
  CHECK_THROWS_AS(train(model, p, bad), Error);
}

TEST_CASE("rotation fixture: translation is learnable and generalizes") {
  const auto data = fixture::make_data(fixture::rotation_spec());
  const auto run = fixture::train_pair(data, "h1", "h2");
  const auto& log = run.log;
  REQUIRE(log.epochs() > 0);
  CHECK(log.epochs() <= 200);
  CHECK(log.train.size() == log.validation.size());

  const double final_val = log.validation[log.best_epoch].translation;
  MESSAGE("best validation translation error " << final_val << " at epoch " << log.best_epoch + 1);
  CHECK(final_val < 0.15);

  // Best-so-far training total decreases, and no epoch ends more than 5% above it.
  double best = log.train.front().total();
  for (const auto& e : log.train) {
    CHECK(e.total() <= best * 1.05);
    best = std::min(best, e.total());
  }
  CHECK(best < log.train.front().total());

  const auto test = data.test_pair("h1", "h2");
  const auto held_out = (translate(run.model, test.source).vectors - test.target.vectors).rowwise().norm().mean();
  CHECK(held_out < 2 * final_val);

  const auto terms = error_terms(run.model, test);
  CHECK(terms.translation >= terms.reconstruction - 0.02);
}

TEST_CASE("self-translation: both error terms converge together") {
  const auto& run = self_translation_run();
  const auto& last = run.log.validation[run.log.best_epoch];
  MESSAGE("translation " << last.translation << " reconstruction " << last.reconstruction);
  CHECK(std::abs(last.translation - last.reconstruction) < 0.01);

  const auto data = fixture::make_data(fixture::rotation_spec());
  const auto terms = error_terms(run.model, data.test_pair("h1", "h1"));
  CHECK(terms.reconstruction < 0.1);
}

TEST_CASE("mlp baseline trains on translation error only") {
  auto spec = fixture::four_family_spec();
  spec.n_vectors = 300;
  const auto data = fixture::make_data(spec);
  auto cfg = fixture::synthetic_train_config();
  cfg.max_epochs = 30;
  const auto run = fixture::train_pair(data, "h1", "h2", ModelKind::MlpBaseline, 1, cfg);
  for (std::size_t e = 0; e < run.log.epochs(); ++e) {
    CHECK(run.log.train[e].reconstruction == 0.0);
    CHECK(run.log.validation[e].reconstruction == 0.0);
  }
  CHECK(run.log.validation[run.log.best_epoch].translation < run.log.validation.front().translation);
}

TEST_CASE("model file") {
  const fixture::ScratchDir scratch("model");
  const auto& dir = scratch.path();
  BuildOptions o;
  o.latent_dim = 7;
  o.seed = 3;
  o.source_name = "V-CroW";
  o.target_name = "V-SPoC";
  const auto model = build(12, 9, o);

  SUBCASE("save, load, save gives identical bytes and identical translations") {
    save_model(model, dir / "a.haet");
    const auto loaded = load_model(dir / "a.haet");
    save_model(loaded, dir / "b.haet");
    std::ifstream a(dir / "a.haet", std::ios::binary), b(dir / "b.haet", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
    CHECK(sa.substr(0, 4) == "HAET");
    CHECK(loaded.source_name == "V-CroW");
    CHECK(loaded.latent_dim == 7);
    const auto x = random_unit_set(5, 12, 9, "V-CroW");
    CHECK(translate(loaded, x).vectors == translate(model, x).vectors);
  }
  SUBCASE("mlp round trip") {
    BuildOptions m = o;
    m.kind = ModelKind::MlpBaseline;
    const auto mlp = build(12, 9, m);
    const auto back = deserialize_model(serialize_model(mlp));
    CHECK(back.kind == ModelKind::MlpBaseline);
    CHECK(serialize_model(back) == serialize_model(mlp));
  }
  SUBCASE("corruption") {
    auto bytes = serialize_model(model);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    auto bad_version = bytes;
    bad_version[4] = 9;
    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    auto code = [](const std::vector<std::uint8_t>& b) {
      try {
        deserialize_model(b);
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::InvalidArgument;
    };
    CHECK(code(bad_magic) == ErrorCode::BadMagic);
    CHECK(code(bad_version) == ErrorCode::VersionMismatch);
    CHECK(code(truncated) == ErrorCode::Truncated);
    CHECK(code({'H', 'A'}) == ErrorCode::Truncated);
  }
}
