// feattrans: train translators, evaluate them, and build the affinity MST.

#include "feattrans/affinity.hpp"
#include "feattrans/feature_io.hpp"
#include "feattrans/mst.hpp"
#include "feattrans/retrieval.hpp"
#include "feattrans/synth.hpp"
#include "feattrans/translator.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using namespace feattrans;
using json = nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Options {
  std::string config_path;
  json config = json::object();

  std::string source, target, model, queries, gt, out, kind = "hae", input;
  std::vector<std::string> features;
  std::string models_dir;
  Eigen::Index latent = kDefaultLatentDim;
  double lr = 1e-5;
  std::size_t batch = 64, epochs = 100, patience = 10;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool latent_relu = false;
  bool exclude_diagonal = false;
  std::string format = "both";

  // synth
  std::size_t n_vectors = 1000, clusters = 5;
  Eigen::Index dim = 32, latent_dim = 16, independent_rank = 2;
  double noise = 0.01, spread = 0.04, holdout = 0.2;
  std::vector<std::string> members;
};

// Fills `value` from the config file when the flag was not given on the command line.
template <typename T>
void merge(const CLI::App& app, const char* flag, const json& config, const char* key, T& value) {
  const CLI::Option* opt = app.get_option_no_throw(flag);
  if ((opt != nullptr && opt->count() > 0) || !config.contains(key)) return;
  value = config.at(key).get<T>();
}

void merge_config(const CLI::App& sub, Options& o) {
  const json& c = o.config;
  merge(sub, "--source", c, "source", o.source);
  merge(sub, "--target", c, "target", o.target);
  merge(sub, "--model", c, "model", o.model);
  merge(sub, "--queries", c, "queries", o.queries);
  merge(sub, "--gt", c, "gt", o.gt);
  merge(sub, "--out", c, "out", o.out);
  merge(sub, "--kind", c, "kind", o.kind);
  merge(sub, "--latent", c, "latent", o.latent);
  merge(sub, "--lr", c, "lr", o.lr);
  merge(sub, "--batch", c, "batch", o.batch);
  merge(sub, "--epochs", c, "epochs", o.epochs);
  merge(sub, "--patience", c, "patience", o.patience);
  merge(sub, "--val-fraction", c, "val_fraction", o.val_fraction);
  merge(sub, "--seed", c, "seed", o.seed);
  merge(sub, "--jobs", c, "jobs", o.jobs);
  merge(sub, "--latent-relu", c, "latent_relu", o.latent_relu);
  merge(sub, "--models", c, "models", o.models_dir);
  merge(sub, "--features", c, "features_list", o.features);
  merge(sub, "--exclude-diagonal", c, "exclude_diagonal", o.exclude_diagonal);
  merge(sub, "--input", c, "input", o.input);
  merge(sub, "--format", c, "format", o.format);
  merge(sub, "--n-vectors", c, "n_vectors", o.n_vectors);
  merge(sub, "--clusters", c, "clusters", o.clusters);
  merge(sub, "--dim", c, "dim", o.dim);
  merge(sub, "--latent-dim", c, "latent_dim", o.latent_dim);
  merge(sub, "--noise", c, "noise", o.noise);
  merge(sub, "--spread", c, "spread", o.spread);
  merge(sub, "--independent-rank", c, "independent_rank", o.independent_rank);
  merge(sub, "--holdout", c, "holdout", o.holdout);
  merge(sub, "--member", c, "members", o.members);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
}

// A feature reference is a name from the config's "features" registry, or a path stem
// with `.fvecs` and `.ids` siblings named after the stem's basename.
FeatureSet load_ref(const Options& o, const std::string& ref) {
  fs::path vec = ref + ".fvecs", ids = ref + ".ids";
  std::string name = fs::path(ref).filename().string();
  if (o.config.contains("features") && o.config["features"].contains(ref)) {
    const auto& e = o.config["features"][ref];
    vec = e.at("vec").get<std::string>();
    ids = e.at("ids").get<std::string>();
    name = ref;
  }
  auto set = load_feature_set(vec, ids, name);
  spdlog::debug("loaded {}: {} x {}", name, set.size(), set.dim());
  return l2_normalize(set);
}

TrainConfig train_config(const Options& o) {
  TrainConfig c;
  c.lr = o.lr;
  c.batch_size = o.batch;
  c.max_epochs = o.epochs;
  c.patience = o.patience;
  c.val_fraction = o.val_fraction;
  c.seed = o.seed;
  return c;
}

fs::path out_dir(const Options& o) {
  require(o.out, "--out");
  fs::create_directories(o.out);
  return o.out;
}

int cmd_train(const Options& o) {
  require(o.source, "--source");
  require(o.target, "--target");
  const auto src = load_ref(o, o.source);
  const auto tgt = load_ref(o, o.target);
  const auto paired = align_pairs(src, tgt);
  if (paired.dropped > 0) spdlog::warn("{} ids present in only one input were dropped", paired.dropped);

  BuildOptions b;
  b.kind = parse_model_kind(o.kind);
  b.latent_dim = o.latent;
  b.latent_relu = o.latent_relu;
  b.seed = o.seed;
  b.source_name = src.name;
  b.target_name = tgt.name;
  auto model = build(src.dim(), tgt.dim(), b);
  spdlog::info("training {} {} -> {} on {} pairs", to_string(b.kind), src.name, tgt.name, paired.size());

  const auto result = train(std::move(model), paired, train_config(o),
                            [](std::size_t epoch, const ErrorTerms& t, const ErrorTerms& v) {
                              spdlog::debug("epoch {}: train {:.6f}/{:.6f} val {:.6f}/{:.6f}", epoch + 1, t.translation,
                                            t.reconstruction, v.translation, v.reconstruction);
                            });
  const auto dir = out_dir(o);
  const std::string stem = src.name + "2" + tgt.name;
  save_model(result.model, dir / (stem + ".haet"));
  write_train_log_csv(result.log, dir / (stem + ".trainlog.csv"));
  const auto& best = result.log.validation[result.log.best_epoch];
  std::printf("model %s\nepochs %zu\nbest_epoch %zu\nval_translation %.6f\nval_reconstruction %.6f\n",
              (dir / (stem + ".haet")).c_str(), result.log.epochs(), result.log.best_epoch + 1, best.translation,
              best.reconstruction);
  return 0;
}

int cmd_translate(const Options& o) {
  require(o.model, "--model");
  require(o.source, "--source");
  const auto model = load_model(o.model);
  const auto out = translate(model, load_ref(o, o.source));
  const auto dir = out_dir(o);
  save_feature_set(out, dir / (out.name + ".fvecs"), dir / (out.name + ".ids"));
  std::printf("wrote %s (%zu x %ld)\n", (dir / out.name).c_str(), out.size(), long(out.dim()));
  return 0;
}

int cmd_eval(const Options& o) {
  require(o.model, "--model");
  require(o.source, "--source");
  require(o.target, "--target");
  require(o.gt, "--gt");
  const auto model = load_model(o.model);
  const auto src = load_ref(o, o.source);
  const auto tgt = load_ref(o, o.target);
  const auto queries = o.queries.empty() ? tgt : load_ref(o, o.queries);
  const auto gt = load_ground_truth(o.gt);

  const auto direct = evaluate(queries, tgt, gt, o.jobs);
  const auto cross = cross_feature_evaluate(model, src, queries, gt, o.jobs);
  std::printf("queries %zu\ntarget_map %.4f\ntranslated_map %.4f\ndifference %.4f\n", direct.n_queries, direct.map,
              cross.map, direct.map - cross.map);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_eval_csv(direct, fs::path(o.out) / "target_eval.csv");
    write_eval_csv(cross, fs::path(o.out) / "translated_eval.csv");
  }
  return 0;
}

// Feature-reference groups, one per dataset. The config may list several under "datasets".
std::vector<std::pair<std::string, std::vector<std::string>>> affinity_datasets(const Options& o) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  if (!o.features.empty()) {
    out.emplace_back("default", o.features);
  } else if (o.config.contains("datasets")) {
    for (const auto& [name, refs] : o.config["datasets"].items()) {
      out.emplace_back(name, refs.get<std::vector<std::string>>());
    }
  }
  if (out.empty()) throw CLI::RequiredError("--features");
  return out;
}

int cmd_affinity(const Options& o) {
  require(o.models_dir, "--models");
  const auto datasets = affinity_datasets(o);
  const auto dir = out_dir(o);

  std::vector<std::string> names;
  std::map<NamePair, TranslatorModel> models;
  std::vector<AffinityMatrix> ms, rs, cs, us;
  NormalizeOptions norm;
  norm.include_diagonal = !o.exclude_diagonal;

  for (const auto& [dataset, refs] : datasets) {
    std::vector<FeatureSet> sets;
    for (const auto& r : refs) sets.push_back(load_ref(o, r));
    std::vector<std::string> these;
    for (const auto& s : sets) these.push_back(s.name);
    if (names.empty()) {
      names = these;
      for (const auto& s : names) {
        for (const auto& t : names) {
          const auto path = fs::path(o.models_dir) / (s + "2" + t + ".haet");
          if (!fs::exists(path)) throw Error(ErrorCode::MissingPair, s + " -> " + t + " (" + path.string() + ")");
          models.emplace(NamePair{s, t}, load_model(path));
        }
      }
    } else if (these != names) {
      throw Error(ErrorCode::NameMismatch, "dataset " + dataset + " lists different feature types");
    }

    std::map<NamePair, PairedSet> pairs;
    for (const auto& s : sets)
      for (const auto& t : sets) pairs.emplace(NamePair{s.name, t.name}, align_pairs(s, t));
    spdlog::info("dataset {}: {} ordered pairs", dataset, pairs.size());

    auto m = build_dam(models, pairs, names, o.jobs);
    auto r = normalize_rows(m, norm);
    auto c = normalize_cols(m, norm);
    for (auto i : r.degenerate) spdlog::warn("{}: row {} of M is constant", dataset, names[i]);
    for (auto i : c.degenerate) spdlog::warn("{}: column {} of M is constant", dataset, names[i]);
    us.push_back(uam(r.matrix, c.matrix));
    ms.push_back(std::move(m));
    rs.push_back(std::move(r.matrix));
    cs.push_back(std::move(c.matrix));
  }

  auto m = average_affinity(ms);
  auto r = average_affinity(rs);
  auto c = average_affinity(cs);
  auto u = average_affinity(us);
  m.kind = AffinityKind::DirectedM;
  r.kind = AffinityKind::RowNormR;
  c.kind = AffinityKind::ColNormC;
  u.kind = AffinityKind::UndirectedU;
  write_affinity_csv(m, dir / "M.csv");
  write_affinity_csv(r, dir / "R.csv");
  write_affinity_csv(c, dir / "C.csv");
  write_affinity_csv(u, dir / "U.csv");
  std::printf("wrote M.csv R.csv C.csv U.csv (%zux%zu, %zu dataset(s)) to %s\n", names.size(), names.size(),
              datasets.size(), dir.c_str());
  return 0;
}

int cmd_mst(const Options& o) {
  require(o.input, "--input");
  const auto u = read_affinity_csv(o.input, AffinityKind::UndirectedU);
  const auto mst = kruskal(u);
  const auto dir = out_dir(o);
  if (o.format == "dot" || o.format == "both") export_mst(mst, ExportFormat::Dot, dir / "mst.dot");
  if (o.format == "json" || o.format == "both") export_mst(mst, ExportFormat::Json, dir / "mst.json");
  std::printf("edges %zu\ntotal_weight %.17g\n", mst.edges.size(), mst.total_weight);
  return 0;
}

int cmd_synth(const Options& o) {
  SynthSpec spec;
  spec.n_vectors = o.n_vectors;
  spec.n_clusters = o.clusters;
  spec.output_dim = o.dim;
  spec.latent_dim = o.latent_dim;
  spec.noise_sigma = o.noise;
  spec.cluster_spread = o.spread;
  spec.independent_rank = o.independent_rank;
  spec.seed = o.seed;
  for (const auto& m : o.members) {
    const auto colon = m.find(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--member", "expected NAME:FAMILY, got " + m);
    spec.members.push_back({m.substr(0, colon), parse_family(m.substr(colon + 1))});
  }
  if (spec.members.empty()) {
    spec.members = {{"h1", Family::OrthogonalLinear},
                    {"h2", Family::OrthogonalLinear},
                    {"i1", Family::Independent},
                    {"i2", Family::Independent}};
  }
  const auto data = generate(spec);
  const auto split = split_holdout(data.members.front().ids, o.holdout, o.seed);
  const auto dir = out_dir(o);
  fs::create_directories(dir / "train");
  fs::create_directories(dir / "test");
  for (const auto& m : data.members) {
    auto train_part = subset(m, split.train);
    auto test_part = subset(m, split.test);
    save_feature_set(train_part, dir / "train" / (m.name + ".fvecs"), dir / "train" / (m.name + ".ids"));
    save_feature_set(test_part, dir / "test" / (m.name + ".fvecs"), dir / "test" / (m.name + ".ids"));
  }
  save_ground_truth(restrict_ground_truth(data.ground_truth, split.test, split.test), dir / "test" / "gt.tsv");
  std::printf("wrote %zu members (%zu train / %zu test ids) to %s\n", data.members.size(), split.train.size(),
              split.test.size(), dir.c_str());
  return 0;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("feattrans");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("FEATTRANS_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; only honour it when asked for explicitly
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  Options o;
  CLI::App app{"Feature-space translation and affinity toolkit"};
  app.require_subcommand(1);
  app.set_config();  // disable CLI11's own config handling; --config is JSON below

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config; explicit flags take precedence");
    sub->add_option("--seed", o.seed, "seed for all randomness");
    sub->add_option("--jobs", o.jobs, "parallel jobs")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output directory");
  };
  auto add_training = [&](CLI::App* sub) {
    sub->add_option("--latent", o.latent, "latent width")->check(CLI::PositiveNumber);
    sub->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    sub->add_option("--batch", o.batch, "minibatch size")->check(CLI::PositiveNumber);
    sub->add_option("--epochs", o.epochs, "maximum epochs")->check(CLI::PositiveNumber);
    sub->add_option("--patience", o.patience, "epochs without validation improvement before stopping");
    sub->add_option("--val-fraction", o.val_fraction, "validation share of the pairs")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--kind", o.kind, "hae or mlp")->check(CLI::IsMember({"hae", "mlp", "mlp_baseline"}));
    sub->add_flag("--latent-relu", o.latent_relu, "ReLU on the latent layer");
  };

  auto* train_cmd = app.add_subcommand("train", "train a translator for one ordered pair");
  add_common(train_cmd);
  add_training(train_cmd);
  train_cmd->add_option("--source", o.source, "source features (registry name or path stem)");
  train_cmd->add_option("--target", o.target, "target features (registry name or path stem)");

  auto* translate_cmd = app.add_subcommand("translate", "translate a feature set with a trained model");
  add_common(translate_cmd);
  translate_cmd->add_option("--model", o.model, "model file");
  translate_cmd->add_option("--source", o.source, "source features");

  auto* eval_cmd = app.add_subcommand("eval", "compare target-feature and translated-feature mAP");
  add_common(eval_cmd);
  eval_cmd->add_option("--model", o.model, "model file");
  eval_cmd->add_option("--source", o.source, "source-side reference features");
  eval_cmd->add_option("--target", o.target, "target-side reference features");
  eval_cmd->add_option("--queries", o.queries, "target-side query features (default: --target)");
  eval_cmd->add_option("--gt", o.gt, "ground truth TSV");

  auto* affinity_cmd = app.add_subcommand("affinity", "compute M, R, C and U");
  add_common(affinity_cmd);
  affinity_cmd->add_option("--models", o.models_dir, "directory of {s}2{t}.haet models");
  affinity_cmd->add_option("--features", o.features, "feature references for one dataset");
  affinity_cmd->add_flag("--exclude-diagonal", o.exclude_diagonal, "leave M[i][i] out of the min-max scaling");

  auto* mst_cmd = app.add_subcommand("mst", "minimum spanning tree over U");
  add_common(mst_cmd);
  mst_cmd->add_option("--input", o.input, "U matrix CSV");
  mst_cmd->add_option("--format", o.format, "dot, json or both")->check(CLI::IsMember({"dot", "json", "both"}));

  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic paired features");
  add_common(synth_cmd);
  synth_cmd->add_option("--n-vectors", o.n_vectors, "vectors per member");
  synth_cmd->add_option("--clusters", o.clusters, "ground-truth clusters");
  synth_cmd->add_option("--dim", o.dim, "output dimension");
  synth_cmd->add_option("--latent-dim", o.latent_dim, "latent dimension");
  synth_cmd->add_option("--noise", o.noise, "Gaussian noise sigma");
  synth_cmd->add_option("--spread", o.spread, "cluster spread");
  synth_cmd->add_option("--independent-rank", o.independent_rank, "latent span of independent members' class centers (0 = all)");
  synth_cmd->add_option("--holdout", o.holdout, "test fraction");
  synth_cmd->add_option("--member", o.members, "NAME:FAMILY, repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!o.config_path.empty()) {
      std::ifstream in(o.config_path);
      if (!in) throw Error(ErrorCode::Io, "cannot open config " + o.config_path);
      o.config = json::parse(in);
    }
    merge_config(*sub, o);
    if (sub == train_cmd) return cmd_train(o);
    if (sub == translate_cmd) return cmd_translate(o);
    if (sub == eval_cmd) return cmd_eval(o);
    if (sub == affinity_cmd) return cmd_affinity(o);
    if (sub == mst_cmd) return cmd_mst(o);
    return cmd_synth(o);
  } catch (const CLI::Error& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const json::exception& e) {
    spdlog::error("config: {}", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.code() == ErrorCode::NumericFailure ? kExitNumeric : kExitData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
}
