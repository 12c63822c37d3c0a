#include "feattrans/translator.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>

namespace feattrans {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'H', 'A', 'E', 'T'};
constexpr std::uint16_t kFormatVersion = 1;

using Stack = nn::LayerStack<double>;

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(Eigen::Index(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(Eigen::Index(i)) = m.row(Eigen::Index(rows[i]));
  return out;
}

Matrix run_path(const Stack& encoder, const Stack& decoder, const Matrix& x) {
  return nn::predict(decoder, nn::predict(encoder, x));
}

void check_unit_rows(const FeatureSet& fs) {
  for (Eigen::Index i = 0; i < fs.vectors.rows(); ++i) {
    if (std::abs(fs.vectors.row(i).norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::InvalidArgument,
                  fs.name + ": target row " + std::to_string(i + 1) + " is not L2-normalized");
    }
  }
}

void check_paired(const TranslatorModel& model, const PairedSet& paired) {
  if (paired.size() == 0) throw Error(ErrorCode::EmptyInput, "paired set is empty");
  if (paired.source.dim() != model.source_dim()) {
    throw Error(ErrorCode::DimMismatch, "source dim " + std::to_string(paired.source.dim()) +
                                            ", model expects " + std::to_string(model.source_dim()));
  }
  if (paired.target.dim() != model.target_dim()) {
    throw Error(ErrorCode::DimMismatch, "target dim " + std::to_string(paired.target.dim()) +
                                            ", model expects " + std::to_string(model.target_dim()));
  }
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint64_t v) {
    if (v > 0xffffffffULL) throw Error(ErrorCode::InvalidArgument, "value does not fit u32");
    put(v, 4);
  }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::uint8_t u8() { return std::uint8_t(get(1)); }
  std::uint16_t u16() { return std::uint16_t(get(2)); }
  std::uint32_t u32() { return std::uint32_t(get(4)); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const std::size_t n = u32();
    need(n);
    std::string s(bytes_.begin() + std::ptrdiff_t(pos_), bytes_.begin() + std::ptrdiff_t(pos_ + n));
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::Truncated, "model file ends early");
  }
  std::uint64_t get(int n) {
    need(std::size_t(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(bytes_[pos_ + std::size_t(i)]) << (8 * i);
    pos_ += std::size_t(n);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const char* to_string(ModelKind kind) {
  return kind == ModelKind::Hae ? "hae" : "mlp";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "hae") return ModelKind::Hae;
  if (text == "mlp" || text == "mlp_baseline") return ModelKind::MlpBaseline;
  throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + text + "'");
}

std::vector<Eigen::Index> encoder_widths(Eigen::Index dim, Eigen::Index latent_dim) {
  const std::size_t hidden = dim >= 1024 ? 3 : 2;
  std::vector<Eigen::Index> widths(hidden + 1, dim);
  widths.push_back(latent_dim);
  return widths;
}

TranslatorModel build(Eigen::Index source_dim, Eigen::Index target_dim, const BuildOptions& options) {
  if (source_dim < 1 || target_dim < 1 || options.latent_dim < 1) {
    throw Error(ErrorCode::InvalidArgument, "build: dims must be >= 1");
  }
  using nn::Activation;
  TranslatorModel model;
  model.kind = options.kind;
  model.source_name = options.source_name;
  model.target_name = options.target_name;
  model.latent_relu = options.latent_relu;

  std::mt19937_64 rng_s(derive_seed(options.seed, 0));
  std::mt19937_64 rng_t(derive_seed(options.seed, 1));
  std::mt19937_64 rng_d(derive_seed(options.seed, 2));

  if (options.kind == ModelKind::MlpBaseline) {
    // source -> source -> source -> target, ReLU on the hidden layers
    model.latent_dim = source_dim;
    const std::vector<Eigen::Index> enc{source_dim, source_dim, source_dim};
    const std::vector<Activation> enc_act(2, Activation::Relu);
    model.encoder_s = nn::make_stack<double>(enc, enc_act, false, rng_s);
    const std::vector<Eigen::Index> dec{source_dim, target_dim};
    const std::vector<Activation> dec_act{Activation::Linear};
    model.decoder = nn::make_stack<double>(dec, dec_act, true, rng_d);
    return model;
  }

  model.latent_dim = options.latent_dim;
  auto encoder = [&](Eigen::Index dim, std::mt19937_64& rng) {
    const auto widths = encoder_widths(dim, options.latent_dim);
    std::vector<Activation> act(widths.size() - 1, Activation::Relu);
    act.back() = options.latent_relu ? Activation::Relu : Activation::Linear;
    return nn::make_stack<double>(widths, act, false, rng);
  };
  model.encoder_s = encoder(source_dim, rng_s);
  model.encoder_t = encoder(target_dim, rng_t);

  auto dec_widths = encoder_widths(target_dim, options.latent_dim);
  std::reverse(dec_widths.begin(), dec_widths.end());
  std::vector<Activation> dec_act(dec_widths.size() - 1, Activation::Relu);
  dec_act.back() = Activation::Linear;
  model.decoder = nn::make_stack<double>(dec_widths, dec_act, true, rng_d);
  return model;
}

ErrorTerms error_terms(const TranslatorModel& model, const PairedSet& paired) {
  check_paired(model, paired);
  const Matrix& vt = paired.target.vectors;
  ErrorTerms terms;
  terms.translation = (run_path(model.encoder_s, model.decoder, paired.source.vectors) - vt).rowwise().norm().mean();
  if (model.kind == ModelKind::Hae) {
    terms.reconstruction = (run_path(model.encoder_t, model.decoder, vt) - vt).rowwise().norm().mean();
  }
  return terms;
}

TrainResult train(TranslatorModel model, const PairedSet& paired, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  check_paired(model, paired);
  check_unit_rows(paired.target);
  if (config.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (!(config.val_fraction > 0.0 && config.val_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "val_fraction must lie in (0, 1)");
  }
  const std::size_t n = paired.size();
  if (n < 2) throw Error(ErrorCode::EmptyInput, "need at least 2 pairs for a train/validation split");

  std::mt19937_64 rng(derive_seed(config.seed, 100));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val =
      std::clamp<std::size_t>(std::size_t(std::llround(double(n) * config.val_fraction)), 1, n - 1);
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + std::ptrdiff_t(n_val));
  std::vector<std::size_t> train_rows(order.begin() + std::ptrdiff_t(n_val), order.end());

  PairedSet val;
  val.source.vectors = gather_rows(paired.source.vectors, val_rows);
  val.target.vectors = gather_rows(paired.target.vectors, val_rows);
  val.source.ids.resize(n_val);
  val.target.ids.resize(n_val);

  const bool hae = model.kind == ModelKind::Hae;
  nn::AdamState<double> adam;
  adam.params.lr = config.lr;

  TrainResult result{model, {}};
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(train_rows.begin(), train_rows.end(), rng);
    ErrorTerms epoch_terms;
    for (std::size_t start = 0; start < train_rows.size(); start += config.batch_size) {
      const std::size_t stop = std::min(train_rows.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(train_rows.data() + start, stop - start);
      const Matrix vs = gather_rows(paired.source.vectors, rows);
      const Matrix vt = gather_rows(paired.target.vectors, rows);

      auto zs = nn::forward(model.encoder_s, vs);
      auto vst = nn::forward(model.decoder, zs.output);
      const auto translation = nn::euclid_loss(vst.output, vt);
      auto dec_grads = nn::backward(model.decoder, vst.tape, translation.grad);
      auto es_grads = nn::backward(model.encoder_s, zs.tape, dec_grads.input);

      std::vector<nn::ParamView<double>> params;
      std::vector<nn::GradView<double>> grads;
      nn::append_params(model.encoder_s, params);
      nn::append_grads(es_grads, grads);

      double reconstruction_value = 0.0;
      nn::StackGradients<double> et_grads;
      if (hae) {
        auto zt = nn::forward(model.encoder_t, vt);
        auto vtt = nn::forward(model.decoder, zt.output);
        const auto reconstruction = nn::euclid_loss(vtt.output, vt);
        reconstruction_value = reconstruction.value;
        auto dec_rec = nn::backward(model.decoder, vtt.tape, reconstruction.grad);
        et_grads = nn::backward(model.encoder_t, zt.tape, dec_rec.input);
        for (std::size_t l = 0; l < dec_grads.weights.size(); ++l) {
          dec_grads.weights[l] += dec_rec.weights[l];
          dec_grads.bias[l] += dec_rec.bias[l];
        }
        nn::append_params(model.encoder_t, params);
        nn::append_grads(et_grads, grads);
      }
      nn::append_params(model.decoder, params);
      nn::append_grads(dec_grads, grads);

      if (!std::isfinite(translation.value) || !std::isfinite(reconstruction_value)) {
        throw Error(ErrorCode::NumericFailure, "non-finite loss in epoch " + std::to_string(epoch + 1));
      }
      nn::adam_step<double>(params, grads, adam);

      const double weight = double(rows.size());
      epoch_terms.translation += translation.value * weight;
      epoch_terms.reconstruction += reconstruction_value * weight;
    }
    epoch_terms.translation /= double(train_rows.size());
    epoch_terms.reconstruction /= double(train_rows.size());

    const ErrorTerms val_terms = error_terms(model, val);
    if (!std::isfinite(val_terms.total())) {
      throw Error(ErrorCode::NumericFailure, "non-finite validation loss in epoch " + std::to_string(epoch + 1));
    }
    result.log.train.push_back(epoch_terms);
    result.log.validation.push_back(val_terms);
    if (on_epoch) on_epoch(epoch, epoch_terms, val_terms);

    if (val_terms.total() < best) {
      best = val_terms.total();
      result.model = model;
      result.log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.log.early_stopped = true;
      break;
    }
  }
  return result;
}

FeatureSet translate(const TranslatorModel& model, const FeatureSet& src) {
  if (src.dim() != model.source_dim()) {
    throw Error(ErrorCode::DimMismatch, "source dim " + std::to_string(src.dim()) + ", model expects " +
                                            std::to_string(model.source_dim()));
  }
  FeatureSet out;
  out.name = model.source_name + "2" + model.target_name;
  out.ids = src.ids;
  out.vectors = run_path(model.encoder_s, model.decoder, src.vectors);
  out.normalized = true;
  return out;
}

FeatureSet reconstruct(const TranslatorModel& model, const FeatureSet& tgt) {
  if (model.kind != ModelKind::Hae) throw Error(ErrorCode::UnsupportedForBaseline, "reconstruct");
  if (tgt.dim() != model.target_dim()) {
    throw Error(ErrorCode::DimMismatch, "target dim " + std::to_string(tgt.dim()) + ", model expects " +
                                            std::to_string(model.target_dim()));
  }
  FeatureSet out;
  out.name = model.target_name + "2" + model.target_name;
  out.ids = tgt.ids;
  out.vectors = run_path(model.encoder_t, model.decoder, tgt.vectors);
  out.normalized = true;
  return out;
}

std::vector<std::uint8_t> serialize_model(const TranslatorModel& model) {
  ByteWriter w;
  w.raw(kMagic);
  w.u16(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(model.kind));
  w.u8(model.latent_relu ? 1 : 0);
  w.str(model.source_name);
  w.str(model.target_name);
  w.u32(std::uint64_t(model.latent_dim));

  const std::array<const Stack*, 3> stacks{&model.encoder_s, &model.encoder_t, &model.decoder};
  for (const Stack* s : stacks) {
    w.u8(s->final_l2_normalize ? 1 : 0);
    w.u32(s->layers.size());
    for (const auto& layer : s->layers) {
      w.u32(std::uint64_t(layer.in_dim()));
      w.u32(std::uint64_t(layer.out_dim()));
      w.u8(static_cast<std::uint8_t>(layer.activation));
    }
  }
  for (const Stack* s : stacks) {
    for (const auto& layer : s->layers) {
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.f64(layer.weights(r, c));
      }
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) w.f64(layer.bias(i));
    }
  }
  return w.take();
}

TranslatorModel deserialize_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < kMagic.size()) throw Error(ErrorCode::Truncated, "model file shorter than its magic");
  const auto magic = r.take(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw Error(ErrorCode::BadMagic, "expected HAET");
  const auto version = r.u16();
  if (version != kFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "format version " + std::to_string(version) + ", expected " +
                                                std::to_string(kFormatVersion));
  }
  TranslatorModel model;
  const auto kind = r.u8();
  if (kind > 1) throw Error(ErrorCode::Parse, "unknown model kind byte " + std::to_string(kind));
  model.kind = static_cast<ModelKind>(kind);
  model.latent_relu = r.u8() != 0;
  model.source_name = r.str();
  model.target_name = r.str();
  model.latent_dim = r.u32();

  const std::array<Stack*, 3> stacks{&model.encoder_s, &model.encoder_t, &model.decoder};
  for (Stack* s : stacks) {
    s->final_l2_normalize = r.u8() != 0;
    const std::uint32_t count = r.u32();
    for (std::uint32_t l = 0; l < count; ++l) {
      nn::DenseLayer<double> layer;
      const std::uint32_t in = r.u32();
      const std::uint32_t out = r.u32();
      const std::uint8_t act = r.u8();
      if (in == 0 || out == 0 || act > 1) throw Error(ErrorCode::Parse, "bad layer header");
      if (!s->layers.empty() && s->layers.back().out_dim() != Eigen::Index(in)) {
        throw Error(ErrorCode::Parse, "layer dims do not chain");
      }
      // Reject absurd headers before allocating.
      if (std::uint64_t(in) * out > bytes.size()) throw Error(ErrorCode::Truncated, "layer larger than file");
      layer.weights.resize(out, in);
      layer.bias.resize(out);
      layer.activation = static_cast<nn::Activation>(act);
      s->layers.push_back(std::move(layer));
    }
  }
  if (model.encoder_s.empty() || model.decoder.empty()) throw Error(ErrorCode::Parse, "missing stack");
  if (model.kind == ModelKind::Hae && model.encoder_t.empty()) throw Error(ErrorCode::Parse, "missing encoder_t");
  if (model.encoder_s.out_dim() != model.decoder.in_dim()) throw Error(ErrorCode::Parse, "encoder/decoder dims");

  for (Stack* s : stacks) {
    for (auto& layer : s->layers) {
      for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
        for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = r.f64();
      }
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = r.f64();
    }
  }
  if (!r.at_end()) throw Error(ErrorCode::Parse, "trailing bytes after parameters");
  return model;
}

void save_model(const TranslatorModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

TranslatorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "epoch,train_translation,train_reconstruction,train_total,"
         "val_translation,val_reconstruction,val_total\n";
  out << std::setprecision(17);
  for (std::size_t e = 0; e < log.epochs(); ++e) {
    const auto& t = log.train[e];
    const auto& v = log.validation[e];
    out << e + 1 << ',' << t.translation << ',' << t.reconstruction << ',' << t.total() << ','
        << v.translation << ',' << v.reconstruction << ',' << v.total() << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

}  // namespace feattrans
