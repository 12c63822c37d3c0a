#pragma once

#include "feattrans/feature_io.hpp"
#include "feattrans/nn.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace feattrans {

enum class ModelKind : std::uint8_t { Hae = 0, MlpBaseline = 1 };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

inline constexpr Eigen::Index kDefaultLatentDim = 510;

/// Hybrid auto-encoder: source encoder, target encoder and one shared decoder.
///
/// Translation runs decoder(encoder_s(x)); reconstruction runs decoder(encoder_t(x)).
/// The MLP baseline reuses the same layout with an empty `encoder_t`, so its single
/// regression network is encoder_s followed by decoder.
struct TranslatorModel {
  ModelKind kind = ModelKind::Hae;
  std::string source_name;
  std::string target_name;
  Eigen::Index latent_dim = kDefaultLatentDim;
  bool latent_relu = false;
  nn::LayerStack<double> encoder_s;
  nn::LayerStack<double> encoder_t;
  nn::LayerStack<double> decoder;

  Eigen::Index source_dim() const { return encoder_s.in_dim(); }
  Eigen::Index target_dim() const { return decoder.out_dim(); }
};

struct BuildOptions {
  Eigen::Index latent_dim = kDefaultLatentDim;
  ModelKind kind = ModelKind::Hae;
  std::uint64_t seed = 0;
  bool latent_relu = false;  // ReLU on the latent layer itself
  std::string source_name;
  std::string target_name;
};

/// Encoder widths for an input of `dim`: the input width repeated as hidden layers
/// (three of them from 1024 up, two below), then the latent width.
std::vector<Eigen::Index> encoder_widths(Eigen::Index dim, Eigen::Index latent_dim);

TranslatorModel build(Eigen::Index source_dim, Eigen::Index target_dim, const BuildOptions& options);

struct TrainConfig {
  double lr = 1e-5;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct ErrorTerms {
  double translation = 0.0;
  double reconstruction = 0.0;  // always 0 for the MLP baseline
  double total() const { return translation + reconstruction; }
};

struct TrainLog {
  std::vector<ErrorTerms> train;
  std::vector<ErrorTerms> validation;
  std::size_t best_epoch = 0;  // 0-based index into the vectors above
  bool early_stopped = false;

  std::size_t epochs() const { return train.size(); }
};

struct TrainResult {
  TranslatorModel model;  // parameters from the best validation epoch
  TrainLog log;
};

using EpochCallback = std::function<void(std::size_t epoch, const ErrorTerms& train, const ErrorTerms& val)>;

/// Minimizes mean translation error plus mean reconstruction error with Adam, stopping at
/// `max_epochs` or after `patience` epochs without a better validation total.
/// Target rows must be unit norm since decoder outputs always are.
TrainResult train(TranslatorModel model, const PairedSet& paired, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

FeatureSet translate(const TranslatorModel& model, const FeatureSet& src);
FeatureSet reconstruct(const TranslatorModel& model, const FeatureSet& tgt);

/// Mean translation and reconstruction distances of `model` on `paired`.
ErrorTerms error_terms(const TranslatorModel& model, const PairedSet& paired);

std::vector<std::uint8_t> serialize_model(const TranslatorModel& model);
TranslatorModel deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const TranslatorModel& model, const std::filesystem::path& path);
TranslatorModel load_model(const std::filesystem::path& path);

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path);

}  // namespace feattrans
