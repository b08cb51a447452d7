#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "quite/backbones.hpp"
#include "quite/quitepp.hpp"

namespace quite::model {

enum class Architecture { quitepp, patch_transformer, variate_transformer };

Architecture parse_architecture(const std::string& name);
std::string to_string(Architecture arch);

struct ModelConfig {
    Architecture architecture = Architecture::quitepp;
    embed::EmbeddingKind embedding = embed::EmbeddingKind::quite;
    embed::QueryInit query_init = embed::QueryInit::random_normal;
    std::size_t num_variables = 4;
    std::size_t num_patches = 4;
    std::size_t dim = 32;
    std::size_t heads = 4;
    std::size_t layers = 1;       // encoder layers, or backbone depth
    std::size_t num_classes = 0;  // 0 = forecasting head
    std::size_t grid_width = 8;   // conventional embedding only
    double grid_origin = 0.0;
    double grid_region = 0.125;
    std::uint64_t seed = 1;

    bool patched() const { return architecture != Architecture::variate_transformer; }
    bool classifier() const { return num_classes > 0; }
    void validate() const;

    /// Flat `model.*` entries, as stored in checkpoints and config files.
    std::map<std::string, std::string> to_entries() const;
    /// Reads `model.*` keys; unknown `model.*` keys are rejected.
    static ModelConfig from_entries(const std::map<std::string, std::string>& entries);
};

/// Time embedding, structured embedding, encoder (hierarchical or a
/// backbone) and a forecasting or classification head over one ParamStore.
/// Parameter prefixes: time, embed, encoder, decoder / classifier.
class Forecaster {
public:
    explicit Forecaster(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    ParamStore& params() { return *params_; }
    const ParamStore& params() const { return *params_; }

    embed::EmbeddingOutput embed(const data::PaddedBatch& batch) const;
    Encoded encode(const data::PaddedBatch& batch) const;
    /// Padded query lists -> [B, P].
    Tensor forecast(const data::PaddedBatch& batch, const QueryIndex& index, std::span<const double> tau) const;
    /// tau[B, L_pred] -> [B, L_pred, N].
    Tensor forecast_grid(const data::PaddedBatch& batch, const Tensor& tau) const;
    /// -> logits [B, classes].
    Tensor classify(const data::PaddedBatch& batch) const;

    const embed::TimeEmbedder& time() const { return *time_; }
    const embed::Embedding& embedding() const { return *embedding_; }
    const Encoder& encoder() const { return *encoder_; }
    const ForecastDecoder* decoder() const { return decoder_.get(); }

    /// name -> shape for every parameter outside the embedding module.
    std::map<std::string, Shape> backbone_manifest() const;

    void save(const std::string& base) const;
    static std::unique_ptr<Forecaster> load(const std::string& base);

private:
    ModelConfig config_;
    std::unique_ptr<ParamStore> params_;
    std::unique_ptr<embed::TimeEmbedder> time_;
    std::unique_ptr<Encoder> encoder_;
    std::unique_ptr<ForecastDecoder> decoder_;
    std::unique_ptr<ClassifierHead> classifier_;
    std::unique_ptr<embed::Embedding> embedding_;
};

}  // namespace quite::model
