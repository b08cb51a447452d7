#include "quite/model.hpp"

#include <set>

#include "quite/checkpoint.hpp"
#include "quite/config.hpp"
#include "quite/errors.hpp"
#include "quite/ops.hpp"

namespace quite::model {

Architecture parse_architecture(const std::string& name) {
    if (name == "quitepp") return Architecture::quitepp;
    if (name == "patch_transformer") return Architecture::patch_transformer;
    if (name == "variate_transformer") return Architecture::variate_transformer;
    throw ValidationError("unknown architecture '" + name + "' (quitepp, patch_transformer, variate_transformer)");
}

std::string to_string(Architecture arch) {
    switch (arch) {
        case Architecture::quitepp: return "quitepp";
        case Architecture::patch_transformer: return "patch_transformer";
        case Architecture::variate_transformer: return "variate_transformer";
    }
    return "?";
}

void ModelConfig::validate() const {
    if (num_variables == 0) throw ValidationError("model.num_variables must be positive");
    if (dim == 0 || heads == 0 || dim % heads != 0) {
        throw ValidationError("model.dim (" + std::to_string(dim) + ") must be a positive multiple of model.heads (" +
                              std::to_string(heads) + ")");
    }
    if (patched() && num_patches == 0) throw ValidationError("model.num_patches must be positive");
    if (architecture == Architecture::quitepp && layers == 0) throw ValidationError("model.layers must be >= 1");
    if (architecture != Architecture::quitepp && layers > kMaxBackboneDepth) {
        throw ValidationError("backbone depth must be <= " + std::to_string(kMaxBackboneDepth));
    }
    if (num_classes == 1) throw ValidationError("model.num_classes must be 0 (forecast) or >= 2");
    if (embedding == embed::EmbeddingKind::conventional && (grid_width == 0 || !(grid_region > 0.0))) {
        throw ValidationError("conventional embedding needs positive model.grid_width and model.grid_region");
    }
}

std::map<std::string, std::string> ModelConfig::to_entries() const {
    return {
        {"model.architecture", to_string(architecture)},
        {"model.embedding", embed::to_string(embedding)},
        {"model.query_init", embed::to_string(query_init)},
        {"model.num_variables", std::to_string(num_variables)},
        {"model.num_patches", std::to_string(num_patches)},
        {"model.dim", std::to_string(dim)},
        {"model.heads", std::to_string(heads)},
        {"model.layers", std::to_string(layers)},
        {"model.num_classes", std::to_string(num_classes)},
        {"model.grid_width", std::to_string(grid_width)},
        {"model.grid_origin", data::format_real(grid_origin)},
        {"model.grid_region", data::format_real(grid_region)},
        {"model.seed", std::to_string(seed)},
    };
}

ModelConfig ModelConfig::from_entries(const std::map<std::string, std::string>& entries) {
    Config cfg;
    const auto known = ModelConfig{}.to_entries();
    for (const auto& [k, v] : entries) {
        if (k.rfind("model.", 0) != 0) continue;
        if (!known.count(k)) throw ValidationError("unknown config key '" + k + "'");
        cfg.set(k, v);
    }
    ModelConfig m;
    m.architecture = parse_architecture(cfg.get("model.architecture", to_string(m.architecture)));
    m.embedding = embed::parse_embedding_kind(cfg.get("model.embedding", embed::to_string(m.embedding)));
    m.query_init = embed::parse_query_init(cfg.get("model.query_init", embed::to_string(m.query_init)));
    m.num_variables = cfg.get_size("model.num_variables", m.num_variables);
    m.num_patches = cfg.get_size("model.num_patches", m.num_patches);
    m.dim = cfg.get_size("model.dim", m.dim);
    m.heads = cfg.get_size("model.heads", m.heads);
    m.layers = cfg.get_size("model.layers", m.layers);
    m.num_classes = cfg.get_size("model.num_classes", m.num_classes);
    m.grid_width = cfg.get_size("model.grid_width", m.grid_width);
    m.grid_origin = cfg.get_double("model.grid_origin", m.grid_origin);
    m.grid_region = cfg.get_double("model.grid_region", m.grid_region);
    m.seed = cfg.get_u64("model.seed", m.seed);
    m.validate();
    return m;
}

Forecaster::Forecaster(const ModelConfig& config) : config_(config), params_(std::make_unique<ParamStore>(config.seed)) {
    config_.validate();
    ParamStore& p = *params_;
    const std::size_t D = config_.dim;
    time_ = std::make_unique<embed::TimeEmbedder>(p, "time", D);
    // Encoder and head are built before the embedding so their initial
    // values do not depend on which embedding is plugged in.
    switch (config_.architecture) {
        case Architecture::quitepp:
            encoder_ = std::make_unique<HierarchicalEncoder>(p, "encoder", config_.num_variables, config_.num_patches,
                                                             D, config_.heads, config_.layers);
            break;
        case Architecture::patch_transformer:
            encoder_ = make_backbone(p, "encoder", BackboneFamily::patch_transformer, D, config_.heads, config_.layers);
            break;
        case Architecture::variate_transformer:
            encoder_ = make_backbone(p, "encoder", BackboneFamily::variate_transformer, D, config_.heads,
                                     config_.layers);
            break;
    }
    if (config_.classifier()) {
        classifier_ = std::make_unique<ClassifierHead>(p, "classifier", config_.num_variables, D, config_.num_classes);
    } else {
        decoder_ = std::make_unique<ForecastDecoder>(p, "decoder", D, config_.heads, *time_);
    }
    embed::EmbeddingLayout layout;
    layout.num_variables = config_.num_variables;
    layout.num_patches = config_.patched() ? config_.num_patches : 0;
    layout.dim = D;
    layout.heads = config_.heads;
    layout.query_init = config_.query_init;
    layout.grid_width = config_.grid_width;
    layout.grid_origin = config_.grid_origin;
    layout.grid_region = config_.grid_region;
    embedding_ = embed::make_embedding(p, "embed", config_.embedding, layout, *time_);
}

embed::EmbeddingOutput Forecaster::embed(const data::PaddedBatch& batch) const { return embedding_->forward(batch); }

Encoded Forecaster::encode(const data::PaddedBatch& batch) const { return encoder_->encode(embed(batch)); }

Tensor Forecaster::forecast(const data::PaddedBatch& batch, const QueryIndex& index,
                            std::span<const double> tau) const {
    if (!decoder_) throw ValidationError("model was built for classification");
    return decoder_->forward(encode(batch), index, tau);
}

Tensor Forecaster::forecast_grid(const data::PaddedBatch& batch, const Tensor& tau) const {
    if (!decoder_) throw ValidationError("model was built for classification");
    return decoder_->forward_grid(encode(batch), tau);
}

Tensor Forecaster::classify(const data::PaddedBatch& batch) const {
    if (!classifier_) throw ValidationError("model was built for forecasting");
    return classifier_->forward(encode(batch));
}

std::map<std::string, Shape> Forecaster::backbone_manifest() const {
    std::map<std::string, Shape> out;
    for (const auto& [name, t] : *params_) {
        if (name.rfind("embed.", 0) != 0) out[name] = t.shape();
    }
    return out;
}

void Forecaster::save(const std::string& base) const { save_checkpoint(base, *params_, config_.to_entries()); }

std::unique_ptr<Forecaster> Forecaster::load(const std::string& base) {
    auto model = std::make_unique<Forecaster>(ModelConfig::from_entries(read_checkpoint_meta(base)));
    load_checkpoint(base, model->params());
    return model;
}

}  // namespace quite::model
