#include "quite/errors.hpp"
#include "quite/harness.hpp"

namespace quite::harness {

std::uint64_t conventional_variable_cost(std::uint64_t B, std::uint64_t N, std::uint64_t Lv, std::uint64_t D) {
    return B * N * Lv * D;
}

std::uint64_t conventional_patch_cost(std::uint64_t B, std::uint64_t M, std::uint64_t N, std::uint64_t Lp,
                                      std::uint64_t D) {
    return B * M * N * Lp * D;
}

std::uint64_t query_variable_cost(std::uint64_t B, std::uint64_t N, std::uint64_t Lv, std::uint64_t D) {
    const std::uint64_t S = Lv + 1;
    return B * N * (S * S * D + S * D * D);
}

std::uint64_t query_patch_cost(std::uint64_t B, std::uint64_t M, std::uint64_t N, std::uint64_t Lp, std::uint64_t D) {
    const std::uint64_t S = Lp + 1;
    return B * M * N * (S * S * D + S * D * D);
}

CostReport estimate_cost(const model::ModelConfig& config, std::uint64_t B, std::uint64_t Lv, std::uint64_t Lp,
                         std::uint64_t L_pred) {
    if (B == 0 || Lv == 0 || Lp == 0) throw ValidationError("cost extents must be positive");
    config.validate();
    CostReport r;
    r.parameters = model::Forecaster(config).params().total_elements();

    const std::uint64_t N = config.num_variables, D = config.dim;
    const std::uint64_t M = config.patched() ? config.num_patches : 1;
    const std::uint64_t L = config.patched() ? Lp : Lv;
    r.conventional_variable = conventional_variable_cost(B, N, Lv, D);
    r.conventional_patch = conventional_patch_cost(B, config.num_patches, N, Lp, D);
    r.query_variable = query_variable_cost(B, N, Lv, D);
    r.query_patch = query_patch_cost(B, config.num_patches, N, Lp, D);

    switch (config.embedding) {
        case embed::EmbeddingKind::conventional:
            r.stages["tokenization"] = 0;
            r.stages["aggregation"] = B * M * N * config.grid_width * D;
            break;
        case embed::EmbeddingKind::quite:
            r.stages["tokenization"] = 2 * B * M * N * L * D;
            r.stages["aggregation"] = config.patched() ? r.query_patch : r.query_variable;
            break;
        case embed::EmbeddingKind::meanpool:
            r.stages["tokenization"] = 2 * B * M * N * L * D;
            r.stages["aggregation"] = B * M * N * (L * L * D + L * D * D);
            break;
        default:
            r.stages["tokenization"] = 2 * B * M * N * L * D;
            r.stages["aggregation"] = B * M * N * L * D;
            break;
    }
    const std::uint64_t layers = config.layers;
    std::uint64_t encoder = 0;
    if (config.architecture == model::Architecture::quitepp) {
        encoder = layers * (B * N * ((M + 1) * (M + 1) * D + (M + 1) * D * D) + B * (N * N * D + N * D * D));
    } else if (config.architecture == model::Architecture::patch_transformer) {
        encoder = layers * B * N * (M * M * D + M * D * D);
    } else {
        encoder = layers * B * (N * N * D + N * D * D);
    }
    r.stages["encoder"] = encoder;
    if (config.classifier()) {
        r.stages["head"] = B * (N * D * D + D * D + D * config.num_classes);
    } else {
        // Two cross-attention paths (global: one key, local: M keys) and f_out.
        r.stages["decoder"] = B * N * L_pred * ((M + 1) * D + 2 * D * D + 2 * D * D + D);
    }
    return r;
}

}  // namespace quite::harness
