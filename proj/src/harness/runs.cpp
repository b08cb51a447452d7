#include <cmath>

#include "quite/errors.hpp"
#include "quite/harness.hpp"

namespace quite::harness {

std::vector<VariantResult> ablate(const Experiment& exp, const PreparedData& data) {
    std::vector<VariantResult> out;
    for (const auto& variant : exp.train.variants) {
        Experiment e = exp;
        e.model.embedding = embed::parse_embedding_kind(variant);
        VariantResult r;
        r.variant = variant;
        for (std::uint64_t seed : exp.train.seeds) {
            SeedRun run = run_seed(e, data, seed);
            r.mse.push_back(run.test.mse);
            r.mae.push_back(run.test.mae);
        }
        out.push_back(std::move(r));
    }
    return out;
}

PreparedData remove_history(const PreparedData& data, double ratio, std::uint64_t seed, bool all_splits) {
    PreparedData out = data;
    // The draw stream ignores the ratio, so larger ratios remove supersets.
    auto thin = [&](std::vector<data::ForecastSplit>& splits, std::uint64_t stream) {
        for (std::size_t i = 0; i < splits.size(); ++i) {
            auto rng = data::instance_rng(seed, i, stream);
            splits[i] = data::remove_history(splits[i], ratio, rng);
        }
    };
    thin(out.test, 101);
    if (all_splits) {
        thin(out.train, 102);
        thin(out.val, 103);
    }
    return out;
}

std::vector<SweepPoint> sparsity_sweep(const Experiment& exp, const PreparedData& data) {
    std::vector<SweepPoint> points;
    for (double r : exp.train.sweep_ratios) {
        if (!(r >= 0.0 && r < 1.0)) throw ValidationError("removal ratio must lie in [0, 1)");
        points.push_back({r, {}, {}});
    }
    for (std::uint64_t seed : exp.train.seeds) {
        if (exp.train.sweep_retrain) {
            for (auto& p : points) {
                SeedRun run = run_seed(exp, remove_history(data, p.ratio, seed, true), seed);
                p.mse.push_back(run.test.mse);
                p.mae.push_back(run.test.mae);
            }
        } else {
            std::unique_ptr<model::Forecaster> model;
            run_seed(exp, data, seed, &model);
            for (auto& p : points) {
                PreparedData thinned = remove_history(data, p.ratio, seed, false);
                ForecastMetrics m =
                    evaluate_forecast(*model, thinned, thinned.test, exp.train.batch_size, exp.train.raw_metrics);
                p.mse.push_back(m.mse);
                p.mae.push_back(m.mae);
            }
        }
    }
    return points;
}

std::vector<GridCell> grid_search(const Experiment& exp, const PreparedData& data) {
    std::vector<GridCell> cells;
    const std::uint64_t seed = exp.train.seeds.front();
    for (std::size_t dim : exp.train.grid_dims)
        for (std::size_t layers : exp.train.grid_layers)
            for (std::size_t heads : exp.train.grid_heads) {
                if (heads == 0 || dim % heads != 0) continue;
                if (exp.model.architecture != model::Architecture::quitepp && layers > model::kMaxBackboneDepth) {
                    continue;
                }
                Experiment e = exp;
                e.model.dim = dim;
                e.model.layers = layers;
                e.model.heads = heads;
                SeedRun run = run_seed(e, data, seed);
                cells.push_back({dim, layers, heads, run.training.best_val,
                                 exp.train.task == Task::forecast ? run.test.mse : 0.0});
            }
    if (cells.empty()) throw ValidationError("grid search has no valid (dim, heads) combination");
    return cells;
}

}  // namespace quite::harness
